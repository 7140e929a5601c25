"""Python access to the qlan simulator and analysis pipeline."""

import json as _json

from . import _qlan
from ._qlan import (
    QlanError,
    allocate,
    analyzer_state,
    bell_fidelity,
    channel_frequencies,
    derive_seed,
    jsi,
    log_negativity,
    partial_trace,
    read_stream,
    rsp_predict,
    setting_for,
    solve_compensation_x,
    werner,
)

__version__ = _qlan.__version__


def load_config(path):
    return _json.loads(_qlan.config_json(str(path)))


def parse_config(text):
    return _json.loads(_qlan.parse_config_json(text))


def correlate(first, second, window_ns=10.0, span_bins=10000):
    return _json.loads(_qlan.correlate_files(str(first), str(second), window_ns, span_bins))


def tomography(rows, integration_s=60.0, rate=None, samples=1024, seed=0, link=""):
    """rows: iterable of (setting1, setting2, count); settings are labels or "qwp/hwp"."""
    rows = [(str(a), str(b), int(n)) for a, b, n in rows]
    return _json.loads(_qlan.tomography_json(rows, integration_s, rate, samples, seed, link))


def run_experiment(config_path, seed=None, integration_s=None, samples=None, window_ns=None, rsp=True):
    return _json.loads(_qlan.run_experiment_json(str(config_path), seed, integration_s, samples, window_ns, rsp))


__all__ = [
    "QlanError",
    "allocate",
    "analyzer_state",
    "bell_fidelity",
    "channel_frequencies",
    "correlate",
    "derive_seed",
    "jsi",
    "load_config",
    "log_negativity",
    "parse_config",
    "partial_trace",
    "read_stream",
    "rsp_predict",
    "run_experiment",
    "setting_for",
    "solve_compensation_x",
    "tomography",
    "werner",
]
