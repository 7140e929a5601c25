#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "qlan/allocation.hpp"
#include "qlan/coincidence.hpp"
#include "qlan/config.hpp"
#include "qlan/experiment.hpp"
#include "qlan/random.hpp"
#include "qlan/report.hpp"
#include "qlan/version.hpp"

namespace py = pybind11;
using namespace qlan;

namespace {

Label to_label(const std::string& text) {
  const auto l = parse_label(text);
  if (!l) fail(ErrorCode::InvalidArgument, "unknown label '" + text + "'");
  return *l;
}

Subsystem to_slot(const std::string& text) {
  if (text == "first") return Subsystem::First;
  if (text == "second") return Subsystem::Second;
  fail(ErrorCode::InvalidArgument, "slot must be 'first' or 'second'");
}

std::string run_json(const std::string& config_path, std::optional<std::uint64_t> seed, std::optional<double> integration_s,
                     std::optional<int> samples, std::optional<double> window_ns, bool rsp) {
  const ExperimentConfig c = load_config(config_path);
  RunOptions o;
  o.seed = seed;
  o.integration_s = integration_s;
  o.samples = samples;
  o.window_ns = window_ns;
  o.rsp = rsp;
  ExperimentResult r;
  {
    py::gil_scoped_release release;
    r = run_experiment(c, o);
  }
  return experiment_json(r);
}

std::string tomo_json(const std::vector<std::tuple<std::string, std::string, std::uint64_t>>& rows, double integration_s,
                      std::optional<double> rate, int samples, std::uint64_t seed, const std::string& link) {
  std::ostringstream csv;
  csv << "setting1,setting2,count\n";
  for (const auto& [a, b, n] : rows) csv << a << ',' << b << ',' << n << '\n';
  std::istringstream in(csv.str());
  const auto records = read_counts_csv(in, integration_s);
  double r = 0.0;
  if (rate) {
    r = *rate;
  } else {
    std::uint64_t total = 0;
    for (const auto& rec : records) total += rec.count;
    r = static_cast<double>(total) / integration_s / (static_cast<double>(records.size()) / 4.0);
  }
  SamplerOptions so;
  so.num_samples = samples;
  so.seed = seed;
  PosteriorEnsemble<4> post;
  {
    py::gil_scoped_release release;
    post = sample_posterior(records, so);
  }
  LinkReport report = summarize_link(post, r);
  report.link = link;
  return link_report_json(report);
}

}  // namespace

PYBIND11_MODULE(_qlan, m) {
  m.doc() = "qlan native core";
  m.attr("__version__") = kVersion;

  py::register_exception<Error>(m, "QlanError");

  m.def("log_negativity", [](const Matrix4& rho) { return log_negativity(DensityMatrix2Q(rho)); }, py::arg("rho"));
  m.def("bell_fidelity", [](const Matrix4& rho) {
    return fidelity_with_pure(MatrixX(rho), Eigen::VectorXcd(states::bell(states::Bell::PsiPlus)));
  }, py::arg("rho"));
  m.def("werner", [](double p) { return Matrix4(states::werner(p).matrix()); }, py::arg("p"));
  m.def("partial_trace", [](const Matrix4& rho, const std::string& keep) {
    return Matrix2(partial_trace(DensityMatrix2Q(rho), to_slot(keep)).matrix());
  }, py::arg("rho"), py::arg("keep"));

  m.def("setting_for", [](const std::string& label, double x) {
    const AnalyzerSetting s = setting_for(to_label(label), x);
    return std::make_pair(s.qwp_deg(), s.hwp_deg());
  }, py::arg("label"), py::arg("x_deg") = 0.0);
  m.def("analyzer_state", [](double qwp, double hwp) { return Ket2(analyzer_state({qwp, hwp})); }, py::arg("qwp_deg"), py::arg("hwp_deg"));
  m.def("solve_compensation_x", [](const Matrix4& rho, const std::string& tuned) {
    return solve_compensation_x(DensityMatrix2Q(rho), to_slot(tuned));
  }, py::arg("rho"), py::arg("tuned") = "second");
  m.def("rsp_predict", [](const Matrix4& rho, const std::string& projection, const std::string& sender) {
    const Ket2 k = label_state(to_label(projection));
    const RspPrediction p = rsp_predict(DensityMatrix2Q(rho), k * k.adjoint(), to_slot(sender));
    return std::make_pair(Matrix2(p.state.matrix()), p.probability);
  }, py::arg("rho"), py::arg("projection"), py::arg("sender"));

  m.def("channel_frequencies", [](int n) {
    const auto f = channel_frequencies(n);
    return py::dict(py::arg("signal_thz") = f.signal_thz, py::arg("idler_thz") = f.idler_thz,
                    py::arg("signal_itu") = f.signal_itu, py::arg("idler_itu") = f.idler_itu);
  }, py::arg("n"));
  m.def("derive_seed", [](std::uint64_t master, const std::string& name) { return derive_seed(master, name); });

  m.def("config_json", [](const std::string& path) { return config_to_json(load_config(path)); }, py::arg("path"));
  m.def("parse_config_json", [](const std::string& text) { return config_to_json(parse_config(text)); }, py::arg("text"));

  m.def("jsi", [](const std::string& path, std::optional<std::uint64_t> seed) {
    const ExperimentConfig c = load_config(path);
    JsiOptions o;
    o.integration_s = c.jsi.integration_s;
    o.eff_signal = c.jsi.eff_signal;
    o.eff_idler = c.jsi.eff_idler;
    o.floor_rate_hz = c.jsi.floor_rate_hz;
    o.poisson = c.jsi.poisson;
    o.seed = derive_seed(seed.value_or(c.seed), "jsi");
    const Eigen::MatrixXd mat = jsi_matrix(c.channels, o);
    return std::make_pair(mat, car(mat));
  }, py::arg("config_path"), py::arg("seed") = py::none());

  m.def("allocate", [](const std::string& path, const std::string& objective) {
    const ExperimentConfig c = load_config(path);
    PredictionOptions po;
    po.window_ns = c.plan.window_ns;
    const OptimizeResult r = optimize(parse_objective(objective.empty() ? c.objective : objective), c.channels, c.budgets(), po);
    py::list links;
    for (const auto& p : r.predictions) {
      links.append(py::dict(py::arg("link") = p.link.id(), py::arg("channels") = p.channels,
                            py::arg("coincidence_rate") = p.coincidence_rate, py::arg("accidental_rate") = p.accidental_rate,
                            py::arg("fidelity") = p.fidelity, py::arg("log_negativity") = p.log_negativity,
                            py::arg("ebit_rate") = p.ebit_rate));
    }
    return py::dict(py::arg("score") = r.score, py::arg("assignment") = r.assignment, py::arg("links") = links);
  }, py::arg("config_path"), py::arg("objective") = "");

  m.def("read_stream", [](const std::string& path) {
    const TimetagStream s = read_stream(std::filesystem::path(path));
    std::vector<std::uint64_t> bins;
    bins.reserve(s.records.size());
    for (const auto& r : s.records) bins.push_back(r.global_bin);
    return py::make_tuple(s.node_id, s.clock_resolution_ps, bins);
  }, py::arg("path"));
  m.def("correlate_files", [](const std::string& a_path, const std::string& b_path, double window_ns, std::int64_t span_bins) {
    const TimetagStream a = read_stream(std::filesystem::path(a_path));
    const TimetagStream b = read_stream(std::filesystem::path(b_path));
    const DelayHistogram h = delay_histogram(a, b, span_bins, 1);
    OffsetEstimate off{};
    if (!h.counts.empty()) off = find_offset(h);
    const std::int64_t d = align_window(h, off.delay_bins, window_ns);
    const CoincidenceResult r = correlate(a, b, d, window_ns, std::max(a.span_s(), b.span_s()));
    return coincidence_json(r, off, a.node_id, b.node_id);
  }, py::arg("first"), py::arg("second"), py::arg("window_ns") = 10.0, py::arg("span_bins") = 10000);

  m.def("tomography_json", &tomo_json, py::arg("rows"), py::arg("integration_s") = 60.0, py::arg("rate") = py::none(),
        py::arg("samples") = 1024, py::arg("seed") = 0, py::arg("link") = "");
  m.def("run_experiment_json", &run_json, py::arg("config_path"), py::arg("seed") = py::none(),
        py::arg("integration_s") = py::none(), py::arg("samples") = py::none(), py::arg("window_ns") = py::none(),
        py::arg("rsp") = true);
}
