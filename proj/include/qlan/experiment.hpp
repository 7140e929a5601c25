#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qlan/config.hpp"
#include "qlan/tomography.hpp"

namespace qlan {

struct RspPrediction {
  DensityMatrix1Q state;
  double probability = 0.0;
};

/// Receiver state conditioned on the sender's projection, and its
/// probability. Throws ZeroProbabilityProjection when p <= 1e-12.
RspPrediction rsp_predict(const DensityMatrix2Q& rho, const Matrix2& projection, Subsystem sender);

struct RspReport {
  RspTask task;
  std::uint64_t postselected = 0;
  std::vector<QubitRecord> records;  // label-frame settings at the receiver
  DensityMatrix1Q mean;
  DensityMatrix1Q prediction;
  double success_probability = 0.0;
  Estimate fidelity_target;
  Estimate fidelity_prediction;
  double mean_fidelity_prediction = 0.0;  // posterior mean state vs prediction
  std::vector<Stokes> sample_stokes;
  SamplerDiagnostics diagnostics;
};

/// Tomography of the receiver counts and comparison against the ideal
/// target and rsp_predict(link_estimate). Throws InsufficientCounts below
/// 100 post-selected events.
RspReport rsp_analyze(const RspTask& task, const std::vector<QubitRecord>& records,
                      const DensityMatrix2Q& link_estimate, Subsystem sender, const SamplerOptions& options);

struct SettingCounts {
  Label first = Label::H;
  Label second = Label::H;
  std::uint64_t raw = 0;
  double accidentals = 0.0;
  std::uint64_t subtracted = 0;
  std::uint64_t singles_first = 0;
  std::uint64_t singles_second = 0;
};

struct LinkRun {
  Link link;
  std::vector<int> channels;
  double pair_rate = 0.0;
  DensityMatrix2Q source_state;  // physical polarization state of the channel mixture
  DensityMatrix2Q frame_state;   // the same state seen through the compensated analyzers
  double x_first = 0.0;
  double x_second = 0.0;
  double integration_s = 0.0;
  double window_ns = 10.0;
  std::int64_t delay_bins = 0;
  bool low_confidence = false;
  std::vector<SettingCounts> settings;
  double raw_rate = 0.0;
  double subtracted_rate = 0.0;
  std::optional<LinkReport> raw;
  std::optional<LinkReport> subtracted;
  std::vector<RspReport> rsp;
  std::string error;  // set when a stage failed; later stages are skipped
  ErrorCode error_code = ErrorCode::InvalidArgument;
  int schedule_slot = 0;  // first integration slot of this link
};

struct RunOptions {
  std::optional<std::uint64_t> seed;
  std::optional<double> window_ns;
  std::optional<int> samples;
  std::optional<double> integration_s;
  bool tomography = true;
  bool rsp = true;
  int workers = 0;  // 0 = worker_count()
};

struct ExperimentResult {
  std::uint64_t seed = 0;
  std::vector<LinkRun> links;
};

/// Simulates the receiver settings of one RSP task on an already measured
/// link and analyzes them.
RspReport rsp_execute(const RspTask& task, const ExperimentConfig& config, const LinkRun& run,
                      const RunOptions& options = {});

/// Per link with assigned channels: compensation, simulation of every
/// basis setting, offset search, raw and accidental counts, tomography of
/// raw and subtracted counts, then the configured RSP tasks.
ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

}  // namespace qlan
