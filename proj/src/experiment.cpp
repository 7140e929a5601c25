#include "qlan/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <thread>

#include "qlan/coincidence.hpp"
#include "qlan/random.hpp"

namespace qlan {

namespace {

constexpr std::uint64_t kMinPostselected = 100;

std::vector<Label> basis_labels(const std::string& basis) {
  if (basis == "HV") return {Label::H, Label::V};
  if (basis == "DA") return {Label::D, Label::A};
  if (basis == "RL") return {Label::R, Label::L};
  fail(ErrorCode::ConfigError, "unknown basis " + basis);
}

std::string setting_key(Label a, Label b) { return {label_char(a), label_char(b)}; }

struct LinkContext {
  const ExperimentConfig& config;
  SimNode first;
  SimNode second;
  std::uint64_t seed;
  double integration_s;
  SimulationOptions sim;

  std::pair<TimetagStream, TimetagStream> simulate(const LinkRun& run, const AnalyzerSetting& s1,
                                                   const AnalyzerSetting& s2, int slot,
                                                   const std::string& name) const {
    SimulationOptions o = sim;
    o.start_s = slot * integration_s;
    return simulate_link(run.source_state, run.pair_rate, first, second, s1, s2, integration_s,
                         derive_seed(seed, "sim/" + run.link.id() + "/" + name), o);
  }
};

LinkContext make_context(const ExperimentConfig& config, const LinkRun& run, const RunOptions& options) {
  SimulationOptions sim;
  sim.clock_resolution_ps = config.clock_resolution_ps;
  return {config,
          config.sim_node(run.link.first),
          config.sim_node(run.link.second),
          options.seed.value_or(config.seed),
          options.integration_s.value_or(config.plan.integration_s),
          sim};
}

SamplerOptions sampler_options(const ExperimentConfig& config, const RunOptions& options, const std::string& name) {
  SamplerOptions s;
  s.num_samples = options.samples.value_or(config.plan.samples);
  s.seed = derive_seed(options.seed.value_or(config.seed), name);
  return s;
}

void measure_link(LinkRun& run, const ExperimentConfig& config, const RunOptions& options) {
  const LinkContext ctx = make_context(config, run, options);
  std::vector<std::pair<Label, Label>> schedule;
  for (const auto& basis : config.plan.bases) {
    for (Label a : basis_labels(basis))
      for (Label b : basis_labels(basis)) schedule.emplace_back(a, b);
  }
  auto settings_of = [&](const std::pair<Label, Label>& s) {
    return std::make_pair(setting_for(s.first, run.x_first), setting_for(s.second, run.x_second));
  };

  DelayHistogram total;
  for (std::size_t k = 0; k < schedule.size(); ++k) {
    const auto [s1, s2] = settings_of(schedule[k]);
    const auto [a, b] = ctx.simulate(run, s1, s2, run.schedule_slot + static_cast<int>(k),
                                     setting_key(schedule[k].first, schedule[k].second));
    const DelayHistogram h = delay_histogram(a, b, config.plan.histogram_span_bins, 1);
    if (k == 0) {
      total = h;
    } else {
      total += h;
    }
  }
  const OffsetEstimate offset = find_offset(total);
  run.delay_bins = align_window(total, offset.delay_bins, run.window_ns);
  run.low_confidence = offset.low_confidence;

  const AccidentalOptions acc{config.plan.accidental_shifts, config.plan.shift_ns};
  std::map<std::string, std::uint64_t> raw;
  std::map<std::string, double> accidentals;
  for (std::size_t k = 0; k < schedule.size(); ++k) {
    const auto [s1, s2] = settings_of(schedule[k]);
    const std::string key = setting_key(schedule[k].first, schedule[k].second);
    const auto [a, b] = ctx.simulate(run, s1, s2, run.schedule_slot + static_cast<int>(k), key);
    const CoincidenceResult c = correlate(a, b, run.delay_bins, run.window_ns, ctx.integration_s, acc);
    SettingCounts sc;
    sc.first = schedule[k].first;
    sc.second = schedule[k].second;
    sc.raw = c.raw_coincidences;
    sc.accidentals = c.accidentals;
    sc.singles_first = a.records.size();
    sc.singles_second = b.records.size();
    run.settings.push_back(sc);
    raw[key] = c.raw_coincidences;
    accidentals[key] = c.accidentals;
  }
  const auto subtracted = subtracted_counts(raw, accidentals);
  for (auto& sc : run.settings) sc.subtracted = subtracted.at(setting_key(sc.first, sc.second));

  // Coincidence rate: counts of a full basis pair per unit time, averaged over bases.
  const double per_basis = static_cast<double>(config.plan.bases.size());
  for (const auto& sc : run.settings) {
    run.raw_rate += sc.raw / ctx.integration_s / per_basis;
    run.subtracted_rate += sc.subtracted / ctx.integration_s / per_basis;
  }
}

std::vector<MeasurementRecord> link_records(const LinkRun& run, bool subtracted) {
  std::vector<MeasurementRecord> out;
  for (const auto& sc : run.settings) {
    out.push_back({setting_for(sc.first), setting_for(sc.second), subtracted ? sc.subtracted : sc.raw, run.integration_s});
  }
  return out;
}

void record_error(LinkRun& run, const Error& e) {
  if (run.error.empty()) {
    run.error = e.what();
    run.error_code = e.code();
  }
}

}  // namespace

RspPrediction rsp_predict(const DensityMatrix2Q& rho, const Matrix2& projection, Subsystem sender) {
  const Matrix2 id = Matrix2::Identity();
  const MatrixX op = sender == Subsystem::First ? kron(MatrixX(projection), MatrixX(id))
                                                : kron(MatrixX(id), MatrixX(projection));
  const Matrix4 post = op * rho.matrix() * op.adjoint();
  const double p = post.trace().real();
  if (!(p > 1e-12)) fail(ErrorCode::ZeroProbabilityProjection, "sender projection has zero probability");
  Matrix2 cond = Matrix2::Zero();
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      for (int k = 0; k < 2; ++k) {
        cond(i, j) += sender == Subsystem::First ? post(2 * k + i, 2 * k + j) : post(2 * i + k, 2 * j + k);
      }
    }
  }
  cond /= p;
  cond = 0.5 * (cond + cond.adjoint()).eval();
  return {DensityMatrix1Q(cond), p};
}

RspReport rsp_analyze(const RspTask& task, const std::vector<QubitRecord>& records,
                      const DensityMatrix2Q& link_estimate, Subsystem sender, const SamplerOptions& options) {
  RspReport r;
  r.task = task;
  r.records = records;
  for (const auto& rec : records) r.postselected += rec.count;
  if (r.postselected < kMinPostselected) {
    fail(ErrorCode::InsufficientCounts, "only " + std::to_string(r.postselected) + " post-selected events for " +
                                            task.sender + " on " + task.link.id());
  }
  const Ket2 proj = label_state(task.projection);
  const RspPrediction pred = rsp_predict(link_estimate, proj * proj.adjoint(), sender);
  r.prediction = pred.state;
  r.success_probability = pred.probability;

  const PosteriorEnsemble<2> post = qubit_tomography(records, options);
  r.mean = post.mean;
  r.diagnostics = post.diagnostics;
  const Ket2 target = label_state(task.target);
  std::vector<double> ft, fp;
  for (const auto& s : post.samples) {
    ft.push_back(fidelity_with_pure(s, target));
    fp.push_back(fidelity(s, r.prediction));
    r.sample_stokes.push_back(stokes(s));
  }
  r.fidelity_target = mean_std(ft);
  r.fidelity_prediction = mean_std(fp);
  r.mean_fidelity_prediction = fidelity(r.mean, r.prediction);
  return r;
}

RspReport rsp_execute(const RspTask& task, const ExperimentConfig& config, const LinkRun& run,
                      const RunOptions& options) {
  if (!(task.link.same_pair(run.link))) fail(ErrorCode::InvalidArgument, "task link does not match the measured link");
  if (task.sender != run.link.first && task.sender != run.link.second) {
    fail(ErrorCode::InvalidArgument, "sender " + task.sender + " is not a node of " + run.link.id());
  }
  if (!run.raw) fail(ErrorCode::InvalidArgument, "link " + run.link.id() + " has no state estimate");
  const bool sender_first = task.sender == run.link.first;
  const LinkContext ctx = make_context(config, run, options);

  int slot = run.schedule_slot + static_cast<int>(run.settings.size());
  for (const auto& t : config.rsp_tasks) {
    if (&t == &task || (t.link.same_pair(task.link) && t.sender == task.sender && t.projection == task.projection)) break;
    if (t.link.same_pair(run.link)) slot += 6;
  }

  const AnalyzerSetting sender_setting = setting_for(task.projection, sender_first ? run.x_first : run.x_second);
  std::vector<QubitRecord> records;
  for (Label l : kAllLabels) {
    const AnalyzerSetting recv = setting_for(l, sender_first ? run.x_second : run.x_first);
    const std::string name = "rsp/" + task.sender + label_char(task.projection) + "/" + label_char(l);
    const auto [a, b] = sender_first ? ctx.simulate(run, sender_setting, recv, slot, name)
                                     : ctx.simulate(run, recv, sender_setting, slot, name);
    ++slot;
    records.push_back({setting_for(l), count_coincidences(a, b, run.delay_bins, run.window_ns), ctx.integration_s});
  }
  return rsp_analyze(task, records, run.raw->mean, sender_first ? Subsystem::First : Subsystem::Second,
                     sampler_options(config, options, "rsp/" + run.link.id() + "/" + task.sender +
                                                          label_char(task.projection)));
}

ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  ExperimentResult result;
  result.seed = options.seed.value_or(config.seed);
  const double integration = options.integration_s.value_or(config.plan.integration_s);
  if (!(integration > 0.0 && integration <= 3600.0)) fail(ErrorCode::InvalidDuration, "integration must lie in (0, 3600] s");
  const double window = options.window_ns.value_or(config.plan.window_ns);
  if (!(window > 0.0)) fail(ErrorCode::InvalidArgument, "window must be positive");

  const int settings_per_link = 4 * static_cast<int>(config.plan.bases.size());
  int slot = 0;
  for (const auto& link : config.links) {
    const auto channels = config.allocation.channels_for(link);
    if (channels.empty()) continue;
    LinkRun run;
    run.link = link;
    run.channels = channels;
    std::vector<ChannelPairSpec> specs;
    for (int ch : channels) {
      if (ch < 1 || ch > static_cast<int>(config.channels.size())) {
        fail(ErrorCode::InvalidAllocation, "channel " + std::to_string(ch) + " is not configured");
      }
      specs.push_back(config.channels[ch - 1]);
      run.pair_rate += specs.back().pair_rate;
    }
    run.source_state = mixture_state(specs);
    run.integration_s = integration;
    run.window_ns = window;
    run.schedule_slot = slot;
    int tasks = 0;
    for (const auto& t : config.rsp_tasks) tasks += t.link.same_pair(link) ? 1 : 0;
    slot += settings_per_link + 6 * tasks;
    result.links.push_back(std::move(run));
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < result.links.size(); i = next++) {
      LinkRun& run = result.links[i];
      try {
        run.x_first = 0.0;
        run.x_second = solve_compensation_x(run.source_state, Subsystem::Second);
        run.frame_state = analysis_frame_state(run.source_state, run.x_first, run.x_second);
        measure_link(run, config, options);
        if (!options.tomography) continue;
        const std::string base = "tomo/" + run.link.id();
        run.raw = summarize_link(sample_posterior(link_records(run, false), sampler_options(config, options, base + "/raw")),
                                 run.raw_rate);
        run.raw->link = run.link.id();
        run.raw->counts_kind = "raw";
        run.subtracted = summarize_link(
            sample_posterior(link_records(run, true), sampler_options(config, options, base + "/subtracted")),
            run.subtracted_rate);
        run.subtracted->link = run.link.id();
        run.subtracted->counts_kind = "subtracted";
      } catch (const Error& e) {
        record_error(run, e);
        continue;
      }
      if (!options.rsp || !config.plan.rsp) continue;
      for (const auto& task : config.rsp_tasks) {
        if (!task.link.same_pair(run.link)) continue;
        try {
          run.rsp.push_back(rsp_execute(task, config, run, options));
        } catch (const Error& e) {
          record_error(run, e);
        }
      }
    }
  };
  const int workers = std::clamp(options.workers > 0 ? options.workers : static_cast<int>(worker_count()), 1,
                                 std::max<int>(1, static_cast<int>(result.links.size())));
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return result;
}

}  // namespace qlan
