#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <openssl/evp.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "qlan/coincidence.hpp"
#include "qlan/config.hpp"
#include "qlan/experiment.hpp"
#include "qlan/random.hpp"
#include "qlan/report.hpp"
#include "qlan/version.hpp"

namespace fs = std::filesystem;
using ordered = nlohmann::ordered_json;
using namespace qlan;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitOther = 1;
constexpr int kExitValidation = 2;
constexpr int kExitConvergence = 3;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::ChainNotConverged:
      return kExitConvergence;
    case ErrorCode::ConfigError:
    case ErrorCode::IoError:
    case ErrorCode::InvalidArgument:
    case ErrorCode::InvalidAllocation:
    case ErrorCode::Infeasible:
    case ErrorCode::InvalidDuration:
    case ErrorCode::ModelMismatch:
    case ErrorCode::BadMagic:
    case ErrorCode::UnsupportedVersion:
    case ErrorCode::TruncatedFile:
    case ErrorCode::UnsortedRecords:
    case ErrorCode::ResolutionMismatch:
    case ErrorCode::IndexOutOfRange:
      return kExitValidation;
    default:
      return kExitOther;
  }
}

void report_error(const std::string& kind, const std::string& message) {
  std::cerr << ordered{{"error", kind}, {"message", message}}.dump() << "\n";
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot read " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
}

ordered file_entries(const fs::path& dir, const std::vector<std::string>& names) {
  ordered files = ordered::array();
  for (const auto& n : names) {
    files.push_back({{"path", n}, {"bytes", fs::file_size(dir / n)}, {"sha256", sha256_file(dir / n)}});
  }
  return files;
}

ordered assumptions(const ExperimentConfig& c) {
  ordered a = ordered::array();
  for (const auto& n : c.nodes) {
    std::ostringstream os;
    os << "node " << n.id << ": detector jitter " << n.detector.jitter_ps << " ps and dark rate " << n.detector.dark_rate_hz
       << " Hz are model assumptions";
    a.push_back(os.str());
  }
  a.push_back("link compensation offsets are solved on the model state");
  return a;
}

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<double> window_ns;
  std::optional<int> samples;
  std::optional<double> integration_s;
  std::optional<std::string> objective;
};

ExperimentConfig load(const Common& o) {
  ExperimentConfig c = load_config(o.config);
  if (o.seed) c.seed = *o.seed;
  if (o.window_ns) c.plan.window_ns = *o.window_ns;
  if (o.samples) c.plan.samples = *o.samples;
  if (o.integration_s) c.plan.integration_s = *o.integration_s;
  if (o.objective) {
    parse_objective(*o.objective);
    c.objective = *o.objective;
  }
  return c;
}

std::vector<std::pair<Label, Label>> schedule(const ExperimentConfig& c) {
  std::vector<std::pair<Label, Label>> out;
  for (const auto& basis : c.plan.bases) {
    const Label a = *parse_label(basis.substr(0, 1));
    const Label b = *parse_label(basis.substr(1, 1));
    for (Label x : {a, b})
      for (Label y : {a, b}) out.emplace_back(x, y);
  }
  return out;
}

int cmd_simulate(const Common& o, const std::string& out_dir) {
  const ExperimentConfig c = load(o);
  if (!(c.plan.integration_s > 0.0 && c.plan.integration_s <= 3600.0)) fail(ErrorCode::InvalidDuration, "integration must lie in (0, 3600] s");
  fs::create_directories(out_dir);
  std::vector<std::string> names;
  ordered runs = ordered::array();
  SimulationOptions sim;
  sim.clock_resolution_ps = c.clock_resolution_ps;
  int slot = 0;
  for (const auto& link : c.links) {
    const auto channels = c.allocation.channels_for(link);
    if (channels.empty()) continue;
    std::vector<ChannelPairSpec> specs;
    double rate = 0.0;
    for (int ch : channels) {
      specs.push_back(c.channels.at(static_cast<std::size_t>(ch - 1)));
      rate += specs.back().pair_rate;
    }
    const DensityMatrix2Q rho = mixture_state(specs);
    const double x2 = solve_compensation_x(rho, Subsystem::Second);
    const SimNode n1 = c.sim_node(link.first);
    const SimNode n2 = c.sim_node(link.second);
    for (const auto& [l1, l2] : schedule(c)) {
      const std::string key{label_char(l1), label_char(l2)};
      const AnalyzerSetting s1 = setting_for(l1, 0.0), s2 = setting_for(l2, x2);
      sim.start_s = slot * c.plan.integration_s;
      const std::uint64_t seed = derive_seed(c.seed, "sim/" + link.id() + "/" + key);
      const auto [a, b] = simulate_link(rho, rate, n1, n2, s1, s2, c.plan.integration_s, seed, sim);
      const std::string fa = link.id() + "_" + key + "_" + link.first + ".qltt";
      const std::string fb = link.id() + "_" + key + "_" + link.second + ".qltt";
      write_stream(a, fs::path(out_dir) / fa);
      write_stream(b, fs::path(out_dir) / fb);
      names.push_back(fa);
      names.push_back(fb);
      runs.push_back({{"link", link.id()},
                      {"labels", key},
                      {"setting_first", to_string(s1)},
                      {"setting_second", to_string(s2)},
                      {"x_first_deg", 0.0},
                      {"x_second_deg", x2},
                      {"start_s", sim.start_s},
                      {"integration_s", c.plan.integration_s},
                      {"seed", seed},
                      {"file_first", fa},
                      {"file_second", fb}});
      ++slot;
    }
    for (const auto& t : c.rsp_tasks) slot += t.link.same_pair(link) ? 6 : 0;
  }
  const ordered manifest{{"schema_version", kReportSchemaVersion},
                         {"tool", "qlan"},
                         {"version", kVersion},
                         {"command", "simulate"},
                         {"seed", c.seed},
                         {"assumptions", assumptions(c)},
                         {"config", ordered::parse(config_to_json(c))},
                         {"runs", runs},
                         {"files", file_entries(out_dir, names)}};
  write_text(fs::path(out_dir) / "manifest.json", manifest.dump(2) + "\n");
  std::cout << "wrote " << names.size() << " stream files and manifest.json to " << out_dir << "\n";
  return kExitOk;
}

int cmd_correlate(const std::string& fa, const std::string& fb, const Common& o, std::int64_t span_bins,
                  std::optional<std::int64_t> delay, int shifts, double shift_ns, const std::string& histogram_out) {
  const TimetagStream a = read_stream(fs::path(fa));
  const TimetagStream b = read_stream(fs::path(fb));
  const double window = o.window_ns.value_or(10.0);
  const DelayHistogram hist = delay_histogram(a, b, span_bins, 1);
  OffsetEstimate offset{};
  if (!hist.counts.empty()) offset = find_offset(hist);
  const std::int64_t d = delay ? *delay : align_window(hist, offset.delay_bins, window);
  double integration = o.integration_s.value_or(0.0);
  if (integration <= 0.0) integration = std::max(a.span_s(), b.span_s());
  const CoincidenceResult r = correlate(a, b, d, window, integration, {shifts, shift_ns});
  if (!histogram_out.empty()) write_text(histogram_out, histogram_csv(hist));
  std::cout << coincidence_json(r, offset, a.node_id, b.node_id);
  return kExitOk;
}

int cmd_tomo(const std::string& counts, const Common& o, std::optional<double> rate, const std::string& link,
             const std::string& samples_out) {
  std::ifstream in(counts);
  if (!in) fail(ErrorCode::IoError, "cannot open " + counts);
  const double integration = o.integration_s.value_or(60.0);
  const auto records = read_counts_csv(in, integration);
  double r = 0.0;
  if (rate) {
    r = *rate;
  } else {
    std::uint64_t total = 0;
    for (const auto& rec : records) total += rec.count;
    r = static_cast<double>(total) / integration / (static_cast<double>(records.size()) / 4.0);
  }
  SamplerOptions so;
  so.num_samples = o.samples.value_or(1024);
  so.seed = o.seed.value_or(0);
  LinkReport report = summarize_link(sample_posterior(records, so), r);
  report.link = link;
  if (!samples_out.empty()) write_text(samples_out, samples_csv(report));
  std::cout << link_report_json(report);
  return kExitOk;
}

void print_predictions(const std::vector<LinkPrediction>& preds, const std::string& title) {
  std::cout << title << "\n";
  std::cout << std::left << std::setw(8) << "link" << std::setw(18) << "channels" << std::right << std::setw(12) << "pairs/s"
            << std::setw(12) << "coinc/s" << std::setw(12) << "acc/s" << std::setw(10) << "F" << std::setw(10) << "E_N"
            << std::setw(12) << "R_E" << "\n";
  for (const auto& p : preds) {
    std::string ch;
    for (int c : p.channels) ch += (ch.empty() ? "" : ",") + std::to_string(c);
    if (ch.empty()) ch = "-";
    std::cout << std::left << std::setw(8) << p.link.id() << std::setw(18) << ch << std::right << std::fixed
              << std::setprecision(3) << std::setw(12) << std::setprecision(4) << p.pair_rate / 1e6 << std::setprecision(1)
              << std::setw(12) << p.coincidence_rate + p.accidental_rate << std::setw(12) << p.accidental_rate
              << std::setprecision(3) << std::setw(10) << p.fidelity << std::setw(10) << p.log_negativity
              << std::setprecision(1) << std::setw(12) << p.ebit_rate << "\n";
    std::cout.unsetf(std::ios::fixed);
  }
}

ordered predictions_json(const std::vector<LinkPrediction>& preds) {
  ordered out = ordered::array();
  for (const auto& p : preds) {
    out.push_back({{"link", p.link.id()},
                   {"channels", p.channels},
                   {"pair_rate", p.pair_rate},
                   {"coincidence_rate", p.coincidence_rate},
                   {"accidental_rate", p.accidental_rate},
                   {"fidelity", p.fidelity},
                   {"log_negativity", p.log_negativity},
                   {"ebit_rate", p.ebit_rate}});
  }
  return out;
}

int cmd_allocate(const Common& o, bool as_json) {
  const ExperimentConfig c = load(o);
  const Objective obj = parse_objective(c.objective);
  PredictionOptions po;
  po.window_ns = c.plan.window_ns;
  const auto budgets = c.budgets();
  const OptimizeResult best = optimize(obj, c.channels, budgets, po);
  std::vector<LinkPrediction> current;
  if (!c.allocation.entries.empty()) current = predicted_link_rates(c.allocation, c.channels, budgets, po);
  if (as_json) {
    ordered j{{"schema_version", kReportSchemaVersion},
              {"objective", to_string(obj)},
              {"score", best.score},
              {"assignment", best.assignment},
              {"optimized", predictions_json(best.predictions)},
              {"configured", predictions_json(current)}};
    std::cout << j.dump(2) << "\n";
    return kExitOk;
  }
  print_predictions(best.predictions, "optimized allocation (" + to_string(obj) + ", score " + std::to_string(best.score) + ")");
  if (!current.empty()) {
    std::cout << "\n";
    print_predictions(current, "configured allocation");
  }
  return kExitOk;
}

int cmd_jsi(const Common& o, const std::string& csv_out) {
  const ExperimentConfig c = load(o);
  JsiOptions jo;
  jo.integration_s = o.integration_s.value_or(c.jsi.integration_s);
  jo.eff_signal = c.jsi.eff_signal;
  jo.eff_idler = c.jsi.eff_idler;
  jo.floor_rate_hz = c.jsi.floor_rate_hz;
  jo.poisson = c.jsi.poisson;
  jo.seed = derive_seed(c.seed, "jsi");
  const Eigen::MatrixXd m = jsi_matrix(c.channels, jo);
  ordered rows = ordered::array(), channels = ordered::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    ordered row = ordered::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
    const auto f = channel_frequencies(static_cast<int>(i) + 1, c.grid);
    channels.push_back({{"index", i + 1}, {"signal_thz", f.signal_thz}, {"idler_thz", f.idler_thz},
                        {"signal_itu", f.signal_itu}, {"idler_itu", f.idler_itu}});
  }
  if (!csv_out.empty()) {
    std::ostringstream os;
    os << "signal,idler,count\n";
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) os << i + 1 << ',' << j + 1 << ',' << m(i, j) << '\n';
    write_text(csv_out, os.str());
  }
  std::cout << ordered{{"schema_version", kReportSchemaVersion},
                       {"integration_s", jo.integration_s},
                       {"channels", channels},
                       {"counts", rows},
                       {"car", car(m)}}
                   .dump(2)
            << "\n";
  return kExitOk;
}

int cmd_run(const Common& o, const std::string& out_dir, bool no_rsp) {
  const ExperimentConfig c = load(o);
  RunOptions ro;
  ro.rsp = !no_rsp;
  const ExperimentResult result = run_experiment(c, ro);
  const std::string table = results_csv(result);
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::vector<std::string> names;
    for (const auto& run : result.links) {
      names.push_back(run.link.id() + ".json");
      write_text(fs::path(out_dir) / names.back(), link_run_json(run));
    }
    write_text(fs::path(out_dir) / "results.csv", table);
    write_text(fs::path(out_dir) / "poincare.csv", poincare_csv(result));
    names.push_back("results.csv");
    names.push_back("poincare.csv");
    const ordered manifest{{"schema_version", kReportSchemaVersion},
                           {"tool", "qlan"},
                           {"version", kVersion},
                           {"command", "run"},
                           {"seed", c.seed},
                           {"assumptions", assumptions(c)},
                           {"config", ordered::parse(config_to_json(c))},
                           {"files", file_entries(out_dir, names)}};
    write_text(fs::path(out_dir) / "manifest.json", manifest.dump(2) + "\n");
  }
  std::cout << table;
  int code = kExitOk;
  for (const auto& run : result.links) {
    if (run.error.empty()) continue;
    report_error(std::string(to_string(run.error_code)), run.link.id() + ": " + run.error);
    code = std::max(code, exit_code_for(run.error_code));
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Three-node entanglement distribution network simulator and analysis pipeline"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  Common o;
  auto add_seed = [&](CLI::App* sub) { sub->add_option("--seed", o.seed, "master seed override"); };
  auto add_window = [&](CLI::App* sub) { sub->add_option("--window-ns", o.window_ns, "coincidence window (ns)")->check(CLI::PositiveNumber); };
  auto add_samples = [&](CLI::App* sub) { sub->add_option("--samples", o.samples, "posterior samples")->check(CLI::Range(2, 1 << 20)); };
  auto add_integration = [&](CLI::App* sub) { sub->add_option("--integration-s", o.integration_s, "integration per setting (s)")->check(CLI::PositiveNumber); };

  std::string out_dir;
  auto* simulate = app.add_subcommand("simulate", "write timetag streams for every link setting");
  simulate->add_option("-c,--config", o.config, "experiment config (JSON)")->required();
  simulate->add_option("-o,--out", out_dir, "output directory")->required();
  add_seed(simulate);
  add_integration(simulate);

  std::string fa, fb, histogram_out;
  std::int64_t span = 10000;
  std::optional<std::int64_t> delay;
  int shifts = 8;
  double shift_ns = 100.0;
  auto* corr = app.add_subcommand("correlate", "delay search, coincidences and accidentals for two streams");
  corr->add_option("first", fa, "first node stream (.qltt)")->required();
  corr->add_option("second", fb, "second node stream (.qltt)")->required();
  add_window(corr);
  add_integration(corr);
  corr->add_option("--span-bins", span, "histogram half-span in clock bins")->check(CLI::Range(1, 1000000));
  corr->add_option("--delay-bins", delay, "use this delay instead of searching");
  corr->add_option("--shifts", shifts, "accidental windows")->check(CLI::Range(1, 1000));
  corr->add_option("--shift-ns", shift_ns, "spacing of accidental windows (ns)")->check(CLI::PositiveNumber);
  corr->add_option("--histogram", histogram_out, "write the delay histogram as CSV");

  std::string counts, link_name = "link", samples_out;
  std::optional<double> rate;
  auto* tomo = app.add_subcommand("tomo", "Bayesian two-qubit tomography of a counts table");
  tomo->add_option("counts", counts, "CSV with setting1,setting2,count")->required();
  add_seed(tomo);
  add_samples(tomo);
  add_integration(tomo);
  tomo->add_option("--rate", rate, "coincidence rate for R_E (default: from counts)");
  tomo->add_option("--link", link_name, "link name in the report");
  tomo->add_option("--samples-out", samples_out, "write per-sample metrics as CSV");

  bool as_json = false;
  auto* alloc = app.add_subcommand("allocate", "optimize the channel allocation");
  alloc->add_option("-c,--config", o.config, "experiment config (JSON)")->required();
  alloc->add_option("--objective", o.objective, "max-min-re | max-total-re | min-fidelity-floor=<f>");
  add_window(alloc);
  alloc->add_flag("--json", as_json, "emit JSON instead of a table");

  std::string csv_out;
  auto* jsi = app.add_subcommand("jsi", "synthetic joint spectral intensity and CAR");
  jsi->add_option("-c,--config", o.config, "experiment config (JSON)")->required();
  add_seed(jsi);
  add_integration(jsi);
  jsi->add_option("--csv", csv_out, "write the matrix as CSV");

  bool no_rsp = false;
  auto* run = app.add_subcommand("run", "full pipeline: simulate, correlate, tomography, RSP");
  run->add_option("-c,--config", o.config, "experiment config (JSON)")->required();
  run->add_option("-o,--out", out_dir, "report directory");
  add_seed(run);
  add_window(run);
  add_samples(run);
  add_integration(run);
  run->add_flag("--no-rsp", no_rsp, "skip remote state preparation");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*simulate) return cmd_simulate(o, out_dir);
    if (*corr) return cmd_correlate(fa, fb, o, span, delay, shifts, shift_ns, histogram_out);
    if (*tomo) return cmd_tomo(counts, o, rate, link_name, samples_out);
    if (*alloc) return cmd_allocate(o, as_json);
    if (*jsi) return cmd_jsi(o, csv_out);
    if (*run) return cmd_run(o, out_dir, no_rsp);
  } catch (const Error& e) {
    report_error(std::string(to_string(e.code())), e.what());
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    report_error("Exception", e.what());
    return kExitOther;
  }
  return kExitOther;
}
