#include "qlan/report.hpp"

#include <cstdio>
#include <sstream>

#include "json.hpp"

namespace qlan {

namespace {

using nlohmann::json;
using ordered = nlohmann::ordered_json;

template <int Dim>
ordered matrix_json(const DensityMatrix<Dim>& rho) {
  ordered re = ordered::array(), im = ordered::array();
  for (int i = 0; i < Dim; ++i) {
    ordered r = ordered::array(), m = ordered::array();
    for (int j = 0; j < Dim; ++j) {
      r.push_back(rho.matrix()(i, j).real());
      m.push_back(rho.matrix()(i, j).imag());
    }
    re.push_back(r);
    im.push_back(m);
  }
  return {{"real", re}, {"imag", im}};
}

ordered estimate_json(const Estimate& e) { return {{"mean", e.mean}, {"std", e.std}}; }

ordered diagnostics_json(const SamplerDiagnostics& d) {
  return {{"step_size", d.step_size}, {"acceptance", d.acceptance}, {"thinning", d.thinning},
          {"burn_in", d.burn_in},     {"rhat", d.rhat},             {"attempts", d.attempts}};
}

ordered link_report_obj(const LinkReport& r) {
  return {{"link", r.link},
          {"counts_kind", r.counts_kind},
          {"coincidence_rate", r.coincidence_rate},
          {"fidelity", estimate_json(r.fidelity)},
          {"log_negativity", estimate_json(r.log_negativity)},
          {"ebit_rate", estimate_json(r.ebit_rate)},
          {"num_samples", r.num_samples},
          {"density_matrix", matrix_json(r.mean)},
          {"diagnostics", diagnostics_json(r.diagnostics)}};
}

std::string label(Label l) { return std::string(1, label_char(l)); }

ordered rsp_obj(const RspReport& r) {
  ordered counts = ordered::array();
  for (const auto& rec : r.records) {
    std::string name = to_string(rec.setting);
    for (Label l : kAllLabels)
      if (setting_for(l) == rec.setting) name = label(l);
    counts.push_back({{"setting", name}, {"count", rec.count}});
  }
  const Stokes s = stokes(r.mean);
  return {{"link", r.task.link.id()},
          {"sender", r.task.sender},
          {"receiver", r.task.receiver()},
          {"projection", label(r.task.projection)},
          {"target", label(r.task.target)},
          {"postselected", r.postselected},
          {"success_probability", r.success_probability},
          {"fidelity_target", estimate_json(r.fidelity_target)},
          {"fidelity_prediction", estimate_json(r.fidelity_prediction)},
          {"mean_fidelity_prediction", r.mean_fidelity_prediction},
          {"stokes", {{"s1", s.s1}, {"s2", s.s2}, {"s3", s.s3}}},
          {"state", matrix_json(r.mean)},
          {"prediction", matrix_json(r.prediction)},
          {"counts", counts},
          {"diagnostics", diagnostics_json(r.diagnostics)}};
}

ordered link_run_obj(const LinkRun& run) {
  ordered settings = ordered::array();
  for (const auto& s : run.settings) {
    settings.push_back({{"first", label(s.first)},
                        {"second", label(s.second)},
                        {"raw", s.raw},
                        {"accidentals", s.accidentals},
                        {"subtracted", s.subtracted},
                        {"singles_first", s.singles_first},
                        {"singles_second", s.singles_second}});
  }
  ordered rsp = ordered::array();
  for (const auto& r : run.rsp) rsp.push_back(rsp_obj(r));
  return {{"schema_version", kReportSchemaVersion},
          {"link", run.link.id()},
          {"channels", run.channels},
          {"pair_rate", run.pair_rate},
          {"x_first_deg", run.x_first},
          {"x_second_deg", run.x_second},
          {"integration_s", run.integration_s},
          {"window_ns", run.window_ns},
          {"delay_bins", run.delay_bins},
          {"low_confidence", run.low_confidence},
          {"settings", settings},
          {"raw_rate", run.raw_rate},
          {"subtracted_rate", run.subtracted_rate},
          {"raw", run.raw ? link_report_obj(*run.raw) : ordered()},
          {"subtracted", run.subtracted ? link_report_obj(*run.subtracted) : ordered()},
          {"rsp", rsp},
          {"error", run.error.empty() ? ordered() : ordered(run.error)}};
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

AnalyzerSetting parse_setting(const std::string& text, int line) {
  if (const auto l = parse_label(text)) return setting_for(*l);
  const auto slash = text.find('/');
  if (slash != std::string::npos) {
    try {
      std::size_t n1 = 0, n2 = 0;
      const double q = std::stod(text.substr(0, slash), &n1);
      const double h = std::stod(text.substr(slash + 1), &n2);
      if (n1 == slash && n2 == text.size() - slash - 1) return {q, h};
    } catch (const std::exception&) {
    }
  }
  fail(ErrorCode::ConfigError, "line " + std::to_string(line) + ": bad setting '" + text + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

}  // namespace

std::string link_report_json(const LinkReport& report) { return link_report_obj(report).dump(2) + "\n"; }

std::string rsp_report_json(const RspReport& report) { return rsp_obj(report).dump(2) + "\n"; }

std::string link_run_json(const LinkRun& run) { return link_run_obj(run).dump(2) + "\n"; }

std::string experiment_json(const ExperimentResult& result) {
  ordered links = ordered::array();
  for (const auto& l : result.links) links.push_back(link_run_obj(l));
  return ordered{{"schema_version", kReportSchemaVersion}, {"seed", result.seed}, {"links", links}}.dump(2) + "\n";
}

std::string coincidence_json(const CoincidenceResult& r, const OffsetEstimate& offset, const std::string& first_node,
                             const std::string& second_node) {
  return ordered{{"schema_version", kReportSchemaVersion},
                 {"first_node", first_node},
                 {"second_node", second_node},
                 {"delay_bins", r.delay_bins},
                 {"peak_delay_bins", offset.delay_bins},
                 {"peak_count", offset.peak},
                 {"low_confidence", offset.low_confidence},
                 {"window_ns", r.window_ns},
                 {"integration_s", r.integration_s},
                 {"raw", r.raw_coincidences},
                 {"accidentals", r.accidentals},
                 {"raw_rate", r.raw_rate()},
                 {"accidental_rate", r.accidental_rate()}}
             .dump(2) +
         "\n";
}

std::string results_csv(const ExperimentResult& result) {
  std::ostringstream os;
  os << "link,channels,counts_kind,coincidence_rate,fidelity,fidelity_std,log_negativity,log_negativity_std,ebit_rate,ebit_rate_std\n";
  for (const auto& run : result.links) {
    std::string channels;
    for (int c : run.channels) channels += (channels.empty() ? "" : " ") + std::to_string(c);
    for (const auto* r : {&run.raw, &run.subtracted}) {
      if (!r->has_value()) continue;
      const LinkReport& lr = **r;
      os << run.link.id() << ',' << channels << ',' << lr.counts_kind << ',' << fmt(lr.coincidence_rate) << ','
         << fmt(lr.fidelity.mean) << ',' << fmt(lr.fidelity.std) << ',' << fmt(lr.log_negativity.mean) << ','
         << fmt(lr.log_negativity.std) << ',' << fmt(lr.ebit_rate.mean) << ',' << fmt(lr.ebit_rate.std) << '\n';
    }
  }
  return os.str();
}

std::string poincare_csv(const ExperimentResult& result) {
  std::ostringstream os;
  os << "link,sender,projection,target,sample,s1,s2,s3\n";
  for (const auto& run : result.links)
    for (const auto& r : run.rsp)
      for (std::size_t i = 0; i < r.sample_stokes.size(); ++i) {
        const Stokes& s = r.sample_stokes[i];
        os << run.link.id() << ',' << r.task.sender << ',' << label_char(r.task.projection) << ','
           << label_char(r.task.target) << ',' << i << ',' << fmt(s.s1) << ',' << fmt(s.s2) << ',' << fmt(s.s3) << '\n';
      }
  return os.str();
}

std::string samples_csv(const LinkReport& report) {
  std::ostringstream os;
  os << "sample,fidelity,log_negativity,ebit_rate\n";
  for (std::size_t i = 0; i < report.sample_fidelity.size(); ++i) {
    const double en = report.sample_log_negativity[i];
    os << i << ',' << fmt(report.sample_fidelity[i]) << ',' << fmt(en) << ',' << fmt(en * report.coincidence_rate) << '\n';
  }
  return os.str();
}

std::string histogram_csv(const DelayHistogram& hist) {
  std::ostringstream os;
  os << "delay_bins,delay_ns,count\n";
  for (std::size_t i = 0; i < hist.counts.size(); ++i) {
    const std::int64_t d = hist.delay_at(i);
    os << d << ',' << fmt(d * hist.clock_resolution_ps * 1e-3) << ',' << hist.counts[i] << '\n';
  }
  return os.str();
}

std::vector<MeasurementRecord> read_counts_csv(std::istream& in, double integration_s) {
  std::vector<MeasurementRecord> out;
  std::string line;
  int number = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++number;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(trim(cell));
    if (!header_seen) {
      header_seen = true;
      if (cells.size() == 3 && cells[0] == "setting1" && cells[1] == "setting2" && cells[2] == "count") continue;
      fail(ErrorCode::ConfigError, "line " + std::to_string(number) + ": expected header setting1,setting2,count");
    }
    if (cells.size() != 3) fail(ErrorCode::ConfigError, "line " + std::to_string(number) + ": expected 3 columns");
    MeasurementRecord r;
    r.first = parse_setting(cells[0], number);
    r.second = parse_setting(cells[1], number);
    std::size_t used = 0;
    long long count = -1;
    try {
      count = std::stoll(cells[2], &used);
    } catch (const std::exception&) {
    }
    if (count < 0 || used != cells[2].size()) {
      fail(ErrorCode::ConfigError, "line " + std::to_string(number) + ": count must be a non-negative integer");
    }
    r.count = static_cast<std::uint64_t>(count);
    r.integration_s = integration_s;
    out.push_back(r);
  }
  if (out.empty()) fail(ErrorCode::ConfigError, "counts table has no rows");
  return out;
}

}  // namespace qlan
