#include "qlan/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "qlan/random.hpp"

namespace qlan {

namespace {

using nlohmann::json;

[[noreturn]] void config_fail(const std::string& path, const std::string& what) {
  fail(ErrorCode::ConfigError, path + ": " + what);
}

class Reader {
 public:
  Reader(const json& value, std::string path) : v_(value), path_(std::move(path)) {
    if (!v_.is_object()) config_fail(path_, "expected an object");
  }

  void allow(std::initializer_list<const char*> keys) const {
    std::set<std::string> ok(keys.begin(), keys.end());
    for (const auto& item : v_.items())
      if (!ok.count(item.key())) config_fail(field(item.key()), "unknown field");
  }

  bool has(const char* key) const { return v_.contains(key); }
  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json& at(const char* key) const {
    if (!v_.contains(key)) config_fail(field(key), "missing required field");
    return v_.at(key);
  }

  double number(const char* key) const {
    const json& x = at(key);
    if (!x.is_number()) config_fail(field(key), "expected a number");
    return x.get<double>();
  }
  double number(const char* key, double fallback) const { return has(key) ? number(key) : fallback; }

  std::int64_t integer(const char* key) const {
    const json& x = at(key);
    if (!x.is_number_integer()) config_fail(field(key), "expected an integer");
    return x.get<std::int64_t>();
  }
  std::int64_t integer(const char* key, std::int64_t fallback) const { return has(key) ? integer(key) : fallback; }

  std::string text(const char* key) const {
    const json& x = at(key);
    if (!x.is_string()) config_fail(field(key), "expected a string");
    return x.get<std::string>();
  }
  std::string text(const char* key, const std::string& fallback) const { return has(key) ? text(key) : fallback; }

  bool boolean(const char* key, bool fallback) const {
    if (!has(key)) return fallback;
    const json& x = at(key);
    if (!x.is_boolean()) config_fail(field(key), "expected true or false");
    return x.get<bool>();
  }

  Reader object(const char* key) const { return Reader(at(key), field(key)); }

  const json& array(const char* key) const {
    const json& x = at(key);
    if (!x.is_array()) config_fail(field(key), "expected an array");
    return x;
  }

 private:
  const json& v_;
  std::string path_;
};

double in_range(const Reader& r, const char* key, double lo, double hi, double value) {
  if (!(value >= lo && value <= hi)) {
    std::ostringstream os;
    os << "must lie in [" << lo << ", " << hi << "], got " << value;
    config_fail(r.field(key), os.str());
  }
  return value;
}

Label parse_label_field(const std::string& text, const std::string& path) {
  const auto l = parse_label(text);
  if (!l) config_fail(path, "expected one of H, V, D, A, R, L");
  return *l;
}

Link parse_link_field(const std::string& text, const std::string& path) {
  try {
    return parse_link(text);
  } catch (const Error& e) {
    config_fail(path, "expected NODE-NODE, got '" + text + "'");
  }
}

NodeConfig parse_node(const Reader& r) {
  r.allow({"id", "detector", "clock", "fiber", "insertion_loss_db"});
  NodeConfig n;
  n.id = r.text("id");
  if (n.id.empty()) config_fail(r.field("id"), "must not be empty");

  const Reader d = r.object("detector");
  d.allow({"kind", "efficiency", "dead_time_us", "jitter_ps", "dark_rate_hz", "gate"});
  const std::string kind = d.text("kind");
  if (kind == "snspd") {
    n.detector.kind = DetectorKind::Snspd;
  } else if (kind == "gated_apd") {
    n.detector.kind = DetectorKind::GatedApd;
  } else {
    config_fail(d.field("kind"), "expected snspd or gated_apd");
  }
  n.detector.efficiency = in_range(d, "efficiency", 1e-9, 1.0, d.number("efficiency"));
  n.detector.dead_time_us = in_range(d, "dead_time_us", 0.0, 1e6, d.number("dead_time_us"));
  n.detector.jitter_ps = in_range(d, "jitter_ps", 0.0, 1e6, d.number("jitter_ps", 50.0));
  n.detector.dark_rate_hz = in_range(d, "dark_rate_hz", 0.0, 1e9, d.number("dark_rate_hz", 100.0));
  if (d.has("gate")) {
    const Reader g = d.object("gate");
    g.allow({"rate_mhz", "window_ns"});
    n.detector.gate = Gate{in_range(g, "rate_mhz", 1e-6, 1e4, g.number("rate_mhz")),
                           in_range(g, "window_ns", 1e-3, 1e6, g.number("window_ns"))};
  }
  try {
    n.detector.validate();
  } catch (const Error& e) {
    config_fail(d.field("kind"), e.what());
  }

  if (r.has("clock")) {
    const Reader c = r.object("clock");
    c.allow({"pps_sigma_ns", "drift_ns_per_s"});
    n.pps_sigma_ns = in_range(c, "pps_sigma_ns", 0.0, 1e6, c.number("pps_sigma_ns", 0.0));
    n.drift_ns_per_s = c.number("drift_ns_per_s", 0.0);
  }
  if (r.has("fiber")) {
    const Reader f = r.object("fiber");
    f.allow({"loss_db", "delay_ns"});
    n.fiber_loss_db = in_range(f, "loss_db", 0.0, 100.0, f.number("loss_db", 0.0));
    n.fiber_delay_ns = in_range(f, "delay_ns", 0.0, 1e6, f.number("delay_ns", 0.0));
  }
  n.insertion_loss_db = in_range(r, "insertion_loss_db", 0.0, 100.0, r.number("insertion_loss_db", 0.0));
  return n;
}

ExperimentConfig parse(const json& root) {
  const Reader r(root, "");
  r.allow({"schema_version", "seed", "clock_resolution_ps", "nodes", "source", "links", "allocation", "plan",
           "rsp_tasks", "allocator"});
  ExperimentConfig c;
  c.schema_version = static_cast<int>(r.integer("schema_version"));
  if (c.schema_version != 1) config_fail("schema_version", "unsupported version " + std::to_string(c.schema_version));
  const std::int64_t seed = r.integer("seed", 0);
  if (seed < 0) config_fail("seed", "must be non-negative");
  c.seed = static_cast<std::uint64_t>(seed);
  const std::int64_t res = r.integer("clock_resolution_ps", 5000);
  if (res < 1 || res > 1'000'000) config_fail("clock_resolution_ps", "must lie in [1, 1000000]");
  c.clock_resolution_ps = static_cast<std::uint32_t>(res);

  const json& nodes = r.array("nodes");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    NodeConfig n = parse_node(Reader(nodes[i], "nodes[" + std::to_string(i) + "]"));
    for (const auto& other : c.nodes)
      if (other.id == n.id) config_fail("nodes[" + std::to_string(i) + "].id", "duplicate node id '" + n.id + "'");
    c.nodes.push_back(std::move(n));
  }
  auto require_node = [&](const std::string& id, const std::string& path) {
    for (const auto& n : c.nodes)
      if (n.id == id) return;
    config_fail(path, "node '" + id + "' is not configured");
  };

  const Reader src = r.object("source");
  src.allow({"grid", "channels", "jsi"});
  if (src.has("grid")) {
    const Reader g = src.object("grid");
    g.allow({"center_units", "spacing_units", "num_pairs"});
    c.grid.center_units = static_cast<int>(g.integer("center_units", c.grid.center_units));
    c.grid.spacing_units = static_cast<int>(g.integer("spacing_units", c.grid.spacing_units));
    c.grid.num_pairs = static_cast<int>(g.integer("num_pairs", c.grid.num_pairs));
    if (c.grid.spacing_units <= 0 || c.grid.spacing_units % 2 != 0) config_fail(g.field("spacing_units"), "must be a positive even integer");
    if (c.grid.num_pairs < 1 || c.grid.num_pairs > 64) config_fail(g.field("num_pairs"), "must lie in [1, 64]");
  }
  const json& channels = src.array("channels");
  if (static_cast<int>(channels.size()) != c.grid.num_pairs) {
    config_fail(src.field("channels"), "expected " + std::to_string(c.grid.num_pairs) + " channel entries");
  }
  for (std::size_t i = 0; i < channels.size(); ++i) {
    const Reader ch(channels[i], src.field("channels") + "[" + std::to_string(i) + "]");
    ch.allow({"index", "pair_rate", "fidelity", "visibility", "bell_phase_deg", "crosstalk_fraction"});
    ChannelPairSpec s;
    s.index = static_cast<int>(ch.integer("index"));
    if (s.index != static_cast<int>(i) + 1) config_fail(ch.field("index"), "channels must be listed in order 1..N");
    s.pair_rate = in_range(ch, "pair_rate", 0.0, 1e12, ch.number("pair_rate"));
    if (ch.has("fidelity") == ch.has("visibility")) config_fail(ch.field("fidelity"), "give exactly one of fidelity or visibility");
    s.visibility = ch.has("visibility") ? in_range(ch, "visibility", 0.0, 1.0, ch.number("visibility"))
                                        : visibility_from_fidelity(in_range(ch, "fidelity", 0.25, 1.0, ch.number("fidelity")));
    s.bell_phase_deg = ch.number("bell_phase_deg", 0.0);
    s.crosstalk_fraction = in_range(ch, "crosstalk_fraction", 0.0, 1.0, ch.number("crosstalk_fraction", 0.0));
    c.channels.push_back(s);
  }
  if (src.has("jsi")) {
    const Reader j = src.object("jsi");
    j.allow({"integration_s", "eff_signal", "eff_idler", "floor_rate_hz", "poisson"});
    c.jsi.integration_s = in_range(j, "integration_s", 1e-6, 1e6, j.number("integration_s", c.jsi.integration_s));
    c.jsi.eff_signal = in_range(j, "eff_signal", 0.0, 1.0, j.number("eff_signal", 1.0));
    c.jsi.eff_idler = in_range(j, "eff_idler", 0.0, 1.0, j.number("eff_idler", 1.0));
    c.jsi.floor_rate_hz = in_range(j, "floor_rate_hz", 0.0, 1e12, j.number("floor_rate_hz", 0.0));
    c.jsi.poisson = j.boolean("poisson", true);
  }

  const json& links = r.array("links");
  for (std::size_t i = 0; i < links.size(); ++i) {
    const std::string path = "links[" + std::to_string(i) + "]";
    if (!links[i].is_string()) config_fail(path, "expected a string such as \"A-B\"");
    const Link l = parse_link_field(links[i].get<std::string>(), path);
    require_node(l.first, path);
    require_node(l.second, path);
    if (l.first == l.second) config_fail(path, "link joins a node to itself");
    for (const auto& other : c.links)
      if (other.same_pair(l)) config_fail(path, "duplicate link " + l.id());
    c.links.push_back(l);
  }

  if (r.has("allocation")) {
    const json& a = r.at("allocation");
    if (!a.is_object()) config_fail("allocation", "expected an object mapping links to channel lists");
    for (const auto& item : a.items()) {
      const std::string path = "allocation." + item.key();
      const Link l = parse_link_field(item.key(), path);
      require_node(l.first, path);
      require_node(l.second, path);
      const Link* configured = nullptr;
      for (const auto& other : c.links)
        if (other.same_pair(l)) configured = &other;
      if (!configured) config_fail(path, "link is not listed in links");
      if (!item.value().is_array()) config_fail(path, "expected an array of channel indices");
      for (const auto& ch : item.value()) {
        if (!ch.is_number_integer()) config_fail(path, "expected integer channel indices");
        c.allocation.entries.push_back({ch.get<int>(), *configured});
      }
    }
    const auto violations = validate(c.allocation, c.node_ids(), c.grid.num_pairs);
    if (!violations.empty()) {
      const auto& v = violations.front();
      config_fail("allocation", std::string(to_string(v.kind)) + " for channel " + std::to_string(v.channel) + ": " + v.detail);
    }
  }

  if (r.has("plan")) {
    const Reader p = r.object("plan");
    p.allow({"integration_s", "window_ns", "bases", "accidental_shifts", "shift_ns", "samples", "histogram_span_bins", "rsp"});
    c.plan.integration_s = in_range(p, "integration_s", 1e-3, 3600.0, p.number("integration_s", c.plan.integration_s));
    c.plan.window_ns = in_range(p, "window_ns", 1e-3, 1e6, p.number("window_ns", c.plan.window_ns));
    if (p.has("bases")) {
      c.plan.bases.clear();
      for (const auto& b : p.array("bases")) {
        const std::string text = b.is_string() ? b.get<std::string>() : "";
        if (text != "HV" && text != "DA" && text != "RL") config_fail(p.field("bases"), "expected entries HV, DA or RL");
        c.plan.bases.push_back(text);
      }
      if (c.plan.bases.empty()) config_fail(p.field("bases"), "at least one basis is required");
    }
    c.plan.accidental_shifts = static_cast<int>(p.integer("accidental_shifts", c.plan.accidental_shifts));
    if (c.plan.accidental_shifts < 1) config_fail(p.field("accidental_shifts"), "must be >= 1");
    c.plan.shift_ns = in_range(p, "shift_ns", 1e-3, 1e9, p.number("shift_ns", c.plan.shift_ns));
    c.plan.samples = static_cast<int>(p.integer("samples", c.plan.samples));
    if (c.plan.samples < 2) config_fail(p.field("samples"), "must be >= 2");
    c.plan.histogram_span_bins = p.integer("histogram_span_bins", c.plan.histogram_span_bins);
    if (c.plan.histogram_span_bins < 1 || c.plan.histogram_span_bins > 1'000'000) {
      config_fail(p.field("histogram_span_bins"), "must lie in [1, 1000000]");
    }
    c.plan.rsp = p.boolean("rsp", c.plan.rsp);
  }

  if (r.has("rsp_tasks")) {
    const json& tasks = r.array("rsp_tasks");
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      const Reader t(tasks[i], "rsp_tasks[" + std::to_string(i) + "]");
      t.allow({"link", "sender", "projection", "target"});
      RspTask task;
      const Link l = parse_link_field(t.text("link"), t.field("link"));
      const Link* configured = nullptr;
      for (const auto& other : c.links)
        if (other.same_pair(l)) configured = &other;
      if (!configured) config_fail(t.field("link"), "link " + l.id() + " is not listed in links");
      task.link = *configured;
      task.sender = t.text("sender");
      if (task.sender != task.link.first && task.sender != task.link.second) {
        config_fail(t.field("sender"), "sender must be a node of " + task.link.id());
      }
      task.projection = parse_label_field(t.text("projection"), t.field("projection"));
      task.target = parse_label_field(t.text("target"), t.field("target"));
      c.rsp_tasks.push_back(task);
    }
  }

  if (r.has("allocator")) {
    const Reader a = r.object("allocator");
    a.allow({"objective"});
    c.objective = a.text("objective", c.objective);
    try {
      parse_objective(c.objective);
    } catch (const Error& e) {
      config_fail(a.field("objective"), e.what());
    }
  }
  return c;
}

}  // namespace

const NodeConfig& ExperimentConfig::node(const std::string& id) const {
  for (const auto& n : nodes)
    if (n.id == id) return n;
  fail(ErrorCode::ConfigError, "node '" + id + "' is not configured");
}

std::vector<std::string> ExperimentConfig::node_ids() const {
  std::vector<std::string> out;
  for (const auto& n : nodes) out.push_back(n.id);
  return out;
}

LinkBudget ExperimentConfig::budget(const Link& link) const {
  const NodeConfig& a = node(link.first);
  const NodeConfig& b = node(link.second);
  LinkBudget lb;
  lb.link = link;
  lb.loss_db = a.fiber_loss_db + b.fiber_loss_db;
  lb.first_arm_fraction = lb.loss_db > 0.0 ? a.fiber_loss_db / lb.loss_db : 0.5;
  lb.eff_first = a.detector.efficiency * std::pow(10.0, -a.insertion_loss_db / 10.0);
  lb.eff_second = b.detector.efficiency * std::pow(10.0, -b.insertion_loss_db / 10.0);
  lb.duty_first = a.detector.duty_cycle();
  lb.duty_second = b.detector.duty_cycle();
  lb.noise_first_hz = a.detector.dark_rate_hz;
  lb.noise_second_hz = b.detector.dark_rate_hz;
  lb.dead_first_s = a.detector.dead_time_us * 1e-6;
  lb.dead_second_s = b.detector.dead_time_us * 1e-6;
  const double res_ns = clock_resolution_ps * 1e-3;
  const double jitter_ns = 1e-3 * std::hypot(a.detector.jitter_ps, b.detector.jitter_ps);
  lb.timing_sigma_ns = std::sqrt(a.pps_sigma_ns * a.pps_sigma_ns + b.pps_sigma_ns * b.pps_sigma_ns +
                                 jitter_ns * jitter_ns + res_ns * res_ns / 6.0);
  return lb;
}

std::vector<LinkBudget> ExperimentConfig::budgets() const {
  std::vector<LinkBudget> out;
  for (const auto& l : links) out.push_back(budget(l));
  return out;
}

SimNode ExperimentConfig::sim_node(const std::string& id) const {
  const NodeConfig& n = node(id);
  SimNode s;
  s.id = n.id;
  s.detector = n.detector;
  s.clock = {n.id, n.pps_sigma_ns, n.drift_ns_per_s, derive_seed(seed, "clock/" + n.id)};
  s.arm_transmission = std::pow(10.0, -(n.fiber_loss_db + n.insertion_loss_db) / 10.0);
  s.fiber_delay_ns = n.fiber_delay_ns;
  s.clock_enabled = n.pps_sigma_ns > 0.0 || n.drift_ns_per_s != 0.0;
  return s;
}

ExperimentConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < json_text.size(); ++i) {
      if (json_text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    fail(ErrorCode::ConfigError, "line " + std::to_string(line) + ", column " + std::to_string(col) + ": malformed JSON");
  }
  return parse(root);
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ConfigError) throw;
    const std::string msg = e.what();
    fail(ErrorCode::ConfigError, path.filename().string() + ": " + msg.substr(msg.find(": ") + 2));
  }
}

std::string config_to_json(const ExperimentConfig& c) {
  nlohmann::ordered_json root;
  root["schema_version"] = c.schema_version;
  root["seed"] = c.seed;
  root["clock_resolution_ps"] = c.clock_resolution_ps;
  root["nodes"] = nlohmann::ordered_json::array();
  for (const auto& n : c.nodes) {
    nlohmann::ordered_json d = {{"kind", n.detector.kind == DetectorKind::Snspd ? "snspd" : "gated_apd"},
              {"efficiency", n.detector.efficiency},
              {"dead_time_us", n.detector.dead_time_us},
              {"jitter_ps", n.detector.jitter_ps},
              {"dark_rate_hz", n.detector.dark_rate_hz}};
    if (n.detector.gate) d["gate"] = {{"rate_mhz", n.detector.gate->rate_mhz}, {"window_ns", n.detector.gate->window_ns}};
    root["nodes"].push_back({{"id", n.id},
                             {"detector", d},
                             {"clock", {{"pps_sigma_ns", n.pps_sigma_ns}, {"drift_ns_per_s", n.drift_ns_per_s}}},
                             {"fiber", {{"loss_db", n.fiber_loss_db}, {"delay_ns", n.fiber_delay_ns}}},
                             {"insertion_loss_db", n.insertion_loss_db}});
  }
  nlohmann::ordered_json channels = nlohmann::ordered_json::array();
  for (const auto& s : c.channels) {
    channels.push_back({{"index", s.index},
                        {"pair_rate", s.pair_rate},
                        {"visibility", s.visibility},
                        {"bell_phase_deg", s.bell_phase_deg},
                        {"crosstalk_fraction", s.crosstalk_fraction}});
  }
  root["source"] = {{"grid", {{"center_units", c.grid.center_units}, {"spacing_units", c.grid.spacing_units}, {"num_pairs", c.grid.num_pairs}}},
                    {"channels", channels},
                    {"jsi", {{"integration_s", c.jsi.integration_s}, {"eff_signal", c.jsi.eff_signal}, {"eff_idler", c.jsi.eff_idler},
                             {"floor_rate_hz", c.jsi.floor_rate_hz}, {"poisson", c.jsi.poisson}}}};
  root["links"] = nlohmann::ordered_json::array();
  for (const auto& l : c.links) root["links"].push_back(l.id());
  root["allocation"] = nlohmann::ordered_json::object();
  for (const auto& l : c.links) {
    const auto ch = c.allocation.channels_for(l);
    if (!ch.empty()) root["allocation"][l.id()] = ch;
  }
  root["plan"] = {{"integration_s", c.plan.integration_s}, {"window_ns", c.plan.window_ns}, {"bases", c.plan.bases},
                  {"accidental_shifts", c.plan.accidental_shifts}, {"shift_ns", c.plan.shift_ns}, {"samples", c.plan.samples},
                  {"histogram_span_bins", c.plan.histogram_span_bins}, {"rsp", c.plan.rsp}};
  root["rsp_tasks"] = nlohmann::ordered_json::array();
  for (const auto& t : c.rsp_tasks) {
    root["rsp_tasks"].push_back({{"link", t.link.id()}, {"sender", t.sender},
                                 {"projection", std::string(1, label_char(t.projection))},
                                 {"target", std::string(1, label_char(t.target))}});
  }
  root["allocator"] = {{"objective", c.objective}};
  return root.dump(2) + "\n";
}

}  // namespace qlan
