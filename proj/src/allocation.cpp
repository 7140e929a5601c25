#include "qlan/allocation.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>

#include "qlan/random.hpp"

namespace qlan {

namespace {

struct ChannelSums {
  double rate = 0.0;
  double weighted_visibility = 0.0;
  std::complex<double> coherence;
};

void add_channel(ChannelSums& sums, const ChannelPairSpec& spec) {
  sums.rate += spec.pair_rate;
  sums.weighted_visibility += spec.pair_rate * spec.visibility;
  sums.coherence += spec.pair_rate * spec.visibility * std::polar(1.0, spec.bell_phase_deg * std::numbers::pi / 180.0);
}

LinkPrediction predict(const LinkBudget& b, const ChannelSums& sums, double window_s) {
  LinkPrediction p;
  p.link = b.link;
  p.pair_rate = sums.rate;
  const double t1 = b.transmission_first() * b.duty_first;
  const double t2 = b.transmission_second() * b.duty_second;
  const double lam1 = 0.5 * sums.rate * t1 + b.noise_first_hz * b.duty_first;
  const double lam2 = 0.5 * sums.rate * t2 + b.noise_second_hz * b.duty_second;
  const double d1 = 1.0 / (1.0 + lam1 * b.dead_first_s);
  const double d2 = 1.0 / (1.0 + lam2 * b.dead_second_s);
  p.singles_first = lam1 * d1;
  p.singles_second = lam2 * d2;
  const double capture = b.timing_sigma_ns > 0.0
                             ? std::erf(window_s * 1e9 / (2.0 * std::sqrt(2.0) * b.timing_sigma_ns))
                             : 1.0;
  p.coincidence_rate = sums.rate * t1 * t2 * capture * d1 * d2;
  p.accidental_rate = 4.0 * p.singles_first * p.singles_second * window_s;
  const double total = p.coincidence_rate + p.accidental_rate;
  if (sums.rate > 0.0 && total > 0.0) {
    // Fidelity after the best phase compensation of the channel mixture.
    const double mix_fidelity = 0.25 * (1.0 + sums.weighted_visibility / sums.rate) +
                                0.5 * std::abs(sums.coherence) / sums.rate;
    const double mix_visibility = (4.0 * mix_fidelity - 1.0) / 3.0;
    p.visibility = mix_visibility * p.coincidence_rate / total;
  }
  p.fidelity = fidelity_from_visibility(p.visibility);
  p.log_negativity = werner_log_negativity(p.visibility);
  p.ebit_rate = p.log_negativity * total;
  return p;
}

std::vector<std::string> budget_nodes(const std::vector<LinkBudget>& budgets) {
  std::vector<std::string> nodes;
  for (const auto& b : budgets)
    for (const auto* n : {&b.link.first, &b.link.second})
      if (std::find(nodes.begin(), nodes.end(), *n) == nodes.end()) nodes.push_back(*n);
  return nodes;
}

struct Candidate {
  bool valid = false;
  long long key = 0;
  int assigned = 0;
  std::vector<int> assignment;
};

// True when a ranks strictly ahead of b.
bool better(const Candidate& a, const Candidate& b) {
  if (!b.valid) return a.valid;
  if (!a.valid) return false;
  if (a.key != b.key) return a.key > b.key;
  if (a.assigned != b.assigned) return a.assigned < b.assigned;
  return a.assignment < b.assignment;
}

}  // namespace

bool Link::same_pair(const Link& other) const {
  return (first == other.first && second == other.second) || (first == other.second && second == other.first);
}

Link parse_link(const std::string& text) {
  for (const std::string sep : {"–", "-", "/"}) {
    const auto pos = text.find(sep);
    if (pos != std::string::npos) {
      Link l{text.substr(0, pos), text.substr(pos + sep.size())};
      if (l.first.empty() || l.second.empty()) break;
      return l;
    }
  }
  fail(ErrorCode::InvalidArgument, "cannot parse link '" + text + "', expected NODE-NODE");
}

std::vector<int> ChannelAllocation::channels_for(const Link& link) const {
  std::vector<int> out;
  for (const auto& e : entries)
    if (e.link.same_pair(link)) out.push_back(e.channel);
  std::sort(out.begin(), out.end());
  return out;
}

std::optional<Link> ChannelAllocation::link_for(int channel) const {
  for (const auto& e : entries)
    if (e.channel == channel) return e.link;
  return std::nullopt;
}

const char* to_string(ViolationKind kind) noexcept {
  switch (kind) {
    case ViolationKind::DoubleAssignment: return "DoubleAssignment";
    case ViolationKind::SelfLink: return "SelfLink";
    case ViolationKind::UnknownNode: return "UnknownNode";
    case ViolationKind::ChannelOutOfRange: return "ChannelOutOfRange";
  }
  return "?";
}

std::vector<Violation> validate(const ChannelAllocation& alloc, const std::vector<std::string>& nodes,
                                int num_channels) {
  std::vector<Violation> out;
  std::set<int> seen;
  auto known = [&](const std::string& n) { return std::find(nodes.begin(), nodes.end(), n) != nodes.end(); };
  for (const auto& e : alloc.entries) {
    if (e.channel < 1 || e.channel > num_channels) {
      out.push_back({ViolationKind::ChannelOutOfRange, e.channel, "channel outside 1.." + std::to_string(num_channels)});
    }
    if (!seen.insert(e.channel).second) {
      out.push_back({ViolationKind::DoubleAssignment, e.channel, "channel assigned more than once"});
    }
    if (e.link.first == e.link.second) {
      out.push_back({ViolationKind::SelfLink, e.channel, "link " + e.link.id() + " joins a node to itself"});
    }
    for (const auto* n : {&e.link.first, &e.link.second}) {
      if (!known(*n)) out.push_back({ViolationKind::UnknownNode, e.channel, "node '" + *n + "' is not configured"});
    }
  }
  return out;
}

void LinkBudget::validate() const {
  std::ostringstream os;
  if (!(loss_db >= 0.0)) os << "loss_db must be >= 0; ";
  if (!(first_arm_fraction >= 0.0 && first_arm_fraction <= 1.0)) os << "first_arm_fraction must lie in [0, 1]; ";
  for (double e : {eff_first, eff_second})
    if (!(e > 0.0 && e <= 1.0)) os << "efficiencies must lie in (0, 1]; ";
  for (double d : {duty_first, duty_second})
    if (!(d > 0.0 && d <= 1.0)) os << "duty cycles must lie in (0, 1]; ";
  for (double v : {noise_first_hz, noise_second_hz, dead_first_s, dead_second_s, timing_sigma_ns})
    if (!(v >= 0.0)) os << "noise, dead time and timing spread must be >= 0; ";
  const std::string msg = os.str();
  if (!msg.empty()) fail(ErrorCode::InvalidArgument, "budget " + link.id() + ": " + msg);
}

double LinkBudget::transmission_first() const {
  return eff_first * std::pow(10.0, -loss_db * first_arm_fraction / 10.0);
}

double LinkBudget::transmission_second() const {
  return eff_second * std::pow(10.0, -loss_db * (1.0 - first_arm_fraction) / 10.0);
}

double werner_log_negativity(double visibility) noexcept {
  return std::log2(1.0 + 2.0 * std::max(0.0, (3.0 * visibility - 1.0) / 4.0));
}

std::vector<LinkPrediction> predicted_link_rates(const ChannelAllocation& alloc,
                                                 const std::vector<ChannelPairSpec>& specs,
                                                 const std::vector<LinkBudget>& budgets,
                                                 const PredictionOptions& options) {
  const auto violations = validate(alloc, budget_nodes(budgets), static_cast<int>(specs.size()));
  if (!violations.empty()) {
    std::ostringstream os;
    for (const auto& v : violations) os << to_string(v.kind) << " (channel " << v.channel << "): " << v.detail << "; ";
    fail(ErrorCode::InvalidAllocation, os.str());
  }
  for (const auto& e : alloc.entries) {
    const bool budgeted = std::any_of(budgets.begin(), budgets.end(), [&](const LinkBudget& b) { return b.link.same_pair(e.link); });
    if (!budgeted) fail(ErrorCode::InvalidAllocation, "no link budget for " + e.link.id());
  }
  std::vector<LinkPrediction> out;
  for (const auto& b : budgets) {
    b.validate();
    ChannelSums sums;
    const auto channels = alloc.channels_for(b.link);
    for (int c : channels) add_channel(sums, specs[static_cast<std::size_t>(c - 1)]);
    LinkPrediction p = predict(b, sums, options.window_ns * 1e-9);
    p.channels = channels;
    out.push_back(std::move(p));
  }
  return out;
}

Objective parse_objective(const std::string& text) {
  if (text == "max-min-re") return {ObjectiveKind::MaxMinRE, 0.0};
  if (text == "max-total-re") return {ObjectiveKind::MaxTotalRE, 0.0};
  const std::string prefix = "min-fidelity-floor";
  if (text.rfind(prefix, 0) == 0) {
    const std::string rest = text.substr(prefix.size());
    if (rest.size() > 1 && (rest[0] == '=' || rest[0] == ':')) {
      char* end = nullptr;
      const double f = std::strtod(rest.c_str() + 1, &end);
      if (end && *end == '\0' && f >= 0.0 && f <= 1.0) return {ObjectiveKind::MinFidelityFloor, f};
    }
  }
  fail(ErrorCode::InvalidArgument,
       "unknown objective '" + text + "', expected max-min-re, max-total-re or min-fidelity-floor=<f>");
}

std::string to_string(const Objective& objective) {
  switch (objective.kind) {
    case ObjectiveKind::MaxMinRE: return "max-min-re";
    case ObjectiveKind::MaxTotalRE: return "max-total-re";
    case ObjectiveKind::MinFidelityFloor: {
      std::ostringstream os;
      os << "min-fidelity-floor=" << objective.fidelity_floor;
      return os.str();
    }
  }
  return "?";
}

std::optional<double> objective_value(const Objective& objective, const std::vector<LinkPrediction>& predictions) {
  if (predictions.empty()) return std::nullopt;
  switch (objective.kind) {
    case ObjectiveKind::MaxMinRE: {
      double m = std::numeric_limits<double>::infinity();
      for (const auto& p : predictions) m = std::min(m, p.ebit_rate);
      return m;
    }
    case ObjectiveKind::MaxTotalRE: {
      double t = 0.0;
      for (const auto& p : predictions) t += p.ebit_rate;
      return t;
    }
    case ObjectiveKind::MinFidelityFloor: {
      double t = 0.0;
      for (const auto& p : predictions) {
        if (p.channels.empty() || p.fidelity < objective.fidelity_floor) return std::nullopt;
        t += p.ebit_rate;
      }
      return t;
    }
  }
  return std::nullopt;
}

ChannelAllocation allocation_from_assignment(const std::vector<int>& assignment,
                                             const std::vector<LinkBudget>& budgets) {
  ChannelAllocation alloc;
  for (std::size_t c = 0; c < assignment.size(); ++c) {
    const int k = assignment[c];
    if (k > 0) alloc.entries.push_back({static_cast<int>(c) + 1, budgets[static_cast<std::size_t>(k - 1)].link});
  }
  return alloc;
}

OptimizeResult optimize(const Objective& objective, const std::vector<ChannelPairSpec>& specs,
                        const std::vector<LinkBudget>& budgets, const PredictionOptions& options,
                        unsigned workers) {
  const int n = static_cast<int>(specs.size());
  const int links = static_cast<int>(budgets.size());
  if (n < 1 || n > 10) fail(ErrorCode::InvalidArgument, "exhaustive search supports 1 to 10 channels");
  if (links < 1 || links > 6) fail(ErrorCode::InvalidArgument, "exhaustive search supports 1 to 6 links");
  for (const auto& s : specs) s.validate();
  for (const auto& b : budgets) b.validate();
  for (std::size_t i = 0; i < budgets.size(); ++i) {
    if (budgets[i].link.first == budgets[i].link.second) fail(ErrorCode::InvalidAllocation, "self link " + budgets[i].link.id());
    for (std::size_t j = 0; j < i; ++j)
      if (budgets[i].link.same_pair(budgets[j].link)) fail(ErrorCode::InvalidAllocation, "duplicate link " + budgets[i].link.id());
  }

  long long total = 1;
  for (int i = 0; i < n; ++i) total *= links + 1;
  const double window_s = options.window_ns * 1e-9;

  auto evaluate = [&](long long index, Candidate& scratch, std::vector<LinkPrediction>& preds) {
    // Channel 1 is the most significant digit so index order is lexicographic.
    long long rest = index;
    scratch.assigned = 0;
    for (int c = n - 1; c >= 0; --c) {
      scratch.assignment[static_cast<std::size_t>(c)] = static_cast<int>(rest % (links + 1));
      rest /= links + 1;
    }
    std::vector<ChannelSums> sums(static_cast<std::size_t>(links));
    for (int c = 0; c < n; ++c) {
      const int k = scratch.assignment[static_cast<std::size_t>(c)];
      if (k > 0) {
        add_channel(sums[static_cast<std::size_t>(k - 1)], specs[static_cast<std::size_t>(c)]);
        ++scratch.assigned;
      }
    }
    preds.clear();
    for (int k = 0; k < links; ++k) {
      preds.push_back(predict(budgets[static_cast<std::size_t>(k)], sums[static_cast<std::size_t>(k)], window_s));
      for (int c = 0; c < n; ++c)
        if (scratch.assignment[static_cast<std::size_t>(c)] == k + 1) preds.back().channels.push_back(c + 1);
    }
    const auto value = objective_value(objective, preds);
    scratch.valid = value.has_value();
    scratch.key = value ? std::llround(*value * 1e6) : 0;
  };

  unsigned w = workers == 0 ? worker_count() : workers;
  w = static_cast<unsigned>(std::max<long long>(1, std::min<long long>(w, total)));
  std::vector<Candidate> best(w);
  auto run = [&](unsigned id) {
    const long long lo = total * id / w;
    const long long hi = total * (id + 1) / w;
    Candidate scratch;
    scratch.assignment.assign(static_cast<std::size_t>(n), 0);
    std::vector<LinkPrediction> preds;
    for (long long i = lo; i < hi; ++i) {
      evaluate(i, scratch, preds);
      if (better(scratch, best[id])) best[id] = scratch;
    }
  };
  if (w == 1) {
    run(0);
  } else {
    std::vector<std::thread> threads;
    for (unsigned id = 0; id < w; ++id) threads.emplace_back(run, id);
    for (auto& t : threads) t.join();
  }
  Candidate winner;
  for (const auto& c : best)
    if (better(c, winner)) winner = c;
  if (!winner.valid) {
    fail(ErrorCode::Infeasible, "no allocation satisfies " + to_string(objective));
  }
  OptimizeResult result;
  result.assignment = winner.assignment;
  result.allocation = allocation_from_assignment(winner.assignment, budgets);
  result.predictions = predicted_link_rates(result.allocation, specs, budgets, options);
  result.score = *objective_value(objective, result.predictions);
  return result;
}

}  // namespace qlan
