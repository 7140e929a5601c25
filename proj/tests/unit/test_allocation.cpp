#include "doctest.h"

#include <functional>
#include <random>

#include "qlan/allocation.hpp"

using namespace qlan;

namespace {

ChannelAllocation alloc1() {
  ChannelAllocation a;
  a.entries.push_back({1, {"A", "B"}});
  for (int c = 2; c <= 7; ++c) a.entries.push_back({c, {"B", "C"}});
  a.entries.push_back({8, {"C", "A"}});
  return a;
}

std::vector<ChannelPairSpec> random_specs(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> rate(1e5, 5e6), vis(0.7, 1.0), phase(0.0, 90.0);
  std::vector<ChannelPairSpec> specs(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    specs[i].index = i + 1;
    specs[i].pair_rate = rate(rng);
    specs[i].visibility = vis(rng);
    specs[i].bell_phase_deg = phase(rng);
  }
  return specs;
}

std::vector<LinkBudget> random_budgets(std::mt19937_64& rng, int links) {
  const std::vector<Link> all = {{"A", "B"}, {"B", "C"}, {"C", "A"}};
  std::uniform_real_distribution<double> loss(0.0, 6.0), eff(0.01, 0.2), noise(0.0, 2e4), frac(0.0, 1.0);
  std::vector<LinkBudget> out;
  for (int k = 0; k < links; ++k) {
    LinkBudget b;
    b.link = all[static_cast<std::size_t>(k)];
    b.loss_db = loss(rng);
    b.first_arm_fraction = frac(rng);
    b.eff_first = eff(rng);
    b.eff_second = eff(rng);
    b.noise_first_hz = noise(rng);
    b.noise_second_hz = noise(rng);
    b.timing_sigma_ns = 12.0;
    out.push_back(b);
  }
  return out;
}

// Independent recursive enumeration using the public prediction function.
std::vector<int> oracle(const Objective& obj, const std::vector<ChannelPairSpec>& specs,
                        const std::vector<LinkBudget>& budgets) {
  const int n = static_cast<int>(specs.size());
  const int links = static_cast<int>(budgets.size());
  std::vector<int> cur(static_cast<std::size_t>(n), 0), best;
  long long best_key = 0;
  int best_assigned = 0;
  bool have = false;
  std::function<void(int)> rec = [&](int c) {
    if (c == n) {
      const auto alloc = allocation_from_assignment(cur, budgets);
      const auto v = objective_value(obj, predicted_link_rates(alloc, specs, budgets));
      if (!v) return;
      const long long key = std::llround(*v * 1e6);
      const int assigned = static_cast<int>(alloc.entries.size());
      if (!have || key > best_key || (key == best_key && assigned < best_assigned)) {
        have = true;
        best = cur;
        best_key = key;
        best_assigned = assigned;
      }
      return;
    }
    for (int k = 0; k <= links; ++k) {
      cur[static_cast<std::size_t>(c)] = k;
      rec(c + 1);
    }
  };
  rec(0);
  return best;
}

}  // namespace

TEST_CASE("validate reports violations") {
  const std::vector<std::string> nodes{"A", "B", "C"};
  CHECK(validate(alloc1(), nodes).empty());

  ChannelAllocation dbl;
  dbl.entries = {{3, {"A", "B"}}, {3, {"C", "A"}}};
  auto v = validate(dbl, nodes);
  REQUIRE(v.size() == 1);
  CHECK(v[0].kind == ViolationKind::DoubleAssignment);

  ChannelAllocation self;
  self.entries = {{1, {"A", "A"}}};
  CHECK(validate(self, nodes).at(0).kind == ViolationKind::SelfLink);

  ChannelAllocation dave;
  dave.entries = {{1, {"A", "Dave"}}, {9, {"A", "B"}}};
  v = validate(dave, nodes);
  CHECK(v.size() == 2);
  CHECK(v[0].kind == ViolationKind::UnknownNode);
  CHECK(v[1].kind == ViolationKind::ChannelOutOfRange);
}

TEST_CASE("link parsing") {
  CHECK(parse_link("A-B") == Link{"A", "B"});
  CHECK(parse_link("C–A") == Link{"C", "A"});
  CHECK(Link{"A", "C"}.same_pair(Link{"C", "A"}));
  CHECK_THROWS_AS(parse_link("AB"), Error);
}

TEST_CASE("single lossless channel predicts the pair rate") {
  ChannelPairSpec s;
  s.pair_rate = 1234.0;
  LinkBudget b;
  b.link = {"A", "B"};
  ChannelAllocation a;
  a.entries = {{1, {"A", "B"}}};
  const auto p = predicted_link_rates(a, {s}, {b});
  REQUIRE(p.size() == 1);
  CHECK(p[0].coincidence_rate == doctest::Approx(1234.0));
  CHECK(p[0].log_negativity == doctest::Approx(1.0));
}

TEST_CASE("accidentals scale quadratically") {
  std::mt19937_64 rng(1);
  auto specs = random_specs(rng, 8);
  auto budgets = random_budgets(rng, 3);
  for (auto& b : budgets) b.noise_first_hz = b.noise_second_hz = 0.0;
  const auto p1 = predicted_link_rates(alloc1(), specs, budgets);
  for (auto& s : specs) s.pair_rate *= 2.0;
  const auto p2 = predicted_link_rates(alloc1(), specs, budgets);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(p2[k].coincidence_rate == doctest::Approx(2.0 * p1[k].coincidence_rate));
    CHECK(p2[k].accidental_rate == doctest::Approx(4.0 * p1[k].accidental_rate));
  }
}

TEST_CASE("unassigned channels contribute nothing") {
  std::mt19937_64 rng(2);
  auto specs = random_specs(rng, 8);
  const auto budgets = random_budgets(rng, 3);
  const auto before = predicted_link_rates(alloc1(), specs, budgets);
  ChannelAllocation partial;
  partial.entries = {{1, {"A", "B"}}};
  const auto p = predicted_link_rates(partial, specs, budgets);
  CHECK(p[1].coincidence_rate == 0.0);
  CHECK(p[1].ebit_rate == 0.0);
  CHECK(p[0].coincidence_rate == doctest::Approx(before[0].coincidence_rate));
  ChannelAllocation bad;
  bad.entries = {{1, {"A", "Dave"}}};
  CHECK_THROWS_AS(predicted_link_rates(bad, specs, budgets), Error);
}

TEST_CASE("symmetric instance gives one channel per link") {
  std::vector<ChannelPairSpec> specs(3);
  for (int i = 0; i < 3; ++i) {
    specs[i].index = i + 1;
    specs[i].pair_rate = 1e6;
  }
  std::vector<LinkBudget> budgets(3);
  budgets[0].link = {"A", "B"};
  budgets[1].link = {"B", "C"};
  budgets[2].link = {"C", "A"};
  for (auto& b : budgets) {
    b.eff_first = b.eff_second = 0.05;
    b.noise_first_hz = b.noise_second_hz = 1e4;
  }
  const auto r = optimize({ObjectiveKind::MaxMinRE, 0.0}, specs, budgets);
  CHECK(r.assignment == std::vector<int>{1, 2, 3});
  CHECK_THROWS_AS(optimize({ObjectiveKind::MinFidelityFloor, 0.999999}, specs, budgets), Error);
}

TEST_CASE("optimizer matches re-enumeration oracle and is worker independent") {
  std::mt19937_64 rng(42);
  const std::vector<Objective> objectives = {{ObjectiveKind::MaxMinRE, 0.0},
                                             {ObjectiveKind::MaxTotalRE, 0.0},
                                             {ObjectiveKind::MinFidelityFloor, 0.6}};
  for (int inst = 0; inst < 12; ++inst) {
    const int n = 2 + inst % 5;
    const int links = 1 + inst % 3;
    const auto specs = random_specs(rng, n);
    const auto budgets = random_budgets(rng, links);
    for (const auto& obj : objectives) {
      std::vector<int> expected;
      try {
        expected = oracle(obj, specs, budgets);
      } catch (const Error&) {
      }
      if (expected.empty()) {
        CHECK_THROWS_AS(optimize(obj, specs, budgets, {}, 1), Error);
        continue;
      }
      const auto one = optimize(obj, specs, budgets, {}, 1);
      const auto many = optimize(obj, specs, budgets, {}, 5);
      CHECK(one.assignment == expected);
      CHECK(many.assignment == expected);
      CHECK(validate(one.allocation, {"A", "B", "C"}, n).empty());
    }
  }
}

TEST_CASE("max-min objective is monotone in pair rate") {
  std::mt19937_64 rng(77);
  const Objective obj{ObjectiveKind::MaxMinRE, 0.0};
  for (int rep = 0; rep < 5; ++rep) {
    auto specs = random_specs(rng, 4);
    const auto budgets = random_budgets(rng, 2);
    const double before = optimize(obj, specs, budgets).score;
    specs[static_cast<std::size_t>(rep % 4)].pair_rate *= 1.3;
    const double after = optimize(obj, specs, budgets).score;
    CHECK(after >= before - 1e-6);
  }
}

TEST_CASE("objective parsing") {
  CHECK(parse_objective("max-min-re").kind == ObjectiveKind::MaxMinRE);
  const auto f = parse_objective("min-fidelity-floor=0.9");
  CHECK(f.kind == ObjectiveKind::MinFidelityFloor);
  CHECK(f.fidelity_floor == doctest::Approx(0.9));
  CHECK_THROWS_AS(parse_objective("fastest"), Error);
}
