#include "doctest.h"

#include <cmath>
#include <cstdlib>
#include <random>

#include "qlan/coincidence.hpp"
#include "qlan/random.hpp"

using namespace qlan;

namespace {

TimetagStream make(std::vector<std::uint64_t> bins, std::uint32_t res = 5000) {
  std::sort(bins.begin(), bins.end());
  TimetagStream s;
  s.clock_resolution_ps = res;
  for (auto b : bins) s.records.push_back({b, 0});
  return s;
}

std::uint64_t brute_force(const TimetagStream& a, const TimetagStream& b, std::int64_t delay, double window_ns) {
  const auto [lo, hi] = window_bounds(window_ns, a.clock_resolution_ps);
  std::vector<bool> used(b.records.size(), false);
  std::uint64_t n = 0;
  for (const auto& ra : a.records) {
    long best = -1;
    std::int64_t best_dist = 0;
    for (std::size_t j = 0; j < b.records.size(); ++j) {
      const std::int64_t off = static_cast<std::int64_t>(b.records[j].global_bin) -
                               static_cast<std::int64_t>(ra.global_bin) - delay;
      if (off < lo || off > hi || used[j]) continue;
      if (best < 0 || std::llabs(off) < best_dist) {
        best = static_cast<long>(j);
        best_dist = std::llabs(off);
      }
    }
    if (best >= 0) {
      used[static_cast<std::size_t>(best)] = true;
      ++n;
    }
  }
  return n;
}

TimetagStream poisson_stream(Rng& rng, double rate, double duration_s, std::uint32_t res = 5000) {
  const auto bins = static_cast<std::uint64_t>(duration_s * 1e12 / res);
  const auto n = std::poisson_distribution<long long>(rate * duration_s)(rng);
  std::uniform_int_distribution<std::uint64_t> u(0, bins - 1);
  std::vector<std::uint64_t> t;
  for (long long i = 0; i < n; ++i) t.push_back(u(rng));
  return make(t, res);
}

}  // namespace

TEST_CASE("window bounds are half open") {
  CHECK(window_bounds(10.0, 5000) == std::pair<std::int64_t, std::int64_t>{0, 1});
  CHECK(window_bounds(1.0, 1) == std::pair<std::int64_t, std::int64_t>{-499, 500});
  CHECK(window_bounds(5.0, 5000) == std::pair<std::int64_t, std::int64_t>{0, 0});
  CHECK_THROWS_AS(window_bounds(1.0, 5000), Error);
}

TEST_CASE("delay histogram") {
  const auto a = make({10, 20, 30, 45});
  auto h = delay_histogram(a, a, 5);
  auto off = find_offset(h);
  CHECK(off.delay_bins == 0);
  CHECK(off.peak == 4);

  const auto b = make({17, 27, 37, 52});
  CHECK(find_offset(delay_histogram(a, b, 20)).delay_bins == 7);

  TimetagStream c = b;
  c.clock_resolution_ps = 1000;
  CHECK_THROWS_AS(delay_histogram(a, c, 5), Error);
  CHECK_THROWS_AS(delay_histogram(a, b, 2'000'000), Error);

  Rng rng(5);
  const auto p = poisson_stream(rng, 2e4, 5.0);
  const auto q = poisson_stream(rng, 2e4, 5.0);
  const auto flat = delay_histogram(p, q, 200, 10);
  double mean = 0;
  for (auto v : flat.counts) mean += v;
  mean /= flat.counts.size();
  const double expected = 2e4 * 2e4 * 5.0 * 10 * 5e-9;
  CHECK(std::abs(mean - expected) < 3 * std::sqrt(expected / flat.counts.size()) + 1.0);
  CHECK(find_offset(flat).low_confidence);
}

TEST_CASE("find_offset tie-breaks") {
  DelayHistogram h;
  h.min_delay_bins = -5;
  h.counts = {0, 0, 9, 0, 0, 0, 0, 0, 0, 0, 0};
  CHECK(find_offset(h).delay_bins == -3);
  h.counts = {0, 0, 0, 4, 0, 0, 0, 4, 0, 0, 0};
  CHECK(find_offset(h).delay_bins == -2);
  h.counts = {0, 0, 0, 4, 0, 0, 4, 4, 0, 0, 0};
  CHECK(find_offset(h).delay_bins == 1);
  h.counts.clear();
  CHECK_THROWS_AS(find_offset(h), Error);
}

TEST_CASE("counting matched streams") {
  std::vector<std::uint64_t> t;
  for (int i = 0; i < 100; ++i) t.push_back(1000 + 500 * i);
  const auto a = make(t);
  std::vector<std::uint64_t> shifted;
  for (auto x : t) shifted.push_back(x + 3);
  const auto b = make(shifted);
  CHECK(count_coincidences(a, b, 3, 10.0) == 100);
  CHECK(count_coincidences(a, b, 3 + 20, 10.0) == 0);
}

TEST_CASE("sweep counter equals brute-force matcher") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    std::uniform_int_distribution<int> size(0, 1000);
    std::uniform_int_distribution<std::uint64_t> when(0, 3000);
    std::vector<std::uint64_t> ta(static_cast<std::size_t>(size(rng))), tb(static_cast<std::size_t>(size(rng)));
    for (auto& x : ta) x = when(rng);
    for (auto& x : tb) x = when(rng);
    const auto a = make(ta), b = make(tb);
    for (double w : {5.0, 10.0, 25.0}) {
      for (std::int64_t d : {-2, 0, 3}) {
        CHECK(count_coincidences(a, b, d, w) == brute_force(a, b, d, w));
      }
    }
  }
}

TEST_CASE("halving the window never increases counts") {
  Rng rng(8);
  for (int rep = 0; rep < 20; ++rep) {
    const auto a = poisson_stream(rng, 1e5, 0.05, 100);
    const auto b = poisson_stream(rng, 1e5, 0.05, 100);
    double w = 40.0;
    std::uint64_t prev = count_coincidences(a, b, 0, w);
    while (w > 0.2) {
      w /= 2;
      const auto c = count_coincidences(a, b, 0, w);
      CHECK(c <= prev);
      prev = c;
    }
  }
}

TEST_CASE("accidental estimates") {
  std::vector<std::uint64_t> t;
  for (int i = 0; i < 2000; ++i) t.push_back(1000 + 5000 * static_cast<std::uint64_t>(i));
  const auto a = make(t);
  CHECK(estimate_accidentals(a, a, 0, 10.0) == 0.0);
  CHECK_THROWS_AS(estimate_accidentals(a, a, 0, 20.0), Error);
  const auto tiny = make({1, 2, 3});
  try {
    estimate_accidentals(tiny, tiny, 0, 10.0);
    FAIL("expected StreamTooShort");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::StreamTooShort);
  }

  double ratio = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const auto p = poisson_stream(rng, 5e4, 1.0);
    const auto q = poisson_stream(rng, 5e4, 1.0);
    ratio += estimate_accidentals(p, q, 0, 10.0) / (static_cast<double>(p.records.size()) * q.records.size() * 10e-9);
  }
  CHECK(ratio / 100 == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("subtracted counts") {
  std::map<std::string, std::uint64_t> raw{{"a", 120}, {"b", 5}};
  std::map<std::string, double> acc{{"a", 20.0}, {"b", 9.0}};
  const auto s = subtracted_counts(raw, acc);
  CHECK(s.at("a") == 100);
  CHECK(s.at("b") == 0);
  std::map<std::string, double> zero{{"a", 0.0}, {"b", 0.0}};
  CHECK(subtracted_counts(raw, zero) == raw);
  std::map<std::string, double> wrong{{"a", 0.0}, {"c", 0.0}};
  CHECK_THROWS_AS(subtracted_counts(raw, wrong), Error);
}
