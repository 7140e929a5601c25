#include "doctest.h"

#include <cmath>
#include <random>
#include <sstream>

#include "qlan/coincidence.hpp"
#include "qlan/random.hpp"
#include "qlan/timetag.hpp"

using namespace qlan;

namespace {

SimNode ideal_node(const std::string& id) {
  SimNode n;
  n.id = id;
  n.detector.efficiency = 1.0;
  n.detector.dead_time_us = 0.0;
  n.detector.jitter_ps = 0.0;
  n.detector.dark_rate_hz = 0.0;
  n.clock_enabled = false;
  return n;
}

double stddev(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= v.size();
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / (v.size() - 1));
}

}  // namespace

TEST_CASE("QLTT round trip is byte exact") {
  std::mt19937_64 rng(1);
  TimetagStream s;
  s.node_id = "Bob";
  s.clock_resolution_ps = 5000;
  std::uint64_t t = 0;
  for (int i = 0; i < 100000; ++i) {
    t += rng() % 1000;
    s.records.push_back({t, static_cast<std::uint8_t>(rng() % 4)});
  }
  std::stringstream first;
  write_stream(s, first);
  const std::string bytes = first.str();
  CHECK(bytes.size() == 4 + 2 + 2 + 3 + 4 + 8 + 9 * s.records.size());
  CHECK(bytes.substr(0, 4) == "QLTT");
  std::stringstream in(bytes);
  const auto back = read_stream(in);
  CHECK(back == s);
  std::stringstream second;
  write_stream(back, second);
  CHECK(second.str() == bytes);
}

TEST_CASE("QLTT format errors") {
  TimetagStream s;
  s.node_id = "A";
  s.records = {{1, 0}, {5, 0}};
  std::stringstream ok;
  write_stream(s, ok);
  const std::string bytes = ok.str();

  auto code_of = [](std::string data) {
    std::stringstream in(data);
    try {
      read_stream(in);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::IoError;
  };
  std::string bad = bytes;
  bad.replace(0, 4, "XXXX");
  CHECK(code_of(bad) == ErrorCode::BadMagic);
  bad = bytes;
  bad[4] = 2;
  CHECK(code_of(bad) == ErrorCode::UnsupportedVersion);
  CHECK(code_of(bytes.substr(0, bytes.size() - 4)) == ErrorCode::TruncatedFile);
  CHECK(code_of(bytes.substr(0, 7)) == ErrorCode::TruncatedFile);
  bad = bytes;
  bad[bad.size() - 9] = 0;  // second record bin 5 -> 0
  CHECK(code_of(bad) == ErrorCode::UnsortedRecords);

  s.records = {{5, 0}, {1, 0}};
  std::stringstream out;
  CHECK_THROWS_AS(write_stream(s, out), Error);
}

TEST_CASE("dead time is non-paralyzable") {
  CHECK(apply_dead_time({0, 50'000'000, 150'000'000}, 100'000'000) == std::vector<Picoseconds>{0, 150'000'000});
  CHECK(apply_dead_time({}, 100).empty());
  CHECK_THROWS_AS(apply_dead_time({5, 1}, 1), Error);

  Rng rng(3);
  const double rate = 5e3, dead = 100e-6, duration = 200.0;
  std::vector<Picoseconds> ev;
  std::uniform_int_distribution<Picoseconds> u(0, static_cast<Picoseconds>(duration * 1e12));
  const auto n = std::poisson_distribution<long long>(rate * duration)(rng);
  for (long long i = 0; i < n; ++i) ev.push_back(u(rng));
  std::sort(ev.begin(), ev.end());
  const auto kept = apply_dead_time(ev, static_cast<Picoseconds>(dead * 1e12));
  CHECK(kept.size() / duration == doctest::Approx(rate / (1 + rate * dead)).epsilon(0.02));
}

TEST_CASE("gate keeps events near ticks") {
  const Gate g{15.0, 33.5};
  const double period = 1e6 / 15.0;
  CHECK(in_gate(0, g));
  CHECK(in_gate(16'000, g));
  CHECK_FALSE(in_gate(17'000, g));
  CHECK(in_gate(static_cast<Picoseconds>(period * 3 - 16'000), g));
  DetectorModel d;
  d.kind = DetectorKind::GatedApd;
  CHECK_THROWS_AS(d.validate(), Error);
  d.gate = g;
  CHECK(d.duty_cycle() == doctest::Approx(0.5025));
  d.kind = DetectorKind::Snspd;
  try {
    d.validate();
    FAIL("expected ModelMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ModelMismatch);
  }
}

TEST_CASE("clock offsets") {
  ClockModel zero;
  for (int s = 0; s < 10; ++s) CHECK(sample_clock_offset(zero, s) == 0.0);
  ClockModel a{"A", 12.1 / std::sqrt(2.0), 0.0, 11};
  ClockModel b{"B", 12.1 / std::sqrt(2.0), 0.0, 12};
  std::vector<double> diff;
  for (int s = 0; s < 10000; ++s) diff.push_back(sample_clock_offset(a, s) - sample_clock_offset(b, s));
  CHECK(stddev(diff) == doctest::Approx(12.1).epsilon(0.04));
  CHECK(sample_clock_offset(a, 17) == sample_clock_offset(a, 17));
  ClockModel drift{"D", 0.0, 2.0, 0};
  CHECK(sample_clock_offset(drift, 3, 0.5) == doctest::Approx(1.0));
}

TEST_CASE("simulation basics") {
  const auto psi = DensityMatrix2Q::pure(states::bell(states::Bell::PsiPlus));
  auto a = ideal_node("A"), b = ideal_node("B");
  auto [sa, sb] = simulate_link(psi, 0.0, a, b, setting_for(Label::H), setting_for(Label::V), 1.0, 1);
  CHECK(sa.records.empty());
  CHECK(sb.records.empty());

  auto hh = simulate_link(psi, 1e4, a, b, setting_for(Label::H), setting_for(Label::H), 1.0, 2);
  CHECK(hh.first.records.size() > 4000);
  CHECK(count_coincidences(hh.first, hh.second, 0, 10.0) == 0);

  auto hv = simulate_link(psi, 1e4, a, b, setting_for(Label::H), setting_for(Label::V), 1.0, 2);
  CHECK(count_coincidences(hv.first, hv.second, 0, 10.0) == hv.first.records.size());

  const auto again = simulate_link(psi, 1e4, a, b, setting_for(Label::H), setting_for(Label::V), 1.0, 2);
  CHECK(again.first == hv.first);
  CHECK(again.second == hv.second);

  CHECK_THROWS_AS(simulate_link(psi, 1.0, a, b, {}, {}, 4000.0, 1), Error);
  CHECK_THROWS_AS(simulate_link(psi, 1.0, a, b, {}, {}, 0.0, 1), Error);
}

TEST_CASE("ideal streams give a one-bin peak at the delay difference") {
  const auto psi = DensityMatrix2Q::pure(states::bell(states::Bell::PsiPlus));
  auto a = ideal_node("A"), b = ideal_node("B");
  b.fiber_delay_ns = 35.0;
  SimulationOptions opt;
  opt.clock_resolution_ps = 5000;
  auto s = simulate_link(psi, 500.0, a, b, setting_for(Label::H), setting_for(Label::V), 10.0, 5, opt);
  const auto h = delay_histogram(s.first, s.second, 50);
  const auto off = find_offset(h);
  CHECK(off.delay_bins == 7);
  std::uint64_t total = 0;
  for (auto c : h.counts) total += c;
  CHECK(h.counts[static_cast<std::size_t>(7 - h.min_delay_bins)] == s.first.records.size());
  CHECK(total - s.first.records.size() <= 5);
}

TEST_CASE("singles never exceed transmitted flux plus dark counts") {
  const auto psi = DensityMatrix2Q::pure(states::bell(states::Bell::PsiPlus));
  auto a = ideal_node("A"), b = ideal_node("B");
  a.arm_transmission = 0.3;
  a.detector.dark_rate_hz = 500.0;
  a.detector.dead_time_us = 1.0;
  const double rate = 1e5;
  auto s = simulate_link(psi, rate, a, b, setting_for(Label::D), setting_for(Label::D), 2.0, 9);
  const double singles = s.first.records.size() / 2.0;
  CHECK(singles <= rate * 0.3 + 500.0);
  CHECK(singles > 0.8 * (rate * 0.3 * 0.5));
}

TEST_CASE("peak width follows the clock spread") {
  const auto psi = DensityMatrix2Q::pure(states::bell(states::Bell::PsiPlus));
  auto a = ideal_node("A"), b = ideal_node("B");
  a.clock_enabled = b.clock_enabled = true;
  a.clock = {"A", 8.0, 0.0, 101};
  b.clock = {"B", 6.0, 0.0, 202};
  SimulationOptions opt;
  opt.clock_resolution_ps = 100;
  auto s = simulate_link(psi, 20.0, a, b, setting_for(Label::H), setting_for(Label::V), 600.0, 4, opt);
  const auto h = delay_histogram(s.first, s.second, 1000);
  double n = 0, m = 0, m2 = 0;
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    const double d = h.delay_at(i) * 0.1;
    n += h.counts[i];
    m += h.counts[i] * d;
    m2 += h.counts[i] * d * d;
  }
  const double sd = std::sqrt(m2 / n - (m / n) * (m / n));
  CHECK(n > 5000);
  CHECK(sd == doctest::Approx(10.0).epsilon(0.1));
}
