#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "qlan/timetag.hpp"

namespace qlan {

struct DelayHistogram {
  std::int64_t min_delay_bins = 0;  // delay of counts[0]
  std::int64_t bin_width = 1;       // clock bins per histogram bin
  std::uint32_t clock_resolution_ps = 5000;
  std::vector<std::uint64_t> counts;

  std::int64_t delay_at(std::size_t i) const noexcept {
    return min_delay_bins + static_cast<std::int64_t>(i) * bin_width;
  }
  DelayHistogram& operator+=(const DelayHistogram& other);
};

/// Counts of t_b - t_a over [-span_bins, +span_bins] (clock bins), grouped
/// into histogram bins of bin_width clock bins.
DelayHistogram delay_histogram(const TimetagStream& a, const TimetagStream& b, std::int64_t span_bins,
                               std::int64_t bin_width = 1);

struct OffsetEstimate {
  std::int64_t delay_bins = 0;
  std::uint64_t peak = 0;
  double mean = 0.0;
  bool low_confidence = false;  // peak below mean + 5 sqrt(mean)
};

/// Argmax with ties broken by smallest |delay|, then negative delay first.
OffsetEstimate find_offset(const DelayHistogram& hist);

/// Accepted offsets (t_b - t_a - delay) in clock bins for a window of full
/// width window_ns, i.e. the half-open interval (-w/2, w/2].
std::pair<std::int64_t, std::int64_t> window_bounds(double window_ns, std::uint32_t clock_resolution_ps);

/// Greedy one-to-one matching: each a event in order takes the nearest unused
/// b event inside the window (earlier b on ties).
std::uint64_t count_coincidences(const TimetagStream& a, const TimetagStream& b, std::int64_t delay_bins,
                                 double window_ns);

/// Delay near `peak_delay` (within one window width) whose coincidence
/// window collects the most histogram counts; ties go to the delay closest
/// to the peak, then the smaller one.
std::int64_t align_window(const DelayHistogram& hist, std::int64_t peak_delay, double window_ns);

struct AccidentalOptions {
  int num_shifts = 8;
  double shift_ns = 100.0;
};

/// Mean coincidence count over windows shifted by k * shift_ns, k = 1..n.
double estimate_accidentals(const TimetagStream& a, const TimetagStream& b, std::int64_t delay_bins,
                            double window_ns, const AccidentalOptions& options = {});

struct CoincidenceResult {
  std::int64_t delay_bins = 0;
  double window_ns = 10.0;
  std::uint64_t raw_coincidences = 0;
  double accidentals = 0.0;
  double integration_s = 0.0;

  double raw_rate() const noexcept { return integration_s > 0 ? raw_coincidences / integration_s : 0.0; }
  double accidental_rate() const noexcept { return integration_s > 0 ? accidentals / integration_s : 0.0; }
};

CoincidenceResult correlate(const TimetagStream& a, const TimetagStream& b, std::int64_t delay_bins,
                            double window_ns, double integration_s, const AccidentalOptions& options = {});

/// Elementwise max(raw - accidental, 0), rounded to whole counts.
template <typename Key>
std::map<Key, std::uint64_t> subtracted_counts(const std::map<Key, std::uint64_t>& raw,
                                               const std::map<Key, double>& accidentals) {
  if (raw.size() != accidentals.size()) fail(ErrorCode::KeyMismatch, "raw and accidental maps differ in size");
  std::map<Key, std::uint64_t> out;
  for (const auto& [key, count] : raw) {
    const auto it = accidentals.find(key);
    if (it == accidentals.end()) fail(ErrorCode::KeyMismatch, "no accidental estimate for a raw key");
    const double v = static_cast<double>(count) - it->second;
    out.emplace(key, v > 0.0 ? static_cast<std::uint64_t>(std::llround(v)) : 0);
  }
  return out;
}

}  // namespace qlan
