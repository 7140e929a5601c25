#include "qlan/coincidence.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

namespace qlan {

namespace {

void require_same_resolution(const TimetagStream& a, const TimetagStream& b) {
  if (a.clock_resolution_ps != b.clock_resolution_ps) {
    fail(ErrorCode::ResolutionMismatch, "streams use " + std::to_string(a.clock_resolution_ps) + " ps and " +
                                            std::to_string(b.clock_resolution_ps) + " ps bins");
  }
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

}  // namespace

DelayHistogram& DelayHistogram::operator+=(const DelayHistogram& other) {
  if (other.min_delay_bins != min_delay_bins || other.bin_width != bin_width || other.counts.size() != counts.size() ||
      other.clock_resolution_ps != clock_resolution_ps) {
    fail(ErrorCode::DimensionMismatch, "histograms have different layouts");
  }
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
  return *this;
}

DelayHistogram delay_histogram(const TimetagStream& a, const TimetagStream& b, std::int64_t span_bins,
                               std::int64_t bin_width) {
  require_same_resolution(a, b);
  if (span_bins < 0 || span_bins > 1'000'000) fail(ErrorCode::InvalidArgument, "span must lie in [0, 1e6] bins");
  if (bin_width < 1) fail(ErrorCode::InvalidArgument, "bin width must be >= 1");
  DelayHistogram h;
  h.bin_width = bin_width;
  h.clock_resolution_ps = a.clock_resolution_ps;
  h.min_delay_bins = floor_div(-span_bins, bin_width) * bin_width;
  const std::int64_t top = floor_div(span_bins, bin_width) * bin_width;
  h.counts.assign(static_cast<std::size_t>((top - h.min_delay_bins) / bin_width + 1), 0);

  std::size_t lo = 0;
  const auto& rb = b.records;
  for (const auto& ra : a.records) {
    const auto ta = static_cast<std::int64_t>(ra.global_bin);
    while (lo < rb.size() && static_cast<std::int64_t>(rb[lo].global_bin) < ta - span_bins) ++lo;
    for (std::size_t j = lo; j < rb.size(); ++j) {
      const std::int64_t d = static_cast<std::int64_t>(rb[j].global_bin) - ta;
      if (d > span_bins) break;
      ++h.counts[static_cast<std::size_t>((floor_div(d, bin_width) * bin_width - h.min_delay_bins) / bin_width)];
    }
  }
  return h;
}

OffsetEstimate find_offset(const DelayHistogram& hist) {
  if (hist.counts.empty()) fail(ErrorCode::EmptyHistogram, "histogram has no bins");
  OffsetEstimate e;
  std::size_t best = 0;
  double total = 0.0;
  for (std::size_t i = 0; i < hist.counts.size(); ++i) {
    total += static_cast<double>(hist.counts[i]);
    const auto c = hist.counts[i];
    const auto bc = hist.counts[best];
    if (c > bc) {
      best = i;
    } else if (c == bc && i != best) {
      const std::int64_t di = hist.delay_at(i), db = hist.delay_at(best);
      if (std::llabs(di) < std::llabs(db) || (std::llabs(di) == std::llabs(db) && di < db)) best = i;
    }
  }
  e.delay_bins = hist.delay_at(best);
  e.peak = hist.counts[best];
  e.mean = total / static_cast<double>(hist.counts.size());
  e.low_confidence = static_cast<double>(e.peak) < e.mean + 5.0 * std::sqrt(e.mean) || e.peak == 0;
  return e;
}

std::pair<std::int64_t, std::int64_t> window_bounds(double window_ns, std::uint32_t clock_resolution_ps) {
  if (!(window_ns > 0.0)) fail(ErrorCode::InvalidArgument, "window must be positive");
  if (window_ns * 1000.0 < static_cast<double>(clock_resolution_ps) - 1e-9) {
    fail(ErrorCode::InvalidArgument, "window narrower than the clock resolution");
  }
  const double h = window_ns * 1000.0 / (2.0 * clock_resolution_ps);
  // Small tolerance so that exact multiples are not lost to rounding.
  const auto hi = static_cast<std::int64_t>(std::floor(h + 1e-9));
  const auto lo = static_cast<std::int64_t>(std::floor(-h + 1e-9)) + 1;
  return {lo, hi};
}

std::int64_t align_window(const DelayHistogram& hist, std::int64_t peak_delay, double window_ns) {
  if (hist.counts.empty()) fail(ErrorCode::EmptyHistogram, "histogram has no bins");
  const auto [lo, hi] = window_bounds(window_ns, hist.clock_resolution_ps);
  auto count_at = [&](std::int64_t delay) {
    std::uint64_t sum = 0;
    for (std::int64_t d = delay + lo; d <= delay + hi; ++d) {
      const std::int64_t rel = d - hist.min_delay_bins;
      if (rel < 0 || rel % hist.bin_width != 0) continue;
      const auto i = static_cast<std::size_t>(rel / hist.bin_width);
      if (i < hist.counts.size()) sum += hist.counts[i];
    }
    return sum;
  };
  const std::int64_t reach = hi - lo + 1;
  std::int64_t best = peak_delay;
  std::uint64_t best_count = count_at(peak_delay);
  for (std::int64_t k = 1; k <= reach; ++k) {
    for (std::int64_t d : {peak_delay - k, peak_delay + k}) {
      const std::uint64_t c = count_at(d);
      if (c > best_count) {
        best = d;
        best_count = c;
      }
    }
  }
  return best;
}

std::uint64_t count_coincidences(const TimetagStream& a, const TimetagStream& b, std::int64_t delay_bins,
                                 double window_ns) {
  require_same_resolution(a, b);
  const auto [lo, hi] = window_bounds(window_ns, a.clock_resolution_ps);
  const auto& rb = b.records;
  std::vector<char> used(rb.size(), 0);
  std::size_t start = 0;
  std::uint64_t count = 0;
  for (const auto& ra : a.records) {
    const std::int64_t centre = static_cast<std::int64_t>(ra.global_bin) + delay_bins;
    while (start < rb.size() && static_cast<std::int64_t>(rb[start].global_bin) < centre + lo) ++start;
    std::size_t pick = rb.size();
    std::int64_t pick_dist = 0;
    for (std::size_t j = start; j < rb.size(); ++j) {
      const std::int64_t off = static_cast<std::int64_t>(rb[j].global_bin) - centre;
      if (off > hi) break;
      if (used[j]) continue;
      const std::int64_t dist = std::llabs(off);
      if (pick == rb.size() || dist < pick_dist) {
        pick = j;
        pick_dist = dist;
      }
    }
    if (pick != rb.size()) {
      used[pick] = 1;
      ++count;
    }
  }
  return count;
}

double estimate_accidentals(const TimetagStream& a, const TimetagStream& b, std::int64_t delay_bins,
                            double window_ns, const AccidentalOptions& options) {
  require_same_resolution(a, b);
  if (options.num_shifts < 1) fail(ErrorCode::InvalidArgument, "need at least one shifted window");
  if (options.shift_ns < 10.0 * window_ns) {
    fail(ErrorCode::InvalidArgument, "shift spacing must be at least ten windows");
  }
  const auto shift_bins = static_cast<std::int64_t>(std::llround(options.shift_ns * 1000.0 / a.clock_resolution_ps));
  if (shift_bins < 1) fail(ErrorCode::InvalidArgument, "shift spacing below one clock bin");
  const double reach_s = options.num_shifts * options.shift_ns * 1e-9;
  if (a.records.empty() || b.records.empty()) return 0.0;
  if (reach_s > std::min(a.span_s(), b.span_s())) {
    fail(ErrorCode::StreamTooShort, "shifted windows extend beyond the recorded span");
  }
  double total = 0.0;
  for (int k = 1; k <= options.num_shifts; ++k) {
    total += static_cast<double>(count_coincidences(a, b, delay_bins + k * shift_bins, window_ns));
  }
  return total / options.num_shifts;
}

CoincidenceResult correlate(const TimetagStream& a, const TimetagStream& b, std::int64_t delay_bins,
                            double window_ns, double integration_s, const AccidentalOptions& options) {
  CoincidenceResult r;
  r.delay_bins = delay_bins;
  r.window_ns = window_ns;
  r.integration_s = integration_s;
  r.raw_coincidences = count_coincidences(a, b, delay_bins, window_ns);
  r.accidentals = estimate_accidentals(a, b, delay_bins, window_ns, options);
  return r;
}

}  // namespace qlan
