#include "qlan/timetag.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>

#include "qlan/random.hpp"

namespace qlan {

namespace {

constexpr char kMagic[4] = {'Q', 'L', 'T', 'T'};
constexpr std::uint16_t kVersion = 1;

template <typename T>
void put_le(std::ostream& out, T value) {
  char bytes[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff);
  out.write(bytes, sizeof(T));
}

template <typename T>
T get_le(std::istream& in, const char* what) {
  unsigned char bytes[sizeof(T)];
  in.read(reinterpret_cast<char*>(bytes), sizeof(T));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(T))) {
    fail(ErrorCode::TruncatedFile, std::string("file ends inside ") + what);
  }
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return static_cast<T>(v);
}

std::vector<Picoseconds> poisson_times(Rng& rng, double rate_hz, Picoseconds start, Picoseconds duration) {
  std::vector<Picoseconds> out;
  const double mean = rate_hz * static_cast<double>(duration) / static_cast<double>(kPsPerSecond);
  if (mean <= 0.0) return out;
  out.reserve(static_cast<std::size_t>(mean + 6.0 * std::sqrt(mean) + 16.0));
  std::exponential_distribution<double> gap(rate_hz / static_cast<double>(kPsPerSecond));
  double t = gap(rng);
  while (t < static_cast<double>(duration)) {
    out.push_back(start + static_cast<Picoseconds>(t));
    t += gap(rng);
  }
  return out;
}

// Insertion sort for data that is sorted up to small local displacements;
// falls back to std::sort when that assumption fails.
template <typename T, typename Less>
void sort_nearly_sorted(std::vector<T>& v, Less less) {
  std::size_t moves = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!less(v[i], v[i - 1])) continue;
    T x = v[i];
    std::size_t j = i;
    while (j > 0 && less(x, v[j - 1])) {
      v[j] = v[j - 1];
      --j;
      if (++moves > v.size()) {
        v[j] = x;
        std::sort(v.begin(), v.end(), less);
        return;
      }
    }
    v[j] = x;
  }
}

Picoseconds jittered(Rng& rng, Picoseconds t, double delay_ns, double jitter_ps) {
  double offset = delay_ns * 1000.0;
  if (jitter_ps > 0.0) offset += std::normal_distribution<double>(0.0, jitter_ps)(rng);
  return t + static_cast<Picoseconds>(std::llround(offset));
}

TimetagStream finish(const SimNode& node, std::vector<Picoseconds> physical, const SimulationOptions& options) {
  if (node.detector.gate) {
    std::erase_if(physical, [&](Picoseconds t) { return !in_gate(t, *node.detector.gate); });
  }
  const auto dead = static_cast<Picoseconds>(std::llround(node.detector.dead_time_us * 1e6));
  physical = apply_dead_time(physical, dead);

  TimetagStream s;
  s.node_id = node.id;
  s.clock_resolution_ps = options.clock_resolution_ps;
  s.records.reserve(physical.size());
  const auto res = static_cast<Picoseconds>(options.clock_resolution_ps);
  std::int64_t cached_second = std::numeric_limits<std::int64_t>::min();
  double cached_offset = 0.0;
  ClockModel no_drift = node.clock;
  no_drift.drift_ns_per_s = 0.0;
  for (Picoseconds t : physical) {
    Picoseconds recorded = t;
    if (node.clock_enabled) {
      const std::int64_t second = t >= 0 ? t / kPsPerSecond : -1 - (-t - 1) / kPsPerSecond;
      const double fraction = static_cast<double>(t - second * kPsPerSecond) / static_cast<double>(kPsPerSecond);
      if (second != cached_second) {
        cached_second = second;
        cached_offset = sample_clock_offset(no_drift, second);
      }
      const double offset_ns = cached_offset + node.clock.drift_ns_per_s * fraction;
      recorded += static_cast<Picoseconds>(std::llround(offset_ns * 1000.0));
    }
    if (recorded < 0) continue;
    s.records.push_back({static_cast<std::uint64_t>(recorded / res), 0});
  }
  sort_nearly_sorted(s.records, [](const TimetagRecord& a, const TimetagRecord& b) { return a.global_bin < b.global_bin; });
  return s;
}

}  // namespace

bool TimetagStream::is_sorted() const noexcept {
  return std::is_sorted(records.begin(), records.end(),
                        [](const TimetagRecord& a, const TimetagRecord& b) { return a.global_bin < b.global_bin; });
}

double TimetagStream::span_s() const noexcept {
  if (records.size() < 2) return 0.0;
  return static_cast<double>(records.back().global_bin - records.front().global_bin) * clock_resolution_ps * 1e-12;
}

void write_stream(const TimetagStream& stream, std::ostream& out) {
  if (stream.clock_resolution_ps == 0) fail(ErrorCode::InvalidArgument, "clock resolution must be positive");
  if (!stream.is_sorted()) fail(ErrorCode::UnsortedRecords, "records must be sorted by global bin");
  if (stream.node_id.size() > 0xffff) fail(ErrorCode::InvalidArgument, "node id longer than 65535 bytes");
  out.write(kMagic, 4);
  put_le<std::uint16_t>(out, kVersion);
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(stream.node_id.size()));
  out.write(stream.node_id.data(), static_cast<std::streamsize>(stream.node_id.size()));
  put_le<std::uint32_t>(out, stream.clock_resolution_ps);
  put_le<std::uint64_t>(out, stream.records.size());
  std::string buffer;
  buffer.reserve(stream.records.size() * 9);
  for (const auto& r : stream.records) {
    for (int i = 0; i < 8; ++i) buffer.push_back(static_cast<char>((r.global_bin >> (8 * i)) & 0xff));
    buffer.push_back(static_cast<char>(r.detector_channel));
  }
  out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
  if (!out) fail(ErrorCode::IoError, "failed writing timetag stream");
}

void write_stream(const TimetagStream& stream, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  write_stream(stream, out);
}

TimetagStream read_stream(std::istream& in) {
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4) fail(ErrorCode::TruncatedFile, "file ends inside magic");
  if (!std::equal(magic, magic + 4, kMagic)) fail(ErrorCode::BadMagic, "not a QLTT file");
  const auto version = get_le<std::uint16_t>(in, "version");
  if (version != kVersion) fail(ErrorCode::UnsupportedVersion, "QLTT version " + std::to_string(version));
  const auto id_len = get_le<std::uint16_t>(in, "node id length");
  TimetagStream s;
  s.node_id.resize(id_len);
  in.read(s.node_id.data(), id_len);
  if (in.gcount() != id_len) fail(ErrorCode::TruncatedFile, "file ends inside node id");
  s.clock_resolution_ps = get_le<std::uint32_t>(in, "clock resolution");
  const auto count = get_le<std::uint64_t>(in, "record count");
  std::string buffer;
  const std::uint64_t limit = 1ULL << 36;
  if (count > limit) fail(ErrorCode::TruncatedFile, "record count exceeds file size");
  buffer.resize(static_cast<std::size_t>(count * 9));
  in.read(buffer.data(), static_cast<std::streamsize>(buffer.size()));
  if (static_cast<std::uint64_t>(in.gcount()) != count * 9) {
    fail(ErrorCode::TruncatedFile, "expected " + std::to_string(count) + " records");
  }
  s.records.resize(static_cast<std::size_t>(count));
  for (std::size_t i = 0; i < s.records.size(); ++i) {
    std::uint64_t bin = 0;
    for (int b = 0; b < 8; ++b) bin |= static_cast<std::uint64_t>(static_cast<unsigned char>(buffer[i * 9 + b])) << (8 * b);
    s.records[i] = {bin, static_cast<std::uint8_t>(buffer[i * 9 + 8])};
    if (i > 0 && bin < s.records[i - 1].global_bin) {
      fail(ErrorCode::UnsortedRecords, "record " + std::to_string(i) + " precedes its predecessor");
    }
  }
  return s;
}

TimetagStream read_stream(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  return read_stream(in);
}

double sample_clock_offset(const ClockModel& model, std::int64_t second_index, double fraction) {
  double offset = model.drift_ns_per_s * fraction;
  if (model.pps_sigma_ns > 0.0) {
    Rng rng(derive_seed(model.seed, static_cast<std::uint64_t>(second_index)));
    offset += std::normal_distribution<double>(0.0, model.pps_sigma_ns)(rng);
  }
  return offset;
}

void DetectorModel::validate() const {
  if (kind == DetectorKind::GatedApd && !gate) fail(ErrorCode::ModelMismatch, "gated_apd detector needs a gate");
  if (kind == DetectorKind::Snspd && gate) fail(ErrorCode::ModelMismatch, "snspd detector cannot have a gate");
  if (!(efficiency > 0.0 && efficiency <= 1.0)) fail(ErrorCode::InvalidArgument, "detector efficiency must lie in (0, 1]");
  if (!(dead_time_us >= 0.0) || !(jitter_ps >= 0.0) || !(dark_rate_hz >= 0.0)) {
    fail(ErrorCode::InvalidArgument, "dead time, jitter and dark rate must be >= 0");
  }
  if (gate && (!(gate->rate_mhz > 0.0) || !(gate->window_ns > 0.0))) {
    fail(ErrorCode::InvalidArgument, "gate rate and window must be positive");
  }
}

double DetectorModel::duty_cycle() const noexcept {
  if (!gate) return 1.0;
  return std::min(1.0, gate->rate_mhz * 1e6 * gate->window_ns * 1e-9);
}

std::vector<Picoseconds> apply_dead_time(const std::vector<Picoseconds>& events, Picoseconds dead_time) {
  if (!std::is_sorted(events.begin(), events.end())) fail(ErrorCode::UnsortedInput, "event times must be sorted");
  std::vector<Picoseconds> out;
  out.reserve(events.size());
  for (Picoseconds t : events) {
    if (out.empty() || t - out.back() >= dead_time) out.push_back(t);
  }
  return out;
}

bool in_gate(Picoseconds t, const Gate& gate) noexcept {
  const double period = 1e6 / gate.rate_mhz;
  double phase = std::fmod(static_cast<double>(t), period);
  if (phase < 0.0) phase += period;
  return std::min(phase, period - phase) <= gate.window_ns * 500.0;
}

std::pair<TimetagStream, TimetagStream> simulate_link(const DensityMatrix2Q& rho, double pair_rate,
                                                      const SimNode& first, const SimNode& second,
                                                      const AnalyzerSetting& setting_first,
                                                      const AnalyzerSetting& setting_second, double duration_s,
                                                      std::uint64_t seed, const SimulationOptions& options) {
  if (!(duration_s > 0.0 && duration_s <= 3600.0)) fail(ErrorCode::InvalidDuration, "duration must lie in (0, 3600] s");
  if (!(pair_rate >= 0.0)) fail(ErrorCode::InvalidArgument, "pair rate must be >= 0");
  if (options.clock_resolution_ps == 0) fail(ErrorCode::InvalidArgument, "clock resolution must be positive");
  first.detector.validate();
  second.detector.validate();
  for (const SimNode* n : {&first, &second}) {
    if (!(n->arm_transmission >= 0.0 && n->arm_transmission <= 1.0)) {
      fail(ErrorCode::InvalidArgument, "arm transmission of " + n->id + " must lie in [0, 1]");
    }
  }

  const double p11 = coincidence_probability(rho, setting_first, setting_second);
  const double p1 = projection_probability(partial_trace(rho, Subsystem::First), setting_first);
  const double p2 = projection_probability(partial_trace(rho, Subsystem::Second), setting_second);
  const double t1 = first.arm_transmission * first.detector.efficiency;
  const double t2 = second.arm_transmission * second.detector.efficiency;
  const double both = pair_rate * p11 * t1 * t2;
  const double only1 = std::max(0.0, pair_rate * (p1 * t1 - p11 * t1 * t2));
  const double only2 = std::max(0.0, pair_rate * (p2 * t2 - p11 * t1 * t2));

  const auto start = static_cast<Picoseconds>(std::llround(options.start_s * 1e12));
  const auto duration = static_cast<Picoseconds>(std::llround(duration_s * 1e12));

  Rng pair_rng(derive_seed(seed, "pairs"));
  Rng rng1(derive_seed(seed, "node1"));
  Rng rng2(derive_seed(seed, "node2"));

  std::vector<Picoseconds> ev1, ev2;
  for (Picoseconds t : poisson_times(pair_rng, both, start, duration)) {
    ev1.push_back(jittered(rng1, t, first.fiber_delay_ns, first.detector.jitter_ps));
    ev2.push_back(jittered(rng2, t, second.fiber_delay_ns, second.detector.jitter_ps));
  }
  auto append = [](std::vector<Picoseconds>& ev, const std::vector<Picoseconds>& more) {
    const auto mid = static_cast<std::ptrdiff_t>(ev.size());
    ev.insert(ev.end(), more.begin(), more.end());
    std::inplace_merge(ev.begin(), ev.begin() + mid, ev.end());
  };
  sort_nearly_sorted(ev1, std::less<>());
  sort_nearly_sorted(ev2, std::less<>());
  std::vector<Picoseconds> tmp = poisson_times(rng1, only1, start, duration);
  for (auto& t : tmp) t = jittered(rng1, t, first.fiber_delay_ns, first.detector.jitter_ps);
  sort_nearly_sorted(tmp, std::less<>());
  append(ev1, tmp);
  tmp = poisson_times(rng2, only2, start, duration);
  for (auto& t : tmp) t = jittered(rng2, t, second.fiber_delay_ns, second.detector.jitter_ps);
  sort_nearly_sorted(tmp, std::less<>());
  append(ev2, tmp);
  append(ev1, poisson_times(rng1, first.detector.dark_rate_hz, start, duration));
  append(ev2, poisson_times(rng2, second.detector.dark_rate_hz, start, duration));

  return {finish(first, std::move(ev1), options), finish(second, std::move(ev2), options)};
}

}  // namespace qlan
