#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qlan/polarization.hpp"

namespace qlan {

using Picoseconds = std::int64_t;

inline constexpr Picoseconds kPsPerSecond = 1'000'000'000'000;

struct TimetagRecord {
  std::uint64_t global_bin = 0;
  std::uint8_t detector_channel = 0;

  friend bool operator==(const TimetagRecord&, const TimetagRecord&) = default;
};

struct TimetagStream {
  std::string node_id;
  std::uint32_t clock_resolution_ps = 5000;
  std::vector<TimetagRecord> records;

  bool is_sorted() const noexcept;
  /// Span of the records in seconds (last minus first bin).
  double span_s() const noexcept;
  friend bool operator==(const TimetagStream&, const TimetagStream&) = default;
};

/// QLTT v1: "QLTT", u16 version, u16 node-id length, node id bytes,
/// u32 resolution_ps, u64 count, count x (u64 bin, u8 channel). All LE.
void write_stream(const TimetagStream& stream, std::ostream& out);
void write_stream(const TimetagStream& stream, const std::filesystem::path& path);
TimetagStream read_stream(std::istream& in);
TimetagStream read_stream(const std::filesystem::path& path);

struct ClockModel {
  std::string node_id;
  double pps_sigma_ns = 0.0;
  double drift_ns_per_s = 0.0;
  std::uint64_t seed = 0;
};

/// Offset of the node clock during second `second_index`, evaluated at
/// `fraction` (0..1) of the way through that second.
double sample_clock_offset(const ClockModel& model, std::int64_t second_index, double fraction = 0.0);

enum class DetectorKind { Snspd, GatedApd };

struct Gate {
  double rate_mhz = 15.0;
  double window_ns = 33.5;
};

struct DetectorModel {
  DetectorKind kind = DetectorKind::Snspd;
  double efficiency = 0.8;
  double dead_time_us = 0.05;
  double jitter_ps = 50.0;
  std::optional<Gate> gate;
  double dark_rate_hz = 100.0;

  /// Throws ModelMismatch for inconsistent kind/gate pairs, InvalidArgument
  /// for out-of-range values.
  void validate() const;
  double duty_cycle() const noexcept;
};

/// Non-paralyzable dead time on sorted times.
std::vector<Picoseconds> apply_dead_time(const std::vector<Picoseconds>& events, Picoseconds dead_time);

/// True when t lies within window/2 of the nearest gate tick.
bool in_gate(Picoseconds t, const Gate& gate) noexcept;

/// One end of a link as seen by the simulator.
struct SimNode {
  std::string id;
  DetectorModel detector;
  ClockModel clock;
  double arm_transmission = 1.0;  // fiber and insertion loss, excluding detector efficiency
  double fiber_delay_ns = 0.0;
  bool clock_enabled = true;
};

struct SimulationOptions {
  std::uint32_t clock_resolution_ps = 5000;
  double start_s = 0.0;  // global time of the run start
};

/// Pair emission, loss, analyzer projection, detection and timestamping for
/// one analyzer setting pair. Returns the streams of the first and second node.
std::pair<TimetagStream, TimetagStream> simulate_link(const DensityMatrix2Q& rho, double pair_rate,
                                                      const SimNode& first, const SimNode& second,
                                                      const AnalyzerSetting& setting_first,
                                                      const AnalyzerSetting& setting_second, double duration_s,
                                                      std::uint64_t seed, const SimulationOptions& options = {});

}  // namespace qlan
