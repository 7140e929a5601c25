#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "qlan/quantum_math.hpp"

namespace qlan {

/// Frequencies are kept as integers in units of 12.5 GHz so that energy
/// matching holds exactly.
struct ChannelGrid {
  static constexpr double kUnitThz = 0.0125;
  int center_units = 15385;  // 192.3125 THz
  int spacing_units = 2;     // 25 GHz
  int num_pairs = 8;
};

struct ChannelFrequencies {
  int signal_units = 0;
  int idler_units = 0;
  double signal_thz = 0.0;
  double idler_thz = 0.0;
  double signal_itu = 0.0;
  double idler_itu = 0.0;
};

/// signal = center + spacing (n - 1/2), idler = center - spacing (n - 1/2).
ChannelFrequencies channel_frequencies(int n, const ChannelGrid& grid = {});

/// ITU channel number (f - 190 THz) / 0.1 THz.
double itu_channel(double thz) noexcept;

struct ChannelPairSpec {
  int index = 1;
  double pair_rate = 0.0;        // generated pairs per second
  double bell_phase_deg = 0.0;   // residual phase of |HV> + e^{i phi} |VH>
  double visibility = 1.0;       // weight of the Bell component against I/4
  double crosstalk_fraction = 0.0;

  void validate() const;
};

double visibility_from_fidelity(double fidelity);
double fidelity_from_visibility(double visibility) noexcept;

/// v |Psi(phi)><Psi(phi)| + (1 - v) I/4.
DensityMatrix2Q channel_state(const ChannelPairSpec& spec);

/// Rate-weighted mixture of the channel states of the given channels.
DensityMatrix2Q mixture_state(const std::vector<ChannelPairSpec>& specs);

struct JsiOptions {
  double integration_s = 5.0;
  double eff_signal = 1.0;
  double eff_idler = 1.0;
  double floor_rate_hz = 0.0;  // expected accidental rate in every bin
  bool poisson = false;
  std::uint64_t seed = 0;
};

/// Expected (or Poisson-sampled) coincidence counts. Rows index the signal
/// channel and columns the idler channel; crosstalk from pair n lands in
/// bin (n, n-1).
Eigen::MatrixXd jsi_matrix(const std::vector<ChannelPairSpec>& specs, const JsiOptions& options);

/// Mean of matched (diagonal) bins over mean of mismatched bins.
double car(const Eigen::MatrixXd& jsi);

/// Table I fidelities of the eight channel pairs.
const std::vector<double>& reference_channel_fidelities();

}  // namespace qlan
