#include "qlan/source_model.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "qlan/random.hpp"

namespace qlan {

ChannelFrequencies channel_frequencies(int n, const ChannelGrid& grid) {
  if (n < 1 || n > grid.num_pairs) {
    std::ostringstream os;
    os << "channel " << n << " outside 1.." << grid.num_pairs;
    fail(ErrorCode::IndexOutOfRange, os.str());
  }
  if (grid.spacing_units % 2 != 0) fail(ErrorCode::InvalidArgument, "grid spacing must be an even number of units");
  ChannelFrequencies f;
  const int offset = grid.spacing_units / 2 * (2 * n - 1);
  f.signal_units = grid.center_units + offset;
  f.idler_units = grid.center_units - offset;
  f.signal_thz = f.signal_units * ChannelGrid::kUnitThz;
  f.idler_thz = f.idler_units * ChannelGrid::kUnitThz;
  f.signal_itu = itu_channel(f.signal_thz);
  f.idler_itu = itu_channel(f.idler_thz);
  return f;
}

double itu_channel(double thz) noexcept { return (thz - 190.0) / 0.1; }

void ChannelPairSpec::validate() const {
  std::ostringstream os;
  if (!(pair_rate >= 0.0)) os << "pair_rate must be >= 0; ";
  if (!(visibility >= 0.0 && visibility <= 1.0)) os << "visibility must lie in [0, 1]; ";
  if (!(crosstalk_fraction >= 0.0 && crosstalk_fraction <= 1.0)) os << "crosstalk_fraction must lie in [0, 1]; ";
  if (!std::isfinite(bell_phase_deg)) os << "bell_phase_deg must be finite; ";
  const std::string msg = os.str();
  if (!msg.empty()) fail(ErrorCode::InvalidArgument, "channel " + std::to_string(index) + ": " + msg);
}

double visibility_from_fidelity(double fidelity) {
  if (!(fidelity >= 0.25 && fidelity <= 1.0)) fail(ErrorCode::InvalidArgument, "fidelity must lie in [0.25, 1]");
  return (4.0 * fidelity - 1.0) / 3.0;
}

double fidelity_from_visibility(double visibility) noexcept { return (1.0 + 3.0 * visibility) / 4.0; }

DensityMatrix2Q channel_state(const ChannelPairSpec& spec) {
  spec.validate();
  const double r = 1.0 / std::sqrt(2.0);
  const Ket4 psi(0.0, r, r * std::polar(1.0, spec.bell_phase_deg * std::numbers::pi / 180.0), 0.0);
  return mix(spec.visibility, DensityMatrix2Q::pure(psi), DensityMatrix2Q());
}

DensityMatrix2Q mixture_state(const std::vector<ChannelPairSpec>& specs) {
  double total = 0.0;
  Matrix4 acc = Matrix4::Zero();
  for (const auto& s : specs) {
    acc += s.pair_rate * channel_state(s).matrix();
    total += s.pair_rate;
  }
  if (total <= 0.0) fail(ErrorCode::InvalidArgument, "mixture of channels with zero total pair rate");
  return DensityMatrix2Q(Matrix4(acc / total));
}

Eigen::MatrixXd jsi_matrix(const std::vector<ChannelPairSpec>& specs, const JsiOptions& options) {
  if (!(options.integration_s > 0.0)) fail(ErrorCode::InvalidDuration, "integration time must be positive");
  const auto n = static_cast<Eigen::Index>(specs.size());
  Eigen::MatrixXd m = Eigen::MatrixXd::Constant(n, n, options.floor_rate_hz * options.integration_s);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = specs[static_cast<std::size_t>(i)];
    s.validate();
    const double matched = s.pair_rate * options.eff_signal * options.eff_idler * options.integration_s;
    m(i, i) += matched;
    if (i > 0) m(i, i - 1) += s.crosstalk_fraction * matched;
  }
  if (options.poisson) {
    Rng rng(derive_seed(options.seed, "jsi"));
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        const double mean = m(i, j);
        m(i, j) = mean > 0.0 ? static_cast<double>(std::poisson_distribution<long long>(mean)(rng)) : 0.0;
      }
  }
  return m;
}

double car(const Eigen::MatrixXd& jsi) {
  if (jsi.rows() != jsi.cols() || jsi.rows() < 2) fail(ErrorCode::DimensionMismatch, "JSI must be square with at least 2 channels");
  const double n = static_cast<double>(jsi.rows());
  const double diag = jsi.diagonal().sum();
  const double off = jsi.sum() - diag;
  if (off <= 0.0) fail(ErrorCode::DivisionByZeroAccidentals, "no counts in mismatched bins");
  return (diag / n) / (off / (n * n - n));
}

const std::vector<double>& reference_channel_fidelities() {
  static const std::vector<double> f{0.952, 0.948, 0.942, 0.935, 0.944, 0.949, 0.943, 0.947};
  return f;
}

}  // namespace qlan
