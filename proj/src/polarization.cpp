#include "qlan/polarization.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

namespace qlan {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

Matrix2 phase_rotation(double beta_rad) {
  Matrix2 z = Matrix2::Zero();
  z(0, 0) = 1.0;
  z(1, 1) = std::polar(1.0, beta_rad);
  return z;
}

}  // namespace

double normalize_angle_deg(double deg) {
  double r = std::fmod(deg, 180.0);
  if (r < 0.0) r += 180.0;
  if (r >= 180.0) r = 0.0;
  return r;
}

AnalyzerSetting::AnalyzerSetting(double qwp_deg, double hwp_deg)
    : qwp_(normalize_angle_deg(qwp_deg)), hwp_(normalize_angle_deg(hwp_deg)) {
  if (!std::isfinite(qwp_deg) || !std::isfinite(hwp_deg)) {
    fail(ErrorCode::InvalidArgument, "waveplate angles must be finite");
  }
}

char label_char(Label label) noexcept {
  switch (label) {
    case Label::H: return 'H';
    case Label::V: return 'V';
    case Label::D: return 'D';
    case Label::A: return 'A';
    case Label::R: return 'R';
    case Label::L: return 'L';
  }
  return '?';
}

std::optional<Label> parse_label(std::string_view text) noexcept {
  if (text.size() != 1) return std::nullopt;
  switch (text[0]) {
    case 'H': case 'h': return Label::H;
    case 'V': case 'v': return Label::V;
    case 'D': case 'd': return Label::D;
    case 'A': case 'a': return Label::A;
    case 'R': case 'r': return Label::R;
    case 'L': case 'l': return Label::L;
    default: return std::nullopt;
  }
}

Label partner(Label label) noexcept {
  switch (label) {
    case Label::H: return Label::V;
    case Label::V: return Label::H;
    case Label::D: return Label::A;
    case Label::A: return Label::D;
    case Label::R: return Label::L;
    case Label::L: return Label::R;
  }
  return label;
}

AnalyzerSetting setting_for(Label label, double x_deg) {
  switch (label) {
    case Label::H: return {0.0, 0.0};
    case Label::V: return {0.0, 45.0};
    case Label::D: return {45.0, x_deg};
    case Label::A: return {45.0, x_deg + 45.0};
    case Label::R: return {45.0, x_deg + 22.5};
    case Label::L: return {45.0, x_deg - 22.5};
  }
  return {};
}

Matrix2 hwp_jones(double theta_deg) {
  const double c = std::cos(2.0 * theta_deg * kDeg);
  const double s = std::sin(2.0 * theta_deg * kDeg);
  Matrix2 m;
  m << c, s, s, -c;
  return m;
}

Matrix2 qwp_jones(double theta_deg) {
  const double c = std::cos(theta_deg * kDeg);
  const double s = std::sin(theta_deg * kDeg);
  const Complex i(0.0, 1.0);
  const Complex off = (1.0 - i) * s * c;
  Matrix2 m;
  m << c * c + i * s * s, off, off, s * s + i * c * c;
  return std::polar(1.0, -std::numbers::pi / 4.0) * m;
}

Ket2 analyzer_state(const AnalyzerSetting& setting) {
  const Matrix2 system = hwp_jones(setting.hwp_deg()) * qwp_jones(setting.qwp_deg());
  Ket2 chi = system.adjoint() * states::h();
  // Fix the global phase so the first nonzero amplitude is real and positive.
  const Complex lead = std::abs(chi(0)) > 1e-12 ? chi(0) : chi(1);
  chi *= std::conj(lead) / std::abs(lead);
  return chi;
}

Matrix2 analyzer_projector(const AnalyzerSetting& setting) {
  const Ket2 chi = analyzer_state(setting);
  return chi * chi.adjoint();
}

Ket2 label_state(Label label) { return analyzer_state(setting_for(label, 0.0)); }

double coincidence_probability(const DensityMatrix2Q& rho, const AnalyzerSetting& first,
                               const AnalyzerSetting& second) {
  const Ket4 chi = states::product(analyzer_state(first), analyzer_state(second));
  return std::clamp(chi.dot(rho.matrix() * chi).real(), 0.0, 1.0);
}

double projection_probability(const DensityMatrix1Q& rho, const AnalyzerSetting& setting) {
  const Ket2 chi = analyzer_state(setting);
  return std::clamp(chi.dot(rho.matrix() * chi).real(), 0.0, 1.0);
}

double solve_compensation_x(const DensityMatrix2Q& rho, Subsystem tuned) {
  const AnalyzerSetting fixed = setting_for(Label::D, 0.0);
  auto objective = [&](double x) {
    const AnalyzerSetting moving = setting_for(Label::D, x);
    return tuned == Subsystem::First ? coincidence_probability(rho, moving, fixed)
                                     : coincidence_probability(rho, fixed, moving);
  };

  constexpr double kStep = 0.5;
  double best_x = 0.0;
  double best = -1.0;
  double worst = 2.0;
  for (int k = 0; k < 360; ++k) {
    const double x = k * kStep;
    const double f = objective(x);
    if (f > best) {
      best = f;
      best_x = x;
    }
    worst = std::min(worst, f);
  }
  if (best - worst < 1e-9) {
    fail(ErrorCode::DegenerateState, "D/D coincidence probability does not depend on the HWP offset");
  }

  // Golden-section search on the bracket around the best grid point.
  const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = best_x - kStep;
  double hi = best_x + kStep;
  double c = hi - ratio * (hi - lo);
  double d = lo + ratio * (hi - lo);
  double fc = objective(c);
  double fd = objective(d);
  while (hi - lo > 0.01) {
    if (fc > fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - ratio * (hi - lo);
      fc = objective(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + ratio * (hi - lo);
      fd = objective(d);
    }
  }
  return normalize_angle_deg(0.5 * (lo + hi));
}

DensityMatrix2Q analysis_frame_state(const DensityMatrix2Q& rho, double x_first_deg,
                                     double x_second_deg) {
  // A HWP offset x moves every equatorial analyzer state by -4x in relative
  // H/V phase and leaves H and V untouched.
  const MatrixX z = kron(MatrixX(phase_rotation(-4.0 * x_first_deg * kDeg)),
                         MatrixX(phase_rotation(-4.0 * x_second_deg * kDeg)));
  const Matrix4 rotated = z.adjoint() * rho.matrix() * z;
  return DensityMatrix2Q(rotated);
}

Stokes stokes(const DensityMatrix1Q& rho) {
  auto p = [&](Label l) {
    const Ket2 k = label_state(l);
    return k.dot(rho.matrix() * k).real();
  };
  return {p(Label::H) - p(Label::V), p(Label::D) - p(Label::A), p(Label::R) - p(Label::L)};
}

std::string to_string(const AnalyzerSetting& setting) {
  std::ostringstream os;
  os << setting.qwp_deg() << "/" << setting.hwp_deg();
  return os.str();
}

}  // namespace qlan
