#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "qlan/quantum_math.hpp"

namespace qlan {

/// Waveplate angles of one QWP -> HWP -> PBS analyzer, fast axes measured
/// from horizontal in degrees. Both angles are stored normalized to [0, 180).
class AnalyzerSetting {
 public:
  AnalyzerSetting() = default;
  AnalyzerSetting(double qwp_deg, double hwp_deg);

  double qwp_deg() const noexcept { return qwp_; }
  double hwp_deg() const noexcept { return hwp_; }

  friend bool operator==(const AnalyzerSetting&, const AnalyzerSetting&) = default;
  friend auto operator<=>(const AnalyzerSetting&, const AnalyzerSetting&) = default;

 private:
  double qwp_ = 0.0;
  double hwp_ = 0.0;
};

double normalize_angle_deg(double deg);

/// Six projection labels of the analyzer table. D, A, R and L are defined
/// relative to a per-node compensation offset x (degrees on the HWP):
/// H=(0,0) V=(0,45) D=(45,x) A=(45,x+45) R=(45,x+22.5) L=(45,x-22.5).
enum class Label { H, V, D, A, R, L };

inline constexpr std::array<Label, 6> kAllLabels = {Label::H, Label::V, Label::D,
                                                    Label::A, Label::R, Label::L};

char label_char(Label label) noexcept;
std::optional<Label> parse_label(std::string_view text) noexcept;
/// The orthogonal partner within the same basis (H<->V, D<->A, R<->L).
Label partner(Label label) noexcept;

AnalyzerSetting setting_for(Label label, double x_deg = 0.0);

/// Half-wave plate [[cos2t, sin2t], [sin2t, -cos2t]] (global phase dropped).
Matrix2 hwp_jones(double theta_deg);

/// Quarter-wave plate with fast-axis phase convention matching hwp_jones.
Matrix2 qwp_jones(double theta_deg);

/// Input polarization transmitted by the PBS H port after QWP then HWP,
/// i.e. (HWP * QWP)^dagger |H>.
Ket2 analyzer_state(const AnalyzerSetting& setting);
Matrix2 analyzer_projector(const AnalyzerSetting& setting);

/// The state selected by a label at zero compensation offset. Targets and
/// Stokes parameters are expressed in this label frame.
Ket2 label_state(Label label);

/// tr[rho (P1 x P2)], clamped to [0, 1].
double coincidence_probability(const DensityMatrix2Q& rho, const AnalyzerSetting& first,
                               const AnalyzerSetting& second);

/// tr[rho P] for one qubit.
double projection_probability(const DensityMatrix1Q& rho, const AnalyzerSetting& setting);

/// HWP offset x on the tuned node that maximizes the D/D coincidence
/// probability with both QWPs at 45 degrees and the other node's HWP at 0.
/// Coarse scan at 0.5 degrees followed by golden-section refinement to
/// 0.01 degrees. Throws DegenerateState on a flat objective.
double solve_compensation_x(const DensityMatrix2Q& rho, Subsystem tuned);

/// The state seen through compensated analyzers: probabilities of labelled
/// settings at offsets (x_first, x_second) on rho equal probabilities of the
/// same labels at zero offset on the returned state.
DensityMatrix2Q analysis_frame_state(const DensityMatrix2Q& rho, double x_first_deg,
                                     double x_second_deg);

struct Stokes {
  double s1 = 0.0;  // H - V
  double s2 = 0.0;  // D - A
  double s3 = 0.0;  // R - L
};

Stokes stokes(const DensityMatrix1Q& rho);

std::string to_string(const AnalyzerSetting& setting);

}  // namespace qlan
