#pragma once

#include <complex>

#include <Eigen/Dense>

#include "qlan/error.hpp"

namespace qlan {

using Complex = std::complex<double>;
using Matrix2 = Eigen::Matrix2cd;
using Matrix4 = Eigen::Matrix4cd;
using Ket2 = Eigen::Vector2cd;
using Ket4 = Eigen::Vector4cd;
using MatrixX = Eigen::MatrixXcd;

inline constexpr double kHermitianTolerance = 1e-12;
inline constexpr double kTraceTolerance = 1e-12;
inline constexpr double kPositivityTolerance = -1e-10;

/// Tensor slot of a two-qubit state. The first slot is the node listed first
/// in the link name, so for link A-B Alice occupies the first slot and the
/// computational basis order is (HH, HV, VH, VV).
enum class Subsystem { First, Second };

/// A validated density matrix of Dim x Dim (2 for one qubit, 4 for two).
///
/// Construction checks Hermiticity, unit trace and positivity and stores the
/// exactly Hermitian part of the input. Values are immutable afterwards.
template <int Dim>
class DensityMatrix {
 public:
  using Matrix = Eigen::Matrix<Complex, Dim, Dim>;
  using Ket = Eigen::Matrix<Complex, Dim, 1>;

  /// Maximally mixed state.
  DensityMatrix() : m_(Matrix::Identity() / static_cast<double>(Dim)) {}

  explicit DensityMatrix(const Matrix& m);

  static DensityMatrix pure(const Ket& ket);

  const Matrix& matrix() const noexcept { return m_; }
  Complex operator()(int row, int col) const { return m_(row, col); }

  static constexpr int dimension() noexcept { return Dim; }

 private:
  Matrix m_;
};

using DensityMatrix1Q = DensityMatrix<2>;
using DensityMatrix2Q = DensityMatrix<4>;

extern template class DensityMatrix<2>;
extern template class DensityMatrix<4>;

/// Mixture a*rho1 + (1-a)*rho2; a must lie in [0, 1].
template <int Dim>
DensityMatrix<Dim> mix(double a, const DensityMatrix<Dim>& rho1, const DensityMatrix<Dim>& rho2);

struct HermitianEigen {
  Eigen::VectorXd values;  // ascending
  MatrixX vectors;         // columns are eigenvectors
};

/// Cyclic Jacobi eigensolver for small Hermitian matrices. Rotations stop once
/// every off-diagonal magnitude is below 1e-14 (scaled by the matrix norm when
/// it exceeds one). Inputs whose asymmetry exceeds 1e-10 are rejected with
/// NonHermitianInput; smaller asymmetry is symmetrized away.
HermitianEigen hermitian_eigen(const MatrixX& m);

MatrixX kron(const MatrixX& a, const MatrixX& b);

Matrix4 partial_transpose(const DensityMatrix2Q& rho, Subsystem which = Subsystem::Second);
Matrix4 partial_transpose(const Matrix4& m, Subsystem which = Subsystem::Second);

/// Sum of absolute eigenvalues of a Hermitian matrix.
double trace_norm(const MatrixX& m);

/// log2 of the trace norm of the partial transpose, clamped at zero.
double log_negativity(const DensityMatrix2Q& rho, Subsystem which = Subsystem::Second);

/// <target|rho|target>. Throws DimensionMismatch when sizes differ.
double fidelity_with_pure(const MatrixX& rho, const Eigen::VectorXcd& target);

template <int Dim>
double fidelity_with_pure(const DensityMatrix<Dim>& rho, const Eigen::VectorXcd& target) {
  return fidelity_with_pure(MatrixX(rho.matrix()), target);
}

/// Uhlmann fidelity (tr sqrt(sqrt(rho) sigma sqrt(rho)))^2, which reduces to
/// <psi|rho|psi> when sigma is pure.
double fidelity(const MatrixX& rho, const MatrixX& sigma);

template <int Dim>
double fidelity(const DensityMatrix<Dim>& rho, const DensityMatrix<Dim>& sigma) {
  return fidelity(MatrixX(rho.matrix()), MatrixX(sigma.matrix()));
}

DensityMatrix1Q partial_trace(const DensityMatrix2Q& rho, Subsystem keep);

/// Entangled bits per second: log-negativity times coincidence rate.
double ebit_rate(double log_negativity, double coincidence_rate);

struct EntanglementSummary {
  double log_negativity = 0.0;    // ebits
  double coincidence_rate = 0.0;  // pairs per second
  double ebit_rate = 0.0;         // ebits per second
  double fidelity = 0.0;
};

EntanglementSummary summarize_entanglement(const DensityMatrix2Q& rho, const Ket4& target,
                                           double coincidence_rate);

namespace states {

Ket2 h();
Ket2 v();

enum class Bell { PsiPlus, PsiMinus, PhiPlus, PhiMinus };

Ket4 bell(Bell which);
Ket4 product(const Ket2& first, const Ket2& second);

/// p |Psi+><Psi+| + (1 - p) I/4.
DensityMatrix2Q werner(double p);

}  // namespace states

}  // namespace qlan
