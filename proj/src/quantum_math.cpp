#include "qlan/quantum_math.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace qlan {

namespace {

double max_asymmetry(const MatrixX& m) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = i; j < m.cols(); ++j) {
      worst = std::max(worst, std::abs(m(i, j) - std::conj(m(j, i))));
    }
  }
  return worst;
}

void require_square(const MatrixX& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    std::ostringstream os;
    os << what << " expects a non-empty square matrix, got " << m.rows() << "x" << m.cols();
    fail(ErrorCode::DimensionMismatch, os.str());
  }
}

MatrixX psd_sqrt(const MatrixX& m) {
  const HermitianEigen eig = hermitian_eigen(m);
  Eigen::VectorXd roots = eig.values.unaryExpr([](double x) { return std::sqrt(std::max(x, 0.0)); });
  return eig.vectors * roots.cast<Complex>().asDiagonal() * eig.vectors.adjoint();
}

}  // namespace

template <int Dim>
DensityMatrix<Dim>::DensityMatrix(const Matrix& m) {
  const MatrixX dyn = m;
  if (max_asymmetry(dyn) > kHermitianTolerance) {
    fail(ErrorCode::InvalidDensityMatrix, "matrix is not Hermitian");
  }
  const Complex tr = m.trace();
  if (std::abs(tr - Complex(1.0, 0.0)) > kTraceTolerance) {
    std::ostringstream os;
    os << "trace " << tr.real() << " differs from one";
    fail(ErrorCode::InvalidDensityMatrix, os.str());
  }
  m_ = (m + m.adjoint()) * 0.5;
  const HermitianEigen eig = hermitian_eigen(MatrixX(m_));
  if (eig.values(0) < kPositivityTolerance) {
    std::ostringstream os;
    os << "minimum eigenvalue " << eig.values(0) << " is negative";
    fail(ErrorCode::InvalidDensityMatrix, os.str());
  }
}

template <int Dim>
DensityMatrix<Dim> DensityMatrix<Dim>::pure(const Ket& ket) {
  const double norm = ket.norm();
  if (norm == 0.0) fail(ErrorCode::InvalidArgument, "zero state vector");
  const Ket unit = ket / norm;
  return DensityMatrix(unit * unit.adjoint());
}

template class DensityMatrix<2>;
template class DensityMatrix<4>;

template <int Dim>
DensityMatrix<Dim> mix(double a, const DensityMatrix<Dim>& rho1, const DensityMatrix<Dim>& rho2) {
  if (!(a >= 0.0 && a <= 1.0)) fail(ErrorCode::InvalidArgument, "mixing weight outside [0, 1]");
  return DensityMatrix<Dim>(a * rho1.matrix() + (1.0 - a) * rho2.matrix());
}

template DensityMatrix<2> mix(double, const DensityMatrix<2>&, const DensityMatrix<2>&);
template DensityMatrix<4> mix(double, const DensityMatrix<4>&, const DensityMatrix<4>&);

HermitianEigen hermitian_eigen(const MatrixX& in) {
  require_square(in, "hermitian_eigen");
  if (max_asymmetry(in) > 1e-10) {
    fail(ErrorCode::NonHermitianInput, "asymmetry exceeds 1e-10");
  }
  const Eigen::Index n = in.rows();
  MatrixX a = (in + in.adjoint()) * 0.5;
  MatrixX v = MatrixX::Identity(n, n);
  const double tol = 1e-14 * std::max(1.0, a.norm());

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off = std::max(off, std::abs(a(p, q)));
    if (off < tol) break;

    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const Complex apq = a(p, q);
        const double mag = std::abs(apq);
        if (mag == 0.0) continue;
        const Complex phase = std::conj(apq / mag);
        const double theta = (a(q, q).real() - a(p, p).real()) / (2.0 * mag);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        // J = diag(1, phase) * [[c, s], [-s, c]] restricted to rows/cols (p, q)
        const Complex jpp = c, jpq = s, jqp = -s * phase, jqq = c * phase;

        for (Eigen::Index k = 0; k < n; ++k) {
          const Complex akp = a(k, p), akq = a(k, q);
          a(k, p) = akp * jpp + akq * jqp;
          a(k, q) = akp * jpq + akq * jqq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const Complex apk = a(p, k), aqk = a(q, k);
          a(p, k) = std::conj(jpp) * apk + std::conj(jqp) * aqk;
          a(q, k) = std::conj(jpq) * apk + std::conj(jqq) * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        a(p, p) = a(p, p).real();
        a(q, q) = a(q, q).real();
        for (Eigen::Index k = 0; k < n; ++k) {
          const Complex vkp = v(k, p), vkq = v(k, q);
          v(k, p) = vkp * jpp + vkq * jqp;
          v(k, q) = vkp * jpq + vkq * jqq;
        }
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index x, Eigen::Index y) { return a(x, x).real() < a(y, y).real(); });

  HermitianEigen out{Eigen::VectorXd(n), MatrixX(n, n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    out.values(i) = a(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(i)]).real();
    out.vectors.col(i) = v.col(order[static_cast<std::size_t>(i)]);
  }
  return out;
}

MatrixX kron(const MatrixX& a, const MatrixX& b) {
  MatrixX out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

Matrix4 partial_transpose(const Matrix4& m, Subsystem which) {
  Matrix4 out;
  for (int i1 = 0; i1 < 2; ++i1)
    for (int i2 = 0; i2 < 2; ++i2)
      for (int j1 = 0; j1 < 2; ++j1)
        for (int j2 = 0; j2 < 2; ++j2) {
          const Complex value = m(2 * i1 + i2, 2 * j1 + j2);
          if (which == Subsystem::Second) {
            out(2 * i1 + j2, 2 * j1 + i2) = value;
          } else {
            out(2 * j1 + i2, 2 * i1 + j2) = value;
          }
        }
  return out;
}

Matrix4 partial_transpose(const DensityMatrix2Q& rho, Subsystem which) {
  return partial_transpose(rho.matrix(), which);
}

double trace_norm(const MatrixX& m) {
  require_square(m, "trace_norm");
  return hermitian_eigen(m).values.cwiseAbs().sum();
}

double log_negativity(const DensityMatrix2Q& rho, Subsystem which) {
  const double norm = trace_norm(MatrixX(partial_transpose(rho, which)));
  return norm <= 1.0 ? 0.0 : std::log2(norm);
}

double fidelity_with_pure(const MatrixX& rho, const Eigen::VectorXcd& target) {
  if (rho.rows() != rho.cols() || rho.rows() != target.size()) {
    std::ostringstream os;
    os << "state of dimension " << rho.rows() << " against target of dimension " << target.size();
    fail(ErrorCode::DimensionMismatch, os.str());
  }
  if (std::abs(target.norm() - 1.0) > 1e-9) fail(ErrorCode::InvalidArgument, "target state is not normalized");
  const double value = target.dot(rho * target).real();
  return std::clamp(value, 0.0, 1.0);
}

double fidelity(const MatrixX& rho, const MatrixX& sigma) {
  if (rho.rows() != sigma.rows() || rho.cols() != sigma.cols()) {
    fail(ErrorCode::DimensionMismatch, "fidelity between states of different dimension");
  }
  const MatrixX root = psd_sqrt(rho);
  const MatrixX inner = root * sigma * root;
  const HermitianEigen eig = hermitian_eigen((inner + inner.adjoint()) * 0.5);
  double total = 0.0;
  for (Eigen::Index i = 0; i < eig.values.size(); ++i) total += std::sqrt(std::max(eig.values(i), 0.0));
  return std::clamp(total * total, 0.0, 1.0);
}

DensityMatrix1Q partial_trace(const DensityMatrix2Q& rho, Subsystem keep) {
  Matrix2 out = Matrix2::Zero();
  const Matrix4& m = rho.matrix();
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k) {
        out(i, j) += keep == Subsystem::First ? m(2 * i + k, 2 * j + k) : m(2 * k + i, 2 * k + j);
      }
  return DensityMatrix1Q(out);
}

double ebit_rate(double log_negativity, double coincidence_rate) {
  if (!(log_negativity >= 0.0) || !(coincidence_rate >= 0.0)) {
    fail(ErrorCode::InvalidArgument, "ebit_rate needs non-negative log-negativity and rate");
  }
  return log_negativity * coincidence_rate;
}

EntanglementSummary summarize_entanglement(const DensityMatrix2Q& rho, const Ket4& target,
                                           double coincidence_rate) {
  EntanglementSummary s;
  s.log_negativity = log_negativity(rho);
  s.coincidence_rate = coincidence_rate;
  s.ebit_rate = ebit_rate(s.log_negativity, coincidence_rate);
  s.fidelity = fidelity_with_pure(rho, target);
  return s;
}

namespace states {

Ket2 h() { return Ket2(1.0, 0.0); }
Ket2 v() { return Ket2(0.0, 1.0); }

Ket4 product(const Ket2& first, const Ket2& second) {
  Ket4 out;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) out(2 * i + j) = first(i) * second(j);
  return out;
}

Ket4 bell(Bell which) {
  const double r = 1.0 / std::sqrt(2.0);
  switch (which) {
    case Bell::PsiPlus: return Ket4(0.0, r, r, 0.0);
    case Bell::PsiMinus: return Ket4(0.0, r, -r, 0.0);
    case Bell::PhiPlus: return Ket4(r, 0.0, 0.0, r);
    case Bell::PhiMinus: return Ket4(r, 0.0, 0.0, -r);
  }
  return Ket4::Zero();
}

DensityMatrix2Q werner(double p) {
  return mix(p, DensityMatrix2Q::pure(bell(Bell::PsiPlus)), DensityMatrix2Q());
}

}  // namespace states

}  // namespace qlan
