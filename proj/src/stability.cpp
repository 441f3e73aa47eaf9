#include "lfcons/stability.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace lfcons {

namespace {

double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

bool is_lower_triangular(const Matrix& a) {
  for (Eigen::Index j = 1; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < j; ++i)
      if (a(i, j) != 0.0) return false;
  return true;
}

bool is_upper_triangular(const Matrix& a) {
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = j + 1; i < a.rows(); ++i)
      if (a(i, j) != 0.0) return false;
  return true;
}

void require_positive(const Vector& v, const char* name) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!(v(i) > 0.0) || !std::isfinite(v(i))) {
      std::ostringstream os;
      os << name << "[" << i + 1 << "] = " << v(i) << " is not positive";
      throw ConfigError(os.str());
    }
  }
}

// Entry (i, j) of P A + A^T P = -Q with A lower triangular:
//   (a_ii + a_jj) P_ij = -Q_ij - sum_{k>j} P_ik a_kj - sum_{k>i} a_ki P_kj,
// which only needs entries with a larger row or column index.
Matrix lyapunov_lower_triangular(const Matrix& a, const Matrix& q) {
  const auto n = a.rows();
  Matrix p = Matrix::Zero(n, n);
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    for (Eigen::Index j = n - 1; j >= 0; --j) {
      double s = -q(i, j);
      for (Eigen::Index k = j + 1; k < n; ++k) s -= p(i, k) * a(k, j);
      for (Eigen::Index k = i + 1; k < n; ++k) s -= a(k, i) * p(k, j);
      p(i, j) = s / (a(i, i) + a(j, j));
    }
  }
  return p;
}

InequalityCheck make_check(std::string family, int index, double value, bool negative) {
  const bool pass = negative ? value < -kCertificateMargin : value > kCertificateMargin;
  return InequalityCheck{std::move(family), index, value, negative, pass};
}

}  // namespace

Matrix build_fast_matrix(int n) {
  if (n < 1) throw ConfigError("fast matrix needs n >= 1");
  Matrix a = Matrix::Zero(n, n);
  a.diagonal().setConstant(-1.0);
  for (int i = 1; i < n; ++i) a(i, i - 1) = 1.0;
  return a;
}

DelayMatrices build_delay_matrices(int n) {
  if (n < 2) throw ConfigError("delay matrices need n >= 2");
  DelayMatrices d{-Matrix::Identity(n, n), Matrix::Zero(n, n)};
  d.a1.bottomLeftCorner(n - 1, n - 1).setIdentity();
  if ((d.a0 + d.a1 - build_fast_matrix(n)).cwiseAbs().maxCoeff() != 0.0) {
    throw AnalysisError("A0 + A1 does not reduce to the fast matrix");
  }
  return d;
}

Matrix solve_lyapunov(const Matrix& a, const Matrix& q) {
  const auto n = a.rows();
  if (a.cols() != n || q.rows() != n || q.cols() != n || n == 0) {
    throw ConfigError("solve_lyapunov: A and Q must be square and the same size");
  }
  if (max_abs(q - q.transpose()) > 1e-12 * std::max(1.0, max_abs(q))) {
    throw ConfigError("solve_lyapunov: Q is not symmetric");
  }
  if (Eigen::LLT<Matrix>(q).info() != Eigen::Success) {
    throw ConfigError("solve_lyapunov: Q is not positive definite");
  }

  // Hurwitz check: read the spectrum off the diagonal when A is triangular.
  Eigen::VectorXcd spectrum;
  if (is_lower_triangular(a) || is_upper_triangular(a)) {
    spectrum = a.diagonal().cast<std::complex<double>>();
  } else {
    spectrum = Eigen::EigenSolver<Matrix>(a, false).eigenvalues();
  }
  for (Eigen::Index i = 0; i < spectrum.size(); ++i) {
    if (spectrum(i).real() >= 0.0) {
      std::ostringstream os;
      os << "solve_lyapunov: A is not Hurwitz, eigenvalue " << spectrum(i).real();
      if (spectrum(i).imag() != 0.0) os << (spectrum(i).imag() > 0 ? "+" : "") << spectrum(i).imag() << "i";
      throw AnalysisError(os.str());
    }
  }

  const Matrix at = a.transpose();
  Matrix p;
  if (is_lower_triangular(a)) {
    p = lyapunov_lower_triangular(a, q);
  } else if (is_upper_triangular(a)) {
    // Reversing the index order makes A lower triangular.
    const Matrix ra = a.reverse();
    p = lyapunov_lower_triangular(ra, q.reverse()).reverse();
  } else {
    // vec(P A) + vec(A^T P) = (A^T (x) I + I (x) A^T) vec(P), column-major vec.
    const auto nn = n * n;
    Matrix kron = Matrix::Zero(nn, nn);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        kron.block(i * n, j * n, n, n).diagonal().array() += at(i, j);
        if (i == j) kron.block(i * n, j * n, n, n) += at;
      }
    }
    const Vector rhs = -Eigen::Map<const Vector>(q.data(), nn);
    const Vector vec_p = Eigen::PartialPivLU<Matrix>(kron).solve(rhs);
    p = Eigen::Map<const Matrix>(vec_p.data(), n, n);
  }
  p = (0.5 * (p + p.transpose())).eval();

  const double residual = max_abs(p * a + at * p + q);
  if (!(residual <= 1e-10 * max_abs(q))) {
    std::ostringstream os;
    os << "solve_lyapunov: residual " << residual << " exceeds tolerance";
    throw AnalysisError(os.str());
  }
  if (Eigen::LLT<Matrix>(p).info() != Eigen::Success) {
    throw AnalysisError("solve_lyapunov: solution is not positive definite");
  }
  return p;
}

bool is_negative_definite(const Matrix& m) {
  if (m.rows() != m.cols()) throw AnalysisError("is_negative_definite: matrix is not square");
  const double scale = std::max(1.0, max_abs(m));
  if (max_abs(m - m.transpose()) > 1e-12 * scale) {
    throw AnalysisError("is_negative_definite: matrix is not symmetric");
  }
  const Matrix neg = -0.5 * (m + m.transpose());
  return Eigen::LLT<Matrix>(neg).info() == Eigen::Success;
}

double min_eigenvalue(const Matrix& m) {
  const Matrix sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw AnalysisError("symmetric eigensolver failed");
  return es.eigenvalues().minCoeff();
}

Matrix build_q1_tilde(const Vector& p, const Vector& q) {
  const auto n = p.size();
  if (q.size() != n) throw ConfigError("p and q must have the same length");
  if (n < 2) throw ConfigError("Q1_tilde needs n >= 2");
  require_positive(p, "p");
  require_positive(q, "q");

  const auto d = build_delay_matrices(static_cast<int>(n));
  const Matrix p1 = p.asDiagonal();
  const Matrix q1 = q.asDiagonal();
  Matrix out(2 * n, 2 * n);
  out.topLeftCorner(n, n) = p1 * d.a0 + d.a0.transpose() * p1 + q1;
  out.topRightCorner(n, n) = p1 * d.a1;
  out.bottomLeftCorner(n, n) = d.a1.transpose() * p1;
  out.bottomRightCorner(n, n) = -q1;
  return out;
}

SchurReport schur_complement_report(const Vector& p, const Vector& q) {
  const auto n = p.size();
  if (q.size() != n || n < 2) throw ConfigError("p and q must have equal length >= 2");
  for (Eigen::Index i = 0; i < n; ++i) {
    const double denom = 2.0 * p(i) - q(i);
    if (!(denom > 0.0)) {
      std::ostringstream os;
      os << "Schur complement undefined: 2p_" << i + 1 << " - q_" << i + 1 << " = " << denom
         << " <= 0";
      throw ConfigError(os.str());
    }
  }
  SchurReport r;
  r.diagonal.resize(n);
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    r.diagonal(i) = -q(i) + p(i + 1) * p(i + 1) / (2.0 * p(i + 1) - q(i + 1));
    r.checks.push_back(make_check("schur_chain", static_cast<int>(i + 1), r.diagonal(i), true));
  }
  r.diagonal(n - 1) = -q(n - 1);
  r.checks.push_back(make_check("schur_tail", static_cast<int>(n), r.diagonal(n - 1), true));
  // The top-left block diag(q - 2p) is negative by the precondition, so the
  // verdict rests on the complement alone.
  r.negative_definite = (r.diagonal.array() < 0.0).all();
  return r;
}

std::vector<InequalityCheck> evaluate_inequalities(const Vector& p, const Vector& q) {
  const auto n = p.size();
  if (q.size() != n || n < 2) throw ConfigError("p and q must have equal length >= 2");
  std::vector<InequalityCheck> checks;
  for (Eigen::Index i = 0; i < n; ++i) {
    checks.push_back(make_check("q_minus_2p", static_cast<int>(i + 1), q(i) - 2.0 * p(i), true));
  }
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    const double denom = 2.0 * p(i + 1) - q(i + 1);
    const double value = denom > 0.0 ? -q(i) + p(i + 1) * p(i + 1) / denom
                                     : std::numeric_limits<double>::infinity();
    checks.push_back(make_check("schur_chain", static_cast<int>(i + 1), value, true));
  }
  checks.push_back(make_check("schur_tail", static_cast<int>(n), -q(n - 1), true));
  for (Eigen::Index i = 0; i < n; ++i) {
    checks.push_back(make_check("p_positive", static_cast<int>(i + 1), p(i), false));
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    checks.push_back(make_check("q_positive", static_cast<int>(i + 1), q(i), false));
  }
  return checks;
}

bool StabilityCertificate::routes_agree() const {
  const bool scalar_ok = std::all_of(checks.begin(), checks.end(),
                                     [](const InequalityCheck& c) { return c.pass; });
  return scalar_ok == cholesky_ok;
}

StabilityCertificate certify(const Vector& p, const Vector& q) {
  StabilityCertificate c;
  c.n = static_cast<int>(p.size());
  c.p = p;
  c.q = q;
  c.q1_tilde = build_q1_tilde(p, q);
  c.checks = evaluate_inequalities(p, q);
  c.schur_diagonal = Vector::Zero(c.n);
  for (const auto& chk : c.checks) {
    if (chk.family == "schur_chain" || chk.family == "schur_tail") {
      c.schur_diagonal(chk.index - 1) = chk.value;
    }
  }
  c.cholesky_ok = is_negative_definite(c.q1_tilde);
  c.min_eig_neg_q1 = min_eigenvalue(-c.q1_tilde);
  c.lyapunov_p = solve_lyapunov(build_fast_matrix(c.n), Matrix::Identity(c.n, c.n));
  const bool scalar_ok = std::all_of(c.checks.begin(), c.checks.end(),
                                     [](const InequalityCheck& chk) { return chk.pass; });
  c.valid = scalar_ok && c.cholesky_ok && c.min_eig_neg_q1 > kCertificateMargin;
  return c;
}

StabilityCertificate constructive_pq(int n) {
  if (n < 2) throw ConfigError("certificate needs n >= 2");
  Vector p(n);
  for (int i = 0; i < n; ++i) p(i) = static_cast<double>(n - i);
  // q_n in (0, 2 p_n), then each q_i in (p_{i+1}^2 / (2 p_{i+1} - q_{i+1}), 2 p_i).
  // With q_{i+1} = p_{i+1} the lower bound is p_{i+1} < p_i, so q_i = p_i fits.
  Vector q(n);
  q(n - 1) = p(n - 1);
  for (int i = n - 2; i >= 0; --i) q(i) = p(i);
  return certify(p, q);
}

}  // namespace lfcons
