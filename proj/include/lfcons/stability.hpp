#pragma once

// Stability analysis for the fast (boundary-layer) subsystem and its
// delayed counterpart:
//
//   dy/dtau = A_f y                          (no delay)
//   dy/dtau = A_0 y(tau) + A_1 y(tau - r)    (fixed delay r)
//
// with the Lyapunov-Krasovskii functional
//   V = y^T P_1 y + int_{tau-r}^{tau} y^T Q_1 y
// whose derivative is the quadratic form of Q1_tilde. P_1 = diag(p) and
// Q_1 = diag(q) are found constructively.

#include <string>
#include <vector>

#include "lfcons/protocol.hpp"

namespace lfcons {

/// Strict inequalities are enforced with this absolute margin.
inline constexpr double kCertificateMargin = 1e-9;

/// Lower bidiagonal: -1 on the diagonal, +1 on the subdiagonal.
Matrix build_fast_matrix(int n);

struct DelayMatrices {
  Matrix a0;  ///< -I_n
  Matrix a1;  ///< I_{n-1} in the lower-left block
};

/// Throws AnalysisError if A_0 + A_1 != A_f (postcondition).
DelayMatrices build_delay_matrices(int n);

/// Solves P A + A^T P = -Q for symmetric positive definite P. The system is
/// vectorized through the Kronecker sum and solved densely; the residual
/// bound ||PA + A^T P + Q||_max <= 1e-10 ||Q||_max is checked before return.
Matrix solve_lyapunov(const Matrix& a, const Matrix& q);

/// Cholesky of -M. Throws AnalysisError if M is asymmetric beyond 1e-12
/// relative to its largest entry.
bool is_negative_definite(const Matrix& m);

/// Smallest eigenvalue of a symmetric matrix.
double min_eigenvalue(const Matrix& m);

/// [[P1 A0 + A0^T P1 + Q1, P1 A1], [A1^T P1, -Q1]].
Matrix build_q1_tilde(const Vector& p, const Vector& q);

struct InequalityCheck {
  std::string family;
  int index = 0;       ///< 1-based agent index the entry refers to
  double value = 0.0;  ///< evaluated left-hand side
  bool negative = true;  ///< true if the inequality is "value < 0", false for "value > 0"
  bool pass = false;
};

/// Diagonal Schur complement of Q1_tilde with respect to its top-left block:
///   S_i = -q_i + p_{i+1}^2 / (2 p_{i+1} - q_{i+1}),  i < n
///   S_n = -q_n
struct SchurReport {
  Vector diagonal;
  std::vector<InequalityCheck> checks;
  bool negative_definite = false;
};

/// Throws ConfigError when some 2 p_i - q_i <= 0 (the complement formula
/// does not apply there).
SchurReport schur_complement_report(const Vector& p, const Vector& q);

/// Evaluates all five inequality families for (p, q).
std::vector<InequalityCheck> evaluate_inequalities(const Vector& p, const Vector& q);

struct StabilityCertificate {
  int n = 0;
  Vector p;
  Vector q;
  Matrix q1_tilde;
  std::vector<InequalityCheck> checks;
  Vector schur_diagonal;
  /// Smallest eigenvalue of -Q1_tilde; positive iff Q1_tilde < 0.
  double min_eig_neg_q1 = 0.0;
  bool cholesky_ok = false;
  /// Lyapunov matrix for A_f with Q = I (undelayed fast subsystem).
  Matrix lyapunov_p;
  bool valid = false;

  /// True when the Schur route and the direct route give the same verdict.
  bool routes_agree() const;
};

/// Certificate from an explicit (p, q). Never throws for positive inputs;
/// infeasible choices produce valid = false.
StabilityCertificate certify(const Vector& p, const Vector& q);

/// Constructive choice: p_i = n - i + 1, then q_n = p_n, then backward
/// q_i = p_i. Each chain Schur entry is -(p_i - p_{i+1}) = -1.
StabilityCertificate constructive_pq(int n);

}  // namespace lfcons
