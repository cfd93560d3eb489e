#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dhj/core.hpp"
#include "dhj/dmech.hpp"

namespace dhj {

/// Riccati recurrence hit a near-singular pivot matrix.
class RiccatiBreakdownError : public Error {
 public:
  using Error::Error;
};

/// Lagrangian affine space failed the transversality condition to {0} (+) Q*.
class TransversalityError : public Error {
 public:
  using Error::Error;
};

/// A basis lost rank under propagation.
class DegeneracyError : public Error {
 public:
  using Error::Error;
};

/// Canonical symplectic matrix [[0, I], [-I, 0]] on Q (+) Q*.
template <typename Scalar>
MatrixX<Scalar> symplectic_form_matrix(Eigen::Index n) {
  MatrixX<Scalar> omega = MatrixX<Scalar>::Zero(2 * n, 2 * n);
  omega.topRightCorner(n, n) = MatrixX<Scalar>::Identity(n, n);
  omega.bottomLeftCorner(n, n) = -MatrixX<Scalar>::Identity(n, n);
  return omega;
}

namespace detail {

constexpr double kConditionLimit = 1e12;

template <typename Scalar>
MatrixX<Scalar> solve_with_check(const MatrixX<Scalar>& a, const MatrixX<Scalar>& rhs,
                                 const char* name) {
  if (condition_estimate(a) > Scalar(kConditionLimit))
    throw SingularMatrixError(std::string("singular matrix: ") + name);
  return a.partialPivLu().solve(rhs);
}

}  // namespace detail

/// Quadratic left discrete Hamiltonian
/// H-(p, q') = 1/2 p^T M^{-1} p + p^T L q' + 1/2 q'^T K q'.
template <typename Scalar = double>
struct QuadraticLeftHamiltonian {
  MatrixX<Scalar> M;  ///< symmetric, invertible; its inverse weights the p-quadratic
  MatrixX<Scalar> K;  ///< symmetric
  MatrixX<Scalar> L;  ///< invertible coupling block

  QuadraticLeftHamiltonian(MatrixX<Scalar> m, MatrixX<Scalar> l, MatrixX<Scalar> k)
      : M(std::move(m)), K(std::move(k)), L(std::move(l)) {
    const Eigen::Index n = M.rows();
    if (M.cols() != n || L.rows() != n || L.cols() != n || K.rows() != n || K.cols() != n)
      throw InvalidArgument("QuadraticLeftHamiltonian: M, L, K must be square of equal size");
    const Scalar scale_m = Scalar(1) + M.template lpNorm<Eigen::Infinity>();
    const Scalar scale_k = Scalar(1) + K.template lpNorm<Eigen::Infinity>();
    if ((M - M.transpose()).template lpNorm<Eigen::Infinity>() > Scalar(1e-12) * scale_m)
      throw InvalidArgument("QuadraticLeftHamiltonian: M must be symmetric");
    if ((K - K.transpose()).template lpNorm<Eigen::Infinity>() > Scalar(1e-12) * scale_k)
      throw InvalidArgument("QuadraticLeftHamiltonian: K must be symmetric");
    if (condition_estimate(M) > Scalar(detail::kConditionLimit))
      throw SingularMatrixError("QuadraticLeftHamiltonian: M block is singular");
    if (condition_estimate(L) > Scalar(detail::kConditionLimit))
      throw SingularMatrixError("QuadraticLeftHamiltonian: L block is singular");
  }

  Eigen::Index dim() const { return M.rows(); }

  Scalar value(const VectorX<Scalar>& p, const VectorX<Scalar>& q_next) const {
    const VectorX<Scalar> minv_p = M.partialPivLu().solve(p);
    return Scalar(0.5) * p.dot(minv_p) + p.dot(L * q_next) +
           Scalar(0.5) * q_next.dot(K * q_next);
  }
};

/// View of a quadratic system as a general left discrete Hamiltonian with
/// analytic partials D1 = M^{-1} p + L q', D2 = L^T p + K q'.
template <typename Scalar>
DiscreteHamiltonianLeft<Scalar> left_hamiltonian(const QuadraticLeftHamiltonian<Scalar>& sys) {
  DiscreteHamiltonianLeft<Scalar> ham;
  ham.value = [sys](const VectorX<Scalar>& p, const VectorX<Scalar>& q_next) {
    return sys.value(p, q_next);
  };
  ham.d1 = [sys](const VectorX<Scalar>& p, const VectorX<Scalar>& q_next) {
    return (sys.M.partialPivLu().solve(p) + sys.L * q_next).eval();
  };
  ham.d2 = [sys](const VectorX<Scalar>& p, const VectorX<Scalar>& q_next) {
    return (sys.L.transpose() * p + sys.K * q_next).eval();
  };
  return ham;
}

/// Discrete Lagrangian of a quadratic system,
/// L(q, q') = 1/2 (q + L q')^T M (q + L q') - 1/2 q'^T K q'.
template <typename Scalar>
DiscreteLagrangian<Scalar> lagrangian(const QuadraticLeftHamiltonian<Scalar>& sys) {
  DiscreteLagrangian<Scalar> lag;
  lag.value = [sys](const VectorX<Scalar>& q, const VectorX<Scalar>& q_next) {
    const VectorX<Scalar> s = q + sys.L * q_next;
    return Scalar(0.5) * s.dot(sys.M * s) - Scalar(0.5) * q_next.dot(sys.K * q_next);
  };
  lag.d1 = [sys](const VectorX<Scalar>& q, const VectorX<Scalar>& q_next) {
    return (sys.M * (q + sys.L * q_next)).eval();
  };
  lag.d2 = [sys](const VectorX<Scalar>& q, const VectorX<Scalar>& q_next) {
    return (sys.L.transpose() * (sys.M * (q + sys.L * q_next)) - sys.K * q_next).eval();
  };
  return lag;
}

/// Right discrete Hamiltonian of a quadratic system via the pointwise
/// Legendre transform; requires G = L^T M L - K invertible.
template <typename Scalar>
DiscreteHamiltonianRight<Scalar> right_hamiltonian(const QuadraticLeftHamiltonian<Scalar>& sys) {
  const MatrixX<Scalar> g = sys.L.transpose() * sys.M * sys.L - sys.K;
  if (condition_estimate(g) > Scalar(detail::kConditionLimit))
    throw SingularMatrixError("right_hamiltonian: L^T M L - K is singular");
  const Eigen::PartialPivLU<MatrixX<Scalar>> g_lu(g);
  const MatrixX<Scalar> ltm = sys.L.transpose() * sys.M;
  auto q_next_of = [g_lu, ltm](const VectorX<Scalar>& q, const VectorX<Scalar>& p_next) {
    return g_lu.solve(p_next - ltm * q).eval();
  };
  const auto lag = lagrangian(sys);
  DiscreteHamiltonianRight<Scalar> ham;
  ham.value = [lag, q_next_of](const VectorX<Scalar>& q, const VectorX<Scalar>& p_next) {
    const VectorX<Scalar> q_next = q_next_of(q, p_next);
    return p_next.dot(q_next) - lag.value(q, q_next);
  };
  ham.d1 = [sys, q_next_of](const VectorX<Scalar>& q, const VectorX<Scalar>& p_next) {
    return (-sys.M * (q + sys.L * q_next_of(q, p_next))).eval();
  };
  ham.d2 = [q_next_of](const VectorX<Scalar>& q, const VectorX<Scalar>& p_next) {
    return q_next_of(q, p_next);
  };
  return ham;
}

/// A quadratic generating function S(q) = 1/2 q^T A q + b^T q + c.
/// A is symmetrized on construction.
template <typename Scalar = double>
struct QuadraticGeneratingFunction {
  MatrixX<Scalar> A;
  VectorX<Scalar> b;
  Scalar c = Scalar(0);

  QuadraticGeneratingFunction() = default;
  QuadraticGeneratingFunction(MatrixX<Scalar> a, VectorX<Scalar> b_in, Scalar c_in)
      : A(std::move(a)), b(std::move(b_in)), c(c_in) {
    if (A.rows() != A.cols() || A.rows() != b.size())
      throw InvalidArgument("QuadraticGeneratingFunction: dimension mismatch");
    A = Scalar(0.5) * (A + A.transpose()).eval();
  }

  Eigen::Index dim() const { return b.size(); }

  Scalar value(const VectorX<Scalar>& q) const {
    return Scalar(0.5) * q.dot(A * q) + b.dot(q) + c;
  }
  VectorX<Scalar> gradient(const VectorX<Scalar>& q) const { return A * q + b; }

  GeneratingFunction<Scalar> to_function() const {
    QuadraticGeneratingFunction copy = *this;
    GeneratingFunction<Scalar> fn;
    fn.value = [copy](const VectorX<Scalar>& q) { return copy.value(q); };
    fn.gradient = [copy](const VectorX<Scalar>& q) { return copy.gradient(q); };
    return fn;
  }
};

using QuadraticGeneratingFunctiond = QuadraticGeneratingFunction<double>;

/// A sequence of quadratic generating functions as S_d^k entries.
template <typename Scalar>
GeneratingFunctionSequence<Scalar> to_sequence(
    const std::vector<QuadraticGeneratingFunction<Scalar>>& fns) {
  GeneratingFunctionSequence<Scalar> seq;
  seq.entries.reserve(fns.size());
  for (const auto& f : fns) seq.entries.push_back(f.to_function());
  return seq;
}

/// The 2n x 2n matrix of one step of a discrete linear Hamiltonian system.
template <typename Scalar = double>
struct LinearHamiltonianMap {
  MatrixX<Scalar> matrix;

  explicit LinearHamiltonianMap(MatrixX<Scalar> m) : matrix(std::move(m)) {
    const Eigen::Index n2 = matrix.rows();
    if (matrix.cols() != n2 || n2 % 2 != 0)
      throw InvalidArgument("LinearHamiltonianMap: matrix must be square of even size");
    if (symplectic_defect() > Scalar(1e-10))
      throw InvalidArgument("LinearHamiltonianMap: matrix is not symplectic");
  }

  Eigen::Index dim() const { return matrix.rows() / 2; }

  /// |A^T JJ A - JJ|_inf.
  Scalar symplectic_defect() const {
    const MatrixX<Scalar> omega = symplectic_form_matrix<Scalar>(dim());
    return (matrix.transpose() * omega * matrix - omega).template lpNorm<Eigen::Infinity>();
  }

  PhasePoint<Scalar> apply(const PhasePoint<Scalar>& z) const {
    return PhasePoint<Scalar>::from_stacked((matrix * z.stacked()).eval());
  }
};

using LinearHamiltonianMapd = LinearHamiltonianMap<double>;

/// Block step matrix [[-L^{-1}, -L^{-1}M^{-1}], [KL^{-1}, KL^{-1}M^{-1} - L^T]]
/// of the left discrete Hamilton's equations for a quadratic Hamiltonian.
template <typename Scalar>
LinearHamiltonianMap<Scalar> step_matrix(const QuadraticLeftHamiltonian<Scalar>& sys) {
  const Eigen::Index n = sys.dim();
  const MatrixX<Scalar> eye = MatrixX<Scalar>::Identity(n, n);
  const MatrixX<Scalar> l_inv = detail::solve_with_check<Scalar>(sys.L, eye, "L");
  const MatrixX<Scalar> m_inv = detail::solve_with_check<Scalar>(sys.M, eye, "M");
  MatrixX<Scalar> a(2 * n, 2 * n);
  a.topLeftCorner(n, n) = -l_inv;
  a.topRightCorner(n, n) = -l_inv * m_inv;
  a.bottomLeftCorner(n, n) = sys.K * l_inv;
  a.bottomRightCorner(n, n) = sys.K * l_inv * m_inv - sys.L.transpose();
  return LinearHamiltonianMap<Scalar>(std::move(a));
}

/// One step of the Riccati recurrence for quadratic generating functions:
///   A' = L^T (I + A M^{-1})^{-1} A L - K
///   b' = -L^T (I + A M^{-1})^{-1} b
///   c' = c - 1/2 b^T (M + A)^{-1} b
template <typename Scalar>
QuadraticGeneratingFunction<Scalar> riccati_step(const QuadraticGeneratingFunction<Scalar>& s,
                                                 const QuadraticLeftHamiltonian<Scalar>& sys) {
  const Eigen::Index n = sys.dim();
  if (s.dim() != n) throw InvalidArgument("riccati_step: dimension mismatch");
  const MatrixX<Scalar> eye = MatrixX<Scalar>::Identity(n, n);
  const MatrixX<Scalar> m_inv = sys.M.partialPivLu().solve(eye);
  const MatrixX<Scalar> w = eye + s.A * m_inv;
  if (condition_estimate(w) > Scalar(detail::kConditionLimit))
    throw RiccatiBreakdownError("riccati_step: I + A M^{-1} is singular");
  const Eigen::PartialPivLU<MatrixX<Scalar>> w_lu(w);
  const MatrixX<Scalar> a_next = sys.L.transpose() * w_lu.solve(s.A * sys.L) - sys.K;
  const VectorX<Scalar> b_next = -sys.L.transpose() * w_lu.solve(s.b);
  const MatrixX<Scalar> ma = sys.M + s.A;
  if (condition_estimate(ma) > Scalar(detail::kConditionLimit))
    throw RiccatiBreakdownError("riccati_step: M + A is singular");
  const Scalar c_next = s.c - Scalar(0.5) * s.b.dot(ma.partialPivLu().solve(s.b));
  return QuadraticGeneratingFunction<Scalar>(a_next, b_next, c_next);
}

/// Riccati iterates S_0, ..., S_k; breakdown errors carry the step index.
template <typename Scalar>
std::vector<QuadraticGeneratingFunction<Scalar>> riccati_iterate(
    const QuadraticGeneratingFunction<Scalar>& s0, const QuadraticLeftHamiltonian<Scalar>& sys,
    int steps) {
  if (steps < 0) throw InvalidArgument("riccati_iterate: steps must be >= 0");
  std::vector<QuadraticGeneratingFunction<Scalar>> out;
  out.reserve(size_t(steps) + 1);
  out.push_back(s0);
  for (int k = 0; k < steps; ++k) {
    try {
      out.push_back(riccati_step(out.back(), sys));
    } catch (const RiccatiBreakdownError& e) {
      throw RiccatiBreakdownError("step " + std::to_string(k) + ": " + e.what());
    }
  }
  return out;
}

/// Fractional (linear-fractional) form of the Riccati recurrence:
/// A' = [K L^{-1} + (K L^{-1} M^{-1} - L^T) A] (-L^{-1} - L^{-1} M^{-1} A)^{-1}.
template <typename Scalar>
MatrixX<Scalar> riccati_fractional_step(const MatrixX<Scalar>& a,
                                        const QuadraticLeftHamiltonian<Scalar>& sys) {
  const Eigen::Index n = sys.dim();
  const MatrixX<Scalar> eye = MatrixX<Scalar>::Identity(n, n);
  const MatrixX<Scalar> l_inv = detail::solve_with_check<Scalar>(sys.L, eye, "L");
  const MatrixX<Scalar> m_inv = detail::solve_with_check<Scalar>(sys.M, eye, "M");
  const MatrixX<Scalar> numer = sys.K * l_inv + (sys.K * l_inv * m_inv - sys.L.transpose()) * a;
  const MatrixX<Scalar> denom = -l_inv - l_inv * m_inv * a;
  if (condition_estimate(denom) > Scalar(detail::kConditionLimit))
    throw RiccatiBreakdownError("riccati_fractional_step: singular denominator");
  // numer * denom^{-1} via the transposed solve.
  return denom.transpose().partialPivLu().solve(numer.transpose()).transpose();
}

/// Closed form of the map f-_k for a quadratic system and quadratic S:
/// f-(q) = -L^{-1} (I + M^{-1} A) q - L^{-1} M^{-1} b.
template <typename Scalar>
VectorX<Scalar> f_minus_linear(const QuadraticGeneratingFunction<Scalar>& s,
                               const QuadraticLeftHamiltonian<Scalar>& sys,
                               const VectorX<Scalar>& q) {
  const VectorX<Scalar> minv = sys.M.partialPivLu().solve((s.A * q + s.b).eval());
  if (condition_estimate(sys.L) > Scalar(detail::kConditionLimit))
    throw SingularMatrixError("f_minus_linear: L block is singular");
  return -sys.L.partialPivLu().solve((q + minv).eval());
}

/// Pairwise symplectic-pairing defect of the columns, plus one unit per lost
/// rank: a Lagrangian basis returns zero.
template <typename Scalar>
Scalar is_lagrangian(const MatrixX<Scalar>& basis) {
  const Eigen::Index n2 = basis.rows();
  if (n2 % 2 != 0 || basis.cols() != n2 / 2)
    throw InvalidArgument("is_lagrangian: basis must be 2n x n");
  const Eigen::Index n = n2 / 2;
  const MatrixX<Scalar> omega = symplectic_form_matrix<Scalar>(n);
  const MatrixX<Scalar> pairings = basis.transpose() * omega * basis;
  Scalar defect = pairings.template lpNorm<Eigen::Infinity>();
  Eigen::JacobiSVD<MatrixX<Scalar>> svd(basis);
  const auto& sv = svd.singularValues();
  const Scalar tol = Scalar(n2) * std::numeric_limits<Scalar>::epsilon() * sv(0);
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > tol) ++rank;
  defect += Scalar(n - rank);
  return defect;
}

/// A Lagrangian affine space z0 + span(basis) of Q (+) Q*.
template <typename Scalar = double>
struct LagrangianAffineSpace {
  VectorX<Scalar> base;     ///< z0, stacked (q, p)
  MatrixX<Scalar> basis;    ///< 2n x n, columns span the direction subspace

  LagrangianAffineSpace(VectorX<Scalar> z0, MatrixX<Scalar> basis_in)
      : base(std::move(z0)), basis(std::move(basis_in)) {
    const Eigen::Index n2 = base.size();
    if (n2 % 2 != 0) throw InvalidArgument("LagrangianAffineSpace: base must have even length");
    if (basis.rows() != n2 || basis.cols() != n2 / 2)
      throw InvalidArgument("LagrangianAffineSpace: basis must be 2n x n");
    const MatrixX<Scalar> omega = symplectic_form_matrix<Scalar>(n2 / 2);
    const MatrixX<Scalar> pairings = basis.transpose() * omega * basis;
    const Scalar scale = Scalar(1) + basis.squaredNorm();
    if (pairings.template lpNorm<Eigen::Infinity>() > Scalar(1e-10) * scale)
      throw InvalidArgument("LagrangianAffineSpace: columns are not pairwise isotropic");
    Eigen::JacobiSVD<MatrixX<Scalar>> svd(basis);
    const auto& sv = svd.singularValues();
    if (sv(sv.size() - 1) <= Scalar(1e-10) * sv(0))
      throw InvalidArgument("LagrangianAffineSpace: basis is rank deficient");
  }

  Eigen::Index dim() const { return base.size() / 2; }

  /// Graph of dS through (q0, dS(q0)) for a quadratic generating function.
  static LagrangianAffineSpace graph(const QuadraticGeneratingFunction<Scalar>& s,
                                     const VectorX<Scalar>& q0) {
    const Eigen::Index n = s.dim();
    MatrixX<Scalar> basis(2 * n, n);
    basis.topRows(n) = MatrixX<Scalar>::Identity(n, n);
    basis.bottomRows(n) = s.A;
    VectorX<Scalar> z0(2 * n);
    z0 << q0, s.gradient(q0);
    return LagrangianAffineSpace(std::move(z0), std::move(basis));
  }
};

using LagrangianAffineSpaced = LagrangianAffineSpace<double>;

/// Image of a Lagrangian affine space under a linear symplectic map, with the
/// direction basis re-orthonormalized.
template <typename Scalar>
LagrangianAffineSpace<Scalar> propagate_affine(const LagrangianAffineSpace<Scalar>& space,
                                               const LinearHamiltonianMap<Scalar>& map) {
  const VectorX<Scalar> base = map.matrix * space.base;
  const MatrixX<Scalar> image = map.matrix * space.basis;
  Eigen::JacobiSVD<MatrixX<Scalar>> svd(image);
  const auto& sv = svd.singularValues();
  if (sv(sv.size() - 1) <= Scalar(1e-12) * sv(0))
    throw DegeneracyError("propagate_affine: basis lost rank under the map");
  const Eigen::HouseholderQR<MatrixX<Scalar>> qr(image);
  MatrixX<Scalar> q = qr.householderQ() * MatrixX<Scalar>::Identity(image.rows(), image.cols());
  return LagrangianAffineSpace<Scalar>(base, std::move(q));
}

/// Quadratic generating function of a Lagrangian affine space transversal to
/// {0} (+) Q*: A = (p-block)(q-block)^{-1} symmetrized, b = p0 - A q0, c = 0.
template <typename Scalar>
QuadraticGeneratingFunction<Scalar> extract_generating(
    const LagrangianAffineSpace<Scalar>& space) {
  const Eigen::Index n = space.dim();
  const MatrixX<Scalar> q_block = space.basis.topRows(n);
  const MatrixX<Scalar> p_block = space.basis.bottomRows(n);
  if (condition_estimate(q_block) > Scalar(detail::kConditionLimit))
    throw TransversalityError("extract_generating: space is not transversal to {0} (+) Q*");
  // A = P Q^{-1}, computed as a transposed solve.
  MatrixX<Scalar> a = q_block.transpose().partialPivLu().solve(p_block.transpose()).transpose();
  a = Scalar(0.5) * (a + a.transpose()).eval();
  const VectorX<Scalar> q0 = space.base.head(n);
  const VectorX<Scalar> p0 = space.base.tail(n);
  return QuadraticGeneratingFunction<Scalar>(a, p0 - a * q0, Scalar(0));
}

}  // namespace dhj
