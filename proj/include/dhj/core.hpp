#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dhj {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Base class of every exception thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid construction argument or violated type invariant.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A user-supplied function returned a non-finite value.
class EvaluationError : public Error {
 public:
  EvaluationError(const std::string& what, Eigen::Index coordinate = -1)
      : Error(what), coordinate_(coordinate) {}
  /// Coordinate being perturbed when the failure occurred, -1 if unknown.
  Eigen::Index coordinate() const { return coordinate_; }

 private:
  Eigen::Index coordinate_;
};

/// Newton iteration ran out of iterations or stalled in the line search.
class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& what, Eigen::VectorXd last_iterate,
                      double residual_norm, int iterations)
      : Error(what + " (|r|_inf = " + std::to_string(residual_norm) + " after " +
              std::to_string(iterations) + " iterations)"),
        last_iterate_(std::move(last_iterate)),
        residual_norm_(residual_norm),
        iterations_(iterations) {}

  const Eigen::VectorXd& last_iterate() const { return last_iterate_; }
  double residual_norm() const { return residual_norm_; }
  int iterations() const { return iterations_; }

 private:
  Eigen::VectorXd last_iterate_;
  double residual_norm_;
  int iterations_;
};

/// Jacobian condition estimate exceeded 1e14 inside a Newton solve.
class SingularJacobianError : public Error {
 public:
  using Error::Error;
};

/// A matrix required to be invertible failed its condition check.
class SingularMatrixError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Solver configuration
// ---------------------------------------------------------------------------

/// Settings shared by every implicit solve and finite-difference evaluation.
template <typename Scalar = double>
struct NewtonConfig {
  /// Absolute tolerance on the residual infinity norm.
  Scalar abs_tol = Scalar(1e-12);
  /// Maximum number of Newton updates.
  int max_iter = 50;
  /// Relative step used by central differences: h_i = scale * max(1, |x_i|).
  Scalar fd_step_scale = std::cbrt(std::numeric_limits<Scalar>::epsilon());
};

template <typename Scalar>
void validate(const NewtonConfig<Scalar>& cfg) {
  if (!(cfg.abs_tol > Scalar(0))) throw InvalidArgument("NewtonConfig: abs_tol must be > 0");
  if (cfg.max_iter < 1) throw InvalidArgument("NewtonConfig: max_iter must be >= 1");
}

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

/// A state/costate pair (q, p) on Q (+) Q*.
template <typename Scalar = double>
struct PhasePoint {
  VectorX<Scalar> q;
  VectorX<Scalar> p;

  PhasePoint() = default;
  PhasePoint(VectorX<Scalar> q_in, VectorX<Scalar> p_in)
      : q(std::move(q_in)), p(std::move(p_in)) {
    if (q.size() != p.size())
      throw InvalidArgument("PhasePoint: q and p must have equal length");
    if (!q.allFinite() || !p.allFinite())
      throw InvalidArgument("PhasePoint: entries must be finite");
  }

  Eigen::Index dim() const { return q.size(); }

  /// Stacked coordinates (q, p) as a single 2n-vector.
  VectorX<Scalar> stacked() const {
    VectorX<Scalar> z(2 * q.size());
    z << q, p;
    return z;
  }

  static PhasePoint from_stacked(const VectorX<Scalar>& z) {
    const Eigen::Index n = z.size() / 2;
    if (2 * n != z.size()) throw InvalidArgument("PhasePoint: stacked vector must have even length");
    return PhasePoint(z.head(n), z.tail(n));
  }
};

using PhasePointd = PhasePoint<double>;

// ---------------------------------------------------------------------------
// Finite differences
// ---------------------------------------------------------------------------

/// Central-difference gradient of a scalar function of a vector.
template <typename Scalar, typename F>
VectorX<Scalar> fd_gradient(F&& f, const VectorX<Scalar>& x,
                            const NewtonConfig<Scalar>& cfg = {}) {
  VectorX<Scalar> g(x.size());
  VectorX<Scalar> xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    using std::abs;
    using std::max;
    const Scalar h = cfg.fd_step_scale * max(Scalar(1), abs(x(i)));
    const Scalar xi = xp(i);
    xp(i) = xi + h;
    const Scalar x_hi = xp(i);
    const Scalar fp = f(xp);
    xp(i) = xi - h;
    const Scalar x_lo = xp(i);
    const Scalar fm = f(xp);
    xp(i) = xi;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw EvaluationError("fd_gradient: non-finite function value at coordinate " +
                                std::to_string(i),
                            i);
    // Divide by the realized step; x_hi - x_lo is exact for nearby doubles.
    g(i) = (fp - fm) / (x_hi - x_lo);
  }
  return g;
}

/// Central-difference Jacobian of a vector-valued residual, column by column.
template <typename Scalar, typename F>
MatrixX<Scalar> fd_jacobian(F&& f, const VectorX<Scalar>& x,
                            const NewtonConfig<Scalar>& cfg = {}) {
  VectorX<Scalar> xp = x;
  MatrixX<Scalar> jac;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    using std::abs;
    using std::max;
    const Scalar h = cfg.fd_step_scale * max(Scalar(1), abs(x(j)));
    const Scalar xj = xp(j);
    xp(j) = xj + h;
    const Scalar x_hi = xp(j);
    VectorX<Scalar> fp = f(xp);
    xp(j) = xj - h;
    const Scalar x_lo = xp(j);
    VectorX<Scalar> fm = f(xp);
    xp(j) = xj;
    if (!fp.allFinite() || !fm.allFinite())
      throw EvaluationError("fd_jacobian: non-finite residual at coordinate " + std::to_string(j),
                            j);
    if (jac.size() == 0) jac.resize(fp.size(), x.size());
    jac.col(j) = (fp - fm) / (x_hi - x_lo);
  }
  return jac;
}

/// Two-norm condition estimate; returns +inf for singular input.
template <typename Derived>
typename Derived::Scalar condition_estimate(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  Eigen::JacobiSVD<MatrixX<Scalar>> svd(m.derived());
  const auto& sv = svd.singularValues();
  const Scalar inf = std::numeric_limits<Scalar>::infinity();
  if (sv.size() == 0) return inf;
  const Scalar smax = sv(0);
  const Scalar smin = sv(sv.size() - 1);
  if (smax == Scalar(0) || smin == Scalar(0)) return inf;
  return smax / smin;
}

// ---------------------------------------------------------------------------
// Newton solver
// ---------------------------------------------------------------------------

/// Optional per-solve diagnostics filled in by newton_solve.
template <typename Scalar = double>
struct NewtonStats {
  int iterations = 0;
  Scalar residual_norm = std::numeric_limits<Scalar>::quiet_NaN();
  /// Every iterate including the initial guess.
  std::vector<VectorX<Scalar>> iterates;
};

/// Damped Newton iteration on a vector residual.
///
/// The step is accepted only when the residual infinity norm strictly
/// decreases; otherwise it is halved, up to 30 times. The Jacobian comes from
/// the analytic callback when given, otherwise from central differences.
template <typename Scalar>
VectorX<Scalar> newton_solve(
    const std::function<VectorX<Scalar>(const VectorX<Scalar>&)>& residual,
    VectorX<Scalar> x, const NewtonConfig<Scalar>& cfg = {},
    const std::function<MatrixX<Scalar>(const VectorX<Scalar>&)>& jacobian = {},
    NewtonStats<Scalar>* stats = nullptr) {
  validate(cfg);
  constexpr int kMaxHalvings = 30;
  const Scalar kSingularCondition = Scalar(1e14);

  auto record = [&](const VectorX<Scalar>& v) {
    if (stats) stats->iterates.push_back(v);
  };

  VectorX<Scalar> r = residual(x);
  if (!r.allFinite()) throw EvaluationError("newton_solve: non-finite residual at initial guess");
  Scalar rnorm = r.template lpNorm<Eigen::Infinity>();
  record(x);

  for (int iter = 0; iter < cfg.max_iter; ++iter) {
    if (rnorm <= cfg.abs_tol) {
      if (stats) {
        stats->iterations = iter;
        stats->residual_norm = rnorm;
      }
      return x;
    }

    MatrixX<Scalar> jac = jacobian ? jacobian(x) : fd_jacobian<Scalar>(residual, x, cfg);
    const Eigen::PartialPivLU<MatrixX<Scalar>> lu(jac);
    // Pivot-ratio condition estimate from the factorization already needed
    // for the step.
    {
      const auto pivots = lu.matrixLU().diagonal().cwiseAbs();
      const Scalar pmax = pivots.maxCoeff();
      const Scalar pmin = pivots.minCoeff();
      if (pmax == Scalar(0) || pmin < pmax / kSingularCondition)
        throw SingularJacobianError(
            "newton_solve: singular Jacobian (condition estimate > 1e14)");
    }
    const VectorX<Scalar> step = lu.solve(-r);

    Scalar alpha = Scalar(1);
    bool accepted = false;
    VectorX<Scalar> x_next, r_next;
    Scalar rnorm_next = rnorm;
    for (int halving = 0; halving <= kMaxHalvings; ++halving) {
      x_next = x + alpha * step;
      r_next = residual(x_next);
      if (r_next.allFinite()) {
        rnorm_next = r_next.template lpNorm<Eigen::Infinity>();
        if (rnorm_next < rnorm) {
          accepted = true;
          break;
        }
      }
      alpha /= Scalar(2);
    }
    if (!accepted)
      throw NonConvergenceError("newton_solve: residual norm stalled",
                                x.template cast<double>(), double(rnorm), iter);

    x = std::move(x_next);
    r = std::move(r_next);
    rnorm = rnorm_next;
    record(x);
  }

  if (rnorm <= cfg.abs_tol) {
    if (stats) {
      stats->iterations = cfg.max_iter;
      stats->residual_norm = rnorm;
    }
    return x;
  }
  throw NonConvergenceError("newton_solve: max_iter exceeded", x.template cast<double>(),
                            double(rnorm), cfg.max_iter);
}

// ---------------------------------------------------------------------------
// Discrete Hamiltonians and Lagrangians
// ---------------------------------------------------------------------------

/// Right discrete Hamiltonian H+(q_k, p_{k+1}) with optional analytic partials.
template <typename Scalar = double>
struct DiscreteHamiltonianRight {
  using Value = std::function<Scalar(const VectorX<Scalar>&, const VectorX<Scalar>&)>;
  using Partial = std::function<VectorX<Scalar>(const VectorX<Scalar>&, const VectorX<Scalar>&)>;

  Value value;
  Partial d1{};  ///< partial in q
  Partial d2{};  ///< partial in p_next

  VectorX<Scalar> d1_at(const VectorX<Scalar>& q, const VectorX<Scalar>& p_next,
                        const NewtonConfig<Scalar>& cfg = {}) const {
    if (d1) return d1(q, p_next);
    return fd_gradient<Scalar>([&](const VectorX<Scalar>& v) { return value(v, p_next); }, q, cfg);
  }
  VectorX<Scalar> d2_at(const VectorX<Scalar>& q, const VectorX<Scalar>& p_next,
                        const NewtonConfig<Scalar>& cfg = {}) const {
    if (d2) return d2(q, p_next);
    return fd_gradient<Scalar>([&](const VectorX<Scalar>& v) { return value(q, v); }, p_next, cfg);
  }
};

/// Left discrete Hamiltonian H-(p_k, q_{k+1}) with optional analytic partials.
template <typename Scalar = double>
struct DiscreteHamiltonianLeft {
  using Value = std::function<Scalar(const VectorX<Scalar>&, const VectorX<Scalar>&)>;
  using Partial = std::function<VectorX<Scalar>(const VectorX<Scalar>&, const VectorX<Scalar>&)>;

  Value value;
  Partial d1{};  ///< partial in p
  Partial d2{};  ///< partial in q_next

  VectorX<Scalar> d1_at(const VectorX<Scalar>& p, const VectorX<Scalar>& q_next,
                        const NewtonConfig<Scalar>& cfg = {}) const {
    if (d1) return d1(p, q_next);
    return fd_gradient<Scalar>([&](const VectorX<Scalar>& v) { return value(v, q_next); }, p, cfg);
  }
  VectorX<Scalar> d2_at(const VectorX<Scalar>& p, const VectorX<Scalar>& q_next,
                        const NewtonConfig<Scalar>& cfg = {}) const {
    if (d2) return d2(p, q_next);
    return fd_gradient<Scalar>([&](const VectorX<Scalar>& v) { return value(p, v); }, q_next, cfg);
  }
};

/// Discrete Lagrangian L(q_k, q_{k+1}) with optional analytic partials.
template <typename Scalar = double>
struct DiscreteLagrangian {
  using Value = std::function<Scalar(const VectorX<Scalar>&, const VectorX<Scalar>&)>;
  using Partial = std::function<VectorX<Scalar>(const VectorX<Scalar>&, const VectorX<Scalar>&)>;

  Value value;
  Partial d1{};
  Partial d2{};

  VectorX<Scalar> d1_at(const VectorX<Scalar>& q, const VectorX<Scalar>& q_next,
                        const NewtonConfig<Scalar>& cfg = {}) const {
    if (d1) return d1(q, q_next);
    return fd_gradient<Scalar>([&](const VectorX<Scalar>& v) { return value(v, q_next); }, q, cfg);
  }
  VectorX<Scalar> d2_at(const VectorX<Scalar>& q, const VectorX<Scalar>& q_next,
                        const NewtonConfig<Scalar>& cfg = {}) const {
    if (d2) return d2(q, q_next);
    return fd_gradient<Scalar>([&](const VectorX<Scalar>& v) { return value(q, v); }, q_next, cfg);
  }
};

/// One generating function S_d^k with an optional analytic gradient.
template <typename Scalar = double>
struct GeneratingFunction {
  std::function<Scalar(const VectorX<Scalar>&)> value;
  std::function<VectorX<Scalar>(const VectorX<Scalar>&)> gradient{};

  VectorX<Scalar> gradient_at(const VectorX<Scalar>& q, const NewtonConfig<Scalar>& cfg = {}) const {
    if (gradient) return gradient(q);
    return fd_gradient<Scalar>(value, q, cfg);
  }
};

/// Contiguously indexed generating functions S_d^k, k = 0..N.
template <typename Scalar = double>
struct GeneratingFunctionSequence {
  std::vector<GeneratingFunction<Scalar>> entries;

  int max_index() const { return int(entries.size()) - 1; }

  const GeneratingFunction<Scalar>& at(int k) const {
    if (k < 0 || k >= int(entries.size()))
      throw InvalidArgument("GeneratingFunctionSequence: index " + std::to_string(k) +
                            " out of range");
    return entries[size_t(k)];
  }

  Scalar value(int k, const VectorX<Scalar>& q) const { return at(k).value(q); }
  VectorX<Scalar> gradient(int k, const VectorX<Scalar>& q,
                           const NewtonConfig<Scalar>& cfg = {}) const {
    return at(k).gradient_at(q, cfg);
  }
};

// ---------------------------------------------------------------------------
// Invariant helpers
// ---------------------------------------------------------------------------

/// Relative deviation between an analytic partial and its central-difference
/// check: |analytic - fd|_inf / (1 + |analytic|_inf).
template <typename Scalar>
Scalar partial_deviation(const VectorX<Scalar>& analytic, const VectorX<Scalar>& fd) {
  const Scalar a = analytic.template lpNorm<Eigen::Infinity>();
  return (analytic - fd).template lpNorm<Eigen::Infinity>() / (Scalar(1) + a);
}

}  // namespace dhj
