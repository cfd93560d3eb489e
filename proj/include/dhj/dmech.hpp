#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "dhj/core.hpp"

namespace dhj {

/// Ordered phase points (q_k, p_k), k = 0..N.
template <typename Scalar = double>
struct Trajectory {
  std::vector<PhasePoint<Scalar>> points;

  int steps() const { return int(points.size()) - 1; }
  Eigen::Index dim() const { return points.empty() ? 0 : points.front().dim(); }

  void validate() const {
    if (points.empty()) throw InvalidArgument("Trajectory: must contain at least one point");
    for (const auto& z : points)
      if (z.dim() != points.front().dim())
        throw InvalidArgument("Trajectory: all points must share one dimension");
  }
};

using Trajectoryd = Trajectory<double>;

namespace detail {

template <typename ErrorT>
[[noreturn]] void rethrow_with_context(const ErrorT& e, const std::string& context);

template <>
[[noreturn]] inline void rethrow_with_context(const NonConvergenceError& e,
                                              const std::string& context) {
  throw NonConvergenceError(context + ": " + e.what(), e.last_iterate(), e.residual_norm(),
                            e.iterations());
}

template <>
[[noreturn]] inline void rethrow_with_context(const SingularJacobianError& e,
                                              const std::string& context) {
  throw SingularJacobianError(context + ": " + e.what());
}

}  // namespace detail

/// One step of the right discrete Hamilton's equations: solves
/// p_k = D1 H+(q_k, p_{k+1}) for p_{k+1}, then q_{k+1} = D2 H+(q_k, p_{k+1}).
template <typename Scalar>
PhasePoint<Scalar> step_right(const DiscreteHamiltonianRight<Scalar>& ham,
                              const PhasePoint<Scalar>& z, const VectorX<Scalar>& guess,
                              const NewtonConfig<Scalar>& cfg = {}) {
  auto resid = [&](const VectorX<Scalar>& p_next) -> VectorX<Scalar> {
    return ham.d1_at(z.q, p_next, cfg) - z.p;
  };
  VectorX<Scalar> p_next;
  try {
    p_next = newton_solve<Scalar>(resid, guess, cfg);
  } catch (const NonConvergenceError& e) {
    detail::rethrow_with_context(e, "right step");
  } catch (const SingularJacobianError& e) {
    detail::rethrow_with_context(e, "right step");
  }
  return PhasePoint<Scalar>(ham.d2_at(z.q, p_next, cfg), p_next);
}

/// One step of the left discrete Hamilton's equations: solves
/// q_k = -D1 H-(p_k, q_{k+1}) for q_{k+1}, then p_{k+1} = -D2 H-(p_k, q_{k+1}).
template <typename Scalar>
PhasePoint<Scalar> step_left(const DiscreteHamiltonianLeft<Scalar>& ham,
                             const PhasePoint<Scalar>& z, const VectorX<Scalar>& guess,
                             const NewtonConfig<Scalar>& cfg = {}) {
  auto resid = [&](const VectorX<Scalar>& q_next) -> VectorX<Scalar> {
    return ham.d1_at(z.p, q_next, cfg) + z.q;
  };
  VectorX<Scalar> q_next;
  try {
    q_next = newton_solve<Scalar>(resid, guess, cfg);
  } catch (const NonConvergenceError& e) {
    detail::rethrow_with_context(e, "left step");
  } catch (const SingularJacobianError& e) {
    detail::rethrow_with_context(e, "left step");
  }
  return PhasePoint<Scalar>(q_next, -ham.d2_at(z.p, q_next, cfg));
}

/// Residuals of the two right discrete Hamilton's equations at a step pair.
template <typename Scalar>
Scalar right_step_residual(const DiscreteHamiltonianRight<Scalar>& ham, const PhasePoint<Scalar>& z,
                           const PhasePoint<Scalar>& z_next, const NewtonConfig<Scalar>& cfg = {}) {
  using std::max;
  const Scalar r1 =
      (z_next.q - ham.d2_at(z.q, z_next.p, cfg)).template lpNorm<Eigen::Infinity>();
  const Scalar r2 = (z.p - ham.d1_at(z.q, z_next.p, cfg)).template lpNorm<Eigen::Infinity>();
  return max(r1, r2);
}

/// Residuals of the two left discrete Hamilton's equations at a step pair.
template <typename Scalar>
Scalar left_step_residual(const DiscreteHamiltonianLeft<Scalar>& ham, const PhasePoint<Scalar>& z,
                          const PhasePoint<Scalar>& z_next, const NewtonConfig<Scalar>& cfg = {}) {
  using std::max;
  const Scalar r1 = (z.q + ham.d1_at(z.p, z_next.q, cfg)).template lpNorm<Eigen::Infinity>();
  const Scalar r2 =
      (z_next.p + ham.d2_at(z.p, z_next.q, cfg)).template lpNorm<Eigen::Infinity>();
  return max(r1, r2);
}

/// Right discrete Legendre transform: (q, q') -> (q', D2 L(q, q')).
template <typename Scalar>
PhasePoint<Scalar> legendre_right(const DiscreteLagrangian<Scalar>& lag, const VectorX<Scalar>& q,
                                  const VectorX<Scalar>& q_next,
                                  const NewtonConfig<Scalar>& cfg = {}) {
  VectorX<Scalar> p = lag.d2_at(q, q_next, cfg);
  if (!p.allFinite()) throw EvaluationError("legendre_right: non-finite derivative");
  return PhasePoint<Scalar>(q_next, std::move(p));
}

/// Left discrete Legendre transform: (q, q') -> (q, -D1 L(q, q')).
template <typename Scalar>
PhasePoint<Scalar> legendre_left(const DiscreteLagrangian<Scalar>& lag, const VectorX<Scalar>& q,
                                 const VectorX<Scalar>& q_next,
                                 const NewtonConfig<Scalar>& cfg = {}) {
  VectorX<Scalar> p = -lag.d1_at(q, q_next, cfg);
  if (!p.allFinite()) throw EvaluationError("legendre_left: non-finite derivative");
  return PhasePoint<Scalar>(q, std::move(p));
}

/// Discrete Euler-Lagrange residual D2 L(q_prev, q) + D1 L(q, q_next).
template <typename Scalar>
VectorX<Scalar> del_residual(const DiscreteLagrangian<Scalar>& lag, const VectorX<Scalar>& q_prev,
                             const VectorX<Scalar>& q, const VectorX<Scalar>& q_next,
                             const NewtonConfig<Scalar>& cfg = {}) {
  return lag.d2_at(q_prev, q, cfg) + lag.d1_at(q, q_next, cfg);
}

/// Partial action sums S_d^k = sum_{l<k} [p_{l+1}.q_{l+1} - H+(q_l, p_{l+1})],
/// k = 0..N, with S_d^0 = 0.
template <typename Scalar>
std::vector<Scalar> action_sum_right(const DiscreteHamiltonianRight<Scalar>& ham,
                                     const Trajectory<Scalar>& traj) {
  traj.validate();
  std::vector<Scalar> sums(traj.points.size());
  sums[0] = Scalar(0);
  for (size_t l = 0; l + 1 < traj.points.size(); ++l) {
    const auto& z = traj.points[l];
    const auto& z_next = traj.points[l + 1];
    sums[l + 1] = sums[l] + z_next.p.dot(z_next.q) - ham.value(z.q, z_next.p);
  }
  return sums;
}

/// Partial action sums written with the left discrete Hamiltonian:
/// S_d^k = sum_{l<k} [-p_l.q_l - H-(p_l, q_{l+1})].
template <typename Scalar>
std::vector<Scalar> action_sum_left(const DiscreteHamiltonianLeft<Scalar>& ham,
                                    const Trajectory<Scalar>& traj) {
  traj.validate();
  std::vector<Scalar> sums(traj.points.size());
  sums[0] = Scalar(0);
  for (size_t l = 0; l + 1 < traj.points.size(); ++l) {
    const auto& z = traj.points[l];
    const auto& z_next = traj.points[l + 1];
    sums[l + 1] = sums[l] - z.p.dot(z.q) - ham.value(z.p, z_next.q);
  }
  return sums;
}

/// Iterates the discrete Hamiltonian map N times, warm-starting each Newton
/// solve at the previous converged value.
template <typename Scalar>
Trajectory<Scalar> integrate(const DiscreteHamiltonianRight<Scalar>& ham,
                             const PhasePoint<Scalar>& z0, int steps,
                             const NewtonConfig<Scalar>& cfg = {}) {
  if (steps < 0) throw InvalidArgument("integrate: steps must be >= 0");
  Trajectory<Scalar> traj;
  traj.points.reserve(size_t(steps) + 1);
  traj.points.push_back(z0);
  for (int k = 0; k < steps; ++k) {
    const PhasePoint<Scalar>& z = traj.points.back();
    try {
      traj.points.push_back(step_right(ham, z, z.p, cfg));
    } catch (const NonConvergenceError& e) {
      detail::rethrow_with_context(e, "integrate: step " + std::to_string(k));
    } catch (const SingularJacobianError& e) {
      detail::rethrow_with_context(e, "integrate: step " + std::to_string(k));
    }
  }
  return traj;
}

template <typename Scalar>
Trajectory<Scalar> integrate(const DiscreteHamiltonianLeft<Scalar>& ham,
                             const PhasePoint<Scalar>& z0, int steps,
                             const NewtonConfig<Scalar>& cfg = {}) {
  if (steps < 0) throw InvalidArgument("integrate: steps must be >= 0");
  Trajectory<Scalar> traj;
  traj.points.reserve(size_t(steps) + 1);
  traj.points.push_back(z0);
  for (int k = 0; k < steps; ++k) {
    const PhasePoint<Scalar>& z = traj.points.back();
    try {
      traj.points.push_back(step_left(ham, z, z.q, cfg));
    } catch (const NonConvergenceError& e) {
      detail::rethrow_with_context(e, "integrate: step " + std::to_string(k));
    } catch (const SingularJacobianError& e) {
      detail::rethrow_with_context(e, "integrate: step " + std::to_string(k));
    }
  }
  return traj;
}

/// Deviation of the numerical Jacobian of a one-step map from the symplectic
/// matrix condition: |J_num^T JJ J_num - JJ|_inf, with JJ = [[0, I], [-I, 0]].
///
/// The Jacobian uses central differences with step 1e-6 * max(1, |z_i|).
template <typename Scalar>
Scalar symplecticity_defect(const std::function<PhasePoint<Scalar>(const PhasePoint<Scalar>&)>& map,
                            const PhasePoint<Scalar>& z) {
  const Eigen::Index n = z.dim();
  const Eigen::Index m = 2 * n;
  const VectorX<Scalar> z0 = z.stacked();

  MatrixX<Scalar> jac(m, m);
  VectorX<Scalar> zv = z0;
  for (Eigen::Index j = 0; j < m; ++j) {
    using std::abs;
    using std::max;
    // Power-of-two step near 1e-6 * scale keeps the difference quotient exact
    // for affine maps at representable points.
    const Scalar h = std::exp2(std::floor(std::log2(Scalar(1e-6) * max(Scalar(1), abs(z0(j))))));
    const Scalar zj = zv(j);
    zv(j) = zj + h;
    const Scalar z_hi = zv(j);
    VectorX<Scalar> fp = map(PhasePoint<Scalar>::from_stacked(zv)).stacked();
    zv(j) = zj - h;
    const Scalar z_lo = zv(j);
    VectorX<Scalar> fm = map(PhasePoint<Scalar>::from_stacked(zv)).stacked();
    zv(j) = zj;
    jac.col(j) = (fp - fm) / (z_hi - z_lo);
  }

  MatrixX<Scalar> omega = MatrixX<Scalar>::Zero(m, m);
  omega.topRightCorner(n, n) = MatrixX<Scalar>::Identity(n, n);
  omega.bottomLeftCorner(n, n) = -MatrixX<Scalar>::Identity(n, n);

  return (jac.transpose() * omega * jac - omega).template lpNorm<Eigen::Infinity>();
}

// ---------------------------------------------------------------------------
// Hamiltonians from a discrete Lagrangian
// ---------------------------------------------------------------------------

/// Right discrete Hamiltonian of a discrete Lagrangian by pointwise Legendre
/// transform: H+(q, p') = p'.q' - L(q, q') where D2 L(q, q') = p'.
///
/// Partials use the envelope structure of the transform:
/// D1 H+ = -D1 L(q, q'), D2 H+ = q'.
template <typename Scalar>
DiscreteHamiltonianRight<Scalar> right_hamiltonian_from_lagrangian(
    const DiscreteLagrangian<Scalar>& lag, const NewtonConfig<Scalar>& cfg = {}) {
  auto solve_q_next = [lag, cfg](const VectorX<Scalar>& q,
                                 const VectorX<Scalar>& p_next) -> VectorX<Scalar> {
    auto resid = [&](const VectorX<Scalar>& q_next) -> VectorX<Scalar> {
      return lag.d2_at(q, q_next, cfg) - p_next;
    };
    return newton_solve<Scalar>(resid, q, cfg);
  };
  DiscreteHamiltonianRight<Scalar> ham;
  ham.value = [lag, solve_q_next](const VectorX<Scalar>& q, const VectorX<Scalar>& p_next) {
    const VectorX<Scalar> q_next = solve_q_next(q, p_next);
    return p_next.dot(q_next) - lag.value(q, q_next);
  };
  ham.d1 = [lag, cfg, solve_q_next](const VectorX<Scalar>& q, const VectorX<Scalar>& p_next) {
    return (-lag.d1_at(q, solve_q_next(q, p_next), cfg)).eval();
  };
  ham.d2 = [solve_q_next](const VectorX<Scalar>& q, const VectorX<Scalar>& p_next) {
    return solve_q_next(q, p_next);
  };
  return ham;
}

/// Left discrete Hamiltonian of a discrete Lagrangian by pointwise Legendre
/// transform: H-(p, q') = -p.q - L(q, q') where -D1 L(q, q') = p, so that
/// D1 H- = -q and D2 H- = -D2 L(q, q').
template <typename Scalar>
DiscreteHamiltonianLeft<Scalar> left_hamiltonian_from_lagrangian(
    const DiscreteLagrangian<Scalar>& lag, const NewtonConfig<Scalar>& cfg = {}) {
  auto solve_q = [lag, cfg](const VectorX<Scalar>& p,
                            const VectorX<Scalar>& q_next) -> VectorX<Scalar> {
    auto resid = [&](const VectorX<Scalar>& q) -> VectorX<Scalar> {
      return lag.d1_at(q, q_next, cfg) + p;
    };
    return newton_solve<Scalar>(resid, q_next, cfg);
  };
  DiscreteHamiltonianLeft<Scalar> ham;
  ham.value = [lag, solve_q](const VectorX<Scalar>& p, const VectorX<Scalar>& q_next) {
    const VectorX<Scalar> q = solve_q(p, q_next);
    return -p.dot(q) - lag.value(q, q_next);
  };
  ham.d1 = [solve_q](const VectorX<Scalar>& p, const VectorX<Scalar>& q_next) {
    return (-solve_q(p, q_next)).eval();
  };
  ham.d2 = [lag, cfg, solve_q](const VectorX<Scalar>& p, const VectorX<Scalar>& q_next) {
    return (-lag.d2_at(solve_q(p, q_next), q_next, cfg)).eval();
  };
  return ham;
}

}  // namespace dhj
