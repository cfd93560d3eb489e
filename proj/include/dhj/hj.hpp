#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dhj/core.hpp"
#include "dhj/dmech.hpp"

namespace dhj {

/// Values S_d^k(q_k) and momenta DS_d^k(q_k) recorded along a trajectory.
template <typename Scalar = double>
struct HJSolutionTable {
  std::vector<VectorX<Scalar>> configurations;  ///< q_k
  std::vector<VectorX<Scalar>> momenta;         ///< p_k = DS_d^k(q_k)
  std::vector<Scalar> values;                   ///< S_d^k(q_k)

  int max_index() const { return int(values.size()) - 1; }

  void validate() const {
    if (values.empty() || configurations.size() != values.size() ||
        momenta.size() != values.size())
      throw InvalidArgument("HJSolutionTable: inconsistent lengths");
    for (size_t k = 0; k < values.size(); ++k)
      if (!std::isfinite(values[k]) || !configurations[k].allFinite() || !momenta[k].allFinite())
        throw InvalidArgument("HJSolutionTable: non-finite entry at index " + std::to_string(k));
  }
};

using HJSolutionTabled = HJSolutionTable<double>;

/// Residual of the right discrete Hamilton-Jacobi equation at (q, q_next):
/// S^{k+1}(q') - S^k(q) - DS^{k+1}(q').q' + H+(q, DS^{k+1}(q')).
template <typename Scalar>
Scalar rdhj_residual(const GeneratingFunctionSequence<Scalar>& s,
                     const DiscreteHamiltonianRight<Scalar>& ham, int k, const VectorX<Scalar>& q,
                     const VectorX<Scalar>& q_next, const NewtonConfig<Scalar>& cfg = {}) {
  const VectorX<Scalar> grad_next = s.gradient(k + 1, q_next, cfg);
  return s.value(k + 1, q_next) - s.value(k, q) - grad_next.dot(q_next) +
         ham.value(q, grad_next);
}

/// Right DHJ residual along a stored Jacobi table, using the recorded momenta
/// in place of DS^{k+1}(q_{k+1}).
template <typename Scalar>
Scalar rdhj_residual(const HJSolutionTable<Scalar>& table,
                     const DiscreteHamiltonianRight<Scalar>& ham, int k) {
  if (k < 0 || k + 1 > table.max_index())
    throw InvalidArgument("rdhj_residual: index out of range");
  const auto& q = table.configurations[size_t(k)];
  const auto& q_next = table.configurations[size_t(k) + 1];
  const auto& p_next = table.momenta[size_t(k) + 1];
  return table.values[size_t(k) + 1] - table.values[size_t(k)] - p_next.dot(q_next) +
         ham.value(q, p_next);
}

/// Residual of the left discrete Hamilton-Jacobi equation at (q, q_next):
/// S^{k+1}(q') - S^k(q) + DS^k(q).q + H-(DS^k(q), q').
template <typename Scalar>
Scalar ldhj_residual(const GeneratingFunctionSequence<Scalar>& s,
                     const DiscreteHamiltonianLeft<Scalar>& ham, int k, const VectorX<Scalar>& q,
                     const VectorX<Scalar>& q_next, const NewtonConfig<Scalar>& cfg = {}) {
  const VectorX<Scalar> grad = s.gradient(k, q, cfg);
  return s.value(k + 1, q_next) - s.value(k, q) + grad.dot(q) + ham.value(grad, q_next);
}

/// Left DHJ residual along a stored Jacobi table.
template <typename Scalar>
Scalar ldhj_residual(const HJSolutionTable<Scalar>& table,
                     const DiscreteHamiltonianLeft<Scalar>& ham, int k) {
  if (k < 0 || k + 1 > table.max_index())
    throw InvalidArgument("ldhj_residual: index out of range");
  const auto& q = table.configurations[size_t(k)];
  const auto& q_next = table.configurations[size_t(k) + 1];
  const auto& p = table.momenta[size_t(k)];
  return table.values[size_t(k) + 1] - table.values[size_t(k)] + p.dot(q) +
         ham.value(p, q_next);
}

/// Solves the fixed point q' = D2 H+(q, DS^{k+1}(q')) defining f+_k(q).
template <typename Scalar>
VectorX<Scalar> solve_f_plus(const GeneratingFunctionSequence<Scalar>& s,
                             const DiscreteHamiltonianRight<Scalar>& ham, int k,
                             const VectorX<Scalar>& q, const VectorX<Scalar>& guess,
                             const NewtonConfig<Scalar>& cfg = {}) {
  auto resid = [&](const VectorX<Scalar>& q_next) -> VectorX<Scalar> {
    return q_next - ham.d2_at(q, s.gradient(k + 1, q_next, cfg), cfg);
  };
  try {
    return newton_solve<Scalar>(resid, guess, cfg);
  } catch (const NonConvergenceError& e) {
    detail::rethrow_with_context(e, "solve_f_plus: index " + std::to_string(k));
  } catch (const SingularJacobianError& e) {
    detail::rethrow_with_context(e, "solve_f_plus: index " + std::to_string(k));
  }
}

/// Solves q = -D1 H-(DS^k(q), q') for q', defining f-_k(q).
template <typename Scalar>
VectorX<Scalar> solve_f_minus(const GeneratingFunctionSequence<Scalar>& s,
                              const DiscreteHamiltonianLeft<Scalar>& ham, int k,
                              const VectorX<Scalar>& q, const VectorX<Scalar>& guess,
                              const NewtonConfig<Scalar>& cfg = {}) {
  const VectorX<Scalar> grad = s.gradient(k, q, cfg);
  auto resid = [&](const VectorX<Scalar>& q_next) -> VectorX<Scalar> {
    return q + ham.d1_at(grad, q_next, cfg);
  };
  try {
    return newton_solve<Scalar>(resid, guess, cfg);
  } catch (const NonConvergenceError& e) {
    detail::rethrow_with_context(e, "solve_f_minus: index " + std::to_string(k));
  } catch (const SingularJacobianError& e) {
    detail::rethrow_with_context(e, "solve_f_minus: index " + std::to_string(k));
  }
}

/// Jacobi's solution: integrates the right discrete Hamilton's equations from
/// z0 and tabulates the action sums S_d^k along the trajectory together with
/// the momenta p_k. The stored table is checked against the one-step action
/// difference identity before it is returned.
template <typename Scalar>
HJSolutionTable<Scalar> jacobi_solution(const DiscreteHamiltonianRight<Scalar>& ham,
                                        const PhasePoint<Scalar>& z0, int steps,
                                        const NewtonConfig<Scalar>& cfg = {}) {
  const Trajectory<Scalar> traj = integrate(ham, z0, steps, cfg);
  const std::vector<Scalar> sums = action_sum_right(ham, traj);
  HJSolutionTable<Scalar> table;
  table.configurations.reserve(traj.points.size());
  table.momenta.reserve(traj.points.size());
  for (const auto& z : traj.points) {
    table.configurations.push_back(z.q);
    table.momenta.push_back(z.p);
  }
  table.values = sums;
  table.validate();
  for (int k = 0; k < steps; ++k) {
    const Scalar r = rdhj_residual(table, ham, k);
    using std::abs;
    if (abs(r) > Scalar(1e-9) * (Scalar(1) + abs(table.values[size_t(k) + 1])))
      throw Error("jacobi_solution: action-difference identity violated at step " +
                  std::to_string(k));
  }
  return table;
}

/// Generates the phase trajectory guaranteed by the discrete Hamilton-Jacobi
/// theorem: c_{k+1} = f+_k(c_k), p_k = DS^k(c_k).
template <typename Scalar>
Trajectory<Scalar> hj_generate_trajectory(const GeneratingFunctionSequence<Scalar>& s,
                                          const DiscreteHamiltonianRight<Scalar>& ham,
                                          const VectorX<Scalar>& c0, int steps,
                                          const NewtonConfig<Scalar>& cfg = {}) {
  if (steps < 0 || steps > s.max_index())
    throw InvalidArgument("hj_generate_trajectory: steps out of range of S entries");
  std::vector<VectorX<Scalar>> cs;
  cs.reserve(size_t(steps) + 1);
  cs.push_back(c0);
  for (int k = 0; k < steps; ++k) cs.push_back(solve_f_plus(s, ham, k, cs.back(), cs.back(), cfg));
  Trajectory<Scalar> traj;
  traj.points.reserve(cs.size());
  for (int k = 0; k <= steps; ++k)
    traj.points.emplace_back(cs[size_t(k)], s.gradient(k, cs[size_t(k)], cfg));
  return traj;
}

/// Left variant: c_{k+1} = f-_k(c_k), p_k = DS^k(c_k). Each step is accepted
/// only if the Jacobian Df-_k at c_k passes a condition estimate below 1e12.
template <typename Scalar>
Trajectory<Scalar> hj_generate_trajectory(const GeneratingFunctionSequence<Scalar>& s,
                                          const DiscreteHamiltonianLeft<Scalar>& ham,
                                          const VectorX<Scalar>& c0, int steps,
                                          const NewtonConfig<Scalar>& cfg = {}) {
  if (steps < 0 || steps > s.max_index())
    throw InvalidArgument("hj_generate_trajectory: steps out of range of S entries");
  std::vector<VectorX<Scalar>> cs;
  cs.reserve(size_t(steps) + 1);
  cs.push_back(c0);
  for (int k = 0; k < steps; ++k) {
    const VectorX<Scalar>& c = cs.back();
    const VectorX<Scalar> c_next = solve_f_minus(s, ham, k, c, c, cfg);
    // Finite-difference Jacobian of f-_k by re-solving at perturbed points.
    const Eigen::Index n = c.size();
    MatrixX<Scalar> jac(n, n);
    VectorX<Scalar> cp = c;
    for (Eigen::Index j = 0; j < n; ++j) {
      using std::abs;
      using std::max;
      const Scalar h = cfg.fd_step_scale * max(Scalar(1), abs(c(j)));
      const Scalar cj = cp(j);
      cp(j) = cj + h;
      const VectorX<Scalar> fp = solve_f_minus(s, ham, k, cp, c_next, cfg);
      cp(j) = cj - h;
      const VectorX<Scalar> fm = solve_f_minus(s, ham, k, cp, c_next, cfg);
      cp(j) = cj;
      jac.col(j) = (fp - fm) / (2 * h);
    }
    if (condition_estimate(jac) > Scalar(1e12))
      throw SingularJacobianError("hj_generate_trajectory: Df-_" + std::to_string(k) +
                                  " fails the invertibility check");
    cs.push_back(c_next);
  }
  Trajectory<Scalar> traj;
  traj.points.reserve(cs.size());
  for (int k = 0; k <= steps; ++k)
    traj.points.emplace_back(cs[size_t(k)], s.gradient(k, cs[size_t(k)], cfg));
  return traj;
}

/// Residual of the Lagrangian-side discrete Hamilton-Jacobi equation:
/// S^{k+1}(fL_k(q)) - S^k(q) - L(q, fL_k(q)), where fL_k(q) solves the left
/// Legendre match -D1 L(q, q') = DS^k(q).
template <typename Scalar>
Scalar lagrangian_dhj_residual(const DiscreteLagrangian<Scalar>& lag,
                               const GeneratingFunctionSequence<Scalar>& s, int k,
                               const VectorX<Scalar>& q, const NewtonConfig<Scalar>& cfg = {}) {
  const VectorX<Scalar> grad = s.gradient(k, q, cfg);
  auto resid = [&](const VectorX<Scalar>& q_next) -> VectorX<Scalar> {
    return lag.d1_at(q, q_next, cfg) + grad;
  };
  VectorX<Scalar> q_next;
  try {
    q_next = newton_solve<Scalar>(resid, q, cfg);
  } catch (const NonConvergenceError& e) {
    detail::rethrow_with_context(e, "lagrangian_dhj_residual: Legendre inversion at index " +
                                        std::to_string(k));
  } catch (const SingularJacobianError& e) {
    detail::rethrow_with_context(e, "lagrangian_dhj_residual: Legendre inversion at index " +
                                        std::to_string(k));
  }
  return s.value(k + 1, q_next) - s.value(k, q) - lag.value(q, q_next);
}

/// The map fL_k itself (identical to f-_k when both are defined).
template <typename Scalar>
VectorX<Scalar> solve_f_lagrangian(const DiscreteLagrangian<Scalar>& lag,
                                   const GeneratingFunctionSequence<Scalar>& s, int k,
                                   const VectorX<Scalar>& q, const VectorX<Scalar>& guess,
                                   const NewtonConfig<Scalar>& cfg = {}) {
  const VectorX<Scalar> grad = s.gradient(k, q, cfg);
  auto resid = [&](const VectorX<Scalar>& q_next) -> VectorX<Scalar> {
    return lag.d1_at(q, q_next, cfg) + grad;
  };
  return newton_solve<Scalar>(resid, guess, cfg);
}

}  // namespace dhj
