#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "dhj/core.hpp"
#include "dhj/docp.hpp"

namespace dhj {

/// Two quadrature orders disagreed beyond the requested precision.
class QuadratureError : public Error {
 public:
  using Error::Error;
};

namespace detail {

/// Gauss-Legendre nodes and weights on [0, 1].
template <typename Scalar>
std::pair<std::vector<Scalar>, std::vector<Scalar>> gauss_legendre_unit(int n) {
  std::vector<Scalar> nodes(static_cast<size_t>(n));
  std::vector<Scalar> weights(static_cast<size_t>(n));
  const Scalar pi = Scalar(3.14159265358979323846L);
  for (int i = 0; i < n; ++i) {
    // Root of P_n on [-1, 1] by Newton from the Chebyshev estimate.
    Scalar x = std::cos(pi * (Scalar(i) + Scalar(0.75)) / (Scalar(n) + Scalar(0.5)));
    Scalar dp = Scalar(0);
    for (int iter = 0; iter < 100; ++iter) {
      Scalar p0 = Scalar(1), p1 = x;
      for (int k = 2; k <= n; ++k) {
        const Scalar p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / Scalar(k);
        p0 = p1;
        p1 = p2;
      }
      dp = Scalar(n) * (x * p1 - p0) / (x * x - Scalar(1));
      const Scalar dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < Scalar(1e-15)) break;
    }
    nodes[size_t(i)] = (x + Scalar(1)) / Scalar(2);
    weights[size_t(i)] = Scalar(1) / ((Scalar(1) - x * x) * dp * dp);
  }
  return {nodes, weights};
}

template <typename Scalar, typename F>
Scalar gauss_quadrature(const F& f, Scalar a, Scalar b, int n) {
  const auto [nodes, weights] = gauss_legendre_unit<Scalar>(n);
  Scalar sum = Scalar(0);
  for (int i = 0; i < n; ++i)
    sum += weights[size_t(i)] * f(a + (b - a) * nodes[size_t(i)]);
  return (b - a) * sum;
}

}  // namespace detail

/// Basis functions, quadrature rule, and the derived coefficient matrices of a
/// Galerkin discrete control Hamiltonian:
///   A(i,j) = integral of psi_j over [0, c_i],
///   B(i)   = integral of psi_i over [0, 1],
///   M(i,j) = psi_j(c_i).
template <typename Scalar = double>
struct GalerkinTableau {
  int stages = 0;
  std::vector<std::function<Scalar(Scalar)>> basis;
  VectorX<Scalar> weights;  ///< quadrature weights b_i
  VectorX<Scalar> nodes;    ///< quadrature nodes c_i in [0, 1]
  MatrixX<Scalar> A;
  VectorX<Scalar> B;
  MatrixX<Scalar> M;

  void validate() const {
    if (stages < 1) throw InvalidArgument("GalerkinTableau: stage count must be >= 1");
    if (int(basis.size()) != stages || weights.size() != stages || nodes.size() != stages)
      throw InvalidArgument("GalerkinTableau: inconsistent stage count");
    if (A.rows() != stages || A.cols() != stages || B.size() != stages || M.rows() != stages ||
        M.cols() != stages)
      throw InvalidArgument("GalerkinTableau: derived coefficients have wrong shape");
    for (int i = 0; i < stages; ++i)
      if (nodes(i) < Scalar(0) || nodes(i) > Scalar(1))
        throw InvalidArgument("GalerkinTableau: nodes must lie in [0, 1]");
  }
};

using GalerkinTableaud = GalerkinTableau<double>;

/// Builds a tableau by Gauss-Legendre quadrature of the basis integrals.
/// 20- and 40-point evaluations must agree to 1e-10.
template <typename Scalar>
GalerkinTableau<Scalar> build_tableau(std::vector<std::function<Scalar(Scalar)>> basis,
                                      VectorX<Scalar> weights, VectorX<Scalar> nodes) {
  GalerkinTableau<Scalar> tab;
  tab.stages = int(basis.size());
  tab.basis = std::move(basis);
  tab.weights = std::move(weights);
  tab.nodes = std::move(nodes);
  const int s = tab.stages;
  tab.A.resize(s, s);
  tab.B.resize(s);
  tab.M.resize(s, s);
  auto integrate_checked = [&](const std::function<Scalar(Scalar)>& f, Scalar hi) {
    const Scalar coarse = detail::gauss_quadrature<Scalar>(f, Scalar(0), hi, 20);
    const Scalar fine = detail::gauss_quadrature<Scalar>(f, Scalar(0), hi, 40);
    if (std::abs(coarse - fine) > Scalar(1e-10))
      throw QuadratureError("build_tableau: 20- and 40-point quadrature disagree");
    return fine;
  };
  for (int i = 0; i < s; ++i) {
    tab.B(i) = integrate_checked(tab.basis[size_t(i)], Scalar(1));
    for (int j = 0; j < s; ++j) {
      tab.A(i, j) = integrate_checked(tab.basis[size_t(j)], tab.nodes(i));
      tab.M(i, j) = tab.basis[size_t(j)](tab.nodes(i));
    }
  }
  tab.validate();
  return tab;
}

/// Builds a tableau from analytic antiderivatives Psi_i with Psi_i(0) = 0.
template <typename Scalar>
GalerkinTableau<Scalar> build_tableau(std::vector<std::function<Scalar(Scalar)>> basis,
                                      VectorX<Scalar> weights, VectorX<Scalar> nodes,
                                      const std::vector<std::function<Scalar(Scalar)>>& integrals) {
  GalerkinTableau<Scalar> tab;
  tab.stages = int(basis.size());
  tab.basis = std::move(basis);
  tab.weights = std::move(weights);
  tab.nodes = std::move(nodes);
  const int s = tab.stages;
  if (int(integrals.size()) != s)
    throw InvalidArgument("build_tableau: one antiderivative per basis function required");
  tab.A.resize(s, s);
  tab.B.resize(s);
  tab.M.resize(s, s);
  for (int i = 0; i < s; ++i) {
    tab.B(i) = integrals[size_t(i)](Scalar(1));
    for (int j = 0; j < s; ++j) {
      tab.A(i, j) = integrals[size_t(j)](tab.nodes(i));
      tab.M(i, j) = tab.basis[size_t(j)](tab.nodes(i));
    }
  }
  tab.validate();
  return tab;
}

/// s = 1 tableau (psi = 1, b = 1, c = 0): the forward-Euler scheme.
template <typename Scalar = double>
GalerkinTableau<Scalar> euler_tableau() {
  GalerkinTableau<Scalar> tab;
  tab.stages = 1;
  tab.basis = {[](Scalar) { return Scalar(1); }};
  tab.weights = VectorX<Scalar>::Constant(1, Scalar(1));
  tab.nodes = VectorX<Scalar>::Zero(1);
  tab.A = MatrixX<Scalar>::Zero(1, 1);
  tab.B = VectorX<Scalar>::Constant(1, Scalar(1));
  tab.M = MatrixX<Scalar>::Constant(1, 1, Scalar(1));
  tab.validate();
  return tab;
}

/// s = 2 tableau (psi = (1, cos(pi tau)), b = (1/2, 1/2), c = (0, 1)): the
/// Stormer-Verlet scheme.
template <typename Scalar = double>
GalerkinTableau<Scalar> stormer_verlet_tableau() {
  const Scalar pi = Scalar(3.14159265358979323846L);
  GalerkinTableau<Scalar> tab;
  tab.stages = 2;
  tab.basis = {[](Scalar) { return Scalar(1); },
               [pi](Scalar tau) { return std::cos(pi * tau); }};
  tab.weights = VectorX<Scalar>::Constant(2, Scalar(0.5));
  tab.nodes = (VectorX<Scalar>(2) << Scalar(0), Scalar(1)).finished();
  tab.A = (MatrixX<Scalar>(2, 2) << Scalar(0), Scalar(0), Scalar(1), Scalar(0)).finished();
  tab.B = (VectorX<Scalar>(2) << Scalar(1), Scalar(0)).finished();
  tab.M = (MatrixX<Scalar>(2, 2) << Scalar(1), Scalar(1), Scalar(1), Scalar(-1)).finished();
  tab.validate();
  return tab;
}

/// A continuous-time control system: dynamics f(q, u) and running cost C(q, u).
template <typename Scalar = double>
struct ControlSystem {
  using Dynamics = std::function<VectorX<Scalar>(const VectorX<Scalar>&, const VectorX<Scalar>&)>;
  using Cost = std::function<Scalar(const VectorX<Scalar>&, const VectorX<Scalar>&)>;

  Dynamics f;
  Cost C;
  int state_dim = 0;
  int control_dim = 0;
};

using ControlSystemd = ControlSystem<double>;

/// Internal stage data of one Galerkin step.
template <typename Scalar = double>
struct StageState {
  std::vector<VectorX<Scalar>> velocities;  ///< w^i
  std::vector<VectorX<Scalar>> states;      ///< Q^i = q0 + h sum_j A(i,j) w^j
  std::vector<VectorX<Scalar>> controls;    ///< U^i
  std::vector<VectorX<Scalar>> momenta;     ///< P^i, recorded only when a caller fills them
};

using StageStated = StageState<double>;

namespace detail {

template <typename Scalar>
std::vector<VectorX<Scalar>> unstack(const VectorX<Scalar>& stacked, int count) {
  const Eigen::Index n = stacked.size() / count;
  std::vector<VectorX<Scalar>> out(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) out[size_t(i)] = stacked.segment(i * n, n);
  return out;
}

template <typename Scalar>
std::vector<VectorX<Scalar>> stage_states(const GalerkinTableau<Scalar>& tab,
                                          const VectorX<Scalar>& q0,
                                          const std::vector<VectorX<Scalar>>& w, Scalar h) {
  std::vector<VectorX<Scalar>> states(size_t(tab.stages));
  for (int i = 0; i < tab.stages; ++i) {
    VectorX<Scalar> qi = q0;
    for (int j = 0; j < tab.stages; ++j) qi += h * tab.A(i, j) * w[size_t(j)];
    states[size_t(i)] = std::move(qi);
  }
  return states;
}

}  // namespace detail

/// Solves the internal-velocity stationarity system
/// sum_j M(i,j) w^j = f(Q^i(w), U^i), i = 1..s, for the velocities w.
///
/// The seed freezes the stage states at q0: M W = (f(q0, U^i))_i. If Newton
/// fails from there, ten Picard sweeps w <- M^{-1} f(Q(w), U) precondition a
/// retry.
template <typename Scalar>
StageState<Scalar> solve_internal_velocities(const ControlSystem<Scalar>& sys,
                                             const GalerkinTableau<Scalar>& tab,
                                             const VectorX<Scalar>& q0,
                                             const std::vector<VectorX<Scalar>>& controls,
                                             Scalar h, const NewtonConfig<Scalar>& cfg = {}) {
  tab.validate();
  const int s = tab.stages;
  const Eigen::Index n = q0.size();
  if (int(controls.size()) != s)
    throw InvalidArgument("solve_internal_velocities: one control per stage required");
  for (int i = 0; i < s; ++i)
    if (tab.weights(i) == Scalar(0))
      throw InvalidArgument("solve_internal_velocities: quadrature weights must be nonzero");
  if (condition_estimate(tab.M) > Scalar(1e12))
    throw SingularMatrixError("solve_internal_velocities: collocation matrix M is singular");

  const Eigen::PartialPivLU<MatrixX<Scalar>> m_lu(tab.M);

  auto picard_rhs = [&](const VectorX<Scalar>& stacked) -> MatrixX<Scalar> {
    const auto w = detail::unstack(stacked, s);
    const auto q = detail::stage_states(tab, q0, w, h);
    MatrixX<Scalar> rhs(s, n);
    for (int i = 0; i < s; ++i) rhs.row(i) = sys.f(q[size_t(i)], controls[size_t(i)]).transpose();
    return rhs;
  };
  auto picard_sweep = [&](const VectorX<Scalar>& stacked) -> VectorX<Scalar> {
    const MatrixX<Scalar> w_mat = m_lu.solve(picard_rhs(stacked));
    VectorX<Scalar> out(s * n);
    for (int i = 0; i < s; ++i) out.segment(i * n, n) = w_mat.row(i).transpose();
    return out;
  };

  auto residual = [&](const VectorX<Scalar>& stacked) -> VectorX<Scalar> {
    const auto w = detail::unstack(stacked, s);
    const auto q = detail::stage_states(tab, q0, w, h);
    VectorX<Scalar> r(s * n);
    for (int i = 0; i < s; ++i) {
      VectorX<Scalar> lhs = VectorX<Scalar>::Zero(n);
      for (int j = 0; j < s; ++j) lhs += tab.M(i, j) * w[size_t(j)];
      r.segment(i * n, n) = lhs - sys.f(q[size_t(i)], controls[size_t(i)]);
    }
    return r;
  };

  // Stage-frozen seed: exact whenever A = 0.
  VectorX<Scalar> seed = picard_sweep(VectorX<Scalar>::Zero(s * n));

  VectorX<Scalar> solution;
  try {
    solution = newton_solve<Scalar>(residual, seed, cfg);
  } catch (const Error&) {
    VectorX<Scalar> w = seed;
    for (int sweep = 0; sweep < 10; ++sweep) w = picard_sweep(w);
    try {
      solution = newton_solve<Scalar>(residual, w, cfg);
    } catch (const NonConvergenceError& e) {
      std::string diag = "solve_internal_velocities: stage residuals";
      const VectorX<Scalar> r = residual(w);
      for (int i = 0; i < s; ++i)
        diag += " |r_" + std::to_string(i + 1) +
                "| = " + std::to_string(double(r.segment(i * n, n).template lpNorm<Eigen::Infinity>()));
      detail::rethrow_with_context(e, diag);
    }
  }

  StageState<Scalar> out;
  out.velocities = detail::unstack(solution, s);
  out.states = detail::stage_states(tab, q0, out.velocities, h);
  out.controls = controls;
  return out;
}

/// One Galerkin step of the dynamics: f_d = q0 + h sum_i B_i w^i.
template <typename Scalar>
VectorX<Scalar> discrete_dynamics(const ControlSystem<Scalar>& sys,
                                  const GalerkinTableau<Scalar>& tab, const VectorX<Scalar>& q0,
                                  const std::vector<VectorX<Scalar>>& controls, Scalar h,
                                  const NewtonConfig<Scalar>& cfg = {}) {
  const StageState<Scalar> stage = solve_internal_velocities(sys, tab, q0, controls, h, cfg);
  VectorX<Scalar> q1 = q0;
  for (int i = 0; i < tab.stages; ++i) q1 += h * tab.B(i) * stage.velocities[size_t(i)];
  return q1;
}

/// One Galerkin step of the cost: C_d = h sum_i b_i C(Q^i, U^i).
template <typename Scalar>
Scalar discrete_cost(const ControlSystem<Scalar>& sys, const GalerkinTableau<Scalar>& tab,
                     const VectorX<Scalar>& q0, const std::vector<VectorX<Scalar>>& controls,
                     Scalar h, const NewtonConfig<Scalar>& cfg = {}) {
  const StageState<Scalar> stage = solve_internal_velocities(sys, tab, q0, controls, h, cfg);
  Scalar cost = Scalar(0);
  for (int i = 0; i < tab.stages; ++i)
    cost += tab.weights(i) * sys.C(stage.states[size_t(i)], controls[size_t(i)]);
  return h * cost;
}

/// Galerkin discrete control Hamiltonian
/// p1.[q0 + h sum_j B_j w^j] - h sum_i b_i C(Q^i, U^i), assembled from one
/// internal-velocity solve.
template <typename Scalar>
Scalar galerkin_control_hamiltonian(const ControlSystem<Scalar>& sys,
                                    const GalerkinTableau<Scalar>& tab, const VectorX<Scalar>& q0,
                                    const VectorX<Scalar>& p1,
                                    const std::vector<VectorX<Scalar>>& controls, Scalar h,
                                    const NewtonConfig<Scalar>& cfg = {}) {
  const StageState<Scalar> stage = solve_internal_velocities(sys, tab, q0, controls, h, cfg);
  VectorX<Scalar> q1 = q0;
  Scalar cost = Scalar(0);
  for (int i = 0; i < tab.stages; ++i) {
    q1 += h * tab.B(i) * stage.velocities[size_t(i)];
    cost += tab.weights(i) * sys.C(stage.states[size_t(i)], controls[size_t(i)]);
  }
  return p1.dot(q1) - h * cost;
}

/// Packages a Galerkin step as a DiscreteOCP whose control is the stacked
/// vector (U^1, ..., U^s); backward DP on it realizes the Bellman equation
/// with internal-stage controls.
template <typename Scalar>
DiscreteOCP<Scalar> build_docp(const ControlSystem<Scalar>& sys, const GalerkinTableau<Scalar>& tab,
                               Scalar h, int horizon, const ControlBox<Scalar>& stage_box,
                               VectorX<Scalar> q0, const NewtonConfig<Scalar>& cfg = {}) {
  tab.validate();
  if (stage_box.dim() != sys.control_dim)
    throw InvalidArgument("build_docp: control box dimension must match the control system");
  const int s = tab.stages;
  DiscreteOCP<Scalar> ocp;
  ocp.dynamics = [sys, tab, h, s, cfg](const VectorX<Scalar>& q, const VectorX<Scalar>& stacked) {
    return discrete_dynamics(sys, tab, q, detail::unstack(stacked, s), h, cfg);
  };
  ocp.stage_cost = [sys, tab, h, s, cfg](const VectorX<Scalar>& q, const VectorX<Scalar>& stacked) {
    return discrete_cost(sys, tab, q, detail::unstack(stacked, s), h, cfg);
  };
  ocp.horizon = horizon;
  ocp.control_box = stage_box.replicated(s);
  ocp.initial_state = std::move(q0);
  return ocp;
}

/// The Heisenberg benchmark: states (x, y, z), controls (u, v),
/// dynamics (u, v, u y - v x), cost (u^2 + v^2) / 2.
template <typename Scalar = double>
ControlSystem<Scalar> heisenberg_system() {
  ControlSystem<Scalar> sys;
  sys.state_dim = 3;
  sys.control_dim = 2;
  sys.f = [](const VectorX<Scalar>& q, const VectorX<Scalar>& u) {
    VectorX<Scalar> out(3);
    out << u(0), u(1), u(0) * q(1) - u(1) * q(0);
    return out;
  };
  sys.C = [](const VectorX<Scalar>&, const VectorX<Scalar>& u) {
    return Scalar(0.5) * (u(0) * u(0) + u(1) * u(1));
  };
  return sys;
}

/// Closed form of the s = 2 Stormer-Verlet step for the Heisenberg system,
/// used as an oracle for the generic pipeline:
///   x' = x + h (u1 + u2) / 2
///   y' = y + h (v1 + v2) / 2
///   z' = z + h [ (u1 + u2)/2 y - (v1 + v2)/2 x + h (u2 v1 - u1 v2) / 4 ].
template <typename Scalar>
VectorX<Scalar> heisenberg_fd_closed_form(const VectorX<Scalar>& q, const VectorX<Scalar>& u1,
                                          const VectorX<Scalar>& u2, Scalar h) {
  if (q.size() != 3 || u1.size() != 2 || u2.size() != 2)
    throw InvalidArgument("heisenberg_fd_closed_form: expects 3 states and 2 controls per stage");
  const Scalar ubar = (u1(0) + u2(0)) / Scalar(2);
  const Scalar vbar = (u1(1) + u2(1)) / Scalar(2);
  VectorX<Scalar> out(3);
  out(0) = q(0) + h * ubar;
  out(1) = q(1) + h * vbar;
  out(2) = q(2) + h * (ubar * q(1) - vbar * q(0) +
                       h * (u2(0) * u1(1) - u1(0) * u2(1)) / Scalar(4));
  return out;
}

}  // namespace dhj
