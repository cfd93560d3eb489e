#pragma once

#include <algorithm>
#include <atomic>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "dhj/core.hpp"
#include "dhj/grid.hpp"
#include "dhj/linhj.hpp"

namespace dhj {

/// A dynamics evaluation left the interpolation-extended grid domain.
class GridEscapeError : public Error {
 public:
  GridEscapeError(const std::string& what, int stage, size_t node)
      : Error(what + " (stage " + std::to_string(stage) + ", node " + std::to_string(node) + ")"),
        stage_(stage),
        node_(node) {}
  int stage() const { return stage_; }
  size_t node() const { return node_; }

 private:
  int stage_;
  size_t node_;
};

/// Per-coordinate control bounds.
template <typename Scalar = double>
struct ControlBox {
  VectorX<Scalar> lower;
  VectorX<Scalar> upper;

  ControlBox() = default;
  ControlBox(VectorX<Scalar> lo, VectorX<Scalar> hi) : lower(std::move(lo)), upper(std::move(hi)) {
    if (lower.size() != upper.size() || lower.size() == 0 ||
        (lower.array() > upper.array()).any())
      throw InvalidArgument("ControlBox: bounds must be nonempty with lower <= upper");
  }

  Eigen::Index dim() const { return lower.size(); }

  VectorX<Scalar> clamp(VectorX<Scalar> u) const {
    return u.cwiseMax(lower).cwiseMin(upper);
  }

  bool contains(const VectorX<Scalar>& u, Scalar tol = Scalar(0)) const {
    return (u.array() >= lower.array() - tol).all() && (u.array() <= upper.array() + tol).all();
  }

  /// Box replicated `copies` times (stacked internal-stage controls).
  ControlBox replicated(int copies) const {
    VectorX<Scalar> lo(dim() * copies), hi(dim() * copies);
    for (int i = 0; i < copies; ++i) {
      lo.segment(i * dim(), dim()) = lower;
      hi.segment(i * dim(), dim()) = upper;
    }
    return ControlBox(std::move(lo), std::move(hi));
  }
};

using ControlBoxd = ControlBox<double>;

/// A discrete optimal control problem: dynamics, stage cost, horizon, control
/// set, and initial state.
template <typename Scalar = double>
struct DiscreteOCP {
  using Dynamics = std::function<VectorX<Scalar>(const VectorX<Scalar>&, const VectorX<Scalar>&)>;
  using StageCost = std::function<Scalar(const VectorX<Scalar>&, const VectorX<Scalar>&)>;

  Dynamics dynamics;       ///< f_d(q, u)
  StageCost stage_cost;    ///< C_d(q, u)
  int horizon = 0;         ///< N
  ControlBox<Scalar> control_box;
  VectorX<Scalar> initial_state;

  void validate() const {
    if (horizon < 1) throw InvalidArgument("DiscreteOCP: horizon must be >= 1");
    if (control_box.dim() == 0) throw InvalidArgument("DiscreteOCP: control box is empty");
    if (!dynamics || !stage_cost) throw InvalidArgument("DiscreteOCP: missing callbacks");
  }
};

using DiscreteOCPd = DiscreteOCP<double>;

/// Per-stage optimal cost-to-go tables on a rectangular grid.
template <typename Scalar = double>
struct ValueGrid {
  GridSpec<Scalar> spec;
  Interpolation order = Interpolation::Multilinear;
  std::vector<std::vector<Scalar>> stages;  ///< stages[k] has node_count() values, k = 0..N

  int horizon() const { return int(stages.size()) - 1; }

  void validate() const {
    spec.validate(order);
    if (stages.empty()) throw InvalidArgument("ValueGrid: terminal stage missing");
    for (size_t k = 0; k < stages.size(); ++k) {
      if (stages[k].size() != spec.node_count())
        throw InvalidArgument("ValueGrid: stage " + std::to_string(k) + " has wrong node count");
      for (Scalar v : stages[k])
        if (!std::isfinite(v))
          throw InvalidArgument("ValueGrid: non-finite value at stage " + std::to_string(k));
    }
  }

  Scalar value(int k, const VectorX<Scalar>& q) const {
    return interpolate(spec, stages.at(size_t(k)), q, order);
  }
};

using ValueGridd = ValueGrid<double>;

/// Per-stage minimizer tables on the same grid.
template <typename Scalar = double>
struct Policy {
  GridSpec<Scalar> spec;
  Eigen::Index control_dim = 0;
  /// stages[k][node] is the optimal control at that node, k = 0..N-1.
  std::vector<std::vector<VectorX<Scalar>>> stages;
  /// Set when the concavity check flagged any node of the stage.
  std::vector<bool> non_concave;

  VectorX<Scalar> control(int k, const VectorX<Scalar>& q) const {
    const auto& table = stages.at(size_t(k));
    VectorX<Scalar> u(control_dim);
    std::vector<Scalar> comp(table.size());
    for (Eigen::Index c = 0; c < control_dim; ++c) {
      for (size_t i = 0; i < table.size(); ++i) comp[i] = table[i](c);
      u(c) = interpolate(spec, comp, q, Interpolation::Multilinear);
    }
    return u;
  }
};

using Policyd = Policy<double>;

// ---------------------------------------------------------------------------
// Control Hamiltonian and its maximization
// ---------------------------------------------------------------------------

/// Discrete control Hamiltonian p.f_d(q, u) - C_d(q, u).
template <typename Scalar>
Scalar control_hamiltonian(const DiscreteOCP<Scalar>& ocp, const VectorX<Scalar>& q,
                           const VectorX<Scalar>& p, const VectorX<Scalar>& u) {
  return p.dot(ocp.dynamics(q, u)) - ocp.stage_cost(q, u);
}

/// Result of a box-constrained optimization of a scalar objective.
template <typename Scalar = double>
struct ControlResult {
  VectorX<Scalar> u;
  Scalar value = Scalar(0);
  /// Interior second-derivative test failed; the grid-scan value was returned.
  bool non_concave = false;
};

namespace detail {

// Deterministic tie-break: prefer smaller objective; on a tie prefer the
// smaller Euclidean norm of u, then lexicographic order.
template <typename Scalar>
bool improves(Scalar value, const VectorX<Scalar>& u, Scalar best_value,
              const VectorX<Scalar>& best_u) {
  if (best_u.size() == 0) return true;
  if (value < best_value) return true;
  if (value > best_value) return false;
  const Scalar nu = u.squaredNorm();
  const Scalar nb = best_u.squaredNorm();
  if (nu < nb) return true;
  if (nu > nb) return false;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    if (u(i) < best_u(i)) return true;
    if (u(i) > best_u(i)) return false;
  }
  return false;
}

// Minimizes g over the box: coarse scan seeding Newton on the gradient,
// clamped to the box. Falls back to the scan value when Newton fails or the
// Hessian test reports a non-minimum.
template <typename Scalar>
ControlResult<Scalar> minimize_over_box(const std::function<Scalar(const VectorX<Scalar>&)>& g,
                                        const ControlBox<Scalar>& box,
                                        const NewtonConfig<Scalar>& cfg, int scan_points = 17) {
  const Eigen::Index m = box.dim();
  if (scan_points < 2) throw InvalidArgument("minimize_over_box: need at least 2 scan points");

  // Scan the tensor grid of scan_points per axis.
  VectorX<Scalar> best_u;
  Scalar best_value = std::numeric_limits<Scalar>::infinity();
  std::vector<int> idx(size_t(m), 0);
  VectorX<Scalar> u(m);
  const size_t total = [&] {
    size_t t = 1;
    for (Eigen::Index i = 0; i < m; ++i) t *= size_t(scan_points);
    return t;
  }();
  for (size_t flat = 0; flat < total; ++flat) {
    size_t rem = flat;
    for (Eigen::Index a = m; a-- > 0;) {
      idx[size_t(a)] = int(rem % size_t(scan_points));
      rem /= size_t(scan_points);
    }
    for (Eigen::Index a = 0; a < m; ++a)
      u(a) = box.lower(a) +
             (box.upper(a) - box.lower(a)) * Scalar(idx[size_t(a)]) / Scalar(scan_points - 1);
    const Scalar value = g(u);
    if (!std::isfinite(value)) throw EvaluationError("minimize_over_box: non-finite objective");
    if (improves(value, u, best_value, best_u)) {
      best_value = value;
      best_u = u;
    }
  }

  ControlResult<Scalar> result{best_u, best_value, false};

  // Polish with Newton on the stationarity condition. Finite-difference
  // gradients bottom out near 1e-10, so the residual tolerance is floored.
  NewtonConfig<Scalar> ncfg = cfg;
  ncfg.abs_tol = std::max(cfg.abs_tol, Scalar(1e-9));
  auto grad = [&](const VectorX<Scalar>& v) { return fd_gradient<Scalar>(g, v, cfg); };
  VectorX<Scalar> candidate;
  bool have_candidate = false;
  try {
    candidate = box.clamp(newton_solve<Scalar>(grad, best_u, ncfg));
    have_candidate = true;
  } catch (const Error&) {
    // Keep the scan value.
  }

  if (have_candidate) {
    const Scalar cand_value = g(candidate);
    const bool interior = box.contains(candidate, Scalar(-1e-12));
    if (interior) {
      // Second-derivative test at the candidate; a non-negative curvature
      // direction means the stationary point is not a strict minimum.
      const MatrixX<Scalar> hess = fd_jacobian<Scalar>(grad, candidate, cfg);
      const MatrixX<Scalar> sym = Scalar(0.5) * (hess + hess.transpose());
      Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> eig(sym);
      if (eig.eigenvalues()(0) <= Scalar(0)) {
        result.non_concave = true;
        return result;
      }
    }
    if (improves(cand_value, candidate, result.value, result.u)) {
      result.value = cand_value;
      result.u = candidate;
    }
  }
  return result;
}

}  // namespace detail

/// Argmax of the control Hamiltonian over the control box: a 17-point-per-axis
/// scan seeds Newton on D3 H = 0, clamped to the box. Ties break toward the
/// smallest control norm, then lexicographic order. A failed interior
/// concavity test sets the warning flag and returns the scan value.
template <typename Scalar>
ControlResult<Scalar> maximize_control(const DiscreteOCP<Scalar>& ocp, const VectorX<Scalar>& q,
                                       const VectorX<Scalar>& p,
                                       const NewtonConfig<Scalar>& cfg = {}) {
  auto negated = [&](const VectorX<Scalar>& u) { return -control_hamiltonian(ocp, q, p, u); };
  ControlResult<Scalar> r = detail::minimize_over_box<Scalar>(negated, ocp.control_box, cfg);
  r.value = -r.value;
  return r;
}

// ---------------------------------------------------------------------------
// Pontryagin residual
// ---------------------------------------------------------------------------

/// Maximum residual of the optimality system along a candidate solution:
/// the state recursion q_{k+1} = f_d(q_k, u_k), the costate recursion
/// p_k = p_{k+1}.D1 f_d - D1 C_d, and the stationarity |D3 H| at each stage.
template <typename Scalar>
Scalar pontryagin_residual(const DiscreteOCP<Scalar>& ocp,
                           const std::vector<VectorX<Scalar>>& states,
                           const std::vector<VectorX<Scalar>>& controls,
                           const std::vector<VectorX<Scalar>>& costates,
                           const NewtonConfig<Scalar>& cfg = {}) {
  const size_t n_steps = controls.size();
  if (states.size() != n_steps + 1 || costates.size() != n_steps + 1)
    throw InvalidArgument("pontryagin_residual: inconsistent lengths");
  Scalar worst = Scalar(0);
  using std::max;
  for (size_t k = 0; k < n_steps; ++k) {
    const auto& q = states[k];
    const auto& u = controls[k];
    const auto& p_next = costates[k + 1];

    worst = max(worst,
                (states[k + 1] - ocp.dynamics(q, u)).template lpNorm<Eigen::Infinity>());

    const MatrixX<Scalar> df_dq = fd_jacobian<Scalar>(
        [&](const VectorX<Scalar>& v) { return ocp.dynamics(v, u); }, q, cfg);
    const VectorX<Scalar> dc_dq = fd_gradient<Scalar>(
        [&](const VectorX<Scalar>& v) { return ocp.stage_cost(v, u); }, q, cfg);
    worst = max(worst, (costates[k] - (df_dq.transpose() * p_next - dc_dq))
                           .template lpNorm<Eigen::Infinity>());

    const VectorX<Scalar> d3 = fd_gradient<Scalar>(
        [&](const VectorX<Scalar>& v) { return control_hamiltonian(ocp, q, p_next, v); }, u, cfg);
    worst = max(worst, d3.template lpNorm<Eigen::Infinity>());
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Bellman backward recursion
// ---------------------------------------------------------------------------

template <typename Scalar = double>
struct BellmanOptions {
  Interpolation order = Interpolation::Multilinear;
  int scan_points = 17;
  int threads = 1;           ///< 0 = hardware concurrency
  Scalar escape_margin = Scalar(0.1);  ///< fraction of each axis range
};

namespace detail {

template <typename Fn>
void parallel_for(size_t count, int threads, const Fn& fn) {
  if (threads == 0) threads = int(std::thread::hardware_concurrency());
  if (threads <= 1 || count < 2) {
    for (size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(size_t(threads));
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace detail

/// Backward dynamic programming on a value grid:
/// J^k(q) = min_u [ J^{k+1}(f_d(q, u)) + C_d(q, u) ] for k = N-1..0.
/// Any dynamics evaluation beyond the escape margin raises GridEscapeError.
template <typename Scalar>
std::pair<ValueGrid<Scalar>, Policy<Scalar>> bellman_backward(
    const DiscreteOCP<Scalar>& ocp, const GridSpec<Scalar>& spec,
    const std::function<Scalar(const VectorX<Scalar>&)>& terminal_value,
    const NewtonConfig<Scalar>& cfg = {}, const BellmanOptions<Scalar>& options = {}) {
  ocp.validate();
  spec.validate(options.order);

  const size_t nodes = spec.node_count();
  ValueGrid<Scalar> values;
  values.spec = spec;
  values.order = options.order;
  values.stages.assign(size_t(ocp.horizon) + 1, std::vector<Scalar>(nodes, Scalar(0)));

  Policy<Scalar> policy;
  policy.spec = spec;
  policy.control_dim = ocp.control_box.dim();
  policy.stages.assign(size_t(ocp.horizon),
                       std::vector<VectorX<Scalar>>(nodes, VectorX<Scalar>()));
  policy.non_concave.assign(size_t(ocp.horizon), false);

  for (size_t i = 0; i < nodes; ++i) {
    const Scalar v = terminal_value(spec.node(spec.multi_index(i)));
    if (!std::isfinite(v)) throw EvaluationError("bellman_backward: non-finite terminal value");
    values.stages[size_t(ocp.horizon)][i] = v;
  }

  for (int k = ocp.horizon - 1; k >= 0; --k) {
    const std::vector<Scalar>& next = values.stages[size_t(k) + 1];
    std::vector<Scalar>& current = values.stages[size_t(k)];
    std::vector<VectorX<Scalar>>& stage_policy = policy.stages[size_t(k)];
    std::atomic<bool> stage_flag{false};

    detail::parallel_for(nodes, options.threads, [&](size_t i) {
      const VectorX<Scalar> q = spec.node(spec.multi_index(i));
      auto objective = [&](const VectorX<Scalar>& u) -> Scalar {
        const VectorX<Scalar> q_next = ocp.dynamics(q, u);
        if (!q_next.allFinite())
          throw EvaluationError("bellman_backward: non-finite dynamics value");
        if (!spec.within_margin(q_next, options.escape_margin))
          throw GridEscapeError("bellman_backward: state escaped the grid margin", k, i);
        return interpolate(spec, next, q_next, options.order) + ocp.stage_cost(q, u);
      };
      const ControlResult<Scalar> best =
          detail::minimize_over_box<Scalar>(objective, ocp.control_box, cfg, options.scan_points);
      current[i] = best.value;
      stage_policy[i] = best.u;
      if (best.non_concave) stage_flag = true;
    });
    policy.non_concave[size_t(k)] = stage_flag.load();
  }

  values.validate();
  return {std::move(values), std::move(policy)};
}

/// Quadratic terminal penalty mu * |q - target|^2 standing in for a hard
/// terminal constraint; mu = 0 recovers the free-terminal problem.
template <typename Scalar>
std::function<Scalar(const VectorX<Scalar>&)> quadratic_penalty_terminal(VectorX<Scalar> target,
                                                                         Scalar mu) {
  return [target = std::move(target), mu](const VectorX<Scalar>& q) {
    return mu * (q - target).squaredNorm();
  };
}

// ---------------------------------------------------------------------------
// Costates from a value grid
// ---------------------------------------------------------------------------

template <typename Scalar = double>
struct CostateTable {
  std::vector<VectorX<Scalar>> costates;  ///< p_k = -D J^k(c_k)
  std::vector<bool> one_sided;            ///< boundary proximity warning per index
};

/// Costates along a state trajectory from the value-gradient relation
/// p_k = -D J^k(c_k). Gradients are central differences on the interpolant;
/// nodes too close to the boundary fall back to one-sided differences and are
/// flagged.
template <typename Scalar>
CostateTable<Scalar> costate_from_value(const ValueGrid<Scalar>& values,
                                        const std::vector<VectorX<Scalar>>& states) {
  values.validate();
  if (int(states.size()) != values.horizon() + 1)
    throw InvalidArgument("costate_from_value: trajectory length must equal stage count");
  CostateTable<Scalar> table;
  table.costates.reserve(states.size());
  table.one_sided.assign(states.size(), false);
  const Eigen::Index dims = values.spec.dim();
  for (size_t k = 0; k < states.size(); ++k) {
    const VectorX<Scalar>& c = states[k];
    VectorX<Scalar> p(dims);
    for (Eigen::Index a = 0; a < dims; ++a) {
      const auto& axis = values.spec.axes[size_t(a)];
      const Scalar h = Scalar(0.5) * values.spec.spacing(size_t(a));
      VectorX<Scalar> qp = c, qm = c;
      const bool near_lo = c(a) - h < axis.lo;
      const bool near_hi = c(a) + h > axis.hi;
      if (near_lo || near_hi) {
        table.one_sided[k] = true;
        if (near_lo) {
          qp(a) = c(a) + h;
          p(a) = -(values.value(int(k), qp) - values.value(int(k), c)) / h;
        } else {
          qm(a) = c(a) - h;
          p(a) = -(values.value(int(k), c) - values.value(int(k), qm)) / h;
        }
      } else {
        qp(a) = c(a) + h;
        qm(a) = c(a) - h;
        p(a) = -(values.value(int(k), qp) - values.value(int(k), qm)) / (2 * h);
      }
    }
    table.costates.push_back(std::move(p));
  }
  return table;
}

// ---------------------------------------------------------------------------
// Rollout
// ---------------------------------------------------------------------------

template <typename Scalar = double>
struct Rollout {
  std::vector<VectorX<Scalar>> states;    ///< q_0..q_N
  std::vector<VectorX<Scalar>> controls;  ///< u_0..u_{N-1}
  Scalar total_cost = Scalar(0);
};

/// Forward simulation under a feedback law u = feedback(k, q).
template <typename Scalar>
Rollout<Scalar> rollout(const DiscreteOCP<Scalar>& ocp,
                        const std::function<VectorX<Scalar>(int, const VectorX<Scalar>&)>& feedback,
                        const VectorX<Scalar>& q0, int steps) {
  if (steps < 0) throw InvalidArgument("rollout: steps must be >= 0");
  Rollout<Scalar> out;
  out.states.reserve(size_t(steps) + 1);
  out.states.push_back(q0);
  for (int k = 0; k < steps; ++k) {
    const VectorX<Scalar> u = ocp.control_box.clamp(feedback(k, out.states.back()));
    out.total_cost += ocp.stage_cost(out.states.back(), u);
    out.controls.push_back(u);
    VectorX<Scalar> q_next = ocp.dynamics(out.states.back(), u);
    if (!q_next.allFinite()) throw EvaluationError("rollout: non-finite state");
    out.states.push_back(std::move(q_next));
  }
  return out;
}

/// Forward simulation under an interpolated grid policy. States escaping the
/// extended grid domain raise GridEscapeError.
template <typename Scalar>
Rollout<Scalar> rollout(const DiscreteOCP<Scalar>& ocp, const Policy<Scalar>& policy,
                        const VectorX<Scalar>& q0, int steps, Scalar escape_margin = Scalar(0.1)) {
  if (steps > int(policy.stages.size()))
    throw InvalidArgument("rollout: policy has fewer stages than requested steps");
  auto feedback = [&](int k, const VectorX<Scalar>& q) { return policy.control(k, q); };
  Rollout<Scalar> out = rollout<Scalar>(ocp, feedback, q0, steps);
  for (size_t k = 0; k < out.states.size(); ++k)
    if (!policy.spec.within_margin(out.states[k], escape_margin))
      throw GridEscapeError("rollout: state escaped the grid margin", int(k), 0);
  return out;
}

// ---------------------------------------------------------------------------
// Linear-quadratic closed form
// ---------------------------------------------------------------------------

/// An LQ problem: dynamics q' = A q + B u, stage cost
/// 1/2 (q^T Q q + u^T R u), terminal value 1/2 q^T QN q + bN^T q + cN.
template <typename Scalar = double>
struct LinearQuadraticOCP {
  MatrixX<Scalar> A;
  MatrixX<Scalar> B;
  MatrixX<Scalar> Q;
  MatrixX<Scalar> R;
  int horizon = 0;
  QuadraticGeneratingFunction<Scalar> terminal;

  Eigen::Index state_dim() const { return A.rows(); }
  Eigen::Index control_dim() const { return B.cols(); }

  void validate() const {
    const Eigen::Index n = A.rows();
    const Eigen::Index m = B.cols();
    if (A.cols() != n || B.rows() != n || Q.rows() != n || Q.cols() != n || R.rows() != m ||
        R.cols() != m)
      throw InvalidArgument("LinearQuadraticOCP: dimension mismatch");
    if (horizon < 1) throw InvalidArgument("LinearQuadraticOCP: horizon must be >= 1");
    if (terminal.dim() != n) throw InvalidArgument("LinearQuadraticOCP: terminal dimension");
  }

  /// The same problem as a generic DiscreteOCP over the given control box.
  DiscreteOCP<Scalar> to_discrete(ControlBox<Scalar> box, VectorX<Scalar> q0) const {
    validate();
    DiscreteOCP<Scalar> ocp;
    ocp.dynamics = [a = A, b = B](const VectorX<Scalar>& q, const VectorX<Scalar>& u) {
      return (a * q + b * u).eval();
    };
    ocp.stage_cost = [q_mat = Q, r_mat = R](const VectorX<Scalar>& q, const VectorX<Scalar>& u) {
      return Scalar(0.5) * q.dot(q_mat * q) + Scalar(0.5) * u.dot(r_mat * u);
    };
    ocp.horizon = horizon;
    ocp.control_box = std::move(box);
    ocp.initial_state = std::move(q0);
    return ocp;
  }
};

using LinearQuadraticOCPd = LinearQuadraticOCP<double>;

/// Exact cost-to-go coefficients J^k(q) = 1/2 q^T P_k q + s_k^T q + t_k by the
/// backward LQ recursion; rejects non-convex stage costs.
template <typename Scalar>
std::vector<QuadraticGeneratingFunction<Scalar>> lq_value_analytic(
    const LinearQuadraticOCP<Scalar>& lq) {
  lq.validate();
  std::vector<QuadraticGeneratingFunction<Scalar>> values(size_t(lq.horizon) + 1);
  values[size_t(lq.horizon)] = lq.terminal;
  for (int k = lq.horizon - 1; k >= 0; --k) {
    const auto& next = values[size_t(k) + 1];
    const MatrixX<Scalar>& p = next.A;
    const VectorX<Scalar>& s = next.b;
    const MatrixX<Scalar> g = lq.R + lq.B.transpose() * p * lq.B;
    Eigen::LLT<MatrixX<Scalar>> llt(Scalar(0.5) * (g + g.transpose()));
    if (llt.info() != Eigen::Success)
      throw InvalidArgument("lq_value_analytic: stage " + std::to_string(k) +
                            " has a non-convex control subproblem");
    const MatrixX<Scalar> gain = llt.solve(lq.B.transpose() * p * lq.A);   // F
    const VectorX<Scalar> offset = llt.solve(lq.B.transpose() * s);       // g
    const MatrixX<Scalar> a_cl = lq.A - lq.B * gain;
    const MatrixX<Scalar> p_new =
        lq.Q + gain.transpose() * lq.R * gain + a_cl.transpose() * p * a_cl;
    const VectorX<Scalar> s_new = gain.transpose() * lq.R * offset -
                                  a_cl.transpose() * (p * (lq.B * offset)) +
                                  a_cl.transpose() * s;
    const Scalar t_new = next.c + Scalar(0.5) * offset.dot(lq.R * offset) +
                         Scalar(0.5) * offset.dot(lq.B.transpose() * (p * (lq.B * offset))) -
                         s.dot(lq.B * offset);
    values[size_t(k)] = QuadraticGeneratingFunction<Scalar>(p_new, s_new, t_new);
  }
  return values;
}

/// Optimal feedback u_k = -F_k q - g_k of the LQ recursion, stage by stage.
template <typename Scalar>
std::vector<std::pair<MatrixX<Scalar>, VectorX<Scalar>>> lq_feedback(
    const LinearQuadraticOCP<Scalar>& lq,
    const std::vector<QuadraticGeneratingFunction<Scalar>>& values) {
  std::vector<std::pair<MatrixX<Scalar>, VectorX<Scalar>>> out(size_t(lq.horizon));
  for (int k = 0; k < lq.horizon; ++k) {
    const auto& next = values[size_t(k) + 1];
    const MatrixX<Scalar> g = lq.R + lq.B.transpose() * next.A * lq.B;
    Eigen::LLT<MatrixX<Scalar>> llt(Scalar(0.5) * (g + g.transpose()));
    if (llt.info() != Eigen::Success)
      throw InvalidArgument("lq_feedback: non-convex control subproblem");
    out[size_t(k)] = {llt.solve(lq.B.transpose() * next.A * lq.A),
                      llt.solve(lq.B.transpose() * next.b)};
  }
  return out;
}

/// The right discrete Hamiltonian max_u [p'.f_d - C_d] of an unconstrained LQ
/// problem: H+(q, p') = p'^T A q + 1/2 p'^T B R^{-1} B^T p' - 1/2 q^T Q q.
template <typename Scalar>
DiscreteHamiltonianRight<Scalar> lq_right_hamiltonian(const LinearQuadraticOCP<Scalar>& lq) {
  lq.validate();
  const MatrixX<Scalar> brb =
      lq.B * MatrixX<Scalar>(lq.R.partialPivLu().solve(lq.B.transpose()));
  DiscreteHamiltonianRight<Scalar> ham;
  ham.value = [a = lq.A, q_mat = lq.Q, brb](const VectorX<Scalar>& q, const VectorX<Scalar>& p) {
    return p.dot(a * q) + Scalar(0.5) * p.dot(brb * p) - Scalar(0.5) * q.dot(q_mat * q);
  };
  ham.d1 = [a = lq.A, q_mat = lq.Q](const VectorX<Scalar>& q, const VectorX<Scalar>& p) {
    return (a.transpose() * p - q_mat * q).eval();
  };
  ham.d2 = [a = lq.A, brb](const VectorX<Scalar>& q, const VectorX<Scalar>& p) {
    return (a * q + brb * p).eval();
  };
  return ham;
}

/// The sign bridge between generating functions and cost-to-go values:
/// S_d^k = S_d^* - J_d^k.
template <typename Scalar>
QuadraticGeneratingFunction<Scalar> action_from_cost_to_go(
    Scalar optimal_total, const QuadraticGeneratingFunction<Scalar>& cost_to_go) {
  return QuadraticGeneratingFunction<Scalar>(-cost_to_go.A, -cost_to_go.b,
                                             optimal_total - cost_to_go.c);
}

/// Generating-function view of a DP value grid through the sign bridge, with
/// gradients taken on the interpolant.
template <typename Scalar>
GeneratingFunctionSequence<Scalar> action_sequence_from_grid(const ValueGrid<Scalar>& values,
                                                             Scalar optimal_total) {
  values.validate();
  GeneratingFunctionSequence<Scalar> seq;
  seq.entries.reserve(values.stages.size());
  for (int k = 0; k <= values.horizon(); ++k) {
    GeneratingFunction<Scalar> fn;
    fn.value = [&values, k, optimal_total](const VectorX<Scalar>& q) {
      return optimal_total - values.value(k, q);
    };
    fn.gradient = [&values, k](const VectorX<Scalar>& q) {
      VectorX<Scalar> grad(values.spec.dim());
      for (Eigen::Index a = 0; a < values.spec.dim(); ++a) {
        const Scalar h = Scalar(0.5) * values.spec.spacing(size_t(a));
        VectorX<Scalar> qp = q, qm = q;
        qp(a) += h;
        qm(a) -= h;
        grad(a) = -(values.value(k, qp) - values.value(k, qm)) / (2 * h);
      }
      return grad;
    };
    seq.entries.push_back(std::move(fn));
  }
  return seq;
}

}  // namespace dhj
