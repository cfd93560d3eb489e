#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "dhj/docp.hpp"
#include "dhj/hj.hpp"

using dhj::ControlBox;
using dhj::DiscreteOCP;
using dhj::GridSpec;
using dhj::Interpolation;
using dhj::LinearQuadraticOCP;
using dhj::MatrixX;
using dhj::QuadraticGeneratingFunction;
using dhj::ValueGrid;
using dhj::VectorX;

namespace {

VectorX<double> vec1(double x) {
  VectorX<double> v(1);
  v << x;
  return v;
}

VectorX<double> vec2(double a, double b) {
  VectorX<double> v(2);
  v << a, b;
  return v;
}

ControlBox<double> box1(double lo, double hi) {
  return ControlBox<double>(vec1(lo), vec1(hi));
}

// Scalar integrator ocp: f = q + u, C = (q^2 + u^2)/2.
DiscreteOCP<double> scalar_integrator(int horizon, double bound = 4.0) {
  DiscreteOCP<double> ocp;
  ocp.dynamics = [](const VectorX<double>& q, const VectorX<double>& u) {
    return (q + u).eval();
  };
  ocp.stage_cost = [](const VectorX<double>& q, const VectorX<double>& u) {
    return 0.5 * (q.squaredNorm() + u.squaredNorm());
  };
  ocp.horizon = horizon;
  ocp.control_box = box1(-bound, bound);
  ocp.initial_state = vec1(0.5);
  return ocp;
}

// Contractive 2-state LQ fixture shared by the grid/analytic comparisons.
LinearQuadraticOCP<double> lq_fixture(int horizon) {
  LinearQuadraticOCP<double> lq;
  lq.A.resize(2, 2);
  lq.A << 0.6, 0.1, -0.1, 0.5;
  lq.B.resize(2, 1);
  lq.B << 0.3, 0.4;
  lq.Q = 0.4 * MatrixX<double>::Identity(2, 2);
  lq.R = MatrixX<double>::Identity(1, 1);
  lq.horizon = horizon;
  lq.terminal = QuadraticGeneratingFunction<double>(0.6 * MatrixX<double>::Identity(2, 2),
                                                    VectorX<double>::Zero(2), 0.0);
  return lq;
}

GridSpec<double> square_grid(double half_width, int points) {
  GridSpec<double> spec;
  spec.axes = {{-half_width, half_width, points}, {-half_width, half_width, points}};
  return spec;
}

ValueGrid<double> grid_from_function(const GridSpec<double>& spec,
                                     const std::function<double(const VectorX<double>&)>& f,
                                     int stages, Interpolation order) {
  ValueGrid<double> grid;
  grid.spec = spec;
  grid.order = order;
  grid.stages.assign(size_t(stages) + 1, std::vector<double>(spec.node_count()));
  for (size_t i = 0; i < spec.node_count(); ++i) {
    const double v = f(spec.node(spec.multi_index(i)));
    for (auto& stage : grid.stages) stage[i] = v;
  }
  return grid;
}

}  // namespace

TEST_SUITE("docp") {

TEST_CASE("cubic grid interpolation reproduces quadratics exactly") {
  GridSpec<double> spec = square_grid(1.0, 9);
  auto f = [](const VectorX<double>& q) {
    return 0.7 * q(0) * q(0) - 0.4 * q(0) * q(1) + 0.3 * q(1) * q(1) + 0.2 * q(0) - 0.1;
  };
  std::vector<double> data(spec.node_count());
  for (size_t i = 0; i < spec.node_count(); ++i) data[i] = f(spec.node(spec.multi_index(i)));
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const VectorX<double> q = vec2(dist(rng), dist(rng));
    CHECK(dhj::interpolate(spec, data, q, Interpolation::Cubic) ==
          doctest::Approx(f(q)).epsilon(1e-12));
  }
  // Multilinear interpolation is exact at the nodes and affine in between.
  CHECK(dhj::interpolate(spec, data, vec2(0.25, -0.5), Interpolation::Multilinear) ==
        doctest::Approx(f(vec2(0.25, -0.5))).epsilon(2e-2));
}

TEST_CASE("cubic interpolation is exact for quadratics in three dimensions") {
  GridSpec<double> spec;
  spec.axes = {{-1.0, 1.0, 7}, {-1.0, 1.0, 8}, {-1.0, 1.0, 9}};
  auto f = [](const VectorX<double>& q) {
    return 0.5 * q(0) * q(0) - 0.3 * q(0) * q(2) + 0.2 * q(1) * q(2) + 0.4 * q(1) - 0.7;
  };
  std::vector<double> data(spec.node_count());
  for (size_t i = 0; i < spec.node_count(); ++i) data[i] = f(spec.node(spec.multi_index(i)));
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    VectorX<double> q(3);
    q << dist(rng), dist(rng), dist(rng);
    CHECK(dhj::interpolate(spec, data, q, Interpolation::Cubic) ==
          doctest::Approx(f(q)).epsilon(1e-12));
  }
}

TEST_CASE("control_hamiltonian examples") {
  auto ocp = scalar_integrator(1);
  CHECK(dhj::control_hamiltonian(ocp, vec1(0.0), vec1(1.0), vec1(2.0)) ==
        doctest::Approx(2.0 - 2.0));

  DiscreteOCP<double> degenerate;
  degenerate.dynamics = [](const VectorX<double>& q, const VectorX<double>&) { return q; };
  degenerate.stage_cost = [](const VectorX<double>&, const VectorX<double>&) { return 0.0; };
  degenerate.horizon = 1;
  degenerate.control_box = box1(-1.0, 1.0);
  const double h1 = dhj::control_hamiltonian(degenerate, vec1(0.7), vec1(0.4), vec1(-1.0));
  const double h2 = dhj::control_hamiltonian(degenerate, vec1(0.7), vec1(0.4), vec1(0.9));
  CHECK(h1 == doctest::Approx(0.7 * 0.4));
  CHECK(h1 == doctest::Approx(h2));

  CHECK(dhj::control_hamiltonian(ocp, vec1(0.3), vec1(0.0), vec1(0.8)) ==
        doctest::Approx(-0.5 * (0.09 + 0.64)));
}

TEST_CASE("maximize_control solves the scalar stationarity condition") {
  const double h = 0.25;
  DiscreteOCP<double> ocp;
  ocp.dynamics = [h](const VectorX<double>& q, const VectorX<double>& u) {
    return (q + h * u).eval();
  };
  ocp.stage_cost = [h](const VectorX<double>&, const VectorX<double>& u) {
    return 0.5 * h * u.squaredNorm();
  };
  ocp.horizon = 1;
  ocp.control_box = box1(-3.0, 3.0);
  // Stationarity p h - h u = 0 gives u* = p.
  const auto r = dhj::maximize_control(ocp, vec1(0.2), vec1(1.3));
  CHECK(r.u(0) == doctest::Approx(1.3).epsilon(1e-8));
  CHECK_FALSE(r.non_concave);
}

TEST_CASE("maximize_control with zero costate minimizes the cost") {
  auto ocp = scalar_integrator(1);
  const auto r = dhj::maximize_control(ocp, vec1(0.4), vec1(0.0));
  CHECK(std::abs(r.u(0)) <= 1e-9);
}

TEST_CASE("maximize_control clamps to the box") {
  const double h = 0.25;
  DiscreteOCP<double> ocp;
  ocp.dynamics = [h](const VectorX<double>& q, const VectorX<double>& u) {
    return (q + h * u).eval();
  };
  ocp.stage_cost = [h](const VectorX<double>&, const VectorX<double>& u) {
    return 0.5 * h * u.squaredNorm();
  };
  ocp.horizon = 1;
  ocp.control_box = box1(-1.0, 1.0);
  // Unconstrained optimum u* = p = 2.5 lies outside the box.
  const auto r = dhj::maximize_control(ocp, vec1(0.0), vec1(2.5));
  CHECK(r.u(0) == doctest::Approx(1.0).epsilon(1e-12));
  // Fine-scan oracle over the box.
  double best = -1e30, best_u = 0.0;
  for (int i = 0; i <= 100000; ++i) {
    const double u = -1.0 + 2.0 * i / 100000.0;
    const double value = dhj::control_hamiltonian(ocp, vec1(0.0), vec1(2.5), vec1(u));
    if (value > best) {
      best = value;
      best_u = u;
    }
  }
  CHECK(r.u(0) == doctest::Approx(best_u).epsilon(1e-4));
}

TEST_CASE("maximize_control breaks ties deterministically") {
  DiscreteOCP<double> flat;
  flat.dynamics = [](const VectorX<double>& q, const VectorX<double>&) { return q; };
  flat.stage_cost = [](const VectorX<double>&, const VectorX<double>&) { return 0.0; };
  flat.horizon = 1;
  // Objective independent of u: every candidate ties. The smallest-norm rule
  // picks the origin when the box contains it.
  flat.control_box = dhj::ControlBox<double>(vec2(-1.0, -1.0), vec2(1.0, 1.0));
  auto r = dhj::maximize_control(flat, vec1(0.7), vec1(0.4));
  CHECK(r.u.lpNorm<Eigen::Infinity>() == 0.0);

  // Off-origin box: norms tie across the low corner face; lexicographic order
  // decides among equal-norm scan candidates.
  flat.control_box = dhj::ControlBox<double>(vec2(0.5, 0.5), vec2(1.5, 1.5));
  r = dhj::maximize_control(flat, vec1(0.7), vec1(0.4));
  CHECK(r.u(0) == 0.5);
  CHECK(r.u(1) == 0.5);
}

TEST_CASE("maximize_control flags a non-concave Hamiltonian") {
  DiscreteOCP<double> ocp;
  ocp.dynamics = [](const VectorX<double>& q, const VectorX<double>& u) {
    return (q + u.squaredNorm() * VectorX<double>::Ones(1)).eval();
  };
  ocp.stage_cost = [](const VectorX<double>&, const VectorX<double>&) { return 0.0; };
  ocp.horizon = 1;
  ocp.control_box = box1(-1.0, 1.0);
  // H = p (q + u^2): convex in u, the interior stationary point is a minimum.
  const auto r = dhj::maximize_control(ocp, vec1(0.0), vec1(1.0));
  CHECK(r.non_concave);
}

TEST_CASE("pontryagin_residual on an analytically solved LQ instance") {
  const auto lq = lq_fixture(6);
  const auto values = dhj::lq_value_analytic(lq);
  const auto feedback = dhj::lq_feedback(lq, values);
  const auto ocp = lq.to_discrete(ControlBox<double>(vec1(-5.0), vec1(5.0)), vec2(0.8, -0.6));

  std::vector<VectorX<double>> states{ocp.initial_state}, controls, costates;
  for (int k = 0; k < lq.horizon; ++k) {
    const VectorX<double> u = -(feedback[size_t(k)].first * states.back()) -
                              feedback[size_t(k)].second;
    controls.push_back(u);
    states.push_back(ocp.dynamics(states.back(), u));
  }
  for (int k = 0; k <= lq.horizon; ++k)
    costates.push_back((-values[size_t(k)].gradient(states[size_t(k)])).eval());

  CHECK(dhj::pontryagin_residual(ocp, states, controls, costates) <= 1e-8);

  // Perturbing one control must break stationarity measurably.
  auto perturbed = controls;
  perturbed[2](0) += 1e-2;
  auto moved_states = states;
  for (int k = 2; k < lq.horizon; ++k)
    moved_states[size_t(k) + 1] = ocp.dynamics(moved_states[size_t(k)], perturbed[size_t(k)]);
  CHECK(dhj::pontryagin_residual(ocp, moved_states, perturbed, costates) >= 1e-3);
}

TEST_CASE("pontryagin_residual vanishes for the drift-free zero-cost problem") {
  DiscreteOCP<double> ocp;
  ocp.dynamics = [](const VectorX<double>& q, const VectorX<double>&) { return q; };
  ocp.stage_cost = [](const VectorX<double>&, const VectorX<double>&) { return 0.0; };
  ocp.horizon = 3;
  ocp.control_box = box1(-1.0, 1.0);
  std::vector<VectorX<double>> states(4, vec1(0.7)), controls(3, vec1(0.0)),
      costates(4, vec1(0.4));
  CHECK(dhj::pontryagin_residual(ocp, states, controls, costates) <= 1e-12);
}

TEST_CASE("one-stage Bellman recursion with zero terminal value") {
  auto ocp = scalar_integrator(1, 0.5);
  GridSpec<double> spec;
  spec.axes = {{-2.5, 2.5, 51}};
  auto zero_terminal = [](const VectorX<double>&) { return 0.0; };
  dhj::BellmanOptions<double> options;
  options.order = Interpolation::Cubic;
  const auto [values, policy] = dhj::bellman_backward<double>(ocp, spec, zero_terminal, {}, options);
  for (double q : {-1.5, -0.3, 0.8}) {
    CHECK(values.value(0, vec1(q)) == doctest::Approx(0.5 * q * q).epsilon(1e-7));
    CHECK(std::abs(policy.control(0, vec1(q))(0)) <= 1e-6);
  }
}

TEST_CASE("one-stage Bellman recursion with quadratic terminal value") {
  auto ocp = scalar_integrator(1, 0.5);
  GridSpec<double> spec;
  spec.axes = {{-2.5, 2.5, 51}};
  auto terminal = [](const VectorX<double>& q) { return 0.5 * q.squaredNorm(); };
  dhj::BellmanOptions<double> options;
  options.order = Interpolation::Cubic;
  const auto [values, policy] = dhj::bellman_backward<double>(ocp, spec, terminal, {}, options);
  // The unconstrained optimum u* = -q/2 stays inside the box for |q| <= 1.
  for (double q : {-1.0, 0.4, 0.9}) {
    CHECK(values.value(0, vec1(q)) == doctest::Approx(0.75 * q * q).epsilon(1e-6));
    CHECK(policy.control(0, vec1(q))(0) == doctest::Approx(-0.5 * q).epsilon(1e-4));
  }
}

TEST_CASE("zero stage cost propagates a constant terminal value") {
  DiscreteOCP<double> ocp;
  ocp.dynamics = [](const VectorX<double>& q, const VectorX<double>& u) {
    return (0.5 * q + 0.1 * u).eval();
  };
  ocp.stage_cost = [](const VectorX<double>&, const VectorX<double>&) { return 0.0; };
  ocp.horizon = 3;
  ocp.control_box = box1(-1.0, 1.0);
  GridSpec<double> spec;
  spec.axes = {{-2.0, 2.0, 21}};
  auto terminal = [](const VectorX<double>&) { return 3.25; };
  const auto [values, policy] = dhj::bellman_backward<double>(ocp, spec, terminal);
  for (int k = 0; k <= 3; ++k)
    for (double q : {-1.0, 0.0, 1.7})
      CHECK(values.value(k, vec1(q)) == doctest::Approx(3.25).epsilon(1e-12));
}

TEST_CASE("bellman_backward reports state escape with context") {
  DiscreteOCP<double> ocp;
  ocp.dynamics = [](const VectorX<double>& q, const VectorX<double>&) {
    return (q.array() + 10.0).matrix().eval();
  };
  ocp.stage_cost = [](const VectorX<double>&, const VectorX<double>&) { return 0.0; };
  ocp.horizon = 1;
  ocp.control_box = box1(-1.0, 1.0);
  GridSpec<double> spec;
  spec.axes = {{-1.0, 1.0, 5}};
  try {
    dhj::bellman_backward<double>(ocp, spec, [](const VectorX<double>&) { return 0.0; });
    FAIL("expected GridEscapeError");
  } catch (const dhj::GridEscapeError& e) {
    CHECK(std::string(e.what()).find("stage 0") != std::string::npos);
  }
}

TEST_CASE("grid Bellman values match the analytic LQ recursion") {
  const auto lq = lq_fixture(5);
  const auto analytic = dhj::lq_value_analytic(lq);
  const auto feedback = dhj::lq_feedback(lq, analytic);
  // The feedback stays well inside the control box on the grid domain.
  double gain_bound = 0.0;
  for (const auto& fk : feedback) gain_bound = std::max(gain_bound, fk.first.cwiseAbs().sum());
  REQUIRE(gain_bound * 1.0 < 0.5);

  const auto ocp = lq.to_discrete(box1(-0.5, 0.5), vec2(0.4, -0.3));
  const GridSpec<double> spec = square_grid(1.0, 41);
  auto terminal = [&](const VectorX<double>& q) { return lq.terminal.value(q); };
  dhj::BellmanOptions<double> options;
  options.order = Interpolation::Cubic;
  const auto [values, policy] = dhj::bellman_backward<double>(ocp, spec, terminal, {}, options);

  std::mt19937 rng(8);
  std::uniform_real_distribution<double> dist(-0.9, 0.9);
  for (int trial = 0; trial < 100; ++trial) {
    const VectorX<double> q = vec2(dist(rng), dist(rng));
    const int k = trial % 5;
    CHECK(values.value(k, q) ==
          doctest::Approx(analytic[size_t(k)].value(q)).epsilon(1e-3));
  }
}

TEST_CASE("dynamic-programming principle at grid nodes") {
  const auto lq = lq_fixture(4);
  const auto ocp = lq.to_discrete(box1(-0.5, 0.5), vec2(0.4, -0.3));
  const GridSpec<double> spec = square_grid(1.0, 21);
  dhj::BellmanOptions<double> options;
  options.order = Interpolation::Cubic;
  const auto [values, policy] =
      dhj::bellman_backward<double>(ocp, spec, [&](const VectorX<double>& q) {
        return lq.terminal.value(q);
      }, {}, options);

  std::mt19937 rng(15);
  std::uniform_real_distribution<double> dist(-0.5, 0.5);
  const double tol = 1e-6;
  for (int trial = 0; trial < 60; ++trial) {
    const size_t node = size_t(rng() % spec.node_count());
    const VectorX<double> q = spec.node(spec.multi_index(node));
    const int k = trial % 4;
    const double jk = values.stages[size_t(k)][node];
    for (int sample = 0; sample < 50; ++sample) {
      const VectorX<double> u = vec1(dist(rng));
      const double rhs = values.value(k + 1, ocp.dynamics(q, u)) + ocp.stage_cost(q, u);
      CHECK(jk <= rhs + tol);
    }
    const VectorX<double> u_star = policy.stages[size_t(k)][node];
    const double at_optimum =
        values.value(k + 1, ocp.dynamics(q, u_star)) + ocp.stage_cost(q, u_star);
    CHECK(jk == doctest::Approx(at_optimum).epsilon(1e-9));
  }
}

TEST_CASE("costate_from_value on an analytic quadratic table") {
  GridSpec<double> spec;
  spec.axes = {{-2.0, 2.0, 41}};
  auto f = [](const VectorX<double>& q) { return 0.75 * q.squaredNorm(); };
  const auto grid = grid_from_function(spec, f, 2, Interpolation::Cubic);
  const std::vector<VectorX<double>> traj{vec1(1.0), vec1(0.5), vec1(-0.25)};
  const auto table = dhj::costate_from_value(grid, traj);
  CHECK(table.costates[0](0) == doctest::Approx(-1.5).epsilon(1e-9));
  CHECK(table.costates[1](0) == doctest::Approx(-0.75).epsilon(1e-9));
  CHECK_FALSE(table.one_sided[0]);

  const auto constant = grid_from_function(
      spec, [](const VectorX<double>&) { return 2.0; }, 2, Interpolation::Cubic);
  const auto zero_table = dhj::costate_from_value(constant, traj);
  for (const auto& p : zero_table.costates) CHECK(p.lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("costate_from_value flags boundary proximity") {
  GridSpec<double> spec;
  spec.axes = {{-1.0, 1.0, 11}};
  const auto grid = grid_from_function(
      spec, [](const VectorX<double>& q) { return q.squaredNorm(); }, 1, Interpolation::Cubic);
  const auto table = dhj::costate_from_value(grid, {vec1(-0.99), vec1(0.0)});
  CHECK(table.one_sided[0]);
  CHECK_FALSE(table.one_sided[1]);
}

TEST_CASE("grid costates match the Pontryagin recursion on the LQ fixture") {
  const auto lq = lq_fixture(5);
  const auto analytic = dhj::lq_value_analytic(lq);
  const auto feedback = dhj::lq_feedback(lq, analytic);
  const auto ocp = lq.to_discrete(box1(-0.5, 0.5), vec2(0.4, -0.3));

  std::vector<VectorX<double>> states{ocp.initial_state};
  for (int k = 0; k < lq.horizon; ++k) {
    const VectorX<double> u = -(feedback[size_t(k)].first * states.back()) -
                              feedback[size_t(k)].second;
    states.push_back(ocp.dynamics(states.back(), u));
  }

  // Backward adjoint recursion seeded at the terminal gradient.
  std::vector<VectorX<double>> adjoint(size_t(lq.horizon) + 1);
  adjoint[size_t(lq.horizon)] =
      (-analytic[size_t(lq.horizon)].gradient(states[size_t(lq.horizon)])).eval();
  for (int k = lq.horizon - 1; k >= 0; --k)
    adjoint[size_t(k)] =
        (lq.A.transpose() * adjoint[size_t(k) + 1] - lq.Q * states[size_t(k)]).eval();

  // Analytic value gradients reproduce the recursion to solver precision.
  for (int k = 0; k <= lq.horizon; ++k)
    CHECK((adjoint[size_t(k)] + analytic[size_t(k)].gradient(states[size_t(k)]))
              .lpNorm<Eigen::Infinity>() <= 1e-9);

  // Grid costates agree to interpolation accuracy.
  const GridSpec<double> spec = square_grid(1.0, 41);
  dhj::BellmanOptions<double> options;
  options.order = Interpolation::Cubic;
  const auto [values, policy] =
      dhj::bellman_backward<double>(ocp, spec, [&](const VectorX<double>& q) {
        return lq.terminal.value(q);
      }, {}, options);
  const auto table = dhj::costate_from_value(values, states);
  for (int k = 0; k <= lq.horizon; ++k)
    CHECK((table.costates[size_t(k)] - adjoint[size_t(k)]).lpNorm<Eigen::Infinity>() <= 1e-3);
}

TEST_CASE("rollout under the zero feedback") {
  auto ocp = scalar_integrator(3);
  auto zero = [](int, const VectorX<double>& ) { return VectorX<double>::Zero(1).eval(); };
  const auto out = dhj::rollout<double>(ocp, zero, vec1(0.5), 3);
  CHECK(out.states.size() == 4);
  for (const auto& q : out.states) CHECK(q(0) == doctest::Approx(0.5));
  CHECK(out.total_cost == doctest::Approx(3 * 0.5 * 0.25));

  const auto empty = dhj::rollout<double>(ocp, zero, vec1(0.5), 0);
  CHECK(empty.states.size() == 1);
  CHECK(empty.total_cost == 0.0);
}

TEST_CASE("policy rollout cost matches the value function") {
  const auto lq = lq_fixture(5);
  const auto analytic = dhj::lq_value_analytic(lq);
  const auto ocp = lq.to_discrete(box1(-0.5, 0.5), vec2(0.4, -0.3));
  const GridSpec<double> spec = square_grid(1.0, 41);
  dhj::BellmanOptions<double> options;
  options.order = Interpolation::Cubic;
  const auto [values, policy] =
      dhj::bellman_backward<double>(ocp, spec, [&](const VectorX<double>& q) {
        return lq.terminal.value(q);
      }, {}, options);

  const auto out = dhj::rollout(ocp, policy, ocp.initial_state, lq.horizon);
  const double terminal = lq.terminal.value(out.states.back());
  const double j0 = values.value(0, ocp.initial_state);
  CHECK(out.total_cost + terminal == doctest::Approx(j0).epsilon(2e-3));
  CHECK(out.total_cost + terminal ==
        doctest::Approx(analytic[0].value(ocp.initial_state)).epsilon(2e-3));
}

TEST_CASE("lq_value_analytic one-stage example") {
  LinearQuadraticOCP<double> lq;
  lq.A = MatrixX<double>::Identity(1, 1);
  lq.B = MatrixX<double>::Identity(1, 1);
  lq.Q = MatrixX<double>::Identity(1, 1);
  lq.R = MatrixX<double>::Identity(1, 1);
  lq.horizon = 1;
  lq.terminal = QuadraticGeneratingFunction<double>(MatrixX<double>::Identity(1, 1),
                                                    VectorX<double>::Zero(1), 0.0);
  const auto values = dhj::lq_value_analytic(lq);
  // J^0(q) = (3/4) q^2.
  CHECK(values[0].value(vec1(1.0)) == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(values[0].b.lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(values[0].c == 0.0);
}

TEST_CASE("lq_value_analytic with zero cost is zero") {
  LinearQuadraticOCP<double> lq = lq_fixture(4);
  lq.Q.setZero();
  lq.terminal = QuadraticGeneratingFunction<double>(MatrixX<double>::Zero(2, 2),
                                                    VectorX<double>::Zero(2), 0.0);
  const auto values = dhj::lq_value_analytic(lq);
  for (const auto& v : values) {
    CHECK(v.A.lpNorm<Eigen::Infinity>() == 0.0);
    CHECK(v.b.lpNorm<Eigen::Infinity>() == 0.0);
    CHECK(v.c == 0.0);
  }
}

TEST_CASE("lq_value_analytic rejects a non-convex control subproblem") {
  LinearQuadraticOCP<double> lq = lq_fixture(2);
  lq.R = -MatrixX<double>::Identity(1, 1);
  CHECK_THROWS_AS(dhj::lq_value_analytic(lq), dhj::InvalidArgument);
}

TEST_CASE("cost scaling by a power of two scales the analytic values exactly") {
  const auto lq = lq_fixture(5);
  LinearQuadraticOCP<double> scaled = lq;
  const double lambda = 4.0;
  scaled.Q *= lambda;
  scaled.R *= lambda;
  scaled.terminal = QuadraticGeneratingFunction<double>(lambda * lq.terminal.A,
                                                        lambda * lq.terminal.b,
                                                        lambda * lq.terminal.c);
  const auto base = dhj::lq_value_analytic(lq);
  const auto up = dhj::lq_value_analytic(scaled);
  for (size_t k = 0; k < base.size(); ++k) {
    CHECK((up[k].A - lambda * base[k].A).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK((up[k].b - lambda * base[k].b).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK(up[k].c == lambda * base[k].c);
  }
}

TEST_CASE("cost scaling leaves the grid argmin policy unchanged") {
  const auto lq = lq_fixture(3);
  LinearQuadraticOCP<double> scaled = lq;
  scaled.Q *= 4.0;
  scaled.R *= 4.0;
  scaled.terminal = QuadraticGeneratingFunction<double>(4.0 * lq.terminal.A, 4.0 * lq.terminal.b,
                                                        4.0 * lq.terminal.c);
  const GridSpec<double> spec = square_grid(1.0, 15);
  dhj::BellmanOptions<double> options;
  options.order = Interpolation::Cubic;
  const auto ocp = lq.to_discrete(box1(-0.5, 0.5), vec2(0.4, -0.3));
  const auto ocp_scaled = scaled.to_discrete(box1(-0.5, 0.5), vec2(0.4, -0.3));
  const auto base = dhj::bellman_backward<double>(ocp, spec, [&](const VectorX<double>& q) {
    return lq.terminal.value(q);
  }, {}, options);
  const auto up = dhj::bellman_backward<double>(ocp_scaled, spec, [&](const VectorX<double>& q) {
    return scaled.terminal.value(q);
  }, {}, options);
  for (size_t k = 0; k < base.second.stages.size(); ++k)
    for (size_t i = 0; i < base.second.stages[k].size(); ++i)
      CHECK((base.second.stages[k][i] - up.second.stages[k][i]).lpNorm<Eigen::Infinity>() <=
            1e-9);
}

TEST_CASE("sign bridge: S = S* - J solves the right DHJ equation of the LQ problem") {
  const auto lq = lq_fixture(5);
  const auto values = dhj::lq_value_analytic(lq);
  const VectorX<double> q0 = vec2(0.4, -0.3);
  const double optimal_total = values[0].value(q0);

  std::vector<QuadraticGeneratingFunction<double>> actions;
  for (const auto& v : values) actions.push_back(dhj::action_from_cost_to_go(optimal_total, v));
  const auto seq = dhj::to_sequence(actions);
  const auto ham = dhj::lq_right_hamiltonian(lq);

  std::mt19937 rng(77);
  std::uniform_real_distribution<double> dist(-0.8, 0.8);
  for (int trial = 0; trial < 40; ++trial) {
    const int k = trial % 5;
    const VectorX<double> q = vec2(dist(rng), dist(rng));
    const VectorX<double> q_next = dhj::solve_f_plus(seq, ham, k, q, (lq.A * q).eval());
    CHECK(std::abs(dhj::rdhj_residual(seq, ham, k, q, q_next)) <= 1e-8);
  }
}

TEST_CASE("grid-backed action sequence approximates the analytic one") {
  const auto lq = lq_fixture(4);
  const auto analytic = dhj::lq_value_analytic(lq);
  const auto ocp = lq.to_discrete(box1(-0.5, 0.5), vec2(0.4, -0.3));
  const GridSpec<double> spec = square_grid(1.0, 41);
  dhj::BellmanOptions<double> options;
  options.order = Interpolation::Cubic;
  const auto [values, policy] =
      dhj::bellman_backward<double>(ocp, spec, [&](const VectorX<double>& q) {
        return lq.terminal.value(q);
      }, {}, options);
  const double s_star = values.value(0, ocp.initial_state);
  const auto seq = dhj::action_sequence_from_grid(values, s_star);
  for (double x : {-0.5, 0.0, 0.6}) {
    const VectorX<double> q = vec2(x, -0.2);
    const double expected = s_star - analytic[2].value(q);
    CHECK(seq.value(2, q) == doctest::Approx(expected).epsilon(1e-3));
    const VectorX<double> grad_expected = (-analytic[2].gradient(q)).eval();
    CHECK((seq.gradient(2, q) - grad_expected).lpNorm<Eigen::Infinity>() <= 1e-3);
  }
}

}  // TEST_SUITE
