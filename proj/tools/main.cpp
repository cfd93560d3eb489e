#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cli_util.hpp"
#include "dhj/dhj.hpp"

namespace dhjcli {

namespace fs = std::filesystem;

using dhj::DiscreteHamiltonianLeft;
using dhj::DiscreteHamiltonianRight;
using dhj::MatrixX;
using dhj::PhasePoint;
using dhj::QuadraticGeneratingFunction;
using dhj::QuadraticLeftHamiltonian;
using dhj::VectorX;

struct Options {
  std::string config;
  std::string out = ".";
  int threads = 1;  // 0 = auto
  bool verbose = false;
};

// ---------------------------------------------------------------------------
// Shared parsing
// ---------------------------------------------------------------------------

QuadraticLeftHamiltonian<double> parse_quadratic(const json& j, const std::string& path) {
  return QuadraticLeftHamiltonian<double>(require_matrix(j, "M", path), require_matrix(j, "L", path),
                                          require_matrix(j, "K", path));
}

dhj::GridSpec<double> parse_grid(const json& j, const std::string& path) {
  dhj::GridSpec<double> spec;
  const Eigen::VectorXd lo = require_vector(j, "lo", path);
  const Eigen::VectorXd hi = require_vector(j, "hi", path);
  const json& points = require(j, "points", path);
  if (lo.size() != hi.size() || size_t(lo.size()) != points.size())
    throw ConfigError("grid fields '" + path + "lo/hi/points' must have equal lengths");
  for (Eigen::Index a = 0; a < lo.size(); ++a)
    spec.axes.push_back({lo(a), hi(a), points[size_t(a)].get<int>()});
  return spec;
}

dhj::ControlBox<double> parse_box(const json& j, const std::string& path) {
  return dhj::ControlBox<double>(require_vector(j, "lo", path), require_vector(j, "hi", path));
}

dhj::Interpolation parse_interpolation(const json& j) {
  const std::string name = j.value("interpolation", std::string("multilinear"));
  if (name == "multilinear") return dhj::Interpolation::Multilinear;
  if (name == "cubic") return dhj::Interpolation::Cubic;
  throw ConfigError("field 'interpolation' must be 'multilinear' or 'cubic'");
}

dhj::NewtonConfig<double> parse_newton(const json& j) {
  dhj::NewtonConfig<double> cfg;
  if (!j.contains("newton")) return cfg;
  const json& n = j.at("newton");
  if (n.contains("abs_tol")) cfg.abs_tol = n.at("abs_tol").get<double>();
  if (n.contains("max_iter")) cfg.max_iter = n.at("max_iter").get<int>();
  if (n.contains("fd_step_scale")) cfg.fd_step_scale = n.at("fd_step_scale").get<double>();
  if (!(cfg.abs_tol > 0.0)) throw ConfigError("field 'newton.abs_tol' must be > 0");
  if (cfg.max_iter < 1) throw ConfigError("field 'newton.max_iter' must be >= 1");
  return cfg;
}

std::function<double(const VectorX<double>&)> parse_terminal(const json& j,
                                                             const std::string& path) {
  const std::string kind = require_string(j, "kind", path);
  if (kind == "zero") return [](const VectorX<double>&) { return 0.0; };
  if (kind == "quadratic") {
    const QuadraticGeneratingFunction<double> q(require_matrix(j, "A", path),
                                                require_vector(j, "b", path), j.value("c", 0.0));
    return [q](const VectorX<double>& x) { return q.value(x); };
  }
  if (kind == "penalty") {
    const Eigen::VectorXd target = require_vector(j, "target", path);
    const double mu = j.value("mu", 1e3);
    return dhj::quadratic_penalty_terminal<double>(target, mu);
  }
  throw ConfigError("field '" + path + "kind' must be 'zero', 'quadratic', or 'penalty'");
}

// Time-varying stage-control signal (u(t), v(t)) for the Heisenberg runs.
std::function<VectorX<double>(double)> parse_signal(const json& j, const std::string& path) {
  const std::string kind = require_string(j, "kind", path);
  if (kind == "circular") {
    const double amplitude = j.value("amplitude", 1.0);
    return [amplitude](double t) {
      VectorX<double> u(2);
      u << amplitude * std::cos(t), amplitude * std::sin(t);
      return u;
    };
  }
  if (kind == "constant") {
    VectorX<double> u(2);
    u << require_number(j, "u", path), require_number(j, "v", path);
    return [u](double) { return u; };
  }
  throw ConfigError("field '" + path + "kind' must be 'circular' or 'constant'");
}

std::vector<std::string> phase_header(Eigen::Index n) {
  std::vector<std::string> header{"k"};
  for (Eigen::Index i = 0; i < n; ++i) header.push_back("q" + std::to_string(i));
  for (Eigen::Index i = 0; i < n; ++i) header.push_back("p" + std::to_string(i));
  return header;
}

// ---------------------------------------------------------------------------
// integrate
// ---------------------------------------------------------------------------

int run_integrate(const Options& opt) {
  const json cfg = load_config(opt.config);
  const json& system = require(cfg, "system", "");
  const std::string kind = require_string(system, "kind", "system.");
  const Eigen::VectorXd q0 = require_vector(cfg, "q0", "");
  const Eigen::VectorXd p0 = require_vector(cfg, "p0", "");
  const int steps = require_int(cfg, "N", "");
  if (steps < 0) throw ConfigError("field 'N' must be >= 0");
  const auto ncfg = parse_newton(cfg);
  const PhasePoint<double> z0(q0, p0);

  dhj::Trajectory<double> traj;
  double max_residual = 0.0;
  double defect = 0.0;
  if (kind == "quadratic") {
    const auto sys = parse_quadratic(system, "system.");
    const std::string side = cfg.value("side", std::string("left"));
    if (side == "left") {
      const auto ham = dhj::left_hamiltonian(sys);
      traj = dhj::integrate(ham, z0, steps, ncfg);
      for (int k = 0; k < steps; ++k)
        max_residual = std::max(
            max_residual,
            dhj::left_step_residual(ham, traj.points[size_t(k)], traj.points[size_t(k) + 1]));
      defect = dhj::symplecticity_defect<double>(
          [&](const PhasePoint<double>& z) { return dhj::step_left(ham, z, z.q, ncfg); }, z0);
    } else if (side == "right") {
      const auto ham = dhj::right_hamiltonian(sys);
      traj = dhj::integrate(ham, z0, steps, ncfg);
      for (int k = 0; k < steps; ++k)
        max_residual = std::max(
            max_residual,
            dhj::right_step_residual(ham, traj.points[size_t(k)], traj.points[size_t(k) + 1]));
      defect = dhj::symplecticity_defect<double>(
          [&](const PhasePoint<double>& z) { return dhj::step_right(ham, z, z.p, ncfg); }, z0);
    } else {
      throw ConfigError("field 'side' must be 'left' or 'right'");
    }
  } else if (kind == "builtin") {
    const std::string name = require_string(system, "name", "system.");
    const double h = require_number(system, "h", "system.");
    const auto ham = dhj::builtin_right_hamiltonian<double>(name, h);
    traj = dhj::integrate(ham, z0, steps, ncfg);
    for (int k = 0; k < steps; ++k)
      max_residual = std::max(
          max_residual,
          dhj::right_step_residual(ham, traj.points[size_t(k)], traj.points[size_t(k) + 1]));
    defect = dhj::symplecticity_defect<double>(
        [&](const PhasePoint<double>& z) { return dhj::step_right(ham, z, z.p, ncfg); }, z0);
  } else {
    throw ConfigError("field 'system.kind' must be 'quadratic' or 'builtin'");
  }

  std::vector<std::vector<Cell>> rows;
  for (size_t k = 0; k < traj.points.size(); ++k) {
    std::vector<Cell> row{double(k)};
    for (Eigen::Index i = 0; i < q0.size(); ++i) row.push_back(traj.points[k].q(i));
    for (Eigen::Index i = 0; i < q0.size(); ++i) row.push_back(traj.points[k].p(i));
    rows.push_back(std::move(row));
  }
  write_csv(fs::path(opt.out) / "trajectory.csv", phase_header(q0.size()), rows);

  json report;
  report["metadata"] = make_metadata("integrate", opt.config);
  report["max_step_residual"] = max_residual;
  report["symplecticity_defect_at_start"] = defect;
  write_report(fs::path(opt.out) / "report.json", report);
  return 0;
}

// ---------------------------------------------------------------------------
// riccati
// ---------------------------------------------------------------------------

int run_riccati(const Options& opt) {
  const json cfg = load_config(opt.config);
  const auto sys = parse_quadratic(cfg, "");
  const Eigen::MatrixXd a0 = require_matrix(cfg, "A0", "");
  const Eigen::VectorXd b0 = require_vector(cfg, "b0", "");
  const double c0 = require_number(cfg, "c0", "");
  const int steps = require_int(cfg, "steps", "");
  if (steps < 1) throw ConfigError("field 'steps' must be >= 1");

  const QuadraticGeneratingFunction<double> s0(a0, b0, c0);
  const auto iterates = dhj::riccati_iterate(s0, sys, steps);

  const Eigen::Index n = sys.dim();
  std::vector<std::string> header{"k"};
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < n; ++c) header.push_back("A" + std::to_string(r) + std::to_string(c));
  for (Eigen::Index i = 0; i < n; ++i) header.push_back("b" + std::to_string(i));
  header.push_back("c");

  std::vector<std::vector<Cell>> rows;
  for (int k = 1; k <= steps; ++k) {
    const auto& s = iterates[size_t(k)];
    std::vector<Cell> row{double(k)};
    for (Eigen::Index r = 0; r < n; ++r)
      for (Eigen::Index c = 0; c < n; ++c) row.push_back(s.A(r, c));
    for (Eigen::Index i = 0; i < n; ++i) row.push_back(s.b(i));
    row.push_back(s.c);
    rows.push_back(std::move(row));
  }
  write_csv(fs::path(opt.out) / "riccati.csv", header, rows);

  json report;
  report["metadata"] = make_metadata("riccati", opt.config);
  report["steps"] = steps;
  write_report(fs::path(opt.out) / "report.json", report);
  return 0;
}

// ---------------------------------------------------------------------------
// hj-check
// ---------------------------------------------------------------------------

int run_hj_check(const Options& opt) {
  const json cfg = load_config(opt.config);
  const json& system = require(cfg, "system", "");
  const std::string kind = require_string(system, "kind", "system.");
  const Eigen::VectorXd q0 = require_vector(cfg, "q0", "");
  const Eigen::VectorXd p0 = require_vector(cfg, "p0", "");
  const int steps = require_int(cfg, "N", "");
  if (steps < 0) throw ConfigError("field 'N' must be >= 0");

  DiscreteHamiltonianRight<double> ham;
  if (kind == "quadratic") {
    ham = dhj::right_hamiltonian(parse_quadratic(system, "system."));
  } else if (kind == "builtin") {
    ham = dhj::builtin_right_hamiltonian<double>(require_string(system, "name", "system."),
                                                 require_number(system, "h", "system."));
  } else {
    throw ConfigError("field 'system.kind' must be 'quadratic' or 'builtin'");
  }

  const auto table = dhj::jacobi_solution(ham, PhasePoint<double>(q0, p0), steps, parse_newton(cfg));
  double max_residual = 0.0;
  std::vector<std::vector<Cell>> rows;
  for (int k = 0; k <= steps; ++k) {
    std::vector<Cell> row{double(k)};
    for (Eigen::Index i = 0; i < q0.size(); ++i) row.push_back(table.configurations[size_t(k)](i));
    for (Eigen::Index i = 0; i < q0.size(); ++i) row.push_back(table.momenta[size_t(k)](i));
    row.push_back(table.values[size_t(k)]);
    // Step residual for k -> k+1; the final row has no step and records 0.
    const double residual = k < steps ? dhj::rdhj_residual(table, ham, k) : 0.0;
    max_residual = std::max(max_residual, std::abs(residual));
    row.push_back(residual);
    rows.push_back(std::move(row));
  }

  auto header = phase_header(q0.size());
  header.push_back("S");
  header.push_back("rdhj_residual");
  write_csv(fs::path(opt.out) / "hjcheck.csv", header, rows);

  json report;
  report["metadata"] = make_metadata("hj-check", opt.config);
  report["max_abs_rdhj_residual"] = max_residual;
  write_report(fs::path(opt.out) / "report.json", report);
  return 0;
}

// ---------------------------------------------------------------------------
// bellman / galerkin-bellman
// ---------------------------------------------------------------------------

void write_value_outputs(const Options& opt, const std::string& command,
                         const dhj::DiscreteOCP<double>& ocp, const dhj::GridSpec<double>& spec,
                         const dhj::ValueGrid<double>& values, const dhj::Policy<double>& policy,
                         const json& cfg) {
  const Eigen::Index dims = spec.dim();
  std::vector<std::string> value_header{"stage", "node"};
  for (Eigen::Index a = 0; a < dims; ++a) value_header.push_back("q" + std::to_string(a));
  value_header.push_back("J");

  std::vector<std::vector<Cell>> value_rows;
  for (int k = 0; k < int(values.stages.size()); ++k) {
    for (size_t i = 0; i < spec.node_count(); ++i) {
      const VectorX<double> q = spec.node(spec.multi_index(i));
      std::vector<Cell> row{double(k), double(i)};
      for (Eigen::Index a = 0; a < dims; ++a) row.push_back(q(a));
      row.push_back(values.stages[size_t(k)][i]);
      value_rows.push_back(std::move(row));
    }
  }
  write_csv(fs::path(opt.out) / "values.csv", value_header, value_rows);

  std::vector<std::string> policy_header{"stage", "node"};
  for (Eigen::Index a = 0; a < dims; ++a) policy_header.push_back("q" + std::to_string(a));
  for (Eigen::Index c = 0; c < policy.control_dim; ++c)
    policy_header.push_back("u" + std::to_string(c));

  std::vector<std::vector<Cell>> policy_rows;
  for (int k = 0; k < int(policy.stages.size()); ++k) {
    for (size_t i = 0; i < spec.node_count(); ++i) {
      const VectorX<double> q = spec.node(spec.multi_index(i));
      std::vector<Cell> row{double(k), double(i)};
      for (Eigen::Index a = 0; a < dims; ++a) row.push_back(q(a));
      const VectorX<double>& u = policy.stages[size_t(k)][i];
      for (Eigen::Index c = 0; c < policy.control_dim; ++c) row.push_back(u(c));
      policy_rows.push_back(std::move(row));
    }
  }
  write_csv(fs::path(opt.out) / "policy.csv", policy_header, policy_rows);

  json report;
  report["metadata"] = make_metadata(command, opt.config);
  if (cfg.contains("q0")) {
    const Eigen::VectorXd q0 = require_vector(cfg, "q0", "");
    report["value_at_q0"] = values.value(0, q0);
    const auto out = dhj::rollout(ocp, policy, q0, ocp.horizon);
    report["rollout_cost"] = out.total_cost;
  }
  report["non_concave_stages"] = policy.non_concave;
  write_report(fs::path(opt.out) / "report.json", report);
}

int run_bellman(const Options& opt) {
  const json cfg = load_config(opt.config);
  const json& dynamics = require(cfg, "dynamics", "");
  const std::string kind = require_string(dynamics, "kind", "dynamics.");

  dhj::DiscreteOCP<double> ocp;
  if (kind == "lq") {
    const Eigen::MatrixXd a = require_matrix(dynamics, "A", "dynamics.");
    const Eigen::MatrixXd b = require_matrix(dynamics, "B", "dynamics.");
    const json& cost = require(cfg, "cost", "");
    const Eigen::MatrixXd q_mat = require_matrix(cost, "Q", "cost.");
    const Eigen::MatrixXd r_mat = require_matrix(cost, "R", "cost.");
    ocp.dynamics = [a, b](const VectorX<double>& q, const VectorX<double>& u) {
      return (a * q + b * u).eval();
    };
    ocp.stage_cost = [q_mat, r_mat](const VectorX<double>& q, const VectorX<double>& u) {
      return 0.5 * q.dot(q_mat * q) + 0.5 * u.dot(r_mat * u);
    };
  } else if (kind == "heisenberg-euler") {
    const double h = require_number(dynamics, "h", "dynamics.");
    const auto sys = dhj::heisenberg_system<double>();
    ocp.dynamics = [sys, h](const VectorX<double>& q, const VectorX<double>& u) {
      return (q + h * sys.f(q, u)).eval();
    };
    ocp.stage_cost = [sys, h](const VectorX<double>& q, const VectorX<double>& u) {
      return h * sys.C(q, u);
    };
  } else {
    throw ConfigError("field 'dynamics.kind' must be 'lq' or 'heisenberg-euler'");
  }

  ocp.horizon = require_int(cfg, "N", "");
  if (ocp.horizon < 1) throw ConfigError("field 'N' must be >= 1");
  ocp.control_box = parse_box(require(cfg, "control_box", ""), "control_box.");
  const auto spec = parse_grid(require(cfg, "grid", ""), "grid.");
  const auto terminal = parse_terminal(require(cfg, "terminal", ""), "terminal.");

  dhj::BellmanOptions<double> options;
  options.order = parse_interpolation(cfg);
  options.scan_points = cfg.value("scan_points", 17);
  options.threads = opt.threads;

  const auto [values, policy] =
      dhj::bellman_backward<double>(ocp, spec, terminal, parse_newton(cfg), options);
  write_value_outputs(opt, "bellman", ocp, spec, values, policy, cfg);
  return 0;
}

int run_galerkin_bellman(const Options& opt) {
  const json cfg = load_config(opt.config);
  const std::string system = require_string(cfg, "system", "");
  if (system != "heisenberg") throw ConfigError("field 'system' must be 'heisenberg'");
  const auto sys = dhj::heisenberg_system<double>();

  const std::string tableau = require_string(cfg, "tableau", "");
  dhj::GalerkinTableau<double> tab;
  if (tableau == "euler")
    tab = dhj::euler_tableau<double>();
  else if (tableau == "stormer-verlet")
    tab = dhj::stormer_verlet_tableau<double>();
  else
    throw ConfigError("field 'tableau' must be 'euler' or 'stormer-verlet'");

  const double h = require_number(cfg, "h", "");
  const int horizon = require_int(cfg, "N", "");
  if (horizon < 1) throw ConfigError("field 'N' must be >= 1");
  const auto stage_box = parse_box(require(cfg, "control_box", ""), "control_box.");
  const auto spec = parse_grid(require(cfg, "grid", ""), "grid.");
  const auto terminal = parse_terminal(require(cfg, "terminal", ""), "terminal.");

  const Eigen::VectorXd q0 =
      cfg.contains("q0") ? require_vector(cfg, "q0", "") : Eigen::VectorXd::Zero(3).eval();
  const auto ncfg = parse_newton(cfg);
  auto ocp = dhj::build_docp(sys, tab, h, horizon, stage_box, q0, ncfg);

  dhj::BellmanOptions<double> options;
  options.order = parse_interpolation(cfg);
  options.scan_points = cfg.value("scan_points", 17);
  options.threads = opt.threads;

  const auto [values, policy] = dhj::bellman_backward<double>(ocp, spec, terminal, ncfg, options);
  write_value_outputs(opt, "galerkin-bellman", ocp, spec, values, policy, cfg);
  return 0;
}

// ---------------------------------------------------------------------------
// heisenberg
// ---------------------------------------------------------------------------

int run_heisenberg(const Options& opt) {
  const json cfg = load_config(opt.config);
  const double h = require_number(cfg, "h", "");
  const int steps = require_int(cfg, "steps", "");
  if (steps < 1) throw ConfigError("field 'steps' must be >= 1");
  const Eigen::VectorXd q0 =
      cfg.contains("q0") ? require_vector(cfg, "q0", "") : Eigen::VectorXd::Zero(3).eval();

  const json& controls = require(cfg, "controls", "");
  const std::string kind = require_string(controls, "kind", "controls.");
  const auto tab = dhj::stormer_verlet_tableau<double>();
  std::function<std::pair<VectorX<double>, VectorX<double>>(int)> stage_controls;
  if (kind == "stages") {
    const Eigen::VectorXd u1 = require_vector(controls, "U1", "controls.");
    const Eigen::VectorXd u2 = require_vector(controls, "U2", "controls.");
    stage_controls = [u1, u2](int) { return std::make_pair(u1, u2); };
  } else {
    const auto signal = parse_signal(controls, "controls.");
    const double c0 = tab.nodes(0), c1 = tab.nodes(1);
    stage_controls = [signal, h, c0, c1](int k) {
      return std::make_pair(signal(k * h + c0 * h), signal(k * h + c1 * h));
    };
  }

  const auto sys = dhj::heisenberg_system<double>();
  VectorX<double> q = q0;
  double max_deviation = 0.0;
  std::vector<std::vector<Cell>> rows{{0.0, q(0), q(1), q(2)}};
  for (int k = 0; k < steps; ++k) {
    const auto [u1, u2] = stage_controls(k);
    const VectorX<double> generic = dhj::discrete_dynamics(sys, tab, q, {u1, u2}, h);
    const VectorX<double> closed = dhj::heisenberg_fd_closed_form(q, u1, u2, h);
    max_deviation = std::max(max_deviation, (generic - closed).lpNorm<Eigen::Infinity>());
    q = generic;
    rows.push_back({double(k + 1), q(0), q(1), q(2)});
  }
  write_csv(fs::path(opt.out) / "heisenberg.csv", {"k", "x", "y", "z"}, rows);

  json report;
  report["metadata"] = make_metadata("heisenberg", opt.config);
  report["max_closed_form_deviation"] = max_deviation;
  report["final_state"] = {q(0), q(1), q(2)};
  write_report(fs::path(opt.out) / "report.json", report);
  return 0;
}

// ---------------------------------------------------------------------------
// convergence
// ---------------------------------------------------------------------------

int run_convergence(const Options& opt) {
  const json cfg = load_config(opt.config);
  const std::string system = cfg.value("system", std::string("heisenberg"));
  if (system != "heisenberg") throw ConfigError("field 'system' must be 'heisenberg'");
  const auto sys = dhj::heisenberg_system<double>();

  const double horizon = require_number(cfg, "T", "");
  const int base_steps = require_int(cfg, "base_steps", "");
  const int levels = require_int(cfg, "levels", "");
  if (levels < 3) throw ConfigError("field 'levels' must be >= 3");
  if (base_steps < 1) throw ConfigError("field 'base_steps' must be >= 1");
  const int reference_factor = cfg.value("reference_factor", 64);
  const auto signal = parse_signal(require(cfg, "signal", ""), "signal.");

  const std::string which = require_string(cfg, "tableau", "");
  std::vector<std::pair<std::string, dhj::GalerkinTableau<double>>> tableaus;
  if (which == "euler" || which == "both")
    tableaus.emplace_back("euler", dhj::euler_tableau<double>());
  if (which == "stormer-verlet" || which == "both")
    tableaus.emplace_back("stormer-verlet", dhj::stormer_verlet_tableau<double>());
  if (tableaus.empty())
    throw ConfigError("field 'tableau' must be 'euler', 'stormer-verlet', or 'both'");

  const VectorX<double> q0 =
      cfg.contains("q0") ? require_vector(cfg, "q0", "").eval() : Eigen::VectorXd::Zero(3).eval();

  auto integrate_signal = [&](const dhj::GalerkinTableau<double>& tab, int steps) {
    const double h = horizon / steps;
    VectorX<double> q = q0;
    for (int k = 0; k < steps; ++k) {
      std::vector<VectorX<double>> controls;
      for (int i = 0; i < tab.stages; ++i) controls.push_back(signal(k * h + tab.nodes(i) * h));
      q = dhj::discrete_dynamics(sys, tab, q, controls, h);
    }
    return q;
  };

  // Tiny-step reference with the two-stage tableau.
  const int finest = base_steps << (levels - 1);
  const VectorX<double> reference =
      integrate_signal(dhj::stormer_verlet_tableau<double>(), finest * reference_factor);

  std::vector<std::vector<Cell>> rows;
  json slopes_report;
  for (const auto& [name, tab] : tableaus) {
    std::vector<double> hs, errors;
    for (int level = 0; level < levels; ++level) {
      const int steps = base_steps << level;
      const VectorX<double> q = integrate_signal(tab, steps);
      hs.push_back(horizon / steps);
      errors.push_back((q - reference).lpNorm<Eigen::Infinity>());
    }
    const auto table = dhj::report_convergence(hs, errors);
    json slope_list = json::array();
    for (const auto& row : table) {
      std::vector<Cell> csv_row{Cell(std::string(name)), Cell(row.h), Cell(row.error)};
      if (row.saturated)
        csv_row.emplace_back(std::string("saturated"));
      else if (row.slope)
        csv_row.emplace_back(*row.slope);
      else
        csv_row.emplace_back(std::string(""));
      csv_row.emplace_back(double(row.monotone));
      rows.push_back(std::move(csv_row));
      if (row.slope) slope_list.push_back(*row.slope);
    }
    slopes_report[name] = slope_list;
  }
  write_csv(fs::path(opt.out) / "convergence.csv", {"tableau", "h", "error", "slope", "monotone"},
            rows);

  json report;
  report["metadata"] = make_metadata("convergence", opt.config);
  report["slopes"] = slopes_report;
  write_report(fs::path(opt.out) / "report.json", report);
  return 0;
}

}  // namespace dhjcli

int main(int argc, char** argv) {
  using namespace dhjcli;

  CLI::App app{"Discrete Hamiltonian mechanics and discrete Hamilton-Jacobi toolkit"};
  app.require_subcommand(1);

  Options opt;
  app.add_option("--config", opt.config, "Path to the experiment JSON config")->required();
  app.add_option("--out", opt.out, "Output directory (created if absent)");
  app.add_option("--threads", opt.threads, "Worker threads for grid sweeps (0 = auto)");
  app.add_flag("--verbose", opt.verbose, "Print timing to stderr");

  std::function<int(const Options&)> handler;
  const std::vector<std::tuple<std::string, int (*)(const Options&), std::string>> commands{
      {"integrate", run_integrate, "Integrate discrete Hamilton's equations"},
      {"riccati", run_riccati, "Iterate the discrete Riccati recurrence"},
      {"hj-check", run_hj_check, "Jacobi solution and discrete HJ residuals"},
      {"bellman", run_bellman, "Backward dynamic programming on a value grid"},
      {"galerkin-bellman", run_galerkin_bellman, "Bellman recursion with internal-stage controls"},
      {"heisenberg", run_heisenberg, "Two-stage Heisenberg benchmark run"},
      {"convergence", run_convergence, "Step-halving order study"}};
  for (const auto& [name, fn, blurb] : commands) {
    auto* sub = app.add_subcommand(name, blurb);
    sub->fallthrough();
    sub->callback([&handler, fn = fn]() { handler = fn; });
  }

  CLI11_PARSE(app, argc, argv);

  const auto start = std::chrono::steady_clock::now();
  int status = 0;
  try {
    std::filesystem::create_directories(opt.out);
    status = handler(opt);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const dhj::InvalidArgument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const dhj::Error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  if (opt.verbose) {
    const auto elapsed =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start);
    std::cerr << "wall time: " << elapsed.count() << " ms\n";
  }
  return status;
}
