#pragma once

#include <cmath>
#include <functional>
#include <string>

#include "dhj/core.hpp"

namespace dhj {

/// Symplectic-Euler right discrete Hamiltonian of a mechanical system with
/// potential V: H+(q, p') = q.p' + h (|p'|^2 / 2 + V(q)), so the step reads
/// p' = p - h grad V(q), q' = q + h p'.
template <typename Scalar>
DiscreteHamiltonianRight<Scalar> symplectic_euler_hamiltonian(
    std::function<Scalar(const VectorX<Scalar>&)> potential,
    std::function<VectorX<Scalar>(const VectorX<Scalar>&)> potential_gradient, Scalar h) {
  DiscreteHamiltonianRight<Scalar> ham;
  ham.value = [potential, h](const VectorX<Scalar>& q, const VectorX<Scalar>& p_next) {
    return q.dot(p_next) + h * (Scalar(0.5) * p_next.squaredNorm() + potential(q));
  };
  ham.d1 = [potential_gradient, h](const VectorX<Scalar>& q, const VectorX<Scalar>& p_next) {
    return (p_next + h * potential_gradient(q)).eval();
  };
  ham.d2 = [h](const VectorX<Scalar>& q, const VectorX<Scalar>& p_next) {
    return (q + h * p_next).eval();
  };
  return ham;
}

/// Free particle: V = 0. With h = 1 this is the drift map q' = q + p.
template <typename Scalar = double>
DiscreteHamiltonianRight<Scalar> free_particle_hamiltonian(Scalar h = Scalar(1)) {
  return symplectic_euler_hamiltonian<Scalar>(
      [](const VectorX<Scalar>&) { return Scalar(0); },
      [](const VectorX<Scalar>& q) { return VectorX<Scalar>::Zero(q.size()).eval(); }, h);
}

/// Harmonic oscillator: V = omega^2 |q|^2 / 2.
template <typename Scalar = double>
DiscreteHamiltonianRight<Scalar> harmonic_hamiltonian(Scalar h, Scalar omega = Scalar(1)) {
  return symplectic_euler_hamiltonian<Scalar>(
      [omega](const VectorX<Scalar>& q) { return Scalar(0.5) * omega * omega * q.squaredNorm(); },
      [omega](const VectorX<Scalar>& q) { return (omega * omega * q).eval(); }, h);
}

/// Planar pendulum: V = -sum_i cos(q_i).
template <typename Scalar = double>
DiscreteHamiltonianRight<Scalar> pendulum_hamiltonian(Scalar h) {
  return symplectic_euler_hamiltonian<Scalar>(
      [](const VectorX<Scalar>& q) { return -q.array().cos().sum(); },
      [](const VectorX<Scalar>& q) { return q.array().sin().matrix().eval(); }, h);
}

/// Type-two generating function of the identity map, H+ = q.p'.
template <typename Scalar = double>
DiscreteHamiltonianRight<Scalar> identity_right_hamiltonian() {
  DiscreteHamiltonianRight<Scalar> ham;
  ham.value = [](const VectorX<Scalar>& q, const VectorX<Scalar>& p_next) {
    return q.dot(p_next);
  };
  ham.d1 = [](const VectorX<Scalar>&, const VectorX<Scalar>& p_next) { return p_next; };
  ham.d2 = [](const VectorX<Scalar>& q, const VectorX<Scalar>&) { return q; };
  return ham;
}

/// Type-three generating function of the identity map, H- = -p.q'.
template <typename Scalar = double>
DiscreteHamiltonianLeft<Scalar> identity_left_hamiltonian() {
  DiscreteHamiltonianLeft<Scalar> ham;
  ham.value = [](const VectorX<Scalar>& p, const VectorX<Scalar>& q_next) {
    return -p.dot(q_next);
  };
  ham.d1 = [](const VectorX<Scalar>&, const VectorX<Scalar>& q_next) {
    return (-q_next).eval();
  };
  ham.d2 = [](const VectorX<Scalar>& p, const VectorX<Scalar>&) { return (-p).eval(); };
  return ham;
}

/// Built-in right Hamiltonians by name: "free-particle", "harmonic",
/// "pendulum".
template <typename Scalar = double>
DiscreteHamiltonianRight<Scalar> builtin_right_hamiltonian(const std::string& name, Scalar h) {
  if (name == "free-particle") return free_particle_hamiltonian<Scalar>(h);
  if (name == "harmonic") return harmonic_hamiltonian<Scalar>(h);
  if (name == "pendulum") return pendulum_hamiltonian<Scalar>(h);
  throw InvalidArgument("unknown built-in Hamiltonian: " + name);
}

}  // namespace dhj
