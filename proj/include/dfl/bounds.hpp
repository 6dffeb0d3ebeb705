// Copyright 2026 The dfl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Analytic upper bounds on the steady-state average fidelity reachable by
// continuous monitoring plus feedback. Everything here is a pure function of
// the Lindblad jump operators, the target state and the Hamiltonian budget.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "dfl/core.hpp"
#include "dfl/spin_algebra.hpp"

namespace dfl::bounds {

using spin::StateVector;

struct LindbladModel {
  std::vector<ComplexMatrix> jump_ops;  // rates absorbed: c_j = sqrt(rate) * L_j
  StateVector target;

  LindbladModel(std::vector<ComplexMatrix> ops, StateVector psi)
      : jump_ops(std::move(ops)), target(std::move(psi)) {
    for (const auto& c : jump_ops) {
      require_square(c, "LindbladModel");
      require_same_dim(c.rows(), target.dim(), "LindbladModel");
    }
  }
  Eigen::Index dim() const { return target.dim(); }
};

struct BoundInputs {
  double delta_c_sq = 0.0;
  double a_star = 0.0;
  double b_star = 0.0;
  double delta_e = 0.0;

  void validate() const {
    if (!(delta_c_sq >= 0.0 && a_star >= 0.0 && b_star >= 0.0 && delta_e >= 0.0)) {
      throw DomainError("BoundInputs: all fields must be nonnegative and finite");
    }
  }
};

struct BoundReport {
  BoundInputs inputs;
  double b_qsl = 1.0;
  double b_ky = 1.0;
  std::optional<double> b_d;
  std::vector<std::string> notes;

  /// B_D <= B_QSL <= B_KY within `slack`.
  bool hierarchy_holds(double slack = 1e-12) const {
    if (b_qsl > b_ky + slack) return false;
    if (b_d && *b_d > b_qsl + slack) return false;
    return true;
  }
};

namespace detail {
inline double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

inline ComplexMatrix projector_orthogonal(const StateVector& psi) {
  const auto d = psi.dim();
  return ComplexMatrix::Identity(d, d) - psi.projector();
}
}  // namespace detail

/// Sum over jump operators of <c^dag c> - |<c>|^2 in the target.
inline double delta_c_squared(const LindbladModel& model) {
  double total = 0.0;
  for (const auto& c : model.jump_ops) total += spin::variance(c, model.target);
  return total;
}

/// X_A = sum_j c_j^dag |psi><psi| c_j.
inline ComplexMatrix x_a_operator(const LindbladModel& model) {
  const auto d = model.dim();
  ComplexMatrix xa = ComplexMatrix::Zero(d, d);
  const ComplexMatrix proj = model.target.projector();
  for (const auto& c : model.jump_ops) xa += c.adjoint() * proj * c;
  return xa;
}

/// X_B = sum_j (2 c_j^dag |psi><psi| c_j - c_j^dag c_j).
inline ComplexMatrix x_b_operator(const LindbladModel& model) {
  const auto d = model.dim();
  ComplexMatrix xb = ComplexMatrix::Zero(d, d);
  const ComplexMatrix proj = model.target.projector();
  for (const auto& c : model.jump_ops) xb += 2.0 * c.adjoint() * proj * c - c.adjoint() * c;
  return xb;
}

/// Operator norm of Q X_A Q (largest eigenvalue; the matrix is PSD).
inline double a_star(const LindbladModel& model) {
  const ComplexMatrix q = detail::projector_orthogonal(model.target);
  ComplexMatrix qxq = q * x_a_operator(model) * q;
  qxq = 0.5 * (qxq + qxq.adjoint());
  return std::max(0.0, spin::hermitian_eigensystem(qxq).values[0]);
}

/// Standard deviation of X_B in the target.
inline double b_star(const LindbladModel& model) {
  return std::sqrt(spin::variance(x_b_operator(model), model.target));
}

/// Steady-state root of the fidelity-rate bound. Returns 1 for all-zero inputs.
inline double qsl_bound(const BoundInputs& in) {
  in.validate();
  const double a = in.a_star;
  const double c2 = in.delta_c_sq;
  const double drive = in.b_star + 2.0 * in.delta_e;
  const double denom = 2.0 * ((a + c2) * (a + c2) + drive * drive);
  if (denom == 0.0) return 1.0;
  const double numer = 2.0 * a * (a + c2) + drive * (drive + std::sqrt(4.0 * a * c2 + drive * drive));
  return detail::clamp01(numer / denom);
}

/// Right-hand side of the fidelity-rate inequality at average fidelity f.
inline double qsl_fidelity_rate(double f, const BoundInputs& in) {
  if (!(f >= 0.0 && f <= 1.0)) throw DomainError("qsl_fidelity_rate: f outside [0,1]");
  in.validate();
  return (in.b_star + 2.0 * in.delta_e) * std::sqrt(std::max(0.0, f - f * f)) - f * in.delta_c_sq +
         (1.0 - f) * in.a_star;
}

/// Sum_j (<c_j c_j^dag> + sqrt(<(c_j^dag c_j)^2>)), the environment constant of
/// the Kobayashi-Yamamoto rate inequality.
inline double ky_environment_constant(const LindbladModel& model) {
  const ComplexVector& psi = model.target.amplitudes();
  double k = 0.0;
  for (const auto& c : model.jump_ops) {
    const ComplexVector cdag_psi = c.adjoint() * psi;
    const ComplexVector cdc_psi = c.adjoint() * (c * psi);
    k += cdag_psi.squaredNorm() + std::sqrt(cdc_psi.squaredNorm());
  }
  return k;
}

/// Steady state of the Kobayashi-Yamamoto rate inequality,
/// 0 = -dc^2 + sqrt(1-F) (2 dE + sqrt(2) K), solved as F = 1 - s^2.
inline double ky_bound(const LindbladModel& model, double delta_e) {
  if (!(delta_e >= 0.0)) throw DomainError("ky_bound: delta_e must be >= 0");
  const double c2 = delta_c_squared(model);
  if (c2 == 0.0) return 1.0;
  const double rate = 2.0 * delta_e + std::sqrt(2.0) * ky_environment_constant(model);
  if (rate == 0.0) return 0.0;
  const double s = c2 / rate;
  return detail::clamp01(1.0 - s * s);
}

inline BoundInputs bound_inputs(const LindbladModel& model, double delta_e) {
  BoundInputs in;
  in.delta_c_sq = delta_c_squared(model);
  in.a_star = a_star(model);
  in.b_star = b_star(model);
  in.delta_e = delta_e;
  return in;
}

// ---------------------------------------------------------------------------
// Dicke specialization: c1 = sqrt(kappa) Jz, c2 = sqrt(gamma) J-.

/// Hamiltonian-variance budget of u (cos t Jx + sin t Jy), |u| <= u_max, in |l_t, m_t>.
inline double dicke_delta_e(double u_max, HalfInt l_t, HalfInt m_t) {
  if (!(u_max >= 0.0)) throw DomainError("dicke_delta_e: u_max must be >= 0");
  spin::require_in_multiplet(l_t, m_t, "dicke_delta_e");
  const double l = l_t.value();
  const double m = m_t.value();
  return (u_max / std::sqrt(2.0)) * std::sqrt(l * (l + 1.0) - m * m);
}

/// Transfer-rate balance bound for collective drives linear in J.
inline double dicke_bound(HalfInt l_t, HalfInt m_t, double gamma, double u_max) {
  spin::require_in_multiplet(l_t, m_t, "dicke_bound");
  if (!(gamma >= 0.0)) throw DomainError("dicke_bound: gamma must be >= 0");
  if (!(u_max >= 0.0)) throw DomainError("dicke_bound: u_max must be >= 0");
  if (m_t == -l_t || gamma == 0.0) return 1.0;
  if (u_max == 0.0) return 0.0;
  const double g = gamma / u_max;
  // sum_{m=-l}^{m_t-1} prod_{k=m}^{m_t-1} (h_k g)^2, accumulated from the top down.
  double sum = 0.0;
  double prod = 1.0;
  for (HalfInt k = m_t - 1; k >= -l_t; k = k - 1) {
    const double hk = spin::ladder_coefficient(l_t, k);
    prod *= (hk * g) * (hk * g);
    sum += prod;
  }
  return detail::clamp01(1.0 / (1.0 + sum));
}

struct DickeModel {
  spin::CollectiveSpinSystem system;
  HalfInt m_target;
  double gamma = 0.0;
  double kappa = 0.0;

  LindbladModel lindblad() const {
    return LindbladModel({std::sqrt(kappa) * system.jz, std::sqrt(gamma) * system.jminus},
                         system.dicke_state(m_target));
  }
};

inline DickeModel dicke_model(int n_atoms, HalfInt m_target, double gamma, double kappa) {
  if (!(gamma >= 0.0 && kappa >= 0.0)) throw DomainError("dicke_model: rates must be >= 0");
  DickeModel dm{spin::build_system(n_atoms), m_target, gamma, kappa};
  spin::require_in_multiplet(dm.system.l, m_target, "dicke_model");
  return dm;
}

/// Every analytic bound for a Dicke target, evaluated through the general
/// operator machinery (not the Dicke closed forms).
inline BoundReport dicke_bound_report(const DickeModel& dm, double u_max) {
  const LindbladModel model = dm.lindblad();
  BoundReport r;
  r.inputs = bound_inputs(model, dicke_delta_e(u_max, dm.system.l, dm.m_target));
  r.b_qsl = qsl_bound(r.inputs);
  r.b_ky = ky_bound(model, r.inputs.delta_e);
  r.b_d = dicke_bound(dm.system.l, dm.m_target, dm.gamma, u_max);
  r.notes.emplace_back("b_ky: steady-state root of the KY rate inequality, F = 1 - s^2");
  if (r.inputs.delta_c_sq == 0.0 && r.inputs.a_star == 0.0 && r.inputs.b_star == 0.0 &&
      r.inputs.delta_e == 0.0) {
    r.notes.emplace_back("b_qsl: degenerate all-zero inputs, every fidelity is stationary");
  }
  return r;
}

/// Closed form for the maximally excited target |N/2, N/2>.
inline double qsl_bound_max_excited(int n_atoms, double gamma_over_u) {
  return 1.0 / (1.0 + n_atoms * gamma_over_u * gamma_over_u);
}

/// Closed form for the entangled target |N/2, 0> (even N).
inline double qsl_bound_entangled(int n_atoms, double gamma_over_u) {
  return 0.5 + 1.0 / std::sqrt(4.0 + 2.0 * n_atoms * (n_atoms + 2.0) * gamma_over_u * gamma_over_u);
}

// ---------------------------------------------------------------------------
// Markovian (photocurrent-proportional) feedback.

/// Effective Hamiltonian budget (||c + c^dag||_op + 1/sqrt(window)) * dF.
inline double markovian_effective_delta_e(double delta_f, const ComplexMatrix& jump_op,
                                          double window) {
  if (!(window > 0.0)) throw DomainError("markovian_effective_delta_e: window must be > 0");
  if (!(delta_f >= 0.0)) throw DomainError("markovian_effective_delta_e: delta_f must be >= 0");
  require_square(jump_op, "markovian_effective_delta_e");
  const double norm = spin::operator_norm(jump_op + jump_op.adjoint());
  const double inv_sqrt = std::isinf(window) ? 0.0 : 1.0 / std::sqrt(window);
  return (norm + inv_sqrt) * delta_f;
}

/// Largest window compatible with infidelity epsilon: eps * (2 dF / dc^2)^2.
inline double markovian_window_limit(double epsilon, double delta_f, double delta_c_sq) {
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw DomainError("markovian_window_limit: epsilon in [0,1)");
  if (delta_c_sq == 0.0) return std::numeric_limits<double>::infinity();
  const double r = 2.0 * delta_f / delta_c_sq;
  return epsilon * r * r;
}

/// Lower bound on the mean Hamiltonian strength, sqrt(2/(pi eps)) dc^2.
inline double markovian_strength_limit(double epsilon, double delta_c_sq) {
  if (!(epsilon > 0.0)) throw DomainError("markovian_strength_limit: epsilon must be > 0");
  return std::sqrt(2.0 / (kPi * epsilon)) * delta_c_sq;
}

/// Closed-form lower bound on steady-state infidelity for the damped qubit
/// stabilized by photocurrent feedback with window dt: x / (4 + 8 sqrt(x) + 5x), x = gamma dt.
inline double markovian_qubit_infidelity_bound(double gamma, double window) {
  if (!(gamma >= 0.0 && window >= 0.0)) {
    throw DomainError("markovian_qubit_infidelity_bound: gamma, window must be >= 0");
  }
  const double x = gamma * window;
  return x / (4.0 + 8.0 * std::sqrt(x) + 5.0 * x);
}

/// Same quantity obtained by substituting the effective budget into the
/// A* = B* = 0 form of the QSL bound; differs from the closed form above by
/// constant factors, both are reported.
inline double markovian_qubit_infidelity_substituted(double gamma, double window) {
  if (gamma == 0.0) return 0.0;
  const auto sys = spin::build_system(1);
  const ComplexMatrix c = std::sqrt(gamma) * sys.jminus;
  const double delta_f = 2.0 * std::sqrt(gamma);
  BoundInputs in;
  in.delta_c_sq = gamma;
  in.delta_e = markovian_effective_delta_e(delta_f, c, window);
  return 1.0 - qsl_bound(in);
}

}  // namespace dfl::bounds
