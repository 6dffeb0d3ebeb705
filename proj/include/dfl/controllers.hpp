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

// Feedback laws for collective spin drives
//
//   H = (u/2) (e^{-i theta} J+ + e^{i theta} J-),   |u| <= u_max,
//
// chosen to locally minimize a population cost C = sum_m w_m a_m, and the
// finite-window Markovian (photocurrent-proportional) feedback.
//
// With coherence_m = <m|rho|m+1> the drive contributes
//   dC/dt = u Im(e^{i theta} S),   S = sum_m (w_m - w_{m+1}) h_m conj(coherence_m).

#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "dfl/core.hpp"
#include "dfl/sme_engine.hpp"
#include "dfl/spin_algebra.hpp"

namespace dfl::control {

using spin::CollectiveSpinSystem;
using spin::DensityOperator;
using spin::StateVector;

struct ControlAction {
  double u = 0.0;
  double theta = 0.0;
};

enum class PhaseMode { optimized, fixed };

/// Cost weights w_m for m = -l .. l, stored in ascending m.
class CostWeights {
 public:
  CostWeights(HalfInt l, std::vector<double> w) : l_(l), w_(std::move(w)) {
    if (static_cast<int>(w_.size()) != l_.twice() + 1) throw DomainError("CostWeights: expected 2l+1 entries");
    for (double x : w_) {
      if (!std::isfinite(x)) throw DomainError("CostWeights: non-finite entry");
    }
  }
  HalfInt l() const { return l_; }
  double operator()(HalfInt m) const {
    spin::require_in_multiplet(l_, m, "CostWeights");
    return w_[static_cast<std::size_t>((m.twice() + l_.twice()) / 2)];
  }
  const std::vector<double>& values() const { return w_; }

 private:
  HalfInt l_;
  std::vector<double> w_;
};

/// w_m = |m - m_t|.
inline CostWeights euclidean_weights(HalfInt l_t, HalfInt m_t) {
  spin::require_in_multiplet(l_t, m_t, "euclidean_weights");
  std::vector<double> w;
  for (HalfInt m = -l_t; m <= l_t; m = m + 1) w.push_back(std::abs(m.value() - m_t.value()));
  return CostWeights(l_t, std::move(w));
}

/// w_m = -1 at m_t, 0 elsewhere: C = -F.
inline CostWeights infidelity_weights(HalfInt l_t, HalfInt m_t) {
  spin::require_in_multiplet(l_t, m_t, "infidelity_weights");
  std::vector<double> w;
  for (HalfInt m = -l_t; m <= l_t; m = m + 1) w.push_back(m == m_t ? -1.0 : 0.0);
  return CostWeights(l_t, std::move(w));
}

/// Populations a_m and coherences <m|rho|m+1>, both in ascending m
/// (coherences has 2l entries, the last being m = l-1).
struct DickeAmplitudes {
  HalfInt l;
  std::vector<double> populations;
  std::vector<Complex> coherences;

  double population(HalfInt m) const { return populations.at(static_cast<std::size_t>((m.twice() + l.twice()) / 2)); }
  Complex coherence(HalfInt m) const { return coherences.at(static_cast<std::size_t>((m.twice() + l.twice()) / 2)); }
};

inline DickeAmplitudes dicke_amplitudes(const ComplexMatrix& rho) {
  require_square(rho, "dicke_amplitudes");
  const int d = static_cast<int>(rho.rows());
  DickeAmplitudes out{HalfInt::from_twice(d - 1), {}, {}};
  // Ascending m runs over basis indices d-1 .. 0.
  for (int i = d - 1; i >= 0; --i) out.populations.push_back(rho(i, i).real());
  for (int i = d - 1; i >= 1; --i) out.coherences.push_back(rho(i, i - 1));
  return out;
}
inline DickeAmplitudes dicke_amplitudes(const DensityOperator& rho) { return dicke_amplitudes(rho.matrix()); }
inline DickeAmplitudes dicke_amplitudes(const StateVector& psi) { return dicke_amplitudes(psi.projector()); }

/// S = sum_m (w_m - w_{m+1}) h_m conj(<m|rho|m+1>).
inline Complex steering_sum(const CostWeights& weights, const ComplexMatrix& rho) {
  const int d = static_cast<int>(rho.rows());
  require_same_dim(d, weights.l().twice() + 1, "steering_sum");
  const HalfInt l = weights.l();
  const auto& w = weights.values();
  Complex s = 0.0;
  for (int k = 0; k + 1 < d; ++k) {  // m = -l + k
    const HalfInt m = -l + k;
    const int i = d - 1 - k;           // basis index of m
    const double dw = w[static_cast<std::size_t>(k)] - w[static_cast<std::size_t>(k + 1)];
    if (dw == 0.0) continue;
    s += dw * spin::ladder_coefficient(l, m) * std::conj(rho(i, i - 1));
  }
  return s;
}

/// Rate of change of the cost caused by the drive `a` alone.
inline double cost_rate(const CostWeights& weights, const ComplexMatrix& rho, const ControlAction& a) {
  return a.u * (std::exp(kI * a.theta) * steering_sum(weights, rho)).imag();
}

/// Locally cost-minimizing drive. S = 0 gives u = 0.
inline ControlAction local_cost_action(Complex s, double u_max, PhaseMode mode) {
  if (!(u_max >= 0.0)) throw DomainError("local_cost_controller: u_max must be >= 0");
  if (mode == PhaseMode::optimized) {
    if (s == Complex(0.0)) return {0.0, 0.0};
    return {u_max, -0.5 * kPi - std::arg(s)};
  }
  const double re = s.real();
  return {re > 0.0 ? -u_max : (re < 0.0 ? u_max : 0.0), 0.5 * kPi};
}

inline ControlAction local_cost_controller(const CostWeights& weights, const ComplexMatrix& rho, double u_max,
                                           PhaseMode mode) {
  return local_cost_action(steering_sum(weights, rho), u_max, mode);
}
inline ControlAction local_cost_controller(const CostWeights& weights, const DensityOperator& rho, double u_max,
                                           PhaseMode mode) {
  return local_cost_controller(weights, rho.matrix(), u_max, mode);
}

/// (u/2)(e^{-i theta} J+ + e^{i theta} J-).
inline void control_hamiltonian(const CollectiveSpinSystem& sys, const ControlAction& a, ComplexMatrix& out) {
  const Complex e = std::exp(-kI * a.theta);
  out = (0.5 * a.u) * (e * sys.jplus + std::conj(e) * sys.jminus);
}
inline ComplexMatrix control_hamiltonian(const CollectiveSpinSystem& sys, const ControlAction& a) {
  ComplexMatrix h;
  control_hamiltonian(sys, a, h);
  return h;
}

/// Qubit bang-bang law in the basis (|e>, |g>): u = -sgn(Tr rho sigma_x) u_max, H = u sigma_y / 2.
inline double qubit_bang_bang(const ComplexMatrix& rho, double u_max) {
  require_same_dim(rho.rows(), 2, "qubit_bang_bang");
  const double sx = 2.0 * rho(0, 1).real();
  return sx > 0.0 ? -u_max : (sx < 0.0 ? u_max : 0.0);
}

/// State-based controller: OP (optimized phase) or FP (fixed phase) for any weights.
class LocalCostController {
 public:
  LocalCostController(CollectiveSpinSystem sys, CostWeights weights, double u_max, PhaseMode mode)
      : sys_(std::move(sys)), weights_(std::move(weights)), u_max_(u_max), mode_(mode) {
    require_same_dim(sys_.dim(), weights_.l().twice() + 1, "LocalCostController");
    if (!(u_max_ >= 0.0)) throw DomainError("LocalCostController: u_max must be >= 0");
    h_ = ComplexMatrix::Zero(sys_.dim(), sys_.dim());
  }

  const ComplexMatrix& hamiltonian(const sme::Observation& obs) {
    last_ = local_cost_controller(weights_, obs.rho, u_max_, mode_);
    control_hamiltonian(sys_, last_, h_);
    return h_;
  }
  void reset() { last_ = {}; }

  const ControlAction& last_action() const { return last_; }
  PhaseMode mode() const { return mode_; }

 private:
  CollectiveSpinSystem sys_;
  CostWeights weights_;
  double u_max_;
  PhaseMode mode_;
  ControlAction last_;
  ComplexMatrix h_;
};

/// H = bare_h + f_op * (dy summed over the previous window) / window. The
/// window is a whole number of steps; the first window runs with bare_h.
class MarkovianController {
 public:
  MarkovianController(ComplexMatrix f_op, double window, ComplexMatrix bare_h, std::size_t channel = 0)
      : f_(std::move(f_op)), bare_(std::move(bare_h)), window_(window), channel_(channel) {
    require_square(f_, "MarkovianController");
    require_same_dim(f_.rows(), bare_.rows(), "MarkovianController");
    if (!is_hermitian(f_, tol::kStructural) || !is_hermitian(bare_, tol::kStructural)) {
      throw DomainError("MarkovianController: f_op and bare_h must be Hermitian");
    }
    if (!(window_ > 0.0)) throw DomainError("MarkovianController: window must be > 0");
    h_ = bare_;
  }

  /// Steps per window for step size dt; throws when window < dt.
  long steps_per_window(double dt) const {
    if (window_ < dt * (1.0 - 1e-9)) {
      throw DomainError("MarkovianController: window " + std::to_string(window_) + " shorter than dt " +
                        std::to_string(dt));
    }
    return std::max(1L, std::lround(window_ / dt));
  }

  const ComplexMatrix& hamiltonian(const sme::Observation& obs) {
    if (obs.step == 0) {
      k_ = steps_per_window(obs.dt);
      reset();
      return h_;
    }
    if (channel_ >= obs.last_dy.size()) throw DomainError("MarkovianController: photocurrent channel missing");
    acc_ += obs.last_dy[channel_];
    if (obs.step % k_ == 0) {
      last_signal_ = acc_ / (static_cast<double>(k_) * obs.dt);
      h_ = bare_ + last_signal_ * f_;
      acc_ = 0.0;
    }
    return h_;
  }
  void reset() {
    acc_ = 0.0;
    last_signal_ = 0.0;
    h_ = bare_;
  }

  double last_signal() const { return last_signal_; }
  double window() const { return window_; }

 private:
  ComplexMatrix f_, bare_, h_;
  double window_;
  std::size_t channel_;
  long k_ = 1;
  double acc_ = 0.0;
  double last_signal_ = 0.0;
};

/// Qubit protocol stabilizing |e> against damping sqrt(gamma) sigma_-: F = -sqrt(gamma) sigma_y.
inline MarkovianController markovian_qubit_controller(double gamma, double window) {
  if (!(gamma >= 0.0)) throw DomainError("markovian_qubit_controller: gamma must be >= 0");
  const CollectiveSpinSystem q = spin::build_system(1);
  return MarkovianController(-std::sqrt(gamma) * (2.0 * q.jy), window, ComplexMatrix::Zero(2, 2));
}

}  // namespace dfl::control
