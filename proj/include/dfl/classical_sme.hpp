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

// Population SDE obtained when every relative phase is aligned with the
// optimal drive (u cos(alpha_m) = -u_max), supported on m = -l .. m_T:
//
//   da_m = T_m - T_{m-1} + dS_m
//   T_m  = -u_max sqrt(a_m a_{m+1}) h_m + gamma a_{m+1} h_m^2
//   dS_m = sqrt(2 gamma) (sqrt(a_m a_{m+1}) h_m - a_m |<J->|) dw_-
//        + 2 sqrt(kappa) a_m (m - <Jz>) dw_z
//
// The drive phase never appears, so nothing here takes one.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dfl/core.hpp"
#include "dfl/parallel.hpp"
#include "dfl/random.hpp"
#include "dfl/sme_engine.hpp"
#include "dfl/spin_algebra.hpp"

namespace dfl::classical {

/// Populations a_m for m = -l .. m_T in ascending m.
struct PopulationState {
  HalfInt l;
  HalfInt m_target;
  std::vector<double> a;

  int levels() const { return (m_target.twice() + l.twice()) / 2 + 1; }
  HalfInt m_of(int k) const { return -l + k; }
  double at(HalfInt m) const { return a.at(static_cast<std::size_t>((m.twice() + l.twice()) / 2)); }
  double target_population() const { return a.back(); }

  void validate(double tolerance = 1e-9) const {
    spin::require_in_multiplet(l, m_target, "PopulationState");
    if (static_cast<int>(a.size()) != levels()) throw DomainError("PopulationState: wrong number of levels");
    double sum = 0.0;
    for (double x : a) {
      if (!(x >= 0.0)) throw DomainError("PopulationState: negative or NaN population");
      sum += x;
    }
    if (std::abs(sum - 1.0) > tolerance) throw DomainError("PopulationState: populations do not sum to 1");
  }
};

/// Handling of a negative Euler overshoot before renormalization. Clamping to
/// zero makes the level absorbing: every term feeding a_m carries a factor
/// sqrt(a_m) or a_m. Reflection keeps the level alive, as the continuous
/// dynamics does.
enum class BoundaryRule { reflect, clamp };

enum class InitialProfile {
  coherent_equator,  // |<l,m|theta=pi/2>|^2 truncated to m <= m_T
  uniform,           // flat over m <= m_T
  random_coherent,   // per realization, direction uniform on the sphere, truncated to m <= m_T
};

struct ClassicalConfig {
  double gamma = 0.0;
  double kappa = 0.0;
  double u_max = 1.0;
  double dt = 1e-3;
  double t_final = 10.0;
  double burn_in = -1.0;  // negative: t_final / 2
  int n_realizations = 1000;
  std::uint64_t master_seed = 1;
  int record_stride = 100;
  InitialProfile initial = InitialProfile::coherent_equator;
  BoundaryRule boundary = BoundaryRule::reflect;

  double effective_burn_in() const { return burn_in < 0.0 ? 0.5 * t_final : burn_in; }
  long n_steps() const { return std::lround(t_final / dt); }

  void validate() const {
    if (!(dt > 0.0) || !(t_final > 0.0)) throw DomainError("ClassicalConfig: dt and t_final must be > 0");
    if (!(gamma >= 0.0 && kappa >= 0.0 && u_max >= 0.0)) throw DomainError("ClassicalConfig: rates must be >= 0");
    if (n_realizations < 2) throw DomainError("ClassicalConfig: n_realizations must be >= 2");
    if (record_stride < 1) throw DomainError("ClassicalConfig: record_stride must be >= 1");
    if (effective_burn_in() > t_final) throw DomainError("ClassicalConfig: burn_in exceeds t_final");
  }
};

inline void require_transfer_index(const PopulationState& p, HalfInt m) {
  if (m < -p.l || !(m < p.m_target)) {
    throw DomainError("transfer_rate: m=" + m.str() + " outside [-l, m_T - 1]");
  }
}

/// Net rate from level m+1 down into level m.
inline double transfer_rate(const PopulationState& p, HalfInt m, double gamma, double u_max) {
  require_transfer_index(p, m);
  const double am = p.at(m);
  const double ap = p.at(m + 1);
  const double h = spin::ladder_coefficient(p.l, m);
  return -u_max * std::sqrt(am * ap) * h + gamma * ap * h * h;
}

namespace detail {

// Per-level ladder coefficients h_m, m = -l .. m_T - 1.
inline std::vector<double> ladder_table(HalfInt l, HalfInt m_t) {
  std::vector<double> h;
  for (HalfInt m = -l; m < m_t; m = m + 1) h.push_back(spin::ladder_coefficient(l, m));
  return h;
}

}  // namespace detail

/// |<J->| = sum_k sqrt(a_k a_{k+1}) h_k over the support, and <Jz>.
inline std::pair<double, double> aligned_moments(const PopulationState& p) {
  double jm = 0.0, jz = 0.0;
  const int n = p.levels();
  for (int k = 0; k < n; ++k) {
    jz += p.a[k] * p.m_of(k).value();
    if (k + 1 < n) jm += std::sqrt(p.a[k] * p.a[k + 1]) * spin::ladder_coefficient(p.l, p.m_of(k));
  }
  return {jm, jz};
}

inline double stochastic_increment(const PopulationState& p, HalfInt m, double gamma, double kappa,
                                   double dw_minus, double dw_z) {
  spin::require_in_multiplet(p.l, m, "stochastic_increment");
  if (m > p.m_target) throw DomainError("stochastic_increment: m above the target level");
  const auto [jm, jz] = aligned_moments(p);
  const double am = p.at(m);
  const double up = m < p.m_target ? std::sqrt(am * p.at(m + 1)) * spin::ladder_coefficient(p.l, m) : 0.0;
  return std::sqrt(2.0 * gamma) * (up - am * jm) * dw_minus + 2.0 * std::sqrt(kappa) * am * (m.value() - jz) * dw_z;
}

/// Allocation-free stepper; also tracks the largest negative overshoot seen.
class ClassicalStepper {
 public:
  ClassicalStepper(HalfInt l, HalfInt m_t, double gamma, double kappa, double u_max,
                   BoundaryRule boundary = BoundaryRule::reflect)
      : l_(l), m_t_(m_t), gamma_(gamma), kappa_(kappa), u_max_(u_max), boundary_(boundary),
        h_(detail::ladder_table(l, m_t)) {
    spin::require_in_multiplet(l, m_t, "ClassicalStepper");
    const int n = static_cast<int>(h_.size()) + 1;
    m_.resize(n);
    for (int k = 0; k < n; ++k) m_[k] = (-l + k).value();
    root_.resize(n);
    transfer_.resize(n);
    next_.resize(n);
  }

  void step(std::vector<double>& a, double dt, double dw_minus, double dw_z) {
    const int n = static_cast<int>(m_.size());
    if (static_cast<int>(a.size()) != n) throw DomainError("classical_step: wrong number of levels");
    double jm = 0.0, jz = 0.0;
    for (int k = 0; k < n; ++k) {
      jz += a[k] * m_[k];
      if (k + 1 < n) {
        root_[k] = std::sqrt(a[k] * a[k + 1]) * h_[k];
        transfer_[k] = -u_max_ * root_[k] + gamma_ * a[k + 1] * h_[k] * h_[k];
        jm += root_[k];
      } else {
        root_[k] = 0.0;
        transfer_[k] = 0.0;
      }
    }
    const double sg = std::sqrt(2.0 * gamma_) * dw_minus;
    const double sk = 2.0 * std::sqrt(kappa_) * dw_z;
    double sum = 0.0;
    for (int k = 0; k < n; ++k) {
      const double below = k > 0 ? transfer_[k - 1] : 0.0;
      double v = a[k] + (transfer_[k] - below) * dt + sg * (root_[k] - a[k] * jm) + sk * a[k] * (m_[k] - jz);
      if (!std::isfinite(v)) throw NumericError("classical_step: non-finite population");
      if (v < 0.0) {
        max_clamp_ = std::max(max_clamp_, -v);
        v = boundary_ == BoundaryRule::reflect ? -v : 0.0;
      }
      next_[k] = v;
      sum += v;
    }
    if (!(sum > 0.0)) throw NumericError("classical_step: all populations vanished");
    for (int k = 0; k < n; ++k) a[k] = next_[k] / sum;
  }

  double max_clamp() const { return max_clamp_; }

 private:
  HalfInt l_, m_t_;
  double gamma_, kappa_, u_max_;
  BoundaryRule boundary_;
  std::vector<double> h_, m_, root_, transfer_, next_;
  double max_clamp_ = 0.0;
};

/// One Euler-Maruyama step, then the boundary rule and renormalization.
inline PopulationState classical_step(const PopulationState& a, const ClassicalConfig& config, double dw_minus,
                                      double dw_z) {
  PopulationState out = a;
  ClassicalStepper(a.l, a.m_target, config.gamma, config.kappa, config.u_max, config.boundary).step(out.a, config.dt, dw_minus, dw_z);
  return out;
}

/// Coherent-state populations |<l,m|theta,phi>|^2 (independent of phi), truncated to m <= m_T.
inline PopulationState coherent_profile(HalfInt l, HalfInt m_t, double cos_theta) {
  // |<l,m|theta>|^2 = C(2l, l+m) p^{l+m} (1-p)^{l-m}, p = (1 - cos_theta)/2 for the -z pole convention.
  PopulationState p{l, m_t, {}};
  const int n2l = l.twice();
  const double prob = std::clamp(0.5 * (1.0 - cos_theta), 0.0, 1.0);
  double sum = 0.0;
  for (HalfInt m = -l; m <= m_t; m = m + 1) {
    const int up = (l.twice() + m.twice()) / 2;
    const double log_binom = std::lgamma(n2l + 1.0) - std::lgamma(up + 1.0) - std::lgamma(n2l - up + 1.0);
    double v = std::exp(log_binom) * std::pow(prob, up) * std::pow(1.0 - prob, n2l - up);
    p.a.push_back(v);
    sum += v;
  }
  if (!(sum > 0.0)) {
    // Direction concentrated above m_T: fall back to the top of the support.
    std::fill(p.a.begin(), p.a.end(), 0.0);
    p.a.back() = 1.0;
    return p;
  }
  for (double& v : p.a) v /= sum;
  return p;
}

inline PopulationState uniform_profile(HalfInt l, HalfInt m_t) {
  PopulationState p{l, m_t, {}};
  p.a.assign(static_cast<std::size_t>(p.levels()), 1.0 / p.levels());
  return p;
}

inline PopulationState initial_populations(HalfInt l, HalfInt m_t, InitialProfile profile, std::uint64_t seed,
                                           std::uint64_t stream_id) {
  switch (profile) {
    case InitialProfile::coherent_equator:
      return coherent_profile(l, m_t, 0.0);
    case InitialProfile::uniform:
      return uniform_profile(l, m_t);
    case InitialProfile::random_coherent: {
      // Same draw order as the quantum initial state: cos(theta) first.
      RandomStream rng(seed, stream_id, stream_slot::kInitialState);
      return coherent_profile(l, m_t, 2.0 * rng.uniform() - 1.0);
    }
  }
  throw DomainError("initial_populations: unknown profile");
}

struct BdsEstimate {
  double bds = 0.0;
  double bds_stderr = 0.0;
  std::vector<double> times;
  std::vector<double> curve;         // E[a_{m_T}(t)]
  std::vector<double> curve_stderr;
  double max_clamp = 0.0;            // largest negative overshoot before the boundary rule
};

/// Ensemble of population trajectories. Realization i uses stream id i.
inline BdsEstimate estimate_bds(const ClassicalConfig& config, HalfInt l_t, HalfInt m_t) {
  config.validate();
  spin::require_in_multiplet(l_t, m_t, "estimate_bds");
  const long n_steps = config.n_steps();
  const long burn_step = std::lround(std::ceil(config.effective_burn_in() / config.dt - 1e-9));
  const std::size_t nr = static_cast<std::size_t>(config.n_realizations);

  struct Run {
    std::vector<double> samples;
    double steady = 0.0;
    double clamp = 0.0;
  };
  std::vector<Run> runs(nr);
  parallel_for(nr, [&](std::size_t i) {
    PopulationState p = initial_populations(l_t, m_t, config.initial, config.master_seed, i);
    ClassicalStepper stepper(l_t, m_t, config.gamma, config.kappa, config.u_max, config.boundary);
    WienerSource noise(config.master_seed, i, 2, config.dt);
    std::vector<double> dw(2);
    Run r;
    double ss = 0.0;
    long count = 0;
    for (long k = 0;; ++k) {
      const double target = p.a.back();
      if (k % config.record_stride == 0 || k == n_steps) r.samples.push_back(target);
      if (k >= burn_step) {
        ss += target;
        ++count;
      }
      if (k == n_steps) break;
      noise.draw(dw);
      stepper.step(p.a, config.dt, dw[0], dw[1]);
    }
    r.steady = count > 0 ? ss / static_cast<double>(count) : p.a.back();
    r.clamp = stepper.max_clamp();
    runs[i] = std::move(r);
  });

  BdsEstimate est;
  for (long k = 0;; ++k) {
    if (k % config.record_stride == 0 || k == n_steps) est.times.push_back(k * config.dt);
    if (k == n_steps) break;
  }
  std::vector<double> column(nr);
  for (std::size_t s = 0; s < est.times.size(); ++s) {
    for (std::size_t i = 0; i < nr; ++i) column[i] = runs[i].samples[s];
    const auto [m, e] = sme::mean_and_stderr(column);
    est.curve.push_back(m);
    est.curve_stderr.push_back(e);
  }
  for (std::size_t i = 0; i < nr; ++i) {
    column[i] = runs[i].steady;
    est.max_clamp = std::max(est.max_clamp, runs[i].clamp);
  }
  const auto [m, e] = sme::mean_and_stderr(column);
  est.bds = m;
  est.bds_stderr = e;
  return est;
}

}  // namespace dfl::classical
