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

// Diffusive stochastic master equation (Ito form) with homodyne and
// heterodyne monitoring, trajectory ensembles, and an RK4 Lindblad solver
// used as the unconditional oracle.
//
//   d rho = -i[H, rho] dt + sum_j D[c_j] rho dt + sum_j sqrt(eta_j) H[c_j] rho dw_j
//   dy_j  = sqrt(eta_j) tr[rho (c_j + c_j^dag)] dt + dw_j

#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <functional>
#include <iostream>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "dfl/core.hpp"
#include "dfl/parallel.hpp"
#include "dfl/random.hpp"
#include "dfl/spin_algebra.hpp"

namespace dfl::sme {

using spin::DensityOperator;
using spin::StateVector;

enum class DetectionKind { homodyne, heterodyne };

struct MonitoringChannel {
  ComplexMatrix jump_op;  // rate prefactor absorbed
  double efficiency = 1.0;
  DetectionKind kind = DetectionKind::homodyne;
  double phase = 0.0;  // homodyne quadrature: measures e^{-i phase} c + h.c.

  static MonitoringChannel homodyne(ComplexMatrix c, double eta = 1.0, double phase = 0.0) {
    return {std::move(c), eta, DetectionKind::homodyne, phase};
  }
  static MonitoringChannel heterodyne(ComplexMatrix c, double eta = 1.0) {
    return {std::move(c), eta, DetectionKind::heterodyne, 0.0};
  }
  /// Number of independent Wiener increments this channel consumes.
  int noise_count() const { return kind == DetectionKind::heterodyne ? 2 : 1; }
};

/// Hamiltonian update inside one step: first-order Euler (default) or exact
/// conjugation by exp(-i H dt), needed when H carries ~1/sqrt(dt) photocurrent noise.
enum class HamiltonianScheme { euler, exact_unitary };

/// Update form of the dissipative and measurement part. euler_maruyama is the
/// plain Ito increment. kraus applies rho -> M rho M^dag + sum (1-eta) c rho c^dag dt
/// with M = 1 - (iH + sum c^dag c / 2) dt + sum sqrt(eta) c dy, then renormalizes;
/// it agrees to first order and keeps rho positive for any noise draw.
enum class UpdateForm { euler_maruyama, kraus };

struct SMEConfig {
  double dt = 1e-3;
  double t_final = 10.0;
  double burn_in = -1.0;  // negative: t_final / 2
  int n_trajectories = 100;
  std::uint64_t master_seed = 1;
  int record_stride = 100;      // steps between recorded samples
  bool record_states = false;   // keep rho at every sample (for ensemble means)
  bool record_photocurrents = false;
  int positivity_stride = 0;    // steps between min-eigenvalue checks; 0 disables
  HamiltonianScheme scheme = HamiltonianScheme::euler;
  UpdateForm form = UpdateForm::kraus;  // plain Ito drifts off purity by O(sqrt(dt))

  double effective_burn_in() const { return burn_in < 0.0 ? 0.5 * t_final : burn_in; }
  long n_steps() const { return std::lround(t_final / dt); }

  void validate() const {
    if (!(dt > 0.0) || !(t_final > 0.0)) throw DomainError("SMEConfig: dt and t_final must be > 0");
    if (n_trajectories < 1) throw DomainError("SMEConfig: n_trajectories must be >= 1");
    if (record_stride < 1) throw DomainError("SMEConfig: record_stride must be >= 1");
    if (effective_burn_in() > t_final) throw DomainError("SMEConfig: burn_in exceeds t_final");
  }
};

/// Warns on stderr when dt is coarse against the fastest rate of the model.
inline bool check_step_size(double dt, double fastest_rate, std::ostream& log = std::clog) {
  if (dt * fastest_rate > 0.05) {
    log << "warning: dt*rate = " << dt * fastest_rate << " > 0.05; integration may be inaccurate\n";
    return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Channel expansion and the single-step integrator.

namespace detail {

struct BaseChannel {
  ComplexMatrix op, op_dag, op_dag_op;
  ComplexVector diag;  // set when op is diagonal
  bool diagonal = false;
  double loss = 0.0;   // sum over sub-channels of (1 - eta)|z|^2
};

// A measured quadrature z*c with |z| <= 1 (heterodyne: 1/sqrt2 and i/sqrt2).
struct SubChannel {
  std::size_t base;
  Complex z;
  double sqrt_eta;
};

struct ExpandedChannels {
  std::vector<BaseChannel> bases;
  std::vector<SubChannel> subs;
};

inline ExpandedChannels expand(const std::vector<MonitoringChannel>& channels, Eigen::Index dim) {
  ExpandedChannels out;
  for (const auto& ch : channels) {
    require_square(ch.jump_op, "MonitoringChannel");
    require_same_dim(ch.jump_op.rows(), dim, "MonitoringChannel");
    if (!(ch.efficiency >= 0.0 && ch.efficiency <= 1.0)) {
      throw DomainError("MonitoringChannel: efficiency must be in [0,1]");
    }
    BaseChannel b;
    b.op = ch.jump_op;
    b.op_dag = ch.jump_op.adjoint();
    b.op_dag_op = b.op_dag * b.op;
    const ComplexMatrix off = b.op - ComplexMatrix(b.op.diagonal().asDiagonal());
    b.diagonal = off.cwiseAbs().maxCoeff() == 0.0;
    if (b.diagonal) b.diag = b.op.diagonal();
    const std::size_t idx = out.bases.size();
    out.bases.push_back(std::move(b));
    const double se = std::sqrt(ch.efficiency);
    out.bases.back().loss = 1.0 - ch.efficiency;
    if (ch.kind == DetectionKind::heterodyne) {
      out.subs.push_back({idx, Complex(1.0 / std::sqrt(2.0), 0.0), se});
      out.subs.push_back({idx, Complex(0.0, 1.0 / std::sqrt(2.0)), se});
    } else {
      out.subs.push_back({idx, std::exp(-kI * ch.phase), se});
    }
  }
  return out;
}

}  // namespace detail

/// Allocation-free SME stepper for a fixed channel set and dimension.
class SmeIntegrator {
 public:
  SmeIntegrator(const std::vector<MonitoringChannel>& channels, Eigen::Index dim)
      : dim_(dim), ch_(detail::expand(channels, dim)) {
    const auto d = dim_;
    next_.resize(d, d);
    x_.resize(d, d);
    y_.resize(d, d);
    z_.resize(d, d);
    m_.resize(d, d);
    traces_.resize(ch_.bases.size());
  }

  Eigen::Index dim() const { return dim_; }
  std::size_t noise_count() const { return ch_.subs.size(); }

  /// Deterministic generator -i[H, rho] + sum D[c] rho written to `out`.
  void lindblad_rhs(const ComplexMatrix& rho, const ComplexMatrix& h, ComplexMatrix& out) {
    z_.noalias() = h * rho;
    out = -kI * (z_ - z_.adjoint());
    add_dissipator(rho, out, 1.0);
  }

  /// One step in place. `noises` holds one Normal(0, dt) draw per expanded
  /// channel; `dy` (optional, same length) receives the photocurrent increments.
  void step(ComplexMatrix& rho, const ComplexMatrix& h, double dt, std::span<const double> noises,
            std::span<double> dy = {}, HamiltonianScheme scheme = HamiltonianScheme::euler,
            UpdateForm form = UpdateForm::euler_maruyama) {
    if (static_cast<std::size_t>(noises.size()) != ch_.subs.size()) {
      throw DomainError("sme step: expected " + std::to_string(ch_.subs.size()) + " noises, got " +
                        std::to_string(noises.size()));
    }
    require_same_dim(rho.rows(), dim_, "sme step");
    require_same_dim(h.rows(), dim_, "sme step");

    if (form == UpdateForm::kraus) {
      kraus_update(rho, h, dt, noises, dy, scheme);
    } else {
      euler_update(rho, h, dt, noises, dy, scheme);
    }
    if (scheme == HamiltonianScheme::exact_unitary) {
      update_unitary(h, dt);
      z_.noalias() = unitary_ * next_;
      next_.noalias() = z_ * unitary_.adjoint();
    }

    rho = 0.5 * (next_ + next_.adjoint());
    const double tr = rho.trace().real();
    if (!std::isfinite(tr) || tr <= 0.0) throw NumericError("sme step: non-finite or non-positive trace");
    rho /= tr;
  }

 private:
  // Writes the unnormalized Ito increment rho + d rho (Hamiltonian part only for euler) to next_.
  void euler_update(const ComplexMatrix& rho, const ComplexMatrix& h, double dt, std::span<const double> noises,
                    std::span<double> dy, HamiltonianScheme scheme) {
    if (scheme == HamiltonianScheme::euler) {
      z_.noalias() = h * rho;
      next_ = rho + (-kI * dt) * (z_ - z_.adjoint());
    } else {
      next_ = rho;
    }
    add_dissipator(rho, next_, dt);

    // Measurement back-action: sqrt(eta) (zX + (zX)^dag - 2 Re(z tr X) rho) dw with X = c rho.
    for (std::size_t s = 0; s < ch_.subs.size(); ++s) {
      const auto& sub = ch_.subs[s];
      const Complex tr_x = traces_[sub.base];
      const double mean = 2.0 * (sub.z * tr_x).real();
      if (!dy.empty()) dy[s] = sub.sqrt_eta * mean * dt + noises[s];
      if (sub.sqrt_eta == 0.0 || noises[s] == 0.0) continue;
      const double w = sub.sqrt_eta * noises[s];
      const auto& base = ch_.bases[sub.base];
      if (base.diagonal) {
        for (Eigen::Index j = 0; j < dim_; ++j) {
          for (Eigen::Index i = 0; i < dim_; ++i) {
            const Complex zc_i = sub.z * base.diag[i];
            const Complex zc_j = sub.z * base.diag[j];
            next_(i, j) += w * ((zc_i + std::conj(zc_j)) * rho(i, j) - mean * rho(i, j));
          }
        }
      } else {
        x_.noalias() = base.op * rho;
        z_ = sub.z * x_;
        next_ += w * (z_ + z_.adjoint() - mean * rho);
      }
    }
  }

  // Writes M rho M^dag + sum (1-eta) c rho c^dag dt to next_ (unnormalized).
  void kraus_update(const ComplexMatrix& rho, const ComplexMatrix& h, double dt, std::span<const double> noises,
                    std::span<double> dy, HamiltonianScheme scheme) {
    if (scheme == HamiltonianScheme::euler) {
      m_ = (-kI * dt) * h;
      m_.diagonal().array() += 1.0;
    } else {
      m_.setIdentity();
    }
    for (std::size_t b = 0; b < ch_.bases.size(); ++b) {
      const auto& base = ch_.bases[b];
      if (base.diagonal) {
        Complex tr = 0.0;
        for (Eigen::Index j = 0; j < dim_; ++j) {
          tr += base.diag[j] * rho(j, j);
          m_(j, j) -= 0.5 * dt * std::norm(base.diag[j]);
        }
        traces_[b] = tr;
      } else {
        traces_[b] = base.op.transpose().cwiseProduct(rho).sum();
        m_ -= (0.5 * dt) * base.op_dag_op;
      }
    }
    for (std::size_t s = 0; s < ch_.subs.size(); ++s) {
      const auto& sub = ch_.subs[s];
      const double mean = 2.0 * (sub.z * traces_[sub.base]).real();
      const double y = sub.sqrt_eta * mean * dt + noises[s];
      if (!dy.empty()) dy[s] = y;
      if (sub.sqrt_eta == 0.0) continue;
      const Complex coef = sub.sqrt_eta * sub.z * y;
      const auto& base = ch_.bases[sub.base];
      if (base.diagonal) {
        m_.diagonal() += coef * base.diag;
      } else {
        m_ += coef * base.op;
      }
    }
    x_.noalias() = m_ * rho;
    next_.noalias() = x_ * m_.adjoint();
    for (const auto& base : ch_.bases) {
      if (base.loss == 0.0) continue;
      x_.noalias() = base.op * rho;
      next_.noalias() += (base.loss * dt) * (x_ * base.op_dag);
    }
  }

  // out += scale * sum_j D[c_j] rho; also caches tr(c_j rho) for the measurement terms.
  void add_dissipator(const ComplexMatrix& rho, ComplexMatrix& out, double scale) {
    for (std::size_t b = 0; b < ch_.bases.size(); ++b) {
      const auto& base = ch_.bases[b];
      if (base.diagonal) {
        Complex tr = 0.0;
        for (Eigen::Index j = 0; j < dim_; ++j) {
          tr += base.diag[j] * rho(j, j);
          for (Eigen::Index i = 0; i < dim_; ++i) {
            const Complex ci = base.diag[i];
            const Complex cj = base.diag[j];
            out(i, j) += scale * (ci * std::conj(cj) - 0.5 * (std::norm(ci) + std::norm(cj))) * rho(i, j);
          }
        }
        traces_[b] = tr;
      } else {
        x_.noalias() = base.op * rho;
        traces_[b] = x_.trace();
        out.noalias() += scale * (x_ * base.op_dag);
        y_.noalias() = base.op_dag_op * rho;
        out -= (0.5 * scale) * (y_ + y_.adjoint());
      }
    }
  }

  void update_unitary(const ComplexMatrix& h, double dt) {
    if (has_unitary_ && dt == unitary_dt_ && h == unitary_h_) return;
    unitary_ = spin::unitary_exp(h, dt);
    unitary_h_ = h;
    unitary_dt_ = dt;
    has_unitary_ = true;
  }

  Eigen::Index dim_;
  detail::ExpandedChannels ch_;
  ComplexMatrix next_, x_, y_, z_, m_;
  std::vector<Complex> traces_;
  ComplexMatrix unitary_, unitary_h_;
  double unitary_dt_ = 0.0;
  bool has_unitary_ = false;
};

/// -i[H, rho] + sum_j D[c_j] rho.
inline ComplexMatrix lindblad_rhs(const DensityOperator& rho, const ComplexMatrix& h,
                                  const std::vector<MonitoringChannel>& channels) {
  require_same_dim(h.rows(), rho.dim(), "lindblad_rhs");
  SmeIntegrator integ(channels, rho.dim());
  ComplexMatrix out(rho.dim(), rho.dim());
  integ.lindblad_rhs(rho.matrix(), h, out);
  return out;
}

/// Single SME step (Euler-Maruyama by default) followed by Hermitization and trace renormalization.
inline DensityOperator sme_step(const DensityOperator& rho, const ComplexMatrix& h,
                                const std::vector<MonitoringChannel>& channels, double dt,
                                std::span<const double> noises,
                                HamiltonianScheme scheme = HamiltonianScheme::euler,
                                UpdateForm form = UpdateForm::euler_maruyama) {
  SmeIntegrator integ(channels, rho.dim());
  ComplexMatrix m = rho.matrix();
  integ.step(m, h, dt, noises, {}, scheme, form);
  return DensityOperator::trusted(std::move(m));
}

/// dy = sqrt(eta) tr[rho (c + c^dag)] dt + dw for a homodyne channel.
inline double photocurrent_increment(const DensityOperator& rho, const MonitoringChannel& channel,
                                     double dw, double dt) {
  require_same_dim(channel.jump_op.rows(), rho.dim(), "photocurrent_increment");
  const ComplexMatrix c = std::exp(-kI * channel.phase) * channel.jump_op;
  const double mean = (rho.matrix() * (c + c.adjoint())).trace().real();
  return std::sqrt(channel.efficiency) * mean * dt + dw;
}

// ---------------------------------------------------------------------------
// Controllers and trajectories.

/// What a feedback controller sees before each step.
struct Observation {
  double t;
  long step;
  double dt;
  const ComplexMatrix& rho;
  std::span<const double> last_dy;  // photocurrent increments of the previous step; empty at step 0
};

template <class C>
concept FeedbackController = std::copy_constructible<C> && requires(C c, const Observation& obs) {
  { c.hamiltonian(obs) } -> std::convertible_to<const ComplexMatrix&>;
  c.reset();
};

/// Emits a fixed Hamiltonian (zero by default).
class StaticHamiltonian {
 public:
  explicit StaticHamiltonian(ComplexMatrix h) : h_(std::move(h)) {}
  static StaticHamiltonian zero(Eigen::Index dim) { return StaticHamiltonian(ComplexMatrix::Zero(dim, dim)); }
  const ComplexMatrix& hamiltonian(const Observation&) { return h_; }
  void reset() {}

 private:
  ComplexMatrix h_;
};

/// Initial condition: fixed state, or a spin-coherent state with direction
/// drawn uniformly on the sphere from the trajectory's own stream.
struct RandomCoherentState {
  int n_atoms;
};
using InitialState = std::variant<DensityOperator, RandomCoherentState>;

struct TrajectoryModel {
  std::vector<MonitoringChannel> channels;
  StateVector target;
  InitialState initial;
  double fastest_rate = 0.0;  // for the step-size warning; 0 skips the check
};

inline StateVector random_coherent_state(const spin::CollectiveSpinSystem& sys, RandomStream& rng) {
  const double cos_theta = 2.0 * rng.uniform() - 1.0;
  const double phi = 2.0 * kPi * rng.uniform();
  return spin::coherent_spin_state(sys, std::acos(std::clamp(cos_theta, -1.0, 1.0)), phi);
}

inline ComplexMatrix draw_initial_state(const InitialState& init, std::uint64_t master_seed,
                                        std::uint64_t stream_id) {
  if (const auto* fixed = std::get_if<DensityOperator>(&init)) return fixed->matrix();
  const auto& rc = std::get<RandomCoherentState>(init);
  RandomStream rng(master_seed, stream_id, stream_slot::kInitialState);
  return random_coherent_state(spin::build_system(rc.n_atoms), rng).projector();
}

struct TrajectoryRecord {
  std::vector<double> times;
  std::vector<double> fidelities;
  std::vector<std::vector<double>> photocurrents;  // [channel][sample]: dy summed since previous sample
  std::vector<ComplexMatrix> states;               // only with record_states
  DensityOperator final_state = DensityOperator::maximally_mixed(1);
  double steady_state_mean = 0.0;  // time average of the fidelity over t >= burn_in
  double min_eigenvalue = 0.0;     // smallest eigenvalue seen at positivity checks
  std::uint64_t stream_id = 0;
};

template <FeedbackController Controller>
TrajectoryRecord run_trajectory(const TrajectoryModel& model, Controller controller, const SMEConfig& config,
                                std::uint64_t stream_id) {
  config.validate();
  const Eigen::Index d = model.target.dim();
  SmeIntegrator integ(model.channels, d);
  WienerSource noise(config.master_seed, stream_id, integ.noise_count(), config.dt);
  const std::size_t nch = integ.noise_count();

  ComplexMatrix rho = draw_initial_state(model.initial, config.master_seed, stream_id);
  require_same_dim(rho.rows(), d, "run_trajectory: initial state");
  const ComplexVector& psi = model.target.amplitudes();
  controller.reset();

  const long n_steps = config.n_steps();
  const long burn_step = std::lround(std::ceil(config.effective_burn_in() / config.dt - 1e-9));
  std::vector<double> dw(nch, 0.0), dy(nch, 0.0), dy_acc(nch, 0.0);
  TrajectoryRecord rec;
  rec.stream_id = stream_id;
  rec.photocurrents.assign(config.record_photocurrents ? nch : 0, {});
  rec.min_eigenvalue = 0.0;
  double ss_sum = 0.0;
  long ss_count = 0;
  bool min_eig_set = false;

  auto sample = [&](long k) {
    rec.times.push_back(k * config.dt);
    rec.fidelities.push_back(spin::fidelity(rho, psi));
    if (config.record_states) rec.states.push_back(rho);
    if (config.record_photocurrents) {
      for (std::size_t c = 0; c < nch; ++c) {
        rec.photocurrents[c].push_back(dy_acc[c]);
        dy_acc[c] = 0.0;
      }
    }
  };

  for (long k = 0;; ++k) {
    if (k % config.record_stride == 0 || k == n_steps) sample(k);
    if (k >= burn_step) {
      ss_sum += k % config.record_stride == 0 || k == n_steps ? rec.fidelities.back()
                                                               : spin::fidelity(rho, psi);
      ++ss_count;
    }
    if (config.positivity_stride > 0 && k % config.positivity_stride == 0) {
      const double ev = spin::hermitian_eigensystem(rho).values[d - 1];
      rec.min_eigenvalue = min_eig_set ? std::min(rec.min_eigenvalue, ev) : ev;
      min_eig_set = true;
    }
    if (k == n_steps) break;

    const Observation obs{k * config.dt, k, config.dt, rho,
                          k == 0 ? std::span<const double>{} : std::span<const double>(dy)};
    const ComplexMatrix& h = controller.hamiltonian(obs);
    noise.draw(dw);
    try {
      integ.step(rho, h, config.dt, dw, dy, config.scheme, config.form);
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " (stream " + std::to_string(stream_id) + ", step " +
                         std::to_string(k) + ")");
    }
    if (config.record_photocurrents) {
      for (std::size_t c = 0; c < nch; ++c) dy_acc[c] += dy[c];
    }
  }
  rec.steady_state_mean = ss_count > 0 ? ss_sum / static_cast<double>(ss_count) : rec.fidelities.back();
  rec.final_state = DensityOperator::trusted(rho);
  return rec;
}

struct EnsembleStats {
  std::vector<double> times;
  std::vector<double> mean_fidelity;
  std::vector<double> stderr_fidelity;
  std::vector<ComplexMatrix> mean_states;  // only with record_states
  double steady_state_mean = 0.0;
  double steady_state_stderr = 0.0;
  double min_eigenvalue = 0.0;
  int n_trajectories = 0;
  std::vector<double> per_trajectory_steady;  // trajectory-level time averages
};

/// Mean and standard error (sample std / sqrt(n)) of a list of values.
inline std::pair<double, double> mean_and_stderr(std::span<const double> xs) {
  const double n = static_cast<double>(xs.size());
  if (xs.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0)) / std::sqrt(n)};
}

/// Reduces trajectory records in index order, so the result does not depend
/// on how trajectories were scheduled across workers.
inline EnsembleStats reduce_records(const std::vector<TrajectoryRecord>& recs) {
  EnsembleStats st;
  st.n_trajectories = static_cast<int>(recs.size());
  if (recs.empty()) return st;
  st.times = recs.front().times;
  const std::size_t ns = st.times.size();
  std::vector<double> column(recs.size());
  for (std::size_t s = 0; s < ns; ++s) {
    for (std::size_t r = 0; r < recs.size(); ++r) column[r] = recs[r].fidelities[s];
    const auto [m, e] = mean_and_stderr(column);
    st.mean_fidelity.push_back(m);
    st.stderr_fidelity.push_back(e);
  }
  if (!recs.front().states.empty()) {
    for (std::size_t s = 0; s < ns; ++s) {
      ComplexMatrix acc = ComplexMatrix::Zero(recs.front().states[s].rows(), recs.front().states[s].cols());
      for (const auto& r : recs) acc += r.states[s];
      st.mean_states.push_back(acc / static_cast<double>(recs.size()));
    }
  }
  st.per_trajectory_steady.reserve(recs.size());
  st.min_eigenvalue = recs.front().min_eigenvalue;
  for (const auto& r : recs) {
    st.per_trajectory_steady.push_back(r.steady_state_mean);
    st.min_eigenvalue = std::min(st.min_eigenvalue, r.min_eigenvalue);
  }
  const auto [m, e] = mean_and_stderr(st.per_trajectory_steady);
  st.steady_state_mean = m;
  st.steady_state_stderr = e;
  return st;
}

/// Runs config.n_trajectories independent trajectories with stream ids
/// 0..n-1; each gets a fresh copy of the controller prototype.
template <FeedbackController Controller>
EnsembleStats run_ensemble(const TrajectoryModel& model, const Controller& prototype, const SMEConfig& config) {
  config.validate();
  if (model.fastest_rate > 0.0) check_step_size(config.dt, model.fastest_rate);
  std::vector<TrajectoryRecord> recs(static_cast<std::size_t>(config.n_trajectories));
  parallel_for(recs.size(), [&](std::size_t i) {
    TrajectoryRecord r = run_trajectory(model, Controller(prototype), config, i);
    r.photocurrents.clear();
    r.photocurrents.shrink_to_fit();
    recs[i] = std::move(r);
  });
  return reduce_records(recs);
}

// ---------------------------------------------------------------------------
// Unconditional master equation (oracle).

using HamiltonianSchedule = std::function<ComplexMatrix(double)>;

/// Classical RK4 on the Lindblad equation. Returns rho at t = 0, stride*dt, ...
/// (and at t_final). Throws NumericError when the trace drifts by more than 1e-6.
inline std::vector<DensityOperator> unconditional_solve(const std::vector<MonitoringChannel>& channels,
                                                        const DensityOperator& rho0,
                                                        const HamiltonianSchedule& h_of_t, double t_final,
                                                        double dt, int stride = 1) {
  if (!(dt > 0.0) || !(t_final >= 0.0) || stride < 1) throw DomainError("unconditional_solve: bad grid");
  const auto d = rho0.dim();
  SmeIntegrator integ(channels, d);
  ComplexMatrix rho = rho0.matrix();
  ComplexMatrix k1(d, d), k2(d, d), k3(d, d), k4(d, d), tmp(d, d);
  const long n = std::lround(t_final / dt);
  std::vector<DensityOperator> out;
  out.push_back(DensityOperator::trusted(rho));
  for (long k = 0; k < n; ++k) {
    const double t = k * dt;
    const ComplexMatrix h0 = h_of_t(t);
    const ComplexMatrix hm = h_of_t(t + 0.5 * dt);
    const ComplexMatrix h1 = h_of_t(t + dt);
    integ.lindblad_rhs(rho, h0, k1);
    tmp = rho + 0.5 * dt * k1;
    integ.lindblad_rhs(tmp, hm, k2);
    tmp = rho + 0.5 * dt * k2;
    integ.lindblad_rhs(tmp, hm, k3);
    tmp = rho + dt * k3;
    integ.lindblad_rhs(tmp, h1, k4);
    rho += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    const double drift = std::abs(rho.trace() - Complex(1.0));
    if (!std::isfinite(drift) || drift > 1e-6) {
      throw NumericError("unconditional_solve: trace drift " + std::to_string(drift) + " at t=" +
                         std::to_string(t + dt));
    }
    if ((k + 1) % stride == 0 || k + 1 == n) out.push_back(DensityOperator::trusted(rho));
  }
  return out;
}

}  // namespace dfl::sme
