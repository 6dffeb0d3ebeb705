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

#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "dfl/bounds.hpp"
#include "dfl/controllers.hpp"
#include "oracles.hpp"

namespace {

using dfl::Complex;
using dfl::ComplexMatrix;
using dfl::ComplexVector;
using dfl::HalfInt;
using dfl::kI;
using dfl::kPi;
namespace ctl = dfl::control;
namespace spin = dfl::spin;
namespace sme = dfl::sme;
namespace tst = dfl::testing;

HalfInt half(int twice) { return HalfInt::from_twice(twice); }

ComplexMatrix random_density(int d, std::mt19937_64& rng) {
  const ComplexMatrix a = tst::random_matrix(d, rng);
  ComplexMatrix r = a * a.adjoint();
  return r / r.trace();
}

// Drive built from the ladder definition, index i <-> m = l - i.
ComplexMatrix oracle_drive(int n, double u, double theta) {
  const double l = 0.5 * n;
  ComplexMatrix jp = ComplexMatrix::Zero(n + 1, n + 1);
  for (int i = 1; i <= n; ++i) jp(i - 1, i) = tst::h(l, l - i);
  const Complex e = std::exp(-kI * theta);
  return 0.5 * u * (e * jp + std::conj(e) * jp.adjoint());
}

// sum_m w_m d a_m / dt under -i[H, rho], weights in ascending m.
double oracle_cost_rate(const std::vector<double>& w, const ComplexMatrix& h, const ComplexMatrix& rho) {
  const ComplexMatrix drho = -kI * (h * rho - rho * h);
  const int d = static_cast<int>(rho.rows());
  double s = 0;
  for (int k = 0; k < d; ++k) s += w[static_cast<std::size_t>(k)] * drho(d - 1 - k, d - 1 - k).real();
  return s;
}

double wrap(double a) { return std::remainder(a, 2.0 * kPi); }

// ---------------------------------------------------------------------------
// dicke_amplitudes

TEST(DickeAmplitudes, BasisStateIsIndicator) {
  const auto sys = spin::build_system(4);
  const auto amp = ctl::dicke_amplitudes(sys.dicke_state(HalfInt::from_int(1)));
  ASSERT_EQ(amp.populations.size(), 5u);
  ASSERT_EQ(amp.coherences.size(), 4u);
  for (int k = 0; k < 5; ++k) EXPECT_EQ(amp.populations[k], k == 3 ? 1.0 : 0.0);
  for (const auto& c : amp.coherences) EXPECT_EQ(c, Complex(0.0));
  EXPECT_EQ(amp.population(HalfInt::from_int(1)), 1.0);
}

TEST(DickeAmplitudes, PureStateCoherencesFromAmplitudes) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0, 1), ph(-kPi, kPi);
  const int n = 5;
  std::vector<double> a(n + 1), phi(n + 1);
  double z = 0;
  for (auto& x : a) z += (x = u(rng));
  for (auto& x : a) x /= z;
  for (auto& x : phi) x = ph(rng);
  // Ascending-m index k sits at basis index n - k.
  ComplexVector psi(n + 1);
  for (int k = 0; k <= n; ++k) psi[n - k] = std::sqrt(a[k]) * std::exp(kI * phi[k]);
  const auto amp = ctl::dicke_amplitudes(spin::StateVector(psi));
  for (int k = 0; k <= n; ++k) EXPECT_NEAR(amp.populations[k], a[k], 1e-12);
  for (int k = 0; k < n; ++k) {
    const Complex expect = std::sqrt(a[k] * a[k + 1]) * std::exp(kI * (phi[k] - phi[k + 1]));
    EXPECT_NEAR(std::abs(amp.coherences[k] - expect), 0.0, 1e-12) << k;
  }
}

TEST(DickeAmplitudes, MaximallyMixed) {
  for (int n = 1; n <= 6; ++n) {
    const auto amp = ctl::dicke_amplitudes(spin::DensityOperator::maximally_mixed(n + 1));
    for (double p : amp.populations) EXPECT_NEAR(p, 1.0 / (n + 1), 1e-15);
    for (const auto& c : amp.coherences) EXPECT_EQ(c, Complex(0.0));
  }
}

// ---------------------------------------------------------------------------
// Weights

TEST(Weights, EuclideanExamples) {
  EXPECT_EQ(ctl::euclidean_weights(HalfInt::from_int(2), HalfInt::from_int(0)).values(),
            (std::vector<double>{2, 1, 0, 1, 2}));
  for (int n = 1; n <= 7; ++n) {
    const HalfInt l = half(n);
    const auto top = ctl::euclidean_weights(l, l).values();
    for (int k = 0; k <= n; ++k) EXPECT_EQ(top[k], l.value() - (-l.value() + k));
    for (HalfInt m = -l; m <= l; m = m + 1) EXPECT_EQ(ctl::euclidean_weights(l, m)(m), 0.0);
  }
  EXPECT_THROW(ctl::euclidean_weights(HalfInt::from_int(1), HalfInt::from_int(2)), dfl::DomainError);
}

TEST(Weights, InfidelityHasOneNonzeroEntry) {
  for (int n = 1; n <= 6; ++n) {
    const HalfInt l = half(n);
    for (HalfInt m = -l; m <= l; m = m + 1) {
      const auto w = ctl::infidelity_weights(l, m);
      int nonzero = 0;
      for (double x : w.values()) nonzero += x != 0.0;
      EXPECT_EQ(nonzero, 1);
      EXPECT_EQ(w(m), -1.0);
    }
  }
}

TEST(Weights, RejectsBadInput) {
  EXPECT_THROW(ctl::CostWeights(HalfInt::from_int(1), {0.0, 1.0}), dfl::DomainError);
  EXPECT_THROW(ctl::CostWeights(HalfInt::from_int(1), {0.0, 1.0, std::nan("")}), dfl::DomainError);
}

// Cost rate under the drive is minus the fidelity rate for infidelity weights.
TEST(Weights, InfidelityRateIsMinusFidelityRate) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> th(-kPi, kPi);
  for (int n = 1; n <= 5; ++n) {
    const auto sys = spin::build_system(n);
    const HalfInt m_t = sys.l - (n / 2);
    const auto w = ctl::infidelity_weights(sys.l, m_t);
    const ComplexVector target = sys.dicke_state(m_t).amplitudes();
    for (int trial = 0; trial < 20; ++trial) {
      const ComplexMatrix rho = random_density(n + 1, rng);
      const ctl::ControlAction a{1.3, th(rng)};
      const ComplexMatrix h = oracle_drive(n, a.u, a.theta);
      const ComplexMatrix drho = -kI * (h * rho - rho * h);
      const double df = target.dot(drho * target).real();
      EXPECT_NEAR(ctl::cost_rate(w, rho, a), -df, 1e-12);
    }
  }
}

// ---------------------------------------------------------------------------
// Local-cost controller

TEST(LocalCost, TargetStateGivesZeroDrive) {
  for (int n = 1; n <= 6; ++n) {
    const auto sys = spin::build_system(n);
    for (HalfInt m = -sys.l; m <= sys.l; m = m + 1) {
      const auto rho = spin::DensityOperator::pure(sys.dicke_state(m));
      for (auto mode : {ctl::PhaseMode::optimized, ctl::PhaseMode::fixed}) {
        EXPECT_EQ(ctl::local_cost_controller(ctl::euclidean_weights(sys.l, m), rho, 2.0, mode).u, 0.0);
      }
    }
  }
}

TEST(LocalCost, QubitFixedPhaseIsBangBangOnSigmaX) {
  std::mt19937_64 rng(5);
  const auto w = ctl::euclidean_weights(half(1), half(1));
  for (int trial = 0; trial < 500; ++trial) {
    const ComplexMatrix rho = random_density(2, rng);
    // Basis (|e>, |g>): sigma_x = |e><g| + |g><e|.
    const double sx = 2.0 * rho(0, 1).real();
    const double expect = sx > 0 ? -0.7 : 0.7;
    const auto a = ctl::local_cost_controller(w, rho, 0.7, ctl::PhaseMode::fixed);
    EXPECT_EQ(a.u, expect);
    EXPECT_DOUBLE_EQ(a.theta, kPi / 2);
    EXPECT_EQ(ctl::qubit_bang_bang(rho, 0.7), expect);
    // The drive at theta = pi/2 is u sigma_y / 2.
    ComplexMatrix sy(2, 2);
    sy << 0, -kI, kI, 0;
    EXPECT_NEAR((ctl::control_hamiltonian(spin::build_system(1), a) - 0.5 * a.u * sy).norm(), 0.0, 1e-15);
  }
}

TEST(LocalCost, QubitInfidelityAndEuclideanAgree) {
  std::mt19937_64 rng(6);
  const auto we = ctl::euclidean_weights(half(1), half(1));
  const auto wf = ctl::infidelity_weights(half(1), half(1));
  for (int trial = 0; trial < 500; ++trial) {
    const ComplexMatrix rho = random_density(2, rng);
    for (auto mode : {ctl::PhaseMode::optimized, ctl::PhaseMode::fixed}) {
      const auto a = ctl::local_cost_controller(we, rho, 1.0, mode);
      const auto b = ctl::local_cost_controller(wf, rho, 1.0, mode);
      EXPECT_EQ(a.u, b.u);
      EXPECT_EQ(a.theta, b.theta);
    }
  }
}

// Phase-aligned state: every link below the target carries the largest
// possible upward flux u h_m sqrt(a_m a_{m+1}), i.e. cos(alpha_m) = -1.
TEST(LocalCost, OptimizedPhaseAlignsAlignedState) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u01(0.05, 1.0), ph(-kPi, kPi);
  for (int n = 2; n <= 6; ++n) {
    const auto sys = spin::build_system(n);
    for (int top = 1; top <= n; ++top) {  // m_t = -l + top
      const double theta0 = ph(rng);
      std::vector<double> a(static_cast<std::size_t>(top + 1));
      double z = 0;
      for (auto& x : a) z += (x = u01(rng));
      ComplexVector psi = ComplexVector::Zero(n + 1);
      double phase = ph(rng);
      for (int k = 0; k <= top; ++k) {
        psi[n - k] = std::sqrt(a[k] / z) * std::exp(kI * phase);
        phase -= theta0 + kPi / 2;  // phi_{m+1} = phi_m - theta0 - pi/2
      }
      const ComplexMatrix rho = psi * psi.adjoint();
      const HalfInt m_t = -sys.l + top;
      const auto act = ctl::local_cost_controller(ctl::euclidean_weights(sys.l, m_t), rho, 1.5,
                                                  ctl::PhaseMode::optimized);
      EXPECT_EQ(act.u, 1.5);
      EXPECT_NEAR(wrap(act.theta - theta0), 0.0, 1e-12);
      const ComplexMatrix h = oracle_drive(n, act.u, act.theta);
      for (int k = 0; k < top; ++k) {
        const int i = n - k;  // basis index of m, m+1 at i-1
        const double flux = 2.0 * (h(i - 1, i) * rho(i, i - 1)).imag();
        const double most = act.u * tst::h(0.5 * n, -0.5 * n + k) * std::abs(psi[i]) * std::abs(psi[i - 1]);
        EXPECT_NEAR(flux, most, 1e-12);
      }
    }
  }
}

TEST(LocalCost, CostRateMatchesCommutatorOracle) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> th(-kPi, kPi), uu(-2, 2);
  for (int n = 1; n <= 6; ++n) {
    const auto sys = spin::build_system(n);
    for (int trial = 0; trial < 50; ++trial) {
      const HalfInt m_t = sys.l - static_cast<int>(rng() % (n + 1));
      const auto w = ctl::euclidean_weights(sys.l, m_t);
      const ComplexMatrix rho = random_density(n + 1, rng);
      const ctl::ControlAction a{uu(rng), th(rng)};
      EXPECT_NEAR(ctl::cost_rate(w, rho, a), oracle_cost_rate(w.values(), oracle_drive(n, a.u, a.theta), rho),
                  1e-12);
      EXPECT_NEAR((ctl::control_hamiltonian(sys, a) - oracle_drive(n, a.u, a.theta)).norm(), 0.0, 1e-13);
    }
  }
}

// Finite-difference argmin: theta +- 1e-3 never lowers the cost rate, and a
// 720-point phase scan finds nothing lower.
TEST(LocalCost, OptimizedPhaseIsLocalMinimum) {
  std::mt19937_64 rng(9);
  for (int n = 1; n <= 6; ++n) {
    for (int trial = 0; trial < 40; ++trial) {
      const HalfInt l = half(n);
      const HalfInt m_t = l - static_cast<int>(rng() % (n + 1));
      const auto w = ctl::euclidean_weights(l, m_t);
      const ComplexMatrix rho = random_density(n + 1, rng);
      const auto act = ctl::local_cost_controller(w, rho, 1.0, ctl::PhaseMode::optimized);
      const double r0 = oracle_cost_rate(w.values(), oracle_drive(n, act.u, act.theta), rho);
      for (double d : {-1e-3, 1e-3}) {
        EXPECT_GE(oracle_cost_rate(w.values(), oracle_drive(n, act.u, act.theta + d), rho), r0 - 1e-14);
      }
      for (int s = 0; s < 720; ++s) {
        const double th = 2 * kPi * s / 720;
        EXPECT_GE(oracle_cost_rate(w.values(), oracle_drive(n, 1.0, th), rho), r0 - 1e-12);
        EXPECT_GE(oracle_cost_rate(w.values(), oracle_drive(n, 0.0, th), rho), r0 - 1e-12);
      }
    }
  }
}

TEST(LocalCost, FixedPhaseIsBangBangAndNeverRaisesCost) {
  std::mt19937_64 rng(10);
  for (int n = 1; n <= 6; ++n) {
    for (int trial = 0; trial < 200; ++trial) {
      const HalfInt l = half(n);
      const HalfInt m_t = l - static_cast<int>(rng() % (n + 1));
      const auto w = ctl::euclidean_weights(l, m_t);
      const ComplexMatrix rho = random_density(n + 1, rng);
      const auto act = ctl::local_cost_controller(w, rho, 0.8, ctl::PhaseMode::fixed);
      EXPECT_TRUE(act.u == 0.8 || act.u == -0.8 || act.u == 0.0) << act.u;
      EXPECT_DOUBLE_EQ(act.theta, kPi / 2);
      EXPECT_LE(oracle_cost_rate(w.values(), oracle_drive(n, act.u, act.theta), rho), 1e-14);
    }
  }
}

TEST(LocalCost, RejectsNegativeUmax) {
  EXPECT_THROW(ctl::local_cost_action(Complex(1.0), -1.0, ctl::PhaseMode::optimized), dfl::DomainError);
  EXPECT_THROW(ctl::LocalCostController(spin::build_system(2), ctl::euclidean_weights(half(2), half(2)), -1.0,
                                        ctl::PhaseMode::fixed),
               dfl::DomainError);
  EXPECT_THROW(ctl::LocalCostController(spin::build_system(3), ctl::euclidean_weights(half(2), half(2)), 1.0,
                                        ctl::PhaseMode::fixed),
               dfl::DomainError);
}

// Hermiticity and the energy-variance budget, over 1e3 random states per mode.
TEST(LocalCost, HamiltonianHermitianWithinEnergyBudget) {
  std::mt19937_64 rng(12);
  for (auto mode : {ctl::PhaseMode::optimized, ctl::PhaseMode::fixed}) {
    for (int trial = 0; trial < 1000; ++trial) {
      const int n = 1 + static_cast<int>(rng() % 6);
      const auto sys = spin::build_system(n);
      const HalfInt m_t = sys.l - static_cast<int>(rng() % (n + 1));
      const double u_max = 0.1 + 0.3 * (trial % 10);
      ctl::LocalCostController c(sys, ctl::euclidean_weights(sys.l, m_t), u_max, mode);
      const ComplexMatrix rho = random_density(n + 1, rng);
      const sme::Observation obs{0.0, trial, 1e-3, rho, {}};
      const ComplexMatrix h = c.hamiltonian(obs);
      EXPECT_LE((h - h.adjoint()).cwiseAbs().maxCoeff(), 1e-12);
      EXPECT_LE(std::abs(c.last_action().u), u_max);
      const ComplexVector t = sys.dicke_state(m_t).amplitudes();
      const Complex mean = t.dot(h * t);
      const double var = (h * t).squaredNorm() - std::norm(mean);
      const double de = dfl::bounds::dicke_delta_e(u_max, sys.l, m_t);
      EXPECT_LE(var, de * de + 1e-10);
    }
  }
}

// ---------------------------------------------------------------------------
// Markovian controller

ctl::MarkovianController qubit_markov(double window) {
  ComplexMatrix bare(2, 2);
  bare << 0.3, 0.1, 0.1, -0.3;
  const auto q = spin::build_system(1);
  return ctl::MarkovianController(2.0 * q.jy, window, bare);
}

TEST(Markovian, ZeroSignalKeepsBareHamiltonian) {
  auto c = qubit_markov(0.01);
  const ComplexMatrix rho = ComplexMatrix::Identity(2, 2) / 2.0;
  const std::vector<double> zero{0.0};
  ComplexMatrix bare(2, 2);
  bare << 0.3, 0.1, 0.1, -0.3;
  for (long k = 0; k < 100; ++k) {
    const sme::Observation obs{k * 1e-3, k, 1e-3, rho, k == 0 ? std::span<const double>{} : zero};
    EXPECT_EQ(c.hamiltonian(obs), bare);
  }
}

// Window average over [t - w, t) acts on [t, t + w).
TEST(Markovian, HoldsOneWindow) {
  auto c = qubit_markov(0.004);
  const ComplexMatrix rho = ComplexMatrix::Identity(2, 2) / 2.0;
  const double dt = 1e-3;
  ComplexMatrix bare(2, 2);
  bare << 0.3, 0.1, 0.1, -0.3;
  const auto q = spin::build_system(1);
  std::vector<double> dy{0.0};
  double sum = 0;
  for (long k = 0; k <= 12; ++k) {
    const sme::Observation obs{k * dt, k, dt, rho, k == 0 ? std::span<const double>{} : std::span<const double>(dy)};
    const ComplexMatrix h = c.hamiltonian(obs);
    if (k > 0) sum += dy[0];
    if (k < 4) {
      EXPECT_EQ(h, bare) << k;
    } else if (k % 4 == 0) {
      EXPECT_NEAR(c.last_signal(), sum / 0.004, 1e-9) << k;
      EXPECT_NEAR((h - bare - c.last_signal() * 2.0 * q.jy).norm(), 0.0, 1e-12);
      sum = 0;
    }
    dy[0] = 1e-3 * static_cast<double>(k + 1);
  }
}

TEST(Markovian, SignalMagnitudeScalesAsInverseRootWindow) {
  std::mt19937_64 rng(13);
  const double dt = 1e-3;
  const ComplexMatrix rho = ComplexMatrix::Identity(2, 2) / 2.0;
  std::normal_distribution<double> nz(0.0, std::sqrt(dt));
  for (int k_steps : {4, 16, 64}) {
    const double window = k_steps * dt;
    auto c = qubit_markov(window);
    std::vector<double> dy{0.0};
    const int windows = 20000;
    double s = 0, s2 = 0;
    c.hamiltonian({0.0, 0, dt, rho, {}});
    for (long k = 1; k <= static_cast<long>(windows) * k_steps; ++k) {
      dy[0] = nz(rng);
      c.hamiltonian({k * dt, k, dt, rho, dy});
      if (k % k_steps == 0) {
        const double a = std::abs(c.last_signal());
        s += a;
        s2 += a * a;
      }
    }
    const double mean = s / windows;
    const double se = std::sqrt((s2 / windows - mean * mean) / windows);
    // |N(0, 1/w)| has mean sqrt(2 / (pi w)).
    EXPECT_NEAR(mean, std::sqrt(2.0 / (kPi * window)), 4 * se) << window;
  }
}

TEST(Markovian, SameRecordSameHamiltonians) {
  std::mt19937_64 rng(14);
  std::normal_distribution<double> nz(0.0, 0.03);
  std::vector<double> record(500);
  for (auto& x : record) x = nz(rng);
  const ComplexMatrix rho = ComplexMatrix::Identity(2, 2) / 2.0;
  auto a = qubit_markov(0.005);
  auto b = qubit_markov(0.005);
  for (long k = 0; k < 500; ++k) {
    std::vector<double> dy{record[static_cast<std::size_t>(k)]};
    const std::span<const double> s = k == 0 ? std::span<const double>{} : std::span<const double>(dy);
    const ComplexMatrix ha = a.hamiltonian({k * 1e-3, k, 1e-3, rho, s});
    const ComplexMatrix hb = b.hamiltonian({k * 1e-3, k, 1e-3, rho, s});
    ASSERT_EQ(ha, hb) << k;
    EXPECT_LE((ha - ha.adjoint()).norm(), 1e-12);
  }
}

TEST(Markovian, RejectsBadConfiguration) {
  auto c = qubit_markov(5e-4);
  EXPECT_THROW(c.steps_per_window(1e-3), dfl::DomainError);
  const ComplexMatrix rho = ComplexMatrix::Identity(2, 2) / 2.0;
  EXPECT_THROW(c.hamiltonian({0.0, 0, 1e-3, rho, {}}), dfl::DomainError);
  EXPECT_EQ(qubit_markov(1e-3).steps_per_window(1e-3), 1);
  ComplexMatrix f(2, 2);
  f << 0, 1, 0, 0;
  EXPECT_THROW(ctl::MarkovianController(f, 0.1, ComplexMatrix::Zero(2, 2)), dfl::DomainError);
  EXPECT_THROW(ctl::MarkovianController(ComplexMatrix::Zero(2, 2), 0.0, ComplexMatrix::Zero(2, 2)),
               dfl::DomainError);
  EXPECT_THROW(ctl::markovian_qubit_controller(-1.0, 0.1), dfl::DomainError);
}

TEST(Markovian, QubitFeedbackOperator) {
  const auto c = ctl::markovian_qubit_controller(0.25, 0.1);
  EXPECT_EQ(c.window(), 0.1);
  // F = -sqrt(gamma) sigma_y acts once a window has elapsed.
  auto m = ctl::markovian_qubit_controller(0.25, 2e-3);
  const ComplexMatrix rho = ComplexMatrix::Identity(2, 2) / 2.0;
  std::vector<double> dy{1e-3};
  m.hamiltonian({0.0, 0, 1e-3, rho, {}});
  m.hamiltonian({1e-3, 1, 1e-3, rho, dy});
  const ComplexMatrix h = m.hamiltonian({2e-3, 2, 1e-3, rho, dy});
  ComplexMatrix sy(2, 2);
  sy << 0, -kI, kI, 0;
  EXPECT_NEAR((h - (-0.5 * 1.0 * sy)).norm(), 0.0, 1e-12);
}

}  // namespace
