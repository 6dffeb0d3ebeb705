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

#include <Eigen/Eigenvalues>
#include <random>

#include "dfl/spin_algebra.hpp"

namespace {

using dfl::Complex;
using dfl::ComplexMatrix;
using dfl::ComplexVector;
using dfl::HalfInt;
using dfl::kI;
using dfl::kPi;
namespace spin = dfl::spin;

HalfInt half(int twice) { return HalfInt::from_twice(twice); }

ComplexMatrix random_hermitian(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  ComplexMatrix a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = Complex(n(rng), n(rng));
  return 0.5 * (a + a.adjoint());
}

spin::StateVector random_state(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  ComplexVector v(d);
  for (int i = 0; i < d; ++i) v[i] = Complex(n(rng), n(rng));
  return spin::StateVector(v);
}

// Overlap modulus: equality up to global phase.
double overlap(const spin::StateVector& a, const spin::StateVector& b) {
  return std::abs(a.amplitudes().dot(b.amplitudes()));
}

TEST(LadderCoefficient, Examples) {
  EXPECT_EQ(spin::ladder_coefficient(half(1), half(1)), 0.0);
  EXPECT_DOUBLE_EQ(spin::ladder_coefficient(half(1), half(-1)), 1.0);
  EXPECT_DOUBLE_EQ(spin::ladder_coefficient(half(4), half(2)), 2.0);
  EXPECT_DOUBLE_EQ(spin::ladder_coefficient(half(4), half(0)), std::sqrt(6.0));
}

TEST(LadderCoefficient, OutsideMultipletThrows) {
  EXPECT_THROW(spin::ladder_coefficient(half(4), half(6)), dfl::DomainError);
  EXPECT_THROW(spin::ladder_coefficient(half(4), half(-6)), dfl::DomainError);
  EXPECT_THROW(spin::ladder_coefficient(half(4), half(1)), dfl::DomainError);  // wrong parity
}

TEST(BuildSystem, SmallExamples) {
  const auto s1 = spin::build_system(1);
  EXPECT_NEAR((s1.jz - ComplexMatrix(Eigen::Vector2cd(0.5, -0.5).asDiagonal())).norm(), 0.0, 1e-15);
  const auto s2 = spin::build_system(2);
  Eigen::Vector3cd diag(1.0, 0.0, -1.0);
  EXPECT_NEAR((s2.jz - ComplexMatrix(diag.asDiagonal())).norm(), 0.0, 1e-15);
  // J- lowers m: nonzero entries (m-1 row, m col) = sqrt(2), sqrt(2).
  int nonzero = 0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (std::abs(s2.jminus(i, j)) > 0) {
        ++nonzero;
        EXPECT_EQ(i, j + 1);
        EXPECT_NEAR(s2.jminus(i, j).real(), std::sqrt(2.0), 1e-15);
      }
  EXPECT_EQ(nonzero, 2);
  EXPECT_THROW(spin::build_system(0), dfl::DomainError);
}

TEST(BuildSystem, CommutationAndCasimirForNUpTo8) {
  for (int n = 1; n <= 8; ++n) {
    const auto s = spin::build_system(n);
    const double l = 0.5 * n;
    EXPECT_LT((s.jx * s.jy - s.jy * s.jx - kI * s.jz).norm(), 1e-10) << n;
    EXPECT_LT((s.jy * s.jz - s.jz * s.jy - kI * s.jx).norm(), 1e-10) << n;
    EXPECT_LT((s.jz * s.jx - s.jx * s.jz - kI * s.jy).norm(), 1e-10) << n;
    EXPECT_LT((s.jplus - s.jminus.adjoint()).norm(), 1e-15);
    const ComplexMatrix id = ComplexMatrix::Identity(n + 1, n + 1);
    EXPECT_LT((s.j_squared() - l * (l + 1) * id).norm(), 1e-10);
    EXPECT_LT((s.jplus * s.jminus - (s.j_squared() - s.jz * s.jz + s.jz)).norm(), 1e-10);
    for (int i = 0; i <= n; ++i) EXPECT_NEAR(s.jz(i, i).real(), l - i, 1e-15);
  }
}

TEST(CoherentState, Poles) {
  for (int n : {1, 2, 3, 4, 7}) {
    const auto s = spin::build_system(n);
    const HalfInt l = s.l;
    for (double phi : {0.0, 0.7, 2.5}) {
      EXPECT_NEAR(overlap(spin::coherent_spin_state(n, 0.0, phi), s.dicke_state(-l)), 1.0, 1e-12);
      EXPECT_NEAR(overlap(spin::coherent_spin_state(n, kPi, phi), s.dicke_state(l)), 1.0, 1e-12);
    }
  }
}

TEST(CoherentState, QubitEquator) {
  const auto psi = spin::coherent_spin_state(1, kPi / 2, 0.0);
  EXPECT_NEAR(std::abs(psi[0]), 1.0 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(std::abs(psi[1]), 1.0 / std::sqrt(2.0), 1e-12);
}

TEST(CoherentState, UnitNormAndBlochVector) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + trial % 6;
    const double theta = kPi * u(rng), phi = 2 * kPi * u(rng);
    const auto s = spin::build_system(n);
    const auto psi = spin::coherent_spin_state(s, theta, phi);
    EXPECT_NEAR(psi.amplitudes().norm(), 1.0, 1e-12);
    // Rotation of |l,-l> by theta: <Jz> = -l cos(theta); spin coherent states have |<J>| = l.
    const double l = 0.5 * n;
    const double jz = spin::expectation(s.jz, psi).real();
    const double jx = spin::expectation(s.jx, psi).real();
    const double jy = spin::expectation(s.jy, psi).real();
    EXPECT_NEAR(jz, -l * std::cos(theta), 1e-10);
    EXPECT_NEAR(std::sqrt(jx * jx + jy * jy + jz * jz), l, 1e-10);
  }
}

TEST(Fidelity, Examples) {
  const auto s = spin::build_system(3);
  const auto psi = s.dicke_state(half(1));
  EXPECT_NEAR(spin::fidelity(spin::DensityOperator::pure(psi), psi), 1.0, 1e-14);
  EXPECT_NEAR(spin::fidelity(spin::DensityOperator::maximally_mixed(4), psi), 0.25, 1e-14);
  EXPECT_NEAR(spin::fidelity(spin::DensityOperator::pure(s.dicke_state(half(-1))), psi), 0.0, 1e-14);
  EXPECT_THROW(spin::fidelity(spin::DensityOperator::maximally_mixed(3), psi), dfl::DomainError);
}

TEST(DensityOperator, RejectsInvalidMatrices) {
  ComplexMatrix bad = ComplexMatrix::Identity(2, 2);
  EXPECT_THROW(spin::DensityOperator{bad}, dfl::DomainError);  // trace 2
  ComplexMatrix neg(2, 2);
  neg << 1.5, 0, 0, -0.5;
  EXPECT_THROW(spin::DensityOperator{neg}, dfl::DomainError);
  ComplexMatrix nonherm(2, 2);
  nonherm << 0.5, 0.3, 0, 0.5;
  EXPECT_THROW(spin::DensityOperator{nonherm}, dfl::DomainError);
}

TEST(Variance, Examples) {
  for (int n : {1, 2, 4, 5}) {
    const auto s = spin::build_system(n);
    const double l = s.l.value();
    for (HalfInt m = -s.l; m <= s.l; m = m + 1) {
      const auto psi = s.dicke_state(m);
      EXPECT_NEAR(spin::variance(ComplexMatrix::Identity(n + 1, n + 1), psi), 0.0, 1e-14);
      EXPECT_NEAR(spin::variance(s.jy, psi), 0.5 * (l * (l + 1) - m.value() * m.value()), 1e-12);
      const double gamma = 0.37;
      const double h = m > -s.l ? spin::ladder_coefficient(s.l, m - 1) : 0.0;
      EXPECT_NEAR(spin::variance(std::sqrt(gamma) * s.jminus, psi), gamma * h * h, 1e-12);
    }
  }
}

TEST(Variance, NonnegativeAndZeroOnEigenvectors) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    const int d = 2 + trial % 5;
    const ComplexMatrix h = random_hermitian(d, rng);
    EXPECT_GE(spin::variance(h, random_state(d, rng)), 0.0);
    const auto es = spin::hermitian_eigensystem(h);
    for (int k = 0; k < d; ++k) EXPECT_NEAR(spin::variance(h, spin::StateVector(es.vectors.col(k))), 0.0, 1e-9);
  }
}

TEST(Eigensystem, Examples) {
  ComplexMatrix d = ComplexMatrix::Zero(3, 3);
  d(0, 0) = 3;
  d(1, 1) = 1;
  d(2, 2) = 2;
  const auto es = spin::hermitian_eigensystem(d);
  EXPECT_NEAR(es.values[0], 3, 1e-14);
  EXPECT_NEAR(es.values[1], 2, 1e-14);
  EXPECT_NEAR(es.values[2], 1, 1e-14);
  const auto jx = spin::hermitian_eigensystem(spin::build_system(1).jx);
  EXPECT_NEAR(jx.values[0], 0.5, 1e-14);
  EXPECT_NEAR(jx.values[1], -0.5, 1e-14);
  // Q X_A Q for qubit damping with target |e>: X_A = gamma sigma+ |e><e| sigma- = 0.
  const auto s = spin::build_system(1);
  const auto e = s.dicke_state(s.l);
  const ComplexMatrix c = s.jminus;
  const ComplexMatrix q = ComplexMatrix::Identity(2, 2) - e.projector();
  const auto qxq = spin::hermitian_eigensystem(q * c.adjoint() * e.projector() * c * q);
  for (int k = 0; k < 2; ++k) EXPECT_NEAR(qxq.values[k], 0.0, 1e-15);
}

TEST(Eigensystem, NonHermitianThrows) {
  ComplexMatrix a(2, 2);
  a << 0, 1, 0, 0;
  EXPECT_THROW(spin::hermitian_eigensystem(a), dfl::DomainError);
}

// Oracle: Eigen's SelfAdjointEigenSolver.
TEST(Eigensystem, MatchesEigenOracleOnRandomMatrices) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const int d = 1 + trial % 12;
    const ComplexMatrix h = random_hermitian(d, rng);
    const auto es = spin::hermitian_eigensystem(h);
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> oracle(h);
    const double scale = std::max(1.0, oracle.eigenvalues().cwiseAbs().maxCoeff());
    for (int k = 0; k < d; ++k) {
      EXPECT_NEAR(es.values[k], oracle.eigenvalues()[d - 1 - k], 1e-10 * scale);
      if (k > 0) {
        EXPECT_GE(es.values[k - 1], es.values[k]);
      }
      const ComplexVector v = es.vectors.col(k);
      EXPECT_LE((h * v - es.values[k] * v).norm(), 1e-9 * scale);
    }
  }
}

TEST(Eigensystem, DegenerateSpectrum) {
  const auto s = spin::build_system(4);
  const ComplexMatrix h = s.jz * s.jz;  // eigenvalues 4,4,1,1,0
  const auto es = spin::hermitian_eigensystem(h);
  const double expected[] = {4, 4, 1, 1, 0};
  for (int k = 0; k < 5; ++k) EXPECT_NEAR(es.values[k], expected[k], 1e-12);
}

TEST(UnitaryExp, MatchesEigenOracle) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 2 + trial % 5;
    const ComplexMatrix h = random_hermitian(d, rng);
    const ComplexMatrix u = spin::unitary_exp(h, 0.3);
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(h);
    ComplexVector phases(d);
    for (int k = 0; k < d; ++k) phases[k] = std::exp(-kI * 0.3 * es.eigenvalues()[k]);
    const ComplexMatrix oracle = es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
    EXPECT_LT((u - oracle).norm(), 1e-10);
    EXPECT_LT((u * u.adjoint() - ComplexMatrix::Identity(d, d)).norm(), 1e-10);
  }
}

TEST(Positivity, PredicateTracksSpectrum) {
  ComplexMatrix a(2, 2);
  a << 1, 0, 0, -1e-6;
  EXPECT_FALSE(spin::is_positive_semidefinite(a));
  a(1, 1) = -1e-10;
  EXPECT_TRUE(spin::is_positive_semidefinite(a));
  EXPECT_TRUE(dfl::is_hermitian(spin::build_system(3).jy));
  EXPECT_FALSE(dfl::is_hermitian(spin::build_system(3).jminus));
}

}  // namespace
