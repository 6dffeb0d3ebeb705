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

// Collective-spin algebra on the maximal angular-momentum sector l = N/2.
//
// Basis convention used throughout the library: index 0 holds m = +l and
// index N holds m = -l, i.e. index i <-> m = l - i.

#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "dfl/core.hpp"

namespace dfl::spin {

/// Index of |l, m> in the descending-m basis.
inline int basis_index(HalfInt l, HalfInt m) { return (l.twice() - m.twice()) / 2; }

/// Magnetic quantum number stored at basis index i.
inline HalfInt basis_m(HalfInt l, int index) { return HalfInt::from_twice(l.twice() - 2 * index); }

inline void require_in_multiplet(HalfInt l, HalfInt m, const char* what) {
  if (l.twice() < 0 || m < -l || m > l || (l.twice() - m.twice()) % 2 != 0) {
    throw DomainError(std::string(what) + ": m=" + m.str() + " not in multiplet l=" + l.str());
  }
}

/// h_m = sqrt((l - m)(l + m + 1)), the amplitude of J+ |l,m> = h_m |l,m+1>.
inline double ladder_coefficient(HalfInt l, HalfInt m) {
  require_in_multiplet(l, m, "ladder_coefficient");
  const double lv = l.value();
  const double mv = m.value();
  return std::sqrt((lv - mv) * (lv + mv + 1.0));
}

/// Ladder coefficient that evaluates to 0 just outside the multiplet
/// (m = -l-1 or m = l), which is what the transfer-rate sums need.
inline double ladder_coefficient_or_zero(HalfInt l, HalfInt m) {
  if (m < -l - 1 || m > l) {
    throw DomainError("ladder_coefficient_or_zero: m=" + m.str() + " far outside l=" + l.str());
  }
  if (m == -l - 1 || m == l) return 0.0;
  return ladder_coefficient(l, m);
}

// ---------------------------------------------------------------------------
// Hermitian eigen-decomposition (cyclic complex Jacobi).

struct Eigensystem {
  RealVector values;           // descending
  ComplexMatrix vectors;       // column k pairs with values[k]
};

inline Eigensystem hermitian_eigensystem(const ComplexMatrix& op) {
  require_square(op, "hermitian_eigensystem");
  const double scale = std::max(1.0, op.cwiseAbs().maxCoeff());
  if (!is_hermitian(op, tol::kStructural * scale)) {
    throw DomainError("hermitian_eigensystem: input is not Hermitian");
  }
  const Eigen::Index n = op.rows();
  ComplexMatrix a = 0.5 * (op + op.adjoint());
  ComplexMatrix v = ComplexMatrix::Identity(n, n);

  const double frob = std::max(a.norm(), 1e-300);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) off += std::norm(a(p, q));
    }
    if (std::sqrt(off) <= 1e-16 * frob) break;

    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double abs_pq = std::abs(a(p, q));
        if (abs_pq <= 1e-300) continue;
        const Complex phase = a(p, q) / abs_pq;  // e^{i alpha}
        const double app = a(p, p).real();
        const double aqq = a(q, q).real();
        const double tau = (aqq - app) / (2.0 * abs_pq);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        // J = [[c, s e^{ia}], [-s e^{-ia}, c]] on (p, q); A <- J^H A J.
        const Complex jpq = s * phase;
        const Complex jqp = -s * std::conj(phase);
        for (Eigen::Index k = 0; k < n; ++k) {
          const Complex akp = a(k, p);
          const Complex akq = a(k, q);
          a(k, p) = akp * c + akq * jqp;
          a(k, q) = akp * jpq + akq * c;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const Complex apk = a(p, k);
          const Complex aqk = a(q, k);
          a(p, k) = c * apk + std::conj(jqp) * aqk;
          a(q, k) = std::conj(jpq) * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        a(p, p) = a(p, p).real();
        a(q, q) = a(q, q).real();
        for (Eigen::Index k = 0; k < n; ++k) {
          const Complex vkp = v(k, p);
          const Complex vkq = v(k, q);
          v(k, p) = vkp * c + vkq * jqp;
          v(k, q) = vkp * jpq + vkq * c;
        }
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<size_t>(n));
  for (Eigen::Index k = 0; k < n; ++k) order[static_cast<size_t>(k)] = k;
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index x, Eigen::Index y) { return a(x, x).real() > a(y, y).real(); });
  Eigensystem out{RealVector(n), ComplexMatrix(n, n)};
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index src = order[static_cast<size_t>(k)];
    out.values[k] = a(src, src).real();
    out.vectors.col(k) = v.col(src);
  }
  return out;
}

/// Largest eigenvalue magnitude of a Hermitian operator.
inline double operator_norm(const ComplexMatrix& hermitian) {
  const auto es = hermitian_eigensystem(hermitian);
  return std::max(std::abs(es.values[0]), std::abs(es.values[es.values.size() - 1]));
}

inline bool is_positive_semidefinite(const ComplexMatrix& m, double tolerance = tol::kPositivity) {
  if (!is_hermitian(m, tol::kStructural)) return false;
  const auto es = hermitian_eigensystem(m);
  return es.values[es.values.size() - 1] >= -tolerance;
}

/// exp(-i t G) for Hermitian G.
inline ComplexMatrix unitary_exp(const ComplexMatrix& generator, double t) {
  const auto es = hermitian_eigensystem(generator);
  ComplexVector phases(es.values.size());
  for (Eigen::Index k = 0; k < es.values.size(); ++k) {
    phases[k] = std::exp(-kI * (t * es.values[k]));
  }
  return es.vectors * phases.asDiagonal() * es.vectors.adjoint();
}

// ---------------------------------------------------------------------------
// States.

class StateVector {
 public:
  /// Normalizes the amplitudes; throws on a zero or empty vector.
  explicit StateVector(ComplexVector amplitudes) : amp_(std::move(amplitudes)) {
    if (amp_.size() < 1) throw DomainError("StateVector: empty");
    const double n = amp_.norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw DomainError("StateVector: zero or non-finite norm");
    amp_ /= n;
  }

  static StateVector basis(int dim, int index) {
    if (index < 0 || index >= dim) throw DomainError("StateVector::basis: index out of range");
    ComplexVector v = ComplexVector::Zero(dim);
    v[index] = 1.0;
    return StateVector(std::move(v));
  }

  Eigen::Index dim() const { return amp_.size(); }
  const ComplexVector& amplitudes() const { return amp_; }
  Complex operator[](Eigen::Index i) const { return amp_[i]; }
  ComplexMatrix projector() const { return amp_ * amp_.adjoint(); }

 private:
  ComplexVector amp_;
};

class DensityOperator {
 public:
  /// Validates Hermiticity, unit trace and (approximate) positivity.
  explicit DensityOperator(ComplexMatrix m) : m_(std::move(m)) {
    require_square(m_, "DensityOperator");
    if (!is_hermitian(m_, tol::kStructural)) throw DomainError("DensityOperator: not Hermitian");
    if (std::abs(m_.trace() - Complex(1.0)) > tol::kStructural) {
      throw DomainError("DensityOperator: trace != 1");
    }
    if (!is_positive_semidefinite(m_, tol::kPositivity)) {
      throw DomainError("DensityOperator: negative eigenvalue");
    }
  }

  static DensityOperator pure(const StateVector& psi) { return DensityOperator(psi.projector()); }
  static DensityOperator maximally_mixed(int dim) {
    return DensityOperator(ComplexMatrix::Identity(dim, dim) / static_cast<double>(dim));
  }
  /// Skips validation; for integrator output that is already Hermitized and normalized.
  static DensityOperator trusted(ComplexMatrix m) {
    DensityOperator d;
    d.m_ = std::move(m);
    return d;
  }

  Eigen::Index dim() const { return m_.rows(); }
  const ComplexMatrix& matrix() const { return m_; }
  double purity() const { return (m_ * m_).trace().real(); }

 private:
  DensityOperator() = default;
  ComplexMatrix m_;
};

/// <psi| rho |psi>, clamped to [0, 1].
inline double fidelity(const ComplexMatrix& rho, const ComplexVector& psi) {
  require_same_dim(rho.rows(), psi.size(), "fidelity");
  const double f = psi.dot(rho * psi).real();
  return std::clamp(f, 0.0, 1.0);
}

inline double fidelity(const DensityOperator& rho, const StateVector& psi) {
  return fidelity(rho.matrix(), psi.amplitudes());
}

inline Complex expectation(const ComplexMatrix& op, const StateVector& psi) {
  require_same_dim(op.rows(), psi.dim(), "expectation");
  return psi.amplitudes().dot(op * psi.amplitudes());
}

/// <O^dag O> - |<O>|^2; equals the usual variance for Hermitian O.
inline double variance(const ComplexMatrix& op, const StateVector& psi) {
  require_square(op, "variance");
  require_same_dim(op.rows(), psi.dim(), "variance");
  const ComplexVector o_psi = op * psi.amplitudes();
  const Complex mean = psi.amplitudes().dot(o_psi);
  return std::max(0.0, o_psi.squaredNorm() - std::norm(mean));
}

// ---------------------------------------------------------------------------
// Collective spin operators.

struct CollectiveSpinSystem {
  int n_atoms = 0;
  HalfInt l;
  ComplexMatrix jz, jplus, jminus, jx, jy;

  int dim() const { return n_atoms + 1; }
  int index_of(HalfInt m) const {
    require_in_multiplet(l, m, "CollectiveSpinSystem::index_of");
    return basis_index(l, m);
  }
  StateVector dicke_state(HalfInt m) const { return StateVector::basis(dim(), index_of(m)); }
  ComplexMatrix j_squared() const { return jx * jx + jy * jy + jz * jz; }
};

inline CollectiveSpinSystem build_system(int n_atoms) {
  if (n_atoms < 1) throw DomainError("build_system: n_atoms must be >= 1");
  CollectiveSpinSystem s;
  s.n_atoms = n_atoms;
  s.l = HalfInt::from_twice(n_atoms);
  const int d = n_atoms + 1;
  s.jz = ComplexMatrix::Zero(d, d);
  s.jplus = ComplexMatrix::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    const HalfInt m = basis_m(s.l, i);
    s.jz(i, i) = m.value();
    // J+ |m> = h_m |m+1>, and |m+1> sits at index i-1.
    if (i > 0) s.jplus(i - 1, i) = ladder_coefficient(s.l, m);
  }
  s.jminus = s.jplus.adjoint();
  s.jx = 0.5 * (s.jplus + s.jminus);
  s.jy = (s.jplus - s.jminus) / (2.0 * kI);
  return s;
}

/// exp(-i theta (sin(phi) Jx - cos(phi) Jy)) |l, -l>. The Bloch vector of the
/// result points along (sin(theta)cos(phi), sin(theta)sin(phi), -cos(theta)).
inline StateVector coherent_spin_state(const CollectiveSpinSystem& sys, double theta, double phi) {
  const ComplexMatrix generator = std::sin(phi) * sys.jx - std::cos(phi) * sys.jy;
  const ComplexMatrix u = unitary_exp(generator, theta);
  return StateVector(u.col(sys.dim() - 1));
}

inline StateVector coherent_spin_state(int n_atoms, double theta, double phi) {
  return coherent_spin_state(build_system(n_atoms), theta, phi);
}

}  // namespace dfl::spin
