// Independent reference constructions used by the tests. Everything here is
// built from Kronecker products, Pade matrix exponentials and plain loops so
// it shares no code path with the library.
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include "qemc/instances.hpp"

namespace oracle {

using qemc::ComplexMatrix;
using qemc::IsingInstance;
using qemc::RealMatrix;
using qemc::RealVector;
using qemc::StateIndex;

inline double spin(StateIndex s, int k) { return ((s >> k) & 1u) ? -1.0 : 1.0; }

inline double energy(const IsingInstance& inst, StateIndex s) {
  double e = 0.0;
  const int n = inst.n();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) e -= 0.5 * inst.couplings()(i, j) * spin(s, i) * spin(s, j);
    e -= inst.fields()(i) * spin(s, i);
  }
  return e;
}

/// Single-site operator `op` acting on spin k of n. Spin 0 is the least
/// significant bit, i.e. the rightmost Kronecker factor.
inline RealMatrix site_operator(const RealMatrix& op, int k, int n) {
  RealMatrix out = RealMatrix::Identity(1, 1);
  for (int pos = n - 1; pos >= 0; --pos) {
    const RealMatrix f = pos == k ? op : RealMatrix::Identity(2, 2);
    out = Eigen::kroneckerProduct(out, f).eval();
  }
  return out;
}

inline RealMatrix pauli_x() {
  RealMatrix x(2, 2);
  x << 0, 1, 1, 0;
  return x;
}

inline RealMatrix pauli_z() {
  RealMatrix z(2, 2);
  z << 1, 0, 0, -1;
  return z;
}

inline RealMatrix dense_mixer(int n) {
  RealMatrix h = RealMatrix::Zero(1 << n, 1 << n);
  for (int k = 0; k < n; ++k) h += site_operator(pauli_x(), k, n);
  return h;
}

inline RealMatrix dense_classical_operator(const IsingInstance& inst) {
  const int n = inst.n();
  RealMatrix h = RealMatrix::Zero(1 << n, 1 << n);
  for (int i = 0; i < n; ++i) {
    const RealMatrix zi = site_operator(pauli_z(), i, n);
    h -= inst.fields()(i) * zi;
    for (int j = 0; j < n; ++j) {
      if (i != j) h -= 0.5 * inst.couplings()(i, j) * zi * site_operator(pauli_z(), j, n);
    }
  }
  return h;
}

inline double dense_alpha(const IsingInstance& inst) {
  return dense_mixer(inst.n()).norm() / dense_classical_operator(inst).norm();
}

/// (1 - gamma) alpha H_c + gamma sum_i X_i.
inline RealMatrix dense_hamiltonian(const IsingInstance& inst, double gamma) {
  return (1.0 - gamma) * dense_alpha(inst) * dense_classical_operator(inst) + gamma * dense_mixer(inst.n());
}

inline ComplexMatrix expm_i(const RealMatrix& h, double t) {
  const ComplexMatrix a = std::complex<double>(0.0, -t) * h.cast<std::complex<double>>();
  return a.exp();
}

/// Proposal Q(s0, s) = |<s|U|s0>|^2 from a dense unitary.
inline RealMatrix born(const ComplexMatrix& u) { return u.cwiseAbs2().transpose(); }

inline ComplexMatrix trotter_first_order(const IsingInstance& inst, double gamma, double t, double dt) {
  const int m = static_cast<int>(std::lround(t / dt));
  const RealMatrix hz = (1.0 - gamma) * dense_alpha(inst) * dense_classical_operator(inst);
  const RealMatrix hx = gamma * dense_mixer(inst.n());
  const ComplexMatrix step = expm_i(hz, dt) * expm_i(hx, dt);
  ComplexMatrix u = ComplexMatrix::Identity(step.rows(), step.cols());
  for (int k = 0; k < m; ++k) u = step * u;
  return u;
}

/// Metropolis-Hastings matrix built from scratch with explicit loops.
inline RealMatrix mh_matrix(const RealMatrix& q, const RealVector& pi, bool hastings) {
  const auto d = q.rows();
  RealMatrix p = RealMatrix::Zero(d, d);
  for (Eigen::Index a = 0; a < d; ++a) {
    double off = 0.0;
    for (Eigen::Index b = 0; b < d; ++b) {
      if (a == b || q(a, b) == 0.0) continue;
      double ratio = pi(b) / pi(a);
      if (hastings) ratio *= q(b, a) / q(a, b);
      p(a, b) = q(a, b) * std::min(1.0, ratio);
      off += p(a, b);
    }
    p(a, a) = 1.0 - off;
  }
  return p;
}

/// 1 - second largest |eigenvalue| from a general eigensolver.
inline double general_gap(const RealMatrix& p) {
  Eigen::EigenSolver<RealMatrix> es(p);
  std::vector<double> mods;
  for (Eigen::Index k = 0; k < p.rows(); ++k) mods.push_back(std::abs(es.eigenvalues()(k)));
  std::sort(mods.begin(), mods.end(), std::greater<>());
  return 1.0 - mods.at(1);
}

inline RealVector boltzmann(const IsingInstance& inst, double temperature) {
  const int d = 1 << inst.n();
  RealVector w(d);
  for (int s = 0; s < d; ++s) w(s) = std::exp(-energy(inst, static_cast<StateIndex>(s)) / temperature);
  return w / w.sum();
}

}  // namespace oracle
