#include "qemc/unitary.hpp"

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>
#include <spdlog/spdlog.h>

namespace qemc {

namespace {

constexpr Complex kI{0.0, 1.0};

void check_gamma(double gamma) {
  if (!(gamma >= 0.0 && gamma <= kMaxGamma)) {
    throw std::invalid_argument("gamma outside [0, 1.05]: " + std::to_string(gamma));
  }
}

/// Left-multiplies every column of `m` by exp(-i angle X_b) on each qubit b.
void apply_x_rotation(ComplexMatrix& m, int n, double angle) {
  const Complex c{std::cos(angle), 0.0};
  const Complex s = -kI * std::sin(angle);
  const auto dim = static_cast<StateIndex>(m.rows());
  for (Eigen::Index col = 0; col < m.cols(); ++col) {
    Complex* v = m.col(col).data();
    for (int b = 0; b < n; ++b) {
      const StateIndex bit = StateIndex{1} << b;
      for (StateIndex r = 0; r < dim; ++r) {
        if (r & bit) continue;
        const Complex a0 = v[r];
        const Complex a1 = v[r | bit];
        v[r] = c * a0 + s * a1;
        v[r | bit] = c * a1 + s * a0;
      }
    }
  }
}

ComplexVector diagonal_phase(const RealVector& diag, double time) {
  ComplexVector out(diag.size());
  for (Eigen::Index i = 0; i < diag.size(); ++i) out(i) = std::exp(-kI * diag(i) * time);
  return out;
}

void apply_diagonal(ComplexMatrix& m, const ComplexVector& phase) {
  m = phase.asDiagonal() * m;
}

}  // namespace

RealMatrix QuantumHamiltonian::dense() const {
  const auto dim = dimension_of(n);
  RealMatrix h = diagonal.asDiagonal();
  for (StateIndex s = 0; s < dim; ++s) {
    for (int b = 0; b < n; ++b) h(s, s ^ (StateIndex{1} << b)) += gamma;
  }
  return h;
}

QuantumHamiltonian assemble_hamiltonian(const RealVector& energies, double alpha, double gamma) {
  QuantumHamiltonian h;
  h.n = static_cast<int>(std::lround(std::log2(static_cast<double>(energies.size()))));
  if (dimension_of(h.n) != static_cast<std::size_t>(energies.size())) {
    throw std::invalid_argument("assemble_hamiltonian: energy table size is not a power of two");
  }
  h.gamma = gamma;
  h.alpha = alpha;
  h.diagonal = (1.0 - gamma) * alpha * energies;
  return h;
}

QuantumHamiltonian build_hamiltonian(const IsingInstance& inst, double gamma) {
  check_gamma(gamma);
  return assemble_hamiltonian(energy_table(inst), scale_factor_alpha(inst), gamma);
}

SpectralPropagator::SpectralPropagator(const QuantumHamiltonian& h) : n_(h.n) {
  Eigen::SelfAdjointEigenSolver<RealMatrix> solver(h.dense());
  if (solver.info() != Eigen::Success) {
    throw NumericalError("SpectralPropagator: eigendecomposition failed");
  }
  eigenvalues_ = solver.eigenvalues();
  eigenvectors_ = solver.eigenvectors();
}

ComplexMatrix SpectralPropagator::unitary(double t) const {
  const RealVector c = (eigenvalues_ * t).array().cos();
  const RealVector s = (eigenvalues_ * t).array().sin();
  const RealMatrix re = eigenvectors_ * c.asDiagonal() * eigenvectors_.transpose();
  const RealMatrix im = eigenvectors_ * s.asDiagonal() * eigenvectors_.transpose();
  ComplexMatrix u(re.rows(), re.cols());
  u.real() = re;
  u.imag() = -im;
  return u;
}

RealMatrix SpectralPropagator::born_probabilities(double t) const {
  const RealVector c = (eigenvalues_ * t).array().cos();
  const RealVector s = (eigenvalues_ * t).array().sin();
  RealMatrix re = eigenvectors_ * c.asDiagonal() * eigenvectors_.transpose();
  const RealMatrix im = eigenvectors_ * s.asDiagonal() * eigenvectors_.transpose();
  re = re.array().square() + im.array().square();
  // U is symmetric, so |U(s, s0)|^2 needs no transpose.
  return re;
}

ProposalMatrix SpectralPropagator::proposal(double t) const {
  return ProposalMatrix(n_, born_probabilities(t), ProposalKind::kExactUnitary, true);
}

RealMatrix born_matrix(const ComplexMatrix& u) { return u.cwiseAbs2().transpose(); }

ProposalMatrix exact_unitary_proposal(const IsingInstance& inst, double gamma, double t) {
  return SpectralPropagator(build_hamiltonian(inst, gamma)).proposal(t);
}

int trotter_steps(double t, double dt) {
  if (!(t > 0.0) || !(dt > 0.0) || dt > t + 1e-12) {
    throw std::invalid_argument("trotter_steps: need 0 < dt <= t");
  }
  const double ratio = t / dt;
  const long m = std::lround(ratio);
  if (m <= 0) throw std::invalid_argument("trotter_steps: t/dt rounds to zero");
  if (std::abs(ratio - static_cast<double>(m)) > 1e-9) {
    spdlog::warn("Trotter step count t/dt = {} rounded to {}", ratio, m);
  }
  return static_cast<int>(m);
}

ComplexMatrix trotter_unitary(const IsingInstance& inst, double gamma, double t, double dt,
                              TrotterOrder order) {
  const QuantumHamiltonian h = build_hamiltonian(inst, gamma);
  const int m = trotter_steps(t, dt);
  const auto dim = dimension_of(h.n);
  const ComplexVector z_phase = diagonal_phase(h.diagonal, dt);

  ComplexMatrix u = ComplexMatrix::Identity(dim, dim);
  for (int step = 0; step < m; ++step) {
    apply_x_rotation(u, h.n, gamma * dt);
    apply_diagonal(u, z_phase);
  }
  if (order == TrotterOrder::kSecond) {
    const ComplexVector half = diagonal_phase(h.diagonal, 0.5 * dt);
    u = half.conjugate().asDiagonal() * u * half.asDiagonal();
  }
  return u;
}

ProposalMatrix trotter_unitary_proposal(const IsingInstance& inst, double gamma, double t,
                                        double dt, TrotterOrder order) {
  return ProposalMatrix(inst.n(), born_matrix(trotter_unitary(inst, gamma, t, dt, order)),
                        ProposalKind::kTrotter, true);
}

ComplexMatrix time_dependent_unitary(const IsingInstance& inst, const Schedule& schedule,
                                     int steps) {
  if (steps <= 0 || steps % 2 != 0) {
    throw std::invalid_argument("time_dependent_unitary: steps must be positive and even");
  }
  const RealVector energies = energy_table(inst);
  const double alpha = scale_factor_alpha(inst);
  const double slice = schedule.tau() / steps;
  const auto dim = dimension_of(inst.n());

  // Slice k and its mirror steps-1-k share the same Hamiltonian exactly.
  std::map<int, ComplexMatrix> slice_unitaries;
  ComplexMatrix u = ComplexMatrix::Identity(dim, dim);
  for (int k = 0; k < steps; ++k) {
    const int folded = std::min(k, steps - 1 - k);
    auto it = slice_unitaries.find(folded);
    if (it == slice_unitaries.end()) {
      const double gamma = schedule((folded + 0.5) / steps);
      check_gamma(gamma);
      SpectralPropagator prop(assemble_hamiltonian(energies, alpha, gamma));
      it = slice_unitaries.emplace(folded, prop.unitary(slice)).first;
    }
    u = it->second * u;
  }
  return u;
}

ProposalMatrix time_dependent_proposal(const IsingInstance& inst, const Schedule& schedule,
                                       int steps) {
  RealMatrix q = born_matrix(time_dependent_unitary(inst, schedule, steps));
  const double asym = (q - q.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-6) {
    throw NumericalError("time_dependent_proposal: asymmetric proposal (max |Q-Q^T| = " +
                         std::to_string(asym) + ")");
  }
  return ProposalMatrix(inst.n(), std::move(q), ProposalKind::kTimeDependent, true);
}

ComplexMatrix qaoa_unitary(const IsingInstance& inst, double theta, int p) {
  if (p < 1) throw std::invalid_argument("qaoa_unitary: p must be at least 1");
  const int n = inst.n();
  const auto dim = dimension_of(n);
  const ComplexVector cost_phase = diagonal_phase(scale_factor_alpha(inst) * energy_table(inst), theta);
  ComplexMatrix v = ComplexMatrix::Identity(dim, dim);
  for (int layer = 0; layer < p; ++layer) {
    apply_x_rotation(v, n, theta);
    apply_diagonal(v, cost_phase);
  }
  return v.transpose() * v;
}

ProposalMatrix qaoa_proposal(const IsingInstance& inst, double theta, int p) {
  return ProposalMatrix(inst.n(), born_matrix(qaoa_unitary(inst, theta, p)), ProposalKind::kQaoa,
                        true);
}

std::vector<double> ThetaGrid::values() const {
  if (points < 1) throw std::invalid_argument("ThetaGrid: need at least one point");
  std::vector<double> out(points);
  if (log_spaced && !(start > 0.0)) throw std::invalid_argument("ThetaGrid: log spacing needs start > 0");
  for (int k = 0; k < points; ++k) {
    const double f = points == 1 ? 0.0 : static_cast<double>(k) / (points - 1);
    out[k] = log_spaced ? start * std::pow(stop / start, f) : start + (stop - start) * f;
  }
  return out;
}

ThetaScan optimize_qaoa_theta(std::span<const IsingInstance> ensemble, int p,
                              QaoaObjective objective, const QaoaScanOptions& options) {
  if (ensemble.empty()) throw std::invalid_argument("optimize_qaoa_theta: empty ensemble");
  ThetaScan scan;
  scan.thetas = options.grid.values();
  std::vector<RealVector> energies;
  std::vector<BoltzmannTarget> targets;
  for (const auto& inst : ensemble) {
    energies.push_back(energy_table(inst));
    targets.push_back(boltzmann_from_energies(energies.back(), options.temperature));
  }
  for (std::size_t k = 0; k < scan.thetas.size(); ++k) {
    double gap_sum = 0.0;
    double ar_sum = 0.0;
    for (std::size_t i = 0; i < ensemble.size(); ++i) {
      ProposalMatrix q = qaoa_proposal(ensemble[i], scan.thetas[k], p);
      gap_sum += spectral_gap(mh_transition(q, targets[i], false)).delta;
      if (objective == QaoaObjective::kAcceptanceRate) {
        MatrixSampler sampler(std::move(q));
        ar_sum += run_chain(ensemble[i], sampler, options.temperature, options.acceptance_steps,
                            derive_seed(options.seed, k * ensemble.size() + i))
                      .acceptance_rate;
      }
    }
    const double count = static_cast<double>(ensemble.size());
    scan.mean_gap.push_back(gap_sum / count);
    scan.objective.push_back(objective == QaoaObjective::kGap ? gap_sum / count : ar_sum / count);
  }
  std::size_t best = 0;
  for (std::size_t k = 1; k < scan.thetas.size(); ++k) {
    const bool better = objective == QaoaObjective::kGap
                            ? scan.objective[k] > scan.objective[best]
                            : scan.objective[k] < scan.objective[best];
    if (better) best = k;
  }
  scan.best_index = best;
  scan.best_theta = scan.thetas[best];
  return scan;
}

double trotter_objective(double delta, double dt, double t) {
  if (!(t > 0.0)) throw std::invalid_argument("trotter_objective: t must be positive");
  return delta * dt / t;
}

RandomizedProposal randomized_strategy_proposal(const IsingInstance& inst, Rng& rng,
                                                const RandomizedStrategy& strategy) {
  ParameterDraw draw;
  draw.gamma = rng.uniform(strategy.gamma_min, strategy.gamma_max);
  draw.t = rng.uniform(strategy.t_min, strategy.t_max);
  return RandomizedProposal{exact_unitary_proposal(inst, draw.gamma, draw.t), {draw}};
}

RandomizedProposal randomized_expected_proposal(const IsingInstance& inst, Rng& rng,
                                                const RandomizedStrategy& strategy) {
  if (strategy.draws < 1) throw std::invalid_argument("randomized strategy: draws must be >= 1");
  const auto dim = dimension_of(inst.n());
  RealMatrix sum = RealMatrix::Zero(dim, dim);
  std::vector<ParameterDraw> draws;
  for (int k = 0; k < strategy.draws; ++k) {
    RandomizedProposal one = randomized_strategy_proposal(inst, rng, strategy);
    sum += one.q.matrix();
    draws.push_back(one.draws.front());
  }
  sum /= static_cast<double>(strategy.draws);
  return RandomizedProposal{ProposalMatrix(inst.n(), std::move(sum), ProposalKind::kRandomized, true),
                            std::move(draws)};
}

}  // namespace qemc
