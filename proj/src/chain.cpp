#include "qemc/chain.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>

namespace qemc {

namespace {

constexpr double kNegativeDust = 1e-14;
constexpr double kRowDrift = 1e-8;

}  // namespace

std::string_view to_string(ProposalKind kind) {
  switch (kind) {
    case ProposalKind::kLocal: return "local";
    case ProposalKind::kUniform: return "uniform";
    case ProposalKind::kExactUnitary: return "exact-unitary";
    case ProposalKind::kTrotter: return "trotter";
    case ProposalKind::kTimeDependent: return "time-dependent";
    case ProposalKind::kQaoa: return "qaoa";
    case ProposalKind::kMps: return "mps";
    case ProposalKind::kRandomized: return "randomized";
    case ProposalKind::kCustom: return "custom";
  }
  return "unknown";
}

std::string_view to_string(GapMethod method) {
  return method == GapMethod::kSymmetricSimilarity ? "symmetric-similarity" : "general-eigen";
}

ProposalMatrix::ProposalMatrix(int n, RealMatrix q, ProposalKind kind, bool symmetric)
    : n_(n), q_(std::move(q)), kind_(kind), symmetric_(symmetric) {
  const auto dim = static_cast<Eigen::Index>(dimension_of(n));
  if (q_.rows() != dim || q_.cols() != dim) {
    throw std::invalid_argument("ProposalMatrix: expected a 2^n x 2^n matrix");
  }
  for (Eigen::Index r = 0; r < dim; ++r) {
    double sum = 0.0;
    for (Eigen::Index c = 0; c < dim; ++c) {
      double& v = q_(r, c);
      if (!std::isfinite(v)) throw NumericalError("ProposalMatrix: non-finite entry");
      if (v < 0.0) {
        if (v < -kNegativeDust) {
          throw NumericalError("ProposalMatrix: negative entry " + std::to_string(v));
        }
        v = 0.0;
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > kRowDrift) {
      throw NumericalError("ProposalMatrix: row " + std::to_string(r) + " sums to " +
                           std::to_string(sum));
    }
    q_.row(r) /= sum;
  }
}

double ProposalMatrix::asymmetry() const { return (q_ - q_.transpose()).cwiseAbs().maxCoeff(); }

ProposalMatrix local_proposal(int n) {
  if (n < 1) throw std::invalid_argument("local_proposal: n must be positive");
  const auto dim = dimension_of(n);
  RealMatrix q = RealMatrix::Zero(dim, dim);
  for (StateIndex s = 0; s < dim; ++s) {
    for (int b = 0; b < n; ++b) q(s, s ^ (StateIndex{1} << b)) = 1.0 / n;
  }
  return ProposalMatrix(n, std::move(q), ProposalKind::kLocal, true);
}

ProposalMatrix uniform_proposal(int n) {
  if (n < 1) throw std::invalid_argument("uniform_proposal: n must be positive");
  const auto dim = dimension_of(n);
  RealMatrix q = RealMatrix::Constant(dim, dim, 1.0 / static_cast<double>(dim));
  return ProposalMatrix(n, std::move(q), ProposalKind::kUniform, true);
}

TransitionMatrix mh_transition(const ProposalMatrix& q, const BoltzmannTarget& target,
                               bool correct_asymmetry) {
  const RealMatrix& qm = q.matrix();
  const auto dim = qm.rows();
  const RealVector& pi = target.probabilities;
  if (pi.size() != dim) throw std::invalid_argument("mh_transition: dimension mismatch");
  if (pi.minCoeff() <= 0.0) throw std::invalid_argument("mh_transition: zero target entry");

  RealMatrix p = RealMatrix::Zero(dim, dim);
  for (Eigen::Index s0 = 0; s0 < dim; ++s0) {
    double moved = 0.0;
    for (Eigen::Index s = 0; s < dim; ++s) {
      if (s == s0) continue;
      const double forward = qm(s0, s);
      if (forward == 0.0) continue;
      double ratio = pi(s) / pi(s0);
      if (correct_asymmetry) ratio *= qm(s, s0) / forward;
      const double value = forward * std::min(1.0, ratio);
      p(s0, s) = value;
      moved += value;
    }
    p(s0, s0) = 1.0 - moved;
  }
  return TransitionMatrix{std::move(p), target, correct_asymmetry || q.symmetric()};
}

namespace {

GapResult gap_from_moduli(std::vector<double> moduli, std::vector<double> distance_to_one,
                          double lambda1_value, GapMethod method) {
  const auto top = std::min_element(distance_to_one.begin(), distance_to_one.end()) -
                   distance_to_one.begin();
  if (distance_to_one[top] > 1e-8) {
    throw NumericalError("spectral_gap: no eigenvalue near 1 (closest differs by " +
                         std::to_string(distance_to_one[top]) + ")");
  }
  moduli.erase(moduli.begin() + top);
  double second = 0.0;
  for (double m : moduli) second = std::max(second, m);
  GapResult out;
  out.lambda2_abs = second;
  out.delta = std::clamp(1.0 - second, 0.0, 1.0);
  out.lambda1 = lambda1_value;
  out.method = method;
  return out;
}

}  // namespace

GapResult spectral_gap(const TransitionMatrix& p, GapMethod method) {
  const auto dim = p.p.rows();
  if (dim == 1) return GapResult{1.0, 0.0, 1.0, method};

  if (method == GapMethod::kSymmetricSimilarity) {
    if (!p.detailed_balance) {
      throw std::invalid_argument("spectral_gap: similarity method needs detailed balance");
    }
    const RealVector root = p.target.probabilities.array().sqrt();
    RealMatrix s = root.asDiagonal() * p.p * root.cwiseInverse().asDiagonal();
    s = 0.5 * (s + s.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<RealMatrix> solver(s, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw NumericalError("spectral_gap: eigensolver failed");
    const RealVector& ev = solver.eigenvalues();
    std::vector<double> moduli(dim), dist(dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
      moduli[i] = std::abs(ev(i));
      dist[i] = std::abs(ev(i) - 1.0);
    }
    return gap_from_moduli(std::move(moduli), std::move(dist), ev.maxCoeff(), method);
  }

  Eigen::EigenSolver<RealMatrix> solver(p.p, false);
  if (solver.info() != Eigen::Success) throw NumericalError("spectral_gap: eigensolver failed");
  const Eigen::VectorXcd ev = solver.eigenvalues();
  std::vector<double> moduli(dim), dist(dim);
  double lambda1 = 0.0;
  double best = 1e300;
  for (Eigen::Index i = 0; i < dim; ++i) {
    moduli[i] = std::abs(ev(i));
    dist[i] = std::abs(ev(i) - Complex(1.0, 0.0));
    if (dist[i] < best) {
      best = dist[i];
      lambda1 = ev(i).real();
    }
  }
  return gap_from_moduli(std::move(moduli), std::move(dist), lambda1, method);
}

GapResult spectral_gap(const TransitionMatrix& p) {
  return spectral_gap(p, p.detailed_balance ? GapMethod::kSymmetricSimilarity
                                            : GapMethod::kGeneralEigen);
}

MixingBounds mixing_time_bounds(double delta, const BoltzmannTarget& target, double eps) {
  if (delta == 0.0) throw std::domain_error("mixing_time_bounds: zero gap, mixing time unbounded");
  if (!(delta > 0.0 && delta <= 1.0)) throw std::invalid_argument("mixing_time_bounds: bad delta");
  if (!(eps > 0.0 && eps < 0.5)) throw std::invalid_argument("mixing_time_bounds: bad epsilon");
  MixingBounds out;
  out.lower = (1.0 / delta - 1.0) * std::log(1.0 / (2.0 * eps));
  out.upper = (1.0 / delta) * std::log(1.0 / (eps * target.min_probability()));
  return out;
}

GapResult proposal_gap(const ProposalMatrix& q, const RealVector& energies, double temperature,
                       bool correct_asymmetry) {
  return spectral_gap(
      mh_transition(q, boltzmann_from_energies(energies, temperature), correct_asymmetry));
}

StateIndex LocalSampler::propose(StateIndex current, Rng& rng) {
  return current ^ (StateIndex{1} << rng.index(static_cast<std::uint64_t>(n_)));
}

StateIndex UniformSampler::propose(StateIndex /*current*/, Rng& rng) {
  return static_cast<StateIndex>(rng.index(dimension_of(n_)));
}

MatrixSampler::MatrixSampler(ProposalMatrix q) : q_(std::move(q)), cumulative_(q_.matrix()) {
  for (Eigen::Index r = 0; r < cumulative_.rows(); ++r) {
    for (Eigen::Index c = 1; c < cumulative_.cols(); ++c) cumulative_(r, c) += cumulative_(r, c - 1);
  }
}

StateIndex MatrixSampler::propose(StateIndex current, Rng& rng) {
  const double u = rng.uniform() * cumulative_(current, cumulative_.cols() - 1);
  const auto row = cumulative_.row(current);
  Eigen::Index lo = 0;
  Eigen::Index hi = row.size() - 1;
  while (lo < hi) {
    const Eigen::Index mid = (lo + hi) / 2;
    if (row(mid) > u) hi = mid; else lo = mid + 1;
  }
  return static_cast<StateIndex>(lo);
}

double MatrixSampler::hastings_ratio(StateIndex current, StateIndex proposed) {
  if (q_.symmetric()) return 1.0;
  const double forward = q_.matrix()(current, proposed);
  return forward > 0.0 ? q_.matrix()(proposed, current) / forward : 0.0;
}

ChainTrace run_chain(const IsingInstance& inst, ProposalSampler& sampler, double temperature,
                     std::size_t steps, std::uint64_t seed, StateIndex initial) {
  if (!(temperature > 0.0)) throw std::invalid_argument("run_chain: T must be positive");
  const RealVector energies = energy_table(inst);
  Rng rng(seed);
  ChainTrace trace;
  trace.states.reserve(steps);
  trace.accepted.reserve(steps);
  StateIndex current = initial;
  std::size_t accepted = 0;
  for (std::size_t k = 0; k < steps; ++k) {
    const StateIndex proposed = sampler.propose(current, rng);
    bool accept = true;
    if (proposed != current) {
      const double ratio = std::exp(-(energies(proposed) - energies(current)) / temperature) *
                           sampler.hastings_ratio(current, proposed);
      accept = ratio >= 1.0 || rng.uniform() < ratio;
    }
    if (accept) {
      current = proposed;
      ++accepted;
    }
    trace.states.push_back(current);
    trace.accepted.push_back(accept);
  }
  trace.acceptance_rate = steps ? static_cast<double>(accepted) / static_cast<double>(steps) : 0.0;
  return trace;
}

}  // namespace qemc
