#pragma once

#include <cstdint>
#include <memory>
#include <string_view>
#include <vector>

#include "qemc/common.hpp"
#include "qemc/instances.hpp"
#include "qemc/rng.hpp"

namespace qemc {

enum class ProposalKind {
  kLocal,
  kUniform,
  kExactUnitary,
  kTrotter,
  kTimeDependent,
  kQaoa,
  kMps,
  kRandomized,
  kCustom,
};

std::string_view to_string(ProposalKind kind);

/// Row-stochastic proposal Q. Row index is the current state s0, column the
/// proposed state s, so entry (s0, s) holds Q(s|s0).
class ProposalMatrix {
 public:
  /// Clamps entries in [-1e-14, 0) to zero, then renormalizes rows. Throws
  /// NumericalError if an entry is more negative than that or a row sum
  /// drifts from 1 by more than 1e-8.
  ProposalMatrix(int n, RealMatrix q, ProposalKind kind, bool symmetric);

  int n() const { return n_; }
  const RealMatrix& matrix() const { return q_; }
  ProposalKind kind() const { return kind_; }
  bool symmetric() const { return symmetric_; }

  /// max |Q - Q^T| elementwise.
  double asymmetry() const;

 private:
  int n_;
  RealMatrix q_;
  ProposalKind kind_;
  bool symmetric_;
};

struct TransitionMatrix {
  RealMatrix p;
  BoltzmannTarget target;
  bool detailed_balance = false;
};

enum class GapMethod { kSymmetricSimilarity, kGeneralEigen };

std::string_view to_string(GapMethod method);

struct GapResult {
  double delta = 0.0;
  double lambda2_abs = 1.0;
  /// Eigenvalue closest to one; should be 1 to solver precision.
  double lambda1 = 1.0;
  GapMethod method = GapMethod::kSymmetricSimilarity;
};

struct MixingBounds {
  double lower = 0.0;
  double upper = 0.0;
};

inline constexpr double kDefaultMixingEpsilon = 1e-2;

ProposalMatrix local_proposal(int n);
ProposalMatrix uniform_proposal(int n);

/// Metropolis-Hastings chain. With `correct_asymmetry` the Hastings ratio
/// Q(s0|s)/Q(s|s0) enters the acceptance (a proposed move whose reverse has
/// zero probability is always rejected); otherwise A = min(1, pi(s)/pi(s0)).
TransitionMatrix mh_transition(const ProposalMatrix& q, const BoltzmannTarget& target,
                               bool correct_asymmetry);

/// delta = 1 - max_{i != 1} |lambda_i|. Uses the symmetrized similarity
/// transform when the chain satisfies detailed balance.
GapResult spectral_gap(const TransitionMatrix& p);
GapResult spectral_gap(const TransitionMatrix& p, GapMethod method);

/// Relaxation-time bounds: lower = (1/delta - 1) ln(1/(2 eps)),
/// upper = (1/delta) ln(1/(eps min pi)). Throws std::domain_error on delta == 0.
MixingBounds mixing_time_bounds(double delta, const BoltzmannTarget& target,
                                double eps = kDefaultMixingEpsilon);

/// Convenience: gap of the MH chain built from `q` at temperature T.
GapResult proposal_gap(const ProposalMatrix& q, const RealVector& energies, double temperature,
                       bool correct_asymmetry = false);

// ---------------------------------------------------------------------------
// Empirical sampling

class ProposalSampler {
 public:
  virtual ~ProposalSampler() = default;
  virtual StateIndex propose(StateIndex current, Rng& rng) = 0;
  /// Q(current|proposed) / Q(proposed|current); 1 for symmetric proposals.
  virtual double hastings_ratio(StateIndex /*current*/, StateIndex /*proposed*/) { return 1.0; }
};

class LocalSampler final : public ProposalSampler {
 public:
  explicit LocalSampler(int n) : n_(n) {}
  StateIndex propose(StateIndex current, Rng& rng) override;

 private:
  int n_;
};

class UniformSampler final : public ProposalSampler {
 public:
  explicit UniformSampler(int n) : n_(n) {}
  StateIndex propose(StateIndex current, Rng& rng) override;

 private:
  int n_;
};

/// Draws from the rows of an explicit proposal matrix.
class MatrixSampler final : public ProposalSampler {
 public:
  explicit MatrixSampler(ProposalMatrix q);
  StateIndex propose(StateIndex current, Rng& rng) override;
  double hastings_ratio(StateIndex current, StateIndex proposed) override;

 private:
  ProposalMatrix q_;
  RealMatrix cumulative_;
};

struct ChainTrace {
  std::vector<StateIndex> states;
  std::vector<bool> accepted;
  double acceptance_rate = 0.0;
};

/// Runs `steps` MH steps from `initial`. The trace holds the state after
/// each step. Deterministic for a fixed seed.
ChainTrace run_chain(const IsingInstance& inst, ProposalSampler& sampler, double temperature,
                     std::size_t steps, std::uint64_t seed, StateIndex initial = 0);

}  // namespace qemc
