#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "qemc/chain.hpp"
#include "qemc/common.hpp"
#include "qemc/instances.hpp"
#include "qemc/rng.hpp"
#include "qemc/schedule.hpp"

namespace qemc {

inline constexpr double kMaxGamma = 1.05;

/// H = (1 - gamma) alpha H_c + gamma sum_i X_i, stored as its diagonal plus
/// the uniform X weight. The matrix is real symmetric in the computational
/// basis.
struct QuantumHamiltonian {
  int n = 0;
  double gamma = 0.0;
  double alpha = 1.0;
  /// (1 - gamma) alpha H_c(s) for every basis state.
  RealVector diagonal;

  double x_weight() const { return gamma; }
  RealMatrix dense() const;
};

/// Requires gamma in [0, 1.05].
QuantumHamiltonian build_hamiltonian(const IsingInstance& inst, double gamma);

/// No range check on gamma; used by thermodynamics where gamma may exceed 1.
QuantumHamiltonian assemble_hamiltonian(const RealVector& energies, double alpha, double gamma);

/// Eigendecomposition of one Hamiltonian, reused for many evolution times.
class SpectralPropagator {
 public:
  explicit SpectralPropagator(const QuantumHamiltonian& h);

  int n() const { return n_; }
  const RealVector& eigenvalues() const { return eigenvalues_; }
  const RealMatrix& eigenvectors() const { return eigenvectors_; }

  ComplexMatrix unitary(double t) const;
  /// Born-rule probabilities |<s|U(t)|s0>|^2, indexed (s0, s).
  RealMatrix born_probabilities(double t) const;
  ProposalMatrix proposal(double t) const;

 private:
  int n_;
  RealVector eigenvalues_;
  RealMatrix eigenvectors_;
};

/// |U(s, s0)|^2 transposed into proposal layout (row s0).
RealMatrix born_matrix(const ComplexMatrix& u);

ProposalMatrix exact_unitary_proposal(const IsingInstance& inst, double gamma, double t);

enum class TrotterOrder { kFirst, kSecond };

/// m = round(t/dt) steps of exp(-i H_Z dt) exp(-i H_X dt); the second-order
/// form conjugates by exp(-i H_Z dt / 2).
ComplexMatrix trotter_unitary(const IsingInstance& inst, double gamma, double t, double dt,
                              TrotterOrder order = TrotterOrder::kSecond);
ProposalMatrix trotter_unitary_proposal(const IsingInstance& inst, double gamma, double t,
                                        double dt, TrotterOrder order = TrotterOrder::kSecond);

/// Number of Trotter steps for (t, dt); warns when t/dt is not an integer
/// within 1e-9 and throws std::invalid_argument when it rounds to zero.
int trotter_steps(double t, double dt);

/// Midpoint piecewise-constant propagation on a mirror-symmetric grid of
/// `steps` (even) slices. Throws NumericalError when max|Q - Q^T| > 1e-6.
ComplexMatrix time_dependent_unitary(const IsingInstance& inst, const Schedule& schedule,
                                     int steps);
ProposalMatrix time_dependent_proposal(const IsingInstance& inst, const Schedule& schedule,
                                       int steps);

/// U = V^T V with V = prod_layers exp(-i alpha H_c theta) exp(-i H_mix theta).
ComplexMatrix qaoa_unitary(const IsingInstance& inst, double theta, int p);
ProposalMatrix qaoa_proposal(const IsingInstance& inst, double theta, int p);

enum class QaoaObjective { kGap, kAcceptanceRate };

struct ThetaGrid {
  double start = 0.01;
  double stop = 1.5;
  int points = 101;
  /// Geometric spacing; resolves the narrow optima of deep circuits.
  bool log_spaced = false;

  std::vector<double> values() const;
};

struct ThetaScan {
  std::vector<double> thetas;
  /// Ensemble-mean objective per theta (gap or acceptance rate).
  std::vector<double> objective;
  /// Ensemble-mean gap per theta (always computed).
  std::vector<double> mean_gap;
  std::size_t best_index = 0;
  double best_theta = 0.0;
};

struct QaoaScanOptions {
  ThetaGrid grid;
  double temperature = 1.0;
  std::size_t acceptance_steps = 4000;
  std::uint64_t seed = 1;
};

/// Grid search over theta: maximizes mean gap or minimizes mean acceptance
/// rate of the MH chain built on the QAOA proposal.
ThetaScan optimize_qaoa_theta(std::span<const IsingInstance> ensemble, int p,
                              QaoaObjective objective, const QaoaScanOptions& options = {});

/// f(dt) = delta dt / t.
double trotter_objective(double delta, double dt, double t);

struct RandomizedStrategy {
  double gamma_min = 0.25;
  double gamma_max = 0.6;
  double t_min = 2.0;
  double t_max = 20.0;
  int draws = 32;
};

struct ParameterDraw {
  double gamma = 0.0;
  double t = 0.0;
};

struct RandomizedProposal {
  ProposalMatrix q;
  std::vector<ParameterDraw> draws;
};

/// Single draw of (gamma, t) and the exact-unitary proposal it defines.
RandomizedProposal randomized_strategy_proposal(const IsingInstance& inst, Rng& rng,
                                                const RandomizedStrategy& strategy = {});

/// Effective proposal of the randomized strategy: mean of `strategy.draws`
/// sampled exact-unitary proposals.
RandomizedProposal randomized_expected_proposal(const IsingInstance& inst, Rng& rng,
                                                const RandomizedStrategy& strategy = {});

}  // namespace qemc
