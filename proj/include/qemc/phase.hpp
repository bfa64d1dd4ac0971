#pragma once

#include <map>
#include <optional>
#include <span>
#include <vector>

#include "qemc/common.hpp"
#include "qemc/instances.hpp"
#include "qemc/unitary.hpp"

namespace qemc {

/// Thermal state rho = exp(-H/T)/Z in spectral form.
class GibbsState {
 public:
  /// T == 0 selects the ground-state projector, averaging uniformly over
  /// eigenvalues within 1e-10 of the minimum.
  GibbsState(const RealMatrix& h, double temperature);
  /// Reuses an existing eigendecomposition (columns of `eigenvectors`).
  GibbsState(RealVector eigenvalues, RealMatrix eigenvectors, double temperature);

  double temperature() const { return temperature_; }
  const RealVector& eigenvalues() const { return eigenvalues_; }
  /// Occupation of each eigenvector.
  const RealVector& weights() const { return weights_; }

  RealMatrix density_matrix() const;
  /// <s|rho|s> for every basis state. All Z-string expectations follow.
  RealVector diagonal() const;

 private:
  double temperature_;
  RealVector eigenvalues_;
  RealMatrix eigenvectors_;
  RealVector weights_;

  void assign_weights();
};

GibbsState gibbs_state(const QuantumHamiltonian& h, double temperature);

/// <Z_i> for all i given basis-state populations.
RealVector magnetizations(const RealVector& populations, int n);

struct InstanceMoments {
  /// (1/n) sum_i <Z_i>^2
  double q_ea = 0.0;
  /// (1/n^2) sum_{ij} <Z_i Z_j>^2
  double q2 = 0.0;
  /// (1/n^4) sum_{ijkl} <Z_i Z_j Z_k Z_l>^2, repeated indices included
  double q4 = 0.0;
};

InstanceMoments instance_moments(const IsingInstance& inst, double gamma, double temperature);
InstanceMoments moments_from_populations(const RealVector& populations, int n);

struct Estimate {
  double mean = 0.0;
  double stderr_ = 0.0;
};

Estimate ea_parameter(std::span<const IsingInstance> ensemble, double gamma, double temperature);

struct BinderResult {
  double g = 0.0;
  double stderr_ = 0.0;
  int used = 0;
  int excluded = 0;
};

/// g = (3 - mean(q4 / q2^2)) / 2; instances with q2 < 1e-12 are excluded.
BinderResult binder_from_moments(std::span<const InstanceMoments> moments);
BinderResult binder_cumulant(std::span<const IsingInstance> ensemble, double gamma,
                             double temperature);

struct Curve {
  std::vector<double> gammas;
  std::vector<double> values;
};

struct PairCrossing {
  int n_a = 0;
  int n_b = 0;
  double gamma = 0.0;
};

struct Crossing {
  double gamma_c = 0.0;
  double uncertainty = 0.0;
  std::vector<PairCrossing> pairs;
};

/// Pairwise crossings by linear interpolation on the shared grid; gamma_c is
/// their mean and the uncertainty max(grid step, half range). Empty when no
/// pair changes sign.
std::optional<Crossing> find_crossing(const std::map<int, Curve>& curves);

}  // namespace qemc
