#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "qemc/common.hpp"

namespace qemc {

/// Disorder knobs for instance generation. Couplings J_ij (i<j) and fields
/// h_i are drawn i.i.d. from N(0, scale^2); a zero field scale gives h = 0.
struct DisorderConfig {
  double coupling_scale = 1.0;
  double field_scale = 1.0;
};

/// One fully connected Ising spin-glass realization.
class IsingInstance {
 public:
  /// Validates symmetry and zero diagonal of `couplings`. Zero off-diagonal
  /// entries are permitted here; generate_instance() rejects them.
  IsingInstance(RealMatrix couplings, RealVector fields, std::uint64_t seed = 0,
                std::string generator_name = "manual");

  int n() const { return static_cast<int>(fields_.size()); }
  const RealMatrix& couplings() const { return couplings_; }
  const RealVector& fields() const { return fields_; }
  std::uint64_t seed() const { return seed_; }
  const std::string& generator_name() const { return generator_name_; }

  /// Relabels spins: new spin k is old spin perm[k].
  IsingInstance permuted(std::span<const int> perm) const;

 private:
  RealMatrix couplings_;
  RealVector fields_;
  std::uint64_t seed_;
  std::string generator_name_;
};

class SpinConfiguration {
 public:
  SpinConfiguration(int n, StateIndex index);
  static SpinConfiguration from_spins(std::span<const int> spins);

  int n() const { return n_; }
  StateIndex index() const { return index_; }
  int spin(int site) const { return spin_value(index_, site); }
  std::vector<int> spins() const;

 private:
  int n_;
  StateIndex index_;
};

struct BoltzmannTarget {
  double temperature = 1.0;
  RealVector probabilities;

  double min_probability() const { return probabilities.minCoeff(); }
};

IsingInstance generate_instance(int n, std::uint64_t seed, const DisorderConfig& disorder = {});

/// Instances with seeds base_seed, base_seed + 1, ..., base_seed + count - 1.
std::vector<IsingInstance> generate_ensemble(int n, int count, std::uint64_t base_seed,
                                             const DisorderConfig& disorder = {});

double classical_energy(const IsingInstance& inst, const SpinConfiguration& s);

/// H_c(s) for every basis index s in [0, 2^n).
RealVector energy_table(const IsingInstance& inst);

BoltzmannTarget boltzmann_target(const IsingInstance& inst, double temperature);
BoltzmannTarget boltzmann_from_energies(const RealVector& energies, double temperature);

/// alpha = ||H_mix||_F / ||H_c||_F with ||H_mix||_F^2 = n 2^n.
double scale_factor_alpha(const IsingInstance& inst);

nlohmann::json instance_to_json(const IsingInstance& inst);
IsingInstance instance_from_json(const nlohmann::json& doc);

}  // namespace qemc
