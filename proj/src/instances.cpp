#include "qemc/instances.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "qemc/rng.hpp"

namespace qemc {

IsingInstance::IsingInstance(RealMatrix couplings, RealVector fields, std::uint64_t seed,
                             std::string generator_name)
    : couplings_(std::move(couplings)),
      fields_(std::move(fields)),
      seed_(seed),
      generator_name_(std::move(generator_name)) {
  const auto n = fields_.size();
  if (n < 1 || n > kMaxSpins) {
    throw std::invalid_argument("IsingInstance: spin count out of range: " + std::to_string(n));
  }
  if (couplings_.rows() != n || couplings_.cols() != n) {
    throw std::invalid_argument("IsingInstance: couplings must be n x n");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (couplings_(i, i) != 0.0) throw std::invalid_argument("IsingInstance: nonzero diagonal");
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (couplings_(i, j) != couplings_(j, i)) {
        throw std::invalid_argument("IsingInstance: couplings not symmetric");
      }
    }
  }
}

IsingInstance IsingInstance::permuted(std::span<const int> perm) const {
  const int size = n();
  if (static_cast<int>(perm.size()) != size) throw std::invalid_argument("permuted: size mismatch");
  RealMatrix j(size, size);
  RealVector h(size);
  for (int a = 0; a < size; ++a) {
    h(a) = fields_(perm[a]);
    for (int b = 0; b < size; ++b) j(a, b) = couplings_(perm[a], perm[b]);
  }
  return IsingInstance(std::move(j), std::move(h), seed_, generator_name_);
}

SpinConfiguration::SpinConfiguration(int n, StateIndex index) : n_(n), index_(index) {
  if (n < 1 || n > kMaxSpins || index >= dimension_of(n)) {
    throw std::invalid_argument("SpinConfiguration: index out of range");
  }
}

SpinConfiguration SpinConfiguration::from_spins(std::span<const int> spins) {
  StateIndex index = 0;
  for (std::size_t b = 0; b < spins.size(); ++b) {
    if (spins[b] == -1) {
      index |= StateIndex{1} << b;
    } else if (spins[b] != 1) {
      throw std::invalid_argument("SpinConfiguration: spins must be +1 or -1");
    }
  }
  return SpinConfiguration(static_cast<int>(spins.size()), index);
}

std::vector<int> SpinConfiguration::spins() const {
  std::vector<int> out(n_);
  for (int b = 0; b < n_; ++b) out[b] = spin(b);
  return out;
}

IsingInstance generate_instance(int n, std::uint64_t seed, const DisorderConfig& disorder) {
  if (n < 3 || n > kMaxSpins) {
    throw std::invalid_argument("generate_instance: n must lie in [3, 12], got " +
                                std::to_string(n));
  }
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(n)));
  RealMatrix j = RealMatrix::Zero(n, n);
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      const double value = disorder.coupling_scale * rng.normal();
      if (value == 0.0) throw std::runtime_error("generate_instance: drew an exact zero coupling");
      j(a, b) = value;
      j(b, a) = value;
    }
  }
  RealVector h(n);
  for (int a = 0; a < n; ++a) h(a) = disorder.field_scale * rng.normal();
  return IsingInstance(std::move(j), std::move(h), seed, std::string(Rng::kGeneratorName));
}

std::vector<IsingInstance> generate_ensemble(int n, int count, std::uint64_t base_seed,
                                             const DisorderConfig& disorder) {
  std::vector<IsingInstance> out;
  out.reserve(count);
  for (int k = 0; k < count; ++k) out.push_back(generate_instance(n, base_seed + k, disorder));
  return out;
}

double classical_energy(const IsingInstance& inst, const SpinConfiguration& s) {
  if (s.n() != inst.n()) throw std::invalid_argument("classical_energy: dimension mismatch");
  const auto& j = inst.couplings();
  const auto& h = inst.fields();
  double pair = 0.0;
  double field = 0.0;
  for (int a = 0; a < inst.n(); ++a) {
    for (int b = 0; b < inst.n(); ++b) pair += j(a, b) * s.spin(a) * s.spin(b);
    field += h(a) * s.spin(a);
  }
  return -0.5 * pair - field;
}

RealVector energy_table(const IsingInstance& inst) {
  const int n = inst.n();
  RealVector e(dimension_of(n));
  for (StateIndex s = 0; s < e.size(); ++s) e(s) = classical_energy(inst, SpinConfiguration(n, s));
  return e;
}

BoltzmannTarget boltzmann_from_energies(const RealVector& energies, double temperature) {
  if (!(temperature > 0.0)) throw std::invalid_argument("boltzmann_target: T must be positive");
  const double e_min = energies.minCoeff();
  RealVector w = ((energies.array() - e_min) * (-1.0 / temperature)).exp();
  w /= w.sum();
  if (w.minCoeff() <= 0.0) {
    throw NumericalError("boltzmann_target: probability underflow at T=" +
                         std::to_string(temperature));
  }
  return BoltzmannTarget{temperature, std::move(w)};
}

BoltzmannTarget boltzmann_target(const IsingInstance& inst, double temperature) {
  return boltzmann_from_energies(energy_table(inst), temperature);
}

double scale_factor_alpha(const IsingInstance& inst) {
  const RealVector e = energy_table(inst);
  const double hc_norm2 = e.squaredNorm();
  if (!(hc_norm2 > 0.0)) throw std::invalid_argument("scale_factor_alpha: all-zero instance");
  const double mix_norm2 = static_cast<double>(inst.n()) * static_cast<double>(e.size());
  return std::sqrt(mix_norm2 / hc_norm2);
}

nlohmann::json instance_to_json(const IsingInstance& inst) {
  nlohmann::json lower = nlohmann::json::array();
  for (int a = 0; a < inst.n(); ++a) {
    nlohmann::json row = nlohmann::json::array();
    for (int b = 0; b < a; ++b) row.push_back(inst.couplings()(a, b));
    lower.push_back(std::move(row));
  }
  std::vector<double> h(inst.fields().data(), inst.fields().data() + inst.n());
  return {{"n", inst.n()},
          {"seed", inst.seed()},
          {"generator_name", inst.generator_name()},
          {"J", std::move(lower)},
          {"h", std::move(h)}};
}

IsingInstance instance_from_json(const nlohmann::json& doc) {
  const int n = doc.at("n").get<int>();
  const auto& lower = doc.at("J");
  const auto h_values = doc.at("h").get<std::vector<double>>();
  if (static_cast<int>(lower.size()) != n || static_cast<int>(h_values.size()) != n) {
    throw std::invalid_argument("instance_from_json: inconsistent sizes");
  }
  RealMatrix j = RealMatrix::Zero(n, n);
  for (int a = 0; a < n; ++a) {
    const auto row = lower.at(a).get<std::vector<double>>();
    if (static_cast<int>(row.size()) != a) throw std::invalid_argument("instance_from_json: bad J row");
    for (int b = 0; b < a; ++b) {
      j(a, b) = row[b];
      j(b, a) = row[b];
    }
  }
  RealVector h = Eigen::Map<const RealVector>(h_values.data(), n);
  return IsingInstance(std::move(j), std::move(h), doc.at("seed").get<std::uint64_t>(),
                       doc.at("generator_name").get<std::string>());
}

}  // namespace qemc
