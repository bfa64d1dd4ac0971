#include "qemc/phase.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace qemc {

namespace {

constexpr double kDegeneracyTolerance = 1e-10;
constexpr double kMinQ2 = 1e-12;

// c(S) = sum_s p_s prod_{i in S} z_i(s) for every subset mask S, via an
// in-place Walsh-Hadamard transform.
RealVector z_string_expectations(const RealVector& populations) {
  RealVector c = populations;
  const auto dim = c.size();
  for (Eigen::Index half = 1; half < dim; half <<= 1) {
    for (Eigen::Index base = 0; base < dim; base += 2 * half) {
      for (Eigen::Index k = base; k < base + half; ++k) {
        const double a = c(k);
        const double b = c(k + half);
        c(k) = a + b;
        c(k + half) = a - b;
      }
    }
  }
  return c;
}

Estimate mean_and_stderr(const std::vector<double>& values) {
  Estimate out;
  if (values.empty()) return out;
  const double count = static_cast<double>(values.size());
  for (double v : values) out.mean += v;
  out.mean /= count;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.stderr_ = std::sqrt(ss / (count - 1.0) / count);
  }
  return out;
}

}  // namespace

GibbsState::GibbsState(const RealMatrix& h, double temperature) : temperature_(temperature) {
  Eigen::SelfAdjointEigenSolver<RealMatrix> solver(h);
  if (solver.info() != Eigen::Success) throw NumericalError("GibbsState: eigensolver failed");
  eigenvalues_ = solver.eigenvalues();
  eigenvectors_ = solver.eigenvectors();
  assign_weights();
}

GibbsState::GibbsState(RealVector eigenvalues, RealMatrix eigenvectors, double temperature)
    : temperature_(temperature),
      eigenvalues_(std::move(eigenvalues)),
      eigenvectors_(std::move(eigenvectors)) {
  if (eigenvectors_.cols() != eigenvalues_.size()) {
    throw std::invalid_argument("GibbsState: spectrum and eigenvectors disagree");
  }
  assign_weights();
}

void GibbsState::assign_weights() {
  if (!(temperature_ >= 0.0)) throw std::invalid_argument("GibbsState: temperature must be >= 0");
  const double e0 = eigenvalues_.minCoeff();
  weights_.resize(eigenvalues_.size());
  for (Eigen::Index k = 0; k < eigenvalues_.size(); ++k) {
    const double gap = eigenvalues_(k) - e0;
    if (temperature_ == 0.0) {
      weights_(k) = gap <= kDegeneracyTolerance ? 1.0 : 0.0;
    } else {
      weights_(k) = std::exp(-gap / temperature_);
    }
  }
  weights_ /= weights_.sum();
}

RealMatrix GibbsState::density_matrix() const {
  return eigenvectors_ * weights_.asDiagonal() * eigenvectors_.transpose();
}

RealVector GibbsState::diagonal() const {
  return eigenvectors_.array().square().matrix() * weights_;
}

GibbsState gibbs_state(const QuantumHamiltonian& h, double temperature) {
  return GibbsState(h.dense(), temperature);
}

RealVector magnetizations(const RealVector& populations, int n) {
  if (populations.size() != static_cast<Eigen::Index>(dimension_of(n))) {
    throw std::invalid_argument("magnetizations: population size does not match n");
  }
  const RealVector c = z_string_expectations(populations);
  RealVector m(n);
  for (int i = 0; i < n; ++i) m(i) = c(Eigen::Index{1} << i);
  return m;
}

InstanceMoments moments_from_populations(const RealVector& populations, int n) {
  if (populations.size() != static_cast<Eigen::Index>(dimension_of(n))) {
    throw std::invalid_argument("moments_from_populations: population size does not match n");
  }
  const RealVector c = z_string_expectations(populations);
  InstanceMoments out;
  for (int i = 0; i < n; ++i) out.q_ea += c(1 << i) * c(1 << i);
  out.q_ea /= n;

  // Z_i Z_i = 1, so any index string reduces to the XOR of its site masks.
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const int mask = (1 << i) ^ (1 << j);
      out.q2 += c(mask) * c(mask);
    }
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const int ij = (1 << i) ^ (1 << j);
      for (int k = 0; k < n; ++k) {
        for (int l = 0; l < n; ++l) {
          const int mask = ij ^ (1 << k) ^ (1 << l);
          out.q4 += c(mask) * c(mask);
        }
      }
    }
  }
  const double n2 = static_cast<double>(n) * n;
  out.q2 /= n2;
  out.q4 /= n2 * n2;
  return out;
}

InstanceMoments instance_moments(const IsingInstance& inst, double gamma, double temperature) {
  const QuantumHamiltonian h =
      assemble_hamiltonian(energy_table(inst), scale_factor_alpha(inst), gamma);
  return moments_from_populations(gibbs_state(h, temperature).diagonal(), inst.n());
}

Estimate ea_parameter(std::span<const IsingInstance> ensemble, double gamma, double temperature) {
  std::vector<double> values;
  values.reserve(ensemble.size());
  for (const auto& inst : ensemble) values.push_back(instance_moments(inst, gamma, temperature).q_ea);
  return mean_and_stderr(values);
}

BinderResult binder_from_moments(std::span<const InstanceMoments> moments) {
  std::vector<double> ratios;
  BinderResult out;
  for (const auto& m : moments) {
    if (m.q2 < kMinQ2) {
      ++out.excluded;
      continue;
    }
    ratios.push_back(m.q4 / (m.q2 * m.q2));
  }
  out.used = static_cast<int>(ratios.size());
  if (ratios.empty()) {
    out.g = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  const Estimate r = mean_and_stderr(ratios);
  out.g = 0.5 * (3.0 - r.mean);
  out.stderr_ = 0.5 * r.stderr_;
  return out;
}

BinderResult binder_cumulant(std::span<const IsingInstance> ensemble, double gamma,
                             double temperature) {
  std::vector<InstanceMoments> moments;
  moments.reserve(ensemble.size());
  for (const auto& inst : ensemble) moments.push_back(instance_moments(inst, gamma, temperature));
  return binder_from_moments(moments);
}

std::optional<Crossing> find_crossing(const std::map<int, Curve>& curves) {
  if (curves.size() < 2) throw std::invalid_argument("find_crossing: need at least two sizes");
  const auto& grid = curves.begin()->second.gammas;
  if (grid.size() < 2) throw std::invalid_argument("find_crossing: grid too short");
  for (const auto& [n, curve] : curves) {
    if (curve.gammas != grid || curve.values.size() != grid.size()) {
      throw std::invalid_argument("find_crossing: curves must share one gamma grid");
    }
  }
  double step = 0.0;
  for (std::size_t k = 1; k < grid.size(); ++k) step = std::max(step, grid[k] - grid[k - 1]);

  Crossing out;
  for (auto a = curves.begin(); a != curves.end(); ++a) {
    for (auto b = std::next(a); b != curves.end(); ++b) {
      // Among all sign changes keep the most decisive one (largest jump in
      // the difference), which ignores near-ties where both curves saturate.
      std::optional<double> best;
      double best_jump = -1.0;
      for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
        const double d0 = b->second.values[k] - a->second.values[k];
        const double d1 = b->second.values[k + 1] - a->second.values[k + 1];
        if (!std::isfinite(d0) || !std::isfinite(d1)) continue;
        double gamma = 0.0;
        if (d0 == 0.0) {
          gamma = grid[k];
        } else if (d0 * d1 < 0.0) {
          gamma = grid[k] - d0 * (grid[k + 1] - grid[k]) / (d1 - d0);
        } else {
          continue;
        }
        const double jump = std::abs(d1 - d0);
        if (jump > best_jump) {
          best_jump = jump;
          best = gamma;
        }
      }
      if (best) out.pairs.push_back(PairCrossing{a->first, b->first, *best});
    }
  }
  if (out.pairs.empty()) return std::nullopt;
  double lo = out.pairs.front().gamma;
  double hi = lo;
  for (const auto& p : out.pairs) {
    out.gamma_c += p.gamma;
    lo = std::min(lo, p.gamma);
    hi = std::max(hi, p.gamma);
  }
  out.gamma_c /= static_cast<double>(out.pairs.size());
  out.uncertainty = std::max(step, 0.5 * (hi - lo));
  return out;
}

}  // namespace qemc
