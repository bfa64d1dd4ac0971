#include "qemc/schedopt.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "qemc/chain.hpp"
#include "qemc/rng.hpp"
#include "qemc/unitary.hpp"

namespace qemc {

namespace {

constexpr double kMaxJitter = 1e-4;

std::string describe(const RealVector& theta) {
  std::ostringstream out;
  out << "theta=[";
  for (Eigen::Index i = 0; i < theta.size(); ++i) out << (i ? ", " : "") << theta(i);
  out << "]";
  return out.str();
}

RealMatrix kernel_matrix(const RealMatrix& x, const GpHyperparameters& hyper) {
  const auto m = x.rows();
  RealMatrix k(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double r = (x.row(i) - x.row(j)).norm();
      k(i, j) = k(j, i) = matern52(r, hyper.length_scale, hyper.signal_variance);
    }
  }
  return k;
}

}  // namespace

double matern52(double r, double length_scale, double signal_variance) {
  const double a = std::sqrt(5.0) * r / length_scale;
  return signal_variance * (1.0 + a + a * a / 3.0) * std::exp(-a);
}

GpModel::GpModel(RealMatrix x, RealVector y, GpHyperparameters hyper)
    : x_(std::move(x)), y_(std::move(y)), hyper_(hyper) {
  if (x_.rows() < 1 || x_.rows() != y_.size()) {
    throw std::invalid_argument("GpModel: inputs and targets disagree in size");
  }
  if (!(hyper_.length_scale > 0.0) || !(hyper_.signal_variance > 0.0) || !(hyper_.jitter > 0.0)) {
    throw std::invalid_argument("GpModel: hyperparameters must be positive");
  }
  mean_ = y_.mean();
  const RealMatrix base = kernel_matrix(x_, hyper_);
  // Jitter is relative to the signal variance so the model is scale-free in y.
  for (double jitter = hyper_.jitter;; jitter *= 10.0) {
    RealMatrix k = base;
    k.diagonal().array() += jitter * hyper_.signal_variance;
    llt_.compute(k);
    if (llt_.info() == Eigen::Success) {
      hyper_.jitter = jitter;
      break;
    }
    if (jitter * 10.0 > kMaxJitter * (1.0 + 1e-9)) {
      throw NumericalError("GpModel: kernel factorization failed at maximum jitter");
    }
  }
  const RealVector centered = y_.array() - mean_;
  weights_ = llt_.solve(centered);
  const RealMatrix l = llt_.matrixL();
  const double log_det = 2.0 * l.diagonal().array().log().sum();
  log_likelihood_ = -0.5 * centered.dot(weights_) - 0.5 * log_det -
                    0.5 * static_cast<double>(y_.size()) * std::log(2.0 * std::numbers::pi);
}

GpPrediction GpModel::predict(const RealVector& theta) const {
  if (theta.size() != x_.cols()) throw std::invalid_argument("GpModel::predict: dimension");
  RealVector kstar(x_.rows());
  for (Eigen::Index i = 0; i < x_.rows(); ++i) {
    kstar(i) = matern52((x_.row(i).transpose() - theta).norm(), hyper_.length_scale,
                        hyper_.signal_variance);
  }
  const RealVector v = llt_.matrixL().solve(kstar);
  const double var = hyper_.signal_variance - v.squaredNorm();
  return {mean_ + kstar.dot(weights_), std::sqrt(std::max(var, 0.0))};
}

GpModel gp_fit(const RealMatrix& x, const RealVector& y, std::optional<GpHyperparameters> hyper) {
  if (x.rows() < 2) throw std::invalid_argument("gp_fit: need at least two observations");
  if ((x.array() < 0.0).any() || (x.array() > 1.0).any()) {
    throw std::invalid_argument("gp_fit: inputs must lie in the unit box");
  }
  if (hyper) return GpModel(x, y, *hyper);

  const double mean = y.mean();
  double variance = (y.array() - mean).square().sum() / static_cast<double>(y.size());
  if (!(variance > 0.0)) variance = 1.0;

  constexpr int kGrid = 24;
  std::optional<GpModel> best;
  for (int g = 0; g < kGrid; ++g) {
    const double ell = 0.1 * std::pow(20.0, static_cast<double>(g) / (kGrid - 1));
    GpModel candidate(x, y, GpHyperparameters{ell, variance, 1e-8});
    if (!best || candidate.log_marginal_likelihood() > best->log_marginal_likelihood()) {
      best = std::move(candidate);
    }
  }
  return std::move(*best);
}

double ucb(const GpModel& model, const RealVector& theta, double kappa) {
  const GpPrediction p = model.predict(theta);
  return p.mean + kappa * p.stddev;
}

double AcquisitionConfig::kappa_at(int iteration, int iterations) const {
  if (iterations <= 1) return kappa_initial;
  const double frac = std::clamp(static_cast<double>(iteration) / (iterations - 1), 0.0, 1.0);
  return std::max(0.0, kappa_initial + (kappa_final - kappa_initial) * frac);
}

BoResult bo_optimize(const Objective& objective, const BoOptions& options,
                     const AcquisitionConfig& acquisition) {
  const int d = options.dimension;
  if (d < 1 || options.initial_design < 2 || options.budget < options.initial_design) {
    throw std::invalid_argument("bo_optimize: need budget >= initial design >= 2");
  }
  Rng rng(options.seed);
  BoResult result;
  RealMatrix xs(0, d);
  std::vector<double> ys;

  auto evaluate = [&](const RealVector& theta) {
    double value = 0.0;
    try {
      value = objective(theta);
    } catch (const NumericalError& e) {
      throw NumericalError(std::string(e.what()) + " at " + describe(theta));
    } catch (const std::exception& e) {
      throw std::runtime_error(std::string(e.what()) + " at " + describe(theta));
    }
    xs.conservativeResize(xs.rows() + 1, Eigen::NoChange);
    xs.row(xs.rows() - 1) = theta.transpose();
    ys.push_back(value);
    const bool improved = result.history.empty() || value > result.best_value;
    if (improved) {
      result.best_value = value;
      result.best_theta = theta;
    }
    result.history.push_back(
        BoRecord{static_cast<int>(result.history.size()), theta, value, result.best_value});
  };

  // Latin hypercube: one point per stratum in every coordinate.
  const int m0 = options.initial_design;
  std::vector<std::vector<int>> strata(d);
  for (auto& perm : strata) {
    perm.resize(m0);
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = m0 - 1; i > 0; --i) std::swap(perm[i], perm[rng.index(i + 1)]);
  }
  for (int p = 0; p < m0; ++p) {
    RealVector theta(d);
    for (int k = 0; k < d; ++k) theta(k) = (strata[k][p] + rng.uniform()) / m0;
    evaluate(theta);
  }

  const int iterations = options.budget - m0;
  for (int it = 0; it < iterations; ++it) {
    const GpModel model =
        gp_fit(xs, Eigen::Map<const RealVector>(ys.data(), static_cast<Eigen::Index>(ys.size())));
    const double kappa = acquisition.kappa_at(it, iterations);
    auto score = [&](const RealVector& t) { return ucb(model, t, kappa); };

    std::vector<std::pair<double, RealVector>> pool;
    pool.reserve(acquisition.candidates + 1);
    pool.emplace_back(score(result.best_theta), result.best_theta);
    for (int c = 0; c < acquisition.candidates; ++c) {
      RealVector t(d);
      for (int k = 0; k < d; ++k) t(k) = rng.uniform();
      pool.emplace_back(score(t), std::move(t));
    }
    const auto starts = std::min<std::size_t>(acquisition.refine_starts, pool.size());
    std::partial_sort(pool.begin(), pool.begin() + starts, pool.end(),
                      [](const auto& a, const auto& b) { return a.first > b.first; });

    // Random-perturbation hill climb with a shrinking step.
    for (std::size_t s = 0; s < starts; ++s) {
      auto& [value, point] = pool[s];
      double step = 0.1;
      for (int r = 0; r < acquisition.refine_iterations; ++r) {
        RealVector trial = point;
        for (int k = 0; k < d; ++k) trial(k) = std::clamp(trial(k) + step * rng.normal(), 0.0, 1.0);
        const double v = score(trial);
        if (v > value) {
          value = v;
          point = std::move(trial);
        } else {
          step = std::max(step * 0.85, 1e-3);
        }
      }
    }
    const auto best = std::max_element(pool.begin(), pool.begin() + starts,
                                       [](const auto& a, const auto& b) { return a.first < b.first; });
    evaluate(best->second);
  }
  return result;
}

double schedule_gap(std::span<const IsingInstance> ensemble, std::span<const double> controls,
                    const ScheduleObjectiveOptions& options) {
  if (ensemble.empty()) throw std::invalid_argument("schedule_gap: empty ensemble");
  const Schedule schedule(options.tau, controls);
  double total = 0.0;
  for (const auto& inst : ensemble) {
    const ProposalMatrix q = time_dependent_proposal(inst, schedule, options.steps);
    total += proposal_gap(q, energy_table(inst), options.temperature).delta;
  }
  return total / static_cast<double>(ensemble.size());
}

ScheduleOptimization optimize_schedule(std::span<const IsingInstance> ensemble,
                                       const ScheduleObjectiveOptions& options,
                                       const BoOptions& bo_options,
                                       const AcquisitionConfig& acquisition) {
  BoOptions opts = bo_options;
  opts.dimension = Schedule::kControlPoints;
  const Objective objective = [&](const RealVector& theta) {
    return schedule_gap(ensemble, std::span<const double>(theta.data(), theta.size()), options);
  };
  BoResult bo = bo_optimize(objective, opts, acquisition);
  Schedule best(options.tau,
                std::span<const double>(bo.best_theta.data(), bo.best_theta.size()));
  const double gap = bo.best_value;
  return ScheduleOptimization{std::move(best), gap, std::move(bo)};
}

}  // namespace qemc
