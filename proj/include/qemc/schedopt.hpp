#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "qemc/common.hpp"
#include "qemc/instances.hpp"
#include "qemc/schedule.hpp"

namespace qemc {

/// Matern-5/2 covariance sf2 (1 + sqrt5 r/l + 5 r^2/(3 l^2)) exp(-sqrt5 r/l).
double matern52(double r, double length_scale, double signal_variance);

struct GpHyperparameters {
  double length_scale = 0.5;
  double signal_variance = 1.0;
  double jitter = 1e-8;
};

struct GpPrediction {
  double mean = 0.0;
  double stddev = 0.0;
};

/// Exact GP regression with a constant mean equal to the sample mean of y.
class GpModel {
 public:
  /// Rows of `x` are inputs. Jitter is escalated by 10x up to 1e-4 if the
  /// Cholesky factorization fails; NumericalError beyond that.
  GpModel(RealMatrix x, RealVector y, GpHyperparameters hyper);

  GpPrediction predict(const RealVector& theta) const;
  double log_marginal_likelihood() const { return log_likelihood_; }
  const GpHyperparameters& hyperparameters() const { return hyper_; }
  int dimension() const { return static_cast<int>(x_.cols()); }
  std::size_t size() const { return static_cast<std::size_t>(x_.rows()); }

 private:
  RealMatrix x_;
  RealVector y_;
  GpHyperparameters hyper_;
  double mean_ = 0.0;
  Eigen::LLT<RealMatrix> llt_;
  RealVector weights_;
  double log_likelihood_ = 0.0;
};

/// Fits with explicit hyperparameters, or when absent selects the length
/// scale by maximum marginal likelihood over a log grid in [0.1, 2.0] with
/// signal variance var(y).
GpModel gp_fit(const RealMatrix& x, const RealVector& y,
               std::optional<GpHyperparameters> hyper = std::nullopt);

/// mu(theta) + kappa sigma(theta).
double ucb(const GpModel& model, const RealVector& theta, double kappa);

struct AcquisitionConfig {
  double kappa_initial = 2.5;
  double kappa_final = 0.5;
  int candidates = 256;
  int refine_starts = 4;
  int refine_iterations = 60;

  double kappa_at(int iteration, int iterations) const;
};

struct BoOptions {
  int dimension = 5;
  int budget = 60;
  int initial_design = 8;
  std::uint64_t seed = 1;
};

struct BoRecord {
  int iteration = 0;
  RealVector theta;
  double objective = 0.0;
  double incumbent = 0.0;
};

struct BoResult {
  RealVector best_theta;
  double best_value = 0.0;
  std::vector<BoRecord> history;
};

using Objective = std::function<double(const RealVector&)>;

/// Maximizes `objective` over the unit box: Latin-hypercube initial design
/// followed by UCB-driven iterations. Objective exceptions are rethrown as
/// std::runtime_error carrying the offending theta.
BoResult bo_optimize(const Objective& objective, const BoOptions& options,
                     const AcquisitionConfig& acquisition = {});

struct ScheduleObjectiveOptions {
  double tau = 10.0;
  int steps = 200;
  double temperature = 1.0;
};

/// Ensemble-mean spectral gap of the time-dependent proposal for theta.
double schedule_gap(std::span<const IsingInstance> ensemble, std::span<const double> controls,
                    const ScheduleObjectiveOptions& options);

struct ScheduleOptimization {
  Schedule schedule;
  double gap = 0.0;
  BoResult bo;
};

ScheduleOptimization optimize_schedule(std::span<const IsingInstance> ensemble,
                                       const ScheduleObjectiveOptions& options,
                                       const BoOptions& bo_options,
                                       const AcquisitionConfig& acquisition = {});

}  // namespace qemc
