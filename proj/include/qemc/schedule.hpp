#pragma once

#include <array>
#include <span>
#include <vector>

#include <json.hpp>

namespace qemc {

/// Symmetric annealing schedule gamma(s), s = t / tau in [0, 1].
///
/// Five control values sit at s = 0.1 ... 0.5 and are mirrored onto
/// s = 0.6 ... 0.9; gamma(0) = gamma(1) = 0. A natural cubic spline runs
/// through the eleven knots and is clipped to [0, 1.05]. Evaluation folds
/// s onto [0, 0.5], so gamma(s) == gamma(1 - s) up to the rounding of 1 - s.
class Schedule {
 public:
  static constexpr int kControlPoints = 5;
  static constexpr double kMaxValue = 1.05;

  Schedule(double tau, std::span<const double> control_values);
  /// gamma(s) == value on (0, 1) with gamma(0) = gamma(1) = 0 still imposed.
  static Schedule constant(double tau, double value);

  double tau() const { return tau_; }
  const std::array<double, kControlPoints>& control_values() const { return controls_; }
  std::vector<double> knots() const;
  std::vector<double> knot_values() const;

  /// gamma at dimensionless time s in [0, 1].
  double operator()(double s) const;

  /// True when the schedule is the constant() form.
  bool is_constant() const { return constant_; }

  nlohmann::json to_json() const;
  static Schedule from_json(const nlohmann::json& doc);

 private:
  Schedule() = default;

  double tau_ = 1.0;
  std::array<double, kControlPoints> controls_{};
  bool constant_ = false;
  double constant_value_ = 0.0;
  // Spline second derivatives at the 11 knots.
  std::vector<double> second_derivatives_;
  std::vector<double> knot_s_;
  std::vector<double> knot_y_;
};

}  // namespace qemc
