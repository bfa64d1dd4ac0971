#include "qemc/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qemc {

namespace {

constexpr int kKnots = 2 * Schedule::kControlPoints + 1;
constexpr double kSpacing = 1.0 / (kKnots - 1);

}  // namespace

Schedule::Schedule(double tau, std::span<const double> control_values) : tau_(tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("Schedule: tau must be positive");
  if (control_values.size() != kControlPoints) {
    throw std::invalid_argument("Schedule: expected five control values");
  }
  for (int k = 0; k < kControlPoints; ++k) {
    const double v = control_values[k];
    if (!std::isfinite(v) || v < 0.0 || v > kMaxValue) {
      throw std::invalid_argument("Schedule: control value outside [0, 1.05]");
    }
    controls_[k] = v;
  }

  knot_s_.resize(kKnots);
  knot_y_.assign(kKnots, 0.0);
  for (int k = 0; k < kKnots; ++k) knot_s_[k] = k * kSpacing;
  for (int k = 0; k < kControlPoints; ++k) {
    knot_y_[k + 1] = controls_[k];
    knot_y_[kKnots - 2 - k] = controls_[k];
  }

  // Natural spline: M_0 = M_last = 0; Thomas algorithm on the interior rows
  // M_{k-1} + 4 M_k + M_{k+1} = 6 (y_{k+1} - 2 y_k + y_{k-1}) / h^2.
  const int m = kKnots - 2;
  std::vector<double> diag(m, 4.0), rhs(m);
  for (int k = 0; k < m; ++k) {
    rhs[k] = 6.0 * (knot_y_[k + 2] - 2.0 * knot_y_[k + 1] + knot_y_[k]) / (kSpacing * kSpacing);
  }
  for (int k = 1; k < m; ++k) {
    const double w = 1.0 / diag[k - 1];
    diag[k] -= w;
    rhs[k] -= w * rhs[k - 1];
  }
  second_derivatives_.assign(kKnots, 0.0);
  second_derivatives_[m] = rhs[m - 1] / diag[m - 1];
  for (int k = m - 2; k >= 0; --k) {
    second_derivatives_[k + 1] = (rhs[k] - second_derivatives_[k + 2]) / diag[k];
  }
}

Schedule Schedule::constant(double tau, double value) {
  if (!(tau > 0.0)) throw std::invalid_argument("Schedule: tau must be positive");
  if (!(value >= 0.0 && value <= kMaxValue)) {
    throw std::invalid_argument("Schedule: constant value outside [0, 1.05]");
  }
  Schedule s;
  s.tau_ = tau;
  s.controls_.fill(value);
  s.constant_ = true;
  s.constant_value_ = value;
  return s;
}

std::vector<double> Schedule::knots() const {
  std::vector<double> out(kKnots);
  for (int k = 0; k < kKnots; ++k) out[k] = k * kSpacing;
  return out;
}

std::vector<double> Schedule::knot_values() const {
  std::vector<double> out(kKnots);
  for (int k = 0; k < kKnots; ++k) out[k] = (*this)(k * kSpacing);
  return out;
}

double Schedule::operator()(double s) const {
  if (!(s >= 0.0 && s <= 1.0)) throw std::invalid_argument("Schedule: s outside [0, 1]");
  if (s == 0.0 || s == 1.0) return 0.0;
  if (constant_) return constant_value_;

  const double folded = std::min(s, 1.0 - s);
  const int k = std::min(static_cast<int>(folded / kSpacing), kKnots - 2);
  const double a = (knot_s_[k + 1] - folded) / kSpacing;
  const double b = 1.0 - a;
  const double value = a * knot_y_[k] + b * knot_y_[k + 1] +
                       ((a * a * a - a) * second_derivatives_[k] +
                        (b * b * b - b) * second_derivatives_[k + 1]) *
                           (kSpacing * kSpacing) / 6.0;
  return std::clamp(value, 0.0, kMaxValue);
}

nlohmann::json Schedule::to_json() const {
  return {{"tau", tau_},
          {"knots", knots()},
          {"values", knot_values()},
          {"controls", std::vector<double>(controls_.begin(), controls_.end())},
          {"constant", constant_}};
}

Schedule Schedule::from_json(const nlohmann::json& doc) {
  const double tau = doc.at("tau").get<double>();
  const auto controls = doc.at("controls").get<std::vector<double>>();
  if (doc.value("constant", false)) return constant(tau, controls.at(0));
  return Schedule(tau, controls);
}

}  // namespace qemc
