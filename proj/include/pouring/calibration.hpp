#pragma once

#include <algorithm>
#include <array>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace pouring {

// Quadratic weight -> height map fitted from scale calibration pairs:
// height = a w^2 + b w + c. The fit residual is carried alongside the
// coefficients rather than discarded.
struct CalibrationPoly {
  std::array<double, 3> coefficients{};  // {a, b, c}
  std::string container;
  double residual_norm = 0.0;

  double evaluate(double weight_g) const {
    return (coefficients[0] * weight_g + coefficients[1]) * weight_g + coefficients[2];
  }
};

// Least-squares quadratic through (weight, height) pairs. Requires at least
// three distinct weights; typical use is the fifteen-point scale calibration.
inline CalibrationPoly fit_weight_to_height(
    std::span<const std::pair<double, double>> pairs, std::string container = {}) {
  std::vector<double> weights;
  weights.reserve(pairs.size());
  for (const auto& [w, h] : pairs) weights.push_back(w);
  std::sort(weights.begin(), weights.end());
  const std::size_t distinct =
      static_cast<std::size_t>(std::unique(weights.begin(), weights.end()) - weights.begin());
  if (distinct < 3) {
    throw std::invalid_argument("fit_weight_to_height: need >= 3 distinct weights, got " +
                                std::to_string(distinct));
  }

  Eigen::MatrixXd design(pairs.size(), 3);
  Eigen::VectorXd target(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const double w = pairs[i].first;
    design(static_cast<Eigen::Index>(i), 0) = w * w;
    design(static_cast<Eigen::Index>(i), 1) = w;
    design(static_cast<Eigen::Index>(i), 2) = 1.0;
    target(static_cast<Eigen::Index>(i)) = pairs[i].second;
  }
  const Eigen::Vector3d coef = design.colPivHouseholderQr().solve(target);

  CalibrationPoly poly;
  poly.coefficients = {coef(0), coef(1), coef(2)};
  poly.container = std::move(container);
  poly.residual_norm = (design * coef - target).norm();
  return poly;
}

// Piecewise-linear interpolation of 1 Hz scale readings at the query times.
// Queries outside the recorded interval are refused (no extrapolation).
inline std::vector<double> interpolate_scale(
    std::span<const std::pair<double, double>> readings, std::span<const double> query_times) {
  if (readings.size() < 2) {
    throw std::invalid_argument("interpolate_scale: need at least 2 readings");
  }
  for (std::size_t i = 1; i < readings.size(); ++i) {
    if (!(readings[i].first > readings[i - 1].first)) {
      throw std::invalid_argument("interpolate_scale: readings must be strictly time-sorted");
    }
  }
  std::vector<double> out;
  out.reserve(query_times.size());
  for (double t : query_times) {
    if (t < readings.front().first || t > readings.back().first) {
      throw std::out_of_range("interpolate_scale: query " + std::to_string(t) +
                              " s outside [" + std::to_string(readings.front().first) + ", " +
                              std::to_string(readings.back().first) + "]");
    }
    std::size_t hi = 1;
    while (hi < readings.size() - 1 && readings[hi].first < t) ++hi;
    const auto& [t0, w0] = readings[hi - 1];
    const auto& [t1, w1] = readings[hi];
    out.push_back(w0 + (w1 - w0) * (t - t0) / (t1 - t0));
  }
  return out;
}

}  // namespace pouring
