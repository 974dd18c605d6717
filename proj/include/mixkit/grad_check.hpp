#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "mixkit/error.hpp"

namespace mixkit {

struct GradCheckOptions {
  double epsilon = 1e-6;
  double tolerance = 1e-4;
  /// Coordinates checked; all of them when the input is smaller.
  std::size_t max_coordinates = 64;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t coordinates_checked = 0;
  std::size_t worst_coordinate = 0;
  bool passed = false;
};

/// Central-difference check of `analytic` = grad f(x) on a random subset of
/// coordinates. Per coordinate the error is
///   |a - n| / max(|a|, |n|, 1e-3 * max_k |a_k|)
/// so coordinates whose true derivative is zero are judged against the
/// gradient's overall scale rather than against round-off.
inline GradCheckReport grad_check(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& analytic, const GradCheckOptions& options = {}) {
  if (analytic.size() != x.size()) throw InvalidArgument("grad_check: gradient size differs from input size");
  std::vector<std::size_t> coords(static_cast<std::size_t>(x.size()));
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  if (coords.size() > options.max_coordinates) {
    std::mt19937_64 rng(options.seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(options.max_coordinates);
    std::sort(coords.begin(), coords.end());
  }

  const double scale_floor = 1e-3 * (analytic.size() > 0 ? analytic.cwiseAbs().maxCoeff() : 0.0);
  GradCheckReport report;
  Eigen::VectorXd probe = x;
  for (std::size_t k : coords) {
    const auto i = static_cast<Eigen::Index>(k);
    probe(i) = x(i) + options.epsilon;
    const double up = f(probe);
    probe(i) = x(i) - options.epsilon;
    const double down = f(probe);
    probe(i) = x(i);
    if (!std::isfinite(up) || !std::isfinite(down)) throw InvalidArgument("grad_check: non-finite loss at perturbed point");
    const double numeric = (up - down) / (2.0 * options.epsilon);
    const double a = analytic(i);
    const double denom = std::max({std::abs(a), std::abs(numeric), scale_floor});
    const double err = denom > 0.0 ? std::abs(a - numeric) / denom : 0.0;
    if (err > report.max_relative_error) {
      report.max_relative_error = err;
      report.worst_coordinate = k;
    }
    ++report.coordinates_checked;
  }
  report.passed = report.max_relative_error < options.tolerance;
  return report;
}

/// Column-major flattening helpers for matrix-valued inputs.
inline Eigen::VectorXd flatten(const Eigen::MatrixXd& m) {
  return Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
}

inline Eigen::MatrixXd unflatten(const Eigen::VectorXd& v, Eigen::Index rows, Eigen::Index cols) {
  return Eigen::Map<const Eigen::MatrixXd>(v.data(), rows, cols);
}

}  // namespace mixkit
