#pragma once

// Random embedding/label/mask instances for objective tests.

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "mixkit/objectives.hpp"

namespace mixkit::fixtures {

inline EmbeddingLabelPair random_pair(Eigen::Index tf, Eigen::Index d, Eigen::Index c, std::uint64_t seed,
                                      double noise_fraction = 0.3) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<Eigen::Index> label(0, c - 1);
  EmbeddingLabelPair p;
  p.V.resize(tf, d);
  p.Y = RealMatrix::Zero(tf, c);
  p.W.resize(tf);
  p.noise_mask.resize(static_cast<std::size_t>(tf));
  for (Eigen::Index i = 0; i < tf; ++i) {
    for (Eigen::Index k = 0; k < d; ++k) p.V(i, k) = n(rng);
    p.V.row(i).normalize();
    p.Y(i, label(rng)) = 1.0;
    p.W(i) = 0.1 + u(rng);
    p.noise_mask[static_cast<std::size_t>(i)] = u(rng) < noise_fraction;
  }
  p.W /= p.W.sum();
  return p;
}

inline ComplexMatrix random_complex(Eigen::Index f, Eigen::Index t, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  ComplexMatrix m(f, t);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = {n(rng), n(rng)};
  return m;
}

/// Masks strictly inside (0, 1) so finite differences stay in the domain.
inline std::vector<RealMatrix> random_masks(std::size_t c, Eigen::Index f, Eigen::Index t, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  std::vector<RealMatrix> out;
  for (std::size_t k = 0; k < c; ++k) {
    RealMatrix m(f, t);
    for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = u(rng);
    out.push_back(m);
  }
  return out;
}

}  // namespace mixkit::fixtures
