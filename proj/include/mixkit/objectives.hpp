#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "mixkit/error.hpp"
#include "mixkit/stft.hpp"

// Reference implementations of mask-inference and deep-clustering training
// objectives, each returning its value together with an analytic gradient.
//
// Bin ordering: a F x T spectrogram maps to TF rows with row index f * T + t
// (row-major), which is also the order of the tensor dump format.

namespace mixkit {

using Vector = Eigen::VectorXd;

struct LossValue {
  double value = 0.0;
  /// d value / d V for deep-clustering losses (TF x D), empty otherwise.
  RealMatrix embedding_gradient;
  /// d value / d mask_c for mask losses, empty otherwise.
  std::vector<RealMatrix> mask_gradients;
  /// permutation[c] = mask index matched to source c (tPSA only).
  std::vector<int> permutation;
};

/// Embeddings V (TF x D, unit rows), one-hot labels Y (TF x C), bin weights W
/// and the noise-dominated bin flags used by the noise-aware variant.
struct EmbeddingLabelPair {
  RealMatrix V;
  RealMatrix Y;
  Vector W;
  std::vector<bool> noise_mask;

  void validate(double norm_tolerance = 1e-6) const {
    const auto tf = V.rows();
    if (Y.rows() != tf || W.size() != tf) throw InvalidArgument("EmbeddingLabelPair: V, Y and W disagree on TF");
    if (!noise_mask.empty() && static_cast<Eigen::Index>(noise_mask.size()) != tf) {
      throw InvalidArgument("EmbeddingLabelPair: noise_mask length differs from TF");
    }
    if (V.cols() == 0 || Y.cols() == 0) throw InvalidArgument("EmbeddingLabelPair: D and C must be positive");
    if (!V.allFinite() || !W.allFinite()) throw InvalidArgument("EmbeddingLabelPair: non-finite values");
    if ((W.array() < 0.0).any()) throw InvalidArgument("EmbeddingLabelPair: negative weight");
    for (Eigen::Index i = 0; i < tf; ++i) {
      if (std::abs(V.row(i).norm() - 1.0) > norm_tolerance) {
        throw InvalidArgument("EmbeddingLabelPair: embedding rows must have unit norm");
      }
      double sum = 0.0;
      for (Eigen::Index c = 0; c < Y.cols(); ++c) {
        const double y = Y(i, c);
        if (y != 0.0 && y != 1.0) throw InvalidArgument("EmbeddingLabelPair: labels must be 0/1");
        sum += y;
      }
      if (sum != 1.0) throw InvalidArgument("EmbeddingLabelPair: label rows must be one-hot");
    }
  }
};

/// |X| / sum |X| over all bins, flattened f * T + t. All-zero input gives uniform weights.
inline Vector magnitude_ratio_weights(const ComplexMatrix& X) {
  const auto f = X.rows(), t = X.cols();
  Vector w(f * t);
  for (Eigen::Index i = 0; i < f; ++i) {
    for (Eigen::Index j = 0; j < t; ++j) w(i * t + j) = std::abs(X(i, j));
  }
  const double total = w.sum();
  if (total > 0.0) {
    w /= total;
  } else if (w.size() > 0) {
    w.setConstant(1.0 / static_cast<double>(w.size()));
  }
  return w;
}

inline Vector magnitude_ratio_weights(const Spectrogram& X) { return magnitude_ratio_weights(X.bins); }

/// clamp(|S| cos(angle S - angle X), 0, |X|), the phase-sensitive target.
inline RealMatrix tpsa_target(const ComplexMatrix& mixture, const ComplexMatrix& source) {
  RealMatrix t(mixture.rows(), mixture.cols());
  for (Eigen::Index j = 0; j < mixture.cols(); ++j) {
    for (Eigen::Index i = 0; i < mixture.rows(); ++i) {
      const double ax = std::abs(mixture(i, j));
      const double projected = ax > 0.0 ? (source(i, j) * std::conj(mixture(i, j))).real() / ax : 0.0;
      t(i, j) = std::clamp(projected, 0.0, ax);
    }
  }
  return t;
}

/// Permutation-free truncated phase-sensitive approximation:
///   min over permutations p of  sum_c || M_p(c) * |X| - T(S_c) ||_1
/// Gradient is the L1 subgradient w.r.t. each mask (0 at zero residual).
inline LossValue tpsa_loss(std::span<const RealMatrix> masks, const ComplexMatrix& mixture,
                           std::span<const ComplexMatrix> sources) {
  const std::size_t c = sources.size();
  if (c == 0 || masks.size() != c) throw InvalidArgument("tpsa_loss: need one mask per source");
  if (c > 8) throw InvalidArgument("tpsa_loss: permutation search limited to 8 sources");
  for (std::size_t k = 0; k < c; ++k) {
    if (masks[k].rows() != mixture.rows() || masks[k].cols() != mixture.cols() ||
        sources[k].rows() != mixture.rows() || sources[k].cols() != mixture.cols()) {
      throw InvalidArgument("tpsa_loss: shape mismatch");
    }
    if (!masks[k].allFinite() || (masks[k].array() < 0.0).any() || (masks[k].array() > 1.0).any()) {
      throw InvalidArgument("tpsa_loss: masks must lie in [0, 1]");
    }
  }

  const RealMatrix mag = mixture.cwiseAbs();
  std::vector<RealMatrix> targets;
  for (const auto& s : sources) targets.push_back(tpsa_target(mixture, s));

  // cost[src][mask]
  std::vector<std::vector<double>> cost(c, std::vector<double>(c));
  for (std::size_t s = 0; s < c; ++s) {
    for (std::size_t m = 0; m < c; ++m) {
      cost[s][m] = (masks[m].cwiseProduct(mag) - targets[s]).cwiseAbs().sum();
    }
  }

  std::vector<int> perm(c);
  std::iota(perm.begin(), perm.end(), 0);
  LossValue out;
  out.value = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (std::size_t s = 0; s < c; ++s) total += cost[s][static_cast<std::size_t>(perm[s])];
    if (total < out.value) {
      out.value = total;
      out.permutation = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  out.mask_gradients.assign(c, RealMatrix());
  for (std::size_t s = 0; s < c; ++s) {
    const auto m = static_cast<std::size_t>(out.permutation[s]);
    const RealMatrix residual = masks[m].cwiseProduct(mag) - targets[s];
    out.mask_gradients[m] = residual.unaryExpr([](double r) { return r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0); })
                                .cwiseProduct(mag);
  }
  return out;
}

inline LossValue tpsa_loss(std::span<const RealMatrix> masks, const Spectrogram& mixture,
                           std::span<const Spectrogram> sources) {
  std::vector<ComplexMatrix> s;
  for (const auto& x : sources) s.push_back(x.bins);
  return tpsa_loss(masks, mixture.bins, std::span<const ComplexMatrix>(s));
}

/// Unvalidated kernels: V need not have unit rows. Gradient checks perturb V
/// freely, so they call these directly.
namespace kernels {

/// ||A A^T - B B^T||_F^2 with A = diag(sqrt W) V, B = diag(sqrt W) Y, through
/// the D x D / D x C / C x C Gram identity. Gradient is w.r.t. V.
inline LossValue dc_classic(const RealMatrix& V, const RealMatrix& Y, const Vector& W) {
  const Vector s = W.cwiseSqrt();
  const RealMatrix A = s.asDiagonal() * V;
  const RealMatrix B = s.asDiagonal() * Y;
  const RealMatrix AtA = A.transpose() * A;
  const RealMatrix AtB = A.transpose() * B;
  const RealMatrix BtB = B.transpose() * B;
  LossValue out;
  out.value = AtA.squaredNorm() - 2.0 * AtB.squaredNorm() + BtB.squaredNorm();
  out.embedding_gradient = s.asDiagonal() * (4.0 * (A * AtA - B * AtB.transpose()));
  return out;
}

inline double ridge(const RealMatrix& gram) {
  const double scale = gram.trace() / static_cast<double>(gram.rows());
  return scale > 0.0 ? 1e-8 * scale : 1e-8;
}

/// Whitened k-means objective
///   || A (A^T A)^-1/2 - B (B^T B)^-1 B^T A (A^T A)^-1/2 ||_F^2
/// with ridge eps I inside both inverses (eps = 1e-8 trace / dim).
///
/// Writing M = I - B (B^T B + eps I)^-1 B^T and S = A^T A + eps I, the value
/// equals tr(A^T M^2 A S^-1), which needs neither a matrix square root nor any
/// TF x TF product.
inline LossValue dc_whitened(const RealMatrix& V, const RealMatrix& Y, const Vector& W) {
  const Vector s = W.cwiseSqrt();
  const RealMatrix A = s.asDiagonal() * V;
  const RealMatrix B = s.asDiagonal() * Y;
  const auto d = A.cols();

  RealMatrix BtB = B.transpose() * B;
  BtB.diagonal().array() += ridge(BtB);
  const Eigen::LLT<RealMatrix> b_chol(BtB);

  RealMatrix S = A.transpose() * A;
  const double eps_a = ridge(S);
  const bool trace_ridge = S.trace() > 0.0;
  S.diagonal().array() += eps_a;
  const Eigen::LLT<RealMatrix> a_chol(S);
  if (b_chol.info() != Eigen::Success || a_chol.info() != Eigen::Success) {
    throw InvalidArgument("dc_whitened: regularized Gram matrix not positive definite");
  }

  auto apply_m = [&](const RealMatrix& X) -> RealMatrix { return X - B * b_chol.solve(B.transpose() * X); };
  const RealMatrix MA = apply_m(A);
  const RealMatrix M2A = apply_m(MA);

  // value = ||MA L^-T||_F^2 where S = L L^T; nonnegative by construction.
  const RealMatrix Z = a_chol.matrixL().solve(MA.transpose());
  LossValue out;
  out.value = Z.squaredNorm();

  const RealMatrix Sinv = a_chol.solve(RealMatrix::Identity(d, d));
  const RealMatrix N = A.transpose() * M2A;
  const RealMatrix SNS = Sinv * N * Sinv;
  RealMatrix gA = 2.0 * M2A * Sinv - 2.0 * A * SNS;
  if (trace_ridge) {
    // eps_a = 1e-8 tr(A^T A) / D also moves with A.
    gA -= (2e-8 / static_cast<double>(d)) * SNS.trace() * A;
  }
  out.embedding_gradient = s.asDiagonal() * gA;
  return out;
}

/// Classic loss over all bins minus the classic loss over noise-dominated bins,
/// both with the same global weights.
inline LossValue dc_noise_aware(const RealMatrix& V, const RealMatrix& Y, const Vector& W,
                                const std::vector<bool>& noise_mask) {
  auto out = dc_classic(V, Y, W);
  std::vector<Eigen::Index> rows;
  for (std::size_t i = 0; i < noise_mask.size(); ++i) {
    if (noise_mask[i]) rows.push_back(static_cast<Eigen::Index>(i));
  }
  if (rows.empty()) return out;
  RealMatrix Vn(static_cast<Eigen::Index>(rows.size()), V.cols());
  RealMatrix Yn(static_cast<Eigen::Index>(rows.size()), Y.cols());
  Vector Wn(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto r = static_cast<Eigen::Index>(k);
    Vn.row(r) = V.row(rows[k]);
    Yn.row(r) = Y.row(rows[k]);
    Wn(r) = W(rows[k]);
  }
  const auto noise = dc_classic(Vn, Yn, Wn);
  out.value -= noise.value;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out.embedding_gradient.row(rows[k]) -= noise.embedding_gradient.row(static_cast<Eigen::Index>(k));
  }
  return out;
}

}  // namespace kernels

inline LossValue dc_classic(const EmbeddingLabelPair& pair) {
  pair.validate();
  return kernels::dc_classic(pair.V, pair.Y, pair.W);
}

inline LossValue dc_whitened(const EmbeddingLabelPair& pair) {
  pair.validate();
  return kernels::dc_whitened(pair.V, pair.Y, pair.W);
}

inline LossValue dc_noise_aware(const EmbeddingLabelPair& pair) {
  pair.validate();
  if (pair.noise_mask.empty()) throw InvalidArgument("dc_noise_aware: noise_mask not set");
  return kernels::dc_noise_aware(pair.V, pair.Y, pair.W, pair.noise_mask);
}

/// alpha * dc + (1 - alpha) * tpsa, gradients scaled by the same weights.
inline LossValue chimera_loss(const LossValue& dc, const LossValue& tpsa, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidArgument("chimera_loss: alpha must lie in [0, 1]");
  if (!std::isfinite(dc.value) || !std::isfinite(tpsa.value)) throw InvalidArgument("chimera_loss: non-finite input");
  LossValue out;
  out.value = alpha * dc.value + (1.0 - alpha) * tpsa.value;
  if (dc.embedding_gradient.size() > 0) out.embedding_gradient = alpha * dc.embedding_gradient;
  for (const auto& g : tpsa.mask_gradients) out.mask_gradients.push_back((1.0 - alpha) * g);
  out.permutation = tpsa.permutation;
  return out;
}

}  // namespace mixkit
