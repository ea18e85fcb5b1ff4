#pragma once

#include <algorithm>
#include <vector>

#include "llmcb/core/types.hpp"

namespace llmcb::bandit {

struct SpannerSet {
  std::vector<ActionId> indices;  ///< ascending
  double c = 2.0;
};

namespace detail {

/// Coordinates of the rows of `e` in an orthonormal basis of their span.
inline Matrix row_space_coordinates(const Matrix& e) {
  Eigen::ColPivHouseholderQR<Matrix> qr(e.transpose());
  qr.setThreshold(1e-10);
  const auto rank = qr.rank();
  if (rank == 0) throw ConfigError("compute_spanner: all action embeddings are zero");
  const Matrix q = qr.householderQ() * Matrix::Identity(e.cols(), rank);
  return e * q;
}

}  // namespace detail

/// C-approximate barycentric spanner by determinant swaps.
///
/// Works in coordinates of the embeddings' span (dimension r = rank). Starts
/// from a greedy max-volume basis, then swaps in any action that would grow
/// |det| of the basis by more than a factor C. Replacing basis row j with an
/// action multiplies |det| by that action's j-th coefficient, so at the fixed
/// point every action has all coefficients bounded by C.
inline SpannerSet compute_spanner(const Matrix& embeddings, double c = 2.0) {
  if (!(c >= 1.0)) throw ConfigError("spanner approximation factor must be >= 1");
  if (embeddings.rows() == 0) throw ConfigError("compute_spanner: no actions");
  const Matrix y = detail::row_space_coordinates(embeddings);
  const Eigen::Index n = y.rows();
  const Eigen::Index r = y.cols();

  // Greedy basis: repeatedly take the row with the largest residual after
  // projecting out the rows already chosen.
  std::vector<Eigen::Index> basis;
  Matrix residual = y;
  for (Eigen::Index k = 0; k < r; ++k) {
    Eigen::Index best = 0;
    double best_norm = -1.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double norm = residual.row(i).squaredNorm();
      if (norm > best_norm) best_norm = norm, best = i;
    }
    basis.push_back(best);
    const Vector dir = residual.row(best).transpose() / std::sqrt(best_norm);
    residual -= (residual * dir) * dir.transpose();
  }

  const double threshold = c * (1.0 + 1e-9);
  constexpr int kMaxSwaps = 100000;
  Matrix x(r, r);
  for (int swap = 0;; ++swap) {
    if (swap > kMaxSwaps) throw NumericalError("compute_spanner: swap loop did not terminate");
    for (Eigen::Index k = 0; k < r; ++k) x.row(k) = y.row(basis[static_cast<std::size_t>(k)]);
    // coef(a, j) = coefficient of basis row j in action a.
    const Matrix coef = x.transpose().partialPivLu().solve(y.transpose()).transpose();
    Eigen::Index action = 0;
    Eigen::Index slot = 0;
    const double largest = coef.cwiseAbs().maxCoeff(&action, &slot);
    if (largest <= threshold) break;
    basis[static_cast<std::size_t>(slot)] = action;
  }

  SpannerSet out;
  out.c = c;
  for (auto b : basis) out.indices.push_back(static_cast<ActionId>(b));
  std::sort(out.indices.begin(), out.indices.end());
  return out;
}

}  // namespace llmcb::bandit
