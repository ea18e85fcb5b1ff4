#pragma once

#include <algorithm>

#include "llmcb/core/types.hpp"

namespace llmcb::bandit {

struct ReductionOptions {
  int max_iterations = 20000;
  double tolerance = 1e-13;
  std::uint64_t seed = 0x5eed;
};

/// Top right-singular directions of E (columns of the returned d x k matrix),
/// ordered by decreasing singular value. Orthogonal iteration on E^T E with a
/// Rayleigh-Ritz rotation at the end.
inline Matrix top_right_singular_vectors(const Matrix& e, Eigen::Index k, ReductionOptions options = {}) {
  const Eigen::Index d = e.cols();
  if (k < 1 || k > std::min(e.rows(), d))
    throw ConfigError("target dimension must lie in [1, min(|A|, d)]");
  const Matrix gram = e.transpose() * e;
  const double scale = std::max(gram.norm(), 1e-300);

  Rng rng(options.seed);
  std::normal_distribution<double> normal;
  Matrix start(d, k);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < k; ++j) start(i, j) = normal(rng);
  Eigen::HouseholderQR<Matrix> qr(start);
  Matrix q = qr.householderQ() * Matrix::Identity(d, k);

  bool converged = false;
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    const Matrix aq = gram * q;
    const Matrix ritz = q.transpose() * aq;
    // Invariant-subspace residual; zero once span(q) is A-invariant.
    if ((aq - q * ritz).norm() <= options.tolerance * scale) {
      converged = true;
      break;
    }
    qr.compute(aq);
    q = qr.householderQ() * Matrix::Identity(d, k);
  }
  if (!converged) throw NumericalError("orthogonal iteration did not converge");

  Eigen::SelfAdjointEigenSolver<Matrix> eig(q.transpose() * gram * q);
  // Eigenvalues come back ascending; reverse to descending.
  return q * eig.eigenvectors().rowwise().reverse();
}

/// Projects action embeddings (|A| x d) onto their top `target_dim` right
/// singular directions, giving |A| x target_dim coordinates.
inline Matrix reduce_action_embeddings(const Matrix& e, Eigen::Index target_dim, ReductionOptions options = {}) {
  return e * top_right_singular_vectors(e, target_dim, options);
}

}  // namespace llmcb::bandit
