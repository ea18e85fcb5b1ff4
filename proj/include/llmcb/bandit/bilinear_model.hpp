#pragma once

#include <cmath>
#include <span>
#include <string>

#include "llmcb/core/types.hpp"

namespace llmcb::bandit {

enum class StepRule { Sgd, AdaGrad };

struct BilinearOptions {
  double learning_rate = 0.1;
  bool clamp = true;
  /// Append a constant 1 to both feature vectors, giving the form bias and
  /// linear terms.
  bool intercept = false;
  StepRule step_rule = StepRule::Sgd;
};

/// Loss regressor f(x, a) = <phi(a), W phi(x)>, trained on the 1/2-scaled
/// squared error 0.5 (f - loss)^2 so the gradient is (f - loss) phi(a) phi(x)^T.
class BilinearModel {
 public:
  BilinearModel() = default;
  BilinearModel(Eigen::Index action_dim, Eigen::Index context_dim, BilinearOptions options = {})
      : options_(options),
        action_dim_(action_dim),
        context_dim_(context_dim),
        weights_(Matrix::Zero(action_dim + options.intercept, context_dim + options.intercept)) {
    if (!(options.learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
    if (action_dim < 1 || context_dim < 1) throw ConfigError("bilinear model dimensions must be >= 1");
    if (options_.step_rule == StepRule::AdaGrad) grad_sq_ = Matrix::Zero(weights_.rows(), weights_.cols());
  }

  const BilinearOptions& options() const { return options_; }
  Eigen::Index action_dim() const { return action_dim_; }
  Eigen::Index context_dim() const { return context_dim_; }
  const Matrix& weights() const { return weights_; }
  Matrix& weights() { return weights_; }

  Vector action_features(const Vector& a) const { return features(a, action_dim_, "action"); }
  Vector context_features(const Vector& x) const { return features(x, context_dim_, "context"); }

  /// Unclamped bilinear form.
  double score(const Vector& context, const Vector& action) const {
    return action_features(action).dot(weights_ * context_features(context));
  }

  double predict(const Vector& context, const Vector& action) const {
    const double f = score(context, action);
    return options_.clamp ? std::clamp(f, 0.0, 1.0) : f;
  }

  /// Predictions for every row of `actions` (|A| x d_a), computed with one
  /// matrix-vector product against W phi(x).
  Vector predict_all(const Vector& context, const Matrix& action_features) const {
    Vector f = action_features * (weights_ * context_features(context));
    if (options_.clamp) f = f.cwiseMax(0.0).cwiseMin(1.0);
    return f;
  }

  /// d/dW of 0.5 (f - loss)^2 at the unclamped prediction.
  Matrix gradient(const Vector& context, const Vector& action, double loss) const {
    const Vector fa = action_features(action);
    const Vector fx = context_features(context);
    const double residual = fa.dot(weights_ * fx) - loss;
    return residual * fa * fx.transpose();
  }

  void update(const Vector& context, const Vector& action, LossValue loss) {
    const Matrix g = gradient(context, action, loss.value());
    if (!g.allFinite()) throw TrainingError("non-finite gradient in bilinear update");
    if (options_.step_rule == StepRule::Sgd) {
      weights_ -= options_.learning_rate * g;
    } else {
      grad_sq_ += g.cwiseAbs2();
      weights_.array() -= options_.learning_rate * g.array() / (grad_sq_.array().sqrt() + 1e-12);
    }
    if (!weights_.allFinite()) throw TrainingError("bilinear weights diverged");
  }

 private:
  Vector features(const Vector& v, Eigen::Index expected, const char* what) const {
    if (v.size() != expected)
      throw ConfigError(std::string(what) + " embedding has dimension " + std::to_string(v.size()) + ", expected " +
                        std::to_string(expected));
    if (!options_.intercept) return v;
    Vector out(expected + 1);
    out << v, 1.0;
    return out;
  }

  BilinearOptions options_;
  Eigen::Index action_dim_ = 0;
  Eigen::Index context_dim_ = 0;
  Matrix weights_;
  Matrix grad_sq_;
};

}  // namespace llmcb::bandit
