#pragma once

#include <cmath>
#include <vector>

#include "pouring/model.hpp"

namespace pouring {

// Adaptive moment estimation over a model's trainable tensors.
template <typename Scalar>
class AdamOptimizer {
 public:
  explicit AdamOptimizer(Model<Scalar>& model, double learning_rate = 1e-3,
                         double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : model_(model), lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto& t : model_.trainable_tensors()) {
      m_.emplace_back(static_cast<std::size_t>(t.size()), Scalar(0));
      v_.emplace_back(static_cast<std::size_t>(t.size()), Scalar(0));
    }
  }

  // Applies one update from the gradients currently accumulated in the model.
  void step() {
    ++t_;
    const double corr1 = 1.0 - std::pow(beta1_, t_);
    const double corr2 = 1.0 - std::pow(beta2_, t_);
    const double rate = lr_ / corr1;
    const auto tensors = model_.trainable_tensors();
    for (std::size_t k = 0; k < tensors.size(); ++k) {
      Scalar* value = tensors[k].data;
      const Scalar* grad = tensors[k].grad;
      Scalar* m = m_[k].data();
      Scalar* v = v_[k].data();
      const Eigen::Index n = tensors[k].size();
      for (Eigen::Index i = 0; i < n; ++i) {
        const double g = static_cast<double>(grad[i]);
        const double mi = beta1_ * m[i] + (1.0 - beta1_) * g;
        const double vi = beta2_ * v[i] + (1.0 - beta2_) * g * g;
        m[i] = static_cast<Scalar>(mi);
        v[i] = static_cast<Scalar>(vi);
        value[i] -= static_cast<Scalar>(rate * mi / (std::sqrt(vi / corr2) + eps_));
      }
    }
  }

  long steps_taken() const { return t_; }
  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }

 private:
  Model<Scalar>& model_;
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<std::vector<Scalar>> m_, v_;
};

}  // namespace pouring
