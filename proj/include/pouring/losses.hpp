#pragma once

#include <span>
#include <stdexcept>
#include <vector>

namespace pouring {

// Mean squared error over frames. Unit-agnostic: feed millimetres to get mm^2.
template <typename Scalar>
Scalar loss_height(std::span<const Scalar> pred, std::span<const Scalar> truth) {
  if (pred.size() != truth.size()) {
    throw std::invalid_argument("loss_height: prediction and truth lengths differ");
  }
  if (pred.empty()) throw std::invalid_argument("loss_height: empty sequences");
  Scalar sum = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const Scalar d = pred[i] - truth[i];
    sum += d * d;
  }
  return sum / static_cast<Scalar>(pred.size());
}

// Hinge penalty on any frame-to-frame increase of the prediction:
// sum_t max(0, pred[t+1] - pred[t]). Zero iff the sequence is non-increasing.
// Sequences shorter than 2 have no pairs and score 0 by convention.
template <typename Scalar>
Scalar loss_mono(std::span<const Scalar> pred) {
  Scalar sum = 0;
  for (std::size_t i = 0; i + 1 < pred.size(); ++i) {
    const Scalar rise = pred[i + 1] - pred[i];
    if (rise > Scalar(0)) sum += rise;
  }
  return sum;
}

template <typename Scalar>
Scalar loss_total(std::span<const Scalar> pred, std::span<const Scalar> truth, Scalar alpha) {
  return loss_height(pred, truth) + alpha * loss_mono(pred);
}

// Subgradient of loss_total w.r.t. the predictions; the hinge contributes 0
// at exact ties.
template <typename Scalar>
std::vector<Scalar> loss_total_grad(std::span<const Scalar> pred, std::span<const Scalar> truth,
                                    Scalar alpha) {
  if (pred.size() != truth.size()) {
    throw std::invalid_argument("loss_total_grad: prediction and truth lengths differ");
  }
  const Scalar inv_n = Scalar(1) / static_cast<Scalar>(pred.size());
  std::vector<Scalar> grad(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    grad[i] = Scalar(2) * (pred[i] - truth[i]) * inv_n;
  }
  for (std::size_t i = 0; i + 1 < pred.size(); ++i) {
    if (pred[i + 1] > pred[i]) {
      grad[i + 1] += alpha;
      grad[i] -= alpha;
    }
  }
  return grad;
}

}  // namespace pouring
