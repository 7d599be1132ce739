#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "pouring/backprop.hpp"
#include "pouring/losses.hpp"
#include "pouring/model.hpp"

namespace pouring {

struct GradCheckConfig {
  EncoderKind kind = EncoderKind::kGru;
  int input_dim = 16;
  int hidden_dim = 8;
  int mlp_dim = 8;
  int frames = 3;
  int batch = 2;
  std::uint64_t seed = 0;
  double epsilon = 1e-4;
  double alpha = 0.01;
};

struct GradCheckReport {
  double worst_rel_error = 0.0;
  std::string worst_tensor;
  Eigen::Index worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t params_checked = 0;
  std::size_t kink_retries = 0;
  double seconds = 0.0;

  bool passed(double tolerance) const { return worst_rel_error <= tolerance; }
};

// Verifies the analytic gradients of the full training loss (height MSE plus
// the monotonicity hinge) against central finite differences, parameter by
// parameter, in double precision.
//
// The model is piecewise smooth: a perturbation that pushes a rectifier input
// or a hinge pair across zero makes the central difference itself wrong even
// though the subgradient is correct. A parameter that fails at epsilon is
// therefore re-measured at epsilon/8 and 8*epsilon; a genuine gradient bug
// disagrees at every step size, a kink straddle does not.
inline GradCheckReport gradient_check(
    const GradCheckConfig& cfg, double tolerance = 1e-4,
    const std::function<void(Model<double>&)>& tamper = nullptr) {
  const auto t0 = std::chrono::steady_clock::now();
  Model<double> model(cfg.kind, cfg.input_dim, cfg.hidden_dim, cfg.mlp_dim, cfg.seed);

  Rng rng(derive_seed(cfg.seed, 0x6f));
  std::vector<MatrixX<double>> clips(static_cast<std::size_t>(cfg.batch));
  std::vector<std::vector<double>> labels(clips.size());
  for (auto& clip : clips) {
    clip.resize(cfg.input_dim, cfg.frames);
    for (Eigen::Index i = 0; i < clip.size(); ++i) clip.data()[i] = rng.normal();
  }
  for (auto& label : labels) {
    label.resize(static_cast<std::size_t>(cfg.frames));
    for (double& v : label) v = rng.uniform(0.2, 1.4);
  }

  TrainContext<double> ctx(model);
  const double inv_b = 1.0 / static_cast<double>(clips.size());

  const auto batch_loss = [&]() {
    const auto preds = ctx.forward(clips, /*update_running=*/false);
    double loss = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      std::vector<double> p(preds[i].data(), preds[i].data() + preds[i].size());
      loss += loss_total<double>(p, labels[i], cfg.alpha);
    }
    return loss * inv_b;
  };

  model.zero_grads();
  {
    const auto preds = ctx.forward(clips, /*update_running=*/false);
    std::vector<VectorX<double>> dpred(preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i) {
      std::vector<double> p(preds[i].data(), preds[i].data() + preds[i].size());
      const std::vector<double> g = loss_total_grad<double>(p, labels[i], cfg.alpha);
      dpred[i] = Eigen::Map<const VectorX<double>>(g.data(), static_cast<Eigen::Index>(g.size())) *
                 inv_b;
    }
    ctx.backward(dpred);
  }
  if (tamper) tamper(model);

  const auto rel_error = [](double a, double n) {
    return std::abs(a - n) / std::max({1.0, std::abs(a), std::abs(n)});
  };

  GradCheckReport report;
  for (const auto& tensor : model.trainable_tensors()) {
    for (Eigen::Index i = 0; i < tensor.size(); ++i) {
      const double analytic = tensor.grad[i];
      const double saved = tensor.data[i];
      const auto numeric_at = [&](double eps) {
        tensor.data[i] = saved + eps;
        const double lp = batch_loss();
        tensor.data[i] = saved - eps;
        const double lm = batch_loss();
        tensor.data[i] = saved;
        return (lp - lm) / (2.0 * eps);
      };
      double numeric = numeric_at(cfg.epsilon);
      double err = rel_error(analytic, numeric);
      if (err > tolerance) {
        ++report.kink_retries;
        for (const double eps : {cfg.epsilon / 8.0, cfg.epsilon * 8.0}) {
          const double retry = numeric_at(eps);
          const double retry_err = rel_error(analytic, retry);
          if (retry_err < err) {
            err = retry_err;
            numeric = retry;
          }
        }
      }
      ++report.params_checked;
      if (err > report.worst_rel_error) {
        report.worst_rel_error = err;
        report.worst_tensor = tensor.name;
        report.worst_index = i;
        report.worst_analytic = analytic;
        report.worst_numeric = numeric;
      }
    }
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace pouring
