#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "pouring/adam.hpp"
#include "pouring/backprop.hpp"
#include "pouring/dataset.hpp"
#include "pouring/losses.hpp"
#include "pouring/model.hpp"
#include "pouring/thread_pool.hpp"

namespace pouring {

struct TrainConfig {
  EncoderKind encoder = EncoderKind::kGru;
  double alpha = 0.01;               // monotonicity loss weight
  double clip_seconds = kClipSeconds;
  double learning_rate = 1e-3;
  double lr_decay = 1.0;        // per-epoch multiplicative decay (1 = constant)
  double grad_clip_norm = 1.0;  // global-norm gradient clip (0 disables)
  int batch_size = 32;
  int epochs = 50;
  std::uint64_t seed = 0;
  double clips_per_second = 0.7;     // clip sampling density per recording second
  double val_fraction = 0.2;         // fraction of pours held out for validation
  int hidden_dim = Model<float>::kDefaultHiddenDim;
  int mlp_dim = Model<float>::kDefaultMlpDim;
  int threads = 1;                   // 0 = hardware concurrency
};

struct EpochLog {
  int epoch = 0;
  double train_loss_mm2 = 0.0;  // combined objective, expressed in mm^2
  double val_loss_mm2 = 0.0;    // held-out height MSE in mm^2
  double val_mono_mm = 0.0;     // held-out monotonicity hinge in mm (per clip)
  double wall_seconds = 0.0;
};

struct TrainResult {
  Model<float> model;               // parameters of the best validation epoch
  std::vector<EpochLog> log;
  int best_epoch = 0;
  double best_val_mm2 = 0.0;
  std::vector<std::string> train_ids, val_ids;
};

// Normalized model input for one clip: (magnitude - mean) / std, one column
// per frame.
inline MatrixX<float> clip_matrix(const Spectrogram& spec, const Normalization& norm) {
  MatrixX<float> X(spec.rows, spec.cols);
  const float inv_std = 1.0f / norm.spec_std;
  for (std::uint32_t b = 0; b < spec.rows; ++b) {
    for (std::uint32_t t = 0; t < spec.cols; ++t) {
      X(b, t) = (spec.at(b, t) - norm.spec_mean) * inv_std;
    }
  }
  return X;
}

// Mini-batch training with the adaptive moment estimation update rule on the
// combined objective (height MSE plus alpha times the monotonicity hinge,
// both in normalized label units). Pours are split into train/validation by
// trace id, never by clip. Returns the parameters of the epoch with the best
// validation height MSE. Bit-reproducible for a fixed config.
inline TrainResult train(const std::vector<PourRecord>& pours, const TrainConfig& config) {
  if (pours.empty()) throw std::invalid_argument("train: empty dataset");
  if (config.clip_seconds != kClipSeconds) {
    throw std::invalid_argument("train: clip_seconds is fixed at 4 by the audio front-end");
  }
  if (config.epochs < 1 || config.batch_size < 1) {
    throw std::invalid_argument("train: epochs and batch_size must be positive");
  }

  // Split by pour id, deterministically.
  std::vector<std::size_t> order(pours.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng split_rng(derive_seed(config.seed, 0x5417));
  shuffle(order, split_rng);
  std::size_t n_val = static_cast<std::size_t>(std::llround(config.val_fraction * pours.size()));
  n_val = std::clamp<std::size_t>(n_val, pours.size() > 1 ? 1 : 0, pours.size() - 1);
  std::set<std::size_t> val_set(order.begin(), order.begin() + n_val);

  TrainResult result{Model<float>(config.encoder, Model<float>::kDefaultInputDim,
                                  config.hidden_dim, config.mlp_dim,
                                  derive_seed(config.seed, 0x1417)),
                     {}, 0, 0.0, {}, {}};

  // Clip sampling (per-pour seeds, so dataset order does not matter).
  std::vector<ClipSample> train_clips, val_clips;
  for (std::size_t i = 0; i < pours.size(); ++i) {
    auto clips = sample_clips(pours[i].trace, pours[i].duration_s, config.clips_per_second,
                              derive_seed(config.seed, i), i, pours[i].trace_id);
    auto& bucket = val_set.count(i) ? val_clips : train_clips;
    (val_set.count(i) ? result.val_ids : result.train_ids).push_back(pours[i].trace_id);
    for (auto& c : clips) bucket.push_back(std::move(c));
  }
  if (train_clips.empty() || val_clips.empty()) {
    throw std::invalid_argument("train: need clips on both sides of the split");
  }

  ThreadPool pool(config.threads == 0 ? 0 : static_cast<unsigned>(config.threads));

  // Dataset normalization: global spectrogram mean/std over training clips.
  {
    double sum = 0.0, sumsq = 0.0;
    std::size_t count = 0;
    for (const ClipSample& clip : train_clips) {
      const Spectrogram spec =
          clip_spectrogram(pours[clip.pour_index].wave16k, clip.clip_start_s);
      for (float v : spec.values) {
        sum += v;
        sumsq += static_cast<double>(v) * v;
      }
      count += spec.values.size();
    }
    const double mean = sum / static_cast<double>(count);
    const double var = std::max(sumsq / static_cast<double>(count) - mean * mean, 1e-12);
    result.model.norm.spec_mean = static_cast<float>(mean);
    result.model.norm.spec_std = static_cast<float>(std::sqrt(var));
  }
  const Normalization norm = result.model.norm;
  const float label_scale = norm.label_scale_mm;

  Model<float> model = result.model;
  AdamOptimizer<float> optimizer(model, config.learning_rate);
  TrainContext<float> ctx(model);

  // Global-norm gradient clipping keeps the long BPTT unroll from throwing
  // the optimizer off on spiky batches.
  const auto clip_gradients = [&]() {
    if (!(config.grad_clip_norm > 0.0)) return;
    double sq = 0.0;
    for (const auto& t : model.trainable_tensors()) {
      for (Eigen::Index i = 0; i < t.size(); ++i) {
        sq += static_cast<double>(t.grad[i]) * t.grad[i];
      }
    }
    const double norm = std::sqrt(sq);
    if (norm <= config.grad_clip_norm) return;
    const float scale = static_cast<float>(config.grad_clip_norm / norm);
    for (const auto& t : model.trainable_tensors()) {
      for (Eigen::Index i = 0; i < t.size(); ++i) t.grad[i] *= scale;
    }
  };

  const auto scaled_labels = [&](const ClipSample& clip) {
    std::vector<float> y(clip.labels_mm.size());
    for (std::size_t j = 0; j < y.size(); ++j) y[j] = clip.labels_mm[j] / label_scale;
    return y;
  };

  double best_val = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> clip_order(train_clips.size());
  for (std::size_t i = 0; i < clip_order.size(); ++i) clip_order[i] = i;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto t_epoch = std::chrono::steady_clock::now();
    optimizer.set_learning_rate(config.learning_rate *
                                std::pow(config.lr_decay, epoch - 1));
    Rng epoch_rng(derive_seed(config.seed, 0xE000 + static_cast<std::uint64_t>(epoch)));
    shuffle(clip_order, epoch_rng);

    double epoch_loss_scaled = 0.0;
    std::size_t seen = 0;
    const std::size_t batches =
        (train_clips.size() + config.batch_size - 1) / static_cast<std::size_t>(config.batch_size);
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t begin = b * static_cast<std::size_t>(config.batch_size);
      const std::size_t end =
          std::min(begin + static_cast<std::size_t>(config.batch_size), train_clips.size());
      const std::size_t B = end - begin;

      std::vector<MatrixX<float>> batch(B);
      pool.for_chunks(B, [&](unsigned, std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
          const ClipSample& clip = train_clips[clip_order[begin + i]];
          batch[i] = clip_matrix(
              clip_spectrogram(pours[clip.pour_index].wave16k, clip.clip_start_s), norm);
        }
      });

      model.zero_grads();
      const auto preds = ctx.forward(batch, /*update_running=*/true, &pool);
      std::vector<VectorX<float>> dpred(B);
      const float inv_b = 1.0f / static_cast<float>(B);
      double batch_loss = 0.0;
      for (std::size_t i = 0; i < B; ++i) {
        const ClipSample& clip = train_clips[clip_order[begin + i]];
        const std::vector<float> y = scaled_labels(clip);
        const std::vector<float> p(preds[i].data(), preds[i].data() + preds[i].size());
        const float loss = loss_total<float>(p, y, static_cast<float>(config.alpha));
        batch_loss += loss;
        auto g = loss_total_grad<float>(p, y, static_cast<float>(config.alpha));
        dpred[i] =
            Eigen::Map<const VectorX<float>>(g.data(), static_cast<Eigen::Index>(g.size())) *
            inv_b;
      }
      batch_loss /= static_cast<double>(B);
      if (!std::isfinite(batch_loss)) {
        throw std::runtime_error("train: NaN loss in epoch " + std::to_string(epoch) +
                                 ", batch " + std::to_string(b));
      }
      ctx.backward(dpred, &pool);
      clip_gradients();
      optimizer.step();
      epoch_loss_scaled += batch_loss * static_cast<double>(B);
      seen += B;
    }
    epoch_loss_scaled /= static_cast<double>(seen);

    // Validation in inference mode (running statistics).
    double val_mse_mm2 = 0.0, val_mono_mm = 0.0;
    {
      std::vector<double> mse(val_clips.size()), mono(val_clips.size());
      pool.for_chunks(val_clips.size(), [&](unsigned, std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
          const ClipSample& clip = val_clips[i];
          const MatrixX<float> X = clip_matrix(
              clip_spectrogram(pours[clip.pour_index].wave16k, clip.clip_start_s), norm);
          const VectorX<float> pred = predict_frames(model, X);
          std::vector<float> pred_mm(pred.size());
          for (Eigen::Index j = 0; j < pred.size(); ++j) {
            pred_mm[static_cast<std::size_t>(j)] = pred(j) * label_scale;
          }
          mse[i] = loss_height<float>(pred_mm, clip.labels_mm);
          mono[i] = loss_mono<float>(pred_mm);
        }
      });
      for (std::size_t i = 0; i < val_clips.size(); ++i) {
        val_mse_mm2 += mse[i];
        val_mono_mm += mono[i];
      }
      val_mse_mm2 /= static_cast<double>(val_clips.size());
      val_mono_mm /= static_cast<double>(val_clips.size());
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss_mm2 =
        epoch_loss_scaled * static_cast<double>(label_scale) * label_scale;
    entry.val_loss_mm2 = val_mse_mm2;
    entry.val_mono_mm = val_mono_mm;
    entry.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_epoch).count();
    result.log.push_back(entry);

    if (val_mse_mm2 < best_val) {
      best_val = val_mse_mm2;
      result.best_epoch = epoch;
      result.best_val_mm2 = val_mse_mm2;
      result.model = model;  // snapshot
    }
  }
  return result;
}

inline void write_train_log_csv(const std::string& path, const std::vector<EpochLog>& log) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "epoch,train_loss,val_loss,val_mono_loss,wall_seconds\n";
  char line[160];
  for (const EpochLog& e : log) {
    std::snprintf(line, sizeof(line), "%d,%.9g,%.9g,%.9g,%.3f\n", e.epoch, e.train_loss_mm2,
                  e.val_loss_mm2, e.val_mono_mm, e.wall_seconds);
    out << line;
  }
}

}  // namespace pouring
