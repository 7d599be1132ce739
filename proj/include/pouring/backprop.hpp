#pragma once

#include <stdexcept>
#include <vector>

#include "pouring/model.hpp"
#include "pouring/thread_pool.hpp"

namespace pouring {

// Per-clip activation cache for one training-mode forward pass.
template <typename Scalar>
struct ClipCache {
  const MatrixX<Scalar>* X = nullptr;  // input_dim x T, owned by the caller
  MatrixX<Scalar> Hprev;               // hidden x T, column t holds h_{t-1}
  MatrixX<Scalar> H;                   // hidden x T
  // LSTM gates and cell path.
  MatrixX<Scalar> GI, GF, GG, GO, C, Cprev, TanhC;
  // GRU gates; M holds reset-gated previous state r .* h_{t-1}.
  MatrixX<Scalar> GR, GZ, GN, M;
  // FC encoder: normalized pre-activation (batch-norm x-hat).
  MatrixX<Scalar> U0hat;
  // Head: normalized pre-activation and rectified output.
  MatrixX<Scalar> U1hat, A1;
  VectorX<Scalar> pred;  // per-frame prediction, scaled label units

  // Backward scratch (kept here so gradients reduce in clip order).
  MatrixX<Scalar> dY1, dY0;
  MatrixX<Scalar> p_dWx, p_dWh, p_dW0, p_dW1, p_dW2;
  VectorX<Scalar> p_db, p_db0, p_db1, p_db2;
};

// Exact reverse-mode differentiation of the model's training-mode forward
// pass (backpropagation through time for the recurrent encoders). Batch-norm
// layers use batch statistics in both directions, so the gradients match
// central finite differences of the same forward to first order.
//
// The per-clip work is embarrassingly parallel; batch statistics and the
// final gradient reduction run serially in clip order, which keeps results
// bit-identical for any thread count.
template <typename Scalar>
class TrainContext {
 public:
  explicit TrainContext(Model<Scalar>& model) : model_(model) {}

  // Forward in training mode. `clips[i]` is an input_dim x T_i matrix of
  // already-normalized spectrogram slices. Returns per-clip per-frame
  // predictions in scaled label units.
  std::vector<VectorX<Scalar>> forward(const std::vector<MatrixX<Scalar>>& clips,
                                       bool update_running = true,
                                       ThreadPool* pool = nullptr) {
    if (clips.empty()) throw std::invalid_argument("forward: empty batch");
    for (const auto& x : clips) {
      if (x.rows() != model_.input_dim()) {
        throw std::invalid_argument("forward: clip has wrong input dimension");
      }
      if (x.cols() < 1) throw std::invalid_argument("forward: clip has no frames");
    }
    const std::size_t B = clips.size();
    caches_.resize(B);
    total_frames_ = 0;
    for (std::size_t i = 0; i < B; ++i) {
      caches_[i].X = &clips[i];
      total_frames_ += clips[i].cols();
    }

    const EncoderKind kind = model_.kind();
    if (kind == EncoderKind::kFc) {
      // Encoder affine, batch-norm over the whole batch, then rectify.
      run(pool, B, [&](std::size_t i) {
        ClipCache<Scalar>& c = caches_[i];
        c.U0hat.noalias() = model_.enc_fc.W * (*c.X);
        c.U0hat.colwise() += model_.enc_fc.b;
      });
      batch_normalize(pool, B, model_.enc_bn, &ClipCache<Scalar>::U0hat, mean0_, istd0_,
                      update_running);
      run(pool, B, [&](std::size_t i) {
        ClipCache<Scalar>& c = caches_[i];
        c.H = ((c.U0hat.array().colwise() * model_.enc_bn.gamma.array()).colwise() +
               model_.enc_bn.beta.array())
                  .cwiseMax(Scalar(0))
                  .matrix();
      });
    } else {
      run(pool, B, [&](std::size_t i) { unroll_recurrent(caches_[i]); });
    }

    // Head: affine, batch-norm, rectify, scalar readout.
    run(pool, B, [&](std::size_t i) {
      ClipCache<Scalar>& c = caches_[i];
      c.U1hat.noalias() = model_.head1.W * c.H;
      c.U1hat.colwise() += model_.head1.b;
    });
    batch_normalize(pool, B, model_.head_bn, &ClipCache<Scalar>::U1hat, mean1_, istd1_,
                    update_running);
    run(pool, B, [&](std::size_t i) {
      ClipCache<Scalar>& c = caches_[i];
      c.A1 = ((c.U1hat.array().colwise() * model_.head_bn.gamma.array()).colwise() +
              model_.head_bn.beta.array())
                 .cwiseMax(Scalar(0))
                 .matrix();
      c.pred = (model_.head2.W * c.A1).transpose();
      c.pred.array() += model_.head2.b(0);
    });

    has_forward_ = true;
    std::vector<VectorX<Scalar>> preds(B);
    for (std::size_t i = 0; i < B; ++i) preds[i] = caches_[i].pred;
    return preds;
  }

  // Accumulates dL/dtheta into the model's gradient buffers given dL/dpred
  // for each clip of the last forward.
  void backward(const std::vector<VectorX<Scalar>>& dpred, ThreadPool* pool = nullptr) {
    if (!has_forward_) {
      throw std::logic_error("backward: no cached forward pass for this batch");
    }
    const std::size_t B = caches_.size();
    if (dpred.size() != B) {
      throw std::invalid_argument("backward: loss gradient count does not match batch");
    }
    for (std::size_t i = 0; i < B; ++i) {
      if (dpred[i].size() != caches_[i].pred.size()) {
        throw std::invalid_argument("backward: loss gradient length mismatch");
      }
    }
    const EncoderKind kind = model_.kind();

    // Head readout and rectifier, then partial sums for the head batch norm.
    run(pool, B, [&](std::size_t i) {
      ClipCache<Scalar>& c = caches_[i];
      c.p_dW2.noalias() = dpred[i].transpose() * c.A1.transpose();
      c.p_db2 = VectorX<Scalar>::Constant(1, dpred[i].sum());
      c.dY1.noalias() = model_.head2.W.transpose() * dpred[i].transpose();
      c.dY1 = (c.A1.array() > Scalar(0)).select(c.dY1, Scalar(0));
    });
    bn_backward(pool, B, model_.head_bn, &ClipCache<Scalar>::dY1, &ClipCache<Scalar>::U1hat,
                istd1_);

    // Into the encoder output.
    run(pool, B, [&](std::size_t i) {
      ClipCache<Scalar>& c = caches_[i];
      c.p_dW1.noalias() = c.dY1 * c.H.transpose();
      c.p_db1 = c.dY1.rowwise().sum();
      // dY1 now holds dU1; reuse as dH via head1.W.
      if (kind == EncoderKind::kFc) {
        c.dY0.noalias() = model_.head1.W.transpose() * c.dY1;
        c.dY0 = (c.H.array() > Scalar(0)).select(c.dY0, Scalar(0));
      }
    });

    if (kind == EncoderKind::kFc) {
      bn_backward(pool, B, model_.enc_bn, &ClipCache<Scalar>::dY0, &ClipCache<Scalar>::U0hat,
                  istd0_);
      run(pool, B, [&](std::size_t i) {
        ClipCache<Scalar>& c = caches_[i];
        c.p_dW0.noalias() = c.dY0 * c.X->transpose();
        c.p_db0 = c.dY0.rowwise().sum();
      });
      for (std::size_t i = 0; i < B; ++i) {
        model_.enc_fc.dW += caches_[i].p_dW0;
        model_.enc_fc.db += caches_[i].p_db0;
      }
    } else {
      run(pool, B, [&](std::size_t i) { backward_recurrent(caches_[i]); });
      for (std::size_t i = 0; i < B; ++i) {
        model_.rnn.dWx += caches_[i].p_dWx;
        model_.rnn.dWh += caches_[i].p_dWh;
        model_.rnn.db += caches_[i].p_db;
      }
    }

    for (std::size_t i = 0; i < B; ++i) {
      model_.head1.dW += caches_[i].p_dW1;
      model_.head1.db += caches_[i].p_db1;
      model_.head2.dW += caches_[i].p_dW2;
      model_.head2.db += caches_[i].p_db2;
    }
    has_forward_ = false;
  }

 private:
  template <typename Fn>
  void run(ThreadPool* pool, std::size_t count, const Fn& fn) {
    if (pool == nullptr) {
      for (std::size_t i = 0; i < count; ++i) fn(i);
      return;
    }
    pool->for_chunks(count, [&](unsigned, std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) fn(i);
    });
  }

  // Normalizes `field` of every cache in place (raw -> x-hat) using batch
  // statistics over all frames of all clips; optionally folds the statistics
  // into the running averages.
  void batch_normalize(ThreadPool* pool, std::size_t B, BatchNormParams<Scalar>& bn,
                       MatrixX<Scalar> ClipCache<Scalar>::* field, VectorX<Scalar>& mean_out,
                       VectorX<Scalar>& istd_out, bool update_running) {
    const Eigen::Index features = bn.gamma.size();
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(features);
    Eigen::VectorXd sumsq = Eigen::VectorXd::Zero(features);
    for (std::size_t i = 0; i < B; ++i) {  // clip order: deterministic
      const MatrixX<Scalar>& raw = caches_[i].*field;
      sum += raw.template cast<double>().rowwise().sum();
      sumsq += raw.template cast<double>().array().square().matrix().rowwise().sum();
    }
    const double n = static_cast<double>(total_frames_);
    const Eigen::VectorXd mean = sum / n;
    const Eigen::VectorXd var =
        (sumsq / n - mean.array().square().matrix()).cwiseMax(0.0);
    mean_out = mean.template cast<Scalar>();
    istd_out = (var.array() + static_cast<double>(BatchNormParams<Scalar>::kEps))
                   .rsqrt()
                   .template cast<Scalar>()
                   .matrix();
    if (update_running) {
      const Scalar m = BatchNormParams<Scalar>::kMomentum;
      bn.running_mean = (Scalar(1) - m) * bn.running_mean + m * mean_out;
      bn.running_var =
          (Scalar(1) - m) * bn.running_var + m * var.template cast<Scalar>();
      bn.batches_seen += 1;
    }
    run(pool, B, [&](std::size_t i) {
      MatrixX<Scalar>& raw = caches_[i].*field;
      raw = (raw.colwise() - mean_out).array().colwise() * istd_out.array();
    });
  }

  // Batch-norm backward: turns `dfield` (gradient w.r.t. the BN output) into
  // the gradient w.r.t. the BN input, accumulating dgamma/dbeta on the way.
  // xhat must hold the normalized activations of the forward pass.
  void bn_backward(ThreadPool* pool, std::size_t B, BatchNormParams<Scalar>& bn,
                   MatrixX<Scalar> ClipCache<Scalar>::* dfield,
                   MatrixX<Scalar> ClipCache<Scalar>::* xhat, const VectorX<Scalar>& istd) {
    const Eigen::Index features = bn.gamma.size();
    Eigen::VectorXd sum_dy = Eigen::VectorXd::Zero(features);
    Eigen::VectorXd sum_dy_xhat = Eigen::VectorXd::Zero(features);
    for (std::size_t i = 0; i < B; ++i) {
      const MatrixX<Scalar>& dy = caches_[i].*dfield;
      const MatrixX<Scalar>& xh = caches_[i].*xhat;
      sum_dy += dy.template cast<double>().rowwise().sum();
      sum_dy_xhat += (dy.template cast<double>().array() * xh.template cast<double>().array())
                         .matrix()
                         .rowwise()
                         .sum();
    }
    bn.dbeta += sum_dy.template cast<Scalar>();
    bn.dgamma += sum_dy_xhat.template cast<Scalar>();
    const double n = static_cast<double>(total_frames_);
    const VectorX<Scalar> c1 = (sum_dy / n).template cast<Scalar>();
    const VectorX<Scalar> c2 = (sum_dy_xhat / n).template cast<Scalar>();
    const VectorX<Scalar> scale = bn.gamma.cwiseProduct(istd);
    run(pool, B, [&](std::size_t i) {
      MatrixX<Scalar>& dy = caches_[i].*dfield;
      const MatrixX<Scalar>& xh = caches_[i].*xhat;
      dy = (((dy.colwise() - c1).array() - xh.array().colwise() * c2.array()).colwise() *
            scale.array())
               .matrix();
    });
  }

  void unroll_recurrent(ClipCache<Scalar>& c) {
    const Eigen::Index H = model_.hidden_dim();
    const Eigen::Index T = c.X->cols();
    const RecurrentParams<Scalar>& p = model_.rnn;
    MatrixX<Scalar> pre = p.Wx * (*c.X);
    pre.colwise() += p.b;
    c.Hprev.resize(H, T);
    c.H.resize(H, T);
    VectorX<Scalar> h = VectorX<Scalar>::Zero(H);
    if (model_.kind() == EncoderKind::kLstm) {
      c.GI.resize(H, T); c.GF.resize(H, T); c.GG.resize(H, T); c.GO.resize(H, T);
      c.C.resize(H, T); c.Cprev.resize(H, T); c.TanhC.resize(H, T);
      VectorX<Scalar> cell = VectorX<Scalar>::Zero(H);
      for (Eigen::Index t = 0; t < T; ++t) {
        VectorX<Scalar> a = pre.col(t);
        a.noalias() += p.Wh * h;
        c.Hprev.col(t) = h;
        c.Cprev.col(t) = cell;
        c.GI.col(t) = detail::sigmoid<Scalar>(a.segment(0, H));
        c.GF.col(t) = detail::sigmoid<Scalar>(a.segment(H, H));
        c.GG.col(t) = a.segment(2 * H, H).array().tanh().matrix();
        c.GO.col(t) = detail::sigmoid<Scalar>(a.segment(3 * H, H));
        cell = c.GF.col(t).cwiseProduct(cell) + c.GI.col(t).cwiseProduct(c.GG.col(t));
        c.C.col(t) = cell;
        c.TanhC.col(t) = cell.array().tanh().matrix();
        h = c.GO.col(t).cwiseProduct(c.TanhC.col(t));
        c.H.col(t) = h;
      }
    } else {
      c.GR.resize(H, T); c.GZ.resize(H, T); c.GN.resize(H, T); c.M.resize(H, T);
      for (Eigen::Index t = 0; t < T; ++t) {
        c.Hprev.col(t) = h;
        VectorX<Scalar> arz = pre.col(t).segment(0, 2 * H);
        arz.noalias() += p.Wh.topRows(2 * H) * h;
        c.GR.col(t) = detail::sigmoid<Scalar>(arz.segment(0, H));
        c.GZ.col(t) = detail::sigmoid<Scalar>(arz.segment(H, H));
        c.M.col(t) = c.GR.col(t).cwiseProduct(h);
        VectorX<Scalar> an = pre.col(t).segment(2 * H, H);
        an.noalias() += p.Wh.bottomRows(H) * c.M.col(t);
        c.GN.col(t) = an.array().tanh().matrix();
        h = c.GZ.col(t).cwiseProduct(h) +
            (VectorX<Scalar>::Ones(H) - c.GZ.col(t)).cwiseProduct(c.GN.col(t));
        c.H.col(t) = h;
      }
    }
  }

  void backward_recurrent(ClipCache<Scalar>& c) {
    const Eigen::Index H = model_.hidden_dim();
    const Eigen::Index T = c.X->cols();
    const RecurrentParams<Scalar>& p = model_.rnn;
    // dY1 holds dL/dU1 at this point; map it back onto the hidden sequence.
    MatrixX<Scalar> dH = model_.head1.W.transpose() * c.dY1;
    if (model_.kind() == EncoderKind::kLstm) {
      MatrixX<Scalar> dA(4 * H, T);
      VectorX<Scalar> dh_next = VectorX<Scalar>::Zero(H);
      VectorX<Scalar> dc_next = VectorX<Scalar>::Zero(H);
      for (Eigen::Index t = T - 1; t >= 0; --t) {
        const VectorX<Scalar> dh = dH.col(t) + dh_next;
        const auto gi = c.GI.col(t).array();
        const auto gf = c.GF.col(t).array();
        const auto gg = c.GG.col(t).array();
        const auto go = c.GO.col(t).array();
        const auto tc = c.TanhC.col(t).array();
        const VectorX<Scalar> dc =
            (dc_next.array() + dh.array() * go * (Scalar(1) - tc * tc)).matrix();
        dA.col(t).segment(0, H) = (dc.array() * gg * gi * (Scalar(1) - gi)).matrix();
        dA.col(t).segment(H, H) =
            (dc.array() * c.Cprev.col(t).array() * gf * (Scalar(1) - gf)).matrix();
        dA.col(t).segment(2 * H, H) = (dc.array() * gi * (Scalar(1) - gg * gg)).matrix();
        dA.col(t).segment(3 * H, H) = (dh.array() * tc * go * (Scalar(1) - go)).matrix();
        dc_next = (dc.array() * gf).matrix();
        dh_next.noalias() = p.Wh.transpose() * dA.col(t);
      }
      c.p_dWx.noalias() = dA * c.X->transpose();
      c.p_dWh.noalias() = dA * c.Hprev.transpose();
      c.p_db = dA.rowwise().sum();
    } else {
      MatrixX<Scalar> dA(3 * H, T);
      VectorX<Scalar> dh_next = VectorX<Scalar>::Zero(H);
      for (Eigen::Index t = T - 1; t >= 0; --t) {
        const VectorX<Scalar> dh = dH.col(t) + dh_next;
        const auto r = c.GR.col(t).array();
        const auto z = c.GZ.col(t).array();
        const auto n = c.GN.col(t).array();
        const auto hprev = c.Hprev.col(t).array();
        const VectorX<Scalar> dan =
            (dh.array() * (Scalar(1) - z) * (Scalar(1) - n * n)).matrix();
        const VectorX<Scalar> dm = p.Wh.bottomRows(H).transpose() * dan;
        dA.col(t).segment(0, H) =
            (dm.array() * hprev * r * (Scalar(1) - r)).matrix();  // reset gate
        dA.col(t).segment(H, H) =
            (dh.array() * (hprev - n) * z * (Scalar(1) - z)).matrix();  // update gate
        dA.col(t).segment(2 * H, H) = dan;
        dh_next = (dh.array() * z + dm.array() * r).matrix();
        dh_next.noalias() += p.Wh.topRows(2 * H).transpose() * dA.col(t).segment(0, 2 * H);
      }
      c.p_dWx.noalias() = dA * c.X->transpose();
      c.p_dWh.resize(3 * H, H);
      c.p_dWh.topRows(2 * H).noalias() = dA.topRows(2 * H) * c.Hprev.transpose();
      c.p_dWh.bottomRows(H).noalias() = dA.bottomRows(H) * c.M.transpose();
      c.p_db = dA.rowwise().sum();
    }
  }

  Model<Scalar>& model_;
  std::vector<ClipCache<Scalar>> caches_;
  VectorX<Scalar> mean0_, istd0_, mean1_, istd1_;
  Eigen::Index total_frames_ = 0;
  bool has_forward_ = false;
};

// Inference over a whole clip at once using running batch-norm statistics.
// Matches Model::predict_sequence (which steps frame by frame) up to float
// associativity, but lets Eigen use matrix-matrix products. Returns per-frame
// predictions in scaled label units.
template <typename Scalar>
VectorX<Scalar> predict_frames(const Model<Scalar>& model, const MatrixX<Scalar>& X) {
  if (X.rows() != model.input_dim()) {
    throw std::invalid_argument("predict_frames: wrong input dimension");
  }
  model.head_bn.require_trained("predict_frames");
  const Eigen::Index H = model.hidden_dim();
  const Eigen::Index T = X.cols();
  MatrixX<Scalar> Hs(H, T);
  if (model.kind() == EncoderKind::kFc) {
    model.enc_bn.require_trained("predict_frames");
    MatrixX<Scalar> u = model.enc_fc.W * X;
    u.colwise() += model.enc_fc.b;
    const VectorX<Scalar> istd =
        (model.enc_bn.running_var.array() + BatchNormParams<Scalar>::kEps)
            .rsqrt()
            .matrix();
    Hs = (((u.colwise() - model.enc_bn.running_mean).array().colwise() *
           (model.enc_bn.gamma.cwiseProduct(istd)).array())
              .colwise() +
          model.enc_bn.beta.array())
             .cwiseMax(Scalar(0))
             .matrix();
  } else {
    const RecurrentParams<Scalar>& p = model.rnn;
    MatrixX<Scalar> pre = p.Wx * X;
    pre.colwise() += p.b;
    VectorX<Scalar> h = VectorX<Scalar>::Zero(H);
    if (model.kind() == EncoderKind::kLstm) {
      VectorX<Scalar> cell = VectorX<Scalar>::Zero(H);
      for (Eigen::Index t = 0; t < T; ++t) {
        VectorX<Scalar> a = pre.col(t);
        a.noalias() += p.Wh * h;
        const VectorX<Scalar> gi = detail::sigmoid<Scalar>(a.segment(0, H));
        const VectorX<Scalar> gf = detail::sigmoid<Scalar>(a.segment(H, H));
        const VectorX<Scalar> gg = a.segment(2 * H, H).array().tanh().matrix();
        const VectorX<Scalar> go = detail::sigmoid<Scalar>(a.segment(3 * H, H));
        cell = gf.cwiseProduct(cell) + gi.cwiseProduct(gg);
        h = go.cwiseProduct(cell.array().tanh().matrix());
        Hs.col(t) = h;
      }
    } else {
      for (Eigen::Index t = 0; t < T; ++t) {
        VectorX<Scalar> arz = pre.col(t).segment(0, 2 * H);
        arz.noalias() += p.Wh.topRows(2 * H) * h;
        const VectorX<Scalar> gr = detail::sigmoid<Scalar>(arz.segment(0, H));
        const VectorX<Scalar> gz = detail::sigmoid<Scalar>(arz.segment(H, H));
        VectorX<Scalar> an = pre.col(t).segment(2 * H, H);
        an.noalias() += p.Wh.bottomRows(H) * gr.cwiseProduct(h);
        const VectorX<Scalar> gn = an.array().tanh().matrix();
        h = gz.cwiseProduct(h) + (VectorX<Scalar>::Ones(H) - gz).cwiseProduct(gn);
        Hs.col(t) = h;
      }
    }
  }
  MatrixX<Scalar> u1 = model.head1.W * Hs;
  u1.colwise() += model.head1.b;
  const VectorX<Scalar> istd1 =
      (model.head_bn.running_var.array() + BatchNormParams<Scalar>::kEps).rsqrt().matrix();
  const MatrixX<Scalar> a1 =
      (((u1.colwise() - model.head_bn.running_mean).array().colwise() *
        (model.head_bn.gamma.cwiseProduct(istd1)).array())
           .colwise() +
       model.head_bn.beta.array())
          .cwiseMax(Scalar(0))
          .matrix();
  VectorX<Scalar> pred = (model.head2.W * a1).transpose();
  pred.array() += model.head2.b(0);
  return pred;
}

}  // namespace pouring
