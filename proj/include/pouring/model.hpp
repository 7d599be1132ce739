#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pouring/rng.hpp"
#include "pouring/stft.hpp"

namespace pouring {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

enum class EncoderKind { kLstm, kGru, kFc };

inline const char* encoder_kind_name(EncoderKind k) {
  switch (k) {
    case EncoderKind::kLstm: return "lstm";
    case EncoderKind::kGru: return "gru";
    case EncoderKind::kFc: return "fc";
  }
  return "?";
}

inline EncoderKind parse_encoder_kind(const std::string& name) {
  if (name == "lstm") return EncoderKind::kLstm;
  if (name == "gru") return EncoderKind::kGru;
  if (name == "fc") return EncoderKind::kFc;
  throw std::invalid_argument("unknown encoder kind '" + name + "' (expected lstm|gru|fc)");
}

// Dataset statistics applied to spectrogram values before the encoder, and
// the scale that maps the network's output back to millimetres. Learned at
// training time and carried in every checkpoint.
struct Normalization {
  float spec_mean = 0.0f;
  float spec_std = 1.0f;
  float label_scale_mm = 100.0f;
};

// Recurrent state. `cell` is used by the LSTM only.
template <typename Scalar>
struct HiddenState {
  VectorX<Scalar> h;
  VectorX<Scalar> cell;
};

template <typename Scalar>
struct SequencePrediction {
  std::vector<Scalar> air_column_mm;            // one per input frame
  std::vector<VectorX<Scalar>> hidden_states;   // filled only when requested
  HiddenState<Scalar> final_state;
};

// Affine layer y = W x + b with a matching gradient accumulator.
template <typename Scalar>
struct Dense {
  MatrixX<Scalar> W, dW;
  VectorX<Scalar> b, db;

  void init(Eigen::Index out, Eigen::Index in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    W.resize(out, in);
    b.resize(out);
    for (Eigen::Index i = 0; i < W.size(); ++i) {
      W.data()[i] = static_cast<Scalar>(rng.uniform(-bound, bound));
    }
    for (Eigen::Index i = 0; i < b.size(); ++i) {
      b(i) = static_cast<Scalar>(rng.uniform(-bound, bound));
    }
    dW = MatrixX<Scalar>::Zero(out, in);
    db = VectorX<Scalar>::Zero(out);
  }
  void zero_grads() {
    dW.setZero();
    db.setZero();
  }
};

// Per-feature batch normalization. Training uses batch statistics; inference
// uses the exponential moving averages accumulated during training.
template <typename Scalar>
struct BatchNormParams {
  VectorX<Scalar> gamma, beta, dgamma, dbeta;
  VectorX<Scalar> running_mean, running_var;
  Scalar batches_seen = 0;
  static constexpr Scalar kMomentum = static_cast<Scalar>(0.1);
  static constexpr Scalar kEps = static_cast<Scalar>(1e-5);

  void init(Eigen::Index n) {
    gamma = VectorX<Scalar>::Ones(n);
    beta = VectorX<Scalar>::Zero(n);
    dgamma = VectorX<Scalar>::Zero(n);
    dbeta = VectorX<Scalar>::Zero(n);
    running_mean = VectorX<Scalar>::Zero(n);
    running_var = VectorX<Scalar>::Ones(n);
    batches_seen = 0;
  }
  void zero_grads() {
    dgamma.setZero();
    dbeta.setZero();
  }
  void require_trained(const char* where) const {
    if (batches_seen <= 0) {
      throw std::logic_error(std::string(where) +
                             ": batch normalization has no trained running statistics");
    }
  }
  VectorX<Scalar> infer(const VectorX<Scalar>& x, const char* where) const {
    require_trained(where);
    return (gamma.array() * (x - running_mean).array() /
            (running_var.array() + kEps).sqrt()) .matrix() + beta;
  }
};

// Gate-packed recurrent parameters. Row blocks of size `hidden`:
// LSTM: [input | forget | candidate | output]; GRU: [reset | update | candidate].
template <typename Scalar>
struct RecurrentParams {
  MatrixX<Scalar> Wx, dWx;  // gates x input
  MatrixX<Scalar> Wh, dWh;  // gates x hidden
  VectorX<Scalar> b, db;

  void init(Eigen::Index gates, Eigen::Index input, Eigen::Index hidden, Rng& rng) {
    const double bx = 1.0 / std::sqrt(static_cast<double>(input));
    const double bh = 1.0 / std::sqrt(static_cast<double>(hidden));
    Wx.resize(gates * hidden, input);
    Wh.resize(gates * hidden, hidden);
    b.resize(gates * hidden);
    for (Eigen::Index i = 0; i < Wx.size(); ++i) {
      Wx.data()[i] = static_cast<Scalar>(rng.uniform(-bx, bx));
    }
    for (Eigen::Index i = 0; i < Wh.size(); ++i) {
      Wh.data()[i] = static_cast<Scalar>(rng.uniform(-bh, bh));
    }
    for (Eigen::Index i = 0; i < b.size(); ++i) {
      b(i) = static_cast<Scalar>(rng.uniform(-bh, bh));
    }
    dWx = MatrixX<Scalar>::Zero(Wx.rows(), Wx.cols());
    dWh = MatrixX<Scalar>::Zero(Wh.rows(), Wh.cols());
    db = VectorX<Scalar>::Zero(b.size());
  }
  void zero_grads() {
    dWx.setZero();
    dWh.setZero();
    db.setZero();
  }
};

template <typename Scalar>
struct NamedTensor {
  std::string name;
  Scalar* data = nullptr;
  Eigen::Index rows = 0, cols = 0;
  Scalar* grad = nullptr;  // null for running statistics

  Eigen::Index size() const { return rows * cols; }
};

namespace detail {
template <typename Scalar>
VectorX<Scalar> sigmoid(const VectorX<Scalar>& x) {
  return (Scalar(1) / (Scalar(1) + (-x.array()).exp())).matrix();
}
template <typename Scalar>
VectorX<Scalar> relu(const VectorX<Scalar>& x) {
  return x.cwiseMax(Scalar(0));
}
}  // namespace detail

// The height-from-audio regressor: a one-layer recurrent (or feed-forward)
// encoder over 257-bin spectrogram slices into `hidden` features, followed by
// a two-layer MLP head that emits one air-column length per slice.
template <typename Scalar>
class Model {
 public:
  static constexpr int kDefaultInputDim = 257;
  static constexpr int kDefaultHiddenDim = 256;
  static constexpr int kDefaultMlpDim = 64;

  Model(EncoderKind kind, int input_dim, int hidden_dim, int mlp_dim, std::uint64_t seed)
      : kind_(kind), input_dim_(input_dim), hidden_dim_(hidden_dim), mlp_dim_(mlp_dim) {
    if (input_dim <= 0 || hidden_dim <= 0 || mlp_dim <= 0) {
      throw std::invalid_argument("model dimensions must be positive");
    }
    Rng rng(seed);
    switch (kind_) {
      case EncoderKind::kLstm:
        rnn.init(4, input_dim_, hidden_dim_, rng);
        // Standard practice: bias the forget gate open at the start.
        rnn.b.segment(hidden_dim_, hidden_dim_).setConstant(Scalar(1));
        break;
      case EncoderKind::kGru:
        rnn.init(3, input_dim_, hidden_dim_, rng);
        break;
      case EncoderKind::kFc:
        enc_fc.init(hidden_dim_, input_dim_, rng);
        enc_bn.init(hidden_dim_);
        break;
    }
    head1.init(mlp_dim_, hidden_dim_, rng);
    head_bn.init(mlp_dim_);
    head2.init(1, mlp_dim_, rng);
  }

  EncoderKind kind() const { return kind_; }
  int input_dim() const { return input_dim_; }
  int hidden_dim() const { return hidden_dim_; }
  int mlp_dim() const { return mlp_dim_; }

  Normalization norm;

  // Parameters. Public by design: the training context, optimizer and
  // checkpoint I/O all operate on them directly.
  RecurrentParams<Scalar> rnn;   // LSTM / GRU
  Dense<Scalar> enc_fc;          // FC encoder
  BatchNormParams<Scalar> enc_bn;
  Dense<Scalar> head1;
  BatchNormParams<Scalar> head_bn;
  Dense<Scalar> head2;

  HiddenState<Scalar> initial_state() const {
    HiddenState<Scalar> s;
    s.h = VectorX<Scalar>::Zero(hidden_dim_);
    if (kind_ == EncoderKind::kLstm) s.cell = VectorX<Scalar>::Zero(hidden_dim_);
    return s;
  }

  // One encoder step (inference semantics: FC batch norm uses running stats).
  HiddenState<Scalar> encoder_step(const VectorX<Scalar>& x,
                                   const HiddenState<Scalar>& state) const {
    check_step_shapes(x, state);
    HiddenState<Scalar> next;
    const int H = hidden_dim_;
    switch (kind_) {
      case EncoderKind::kLstm: {
        VectorX<Scalar> a = rnn.Wx * x + rnn.Wh * state.h + rnn.b;
        const VectorX<Scalar> gi = detail::sigmoid<Scalar>(a.segment(0, H));
        const VectorX<Scalar> gf = detail::sigmoid<Scalar>(a.segment(H, H));
        const VectorX<Scalar> gg = a.segment(2 * H, H).array().tanh().matrix();
        const VectorX<Scalar> go = detail::sigmoid<Scalar>(a.segment(3 * H, H));
        next.cell = gf.cwiseProduct(state.cell) + gi.cwiseProduct(gg);
        next.h = go.cwiseProduct(next.cell.array().tanh().matrix());
        break;
      }
      case EncoderKind::kGru: {
        VectorX<Scalar> a = rnn.Wx * x + rnn.b;
        a.segment(0, 2 * H) += rnn.Wh.topRows(2 * H) * state.h;
        const VectorX<Scalar> gr = detail::sigmoid<Scalar>(a.segment(0, H));
        const VectorX<Scalar> gz = detail::sigmoid<Scalar>(a.segment(H, H));
        const VectorX<Scalar> gated = gr.cwiseProduct(state.h);
        const VectorX<Scalar> gn =
            (a.segment(2 * H, H) + rnn.Wh.bottomRows(H) * gated).array().tanh().matrix();
        next.h = gz.cwiseProduct(state.h) + (VectorX<Scalar>::Ones(H) - gz).cwiseProduct(gn);
        break;
      }
      case EncoderKind::kFc: {
        const VectorX<Scalar> u = enc_fc.W * x + enc_fc.b;
        next.h = detail::relu<Scalar>(enc_bn.infer(u, "encoder"));
        break;
      }
    }
    return next;
  }

  // Head applied to one hidden vector (inference semantics).
  Scalar predict_frame(const VectorX<Scalar>& h) const {
    const VectorX<Scalar> u = head1.W * h + head1.b;
    const VectorX<Scalar> a = detail::relu<Scalar>(head_bn.infer(u, "head"));
    return (head2.W * a + head2.b)(0);
  }

  // Runs the encoder and head over every spectrogram slice; returns one
  // air-column estimate in millimetres per frame.
  SequencePrediction<Scalar> predict_sequence(const Spectrogram& spec,
                                              HiddenState<Scalar> state,
                                              bool keep_hidden = false) const {
    if (static_cast<int>(spec.rows) != input_dim_) {
      throw std::invalid_argument("predict_sequence: spectrogram has " +
                                  std::to_string(spec.rows) + " bins, model expects " +
                                  std::to_string(input_dim_));
    }
    head_bn.require_trained("predict_sequence");
    if (kind_ == EncoderKind::kFc) enc_bn.require_trained("predict_sequence");

    SequencePrediction<Scalar> out;
    out.air_column_mm.reserve(spec.cols);
    if (keep_hidden) out.hidden_states.reserve(spec.cols);
    VectorX<Scalar> x(input_dim_);
    const Scalar mean = static_cast<Scalar>(norm.spec_mean);
    const Scalar inv_std = Scalar(1) / static_cast<Scalar>(norm.spec_std);
    for (std::uint32_t t = 0; t < spec.cols; ++t) {
      for (int b = 0; b < input_dim_; ++b) {
        x(b) = (static_cast<Scalar>(spec.at(static_cast<std::uint32_t>(b), t)) - mean) * inv_std;
      }
      state = encoder_step(x, state);
      out.air_column_mm.push_back(predict_frame(state.h) *
                                  static_cast<Scalar>(norm.label_scale_mm));
      if (keep_hidden) out.hidden_states.push_back(state.h);
    }
    out.final_state = std::move(state);
    return out;
  }

  std::vector<NamedTensor<Scalar>> trainable_tensors() {
    std::vector<NamedTensor<Scalar>> out;
    const auto add_mat = [&out](const char* name, MatrixX<Scalar>& v, MatrixX<Scalar>& g) {
      out.push_back({name, v.data(), v.rows(), v.cols(), g.data()});
    };
    const auto add_vec = [&out](const char* name, VectorX<Scalar>& v, VectorX<Scalar>& g) {
      out.push_back({name, v.data(), v.rows(), 1, g.data()});
    };
    if (kind_ == EncoderKind::kFc) {
      add_mat("encoder.W", enc_fc.W, enc_fc.dW);
      add_vec("encoder.b", enc_fc.b, enc_fc.db);
      add_vec("encoder_bn.gamma", enc_bn.gamma, enc_bn.dgamma);
      add_vec("encoder_bn.beta", enc_bn.beta, enc_bn.dbeta);
    } else {
      add_mat("encoder.Wx", rnn.Wx, rnn.dWx);
      add_mat("encoder.Wh", rnn.Wh, rnn.dWh);
      add_vec("encoder.b", rnn.b, rnn.db);
    }
    add_mat("head1.W", head1.W, head1.dW);
    add_vec("head1.b", head1.b, head1.db);
    add_vec("head_bn.gamma", head_bn.gamma, head_bn.dgamma);
    add_vec("head_bn.beta", head_bn.beta, head_bn.dbeta);
    add_mat("head2.W", head2.W, head2.dW);
    add_vec("head2.b", head2.b, head2.db);
    return out;
  }

  // Trainable tensors plus batch-norm running statistics, in checkpoint order.
  std::vector<NamedTensor<Scalar>> state_tensors() {
    std::vector<NamedTensor<Scalar>> out = trainable_tensors();
    const auto add_stat = [&out](const char* name, VectorX<Scalar>& v) {
      out.push_back({name, v.data(), v.rows(), 1, nullptr});
    };
    if (kind_ == EncoderKind::kFc) {
      add_stat("encoder_bn.running_mean", enc_bn.running_mean);
      add_stat("encoder_bn.running_var", enc_bn.running_var);
      out.push_back({"encoder_bn.batches_seen", &enc_bn.batches_seen, 1, 1, nullptr});
    }
    add_stat("head_bn.running_mean", head_bn.running_mean);
    add_stat("head_bn.running_var", head_bn.running_var);
    out.push_back({"head_bn.batches_seen", &head_bn.batches_seen, 1, 1, nullptr});
    return out;
  }

  void zero_grads() {
    rnn.zero_grads();
    enc_fc.zero_grads();
    enc_bn.zero_grads();
    head1.zero_grads();
    head_bn.zero_grads();
    head2.zero_grads();
  }

 private:
  void check_step_shapes(const VectorX<Scalar>& x, const HiddenState<Scalar>& state) const {
    if (x.size() != input_dim_) {
      throw std::invalid_argument("encoder_step: input has " + std::to_string(x.size()) +
                                  " values, expected " + std::to_string(input_dim_));
    }
    if (state.h.size() != hidden_dim_) {
      throw std::invalid_argument("encoder_step: hidden state has wrong size");
    }
    if (kind_ == EncoderKind::kLstm && state.cell.size() != hidden_dim_) {
      throw std::invalid_argument("encoder_step: LSTM cell state has wrong size");
    }
  }

  EncoderKind kind_;
  int input_dim_, hidden_dim_, mlp_dim_;
};

}  // namespace pouring
