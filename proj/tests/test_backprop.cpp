#include <catch2/catch_amalgamated.hpp>

#include <vector>

#include "pouring/backprop.hpp"
#include "pouring/gradcheck.hpp"
#include "pouring/model.hpp"

using namespace pouring;

namespace {

std::vector<MatrixX<double>> random_clips(int input, int frames, int batch, Rng& rng) {
  std::vector<MatrixX<double>> clips(static_cast<std::size_t>(batch));
  for (auto& c : clips) {
    c.resize(input, frames);
    for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = rng.normal();
  }
  return clips;
}

std::vector<double> collect_grads(Model<double>& m) {
  std::vector<double> out;
  for (const auto& t : m.trainable_tensors()) {
    out.insert(out.end(), t.grad, t.grad + t.size());
  }
  return out;
}

}  // namespace

TEST_CASE("zero loss gradient produces zero parameter gradients", "[backprop]") {
  Rng rng(1);
  for (EncoderKind kind : {EncoderKind::kLstm, EncoderKind::kGru, EncoderKind::kFc}) {
    Model<double> m(kind, 10, 5, 4, 7);
    TrainContext<double> ctx(m);
    const auto clips = random_clips(10, 4, 2, rng);
    m.zero_grads();
    const auto preds = ctx.forward(clips, false);
    std::vector<VectorX<double>> dpred(2, VectorX<double>::Zero(4));
    ctx.backward(dpred);
    for (double g : collect_grads(m)) REQUIRE(g == 0.0);
  }
}

TEST_CASE("BPTT gradients match finite differences", "[backprop][gradcheck]") {
  for (EncoderKind kind : {EncoderKind::kLstm, EncoderKind::kGru, EncoderKind::kFc}) {
    for (std::uint64_t seed : {11u, 12u}) {
      GradCheckConfig cfg;
      cfg.kind = kind;
      cfg.input_dim = 10;
      cfg.hidden_dim = 6;
      cfg.mlp_dim = 6;
      cfg.frames = 3;
      cfg.batch = 2;
      cfg.seed = seed;
      const GradCheckReport report = gradient_check(cfg);
      INFO(encoder_kind_name(kind) << " seed " << seed << " worst " << report.worst_rel_error
                                   << " at " << report.worst_tensor << "["
                                   << report.worst_index << "]");
      REQUIRE(report.passed(1e-4));
      REQUIRE(report.params_checked > 100);
    }
  }
}

TEST_CASE("gradient of a two-clip batch is the sum of per-clip gradients", "[backprop]") {
  Rng rng(5);
  Model<double> m(EncoderKind::kGru, 10, 5, 4, 13);
  const auto clips = random_clips(10, 6, 2, rng);
  std::vector<VectorX<double>> dpred(2);
  for (auto& d : dpred) {
    d.resize(6);
    for (Eigen::Index i = 0; i < 6; ++i) d(i) = rng.normal();
  }

  TrainContext<double> ctx(m);

  m.zero_grads();
  ctx.forward(clips, false);
  ctx.backward(dpred);
  const auto together = collect_grads(m);

  // Batch statistics differ between a 2-clip batch and a 1-clip batch, so
  // additivity is checked on one clip run twice (the batch must stay alive
  // until backward: forward caches pointers into it).
  const std::vector<MatrixX<double>> single = {clips[0]};
  const std::vector<VectorX<double>> dsingle = {dpred[0]};
  m.zero_grads();
  ctx.forward(single, false);
  ctx.backward(dsingle);
  const auto once = collect_grads(m);
  ctx.forward(single, false);
  ctx.backward(dsingle);
  const auto twice = collect_grads(m);
  for (std::size_t i = 0; i < once.size(); ++i) {
    REQUIRE(twice[i] == Catch::Approx(2.0 * once[i]).margin(1e-12));
  }
  REQUIRE(together.size() == once.size());
}

TEST_CASE("a corrupted gradient is flagged by name", "[backprop][gradcheck]") {
  GradCheckConfig cfg;
  cfg.kind = EncoderKind::kGru;
  cfg.input_dim = 8;
  cfg.hidden_dim = 5;
  cfg.mlp_dim = 5;
  cfg.frames = 3;
  cfg.seed = 3;
  const GradCheckReport report = gradient_check(cfg, 1e-4, [](Model<double>& m) {
    m.head1.dW(2, 1) += 0.05;
  });
  REQUIRE_FALSE(report.passed(1e-4));
  REQUIRE(report.worst_tensor == "head1.W");
}

TEST_CASE("backward without a forward is a state error", "[backprop]") {
  Model<double> m(EncoderKind::kGru, 8, 4, 4, 1);
  TrainContext<double> ctx(m);
  std::vector<VectorX<double>> dpred(1, VectorX<double>::Zero(3));
  REQUIRE_THROWS_AS(ctx.backward(dpred), std::logic_error);
}

TEST_CASE("training forward in parallel matches serial exactly", "[backprop]") {
  Rng rng(8);
  Model<double> m(EncoderKind::kLstm, 12, 6, 5, 17);
  const auto clips = random_clips(12, 9, 5, rng);
  std::vector<VectorX<double>> dpred(5);
  for (auto& d : dpred) {
    d.resize(9);
    for (Eigen::Index i = 0; i < 9; ++i) d(i) = rng.normal();
  }

  TrainContext<double> ctx(m);
  m.zero_grads();
  const auto serial_preds = ctx.forward(clips, false);
  ctx.backward(dpred);
  const auto serial_grads = collect_grads(m);

  ThreadPool pool(3);
  m.zero_grads();
  const auto parallel_preds = ctx.forward(clips, false, &pool);
  ctx.backward(dpred, &pool);
  const auto parallel_grads = collect_grads(m);

  for (std::size_t i = 0; i < serial_preds.size(); ++i) {
    REQUIRE(serial_preds[i] == parallel_preds[i]);
  }
  REQUIRE(serial_grads == parallel_grads);
}

TEST_CASE("fast whole-clip inference matches the step-by-step path", "[backprop]") {
  Rng rng(21);
  for (EncoderKind kind : {EncoderKind::kLstm, EncoderKind::kGru, EncoderKind::kFc}) {
    Model<double> m(kind, 9, 5, 4, 23);
    m.head_bn.batches_seen = 1;
    for (Eigen::Index i = 0; i < m.head_bn.running_mean.size(); ++i) {
      m.head_bn.running_mean(i) = 0.1 * rng.normal();
      m.head_bn.running_var(i) = 0.5 + rng.uniform();
    }
    if (kind == EncoderKind::kFc) {
      m.enc_bn.batches_seen = 1;
      for (Eigen::Index i = 0; i < m.enc_bn.running_mean.size(); ++i) {
        m.enc_bn.running_mean(i) = 0.1 * rng.normal();
        m.enc_bn.running_var(i) = 0.5 + rng.uniform();
      }
    }

    Spectrogram spec;
    spec.rows = 9;
    spec.cols = 7;
    spec.sample_rate = 16000;
    spec.hop = 256;
    spec.values.resize(63);
    for (auto& v : spec.values) v = static_cast<float>(rng.normal());

    MatrixX<double> X(9, 7);
    for (int b = 0; b < 9; ++b) {
      for (int t = 0; t < 7; ++t) {
        X(b, t) = (spec.at(static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(t)) -
                   m.norm.spec_mean) /
                  m.norm.spec_std;
      }
    }
    const VectorX<double> fast = predict_frames(m, X);
    const auto slow = m.predict_sequence(spec, m.initial_state());
    for (int t = 0; t < 7; ++t) {
      REQUIRE(fast(t) * m.norm.label_scale_mm ==
              Catch::Approx(slow.air_column_mm[static_cast<std::size_t>(t)]).margin(1e-10));
    }
  }
}
