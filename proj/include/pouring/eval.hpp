#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pouring/backprop.hpp"
#include "pouring/container.hpp"
#include "pouring/dataset.hpp"
#include "pouring/thread_pool.hpp"
#include "pouring/train.hpp"

namespace pouring {

// Fraction of frames whose absolute error falls below each threshold.
// Non-decreasing in the threshold by construction.
inline std::vector<double> threshold_accuracy(std::span<const double> errors,
                                              std::span<const double> thresholds) {
  if (errors.empty()) throw std::invalid_argument("threshold_accuracy: no errors given");
  for (double e : errors) {
    if (!(e >= 0.0)) throw std::invalid_argument("threshold_accuracy: errors must be >= 0");
  }
  std::vector<double> sorted(errors.begin(), errors.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> curve;
  curve.reserve(thresholds.size());
  for (double tau : thresholds) {
    const auto below = std::lower_bound(sorted.begin(), sorted.end(), tau) - sorted.begin();
    curve.push_back(static_cast<double>(below) / static_cast<double>(sorted.size()));
  }
  return curve;
}

// Height error converted to poured-amount error for the cylinder model.
inline double amount_error_ml(double height_error_mm, const ContainerSpec& container) {
  return height_error_mm * cross_section_area_mm2(container) / 1000.0;
}

struct ContainerStats {
  std::string container;
  double mean_mm = 0.0, std_mm = 0.0;
  double mean_ml = 0.0, std_ml = 0.0;
  std::size_t frames = 0;
};

struct VariantReport {
  std::string name;
  std::string checkpoint_id;
  std::vector<double> fractions;  // one per threshold
  std::vector<ContainerStats> per_container;
  double mean_abs_mm = 0.0, std_abs_mm = 0.0;
  double final_frame_mean_abs_mm = 0.0;  // last-frame-only reading of the metric
  std::size_t frames = 0;
};

struct EvalReport {
  std::vector<double> thresholds_mm;
  std::vector<VariantReport> variants;
  std::uint64_t seed = 0;
  std::string dataset_id;
};

struct EvalOptions {
  double threshold_step_mm = 0.25;
  double threshold_max_mm = 10.0;
  double clips_per_second = 0.7;
  std::uint64_t seed = 0;
  int threads = 1;
  std::string dataset_id;
};

// Evaluates several checkpoints on the identical clip set (same pours, same
// seeded clip placement, same frames) and reports threshold-accuracy curves
// plus per-container errors. All checkpoints must carry identical
// normalization constants, otherwise their frame sets would not be
// comparable.
inline EvalReport compare_variants(
    const std::vector<std::pair<std::string, const Model<float>*>>& models,
    const std::vector<PourRecord>& pours, const std::vector<ContainerSpec>& containers,
    const EvalOptions& options = {}) {
  if (models.empty()) throw std::invalid_argument("compare_variants: no checkpoints");
  if (pours.empty()) throw std::invalid_argument("compare_variants: no pours");
  const Normalization norm = models.front().second->norm;
  for (const auto& [name, model] : models) {
    if (model->norm.spec_mean != norm.spec_mean || model->norm.spec_std != norm.spec_std ||
        model->norm.label_scale_mm != norm.label_scale_mm) {
      throw std::invalid_argument("compare_variants: checkpoint '" + name +
                                  "' has mismatched normalization constants");
    }
  }

  std::vector<ClipSample> clips;
  for (std::size_t i = 0; i < pours.size(); ++i) {
    auto sampled = sample_clips(pours[i].trace, pours[i].duration_s, options.clips_per_second,
                                derive_seed(options.seed, i), i, pours[i].trace_id);
    for (auto& c : sampled) clips.push_back(std::move(c));
  }
  if (clips.empty()) throw std::invalid_argument("compare_variants: clip sampling came up empty");

  EvalReport report;
  report.seed = options.seed;
  report.dataset_id = options.dataset_id;
  for (double tau = 0.0; tau <= options.threshold_max_mm + 1e-9; tau += options.threshold_step_mm) {
    report.thresholds_mm.push_back(tau);
  }

  ThreadPool pool(options.threads == 0 ? 0 : static_cast<unsigned>(options.threads));

  for (const auto& [name, model] : models) {
    // Per-clip error series, filled in parallel, reduced in clip order.
    std::vector<std::vector<double>> clip_errors(clips.size());
    pool.for_chunks(clips.size(), [&](unsigned, std::size_t lo, std::size_t hi) {
      for (std::size_t i = lo; i < hi; ++i) {
        const ClipSample& clip = clips[i];
        const MatrixX<float> X = clip_matrix(
            clip_spectrogram(pours[clip.pour_index].wave16k, clip.clip_start_s), norm);
        const VectorX<float> pred = predict_frames(*model, X);
        auto& errs = clip_errors[i];
        errs.resize(clip.labels_mm.size());
        for (std::size_t j = 0; j < errs.size(); ++j) {
          errs[j] = std::abs(static_cast<double>(pred(static_cast<Eigen::Index>(j))) *
                                 norm.label_scale_mm -
                             clip.labels_mm[j]);
        }
      }
    });

    VariantReport variant;
    variant.name = name;
    std::vector<double> all_errors;
    std::map<std::string, std::vector<double>> by_container;
    double final_sum = 0.0;
    for (std::size_t i = 0; i < clips.size(); ++i) {
      const std::string& cname = pours[clips[i].pour_index].container_name;
      auto& bucket = by_container[cname];
      for (double e : clip_errors[i]) {
        all_errors.push_back(e);
        bucket.push_back(e);
      }
      final_sum += clip_errors[i].back();
    }
    variant.frames = all_errors.size();
    variant.final_frame_mean_abs_mm = final_sum / static_cast<double>(clips.size());

    double sum = 0.0, sumsq = 0.0;
    for (double e : all_errors) {
      sum += e;
      sumsq += e * e;
    }
    variant.mean_abs_mm = sum / static_cast<double>(all_errors.size());
    variant.std_abs_mm = std::sqrt(std::max(
        sumsq / static_cast<double>(all_errors.size()) - variant.mean_abs_mm * variant.mean_abs_mm,
        0.0));

    for (const auto& [cname, errs] : by_container) {
      const ContainerSpec& spec = find_container(containers, cname);
      ContainerStats stats;
      stats.container = cname;
      stats.frames = errs.size();
      double s = 0.0, s2 = 0.0;
      for (double e : errs) {
        s += e;
        s2 += e * e;
      }
      stats.mean_mm = s / static_cast<double>(errs.size());
      stats.std_mm =
          std::sqrt(std::max(s2 / static_cast<double>(errs.size()) - stats.mean_mm * stats.mean_mm,
                             0.0));
      stats.mean_ml = amount_error_ml(stats.mean_mm, spec);
      stats.std_ml = amount_error_ml(stats.std_mm, spec);
      variant.per_container.push_back(std::move(stats));
    }

    variant.fractions = threshold_accuracy(all_errors, report.thresholds_mm);
    report.variants.push_back(std::move(variant));
  }
  return report;
}

// Report directory: curves.csv, errors.csv, meta.json. Byte-deterministic
// for identical inputs.
inline void write_eval_report(const std::string& dir, const EvalReport& report) {
  std::filesystem::create_directories(dir);
  char line[256];
  {
    std::ofstream out(std::filesystem::path(dir) / "curves.csv");
    out << "variant,threshold_mm,fraction\n";
    for (const auto& v : report.variants) {
      for (std::size_t i = 0; i < report.thresholds_mm.size(); ++i) {
        std::snprintf(line, sizeof(line), "%s,%.9g,%.9g\n", v.name.c_str(),
                      report.thresholds_mm[i], v.fractions[i]);
        out << line;
      }
    }
  }
  {
    std::ofstream out(std::filesystem::path(dir) / "errors.csv");
    out << "variant,container,mean_mm,std_mm,mean_ml,std_ml\n";
    for (const auto& v : report.variants) {
      for (const auto& c : v.per_container) {
        std::snprintf(line, sizeof(line), "%s,%s,%.9g,%.9g,%.9g,%.9g\n", v.name.c_str(),
                      c.container.c_str(), c.mean_mm, c.std_mm, c.mean_ml, c.std_ml);
        out << line;
      }
    }
  }
  {
    nlohmann::json meta;
    meta["seed"] = report.seed;
    meta["dataset"] = report.dataset_id;
    for (const auto& v : report.variants) {
      nlohmann::json entry;
      entry["checkpoint"] = v.checkpoint_id;
      entry["mean_abs_mm"] = v.mean_abs_mm;
      entry["std_abs_mm"] = v.std_abs_mm;
      entry["final_frame_mean_abs_mm"] = v.final_frame_mean_abs_mm;
      entry["frames"] = v.frames;
      meta["variants"][v.name] = entry;
    }
    std::ofstream out(std::filesystem::path(dir) / "meta.json");
    out << meta.dump(2) << "\n";
  }
}

}  // namespace pouring
