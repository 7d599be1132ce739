// Command-line front end: data synthesis, training, evaluation, gradient
// checking, and closed-loop pouring.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pouring/checkpoint.hpp"
#include "pouring/container.hpp"
#include "pouring/control.hpp"
#include "pouring/dataset.hpp"
#include "pouring/eval.hpp"
#include "pouring/gradcheck.hpp"
#include "pouring/pour_sim.hpp"
#include "pouring/train.hpp"

namespace {

using namespace pouring;

constexpr const char* kVersion = POURING_VERSION;

std::vector<ContainerSpec> resolve_containers(const std::string& container_file) {
  return container_file.empty() ? default_containers() : load_containers(container_file);
}

void ensure_out_dir(const std::string& out) {
  if (out.empty()) throw CLI::ValidationError("--out", "output directory is required");
  std::filesystem::create_directories(out);
}

// Every run records its resolved configuration; the directory is
// self-describing and the command can be replayed from meta.json alone.
void write_meta(const std::string& out, const std::string& command, nlohmann::json config) {
  nlohmann::json meta;
  meta["command"] = command;
  meta["version"] = std::string("pouring ") + kVersion;
  meta["config"] = std::move(config);
  std::ofstream f(std::filesystem::path(out) / "meta.json");
  f << meta.dump(2) << "\n";
}

struct SynthOptions {
  std::string out;
  std::string container_file;
  std::vector<std::string> containers = {"glass", "thermos", "mug"};
  int pours = 300;
  double min_duration = 4.0, max_duration = 11.0;
  double flow_min = 12.0, flow_max = 28.0;
  double init_min = 5.0, init_max = 30.0;
  double noise_floor_db = -20.0;
  double fill_cap = 0.92;  // of container height, overfill guard
  std::uint32_t sample_rate = 44100;
  double trace_rate = 250.0;
  std::uint64_t seed = 0;
  int threads = 0;
  bool verbose = false;
};

// Randomized profile for one pour; flows are rescaled when the draw would
// overfill the container.
struct DrawnPour {
  const ContainerSpec* container;
  PourProfile profile;
};

DrawnPour draw_pour(const std::vector<const ContainerSpec*>& selection, const SynthOptions& opt,
                    std::uint64_t index) {
  Rng rng(derive_seed(opt.seed, index));
  const ContainerSpec* c = selection[rng.below(selection.size())];
  const double duration = rng.uniform(opt.min_duration, opt.max_duration);
  double q0 = rng.uniform(opt.flow_min, opt.flow_max);
  double q1 = rng.uniform(opt.flow_min, opt.flow_max);
  const double h0 = rng.uniform(opt.init_min, opt.init_max);
  const double fill_mm = 0.5 * (q0 + q1) * duration * 1000.0 / cross_section_area_mm2(*c);
  const double budget_mm = opt.fill_cap * c->total_height_mm - h0;
  if (fill_mm > budget_mm) {
    const double s = std::max(budget_mm, 0.0) / fill_mm;
    q0 *= s;
    q1 *= s;
  }
  PourProfile profile{[q0, q1, duration](double t) { return q0 + (q1 - q0) * t / duration; },
                      duration, h0, opt.noise_floor_db};
  return {c, std::move(profile)};
}

int cmd_synth(const SynthOptions& opt) {
  ensure_out_dir(opt.out);
  const auto library = resolve_containers(opt.container_file);
  std::vector<const ContainerSpec*> selection;
  for (const auto& name : opt.containers) selection.push_back(&find_container(library, name));

  std::filesystem::create_directories(std::filesystem::path(opt.out) / "wavs");
  std::filesystem::create_directories(std::filesystem::path(opt.out) / "traces");

  std::vector<ManifestEntry> manifest(static_cast<std::size_t>(opt.pours));
  std::vector<double> out_of_band(static_cast<std::size_t>(opt.pours), 0.0);
  ThreadPool pool(opt.threads == 0 ? 0 : static_cast<unsigned>(opt.threads));
  pool.for_chunks(static_cast<std::size_t>(opt.pours),
                  [&](unsigned, std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      char id[32];
      std::snprintf(id, sizeof(id), "pour_%05zu", i);
      ManifestEntry& entry = manifest[i];
      entry.trace_id = id;
      try {
        const DrawnPour drawn = draw_pour(selection, opt, i);
        const SimulatedPour pour = simulate_pour(*drawn.container, drawn.profile,
                                                 opt.sample_rate,
                                                 derive_seed(opt.seed, 0x9000 + i));
        entry.wav_path = std::string("wavs/") + id + ".wav";
        entry.trace_path = std::string("traces/") + id + ".csv";
        entry.container_name = drawn.container->name;
        write_wav((std::filesystem::path(opt.out) / entry.wav_path).string(), pour.waveform,
                  opt.sample_rate);
        write_trace_csv((std::filesystem::path(opt.out) / entry.trace_path).string(),
                        pour.trace, opt.trace_rate);
        out_of_band[i] = pour.out_of_band_fraction;
      } catch (const std::exception& e) {
        entry = ManifestEntry{entry.trace_id, "", "", "", e.what()};
      }
    }
  });

  // Manifest last: its presence marks a complete dataset.
  write_manifest((std::filesystem::path(opt.out) / "manifest.jsonl").string(), manifest);

  std::size_t failed = 0;
  double oob = 0.0;
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    if (!manifest[i].error.empty()) {
      ++failed;
      std::cerr << manifest[i].trace_id << ": " << manifest[i].error << "\n";
    } else {
      oob += out_of_band[i];
    }
  }
  const std::size_t ok = manifest.size() - failed;
  std::printf("synth: %zu pours written to %s (%zu failed), mean out-of-band fraction %.4f\n",
              ok, opt.out.c_str(), failed, ok > 0 ? oob / static_cast<double>(ok) : 0.0);
  return ok == 0 ? 1 : 0;
}

struct TrainOptions {
  std::string data, out;
  std::string encoder = "gru";
  TrainConfig cfg;
  bool verbose = false;
};

int cmd_train(TrainOptions& opt) {
  ensure_out_dir(opt.out);
  opt.cfg.encoder = parse_encoder_kind(opt.encoder);
  const auto pours = load_dataset(opt.data);
  std::printf("train: %zu pours from %s, encoder %s, hidden %d\n", pours.size(),
              opt.data.c_str(), opt.encoder.c_str(), opt.cfg.hidden_dim);

  TrainResult result = train(pours, opt.cfg);
  if (opt.verbose) {
    for (const auto& e : result.log) {
      std::printf("  epoch %3d train %10.4f val %10.4f mm2 mono %8.4f mm  (%.1fs)\n", e.epoch,
                  e.train_loss_mm2, e.val_loss_mm2, e.val_mono_mm, e.wall_seconds);
    }
  }
  save_checkpoint((std::filesystem::path(opt.out) / "checkpoint.bin").string(), result.model);
  write_train_log_csv((std::filesystem::path(opt.out) / "train_log.csv").string(), result.log);
  std::printf("train: best epoch %d, validation %.4f mm2 -> %s/checkpoint.bin\n",
              result.best_epoch, result.best_val_mm2, opt.out.c_str());
  return 0;
}

struct EvalOptionsCli {
  std::string data, out;
  std::vector<std::string> models;
  EvalOptions options;
  bool verbose = false;
};

int cmd_eval(EvalOptionsCli& opt) {
  ensure_out_dir(opt.out);
  if (opt.models.empty()) throw CLI::ValidationError("--model", "at least one checkpoint");
  std::vector<std::pair<std::string, Model<float>>> loaded;
  for (const std::string& spec : opt.models) {
    std::string name, path;
    const auto eq = spec.find('=');
    if (eq == std::string::npos) {
      path = spec;
    } else {
      name = spec.substr(0, eq);
      path = spec.substr(eq + 1);
    }
    Model<float> model = load_checkpoint<float>(path);
    if (name.empty()) name = encoder_kind_name(model.kind());
    for (const auto& [existing, m] : loaded) {
      if (existing == name) name += "_2";
    }
    loaded.emplace_back(name, std::move(model));
    loaded.back().first = name;
  }
  std::vector<std::pair<std::string, const Model<float>*>> views;
  views.reserve(loaded.size());
  for (auto& [name, model] : loaded) views.emplace_back(name, &model);

  const auto pours = load_dataset(opt.data);
  const auto library = resolve_containers("");
  opt.options.dataset_id = opt.data;
  EvalReport report = compare_variants(views, pours, library, opt.options);
  for (std::size_t v = 0; v < report.variants.size(); ++v) {
    report.variants[v].checkpoint_id = opt.models[v];
  }
  write_eval_report(opt.out, report);

  for (const auto& v : report.variants) {
    double frac2 = 0.0;
    for (std::size_t i = 0; i < report.thresholds_mm.size(); ++i) {
      if (std::abs(report.thresholds_mm[i] - 2.0) < 1e-9) frac2 = v.fractions[i];
    }
    std::printf("eval: %-8s MAE %.3f +- %.3f mm over %zu frames, %.1f%% < 2 mm\n",
                v.name.c_str(), v.mean_abs_mm, v.std_abs_mm, v.frames, 100.0 * frac2);
    if (opt.verbose) {
      for (const auto& c : v.per_container) {
        std::printf("      %-12s %.3f +- %.3f mm  (%.2f +- %.2f ml)\n", c.container.c_str(),
                    c.mean_mm, c.std_mm, c.mean_ml, c.std_ml);
      }
    }
  }
  std::printf("eval: report written to %s\n", opt.out.c_str());
  return 0;
}

struct PourOptions {
  std::string model, out;
  std::string container = "glass";
  std::string container_file;
  std::vector<double> targets = {40.0, 50.0, 60.0, 70.0, 80.0};
  int repeats = 5;
  double flow_mls = 18.0;
  double flow_jitter = 0.15;
  double duration_s = 16.0;
  double init_height_mm = 20.0;
  double noise_floor_db = -20.0;
  ControlConfig control;
  std::uint64_t seed = 0;
  bool verbose = false;
};

int cmd_pour(const PourOptions& opt) {
  ensure_out_dir(opt.out);
  const auto library = resolve_containers(opt.container_file);
  const ContainerSpec& container = find_container(library, opt.container);
  const Model<float> model = load_checkpoint<float>(opt.model);

  std::vector<PourEpisodeResult> episodes;
  std::map<double, std::pair<double, int>> by_target;  // target -> (sum |err|, n)
  int timeouts = 0;
  for (std::size_t ti = 0; ti < opt.targets.size(); ++ti) {
    for (int rep = 0; rep < opt.repeats; ++rep) {
      const std::uint64_t ep_seed =
          derive_seed(opt.seed, ti * 1000 + static_cast<std::uint64_t>(rep));
      Rng rng(derive_seed(ep_seed, 0xF));
      const double q = opt.flow_mls * (1.0 + opt.flow_jitter * (2.0 * rng.uniform() - 1.0));
      const PourProfile profile = constant_flow_profile(q, opt.duration_s, opt.init_height_mm,
                                                        opt.noise_floor_db);
      PourEpisodeResult episode = run_closed_loop(model, container, profile,
                                                  opt.targets[ti], ep_seed, opt.control);
      if (episode.timed_out) ++timeouts;
      auto& agg = by_target[opt.targets[ti]];
      agg.first += std::abs(episode.achieved_air_column_mm - episode.target_air_column_mm);
      agg.second += 1;
      if (opt.verbose) {
        std::printf("  target %5.1f rep %d: achieved %6.2f mm (stop %5.2f s%s)\n",
                    opt.targets[ti], rep, episode.achieved_air_column_mm, episode.stop_time_s,
                    episode.timed_out ? ", TIMEOUT" : "");
      }
      episodes.push_back(std::move(episode));
    }
  }

  write_episodes_jsonl((std::filesystem::path(opt.out) / "episodes.jsonl").string(), episodes);
  write_latencies_jsonl((std::filesystem::path(opt.out) / "latencies.jsonl").string(), episodes);

  double total = 0.0;
  int n = 0;
  for (const auto& [target, agg] : by_target) {
    std::printf("pour: target %5.1f mm -> mean |achieved - target| %.3f mm over %d episodes\n",
                target, agg.first / agg.second, agg.second);
    total += agg.first;
    n += agg.second;
  }
  std::printf("pour: overall mean absolute error %.3f mm, %d timeouts\n", total / n, timeouts);

  // Loop timing: reported for comparison, hardware-dependent, not asserted.
  std::vector<double> all_ms, spec_ms;
  for (const auto& e : episodes) {
    all_ms.insert(all_ms.end(), e.loop_latency_ms.begin(), e.loop_latency_ms.end());
    spec_ms.insert(spec_ms.end(), e.spectrogram_latency_ms.begin(),
                   e.spectrogram_latency_ms.end());
  }
  PourEpisodeResult merged;
  merged.loop_latency_ms = std::move(all_ms);
  merged.spectrogram_latency_ms = std::move(spec_ms);
  const LatencySummary lat = measure_loop_latency(merged);
  std::printf("pour: loop latency mean %.2f ms (p95 %.2f, max %.2f), %.0f%% in spectrograms\n",
              lat.mean_ms, lat.p95_ms, lat.max_ms, 100.0 * lat.spectrogram_share);
  return 0;
}

struct GradcheckOptions {
  int hidden = 8;
  int input_dim = 16;
  int mlp = 8;
  std::vector<int> frames = {1, 3, 7};
  int seeds = 5;
  int batch = 2;
  double eps = 1e-4;
  double tol = 1e-4;
  bool verbose = false;
};

int cmd_gradcheck(const GradcheckOptions& opt) {
  GradCheckReport worst;
  std::string worst_where;
  bool all_passed = true;
  double total_s = 0.0;
  for (EncoderKind kind : {EncoderKind::kLstm, EncoderKind::kGru, EncoderKind::kFc}) {
    for (int frames : opt.frames) {
      for (int seed = 0; seed < opt.seeds; ++seed) {
        GradCheckConfig cfg;
        cfg.kind = kind;
        cfg.input_dim = opt.input_dim;
        cfg.hidden_dim = opt.hidden;
        cfg.mlp_dim = opt.mlp;
        cfg.frames = frames;
        cfg.batch = opt.batch;
        cfg.seed = static_cast<std::uint64_t>(seed);
        cfg.epsilon = opt.eps;
        const GradCheckReport report = gradient_check(cfg, opt.tol);
        total_s += report.seconds;
        const bool ok = report.passed(opt.tol);
        all_passed = all_passed && ok;
        if (opt.verbose || !ok) {
          std::printf("  %-4s T=%d seed=%d: %zu params, worst %.3e at %s[%lld]%s\n",
                      encoder_kind_name(kind), frames, seed, report.params_checked,
                      report.worst_rel_error, report.worst_tensor.c_str(),
                      static_cast<long long>(report.worst_index), ok ? "" : "  FAIL");
        }
        if (report.worst_rel_error > worst.worst_rel_error) {
          worst = report;
          worst_where = std::string(encoder_kind_name(kind)) + " T=" +
                        std::to_string(frames) + " seed=" + std::to_string(seed);
        }
      }
    }
  }
  std::printf("gradcheck: %s; worst relative error %.3e at %s[%lld] (%s), tolerance %.1e, "
              "%.1f s total\n",
              all_passed ? "PASS" : "FAIL", worst.worst_rel_error, worst.worst_tensor.c_str(),
              static_cast<long long>(worst.worst_index), worst_where.c_str(), opt.tol, total_s);
  return all_passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Audio-based liquid-height perception for robotic pouring"};
  app.set_version_flag("--version", std::string("pouring ") + kVersion);
  app.set_config("--config", "", "Read options from a TOML-style config file");
  app.require_subcommand(1);

  SynthOptions synth;
  CLI::App* s = app.add_subcommand("synth", "Synthesize a dataset of pouring recordings");
  s->add_option("--out", synth.out, "Output dataset directory")->required();
  s->add_option("--pours", synth.pours, "Number of pours")->capture_default_str();
  s->add_option("--containers", synth.containers, "Container names to draw from")
      ->delimiter(',')
      ->capture_default_str();
  s->add_option("--container-file", synth.container_file, "Container library JSON");
  s->add_option("--min-duration", synth.min_duration, "s")->capture_default_str();
  s->add_option("--max-duration", synth.max_duration, "s")->capture_default_str();
  s->add_option("--flow-min", synth.flow_min, "ml/s")->capture_default_str();
  s->add_option("--flow-max", synth.flow_max, "ml/s")->capture_default_str();
  s->add_option("--init-min", synth.init_min, "mm")->capture_default_str();
  s->add_option("--init-max", synth.init_max, "mm")->capture_default_str();
  s->add_option("--noise-floor-db", synth.noise_floor_db, "dB re resonance peak")
      ->capture_default_str();
  s->add_option("--sample-rate", synth.sample_rate, "Hz")->capture_default_str();
  s->add_option("--trace-rate", synth.trace_rate, "trace CSV rows per second")
      ->capture_default_str();
  s->add_option("--seed", synth.seed, "RNG seed")->capture_default_str();
  s->add_option("--threads", synth.threads, "0 = all cores")->capture_default_str();
  s->add_flag("--verbose", synth.verbose);

  TrainOptions tr;
  CLI::App* t = app.add_subcommand("train", "Train a height regressor on a dataset");
  t->add_option("--data", tr.data, "Dataset directory (with manifest.jsonl)")->required();
  t->add_option("--out", tr.out, "Output directory")->required();
  t->add_option("--encoder", tr.encoder, "lstm|gru|fc")->capture_default_str();
  t->add_option("--alpha", tr.cfg.alpha, "monotonicity loss weight")->capture_default_str();
  t->add_option("--lr", tr.cfg.learning_rate, "learning rate")->capture_default_str();
  t->add_option("--lr-decay", tr.cfg.lr_decay, "per-epoch decay")->capture_default_str();
  t->add_option("--grad-clip", tr.cfg.grad_clip_norm, "global-norm clip, 0 off")
      ->capture_default_str();
  t->add_option("--batch-size", tr.cfg.batch_size)->capture_default_str();
  t->add_option("--epochs", tr.cfg.epochs)->capture_default_str();
  t->add_option("--hidden", tr.cfg.hidden_dim, "recurrent feature width")
      ->capture_default_str();
  t->add_option("--mlp", tr.cfg.mlp_dim, "head hidden width")->capture_default_str();
  t->add_option("--clips-per-second", tr.cfg.clips_per_second,
                "clips sampled per recording second")
      ->capture_default_str();
  t->add_option("--val-fraction", tr.cfg.val_fraction)->capture_default_str();
  t->add_option("--seed", tr.cfg.seed)->capture_default_str();
  t->add_option("--threads", tr.cfg.threads, "0 = all cores")->capture_default_str();
  t->add_flag("--verbose", tr.verbose);

  EvalOptionsCli ev;
  CLI::App* e = app.add_subcommand("eval", "Evaluate checkpoints on a dataset");
  e->add_option("--data", ev.data, "Dataset directory")->required();
  e->add_option("--out", ev.out, "Report directory")->required();
  e->add_option("--model", ev.models, "Checkpoint path or name=path; repeatable")
      ->required();
  e->add_option("--threshold-step", ev.options.threshold_step_mm, "mm")->capture_default_str();
  e->add_option("--threshold-max", ev.options.threshold_max_mm, "mm")->capture_default_str();
  e->add_option("--clips-per-second", ev.options.clips_per_second)->capture_default_str();
  e->add_option("--seed", ev.options.seed)->capture_default_str();
  e->add_option("--threads", ev.options.threads, "0 = all cores")->capture_default_str();
  e->add_flag("--verbose", ev.verbose);

  PourOptions po;
  CLI::App* p = app.add_subcommand("pour", "Closed-loop pouring episodes in simulation");
  p->add_option("--model", po.model, "Checkpoint path")->required();
  p->add_option("--out", po.out, "Output directory")->required();
  p->add_option("--container", po.container)->capture_default_str();
  p->add_option("--container-file", po.container_file, "Container library JSON");
  p->add_option("--target-mm", po.targets, "Target air-column lengths")
      ->delimiter(',')
      ->capture_default_str();
  p->add_option("--repeats", po.repeats)->capture_default_str();
  p->add_option("--flow-mls", po.flow_mls, "nominal flow")->capture_default_str();
  p->add_option("--flow-jitter", po.flow_jitter, "relative per-episode jitter")
      ->capture_default_str();
  p->add_option("--duration-s", po.duration_s)->capture_default_str();
  p->add_option("--init-height-mm", po.init_height_mm)->capture_default_str();
  p->add_option("--noise-floor-db", po.noise_floor_db)->capture_default_str();
  p->add_option("--actuator-delay-s", po.control.actuator_delay_s)->capture_default_str();
  p->add_option("--warmup-s", po.control.warmup_s, "suppress decisions before this")
      ->capture_default_str();
  p->add_option("--seed", po.seed)->capture_default_str();
  p->add_flag("--verbose", po.verbose);

  GradcheckOptions gc;
  CLI::App* g = app.add_subcommand("gradcheck",
                                   "Verify analytic gradients against finite differences");
  g->add_option("--hidden", gc.hidden)->capture_default_str();
  g->add_option("--input-dim", gc.input_dim)->capture_default_str();
  g->add_option("--mlp", gc.mlp)->capture_default_str();
  g->add_option("--frames", gc.frames, "sequence lengths")->delimiter(',')
      ->capture_default_str();
  g->add_option("--seeds", gc.seeds)->capture_default_str();
  g->add_option("--batch", gc.batch)->capture_default_str();
  g->add_option("--eps", gc.eps, "finite-difference step")->capture_default_str();
  g->add_option("--tol", gc.tol, "relative error tolerance")->capture_default_str();
  g->add_flag("--verbose", gc.verbose);

  CLI11_PARSE(app, argc, argv);

  try {
    if (s->parsed()) {
      const int rc = cmd_synth(synth);
      nlohmann::json cfg;
      cfg["pours"] = synth.pours;
      cfg["containers"] = synth.containers;
      cfg["container_file"] = synth.container_file;
      cfg["min_duration"] = synth.min_duration;
      cfg["max_duration"] = synth.max_duration;
      cfg["flow_min"] = synth.flow_min;
      cfg["flow_max"] = synth.flow_max;
      cfg["init_min"] = synth.init_min;
      cfg["init_max"] = synth.init_max;
      cfg["noise_floor_db"] = synth.noise_floor_db;
      cfg["fill_cap"] = synth.fill_cap;
      cfg["sample_rate"] = synth.sample_rate;
      cfg["trace_rate"] = synth.trace_rate;
      cfg["seed"] = synth.seed;
      cfg["threads"] = synth.threads;
      write_meta(synth.out, "synth", cfg);
      return rc;
    }
    if (t->parsed()) {
      const int rc = cmd_train(tr);
      nlohmann::json cfg;
      cfg["data"] = tr.data;
      cfg["encoder"] = tr.encoder;
      cfg["alpha"] = tr.cfg.alpha;
      cfg["lr"] = tr.cfg.learning_rate;
      cfg["lr_decay"] = tr.cfg.lr_decay;
      cfg["grad_clip"] = tr.cfg.grad_clip_norm;
      cfg["batch_size"] = tr.cfg.batch_size;
      cfg["epochs"] = tr.cfg.epochs;
      cfg["hidden"] = tr.cfg.hidden_dim;
      cfg["mlp"] = tr.cfg.mlp_dim;
      cfg["clips_per_second"] = tr.cfg.clips_per_second;
      cfg["val_fraction"] = tr.cfg.val_fraction;
      cfg["seed"] = tr.cfg.seed;
      cfg["threads"] = tr.cfg.threads;
      write_meta(tr.out, "train", cfg);
      return rc;
    }
    if (e->parsed()) {
      const int rc = cmd_eval(ev);
      nlohmann::json cfg;
      cfg["data"] = ev.data;
      cfg["models"] = ev.models;
      cfg["threshold_step"] = ev.options.threshold_step_mm;
      cfg["threshold_max"] = ev.options.threshold_max_mm;
      cfg["clips_per_second"] = ev.options.clips_per_second;
      cfg["seed"] = ev.options.seed;
      cfg["threads"] = ev.options.threads;
      write_meta(ev.out, "eval", cfg);
      return rc;
    }
    if (p->parsed()) {
      const int rc = cmd_pour(po);
      nlohmann::json cfg;
      cfg["model"] = po.model;
      cfg["container"] = po.container;
      cfg["container_file"] = po.container_file;
      cfg["targets_mm"] = po.targets;
      cfg["repeats"] = po.repeats;
      cfg["flow_mls"] = po.flow_mls;
      cfg["flow_jitter"] = po.flow_jitter;
      cfg["duration_s"] = po.duration_s;
      cfg["init_height_mm"] = po.init_height_mm;
      cfg["noise_floor_db"] = po.noise_floor_db;
      cfg["actuator_delay_s"] = po.control.actuator_delay_s;
      cfg["warmup_s"] = po.control.warmup_s;
      cfg["seed"] = po.seed;
      write_meta(po.out, "pour", cfg);
      return rc;
    }
    if (g->parsed()) {
      return cmd_gradcheck(gc);
    }
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}
