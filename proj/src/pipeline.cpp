#include "hmof/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "hmof/error.hpp"

namespace hmof {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::optional<double> auto_or_double(const Config& c, const std::string& key) {
  if (c.is_auto(key)) return std::nullopt;
  return c.get_double(key);
}

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

PipelineSettings PipelineSettings::from_config(const Config& c) {
  PipelineSettings s;
  s.patch_size = c.get_int("grid.patch_size");
  s.flow.iterations = c.get_int("flow.iterations");
  s.flow.smoothness = c.get_double("flow.smoothness");
  s.foreground.learning_rate = c.get_double("fg.learning_rate");
  s.foreground.sensitivity = c.get_double("fg.sensitivity");
  s.foreground.tau = auto_or_double(c, "fg.tau").value_or(-1.0);
  s.foreground.warmup_frames = c.get_int("fg.warmup_frames");
  try {
    s.kind = parse_feature_kind(c.get("feat.kind"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("feat.kind: ") + e.what());
  }
  s.bins = c.get_int("feat.bins");
  s.discard_fraction = c.get_double("feat.discard_fraction");
  s.mhof_threshold = auto_or_double(c, "feat.mhof_thresh").value_or(0.0);
  const std::string& source = c.get("feat.delta_source");
  if (source != "foreground" && source != "all") {
    throw ConfigError("feat.delta_source: expected 'foreground' or 'all', got '" + source + "'");
  }
  s.delta_from_all_pixels = source == "all";
  s.latent_dim = c.get_int("ae.hidden");
  s.autoencoder.epochs = c.get_int("ae.epochs");
  s.autoencoder.learning_rate = c.get_double("ae.lr");
  s.autoencoder.batch_size = c.get_int("ae.batch");
  s.autoencoder.seed = c.get_u64("ae.seed");
  s.autoencoder.halve_on_increase = c.get_bool("ae.halve_on_increase");
  const std::string& output = c.get("ae.output");
  if (output != "latent" && output != "reconstruction") {
    throw ConfigError("ae.output: expected 'latent' or 'reconstruction', got '" + output + "'");
  }
  s.classify_reconstruction = output == "reconstruction";
  s.gmm.components = c.get_int("gmm.k");
  s.gmm.seed = c.get_u64("gmm.seed");
  s.gmm.max_iters = c.get_int("gmm.max_iters");
  s.gmm.tol = c.get_double("gmm.tol");
  s.gmm.reg = c.get_double("gmm.reg");
  s.alpha_quantile = c.get_double("gmm.alpha_quantile");
  s.alpha_override = auto_or_double(c, "gmm.alpha");
  s.beta = c.get_int("gmm.beta");
  s.threads = c.get_int("run.threads");

  if (s.patch_size < 1) throw ConfigError("grid.patch_size must be >= 1");
  if (s.flow.iterations < 1 || !(s.flow.smoothness > 0.0)) {
    throw ConfigError("flow.iterations must be >= 1 and flow.smoothness > 0");
  }
  if (s.foreground.warmup_frames < 0) throw ConfigError("fg.warmup_frames must be >= 0");
  if (s.bins < 1) throw ConfigError("feat.bins must be >= 1");
  if (s.latent_dim < 1) throw ConfigError("ae.hidden must be >= 1");
  if (s.beta < 1) throw ConfigError("gmm.beta must be >= 1");
  if (s.threads < 1) throw ConfigError("run.threads must be >= 1");
  return s;
}

ForegroundTracker::ForegroundTracker(const ForegroundSettings& settings, const PatchGrid& grid)
    : settings_(settings), grid_(grid) {}

PatchSelection ForegroundTracker::step(const Frame& frame) {
  const std::size_t index = seen_++;
  if (!background_) {
    background_.emplace(frame, settings_.learning_rate);
  }
  alpha_ = estimate_alpha(*background_, frame, settings_.sensitivity);
  PatchSelection selection;
  selection.frame_index = index;
  if (index >= static_cast<std::size_t>(settings_.warmup_frames)) {
    const auto values = patch_foreground_values(alpha_, frame, grid_);
    selection = select_patches(values, settings_.effective_tau(grid_.patch_size()), index);
  }
  background_->update(frame);
  return selection;
}

MotionSet analyze_motion(const FrameSequence& sequence, const PipelineSettings& settings,
                         bool keep_all_magnitudes) {
  if (sequence.empty()) throw DataError("no frames to analyze");
  MotionSet motion;
  motion.grid = partition(sequence.width(), sequence.height(), settings.patch_size);
  ForegroundTracker tracker(settings.foreground, motion.grid);
  motion.frames.resize(sequence.size());
  for (std::size_t i = 0; i < sequence.size(); ++i) {
    const PatchSelection selection = tracker.step(sequence[i]);
    FrameMotion& fm = motion.frames[i];
    fm.frame = i;
    const bool past_warmup = i >= static_cast<std::size_t>(settings.foreground.warmup_frames);
    const bool want_flow = i > 0 && (!selection.selected.empty() ||
                                     (keep_all_magnitudes && past_warmup));
    if (!want_flow) continue;
    const FlowField flow = estimate_flow(sequence[i - 1], sequence[i], settings.flow);
    if (keep_all_magnitudes) {
      const MagnitudeMap m = magnitude(flow);
      motion.all_magnitudes.insert(motion.all_magnitudes.end(), m.m.begin(), m.m.end());
    }
    for (std::size_t id : selection.selected) {
      fm.patches.push_back({id, patch_flow(flow, motion.grid, id)});
    }
  }
  return motion;
}

std::vector<double> TrainedModel::classifier_input(const FeatureVector& feature) const {
  std::vector<double> z = encode(autoencoder, feature.values);
  if (!classify_reconstruction) return z;
  return decode(autoencoder, z);
}

double TrainedModel::score_patch(std::span<const FlowVector> flow) const {
  return score(gmm, classifier_input(describe(flow, descriptor)));
}

TrainedModel train_pipeline(const MotionSet& motion, const PipelineSettings& settings,
                            TrainingReport* report) {
  std::vector<float> magnitudes;
  if (settings.delta_from_all_pixels) {
    magnitudes = motion.all_magnitudes;
  } else {
    for (const auto& fm : motion.frames)
      for (const auto& p : fm.patches)
        for (const auto& f : p.flow) magnitudes.push_back(std::hypot(f.u, f.v));
  }
  if (magnitudes.empty()) {
    throw DataError("no foreground patches selected in the training sequence");
  }

  TrainedModel model;
  model.patch_size = motion.grid.patch_size();
  model.width = motion.grid.frame_width();
  model.height = motion.grid.frame_height();
  model.classify_reconstruction = settings.classify_reconstruction;
  model.descriptor.kind = settings.kind;
  model.descriptor.hmof.bins = settings.bins;
  model.descriptor.hmof.discard_fraction = settings.discard_fraction;
  model.descriptor.hmof.delta = calibrate_delta(std::move(magnitudes), settings.discard_fraction);
  model.descriptor.mhof_threshold = settings.mhof_threshold > 0.0
                                        ? settings.mhof_threshold
                                        : model.descriptor.hmof.delta / 2.0;

  std::vector<std::vector<double>> features;
  for (const auto& fm : motion.frames)
    for (const auto& p : fm.patches) features.push_back(describe(p.flow, model.descriptor).values);

  const AutoEncoder initial = init_autoencoder(static_cast<int>(model.descriptor.dimension()),
                                               settings.latent_dim, settings.autoencoder.seed);
  TrainResult trained = train(initial, features, settings.autoencoder);
  model.autoencoder = std::move(trained.params);

  std::vector<Eigen::VectorXd> inputs;
  inputs.reserve(features.size());
  for (const auto& x : features) {
    inputs.push_back(to_eigen(model.classifier_input(FeatureVector{settings.kind, x})));
  }
  EmResult em = fit_em(inputs, settings.gmm);
  model.gmm = std::move(em.model);

  std::vector<double> scores;
  scores.reserve(inputs.size());
  for (const auto& z : inputs) scores.push_back(model.gmm.log_density(z));
  const double calibrated = calibrate_alpha(scores, settings.alpha_quantile);
  model.alpha = settings.alpha_override.value_or(calibrated);

  if (report) {
    report->delta = model.descriptor.hmof.delta;
    report->alpha = calibrated;
    report->patches = features.size();
    report->frames = motion.frames.size();
    report->autoencoder_loss = std::move(trained.loss_trace);
    report->em_log_likelihood = std::move(em.log_likelihood);
    report->training_scores = std::move(scores);
  }
  return model;
}

TrainedModel train_pipeline(const FrameSequence& sequence, const PipelineSettings& settings,
                            TrainingReport* report) {
  return train_pipeline(analyze_motion(sequence, settings, settings.delta_from_all_pixels),
                        settings, report);
}

double effective_alpha(const TrainedModel& model, const PipelineSettings& settings) {
  return settings.alpha_override.value_or(model.alpha);
}

DetectionRun detect(const MotionSet& motion, const TrainedModel& model, double alpha, int beta) {
  DetectionRun run;
  run.grid = motion.grid;
  run.frames.reserve(motion.frames.size());
  for (const auto& fm : motion.frames) {
    FrameResult r;
    r.foreground_patches = fm.patches.size();
    for (const auto& p : fm.patches) r.scores.push_back({p.patch_id, model.score_patch(p.flow)});
    r.decision = classify_frame(fm.frame, r.scores, alpha, beta);
    run.frames.push_back(std::move(r));
  }
  return run;
}

namespace {

void check_model_shape(const FrameSequence& sequence, const TrainedModel& model) {
  if (sequence.empty()) throw DataError("no frames to process");
  if (sequence.width() != model.width || sequence.height() != model.height) {
    throw DataError("test frames are " + std::to_string(sequence.width()) + "x" +
                    std::to_string(sequence.height()) + " but the model was trained on " +
                    std::to_string(model.width) + "x" + std::to_string(model.height));
  }
}

}  // namespace

DetectionRun detect(const FrameSequence& sequence, const TrainedModel& model,
                    const PipelineSettings& settings) {
  check_model_shape(sequence, model);
  const double alpha = effective_alpha(model, settings);
  DetectionRun run;
  run.grid = partition(model.width, model.height, model.patch_size);

  // Background state is sequential; everything after selection is per frame.
  ForegroundTracker tracker(settings.foreground, run.grid);
  std::vector<std::vector<std::size_t>> selections(sequence.size());
  for (std::size_t i = 0; i < sequence.size(); ++i) {
    selections[i] = tracker.step(sequence[i]).selected;
  }

  run.frames.resize(sequence.size());
  auto process = [&](std::size_t i) {
    FrameResult& r = run.frames[i];
    r.foreground_patches = selections[i].size();
    if (i > 0 && !selections[i].empty()) {
      const FlowField flow = estimate_flow(sequence[i - 1], sequence[i], settings.flow);
      for (std::size_t id : selections[i]) {
        r.scores.push_back({id, model.score_patch(patch_flow(flow, run.grid, id))});
      }
    }
    r.decision = classify_frame(i, r.scores, alpha, settings.beta);
  };

  const auto workers = static_cast<std::size_t>(std::max(1, settings.threads));
  if (workers == 1) {
    for (std::size_t i = 0; i < sequence.size(); ++i) process(i);
    return run;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = next++; i < sequence.size(); i = next++) process(i);
      } catch (...) {
        errors[w] = std::current_exception();
        next = sequence.size();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return run;
}

StageTimings benchmark(const FrameSequence& sequence, const TrainedModel& model,
                       const PipelineSettings& settings) {
  check_model_shape(sequence, model);
  const double alpha = effective_alpha(model, settings);
  const PatchGrid grid = partition(model.width, model.height, model.patch_size);
  ForegroundTracker tracker(settings.foreground, grid);

  StageTimings t;
  t.frames = sequence.size();
  t.width = sequence.width();
  t.height = sequence.height();
  for (std::size_t i = 0; i < sequence.size(); ++i) {
    const auto frame_start = Clock::now();

    auto start = Clock::now();
    const PatchSelection selection = tracker.step(sequence[i]);
    t.foreground += seconds_since(start);

    std::vector<PatchScore> scores;
    if (i > 0 && !selection.selected.empty()) {
      start = Clock::now();
      const FlowField flow = estimate_flow(sequence[i - 1], sequence[i], settings.flow);
      t.flow += seconds_since(start);

      start = Clock::now();
      std::vector<FeatureVector> features;
      features.reserve(selection.selected.size());
      for (std::size_t id : selection.selected) {
        features.push_back(describe(patch_flow(flow, grid, id), model.descriptor));
      }
      t.feature += seconds_since(start);

      start = Clock::now();
      std::vector<std::vector<double>> inputs;
      inputs.reserve(features.size());
      for (const auto& f : features) inputs.push_back(model.classifier_input(f));
      t.autoencoder += seconds_since(start);

      start = Clock::now();
      for (std::size_t k = 0; k < inputs.size(); ++k) {
        scores.push_back({selection.selected[k], score(model.gmm, inputs[k])});
      }
      classify_frame(i, scores, alpha, settings.beta);
      t.gmm += seconds_since(start);
    } else {
      start = Clock::now();
      classify_frame(i, scores, alpha, settings.beta);
      t.gmm += seconds_since(start);
    }
    t.total += seconds_since(frame_start);
  }
  const double n = static_cast<double>(sequence.size());
  t.foreground /= n;
  t.flow /= n;
  t.feature /= n;
  t.autoencoder /= n;
  t.gmm /= n;
  t.total /= n;
  return t;
}

double throughput(const FrameSequence& sequence, const TrainedModel& model,
                  PipelineSettings settings, int threads) {
  settings.threads = threads;
  const auto start = Clock::now();
  detect(sequence, model, settings);
  return static_cast<double>(sequence.size()) / seconds_since(start);
}

std::string format_timings_table(const StageTimings& t, const std::string& row_label) {
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-14s %10s %13s %8s %13s %8s %8s\n", "Time (spf)",
                "Foreground", "Optical Flow", "Feature", "Auto-Encoder", "GMM", "Total");
  out << buf;
  std::snprintf(buf, sizeof buf, "%-14s %10.4f %13.4f %8.4f %13.4f %8.4f %8.4f\n",
                row_label.c_str(), t.foreground, t.flow, t.feature, t.autoencoder, t.gmm, t.total);
  out << buf;
  return out.str();
}

std::uint64_t fingerprint(const FrameSequence& sequence) {
  std::uint64_t hash = 14695981039346656037ull;
  auto mix = [&](std::uint64_t byte) {
    hash ^= byte;
    hash *= 1099511628211ull;
  };
  auto mix_u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) mix((v >> (8 * i)) & 0xff);
  };
  mix_u32(static_cast<std::uint32_t>(sequence.size()));
  mix_u32(static_cast<std::uint32_t>(sequence.width()));
  mix_u32(static_cast<std::uint32_t>(sequence.height()));
  for (const Frame& f : sequence)
    for (float v : f.intensity()) mix(to_byte(v));
  return hash;
}

namespace {

constexpr const char* kAutoencoderFile = "autoencoder.bin";
constexpr const char* kGmmFile = "gmm.bin";
constexpr const char* kManifestFile = "manifest.txt";

}  // namespace

bool model_exists(const std::filesystem::path& model_dir) {
  namespace fs = std::filesystem;
  return fs::exists(model_dir / kAutoencoderFile) || fs::exists(model_dir / kGmmFile) ||
         fs::exists(model_dir / kManifestFile);
}

void save_model(const std::filesystem::path& model_dir, const TrainedModel& model,
                const Config& config, const TrainingReport& report, const FrameSequence& data) {
  std::filesystem::create_directories(model_dir);
  save_autoencoder(model_dir / kAutoencoderFile, model.autoencoder);
  save_gmm(model_dir / kGmmFile, model.gmm);

  std::ofstream out(model_dir / kManifestFile);
  if (!out) throw ModelError("cannot write " + (model_dir / kManifestFile).string());
  char hex[32];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(fingerprint(data)));
  out << "# training manifest\n"
      << config.dump() << "data.fingerprint = " << hex << "\n"
      << "data.frames = " << data.size() << "\n"
      << "data.width = " << model.width << "\n"
      << "data.height = " << model.height << "\n"
      << "data.training_patches = " << report.patches << "\n"
      << "model.kind = " << to_string(model.descriptor.kind) << "\n"
      << "model.bins = " << model.descriptor.hmof.bins << "\n"
      << "model.delta = " << format_double(model.descriptor.hmof.delta) << "\n"
      << "model.mhof_thresh = " << format_double(model.descriptor.mhof_threshold) << "\n"
      << "model.alpha = " << format_double(model.alpha) << "\n"
      << "model.alpha_calibrated = " << format_double(report.alpha) << "\n"
      << "model.ae_output = " << (model.classify_reconstruction ? "reconstruction" : "latent")
      << "\n"
      << "model.patch_size = " << model.patch_size << "\n"
      << "train.ae_final_loss = "
      << format_double(report.autoencoder_loss.empty() ? 0.0 : report.autoencoder_loss.back())
      << "\n"
      << "train.em_iterations = " << report.em_log_likelihood.size() << "\n"
      << "train.em_final_log_likelihood = "
      << format_double(report.em_log_likelihood.empty() ? 0.0 : report.em_log_likelihood.back())
      << "\n";
  if (!out) throw ModelError("write failed: " + (model_dir / kManifestFile).string());
}

TrainedModel load_model(const std::filesystem::path& model_dir) {
  const auto manifest_path = model_dir / kManifestFile;
  if (!std::filesystem::exists(manifest_path)) {
    throw ModelError("missing model manifest " + manifest_path.string());
  }
  std::map<std::string, std::string> kv;
  try {
    kv = read_key_values(manifest_path);
  } catch (const ConfigError& e) {
    throw ModelError(e.what());
  }
  auto need = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw ModelError(manifest_path.string() + ": missing " + key);
    return it->second;
  };
  auto num = [&](const std::string& key) {
    try {
      return std::stod(need(key));
    } catch (const std::logic_error&) {
      throw ModelError(manifest_path.string() + ": bad value for " + key);
    }
  };
  TrainedModel model;
  try {
    model.descriptor.kind = parse_feature_kind(need("model.kind"));
  } catch (const std::invalid_argument& e) {
    throw ModelError(e.what());
  }
  model.descriptor.hmof.bins = static_cast<int>(num("model.bins"));
  model.descriptor.hmof.delta = num("model.delta");
  model.descriptor.mhof_threshold = num("model.mhof_thresh");
  model.alpha = num("model.alpha");
  model.classify_reconstruction = need("model.ae_output") == "reconstruction";
  model.patch_size = static_cast<int>(num("model.patch_size"));
  model.width = static_cast<int>(num("data.width"));
  model.height = static_cast<int>(num("data.height"));
  model.autoencoder = load_autoencoder(model_dir / kAutoencoderFile);
  model.gmm = load_gmm(model_dir / kGmmFile);

  if (static_cast<std::size_t>(model.autoencoder.input_dim()) != model.descriptor.dimension()) {
    throw ModelError("autoencoder input dimension does not match the descriptor");
  }
  const int expected_gmm_dim =
      model.classify_reconstruction ? model.autoencoder.input_dim() : model.autoencoder.latent_dim();
  if (model.gmm.dim() != expected_gmm_dim) {
    throw ModelError("gmm dimension does not match the autoencoder");
  }
  return model;
}

}  // namespace hmof
