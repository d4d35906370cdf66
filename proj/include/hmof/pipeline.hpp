#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hmof/autoencoder.hpp"
#include "hmof/config.hpp"
#include "hmof/descriptors.hpp"
#include "hmof/evaluation.hpp"
#include "hmof/flow.hpp"
#include "hmof/foreground.hpp"
#include "hmof/frame.hpp"
#include "hmof/gmm.hpp"

namespace hmof {

struct ForegroundSettings {
  double learning_rate = 0.05;
  double sensitivity = 0.1;
  double tau = -1.0;  // negative: 0.05 * patch_size^2
  int warmup_frames = 30;

  double effective_tau(int patch_size) const {
    return tau >= 0.0 ? tau : 0.05 * patch_size * patch_size;
  }
};

struct PipelineSettings {
  int patch_size = 20;
  FlowSettings flow;
  ForegroundSettings foreground;

  FeatureKind kind = FeatureKind::hmof;
  int bins = 8;
  double discard_fraction = 0.05;
  double mhof_threshold = 0.0;  // non-positive: delta / 2
  bool delta_from_all_pixels = false;

  int latent_dim = 4;
  TrainSettings autoencoder;
  bool classify_reconstruction = false;

  EmSettings gmm;
  double alpha_quantile = 0.01;
  std::optional<double> alpha_override;
  int beta = 3;

  int threads = 1;

  static PipelineSettings from_config(const Config& config);
};

/// Stateful foreground stage: background model plus patch selection, in frame order.
class ForegroundTracker {
 public:
  ForegroundTracker(const ForegroundSettings& settings, const PatchGrid& grid);

  /// Scores and selects patches of `frame` against the current background, then folds the
  /// frame into the background. Nothing is selected during warm-up.
  PatchSelection step(const Frame& frame);

  const AlphaMap& last_alpha() const { return alpha_; }

 private:
  ForegroundSettings settings_;
  PatchGrid grid_;
  std::optional<BackgroundModel> background_;
  AlphaMap alpha_;
  std::size_t seen_ = 0;
};

struct PatchMotion {
  std::size_t patch_id = 0;
  std::vector<FlowVector> flow;
};

/// Selected patches of one frame with the flow from the previous frame.
struct FrameMotion {
  std::size_t frame = 0;
  std::vector<PatchMotion> patches;
};

struct MotionSet {
  PatchGrid grid;
  std::vector<FrameMotion> frames;  // one per input frame
  std::vector<float> all_magnitudes;  // filled only when requested
};

/// Foreground selection (sequential) followed by flow on frames with selected patches.
MotionSet analyze_motion(const FrameSequence& sequence, const PipelineSettings& settings,
                         bool keep_all_magnitudes = false);

/// All learned state needed to score a test sequence.
struct TrainedModel {
  DescriptorSettings descriptor;
  AutoEncoder autoencoder;
  GmmModel gmm;
  double alpha = 0.0;
  bool classify_reconstruction = false;
  int patch_size = 20;
  int width = 0;
  int height = 0;

  std::vector<double> classifier_input(const FeatureVector& feature) const;
  double score_patch(std::span<const FlowVector> flow) const;
};

struct TrainingReport {
  double delta = 0.0;
  double alpha = 0.0;
  std::size_t patches = 0;
  std::size_t frames = 0;
  std::vector<double> autoencoder_loss;
  std::vector<double> em_log_likelihood;
  std::vector<double> training_scores;
};

TrainedModel train_pipeline(const MotionSet& motion, const PipelineSettings& settings,
                            TrainingReport* report = nullptr);
TrainedModel train_pipeline(const FrameSequence& sequence, const PipelineSettings& settings,
                            TrainingReport* report = nullptr);

struct FrameResult {
  FrameDecision decision;
  std::size_t foreground_patches = 0;
  std::vector<PatchScore> scores;
};

struct DetectionRun {
  PatchGrid grid;
  std::vector<FrameResult> frames;
};

/// Scores precomputed motion with the model's alpha (or `alpha`) and the given beta.
DetectionRun detect(const MotionSet& motion, const TrainedModel& model, double alpha, int beta);

/// Full detection over a sequence; frames after foreground selection are processed by
/// `settings.threads` workers, results ordered by frame.
DetectionRun detect(const FrameSequence& sequence, const TrainedModel& model,
                    const PipelineSettings& settings);

/// Alpha in effect for a detection run: the explicit override, else the calibrated value.
double effective_alpha(const TrainedModel& model, const PipelineSettings& settings);

struct StageTimings {
  double foreground = 0.0;
  double flow = 0.0;
  double feature = 0.0;
  double autoencoder = 0.0;
  double gmm = 0.0;
  double total = 0.0;
  std::size_t frames = 0;
  int width = 0;
  int height = 0;
};

/// Single-threaded per-stage wall-clock means in seconds per frame.
StageTimings benchmark(const FrameSequence& sequence, const TrainedModel& model,
                       const PipelineSettings& settings);

/// Frames per second of `detect` with `threads` workers.
double throughput(const FrameSequence& sequence, const TrainedModel& model,
                  PipelineSettings settings, int threads);

std::string format_timings_table(const StageTimings& timings, const std::string& row_label);

// Model directory layout: autoencoder.bin, gmm.bin, manifest.txt.
void save_model(const std::filesystem::path& model_dir, const TrainedModel& model,
                const Config& config, const TrainingReport& report, const FrameSequence& data);
TrainedModel load_model(const std::filesystem::path& model_dir);
bool model_exists(const std::filesystem::path& model_dir);

/// FNV-1a over dimensions and 8-bit pixel levels.
std::uint64_t fingerprint(const FrameSequence& sequence);

}  // namespace hmof
