#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hmof/frame.hpp"
#include "hmof/gmm.hpp"

namespace hmof {

enum class Label { normal, abnormal };

struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;  // 0 or 1, row-major

  BinaryMask() = default;
  BinaryMask(int w, int h) : width(w), height(h), bits(static_cast<std::size_t>(w) * h, 0) {}

  std::size_t count() const;
  bool empty() const { return count() == 0; }
  void set(int x, int y) { bits[static_cast<std::size_t>(y) * width + x] = 1; }
  bool test(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
  bool operator==(const BinaryMask&) const = default;
};

/// Per-frame labels plus optional per-frame anomaly masks.
struct GroundTruth {
  std::vector<Label> labels;
  std::optional<std::vector<BinaryMask>> masks;

  std::size_t size() const { return labels.size(); }
  /// Throws DataError if a non-empty mask sits on a normal frame or mask sizes disagree.
  void validate() const;
};

// GT file: one "frame_index,label" line per frame (label normal|abnormal or 0|1).
// Masks, when present, are <mask_dir>/NNNNNN.pgm with nonzero = anomalous.
GroundTruth load_ground_truth(const std::filesystem::path& gt_file,
                              const std::optional<std::filesystem::path>& mask_dir);
void save_ground_truth(const std::filesystem::path& gt_file,
                       const std::optional<std::filesystem::path>& mask_dir,
                       const GroundTruth& gt);

BinaryMask read_mask(const std::filesystem::path& path);
void write_mask(const std::filesystem::path& path, const BinaryMask& mask);

std::string mask_filename(std::size_t frame);

struct RocPoint {
  double threshold = 0.0;  // frames with score <= threshold are flagged
  double tpr = 0.0;
  double fpr = 0.0;
};

/// Ordered from (0,0) to (1,1); TPR and FPR are non-decreasing along the curve.
struct RocCurve {
  std::vector<RocPoint> points;
};

/// Sweeps every distinct score; lower scores are more anomalous.
RocCurve roc(std::span<const double> scores, std::span<const Label> labels);

/// Trapezoidal area under the curve.
double auc(const RocCurve& curve);

/// Rate where FPR equals the miss rate 1 - TPR, interpolated linearly between sweep points.
double eer(const RocCurve& curve);

enum class PixelVerdict { true_positive, miss, false_alarm, true_negative };

std::string to_string(PixelVerdict verdict);

/// A frame with ground-truth anomaly counts as detected when the detection covers
/// at least 40% of its anomalous pixels.
PixelVerdict pixel_level_verdict(const BinaryMask& detected, const BinaryMask& truth);

/// Covered-pixel threshold form of the 40% rule: coverage * 5 >= truth * 2.
bool covers_enough(std::size_t covered, std::size_t truth_pixels);

/// Patch scores of one frame with enough geometry to rebuild detection masks.
struct FramePatchScores {
  std::size_t frame = 0;
  std::vector<PatchScore> patches;
};

/// Union of the given patches.
BinaryMask patch_mask(const PatchGrid& grid, std::span<const std::size_t> patch_ids);

/// Detection mask at a fixed alpha: abnormal patches of frames that reach beta, else empty.
BinaryMask detection_mask(const PatchGrid& grid, const FramePatchScores& frame, double alpha,
                          int beta);

/// Pixel-level ROC: alpha swept over every distinct patch score, each frame judged
/// by pixel_level_verdict on its detection mask. TPR is over frames with non-empty
/// masks, FPR over frames with empty masks.
RocCurve pixel_roc(std::span<const FramePatchScores> frames, std::span<const BinaryMask> truth,
                   const PatchGrid& grid, int beta);

}  // namespace hmof
