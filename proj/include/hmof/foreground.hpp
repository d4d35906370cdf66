#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "hmof/frame.hpp"

namespace hmof {

/// Running-average background B; the B term of the matting model I = aF + (1 - a)B.
class BackgroundModel {
 public:
  /// Initializes B from the first frame of a sequence.
  BackgroundModel(const Frame& first, double learning_rate);

  int width() const { return width_; }
  int height() const { return height_; }
  double learning_rate() const { return learning_rate_; }
  std::span<const float> background() const { return background_; }

  /// B' = (1 - rate) B + rate I, in place.
  void update(const Frame& frame);

 private:
  int width_;
  int height_;
  double learning_rate_;
  std::vector<float> background_;
};

BackgroundModel update_background(const BackgroundModel& model, const Frame& frame);

/// Per-pixel foreground weight a in [0,1].
struct AlphaMap {
  int width = 0;
  int height = 0;
  std::vector<float> a;
};

/// a(p) = min(1, |I(p) - B(p)| / sensitivity).
AlphaMap estimate_alpha(const BackgroundModel& model, const Frame& frame, double sensitivity);

/// Sum over the patch of a(p) * I(p): intensity of the extracted foreground.
double patch_foreground_value(const AlphaMap& alpha, const Frame& frame, const PatchGrid& grid,
                              std::size_t patch_id);

/// patch_foreground_value for every patch of the grid, indexed by patch id.
std::vector<double> patch_foreground_values(const AlphaMap& alpha, const Frame& frame,
                                            const PatchGrid& grid);

struct PatchSelection {
  std::size_t frame_index = 0;
  std::vector<std::size_t> selected;  // ascending patch ids
  std::vector<double> values;         // one per grid patch
};

/// Selects every patch whose foreground value strictly exceeds tau.
PatchSelection select_patches(std::span<const double> values, double tau,
                              std::size_t frame_index = 0);

/// Writes the alpha map as an 8-bit PGM (a = 1 maps to 255).
void write_alpha_pgm(const std::filesystem::path& path, const AlphaMap& alpha);

}  // namespace hmof
