#include "hmof/foreground.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "hmof/error.hpp"

namespace hmof {

namespace {

void check_shape(int width, int height, const Frame& frame, const char* what) {
  if (frame.width() != width || frame.height() != height) {
    throw DataError(std::string(what) + ": frame " + std::to_string(frame.index()) + " is " +
                    std::to_string(frame.width()) + "x" + std::to_string(frame.height()) +
                    ", model is " + std::to_string(width) + "x" + std::to_string(height));
  }
}

}  // namespace

BackgroundModel::BackgroundModel(const Frame& first, double learning_rate)
    : width_(first.width()), height_(first.height()), learning_rate_(learning_rate),
      background_(first.intensity().begin(), first.intensity().end()) {
  if (!(learning_rate > 0.0 && learning_rate <= 1.0)) {
    throw std::invalid_argument("background learning rate must be in (0, 1]");
  }
}

void BackgroundModel::update(const Frame& frame) {
  check_shape(width_, height_, frame, "background update");
  // B + rate (I - B): exact at the fixed point I = B and for rate 1.
  const auto intensity = frame.intensity();
  for (std::size_t i = 0; i < background_.size(); ++i) {
    const double b = background_[i];
    const double next = b + learning_rate_ * (static_cast<double>(intensity[i]) - b);
    background_[i] = std::clamp(static_cast<float>(next), 0.0f, 1.0f);
  }
}

BackgroundModel update_background(const BackgroundModel& model, const Frame& frame) {
  BackgroundModel next = model;
  next.update(frame);
  return next;
}

AlphaMap estimate_alpha(const BackgroundModel& model, const Frame& frame, double sensitivity) {
  if (!(sensitivity > 0.0)) throw std::invalid_argument("alpha sensitivity must be > 0");
  check_shape(model.width(), model.height(), frame, "alpha");
  AlphaMap alpha{frame.width(), frame.height(), std::vector<float>(frame.pixel_count())};
  const auto inv = static_cast<float>(1.0 / sensitivity);
  const auto bg = model.background();
  const auto intensity = frame.intensity();
  for (std::size_t i = 0; i < alpha.a.size(); ++i) {
    alpha.a[i] = std::min(1.0f, std::fabs(intensity[i] - bg[i]) * inv);
  }
  return alpha;
}

double patch_foreground_value(const AlphaMap& alpha, const Frame& frame, const PatchGrid& grid,
                              std::size_t patch_id) {
  const PixelCoord o = grid.origin(patch_id);
  const int s = grid.patch_size();
  double sum = 0.0;
  for (int y = o.y; y < o.y + s; ++y) {
    const std::size_t row = static_cast<std::size_t>(y) * frame.width();
    for (int x = o.x; x < o.x + s; ++x) {
      sum += static_cast<double>(alpha.a[row + x]) * frame.intensity()[row + x];
    }
  }
  return sum;
}

std::vector<double> patch_foreground_values(const AlphaMap& alpha, const Frame& frame,
                                            const PatchGrid& grid) {
  if (alpha.width != frame.width() || alpha.height != frame.height() ||
      grid.frame_width() != frame.width() || grid.frame_height() != frame.height()) {
    throw DataError("foreground values: alpha map, frame and grid dimensions differ");
  }
  std::vector<double> values(grid.patch_count());
  for (std::size_t id = 0; id < values.size(); ++id) {
    values[id] = patch_foreground_value(alpha, frame, grid, id);
  }
  return values;
}

PatchSelection select_patches(std::span<const double> values, double tau,
                              std::size_t frame_index) {
  PatchSelection selection;
  selection.frame_index = frame_index;
  selection.values.assign(values.begin(), values.end());
  for (std::size_t id = 0; id < values.size(); ++id) {
    if (values[id] > tau) selection.selected.push_back(id);
  }
  return selection;
}

void write_alpha_pgm(const std::filesystem::path& path, const AlphaMap& alpha) {
  std::vector<unsigned char> bytes(alpha.a.size());
  std::transform(alpha.a.begin(), alpha.a.end(), bytes.begin(), to_byte);
  write_pgm_bytes(path, alpha.width, alpha.height, bytes);
}

}  // namespace hmof
