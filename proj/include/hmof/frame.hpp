#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace hmof {

/// Grayscale frame with intensities normalized to [0,1], stored row-major.
class Frame {
 public:
  Frame() = default;
  Frame(int width, int height, std::vector<float> intensity, std::size_t index = 0);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t index() const { return index_; }
  std::size_t pixel_count() const { return intensity_.size(); }

  float at(int x, int y) const { return intensity_[static_cast<std::size_t>(y) * width_ + x]; }
  std::span<const float> intensity() const { return intensity_; }

  bool same_shape(const Frame& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }

 private:
  friend class FrameSequence;

  int width_ = 0;
  int height_ = 0;
  std::vector<float> intensity_;
  std::size_t index_ = 0;
};

/// Ordered frames of identical size. Indices are reassigned to 0..N-1 on insertion.
class FrameSequence {
 public:
  explicit FrameSequence(double fps = 10.0) : fps_(fps) {}

  void push_back(Frame frame);

  std::size_t size() const { return frames_.size(); }
  bool empty() const { return frames_.empty(); }
  const Frame& operator[](std::size_t i) const { return frames_[i]; }
  const Frame& front() const { return frames_.front(); }
  auto begin() const { return frames_.begin(); }
  auto end() const { return frames_.end(); }

  int width() const { return frames_.empty() ? 0 : frames_.front().width(); }
  int height() const { return frames_.empty() ? 0 : frames_.front().height(); }
  double fps() const { return fps_; }

 private:
  std::vector<Frame> frames_;
  double fps_;
};

struct PixelCoord {
  int x = 0;
  int y = 0;
  bool operator==(const PixelCoord&) const = default;
};

/// Fixed tiling of a frame into equal, non-overlapping square patches.
/// Pixels in the right/bottom remainder strips belong to no patch.
class PatchGrid {
 public:
  PatchGrid() = default;
  PatchGrid(int width, int height, int patch_size);

  int patch_size() const { return patch_size_; }
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int frame_width() const { return width_; }
  int frame_height() const { return height_; }
  std::size_t patch_count() const { return static_cast<std::size_t>(rows_) * cols_; }
  std::size_t pixels_per_patch() const {
    return static_cast<std::size_t>(patch_size_) * patch_size_;
  }

  /// Top-left pixel of a patch; ids run row-major over the grid.
  PixelCoord origin(std::size_t patch_id) const;
  std::size_t id_at(int row, int col) const { return static_cast<std::size_t>(row) * cols_ + col; }

  /// Patch containing pixel (x,y), or patch_count() for remainder pixels.
  std::size_t patch_of(int x, int y) const;

 private:
  int width_ = 0;
  int height_ = 0;
  int patch_size_ = 0;
  int rows_ = 0;
  int cols_ = 0;
};

PatchGrid partition(int width, int height, int patch_size);

/// Copies the pixels of one patch, row-major within the patch.
template <typename T>
std::vector<T> slice_patch(std::span<const T> grid_values, int frame_width, const PatchGrid& grid,
                           std::size_t patch_id) {
  const PixelCoord o = grid.origin(patch_id);
  const int s = grid.patch_size();
  std::vector<T> out;
  out.reserve(grid.pixels_per_patch());
  for (int y = o.y; y < o.y + s; ++y) {
    const T* row = grid_values.data() + static_cast<std::size_t>(y) * frame_width;
    out.insert(out.end(), row + o.x, row + o.x + s);
  }
  return out;
}

// Image I/O. PGM (binary P5, 8- or 16-bit) and PNG are decoded to grayscale.
Frame read_image(const std::filesystem::path& path, std::size_t index = 0);
void write_pgm(const std::filesystem::path& path, const Frame& frame);
void write_pgm_bytes(const std::filesystem::path& path, int width, int height,
                     std::span<const unsigned char> bytes);

/// Loads all files in `directory` whose name matches the shell glob `pattern`,
/// ordered lexicographically by filename.
FrameSequence load_sequence(const std::filesystem::path& directory, const std::string& pattern);

/// Quantizes an intensity in [0,1] to the 8-bit level used by write_pgm.
unsigned char to_byte(float intensity);

}  // namespace hmof
