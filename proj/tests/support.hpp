#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "hmof/frame.hpp"

namespace hmof::testing {

/// Fresh scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("hmof-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline Frame constant_frame(int w, int h, float value, std::size_t index = 0) {
  return Frame(w, h, std::vector<float>(static_cast<std::size_t>(w) * h, value), index);
}

/// Smooth periodic texture sampled at (x - dx, y - dy); shifting dx moves the content right.
inline Frame texture_frame(int w, int h, double dx = 0.0, double dy = 0.0) {
  std::vector<float> px(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double sx = x - dx, sy = y - dy;
      const double v = 0.5 + 0.2 * std::sin(sx * 0.21) * std::cos(sy * 0.17) +
                       0.15 * std::sin((sx + 2.0 * sy) * 0.09);
      px[static_cast<std::size_t>(y) * w + x] = static_cast<float>(v);
    }
  }
  return Frame(w, h, std::move(px));
}

}  // namespace hmof::testing
