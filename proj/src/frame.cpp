#include "hmof/frame.hpp"

#include <fnmatch.h>
#include <png.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "hmof/error.hpp"

namespace hmof {

Frame::Frame(int width, int height, std::vector<float> intensity, std::size_t index)
    : width_(width), height_(height), intensity_(std::move(intensity)), index_(index) {
  if (width <= 0 || height <= 0) {
    throw std::invalid_argument("frame dimensions must be positive");
  }
  if (intensity_.size() != static_cast<std::size_t>(width) * height) {
    throw std::invalid_argument("frame intensity size does not match width x height");
  }
  for (float v : intensity_) {
    if (!(v >= 0.0f && v <= 1.0f)) {
      throw std::invalid_argument("frame intensity outside [0,1]");
    }
  }
}

void FrameSequence::push_back(Frame frame) {
  if (!frames_.empty() && !frames_.front().same_shape(frame)) {
    std::ostringstream msg;
    msg << "frame " << frames_.size() << " is " << frame.width() << "x" << frame.height()
        << ", expected " << width() << "x" << height();
    throw DataError(msg.str());
  }
  frame.index_ = frames_.size();
  frames_.push_back(std::move(frame));
}

PatchGrid::PatchGrid(int width, int height, int patch_size)
    : width_(width), height_(height), patch_size_(patch_size) {
  if (width <= 0 || height <= 0) {
    throw std::invalid_argument("grid frame dimensions must be positive");
  }
  if (patch_size < 1 || patch_size > std::min(width, height)) {
    throw std::invalid_argument("patch size must be in [1, min(width, height)]");
  }
  rows_ = height / patch_size;
  cols_ = width / patch_size;
}

PixelCoord PatchGrid::origin(std::size_t patch_id) const {
  if (patch_id >= patch_count()) {
    throw std::out_of_range("patch id " + std::to_string(patch_id) + " outside grid");
  }
  const auto row = static_cast<int>(patch_id / cols_);
  const auto col = static_cast<int>(patch_id % cols_);
  return {col * patch_size_, row * patch_size_};
}

std::size_t PatchGrid::patch_of(int x, int y) const {
  const int col = x / patch_size_;
  const int row = y / patch_size_;
  if (x < 0 || y < 0 || col >= cols_ || row >= rows_) return patch_count();
  return id_at(row, col);
}

PatchGrid partition(int width, int height, int patch_size) {
  return PatchGrid(width, height, patch_size);
}

unsigned char to_byte(float intensity) {
  const float clamped = std::clamp(intensity, 0.0f, 1.0f);
  return static_cast<unsigned char>(std::lround(clamped * 255.0f));
}

namespace {

// Whitespace and '#' comments between PGM header tokens.
void skip_pgm_separators(std::istream& in) {
  while (in) {
    const int c = in.peek();
    if (c == '#') {
      std::string ignored;
      std::getline(in, ignored);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
}

Frame read_pgm(const std::filesystem::path& path, std::size_t index) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::string magic;
  in >> magic;
  if (magic != "P5") throw DataError(path.string() + ": not a binary PGM (P5)");
  int width = 0, height = 0, maxval = 0;
  skip_pgm_separators(in);
  in >> width;
  skip_pgm_separators(in);
  in >> height;
  skip_pgm_separators(in);
  in >> maxval;
  if (!in || width <= 0 || height <= 0 || maxval <= 0 || maxval > 65535) {
    throw DataError(path.string() + ": malformed PGM header");
  }
  in.get();  // single whitespace before raster
  const std::size_t n = static_cast<std::size_t>(width) * height;
  const std::size_t bytes_per_sample = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> raw(n * bytes_per_sample);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
    throw DataError(path.string() + ": truncated PGM raster");
  }
  std::vector<float> intensity(n);
  const float scale = 1.0f / static_cast<float>(maxval);
  for (std::size_t i = 0; i < n; ++i) {
    unsigned sample = bytes_per_sample == 2 ? (raw[2 * i] << 8) | raw[2 * i + 1] : raw[i];
    sample = std::min<unsigned>(sample, static_cast<unsigned>(maxval));
    intensity[i] = maxval == 255 ? static_cast<float>(sample) / 255.0f
                                 : static_cast<float>(sample) * scale;
  }
  return Frame(width, height, std::move(intensity), index);
}

Frame read_png(const std::filesystem::path& path, std::size_t index) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw DataError(path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_GRAY;  // libpng converts color input to luma
  std::vector<unsigned char> bytes(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, bytes.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw DataError(path.string() + ": " + msg);
  }
  const int width = static_cast<int>(image.width);
  const int height = static_cast<int>(image.height);
  std::vector<float> intensity(bytes.size());
  std::transform(bytes.begin(), bytes.end(), intensity.begin(),
                 [](unsigned char b) { return static_cast<float>(b) / 255.0f; });
  return Frame(width, height, std::move(intensity), index);
}

std::string lowercase_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

}  // namespace

Frame read_image(const std::filesystem::path& path, std::size_t index) {
  const std::string ext = lowercase_extension(path);
  if (ext == ".png") return read_png(path, index);
  return read_pgm(path, index);
}

void write_pgm_bytes(const std::filesystem::path& path, int width, int height,
                     std::span<const unsigned char> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "P5\n" << width << " " << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

void write_pgm(const std::filesystem::path& path, const Frame& frame) {
  std::vector<unsigned char> bytes(frame.pixel_count());
  std::transform(frame.intensity().begin(), frame.intensity().end(), bytes.begin(), to_byte);
  write_pgm_bytes(path, frame.width(), frame.height(), bytes);
}

FrameSequence load_sequence(const std::filesystem::path& directory, const std::string& pattern) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(directory)) {
    throw DataError("not a directory: " + directory.string());
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(directory)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (fnmatch(pattern.c_str(), name.c_str(), 0) == 0) files.push_back(entry.path());
  }
  if (files.empty()) {
    throw DataError("no frames matched '" + pattern + "' in " + directory.string());
  }
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });

  FrameSequence sequence;
  for (const auto& file : files) {
    Frame frame;
    try {
      frame = read_image(file, sequence.size());
    } catch (const std::invalid_argument& e) {
      throw DataError(file.filename().string() + ": " + e.what());
    }
    if (!sequence.empty() && !sequence.front().same_shape(frame)) {
      std::ostringstream msg;
      msg << "dimension mismatch: " << file.filename().string() << " is " << frame.width() << "x"
          << frame.height() << ", expected " << sequence.width() << "x" << sequence.height();
      throw DataError(msg.str());
    }
    sequence.push_back(std::move(frame));
  }
  return sequence;
}

}  // namespace hmof
