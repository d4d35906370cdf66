#include "hmof/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "hmof/rng.hpp"

namespace hmof {

namespace {

struct Mover {
  double x = 0.0;
  double y = 0.0;
  double vx = 0.0;
  double vy = 0.0;
  int start = 0;  // first frame the mover exists
  int end = 0;    // last frame, inclusive
  bool anomalous = false;
};

Mover draw_mover(Rng& rng, const SynthConfig& c, double speed_min, double speed_max) {
  Mover m;
  m.x = rng.uniform(0.0, c.width);
  m.y = rng.uniform(0.0, c.height);
  const double speed = rng.uniform(speed_min, speed_max);
  double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
  if (c.directions == MotionDirections::horizontal) {
    angle = angle < std::numbers::pi ? 0.0 : std::numbers::pi;
  }
  m.vx = speed * std::cos(angle);
  m.vy = speed * std::sin(angle);
  return m;
}

double wrap(double value, double period) {
  double r = std::fmod(value, period);
  return r < 0.0 ? r + period : r;
}

double smoothstep(double d, double ramp) {
  if (d <= 0.0) return 0.0;
  if (ramp <= 0.0 || d >= ramp) return 1.0;
  const double t = d / ramp;
  return t * t * (3.0 - 2.0 * t);
}

// Offset of a pixel center from the square's left/top edge on a torus, and the
// square's soft-edge profile there.
struct AxisCoverage {
  bool inside = false;
  double profile = 0.0;
};

AxisCoverage axis(double center, double origin, double period, int size, double ramp) {
  const double offset = wrap(center - origin, period);
  if (offset >= size) return {};
  return {true, smoothstep(std::min(offset, size - offset), ramp)};
}

}  // namespace

void SynthConfig::validate() const {
  if (width < 1 || height < 1 || frames < 1) {
    throw std::invalid_argument("synth: dimensions and frame count must be positive");
  }
  if (object_size < 1 || object_size > std::min(width, height)) {
    throw std::invalid_argument("synth: object size must fit inside the frame");
  }
  if (normal_count < 0 || anomaly_count < 0) {
    throw std::invalid_argument("synth: mover counts must be non-negative");
  }
  if (!(normal_speed_min >= 0.0 && normal_speed_min <= normal_speed_max)) {
    throw std::invalid_argument("synth: invalid normal speed range");
  }
  if (anomaly_count > 0) {
    if (!(anomaly_speed_min <= anomaly_speed_max) || !(anomaly_speed_min > normal_speed_max)) {
      throw std::invalid_argument("synth: anomaly speeds must lie strictly above normal speeds");
    }
    if (window_start < 0 || window_end < window_start || window_end >= frames) {
      throw std::invalid_argument("synth: anomaly window must be non-empty and inside the sequence");
    }
  }
  if (!(object_level > background_level) || background_level < 0.0 || object_level > 1.0) {
    throw std::invalid_argument("synth: need 0 <= background level < object level <= 1");
  }
}

SynthSequence generate(const SynthConfig& config) {
  config.validate();
  Rng rng(config.seed);
  std::vector<Mover> movers;
  for (int i = 0; i < config.normal_count; ++i) {
    Mover m = draw_mover(rng, config, config.normal_speed_min, config.normal_speed_max);
    m.start = 0;
    m.end = config.frames - 1;
    movers.push_back(m);
  }
  for (int i = 0; i < config.anomaly_count; ++i) {
    Mover m = draw_mover(rng, config, config.anomaly_speed_min, config.anomaly_speed_max);
    m.start = config.window_start;
    m.end = config.window_end;
    m.anomalous = true;
    movers.push_back(m);
  }

  SynthSequence out;
  std::vector<BinaryMask> masks;
  const std::size_t n = static_cast<std::size_t>(config.width) * config.height;
  std::vector<double> coverage(n);
  for (int t = 0; t < config.frames; ++t) {
    std::fill(coverage.begin(), coverage.end(), 0.0);
    BinaryMask mask(config.width, config.height);
    for (const Mover& m : movers) {
      if (t < m.start || t > m.end) continue;
      const double elapsed = t - m.start;
      const double x0 = wrap(m.x + m.vx * elapsed, config.width);
      const double y0 = wrap(m.y + m.vy * elapsed, config.height);
      std::vector<AxisCoverage> cols(config.width);
      for (int x = 0; x < config.width; ++x) {
        cols[x] = axis(x + 0.5, x0, config.width, config.object_size, config.edge_ramp);
      }
      for (int y = 0; y < config.height; ++y) {
        const AxisCoverage row = axis(y + 0.5, y0, config.height, config.object_size,
                                      config.edge_ramp);
        if (!row.inside) continue;
        for (int x = 0; x < config.width; ++x) {
          if (!cols[x].inside) continue;
          double& c = coverage[static_cast<std::size_t>(y) * config.width + x];
          c = std::max(c, row.profile * cols[x].profile);
          if (m.anomalous) mask.set(x, y);
        }
      }
    }
    std::vector<float> intensity(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double level =
          config.background_level + (config.object_level - config.background_level) * coverage[i];
      // Quantized to 8-bit levels so frames survive a PGM round trip unchanged.
      intensity[i] = static_cast<float>(std::lround(level * 255.0)) / 255.0f;
    }
    out.frames.push_back(Frame(config.width, config.height, std::move(intensity)));
    out.truth.labels.push_back(mask.empty() ? Label::normal : Label::abnormal);
    masks.push_back(std::move(mask));
  }
  out.truth.masks = std::move(masks);
  return out;
}

void write_synth(const std::filesystem::path& directory, const SynthSequence& sequence) {
  namespace fs = std::filesystem;
  fs::create_directories(directory / "frames");
  for (std::size_t i = 0; i < sequence.frames.size(); ++i) {
    write_pgm(directory / "frames" / mask_filename(i), sequence.frames[i]);
  }
  save_ground_truth(directory / "gt.csv", directory / "masks", sequence.truth);
}

}  // namespace hmof
