#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "hmof/evaluation.hpp"
#include "hmof/frame.hpp"

namespace hmof {

enum class MotionDirections { any, horizontal };

/// Bright soft-edged squares drifting over a dark background with wraparound.
/// Anomaly movers are faster than every normal mover and exist only inside the window.
struct SynthConfig {
  int width = 320;
  int height = 240;
  int frames = 400;
  std::uint64_t seed = 7;
  int normal_count = 6;
  double normal_speed_min = 0.5;
  double normal_speed_max = 1.5;
  int anomaly_count = 2;
  double anomaly_speed_min = 4.0;
  double anomaly_speed_max = 6.0;
  int window_start = 250;  // inclusive
  int window_end = 350;    // inclusive
  int object_size = 16;
  double edge_ramp = 4.0;  // px over which a square's edge fades in
  double background_level = 0.1;
  double object_level = 0.9;
  MotionDirections directions = MotionDirections::any;

  void validate() const;
};

struct SynthSequence {
  FrameSequence frames;
  GroundTruth truth;
};

SynthSequence generate(const SynthConfig& config);

/// Writes frames/NNNNNN.pgm, gt.csv and masks/NNNNNN.pgm under `directory`.
void write_synth(const std::filesystem::path& directory, const SynthSequence& sequence);

}  // namespace hmof
