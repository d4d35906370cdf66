#pragma once

#include <filesystem>
#include <vector>

#include "hmof/frame.hpp"

namespace hmof {

struct FlowSettings {
  int iterations = 100;
  // Smoothness weight alpha, expressed on the 8-bit intensity scale; the
  // energy uses (alpha / 255)^2 against [0,1] intensity derivatives.
  double smoothness = 15.0;
};

struct FlowVector {
  float u = 0.0f;
  float v = 0.0f;
};

/// Dense displacement field in pixels per frame, row-major.
struct FlowField {
  int width = 0;
  int height = 0;
  std::vector<float> u;
  std::vector<float> v;

  FlowVector at(std::size_t i) const { return {u[i], v[i]}; }
};

struct MagnitudeMap {
  int width = 0;
  int height = 0;
  std::vector<float> m;
};

/// Horn-Schunck global-smoothness flow from `prev` to `next`.
FlowField estimate_flow(const Frame& prev, const Frame& next, const FlowSettings& settings);

MagnitudeMap magnitude(const FlowField& flow);

/// Flow vectors of one patch, row-major within the patch.
std::vector<FlowVector> patch_flow(const FlowField& flow, const PatchGrid& grid,
                                   std::size_t patch_id);

// Binary dump: u32 width, u32 height, then u and v grids as f32, all little-endian.
void write_flow(const std::filesystem::path& path, const FlowField& flow);
FlowField read_flow(const std::filesystem::path& path);

}  // namespace hmof
