#include "hmof/flow.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "hmof/binary_io.hpp"
#include "hmof/error.hpp"

namespace hmof {

namespace {

// Grid with a one-pixel replicate border so the stencil loop has no branches.
class PaddedGrid {
 public:
  PaddedGrid(int width, int height)
      : width_(width), height_(height), stride_(width + 2),
        data_(static_cast<std::size_t>(width + 2) * (height + 2), 0.0f) {}

  float* row(int y) { return data_.data() + static_cast<std::size_t>(y + 1) * stride_ + 1; }
  const float* row(int y) const {
    return data_.data() + static_cast<std::size_t>(y + 1) * stride_ + 1;
  }
  int stride() const { return stride_; }

  void refresh_border() {
    for (int y = 0; y < height_; ++y) {
      float* r = row(y);
      r[-1] = r[0];
      r[width_] = r[width_ - 1];
    }
    std::copy(row(0) - 1, row(0) + width_ + 1, row(-1) - 1);
    std::copy(row(height_ - 1) - 1, row(height_ - 1) + width_ + 1, row(height_) - 1);
  }

 private:
  int width_;
  int height_;
  int stride_;
  std::vector<float> data_;
};

// Central difference with replicate padding.
void gradients(const Frame& frame, std::vector<float>& gx, std::vector<float>& gy) {
  const int w = frame.width();
  const int h = frame.height();
  gx.assign(frame.pixel_count(), 0.0f);
  gy.assign(frame.pixel_count(), 0.0f);
  for (int y = 0; y < h; ++y) {
    const int ym = y > 0 ? y - 1 : 0;
    const int yp = y < h - 1 ? y + 1 : h - 1;
    for (int x = 0; x < w; ++x) {
      const int xm = x > 0 ? x - 1 : 0;
      const int xp = x < w - 1 ? x + 1 : w - 1;
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      gx[i] = 0.5f * (frame.at(xp, y) - frame.at(xm, y));
      gy[i] = 0.5f * (frame.at(x, yp) - frame.at(x, ym));
    }
  }
}

void smooth_step(const PaddedGrid& u, const PaddedGrid& v, PaddedGrid& u_out, PaddedGrid& v_out,
                 const std::vector<float>& ix, const std::vector<float>& iy,
                 const std::vector<float>& it, const std::vector<float>& inv_denom, int w, int h) {
  const int s = u.stride();
  constexpr float kEdge = 1.0f / 6.0f;
  constexpr float kCorner = 1.0f / 12.0f;
  for (int y = 0; y < h; ++y) {
    const float* ur = u.row(y);
    const float* vr = v.row(y);
    float* uo = u_out.row(y);
    float* vo = v_out.row(y);
    const std::size_t base = static_cast<std::size_t>(y) * w;
    const float* gx = ix.data() + base;
    const float* gy = iy.data() + base;
    const float* gt = it.data() + base;
    const float* inv = inv_denom.data() + base;
    for (int x = 0; x < w; ++x) {
      const float ubar = kEdge * (ur[x - 1] + ur[x + 1] + ur[x - s] + ur[x + s]) +
                         kCorner * (ur[x - s - 1] + ur[x - s + 1] + ur[x + s - 1] + ur[x + s + 1]);
      const float vbar = kEdge * (vr[x - 1] + vr[x + 1] + vr[x - s] + vr[x + s]) +
                         kCorner * (vr[x - s - 1] + vr[x - s + 1] + vr[x + s - 1] + vr[x + s + 1]);
      const float t = (gx[x] * ubar + gy[x] * vbar + gt[x]) * inv[x];
      uo[x] = ubar - gx[x] * t;
      vo[x] = vbar - gy[x] * t;
    }
  }
}

}  // namespace

FlowField estimate_flow(const Frame& prev, const Frame& next, const FlowSettings& settings) {
  if (!prev.same_shape(next)) {
    throw DataError("flow: frame dimensions differ (" + std::to_string(prev.width()) + "x" +
                    std::to_string(prev.height()) + " vs " + std::to_string(next.width()) + "x" +
                    std::to_string(next.height()) + ")");
  }
  if (!(settings.smoothness > 0.0) || settings.iterations < 1) {
    throw std::invalid_argument("flow: smoothness must be > 0 and iterations >= 1");
  }
  const int w = prev.width();
  const int h = prev.height();
  const std::size_t n = prev.pixel_count();

  std::vector<float> gx0, gy0, gx1, gy1;
  gradients(prev, gx0, gy0);
  gradients(next, gx1, gy1);
  std::vector<float> ix(n), iy(n), it(n), inv_denom(n);
  const auto smooth = static_cast<float>((settings.smoothness / 255.0) * (settings.smoothness / 255.0));
  for (std::size_t i = 0; i < n; ++i) {
    ix[i] = 0.5f * (gx0[i] + gx1[i]);
    iy[i] = 0.5f * (gy0[i] + gy1[i]);
    it[i] = next.intensity()[i] - prev.intensity()[i];
    inv_denom[i] = 1.0f / (smooth + ix[i] * ix[i] + iy[i] * iy[i]);
  }

  PaddedGrid u(w, h), v(w, h), u_next(w, h), v_next(w, h);
  for (int k = 0; k < settings.iterations; ++k) {
    u.refresh_border();
    v.refresh_border();
    smooth_step(u, v, u_next, v_next, ix, iy, it, inv_denom, w, h);
    std::swap(u, u_next);
    std::swap(v, v_next);
  }

  FlowField flow{w, h, std::vector<float>(n), std::vector<float>(n)};
  for (int y = 0; y < h; ++y) {
    std::copy(u.row(y), u.row(y) + w, flow.u.begin() + static_cast<std::ptrdiff_t>(y) * w);
    std::copy(v.row(y), v.row(y) + w, flow.v.begin() + static_cast<std::ptrdiff_t>(y) * w);
  }
  return flow;
}

MagnitudeMap magnitude(const FlowField& flow) {
  MagnitudeMap map{flow.width, flow.height, std::vector<float>(flow.u.size())};
  for (std::size_t i = 0; i < flow.u.size(); ++i) {
    map.m[i] = std::hypot(flow.u[i], flow.v[i]);
  }
  return map;
}

std::vector<FlowVector> patch_flow(const FlowField& flow, const PatchGrid& grid,
                                   std::size_t patch_id) {
  const PixelCoord o = grid.origin(patch_id);
  const int s = grid.patch_size();
  std::vector<FlowVector> out;
  out.reserve(grid.pixels_per_patch());
  for (int y = o.y; y < o.y + s; ++y) {
    const std::size_t row = static_cast<std::size_t>(y) * flow.width;
    for (int x = o.x; x < o.x + s; ++x) out.push_back(flow.at(row + x));
  }
  return out;
}

void write_flow(const std::filesystem::path& path, const FlowField& flow) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  binary::write_u32(out, static_cast<std::uint32_t>(flow.width));
  binary::write_u32(out, static_cast<std::uint32_t>(flow.height));
  for (float x : flow.u) binary::write_f32(out, x);
  for (float x : flow.v) binary::write_f32(out, x);
  if (!out) throw DataError("write failed: " + path.string());
}

FlowField read_flow(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  FlowField flow;
  flow.width = static_cast<int>(binary::read_u32<DataError>(in));
  flow.height = static_cast<int>(binary::read_u32<DataError>(in));
  const std::size_t n = static_cast<std::size_t>(flow.width) * flow.height;
  flow.u.resize(n);
  flow.v.resize(n);
  for (auto& x : flow.u) x = binary::read_f32<DataError>(in);
  for (auto& x : flow.v) x = binary::read_f32<DataError>(in);
  return flow;
}

}  // namespace hmof
