#include "hmof/descriptors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include "hmof/error.hpp"

namespace hmof {

std::string to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::hmof:
      return "hmof";
    case FeatureKind::hof:
      return "hof";
    case FeatureKind::mhof:
      return "mhof";
  }
  return "unknown";
}

FeatureKind parse_feature_kind(const std::string& name) {
  if (name == "hmof") return FeatureKind::hmof;
  if (name == "hof") return FeatureKind::hof;
  if (name == "mhof") return FeatureKind::mhof;
  throw std::invalid_argument("unknown feature kind '" + name + "' (expected hmof, hof or mhof)");
}

double calibrate_delta(std::vector<float> magnitudes, double discard_fraction) {
  if (magnitudes.empty()) throw DataError("delta calibration: no magnitudes");
  if (!(discard_fraction >= 0.0 && discard_fraction < 1.0)) {
    throw std::invalid_argument("delta calibration: discard fraction must be in [0, 1)");
  }
  const std::size_t n = magnitudes.size();
  const auto discard =
      static_cast<std::size_t>(std::ceil(discard_fraction * static_cast<double>(n)));
  if (discard >= n) throw DataError("delta calibration: nothing left after discarding");
  // The remaining maximum is the (n - discard)-th smallest value.
  const auto kth = magnitudes.begin() + static_cast<std::ptrdiff_t>(n - discard - 1);
  std::nth_element(magnitudes.begin(), kth, magnitudes.end());
  const double delta = *kth;
  if (!(delta > 0.0)) {
    throw DataError("delta calibration: remaining magnitudes are all zero (static training set)");
  }
  return delta;
}

std::size_t magnitude_bin(double magnitude, int bins, double delta) {
  const auto n = static_cast<std::size_t>(bins);
  // Lower edge of zero-based bin k is k / n * delta.
  auto lower_edge = [&](std::size_t k) { return static_cast<double>(k) / bins * delta; };
  double guess = std::floor(magnitude / delta * bins);
  std::size_t k = guess <= 0.0 ? 0 : std::min(n - 1, static_cast<std::size_t>(guess));
  while (k > 0 && magnitude < lower_edge(k)) --k;
  while (k + 1 < n && magnitude >= lower_edge(k + 1)) ++k;
  return k;
}

std::size_t direction_sector(float u, float v, int sectors) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double theta = std::atan2(static_cast<double>(v), static_cast<double>(u));
  if (theta < 0.0) theta += two_pi;
  const auto n = static_cast<std::size_t>(sectors);
  auto lower_edge = [&](std::size_t k) { return static_cast<double>(k) / sectors * two_pi; };
  std::size_t k = std::min(n - 1, static_cast<std::size_t>(theta / two_pi * sectors));
  while (k > 0 && theta < lower_edge(k)) --k;
  while (k + 1 < n && theta >= lower_edge(k + 1)) ++k;
  return k;
}

FeatureVector hmof(std::span<const float> patch_magnitudes, const HmofConfig& config) {
  if (patch_magnitudes.empty()) throw std::invalid_argument("hmof: empty patch");
  if (config.bins < 1 || !(config.delta > 0.0)) {
    throw std::invalid_argument("hmof: bins must be >= 1 and delta > 0");
  }
  FeatureVector out{FeatureKind::hmof, std::vector<double>(config.bins, 0.0)};
  for (float m : patch_magnitudes) out.values[magnitude_bin(m, config.bins, config.delta)] += 1.0;
  const double inv = 1.0 / static_cast<double>(patch_magnitudes.size());
  for (double& v : out.values) v *= inv;
  return out;
}

namespace {

void normalize_mass(std::vector<double>& values, double total) {
  if (total <= 0.0) {
    std::fill(values.begin(), values.end(), 0.0);
    return;
  }
  for (double& v : values) v /= total;
}

}  // namespace

FeatureVector hof(std::span<const FlowVector> patch_flow, int directions) {
  if (patch_flow.empty()) throw std::invalid_argument("hof: empty patch");
  if (directions < 1) throw std::invalid_argument("hof: direction count must be >= 1");
  FeatureVector out{FeatureKind::hof, std::vector<double>(directions, 0.0)};
  double total = 0.0;
  for (const auto& f : patch_flow) {
    const double m = std::hypot(f.u, f.v);
    if (m == 0.0) continue;
    out.values[direction_sector(f.u, f.v, directions)] += m;
    total += m;
  }
  normalize_mass(out.values, total);
  return out;
}

FeatureVector mhof(std::span<const FlowVector> patch_flow, int directions,
                   double magnitude_threshold) {
  if (patch_flow.empty()) throw std::invalid_argument("mhof: empty patch");
  if (directions < 1 || !(magnitude_threshold > 0.0)) {
    throw std::invalid_argument("mhof: direction count must be >= 1 and threshold > 0");
  }
  FeatureVector out{FeatureKind::mhof, std::vector<double>(2 * directions, 0.0)};
  double total = 0.0;
  for (const auto& f : patch_flow) {
    const double m = std::hypot(f.u, f.v);
    if (m == 0.0) continue;
    const std::size_t band = m < magnitude_threshold ? 0 : static_cast<std::size_t>(directions);
    out.values[band + direction_sector(f.u, f.v, directions)] += m;
    total += m;
  }
  normalize_mass(out.values, total);
  return out;
}

FeatureVector describe(std::span<const FlowVector> patch_flow, const DescriptorSettings& settings) {
  switch (settings.kind) {
    case FeatureKind::hmof: {
      std::vector<float> magnitudes(patch_flow.size());
      std::transform(patch_flow.begin(), patch_flow.end(), magnitudes.begin(),
                     [](const FlowVector& f) { return std::hypot(f.u, f.v); });
      return hmof(magnitudes, settings.hmof);
    }
    case FeatureKind::hof:
      return hof(patch_flow, settings.hmof.bins);
    case FeatureKind::mhof:
      return mhof(patch_flow, settings.hmof.bins, settings.effective_mhof_threshold());
  }
  throw std::invalid_argument("describe: unknown feature kind");
}

void write_feature_csv(std::ostream& out, std::span<const FeatureRecord> records) {
  const std::size_t d = records.empty() ? 0 : records.front().feature.dimension();
  out << "frame,patch_id,kind";
  for (std::size_t i = 1; i <= d; ++i) out << ",v" << i;
  out << "\n";
  char buf[32];
  for (const auto& r : records) {
    out << r.frame << "," << r.patch_id << "," << to_string(r.feature.kind);
    for (double v : r.feature.values) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << "," << buf;
    }
    out << "\n";
  }
}

void write_feature_csv(const std::filesystem::path& path, std::span<const FeatureRecord> records) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  write_feature_csv(out, records);
}

}  // namespace hmof
