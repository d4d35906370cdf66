#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "hmof/flow.hpp"

namespace hmof {

enum class FeatureKind { hmof, hof, mhof };

std::string to_string(FeatureKind kind);
FeatureKind parse_feature_kind(const std::string& name);

/// Magnitude histogram settings. Bin i (1-based, i < n) covers
/// [(i-1)/n * delta, i/n * delta); bin n covers [(n-1)/n * delta, +inf).
struct HmofConfig {
  int bins = 8;
  double delta = 1.0;
  double discard_fraction = 0.05;
};

struct FeatureVector {
  FeatureKind kind = FeatureKind::hmof;
  std::vector<double> values;

  std::size_t dimension() const { return values.size(); }
};

/// Sorts ascending, drops the top ceil(fraction * N) values and returns the
/// largest remaining magnitude.
double calibrate_delta(std::vector<float> magnitudes, double discard_fraction);

/// Zero-based magnitude bin under the half-open ranges above.
std::size_t magnitude_bin(double magnitude, int bins, double delta);

/// Zero-based direction sector of atan2(v, u) over n equal sectors of [0, 2pi).
std::size_t direction_sector(float u, float v, int sectors);

/// Histogram of magnitude optical flow, normalized by pixel count.
FeatureVector hmof(std::span<const float> patch_magnitudes, const HmofConfig& config);

/// Magnitude-weighted orientation histogram. All-zero when the patch has no motion.
FeatureVector hof(std::span<const FlowVector> patch_flow, int directions);

/// Orientation histogram split into a low (< threshold) and a high magnitude band,
/// low band first. All-zero when the patch has no motion.
FeatureVector mhof(std::span<const FlowVector> patch_flow, int directions,
                   double magnitude_threshold);

/// Settings selecting and parameterizing one descriptor.
struct DescriptorSettings {
  FeatureKind kind = FeatureKind::hmof;
  HmofConfig hmof;
  // MHOF band split; non-positive means delta / 2.
  double mhof_threshold = 0.0;

  std::size_t dimension() const {
    return kind == FeatureKind::mhof ? 2 * static_cast<std::size_t>(hmof.bins)
                                     : static_cast<std::size_t>(hmof.bins);
  }
  double effective_mhof_threshold() const {
    return mhof_threshold > 0.0 ? mhof_threshold : hmof.delta / 2.0;
  }
};

/// Dispatches to hmof/hof/mhof; HOF and MHOF use `hmof.bins` direction sectors.
FeatureVector describe(std::span<const FlowVector> patch_flow, const DescriptorSettings& settings);

struct FeatureRecord {
  std::size_t frame = 0;
  std::size_t patch_id = 0;
  FeatureVector feature;
};

/// CSV with columns frame,patch_id,kind,v1..vd.
void write_feature_csv(std::ostream& out, std::span<const FeatureRecord> records);
void write_feature_csv(const std::filesystem::path& path, std::span<const FeatureRecord> records);

}  // namespace hmof
