#include "hmof/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "hmof/error.hpp"

namespace hmof {

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count_if(bits.begin(), bits.end(),
                                                [](std::uint8_t b) { return b != 0; }));
}

void GroundTruth::validate() const {
  if (!masks) return;
  if (masks->size() != labels.size()) {
    throw DataError("ground truth: " + std::to_string(masks->size()) + " masks for " +
                    std::to_string(labels.size()) + " frames");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const BinaryMask& m = (*masks)[i];
    if (m.width != masks->front().width || m.height != masks->front().height) {
      throw DataError("ground truth: mask " + std::to_string(i) + " has different dimensions");
    }
    if (labels[i] == Label::normal && !m.empty()) {
      throw DataError("ground truth: frame " + std::to_string(i) +
                      " is labeled normal but has anomalous pixels");
    }
  }
}

std::string mask_filename(std::size_t frame) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06zu.pgm", frame);
  return buf;
}

BinaryMask read_mask(const std::filesystem::path& path) {
  const Frame f = read_image(path);
  BinaryMask mask(f.width(), f.height());
  for (std::size_t i = 0; i < f.pixel_count(); ++i) mask.bits[i] = f.intensity()[i] > 0.0f;
  return mask;
}

void write_mask(const std::filesystem::path& path, const BinaryMask& mask) {
  std::vector<unsigned char> bytes(mask.bits.size());
  std::transform(mask.bits.begin(), mask.bits.end(), bytes.begin(),
                 [](std::uint8_t b) { return static_cast<unsigned char>(b ? 255 : 0); });
  write_pgm_bytes(path, mask.width, mask.height, bytes);
}

GroundTruth load_ground_truth(const std::filesystem::path& gt_file,
                              const std::optional<std::filesystem::path>& mask_dir) {
  std::ifstream in(gt_file);
  if (!in) throw DataError("missing ground truth file " + gt_file.string());
  GroundTruth gt;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw DataError(gt_file.string() + ":" + std::to_string(line_no) + ": expected index,label");
    }
    std::size_t index = 0;
    try {
      index = std::stoul(line.substr(0, comma));
    } catch (const std::exception&) {
      throw DataError(gt_file.string() + ":" + std::to_string(line_no) + ": bad frame index");
    }
    if (index != gt.labels.size()) {
      throw DataError(gt_file.string() + ":" + std::to_string(line_no) +
                      ": frame indices must be consecutive from 0");
    }
    const std::string label = line.substr(comma + 1);
    if (label == "abnormal" || label == "1") {
      gt.labels.push_back(Label::abnormal);
    } else if (label == "normal" || label == "0") {
      gt.labels.push_back(Label::normal);
    } else {
      throw DataError(gt_file.string() + ":" + std::to_string(line_no) + ": unknown label '" +
                      label + "'");
    }
  }
  if (mask_dir && std::filesystem::is_directory(*mask_dir)) {
    std::vector<BinaryMask> masks;
    masks.reserve(gt.labels.size());
    for (std::size_t i = 0; i < gt.labels.size(); ++i) {
      const auto path = *mask_dir / mask_filename(i);
      if (!std::filesystem::exists(path)) {
        throw DataError("ground truth: missing mask " + path.string());
      }
      masks.push_back(read_mask(path));
    }
    gt.masks = std::move(masks);
  }
  gt.validate();
  return gt;
}

void save_ground_truth(const std::filesystem::path& gt_file,
                       const std::optional<std::filesystem::path>& mask_dir,
                       const GroundTruth& gt) {
  std::ofstream out(gt_file);
  if (!out) throw DataError("cannot write " + gt_file.string());
  for (std::size_t i = 0; i < gt.labels.size(); ++i) {
    out << i << "," << (gt.labels[i] == Label::abnormal ? "abnormal" : "normal") << "\n";
  }
  if (mask_dir && gt.masks) {
    std::filesystem::create_directories(*mask_dir);
    for (std::size_t i = 0; i < gt.masks->size(); ++i) {
      write_mask(*mask_dir / mask_filename(i), (*gt.masks)[i]);
    }
  }
}

RocCurve roc(std::span<const double> scores, std::span<const Label> labels) {
  if (scores.size() != labels.size()) throw DataError("roc: scores and labels differ in length");
  const auto positives = static_cast<std::size_t>(
      std::count(labels.begin(), labels.end(), Label::abnormal));
  const std::size_t negatives = labels.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw DataError("roc: both normal and abnormal frames are required");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  RocCurve curve;
  curve.points.push_back({-std::numeric_limits<double>::infinity(), 0.0, 0.0});
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double threshold = scores[order[i]];
    while (i < order.size() && scores[order[i]] == threshold) {
      (labels[order[i]] == Label::abnormal ? tp : fp) += 1;
      ++i;
    }
    curve.points.push_back({threshold, static_cast<double>(tp) / positives,
                            static_cast<double>(fp) / negatives});
  }
  return curve;
}

double auc(const RocCurve& curve) {
  double area = 0.0;
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    const RocPoint& a = curve.points[i - 1];
    const RocPoint& b = curve.points[i];
    area += (b.fpr - a.fpr) * (a.tpr + b.tpr) * 0.5;
  }
  return area;
}

double eer(const RocCurve& curve) {
  const auto& p = curve.points;
  if (p.empty()) throw DataError("eer: empty curve");
  // f = FPR - (1 - TPR) rises from -1 at (0,0) to +1 at (1,1).
  auto f = [](const RocPoint& q) { return q.fpr + q.tpr - 1.0; };
  if (f(p.front()) >= 0.0) return p.front().fpr;
  for (std::size_t i = 1; i < p.size(); ++i) {
    const double fi = f(p[i]);
    if (fi < 0.0) continue;
    if (fi == 0.0) return p[i].fpr;
    const double fa = f(p[i - 1]);
    const double t = -fa / (fi - fa);
    return p[i - 1].fpr + t * (p[i].fpr - p[i - 1].fpr);
  }
  return p.back().fpr;
}

std::string to_string(PixelVerdict verdict) {
  switch (verdict) {
    case PixelVerdict::true_positive:
      return "true_positive";
    case PixelVerdict::miss:
      return "miss";
    case PixelVerdict::false_alarm:
      return "false_alarm";
    case PixelVerdict::true_negative:
      return "true_negative";
  }
  return "unknown";
}

bool covers_enough(std::size_t covered, std::size_t truth_pixels) {
  return covered * 5 >= truth_pixels * 2;
}

PixelVerdict pixel_level_verdict(const BinaryMask& detected, const BinaryMask& truth) {
  if (detected.width != truth.width || detected.height != truth.height) {
    throw DataError("pixel verdict: mask dimensions differ");
  }
  std::size_t truth_pixels = 0, covered = 0, detected_pixels = 0;
  for (std::size_t i = 0; i < truth.bits.size(); ++i) {
    const bool t = truth.bits[i] != 0;
    const bool d = detected.bits[i] != 0;
    truth_pixels += t;
    detected_pixels += d;
    covered += t && d;
  }
  if (truth_pixels > 0) {
    return covers_enough(covered, truth_pixels) ? PixelVerdict::true_positive : PixelVerdict::miss;
  }
  return detected_pixels > 0 ? PixelVerdict::false_alarm : PixelVerdict::true_negative;
}

BinaryMask patch_mask(const PatchGrid& grid, std::span<const std::size_t> patch_ids) {
  BinaryMask mask(grid.frame_width(), grid.frame_height());
  const int s = grid.patch_size();
  for (std::size_t id : patch_ids) {
    const PixelCoord o = grid.origin(id);
    for (int y = o.y; y < o.y + s; ++y)
      for (int x = o.x; x < o.x + s; ++x) mask.set(x, y);
  }
  return mask;
}

BinaryMask detection_mask(const PatchGrid& grid, const FramePatchScores& frame, double alpha,
                          int beta) {
  const FrameDecision d = classify_frame(frame.frame, frame.patches, alpha, beta);
  if (d.verdict == Verdict::normal) return BinaryMask(grid.frame_width(), grid.frame_height());
  return patch_mask(grid, d.abnormal_patches);
}

RocCurve pixel_roc(std::span<const FramePatchScores> frames, std::span<const BinaryMask> truth,
                   const PatchGrid& grid, int beta) {
  if (beta < 1) throw std::invalid_argument("pixel roc: beta must be >= 1");
  if (truth.empty()) throw DataError("pixel roc: ground-truth masks are missing");

  // Per frame: patch scores ascending with the ground-truth pixels each patch covers,
  // as a prefix sum, so coverage at any alpha is a lookup.
  struct FrameTable {
    std::vector<double> scores;
    std::vector<std::size_t> covered_prefix{0};  // size scores.size() + 1
    std::size_t truth_pixels = 0;
  };
  std::vector<FrameTable> tables(truth.size());
  std::size_t positives = 0;
  for (std::size_t f = 0; f < truth.size(); ++f) {
    const BinaryMask& t = truth[f];
    if (t.width != grid.frame_width() || t.height != grid.frame_height()) {
      throw DataError("pixel roc: mask " + std::to_string(f) + " does not match the frame size");
    }
    tables[f].truth_pixels = t.count();
    positives += tables[f].truth_pixels > 0;
  }
  const std::size_t negatives = truth.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw DataError("pixel roc: both anomalous and clean frames are required");
  }

  std::vector<double> thresholds;
  for (const auto& fr : frames) {
    if (fr.frame >= truth.size()) {
      throw DataError("pixel roc: scores for frame " + std::to_string(fr.frame) +
                      " beyond ground truth");
    }
    const BinaryMask& t = truth[fr.frame];
    std::vector<std::pair<double, std::size_t>> rows;
    const int s = grid.patch_size();
    for (const auto& p : fr.patches) {
      const PixelCoord o = grid.origin(p.patch_id);
      std::size_t covered = 0;
      for (int y = o.y; y < o.y + s; ++y)
        for (int x = o.x; x < o.x + s; ++x) covered += t.test(x, y);
      rows.emplace_back(p.score, covered);
      thresholds.push_back(p.score);
    }
    std::sort(rows.begin(), rows.end());
    FrameTable& table = tables[fr.frame];
    table.scores.clear();
    table.covered_prefix.assign(1, 0);
    for (const auto& [score, covered] : rows) {
      table.scores.push_back(score);
      table.covered_prefix.push_back(table.covered_prefix.back() + covered);
    }
  }
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  RocCurve curve;
  curve.points.push_back({-std::numeric_limits<double>::infinity(), 0.0, 0.0});
  const auto b = static_cast<std::size_t>(beta);
  for (double alpha : thresholds) {
    std::size_t tp = 0, fp = 0;
    for (const FrameTable& table : tables) {
      const auto flagged = static_cast<std::size_t>(
          std::upper_bound(table.scores.begin(), table.scores.end(), alpha) -
          table.scores.begin());
      const bool fires = flagged >= b;
      if (table.truth_pixels > 0) {
        tp += fires && covers_enough(table.covered_prefix[flagged], table.truth_pixels);
      } else {
        fp += fires;
      }
    }
    curve.points.push_back(
        {alpha, static_cast<double>(tp) / positives, static_cast<double>(fp) / negatives});
  }
  // Frames with fewer than beta scored patches never fire; close the curve at (1,1).
  const RocPoint& last = curve.points.back();
  if (last.tpr < 1.0 || last.fpr < 1.0) {
    curve.points.push_back({std::numeric_limits<double>::infinity(), 1.0, 1.0});
  }
  return curve;
}

}  // namespace hmof
