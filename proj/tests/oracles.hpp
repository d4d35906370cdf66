#pragma once

// Reference implementations written independently of the library, used to check it.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <span>
#include <vector>

#include "hmof/autoencoder.hpp"
#include "hmof/evaluation.hpp"

namespace hmof::oracle {

/// P(abnormal score < normal score) + 0.5 P(tie), by comparing every pair.
inline double pairwise_auc(std::span<const double> scores, std::span<const Label> labels) {
  double wins = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != Label::abnormal) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != Label::normal) continue;
      ++pairs;
      if (scores[i] < scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / static_cast<double>(pairs);
}

struct Rates {
  double fpr;
  double tpr;
};

/// Operating points obtained by flagging score <= t for every candidate t, counted directly.
inline std::vector<Rates> direct_operating_points(std::span<const double> scores,
                                                  std::span<const Label> labels) {
  std::vector<double> thresholds(scores.begin(), scores.end());
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  double pos = 0, neg = 0;
  for (Label l : labels) (l == Label::abnormal ? pos : neg) += 1;
  std::vector<Rates> out{{0.0, 0.0}};
  for (double t : thresholds) {
    double tp = 0, fp = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] > t) continue;
      (labels[i] == Label::abnormal ? tp : fp) += 1;
    }
    out.push_back({fp / neg, tp / pos});
  }
  return out;
}

/// EER on the piecewise-linear curve through `points`: sample each segment densely for a
/// sign change of fpr - (1 - tpr), then bisect the bracketing sub-interval.
inline double dense_scan_eer(const std::vector<Rates>& points, int samples_per_segment = 2000) {
  auto gap = [](double fpr, double tpr) { return fpr - (1.0 - tpr); };
  for (std::size_t s = 0; s + 1 < points.size(); ++s) {
    const Rates a = points[s], b = points[s + 1];
    auto at = [&](double t) {
      return Rates{a.fpr + t * (b.fpr - a.fpr), a.tpr + t * (b.tpr - a.tpr)};
    };
    double prev_t = 0.0;
    double prev_g = gap(a.fpr, a.tpr);
    if (prev_g == 0.0) return a.fpr;
    for (int i = 1; i <= samples_per_segment; ++i) {
      const double t = static_cast<double>(i) / samples_per_segment;
      const Rates r = at(t);
      const double g = gap(r.fpr, r.tpr);
      if (g == 0.0) return r.fpr;
      if ((prev_g < 0.0) != (g < 0.0)) {
        double lo = prev_t, hi = t;
        for (int k = 0; k < 200; ++k) {
          const double mid = 0.5 * (lo + hi);
          const Rates m = at(mid);
          ((gap(m.fpr, m.tpr) < 0.0) == (prev_g < 0.0) ? lo : hi) = mid;
        }
        const Rates m = at(0.5 * (lo + hi));
        return 0.5 * (m.fpr + (1.0 - m.tpr));
      }
      prev_t = t;
      prev_g = g;
    }
  }
  return points.back().fpr;
}

/// Zero-based HMOF bin by scanning the interval definitions one by one.
inline std::size_t scan_magnitude_bin(double m, int n, double delta) {
  for (int i = 1; i <= n; ++i) {
    const double lo = static_cast<double>(i - 1) / n * delta;
    if (i == n) {
      if (m >= lo) return static_cast<std::size_t>(i - 1);
    } else {
      const double hi = static_cast<double>(i) / n * delta;
      if (lo <= m && m < hi) return static_cast<std::size_t>(i - 1);
    }
  }
  return static_cast<std::size_t>(n);  // unreachable for m >= 0
}

/// Zero-based direction sector by scanning [k/n 2pi, (k+1)/n 2pi).
inline std::size_t scan_direction_sector(float u, float v, int n) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double theta = std::atan2(static_cast<double>(v), static_cast<double>(u));
  if (theta < 0.0) theta += two_pi;
  for (int k = 0; k < n; ++k) {
    const double lo = static_cast<double>(k) / n * two_pi;
    const double hi = static_cast<double>(k + 1) / n * two_pi;
    if (lo <= theta && theta < hi) return static_cast<std::size_t>(k);
  }
  return static_cast<std::size_t>(n - 1);
}

/// Mean reconstruction loss from the forward functions only.
inline double forward_loss(const AutoEncoder& ae, const std::vector<std::vector<double>>& batch) {
  double total = 0.0;
  for (const auto& x : batch) {
    const auto z = encode(ae, x);
    const auto xhat = decode(ae, z);
    double sq = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) sq += (x[i] - xhat[i]) * (x[i] - xhat[i]);
    total += sq / static_cast<double>(x.size());
  }
  return total / static_cast<double>(batch.size());
}

/// Largest |analytic - numeric| / (|numeric| + 1e-8) over all parameters, with central
/// differences of step eps.
inline double max_gradient_error(const AutoEncoder& ae,
                                 const std::vector<std::vector<double>>& batch,
                                 const AutoEncoderGradient& grad, double eps = 1e-5) {
  double worst = 0.0;
  AutoEncoder probe = ae;
  auto check = [&](double& param, double analytic) {
    const double saved = param;
    param = saved + eps;
    const double up = forward_loss(probe, batch);
    param = saved - eps;
    const double down = forward_loss(probe, batch);
    param = saved;
    const double numeric = (up - down) / (2.0 * eps);
    worst = std::max(worst, std::fabs(analytic - numeric) / (std::fabs(numeric) + 1e-8));
  };
  for (Eigen::Index i = 0; i < probe.encoder_weights.size(); ++i)
    check(probe.encoder_weights.data()[i], grad.encoder_weights.data()[i]);
  for (Eigen::Index i = 0; i < probe.encoder_bias.size(); ++i)
    check(probe.encoder_bias[i], grad.encoder_bias[i]);
  for (Eigen::Index i = 0; i < probe.decoder_weights.size(); ++i)
    check(probe.decoder_weights.data()[i], grad.decoder_weights.data()[i]);
  for (Eigen::Index i = 0; i < probe.decoder_bias.size(); ++i)
    check(probe.decoder_bias[i], grad.decoder_bias[i]);
  return worst;
}

/// Composite Simpson rule.
inline double simpson(const std::function<double(double)>& f, double a, double b, int intervals) {
  if (intervals % 2) ++intervals;
  const double h = (b - a) / intervals;
  double s = f(a) + f(b);
  for (int i = 1; i < intervals; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

}  // namespace hmof::oracle
