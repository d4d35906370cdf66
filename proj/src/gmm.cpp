#include "hmof/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <string>

#include "hmof/binary_io.hpp"
#include "hmof/error.hpp"
#include "hmof/rng.hpp"

namespace hmof {

namespace {

constexpr std::uint32_t kFormatVersion = 1;
constexpr double kCollapsedWeight = 1e-8;

double log_sum_exp(std::span<const double> values) {
  const double top = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(top)) return top;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - top);
  return top + std::log(sum);
}

// Population covariance of `data` around `mean`.
Eigen::MatrixXd covariance_of(std::span<const Eigen::VectorXd> data, const Eigen::VectorXd& mean) {
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(mean.size(), mean.size());
  for (const auto& x : data) {
    const Eigen::VectorXd c = x - mean;
    cov.noalias() += c * c.transpose();
  }
  return cov / static_cast<double>(data.size());
}

}  // namespace

GmmModel::GmmModel(std::vector<GaussianComponent> components)
    : components_(std::move(components)) {
  if (components_.empty()) throw ModelError("gmm: no components");
  dim_ = static_cast<int>(components_.front().mean.size());
  if (dim_ < 1) throw ModelError("gmm: zero-dimensional components");
  double total = 0.0;
  for (const auto& c : components_) {
    if (c.mean.size() != dim_ || c.covariance.rows() != dim_ || c.covariance.cols() != dim_) {
      throw ModelError("gmm: inconsistent component dimensions");
    }
    if (!(c.weight >= 0.0) || !c.mean.allFinite() || !c.covariance.allFinite()) {
      throw ModelError("gmm: negative weight or non-finite parameters");
    }
    total += c.weight;
  }
  if (std::fabs(total - 1.0) > 1e-9) throw ModelError("gmm: weights do not sum to 1");

  const double log_two_pi = std::log(2.0 * std::numbers::pi);
  for (const auto& c : components_) {
    Factor f;
    f.llt.compute(c.covariance);
    if (f.llt.info() != Eigen::Success || !c.covariance.isApprox(c.covariance.transpose())) {
      throw ModelError("gmm: covariance is not symmetric positive definite");
    }
    const Eigen::VectorXd diag = f.llt.matrixL().toDenseMatrix().diagonal();
    if ((diag.array() <= 0.0).any()) throw ModelError("gmm: singular covariance");
    const double log_det = 2.0 * diag.array().log().sum();
    f.log_norm = -0.5 * (dim_ * log_two_pi + log_det);
    f.log_weight = c.weight > 0.0 ? std::log(c.weight) : -std::numeric_limits<double>::infinity();
    factors_.push_back(std::move(f));
  }
}

double GmmModel::component_log_density(std::size_t k, const Eigen::VectorXd& x) const {
  const Factor& f = factors_[k];
  const Eigen::VectorXd white = f.llt.matrixL().solve(x - components_[k].mean);
  return f.log_norm - 0.5 * white.squaredNorm();
}

double GmmModel::log_density(const Eigen::VectorXd& x) const {
  if (x.size() != dim_) {
    throw DataError("gmm: feature has dimension " + std::to_string(x.size()) + ", expected " +
                    std::to_string(dim_));
  }
  double terms[64];
  std::vector<double> heap;
  double* t = terms;
  if (components_.size() > 64) {
    heap.resize(components_.size());
    t = heap.data();
  }
  for (std::size_t k = 0; k < components_.size(); ++k) {
    t[k] = factors_[k].log_weight + component_log_density(k, x);
  }
  return log_sum_exp({t, components_.size()});
}

EmResult fit_em(std::span<const Eigen::VectorXd> data, const EmSettings& settings) {
  if (settings.components < 1) throw std::invalid_argument("gmm: K must be >= 1");
  if (!(settings.reg > 0.0)) throw std::invalid_argument("gmm: regularizer must be > 0");
  if (settings.max_iters < 1) throw std::invalid_argument("gmm: max_iters must be >= 1");
  if (data.empty()) throw DataError("gmm: insufficient data (no points)");
  const auto h = static_cast<int>(data.front().size());
  const auto k_count = static_cast<std::size_t>(settings.components);
  const std::size_t n = data.size();
  if (h < 1) throw DataError("gmm: zero-dimensional data");
  if (n < k_count * static_cast<std::size_t>(h + 1)) {
    throw DataError("gmm: insufficient data: " + std::to_string(n) + " points for K=" +
                    std::to_string(k_count) + " in " + std::to_string(h) +
                    " dimensions (need K*(h+1))");
  }
  for (const auto& x : data) {
    if (x.size() != h) throw DataError("gmm: inconsistent data dimensions");
    if (!x.allFinite()) throw DataError("gmm: non-finite data");
  }

  const Eigen::MatrixXd ridge = settings.reg * Eigen::MatrixXd::Identity(h, h);
  Eigen::VectorXd data_mean = Eigen::VectorXd::Zero(h);
  for (const auto& x : data) data_mean += x;
  data_mean /= static_cast<double>(n);
  const Eigen::MatrixXd data_cov = covariance_of(data, data_mean) + ridge;

  // Distinct random points as initial means, shared data covariance, uniform weights.
  // Points are drawn with probability proportional to their squared distance from the
  // means chosen so far, which keeps all initial means from landing in one cluster.
  Rng rng(settings.seed);
  std::vector<std::size_t> seeds{static_cast<std::size_t>(rng.below(n))};
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  while (seeds.size() < k_count) {
    double mass = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      dist[i] = std::min(dist[i], (data[i] - data[seeds.back()]).squaredNorm());
      mass += dist[i];
    }
    std::size_t pick = n;
    if (mass > 0.0) {
      double target = rng.uniform() * mass;
      for (std::size_t i = 0; i < n && pick == n; ++i) {
        if (dist[i] > 0.0 && (target -= dist[i]) < 0.0) pick = i;
      }
    }
    if (pick == n) {
      // Fewer distinct locations than components (or rounding at the end): any unused index.
      std::vector<std::size_t> unused;
      for (std::size_t i = 0; i < n; ++i)
        if (std::find(seeds.begin(), seeds.end(), i) == seeds.end()) unused.push_back(i);
      pick = unused[rng.below(unused.size())];
    }
    seeds.push_back(pick);
  }
  std::vector<GaussianComponent> comps(k_count);
  for (std::size_t k = 0; k < k_count; ++k) {
    comps[k] = {1.0 / static_cast<double>(k_count), data[seeds[k]], data_cov};
  }

  EmResult result;
  Eigen::MatrixXd resp(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k_count));
  std::vector<double> point_ll(n);
  std::vector<double> terms(k_count);
  for (int iter = 0;; ++iter) {
    GmmModel model(comps);

    // E-step.
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < k_count; ++k) {
        terms[k] = std::log(comps[k].weight) + model.component_log_density(k, data[i]);
      }
      const double ll = log_sum_exp(terms);
      point_ll[i] = ll;
      total += ll;
      for (std::size_t k = 0; k < k_count; ++k) {
        resp(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
            std::exp(terms[k] - ll);
      }
    }
    result.log_likelihood.push_back(total);
    result.model = std::move(model);

    const std::size_t t = result.log_likelihood.size();
    if (t >= 2) {
      const double gain = (result.log_likelihood[t - 1] - result.log_likelihood[t - 2]) /
                          static_cast<double>(n);
      if (gain < settings.tol) {
        result.converged = true;
        break;
      }
    }
    if (iter + 1 >= settings.max_iters) break;

    // M-step.
    bool reseeded = false;
    for (std::size_t k = 0; k < k_count; ++k) {
      const auto col = static_cast<Eigen::Index>(k);
      const double nk = resp.col(col).sum();
      if (nk / static_cast<double>(n) < kCollapsedWeight) {
        // Reseed at the point the current model explains worst.
        const auto worst = static_cast<std::size_t>(
            std::min_element(point_ll.begin(), point_ll.end()) - point_ll.begin());
        comps[k] = {1.0 / static_cast<double>(n), data[worst], data_cov};
        point_ll[worst] = std::numeric_limits<double>::infinity();
        reseeded = true;
        continue;
      }
      Eigen::VectorXd mean = Eigen::VectorXd::Zero(h);
      for (std::size_t i = 0; i < n; ++i) {
        mean += resp(static_cast<Eigen::Index>(i), col) * data[i];
      }
      mean /= nk;
      Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(h, h);
      for (std::size_t i = 0; i < n; ++i) {
        const Eigen::VectorXd c = data[i] - mean;
        cov.noalias() += resp(static_cast<Eigen::Index>(i), col) * (c * c.transpose());
      }
      cov /= nk;
      cov = 0.5 * (cov + cov.transpose()) + ridge;
      comps[k] = {nk / static_cast<double>(n), std::move(mean), std::move(cov)};
    }
    double weight_sum = 0.0;
    for (const auto& c : comps) weight_sum += c.weight;
    for (auto& c : comps) c.weight /= weight_sum;
    if (reseeded) result.reseeded_at.push_back(result.log_likelihood.size());
  }
  return result;
}

double score(const GmmModel& model, std::span<const double> x) {
  const Eigen::Map<const Eigen::VectorXd> v(x.data(), static_cast<Eigen::Index>(x.size()));
  return model.log_density(v);
}

Verdict classify_patch(double s, double alpha) {
  return s > alpha ? Verdict::normal : Verdict::abnormal;
}

double frame_score(std::span<const double> scores, int beta) {
  if (beta < 1) throw std::invalid_argument("frame score: beta must be >= 1");
  const auto b = static_cast<std::size_t>(beta);
  if (scores.size() < b) return std::numeric_limits<double>::infinity();
  std::vector<double> sorted(scores.begin(), scores.end());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(b - 1),
                   sorted.end());
  return sorted[b - 1];
}

FrameDecision classify_frame(std::size_t frame, std::span<const PatchScore> scores, double alpha,
                             int beta) {
  if (beta < 1) throw std::invalid_argument("classify frame: beta must be >= 1");
  FrameDecision decision;
  decision.frame = frame;
  std::vector<double> values;
  values.reserve(scores.size());
  for (const auto& s : scores) {
    values.push_back(s.score);
    if (classify_patch(s.score, alpha) == Verdict::abnormal) {
      decision.abnormal_patches.push_back(s.patch_id);
    }
  }
  decision.abnormal_count = decision.abnormal_patches.size();
  decision.verdict = decision.abnormal_count >= static_cast<std::size_t>(beta) ? Verdict::abnormal
                                                                              : Verdict::normal;
  decision.frame_score = frame_score(values, beta);
  return decision;
}

double calibrate_alpha(std::vector<double> scores, double quantile) {
  if (scores.empty()) throw DataError("alpha calibration: no training scores");
  if (!(quantile > 0.0 && quantile < 1.0)) {
    throw std::invalid_argument("alpha calibration: quantile must be in (0, 1)");
  }
  const auto n = scores.size();
  auto rank = static_cast<std::size_t>(std::ceil(quantile * static_cast<double>(n)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  std::nth_element(scores.begin(), scores.begin() + static_cast<std::ptrdiff_t>(rank - 1),
                   scores.end());
  return scores[rank - 1];
}

void save_gmm(const std::filesystem::path& path, const GmmModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ModelError("cannot write " + path.string());
  out.write("HMGM", 4);
  binary::write_u32(out, kFormatVersion);
  binary::write_u32(out, static_cast<std::uint32_t>(model.size()));
  binary::write_u32(out, static_cast<std::uint32_t>(model.dim()));
  for (const auto& c : model.components()) binary::write_f64(out, c.weight);
  for (const auto& c : model.components())
    for (double v : c.mean) binary::write_f64(out, v);
  for (const auto& c : model.components())
    for (Eigen::Index r = 0; r < c.covariance.rows(); ++r)
      for (Eigen::Index col = 0; col < c.covariance.cols(); ++col)
        binary::write_f64(out, c.covariance(r, col));
  if (!out) throw ModelError("write failed: " + path.string());
}

GmmModel load_gmm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelError("missing gmm model " + path.string());
  try {
    binary::expect_magic(in, "HMGM");
    const std::uint32_t version = binary::read_u32(in);
    if (version != kFormatVersion) {
      throw ModelError("unsupported version " + std::to_string(version));
    }
    const std::uint32_t k_count = binary::read_u32(in);
    const auto h = static_cast<Eigen::Index>(binary::read_u32(in));
    if (k_count < 1 || k_count > 4096 || h < 1 || h > 4096) throw ModelError("implausible dims");
    std::vector<GaussianComponent> comps(k_count);
    for (auto& c : comps) c.weight = binary::read_f64(in);
    for (auto& c : comps) {
      c.mean.resize(h);
      for (auto& v : c.mean) v = binary::read_f64(in);
    }
    for (auto& c : comps) {
      c.covariance.resize(h, h);
      for (Eigen::Index r = 0; r < h; ++r)
        for (Eigen::Index col = 0; col < h; ++col) c.covariance(r, col) = binary::read_f64(in);
    }
    return GmmModel(std::move(comps));
  } catch (const ModelError& e) {
    throw ModelError(path.string() + ": " + e.what());
  }
}

}  // namespace hmof
