#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <vector>

namespace hmof {

struct GaussianComponent {
  double weight = 0.0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

/// Weighted sum of multivariate Gaussians, P(x) = sum_k w_k N(x | mu_k, Sigma_k).
/// Construction validates the weights and caches a Cholesky factor per component.
class GmmModel {
 public:
  GmmModel() = default;
  explicit GmmModel(std::vector<GaussianComponent> components);

  std::size_t size() const { return components_.size(); }
  int dim() const { return dim_; }
  const std::vector<GaussianComponent>& components() const { return components_; }

  /// log N(x | mu_k, Sigma_k).
  double component_log_density(std::size_t k, const Eigen::VectorXd& x) const;

  /// log P(x | model) via log-sum-exp over components.
  double log_density(const Eigen::VectorXd& x) const;

 private:
  struct Factor {
    Eigen::LLT<Eigen::MatrixXd> llt;
    double log_norm = 0.0;  // -0.5 * (h log 2pi + log det Sigma)
    double log_weight = 0.0;
  };

  std::vector<GaussianComponent> components_;
  std::vector<Factor> factors_;
  int dim_ = 0;
};

struct EmSettings {
  int components = 5;
  std::uint64_t seed = 1;
  int max_iters = 200;
  // Stop when the mean per-sample log-likelihood improves by less than this.
  double tol = 1e-6;
  double reg = 1e-6;
};

struct EmResult {
  GmmModel model;
  // Total data log-likelihood of each successive parameter set, starting at the initialization.
  std::vector<double> log_likelihood;
  // Iterations at which a collapsed component was reseeded; the likelihood may drop there.
  std::vector<std::size_t> reseeded_at;
  bool converged = false;
};

/// Maximum-likelihood fit by expectation-maximization. Requires at least K * (h + 1) points.
EmResult fit_em(std::span<const Eigen::VectorXd> data, const EmSettings& settings);

/// Patch score: log P(x | model).
double score(const GmmModel& model, std::span<const double> x);

enum class Verdict { normal, abnormal };

/// Normal iff s > alpha.
Verdict classify_patch(double s, double alpha);

struct PatchScore {
  std::size_t patch_id = 0;
  double score = 0.0;
};

struct FrameDecision {
  std::size_t frame = 0;
  std::vector<std::size_t> abnormal_patches;
  std::size_t abnormal_count = 0;
  Verdict verdict = Verdict::normal;
  // beta-th smallest patch score, +inf with fewer than beta patches. Thresholding it at
  // alpha reproduces the verdict.
  double frame_score = std::numeric_limits<double>::infinity();
};

/// Abnormal iff at least beta patches score at or below alpha.
FrameDecision classify_frame(std::size_t frame, std::span<const PatchScore> scores, double alpha,
                             int beta);

/// Frame score alone: beta-th smallest of `scores`, or +inf.
double frame_score(std::span<const double> scores, int beta);

/// The ceil(q * N)-th smallest score.
double calibrate_alpha(std::vector<double> scores, double quantile);

// Model file: "HMGM", u32 version, u32 K, u32 h, then weights (K), means (K x h),
// covariances (K x h x h, row-major) as f64, little-endian.
void save_gmm(const std::filesystem::path& path, const GmmModel& model);
GmmModel load_gmm(const std::filesystem::path& path);

}  // namespace hmof
