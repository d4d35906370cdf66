#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace hmof {

/// Single-hidden-layer autoencoder d -> h -> d: tanh hidden units, linear output.
/// The hidden activations span the latent feature space used for classification.
struct AutoEncoder {
  Eigen::MatrixXd encoder_weights;  // h x d
  Eigen::VectorXd encoder_bias;     // h
  Eigen::MatrixXd decoder_weights;  // d x h
  Eigen::VectorXd decoder_bias;     // d

  int input_dim() const { return static_cast<int>(encoder_weights.cols()); }
  int latent_dim() const { return static_cast<int>(encoder_weights.rows()); }
  std::size_t parameter_count() const;

  bool operator==(const AutoEncoder& other) const;
};

/// Weights uniform on [-1/sqrt(d), 1/sqrt(d)], biases zero.
AutoEncoder init_autoencoder(int input_dim, int latent_dim, std::uint64_t seed);

std::vector<double> encode(const AutoEncoder& ae, std::span<const double> x);
std::vector<double> decode(const AutoEncoder& ae, std::span<const double> z);

/// Mean squared error (1/d) * sum (x_i - xhat_i)^2.
double reconstruction_loss(std::span<const double> x, std::span<const double> reconstruction);

/// Parameter-shaped gradient of the loss.
struct AutoEncoderGradient {
  Eigen::MatrixXd encoder_weights;
  Eigen::VectorXd encoder_bias;
  Eigen::MatrixXd decoder_weights;
  Eigen::VectorXd decoder_bias;
};

/// Mean reconstruction loss over `batch` and its gradient by backpropagation.
double loss_and_gradient(const AutoEncoder& ae, std::span<const std::vector<double>> batch,
                         AutoEncoderGradient& gradient);

double mean_loss(const AutoEncoder& ae, std::span<const std::vector<double>> dataset);

struct TrainSettings {
  int epochs = 200;
  double learning_rate = 0.1;
  int batch_size = 64;
  std::uint64_t seed = 1;
  // Reject an epoch whose mean loss rose, restore the previous parameters and halve the rate.
  bool halve_on_increase = true;
};

struct TrainResult {
  AutoEncoder params;
  // Mean dataset loss before training, then after every accepted epoch.
  std::vector<double> loss_trace;
  double final_learning_rate = 0.0;
  int halvings = 0;
};

/// Mini-batch gradient descent with seeded shuffling.
TrainResult train(const AutoEncoder& initial, std::span<const std::vector<double>> dataset,
                  const TrainSettings& settings);

// Model file: "HMAE", u32 version, u32 d, u32 h, then encoder weights (row-major h x d),
// encoder bias, decoder weights (row-major d x h), decoder bias as f64, little-endian.
void save_autoencoder(const std::filesystem::path& path, const AutoEncoder& ae);
AutoEncoder load_autoencoder(const std::filesystem::path& path);

}  // namespace hmof
