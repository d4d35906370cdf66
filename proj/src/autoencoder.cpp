#include "hmof/autoencoder.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

#include "hmof/binary_io.hpp"
#include "hmof/error.hpp"
#include "hmof/rng.hpp"

namespace hmof {

namespace {

constexpr std::uint32_t kFormatVersion = 1;

using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

ConstVecMap as_vector(std::span<const double> x) {
  return ConstVecMap(x.data(), static_cast<Eigen::Index>(x.size()));
}

void check_input(const AutoEncoder& ae, std::size_t size) {
  if (size != static_cast<std::size_t>(ae.input_dim())) {
    throw DataError("autoencoder: input has dimension " + std::to_string(size) + ", expected " +
                    std::to_string(ae.input_dim()));
  }
}

void descend(AutoEncoder& ae, const AutoEncoderGradient& g, double rate) {
  ae.encoder_weights -= rate * g.encoder_weights;
  ae.encoder_bias -= rate * g.encoder_bias;
  ae.decoder_weights -= rate * g.decoder_weights;
  ae.decoder_bias -= rate * g.decoder_bias;
}

}  // namespace

std::size_t AutoEncoder::parameter_count() const {
  return static_cast<std::size_t>(encoder_weights.size() + encoder_bias.size() +
                                  decoder_weights.size() + decoder_bias.size());
}

bool AutoEncoder::operator==(const AutoEncoder& other) const {
  return encoder_weights == other.encoder_weights && encoder_bias == other.encoder_bias &&
         decoder_weights == other.decoder_weights && decoder_bias == other.decoder_bias;
}

AutoEncoder init_autoencoder(int input_dim, int latent_dim, std::uint64_t seed) {
  if (input_dim < 1 || latent_dim < 1) {
    throw std::invalid_argument("autoencoder: input and latent dimensions must be >= 1");
  }
  Rng rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(input_dim));
  AutoEncoder ae;
  ae.encoder_weights.resize(latent_dim, input_dim);
  ae.decoder_weights.resize(input_dim, latent_dim);
  for (Eigen::Index r = 0; r < ae.encoder_weights.rows(); ++r)
    for (Eigen::Index c = 0; c < ae.encoder_weights.cols(); ++c)
      ae.encoder_weights(r, c) = rng.uniform(-bound, bound);
  for (Eigen::Index r = 0; r < ae.decoder_weights.rows(); ++r)
    for (Eigen::Index c = 0; c < ae.decoder_weights.cols(); ++c)
      ae.decoder_weights(r, c) = rng.uniform(-bound, bound);
  ae.encoder_bias = Eigen::VectorXd::Zero(latent_dim);
  ae.decoder_bias = Eigen::VectorXd::Zero(input_dim);
  return ae;
}

std::vector<double> encode(const AutoEncoder& ae, std::span<const double> x) {
  check_input(ae, x.size());
  const Eigen::VectorXd z =
      (ae.encoder_weights * as_vector(x) + ae.encoder_bias).array().tanh().matrix();
  return {z.data(), z.data() + z.size()};
}

std::vector<double> decode(const AutoEncoder& ae, std::span<const double> z) {
  if (z.size() != static_cast<std::size_t>(ae.latent_dim())) {
    throw DataError("autoencoder: latent has dimension " + std::to_string(z.size()) +
                    ", expected " + std::to_string(ae.latent_dim()));
  }
  const Eigen::VectorXd x = ae.decoder_weights * as_vector(z) + ae.decoder_bias;
  return {x.data(), x.data() + x.size()};
}

double reconstruction_loss(std::span<const double> x, std::span<const double> reconstruction) {
  if (x.size() != reconstruction.size() || x.empty()) {
    throw DataError("reconstruction loss: dimension mismatch");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = x[i] - reconstruction[i];
    sum += e * e;
  }
  return sum / static_cast<double>(x.size());
}

double loss_and_gradient(const AutoEncoder& ae, std::span<const std::vector<double>> batch,
                         AutoEncoderGradient& g) {
  if (batch.empty()) throw DataError("autoencoder: empty batch");
  const int d = ae.input_dim();
  g.encoder_weights = Eigen::MatrixXd::Zero(ae.latent_dim(), d);
  g.encoder_bias = Eigen::VectorXd::Zero(ae.latent_dim());
  g.decoder_weights = Eigen::MatrixXd::Zero(d, ae.latent_dim());
  g.decoder_bias = Eigen::VectorXd::Zero(d);

  double loss = 0.0;
  for (const auto& sample : batch) {
    check_input(ae, sample.size());
    const ConstVecMap x = as_vector(sample);
    const Eigen::VectorXd z =
        (ae.encoder_weights * x + ae.encoder_bias).array().tanh().matrix();
    const Eigen::VectorXd err = ae.decoder_weights * z + ae.decoder_bias - x;
    loss += err.squaredNorm() / d;

    const Eigen::VectorXd out_delta = (2.0 / d) * err;
    const Eigen::VectorXd hidden_delta =
        ((ae.decoder_weights.transpose() * out_delta).array() * (1.0 - z.array().square()))
            .matrix();
    g.decoder_weights.noalias() += out_delta * z.transpose();
    g.decoder_bias += out_delta;
    g.encoder_weights.noalias() += hidden_delta * x.transpose();
    g.encoder_bias += hidden_delta;
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  g.encoder_weights *= inv;
  g.encoder_bias *= inv;
  g.decoder_weights *= inv;
  g.decoder_bias *= inv;
  return loss * inv;
}

double mean_loss(const AutoEncoder& ae, std::span<const std::vector<double>> dataset) {
  if (dataset.empty()) throw DataError("autoencoder: empty dataset");
  double total = 0.0;
  for (const auto& x : dataset) {
    check_input(ae, x.size());
    total += reconstruction_loss(x, decode(ae, encode(ae, x)));
  }
  return total / static_cast<double>(dataset.size());
}

TrainResult train(const AutoEncoder& initial, std::span<const std::vector<double>> dataset,
                  const TrainSettings& settings) {
  if (dataset.empty()) throw DataError("autoencoder training: empty dataset");
  if (settings.epochs < 1 || !(settings.learning_rate >= 0.0) || settings.batch_size < 1) {
    throw std::invalid_argument(
        "autoencoder training: epochs >= 1, learning rate >= 0 and batch size >= 1 required");
  }
  for (const auto& x : dataset) check_input(initial, x.size());

  TrainResult result{initial, {}, settings.learning_rate, 0};
  double rate = settings.learning_rate;
  double current = mean_loss(initial, dataset);
  result.loss_trace.push_back(current);

  Rng rng(settings.seed);
  std::vector<std::size_t> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<std::vector<double>> batch;
  AutoEncoderGradient gradient;
  const auto batch_size = static_cast<std::size_t>(settings.batch_size);

  for (int epoch = 0; epoch < settings.epochs; ++epoch) {
    AutoEncoder candidate = result.params;
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t stop = std::min(order.size(), start + batch_size);
      batch.clear();
      for (std::size_t i = start; i < stop; ++i) batch.push_back(dataset[order[i]]);
      loss_and_gradient(candidate, batch, gradient);
      descend(candidate, gradient, rate);
    }
    const double loss = mean_loss(candidate, dataset);
    if (settings.halve_on_increase && loss > current) {
      rate *= 0.5;
      ++result.halvings;
      continue;
    }
    result.params = std::move(candidate);
    current = loss;
    result.loss_trace.push_back(current);
  }
  result.final_learning_rate = rate;
  return result;
}

void save_autoencoder(const std::filesystem::path& path, const AutoEncoder& ae) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ModelError("cannot write " + path.string());
  out.write("HMAE", 4);
  binary::write_u32(out, kFormatVersion);
  binary::write_u32(out, static_cast<std::uint32_t>(ae.input_dim()));
  binary::write_u32(out, static_cast<std::uint32_t>(ae.latent_dim()));
  auto write_matrix = [&](const Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) binary::write_f64(out, m(r, c));
  };
  write_matrix(ae.encoder_weights);
  for (double b : ae.encoder_bias) binary::write_f64(out, b);
  write_matrix(ae.decoder_weights);
  for (double b : ae.decoder_bias) binary::write_f64(out, b);
  if (!out) throw ModelError("write failed: " + path.string());
}

AutoEncoder load_autoencoder(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelError("missing autoencoder model " + path.string());
  try {
    binary::expect_magic(in, "HMAE");
    const std::uint32_t version = binary::read_u32(in);
    if (version != kFormatVersion) {
      throw ModelError("unsupported version " + std::to_string(version));
    }
    const auto d = static_cast<Eigen::Index>(binary::read_u32(in));
    const auto h = static_cast<Eigen::Index>(binary::read_u32(in));
    if (d < 1 || h < 1 || d > 1 << 16 || h > 1 << 16) throw ModelError("implausible dims");
    AutoEncoder ae;
    ae.encoder_weights.resize(h, d);
    ae.encoder_bias.resize(h);
    ae.decoder_weights.resize(d, h);
    ae.decoder_bias.resize(d);
    auto read_matrix = [&](Eigen::MatrixXd& m) {
      for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = binary::read_f64(in);
    };
    read_matrix(ae.encoder_weights);
    for (auto& b : ae.encoder_bias) b = binary::read_f64(in);
    read_matrix(ae.decoder_weights);
    for (auto& b : ae.decoder_bias) b = binary::read_f64(in);
    if (!ae.encoder_weights.allFinite() || !ae.decoder_weights.allFinite() ||
        !ae.encoder_bias.allFinite() || !ae.decoder_bias.allFinite()) {
      throw ModelError("non-finite parameters");
    }
    return ae;
  } catch (const ModelError& e) {
    throw ModelError(path.string() + ": " + e.what());
  }
}

}  // namespace hmof
