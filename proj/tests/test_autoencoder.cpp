#include <gtest/gtest.h>

#include <cmath>

#include "hmof/autoencoder.hpp"
#include "hmof/error.hpp"
#include "hmof/rng.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace hmof;

namespace {

AutoEncoder zeros(int d, int h) {
  return {Eigen::MatrixXd::Zero(h, d), Eigen::VectorXd::Zero(h), Eigen::MatrixXd::Zero(d, h),
          Eigen::VectorXd::Zero(d)};
}

std::vector<std::vector<double>> random_histograms(Rng& rng, int n, int d) {
  std::vector<std::vector<double>> out(n, std::vector<double>(d));
  for (auto& x : out) {
    double s = 0;
    for (double& v : x) s += v = rng.uniform();
    for (double& v : x) v /= s;
  }
  return out;
}

}  // namespace

TEST(AutoEncoderInit, SeededAndBounded) {
  const AutoEncoder a = init_autoencoder(8, 4, 42), b = init_autoencoder(8, 4, 42);
  EXPECT_TRUE(a == b);
  EXPECT_FALSE(a == init_autoencoder(8, 4, 43));
  const double bound = 1.0 / std::sqrt(8.0);
  EXPECT_LE(a.encoder_weights.cwiseAbs().maxCoeff(), bound);
  EXPECT_LE(a.decoder_weights.cwiseAbs().maxCoeff(), bound);
  EXPECT_EQ(a.encoder_bias.norm(), 0.0);
  EXPECT_EQ(a.decoder_bias.norm(), 0.0);
  EXPECT_EQ(a.parameter_count(), 8u * 4 + 4 + 4 * 8 + 8);
  EXPECT_THROW(init_autoencoder(0, 4, 1), std::invalid_argument);
  EXPECT_THROW(init_autoencoder(8, 0, 1), std::invalid_argument);
}

TEST(Encode, Examples) {
  EXPECT_EQ(encode(zeros(3, 2), std::vector<double>{1, 2, 3}), (std::vector<double>{0, 0}));
  AutoEncoder ae = zeros(2, 1);
  ae.encoder_weights << 1, 1;
  EXPECT_EQ(encode(ae, std::vector<double>{0.5, -0.5})[0], 0.0);
  ae.encoder_weights << 1, 0;
  EXPECT_NEAR(encode(ae, std::vector<double>{1, 0})[0], 0.76159415595576, 1e-12);
  EXPECT_THROW(encode(ae, std::vector<double>{1, 0, 0}), DataError);
}

TEST(Decode, Examples) {
  AutoEncoder ae = zeros(2, 1);
  EXPECT_EQ(decode(ae, std::vector<double>{0.0}), (std::vector<double>{0, 0}));
  ae.decoder_weights << 2, 3;
  EXPECT_EQ(decode(ae, std::vector<double>{0.5}), (std::vector<double>{1.0, 1.5}));
  ae.decoder_weights.setZero();
  ae.decoder_bias << -1, 4;
  EXPECT_EQ(decode(ae, std::vector<double>{0.9}), (std::vector<double>{-1, 4}));
  EXPECT_THROW(decode(ae, std::vector<double>{1, 2}), DataError);
}

TEST(ReconstructionLoss, Examples) {
  const std::vector<double> x{1, 1}, zero{0, 0}, one_zero{1, 0};
  EXPECT_EQ(reconstruction_loss(x, x), 0.0);
  EXPECT_EQ(reconstruction_loss(one_zero, zero), 0.5);
  EXPECT_EQ(reconstruction_loss(x, zero), 1.0);
  EXPECT_THROW(reconstruction_loss(x, std::vector<double>{1}), DataError);
}

TEST(Gradient, MatchesCentralDifferences) {
  Rng rng(2024);
  for (int config = 0; config < 25; ++config) {
    const int d = 1 + static_cast<int>(rng.below(10));
    const int h = 1 + static_cast<int>(rng.below(6));
    const int n = 1 + static_cast<int>(rng.below(8));
    AutoEncoder ae = init_autoencoder(d, h, 100 + config);
    for (Eigen::Index i = 0; i < ae.encoder_bias.size(); ++i) ae.encoder_bias[i] = rng.uniform(-0.5, 0.5);
    for (Eigen::Index i = 0; i < ae.decoder_bias.size(); ++i) ae.decoder_bias[i] = rng.uniform(-0.5, 0.5);
    std::vector<std::vector<double>> batch(n, std::vector<double>(d));
    for (auto& x : batch)
      for (double& v : x) v = rng.uniform(-1, 1);
    AutoEncoderGradient grad;
    const double loss = loss_and_gradient(ae, batch, grad);
    EXPECT_NEAR(loss, oracle::forward_loss(ae, batch), 1e-12);
    EXPECT_LT(oracle::max_gradient_error(ae, batch, grad), 1e-4) << "d=" << d << " h=" << h;
  }
}

TEST(Train, MemorizesSinglePoint) {
  const std::vector<std::vector<double>> data{{0.1, 0.7, 0.0, 0.2, 0.0, 0.0, 0.0, 0.0}};
  TrainSettings s;
  s.epochs = 500;
  s.learning_rate = 0.05;
  const TrainResult r = train(init_autoencoder(8, 4, 1), data, s);
  EXPECT_LT(mean_loss(r.params, data), 1e-3);
}

TEST(Train, ZeroLearningRateIsNoOp) {
  Rng rng(5);
  const auto data = random_histograms(rng, 30, 8);
  const AutoEncoder init = init_autoencoder(8, 4, 9);
  TrainSettings s;
  s.epochs = 5;
  s.learning_rate = 0.0;
  s.halve_on_increase = false;
  // Zero step is accepted as a no-op rather than rejected as a bad setting.
  const TrainResult r = train(init, data, s);
  EXPECT_TRUE(r.params == init);
  EXPECT_EQ(r.loss_trace.front(), r.loss_trace.back());
}

TEST(Train, LossNonIncreasingAndDeterministic) {
  Rng rng(6);
  const auto data = random_histograms(rng, 300, 8);
  TrainSettings s;
  s.epochs = 60;
  s.learning_rate = 2.0;  // large enough to provoke rejected epochs
  const TrainResult a = train(init_autoencoder(8, 4, 3), data, s);
  const TrainResult b = train(init_autoencoder(8, 4, 3), data, s);
  EXPECT_TRUE(a.params == b.params);
  EXPECT_EQ(a.loss_trace, b.loss_trace);
  for (std::size_t i = 1; i < a.loss_trace.size(); ++i) EXPECT_LE(a.loss_trace[i], a.loss_trace[i - 1]);
  EXPECT_LE(mean_loss(a.params, data), a.loss_trace.front());
}

TEST(Train, Errors) {
  const AutoEncoder ae = init_autoencoder(2, 1, 1);
  EXPECT_THROW(train(ae, std::vector<std::vector<double>>{}, {}), DataError);
  EXPECT_THROW(train(ae, std::vector<std::vector<double>>{{1, 2, 3}}, {}), DataError);
  TrainSettings bad;
  bad.batch_size = 0;
  EXPECT_THROW(train(ae, std::vector<std::vector<double>>{{1, 2}}, bad), std::invalid_argument);
}

TEST(AutoEncoderIo, RoundTripAndCorruption) {
  hmof::testing::TempDir tmp("aeio");
  const AutoEncoder ae = init_autoencoder(8, 4, 77);
  save_autoencoder(tmp / "ae.bin", ae);
  EXPECT_EQ(std::filesystem::file_size(tmp / "ae.bin"), 16u + 8u * ae.parameter_count());
  EXPECT_TRUE(load_autoencoder(tmp / "ae.bin") == ae);
  std::filesystem::resize_file(tmp / "ae.bin", 40);
  EXPECT_THROW(load_autoencoder(tmp / "ae.bin"), ModelError);
  EXPECT_THROW(load_autoencoder(tmp / "missing.bin"), ModelError);
}
