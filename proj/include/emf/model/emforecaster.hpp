#pragma once

#include "emf/model/forecaster.hpp"
#include "emf/nn/layers.hpp"

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace emf::model {

/// Division guard for RevIN's standard deviation and lower bound on |gamma|.
inline constexpr double kRevinEps = 1e-8;

struct EmfConfig {
  std::size_t lookback = 336;      // L
  std::size_t horizon = 96;        // O
  std::size_t patch_len = 16;      // P
  std::size_t patch_stride = 8;    // S
  std::size_t embed_dim = 128;     // D
  std::size_t hidden_dim = 256;    // D_h
  std::size_t blocks = 2;          // K
  double layer_norm_eps = 1e-5;

  /// N = floor((L - P) / S) + 1.
  std::size_t num_patches() const;
  /// Throws ConfigError when an invariant fails.
  void validate() const;

  nlohmann::json to_json() const;
  static EmfConfig from_json(const nlohmann::json& j);
};

/// Closed-form tally: 2 + D*P + K*(2*N*D_h + 2*D*D_h) + 2*D + O*N*D.
std::size_t param_count(const EmfConfig& cfg);

/// Per-window statistics of RevIN plus the learnable affine pair.
struct RevinStats {
  double mu = 0.0;
  double sigma = 0.0;  // sample (n-1) standard deviation as computed
  double gamma = 1.0;
  double delta = 0.0;

  double guarded_sigma() const { return sigma > kRevinEps ? sigma : kRevinEps; }
};

std::pair<std::vector<double>, RevinStats> revin_normalize(std::span<const double> x, double gamma, double delta);
std::vector<double> revin_denormalize(std::span<const double> y_r, const RevinStats& stats);

/// [N x P] matrix of stride-S patches; positions past the window read as zero.
nn::Matrix patchify(std::span<const double> x_r, std::size_t patch_len, std::size_t stride);

/// x_p W_d^T: every patch row mapped through the shared [D x P] weight.
nn::Matrix patch_embed(const nn::Matrix& patches, const nn::Matrix& w_embed);

struct StbWeights {
  nn::Matrix temporal_w1;  // [D_h x N]
  nn::Matrix temporal_w2;  // [N x D_h]
  nn::Matrix patch_w1;     // [D_h x D]
  nn::Matrix patch_w2;     // [D x D_h]
};

/// One mixing block on u [N x D]:
///   u' = u + W_t2 relu(W_t1 u)
///   out = u' + relu(u' W_p1^T) W_p2^T
nn::Matrix stb_block(const nn::Matrix& u, const StbWeights& w);

/// RevIN -> patch -> embed -> K mixing blocks -> relu -> LayerNorm (per patch row)
/// -> flatten (patch-major) -> head -> RevIN^-1.
class EMForecaster final : public Forecaster {
 public:
  EMForecaster(const EmfConfig& cfg, std::uint64_t seed);

  ModelKind kind() const override { return ModelKind::emforecaster; }
  std::size_t lookback() const override { return cfg_.lookback; }
  std::size_t horizon() const override { return cfg_.horizon; }
  nlohmann::json config_json() const override;
  std::unique_ptr<Forecaster> clone() const override;
  void project_parameters() override;

  nn::Matrix forward(const nn::Matrix& x) override;
  nn::Matrix backward(const nn::Matrix& grad_out) override;
  std::vector<nn::Parameter*> parameters() override;

  const EmfConfig& config() const { return cfg_; }
  double gamma() const { return gamma_.value(0, 0); }
  double delta() const { return delta_.value(0, 0); }
  StbWeights block_weights(std::size_t k) const;
  const nn::Matrix& embed_weight() const { return embed_.weight().value; }
  const nn::Matrix& head_weight() const { return head_.weight().value; }

 protected:
  nn::Matrix predict_batch(const nn::Matrix& inputs) const override;

 private:
  struct Block {
    nn::Dense temporal_fc1;
    nn::ReLU temporal_act;
    nn::Dense temporal_fc2;
    nn::Dense patch_fc1;
    nn::ReLU patch_act;
    nn::Dense patch_fc2;
  };

  EMForecaster(const EmfConfig& cfg, nn::Rng&& rng);
  static std::vector<Block> make_blocks(const EmfConfig& cfg, Eigen::Index n_patches, nn::Rng& rng);

  // Rows (b, n) x cols d  <->  rows (b, d) x cols n.
  nn::Matrix to_temporal(const nn::Matrix& u, Eigen::Index batch) const;
  nn::Matrix from_temporal(const nn::Matrix& t, Eigen::Index batch) const;
  nn::Matrix patchify_batch(const nn::Matrix& x_r) const;

  EmfConfig cfg_;
  Eigen::Index n_patches_;
  nn::Parameter gamma_;
  nn::Parameter delta_;
  nn::Dense embed_;
  std::vector<Block> blocks_;
  nn::ReLU out_act_;
  nn::LayerNorm norm_;
  nn::Dense head_;

  // Training caches (per batch row).
  nn::Matrix input_;
  Eigen::VectorXd mu_;
  Eigen::VectorXd sd_;
  Eigen::VectorXd scale_;  // guarded sd
  nn::Matrix standardized_;
  nn::Matrix head_out_;
  bool cached_ = false;
};

}  // namespace emf::model
