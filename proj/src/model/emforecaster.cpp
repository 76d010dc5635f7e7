#include "emf/model/emforecaster.hpp"

#include "emf/error.hpp"

#include <cmath>
#include <string>

namespace emf::model {

using nn::Matrix;

std::size_t EmfConfig::num_patches() const {
  if (patch_len == 0 || patch_stride == 0 || patch_len > lookback) return 0;
  return (lookback - patch_len) / patch_stride + 1;
}

void EmfConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("EMForecaster config: " + msg); };
  if (lookback < 2) fail("lookback must be at least 2");
  if (horizon < 1) fail("horizon must be at least 1");
  if (patch_len < 1 || patch_len > lookback) fail("patch length must satisfy 1 <= P <= L");
  if (patch_stride < 1 || patch_stride > patch_len) fail("patch stride must satisfy 1 <= S <= P");
  if (embed_dim < 1) fail("embedding dimension must be positive");
  if (hidden_dim < 1) fail("hidden dimension must be positive");
  if (blocks < 1) fail("block count must be at least 1");
  if (!(layer_norm_eps > 0.0)) fail("layer norm eps must be positive");
}

nlohmann::json EmfConfig::to_json() const {
  return {{"lookback", lookback},   {"horizon", horizon},     {"patch_len", patch_len},
          {"patch_stride", patch_stride}, {"embed_dim", embed_dim}, {"hidden_dim", hidden_dim},
          {"blocks", blocks},       {"layer_norm_eps", layer_norm_eps}, {"activation", "relu"},
          {"flatten_order", "row-major [N x D]"}};
}

EmfConfig EmfConfig::from_json(const nlohmann::json& j) {
  EmfConfig c;
  c.lookback = j.value("lookback", c.lookback);
  c.horizon = j.value("horizon", c.horizon);
  c.patch_len = j.value("patch_len", c.patch_len);
  c.patch_stride = j.value("patch_stride", c.patch_stride);
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
  c.blocks = j.value("blocks", c.blocks);
  c.layer_norm_eps = j.value("layer_norm_eps", c.layer_norm_eps);
  return c;
}

std::size_t param_count(const EmfConfig& cfg) {
  cfg.validate();
  const std::size_t N = cfg.num_patches();
  const std::size_t D = cfg.embed_dim;
  const std::size_t Dh = cfg.hidden_dim;
  return 2 + D * cfg.patch_len + cfg.blocks * (2 * N * Dh + 2 * D * Dh) + 2 * D + cfg.horizon * N * D;
}

// ---------------------------------------------------------------------------
// Single-window reference operations.

std::pair<std::vector<double>, RevinStats> revin_normalize(std::span<const double> x, double gamma, double delta) {
  if (x.size() < 2) throw SizeError("RevIN needs a window of at least 2 samples");
  const double n = static_cast<double>(x.size());
  RevinStats stats;
  stats.gamma = gamma;
  stats.delta = delta;
  for (double v : x) stats.mu += v;
  stats.mu /= n;
  double ss = 0.0;
  for (double v : x) ss += (v - stats.mu) * (v - stats.mu);
  stats.sigma = std::sqrt(ss / (n - 1.0));
  const double s = stats.guarded_sigma();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = gamma * (x[i] - stats.mu) / s + delta;
  return {std::move(out), stats};
}

std::vector<double> revin_denormalize(std::span<const double> y_r, const RevinStats& stats) {
  const double s = stats.guarded_sigma();
  std::vector<double> out(y_r.size());
  for (std::size_t i = 0; i < y_r.size(); ++i) out[i] = s * (y_r[i] - stats.delta) / stats.gamma + stats.mu;
  return out;
}

Matrix patchify(std::span<const double> x_r, std::size_t patch_len, std::size_t stride) {
  if (patch_len < 1 || stride < 1 || patch_len > x_r.size()) {
    throw ConfigError("patchify requires 1 <= P <= L and S >= 1");
  }
  const std::size_t n = (x_r.size() - patch_len) / stride + 1;
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(patch_len));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < patch_len; ++j) {
      const std::size_t src = i * stride + j;
      if (src < x_r.size()) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = x_r[src];
    }
  }
  return out;
}

Matrix patch_embed(const Matrix& patches, const Matrix& w_embed) {
  if (patches.cols() != w_embed.cols()) {
    throw DimensionError("patch_embed: patches " + nn::shape_of(patches) + " vs embedding weight " +
                         nn::shape_of(w_embed));
  }
  return patches * w_embed.transpose();
}

Matrix stb_block(const Matrix& u, const StbWeights& w) {
  const Eigen::Index N = u.rows();
  const Eigen::Index D = u.cols();
  if (w.temporal_w1.cols() != N || w.temporal_w2.rows() != N || w.temporal_w2.cols() != w.temporal_w1.rows() ||
      w.patch_w1.cols() != D || w.patch_w2.rows() != D || w.patch_w2.cols() != w.patch_w1.rows()) {
    throw DimensionError("stb_block: weights do not match input " + nn::shape_of(u));
  }
  const Matrix u1 = u + w.temporal_w2 * nn::relu(w.temporal_w1 * u);
  return u1 + nn::relu(u1 * w.patch_w1.transpose()) * w.patch_w2.transpose();
}

// ---------------------------------------------------------------------------

namespace {

EmfConfig checked(const EmfConfig& cfg) {
  cfg.validate();
  return cfg;
}

}  // namespace

EMForecaster::EMForecaster(const EmfConfig& cfg, std::uint64_t seed) : EMForecaster(checked(cfg), nn::Rng(seed)) {}

EMForecaster::EMForecaster(const EmfConfig& cfg, nn::Rng&& rng)
    : cfg_(cfg),
      n_patches_(static_cast<Eigen::Index>(cfg.num_patches())),
      gamma_("revin.gamma", Matrix::Ones(1, 1)),
      delta_("revin.delta", Matrix::Zero(1, 1)),
      embed_("embed", static_cast<Eigen::Index>(cfg.patch_len), static_cast<Eigen::Index>(cfg.embed_dim), false, rng),
      blocks_(make_blocks(cfg, n_patches_, rng)),
      norm_("norm", static_cast<Eigen::Index>(cfg.embed_dim), cfg.layer_norm_eps),
      head_("head", n_patches_ * static_cast<Eigen::Index>(cfg.embed_dim), static_cast<Eigen::Index>(cfg.horizon),
            false, rng) {}

std::vector<EMForecaster::Block> EMForecaster::make_blocks(const EmfConfig& cfg, Eigen::Index n_patches,
                                                           nn::Rng& rng) {
  const auto D = static_cast<Eigen::Index>(cfg.embed_dim);
  const auto Dh = static_cast<Eigen::Index>(cfg.hidden_dim);
  std::vector<Block> blocks;
  blocks.reserve(cfg.blocks);
  for (std::size_t k = 0; k < cfg.blocks; ++k) {
    const std::string prefix = "blocks." + std::to_string(k);
    nn::Dense t1(prefix + ".temporal.fc1", n_patches, Dh, false, rng);
    nn::Dense t2(prefix + ".temporal.fc2", Dh, n_patches, false, rng);
    nn::Dense p1(prefix + ".patch.fc1", D, Dh, false, rng);
    nn::Dense p2(prefix + ".patch.fc2", Dh, D, false, rng);
    blocks.push_back(Block{std::move(t1), nn::ReLU{}, std::move(t2), std::move(p1), nn::ReLU{}, std::move(p2)});
  }
  return blocks;
}

nlohmann::json EMForecaster::config_json() const { return cfg_.to_json(); }

std::unique_ptr<Forecaster> EMForecaster::clone() const { return std::make_unique<EMForecaster>(*this); }

void EMForecaster::project_parameters() {
  double& g = gamma_.value(0, 0);
  if (std::abs(g) < kRevinEps) g = g < 0.0 ? -kRevinEps : kRevinEps;
}

std::vector<nn::Parameter*> EMForecaster::parameters() {
  std::vector<nn::Parameter*> out{&gamma_, &delta_};
  for (nn::Parameter* p : embed_.parameters()) out.push_back(p);
  for (Block& b : blocks_) {
    for (nn::Module* m : std::initializer_list<nn::Module*>{&b.temporal_fc1, &b.temporal_fc2, &b.patch_fc1, &b.patch_fc2}) {
      for (nn::Parameter* p : m->parameters()) out.push_back(p);
    }
  }
  for (nn::Parameter* p : norm_.parameters()) out.push_back(p);
  for (nn::Parameter* p : head_.parameters()) out.push_back(p);
  return out;
}

StbWeights EMForecaster::block_weights(std::size_t k) const {
  const Block& b = blocks_.at(k);
  return StbWeights{b.temporal_fc1.weight().value, b.temporal_fc2.weight().value, b.patch_fc1.weight().value,
                    b.patch_fc2.weight().value};
}

Matrix EMForecaster::to_temporal(const Matrix& u, Eigen::Index batch) const {
  const Eigen::Index N = n_patches_;
  const Eigen::Index D = u.cols();
  Matrix t(batch * D, N);
  for (Eigen::Index b = 0; b < batch; ++b) {
    t.middleRows(b * D, D) = u.middleRows(b * N, N).transpose();
  }
  return t;
}

Matrix EMForecaster::from_temporal(const Matrix& t, Eigen::Index batch) const {
  const Eigen::Index N = n_patches_;
  const Eigen::Index D = t.rows() / batch;
  Matrix u(batch * N, D);
  for (Eigen::Index b = 0; b < batch; ++b) {
    u.middleRows(b * N, N) = t.middleRows(b * D, D).transpose();
  }
  return u;
}

Matrix EMForecaster::patchify_batch(const Matrix& x_r) const {
  const Eigen::Index B = x_r.rows();
  const Eigen::Index L = x_r.cols();
  const auto P = static_cast<Eigen::Index>(cfg_.patch_len);
  const auto S = static_cast<Eigen::Index>(cfg_.patch_stride);
  Matrix patches = Matrix::Zero(B * n_patches_, P);
  for (Eigen::Index b = 0; b < B; ++b) {
    for (Eigen::Index n = 0; n < n_patches_; ++n) {
      const Eigen::Index start = n * S;
      const Eigen::Index len = std::min(P, L - start);
      patches.row(b * n_patches_ + n).head(len) = x_r.row(b).segment(start, len);
    }
  }
  return patches;
}

Matrix EMForecaster::predict_batch(const Matrix& x) const {
  const Eigen::Index B = x.rows();
  const double L = static_cast<double>(x.cols());
  const double g = gamma();
  const double d = delta();

  Eigen::VectorXd mu(B);
  Eigen::VectorXd scale(B);
  Matrix x_r(B, x.cols());
  for (Eigen::Index b = 0; b < B; ++b) {
    mu(b) = x.row(b).sum() / L;
    const double sd = std::sqrt((x.row(b).array() - mu(b)).square().sum() / (L - 1.0));
    scale(b) = sd > kRevinEps ? sd : kRevinEps;
    x_r.row(b) = (g * (x.row(b).array() - mu(b)) / scale(b) + d).matrix();
  }

  Matrix u = embed_.apply(patchify_batch(x_r));
  for (const Block& blk : blocks_) {
    const Matrix f = blk.temporal_fc2.apply(nn::relu(blk.temporal_fc1.apply(to_temporal(u, B))));
    u += from_temporal(f, B);
    u += blk.patch_fc2.apply(nn::relu(blk.patch_fc1.apply(u)));
  }
  const Matrix a = norm_.apply(nn::relu(u));
  const Eigen::Map<const Matrix> flat(a.data(), B, n_patches_ * a.cols());
  Matrix y = head_.apply(flat);
  for (Eigen::Index b = 0; b < B; ++b) {
    y.row(b) = (scale(b) * (y.row(b).array() - d) / g + mu(b)).matrix();
  }
  return y;
}

Matrix EMForecaster::forward(const Matrix& x) {
  require_lookback(x);
  const Eigen::Index B = x.rows();
  const double L = static_cast<double>(x.cols());
  const double g = gamma();
  const double d = delta();

  input_ = x;
  mu_.resize(B);
  sd_.resize(B);
  scale_.resize(B);
  standardized_.resize(B, x.cols());
  for (Eigen::Index b = 0; b < B; ++b) {
    mu_(b) = x.row(b).sum() / L;
    sd_(b) = std::sqrt((x.row(b).array() - mu_(b)).square().sum() / (L - 1.0));
    scale_(b) = sd_(b) > kRevinEps ? sd_(b) : kRevinEps;
    standardized_.row(b) = (x.row(b).array() - mu_(b)) / scale_(b);
  }
  const Matrix x_r = (g * standardized_.array() + d).matrix();

  Matrix u = embed_.forward(patchify_batch(x_r));
  for (Block& blk : blocks_) {
    const Matrix f = blk.temporal_fc2.forward(blk.temporal_act.forward(blk.temporal_fc1.forward(to_temporal(u, B))));
    u += from_temporal(f, B);
    u += blk.patch_fc2.forward(blk.patch_act.forward(blk.patch_fc1.forward(u)));
  }
  const Matrix a = norm_.forward(out_act_.forward(u));
  const Eigen::Map<const Matrix> flat(a.data(), B, n_patches_ * a.cols());
  head_out_ = head_.forward(flat);

  Matrix y(B, head_out_.cols());
  for (Eigen::Index b = 0; b < B; ++b) {
    y.row(b) = (scale_(b) * (head_out_.row(b).array() - d) / g + mu_(b)).matrix();
  }
  cached_ = true;
  return y;
}

Matrix EMForecaster::backward(const Matrix& grad_out) {
  if (!cached_) throw StateError("EMForecaster: backward called before forward");
  const Eigen::Index B = input_.rows();
  const Eigen::Index L = input_.cols();
  if (grad_out.rows() != B || grad_out.cols() != head_out_.cols()) {
    throw DimensionError("EMForecaster: upstream gradient " + nn::shape_of(grad_out) + " does not match output");
  }
  const double g = gamma();
  const double d = delta();

  // RevIN^-1: y = s (y_r - delta) / gamma + mu
  Matrix grad_yr(B, grad_out.cols());
  Eigen::VectorXd grad_mu(B);
  Eigen::VectorXd grad_scale(B);
  double grad_gamma = 0.0;
  double grad_delta = 0.0;
  for (Eigen::Index b = 0; b < B; ++b) {
    const auto go = grad_out.row(b).array();
    const auto centered = head_out_.row(b).array() - d;
    grad_yr.row(b) = (go * (scale_(b) / g)).matrix();
    grad_delta -= go.sum() * scale_(b) / g;
    grad_gamma -= (go * centered).sum() * scale_(b) / (g * g);
    grad_scale(b) = (go * centered).sum() / g;
    grad_mu(b) = go.sum();
  }

  const Matrix grad_flat = head_.backward(grad_yr);
  const Eigen::Map<const Matrix> grad_a(grad_flat.data(), B * n_patches_, grad_flat.cols() / n_patches_);
  Matrix grad_u = out_act_.backward(norm_.backward(grad_a));
  for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) {
    Block& blk = *it;
    Matrix grad_u1 = grad_u + blk.patch_fc1.backward(blk.patch_act.backward(blk.patch_fc2.backward(grad_u)));
    const Matrix grad_t =
        blk.temporal_fc1.backward(blk.temporal_act.backward(blk.temporal_fc2.backward(to_temporal(grad_u1, B))));
    grad_u = grad_u1 + from_temporal(grad_t, B);
  }
  const Matrix grad_patches = embed_.backward(grad_u);

  // Scatter patch gradients back onto the window; padded positions are dropped.
  const auto P = static_cast<Eigen::Index>(cfg_.patch_len);
  const auto S = static_cast<Eigen::Index>(cfg_.patch_stride);
  Matrix grad_xr = Matrix::Zero(B, L);
  for (Eigen::Index b = 0; b < B; ++b) {
    for (Eigen::Index n = 0; n < n_patches_; ++n) {
      const Eigen::Index start = n * S;
      const Eigen::Index len = std::min(P, L - start);
      grad_xr.row(b).segment(start, len) += grad_patches.row(b * n_patches_ + n).head(len);
    }
  }

  // RevIN: x_r = gamma * z + delta, z = (x - mu) / s
  grad_gamma += (grad_xr.array() * standardized_.array()).sum();
  grad_delta += grad_xr.sum();
  gamma_.grad(0, 0) += grad_gamma;
  delta_.grad(0, 0) += grad_delta;

  const double n = static_cast<double>(L);
  Matrix grad_x(B, L);
  for (Eigen::Index b = 0; b < B; ++b) {
    const Eigen::ArrayXd gz = (g * grad_xr.row(b)).array().transpose();
    const Eigen::ArrayXd z = standardized_.row(b).array().transpose();
    const double s = scale_(b);
    const double total_mu = grad_mu(b) - gz.sum() / s;
    const double total_s = grad_scale(b) - (gz * z).sum() / s;
    Eigen::ArrayXd gx = gz / s + total_mu / n;
    if (sd_(b) > kRevinEps) {
      gx += total_s * (input_.row(b).array().transpose() - mu_(b)) / ((n - 1.0) * sd_(b));
    }
    grad_x.row(b) = gx.transpose().matrix();
  }
  return grad_x;
}

}  // namespace emf::model
