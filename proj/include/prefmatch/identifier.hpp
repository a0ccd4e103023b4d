#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "prefmatch/encoder.hpp"
#include "prefmatch/layers.hpp"

namespace prefmatch {

/// Every scale produced by a posterior or predictive head is at least this.
inline constexpr double kScaleFloor = 1e-8;

/// Factorized Gaussian: row i holds one distribution over `cols()` dims.
struct DiagGaussian {
  Tensor mean;
  Tensor scale;

  std::size_t rows() const { return mean.rows(); }
  std::size_t cols() const { return mean.cols(); }
  /// Throws unless shapes agree and every scale is >= kScaleFloor.
  void validate() const;
  static DiagGaussian standard(std::size_t rows, std::size_t cols);
};

enum class SigmaActivation { Softmax, Softplus };

SigmaActivation parse_sigma_activation(const std::string& name);
std::string to_string(SigmaActivation a);

struct IdentifierConfig {
  std::size_t width = 48;       // K*d
  std::size_t latent_dim = 16;  // d
  SigmaActivation sigma1 = SigmaActivation::Softmax;
  /// Multiplier applied to the softmax scales; 0 selects `width`, which
  /// makes the mean scale 1.
  double sigma1_scale = 0.0;
  bool learned_prior = false;
  double leaky_slope = 0.01;

  double effective_sigma1_scale() const { return sigma1_scale > 0.0 ? sigma1_scale : static_cast<double>(width); }
};

struct IdentifierParams {
  Dense user_mu, user_sigma;      // K*d -> K*d
  Dense item_mu, item_sigma;      // K*d -> K*d
  Dense domain_mu, domain_sigma;  // K*d -> d
  std::optional<Dense> prior_mu, prior_sigma;

  static IdentifierParams init(const IdentifierConfig& config, Rng& rng);
  void collect(std::vector<NamedParam>& out, const std::string& prefix) const;
};

/// q(z1 | h): LeakyReLU mean head; scale head is a softmax over features
/// times the configured multiplier (or softplus), floored.
DiagGaussian infer_level1(const Tensor& h, const IdentifierParams& params, Side side, const IdentifierConfig& config);

/// q(z2 | z1): ReLU mean head, softplus scale head, floored.
DiagGaussian infer_level2(const Tensor& z1, const IdentifierParams& params);

/// p(z2 | z1): standard normal unless a learned prior head is configured.
DiagGaussian conditional_prior(const Tensor& z1, const IdentifierParams& params, std::size_t latent_dim);

/// Standard-normal noise for reparameterized sampling. A frozen source
/// records its draws on the first pass and replays them after rewind(),
/// so repeated forward passes see identical noise.
class NoiseSource {
 public:
  explicit NoiseSource(Rng rng) : rng_(std::move(rng)) {}

  Tensor standard_normal(const Shape& shape);
  void freeze() { frozen_ = true; }
  void rewind() { cursor_ = 0; }
  bool frozen() const noexcept { return frozen_; }

 private:
  Rng rng_;
  bool frozen_ = false;
  std::vector<std::vector<double>> tape_;
  std::size_t cursor_ = 0;
};

/// z = mean + scale * eps with eps ~ N(0, I) held constant; returns the mean
/// when `deterministic` is set.
Tensor sample(const DiagGaussian& g, NoiseSource& noise, bool deterministic = false);

struct UserGroup {
  std::vector<std::size_t> indices;
  Tensor rows;
};

/// N distinct indices from [0, population), uniformly.
std::vector<std::size_t> sample_group_indices(std::size_t population, std::size_t n, Rng& rng);
UserGroup sample_group(const EncodedNodes& encoded, std::size_t n, Rng& rng);

}  // namespace prefmatch
