#pragma once

#include <string>
#include <vector>

#include "prefmatch/identifier.hpp"

namespace prefmatch {

enum class View { Source, Target };

struct MatchingConfig {
  std::size_t width = 48;       // K*d
  std::size_t latent_dim = 16;  // d
  std::size_t heads = 2;
  double attention_dropout = 0.0;
};

struct AttentionHead {
  Tensor query, key, value;  // K*d x K*d/heads, no bias
};

struct MatchingParams {
  Dense driven;  // 2d -> K*d
  std::vector<AttentionHead> heads;
  Tensor attention_out;  // K*d x K*d
  Dense source_mu, source_sigma;
  Dense target_mu, target_sigma;

  static MatchingParams init(const MatchingConfig& config, Rng& rng);
  std::size_t width() const { return driven.out(); }
  void collect(std::vector<NamedParam>& out, const std::string& prefix) const;
};

struct InvariantPreference {
  DiagGaussian source;
  DiagGaussian target;
};

/// Multi-head scaled dot-product self-attention over the rows of x, with a
/// residual connection. Rows are an unordered set; no positional encoding.
Tensor self_attention(const Tensor& x, const MatchingParams& params, const DropoutContext& dropout = {});

/// The source view concatenates (z2_src | z2_tgt), the target view reverses
/// it; both go through the shared affine map and self-attention.
Tensor driven_representation(const Tensor& z2_source, const Tensor& z2_target, View view, const MatchingParams& params,
                             const DropoutContext& dropout = {});

/// ReLU mean head and floored softplus scale head, one pair per view.
DiagGaussian predictive_distribution(const Tensor& driven, View view, const MatchingParams& params);

InvariantPreference invariant_preference(const Tensor& z2_source, const Tensor& z2_target,
                                         const MatchingParams& params, const DropoutContext& dropout = {});

/// KL(p || q) for diagonal Gaussians, summed over dims and averaged over rows.
Tensor gaussian_kl(const DiagGaussian& p, const DiagGaussian& q);

/// 0.5 * (KL(source || target) + KL(target || source)).
Tensor matching_loss(const InvariantPreference& inv);

}  // namespace prefmatch
