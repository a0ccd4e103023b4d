#pragma once

#include <array>
#include <string>
#include <vector>

#include "prefmatch/data.hpp"
#include "prefmatch/encoder.hpp"
#include "prefmatch/identifier.hpp"
#include "prefmatch/matching.hpp"
#include "prefmatch/objectives.hpp"

namespace prefmatch {

/// Full: every term. A: deterministic encoder with BCE on its outputs.
/// B: A plus the level-1 identifier and the user-specific terms.
/// C: full forward path trained on the matching term alone.
/// D: everything except the cross-domain term.
enum class Variant { Full, A, B, C, D };

Variant parse_variant(const std::string& name);
std::string to_string(Variant v);

struct ModelConfig {
  EncoderConfig encoder;
  std::size_t group_size = 128;
  std::size_t heads = 2;
  SigmaActivation sigma1 = SigmaActivation::Softmax;
  double sigma1_scale = 0.0;
  bool learned_prior = false;
  Variant variant = Variant::Full;

  std::size_t width() const { return encoder.layers * encoder.dim; }
  IdentifierConfig identifier() const;
  MatchingConfig matching() const;
  bool uses_user_terms() const { return variant == Variant::Full || variant == Variant::B || variant == Variant::D; }
  bool uses_domain_term() const { return variant == Variant::Full; }
  bool uses_matching() const { return variant == Variant::Full || variant == Variant::C || variant == Variant::D; }
  bool uses_level2() const { return uses_matching(); }
  void validate() const;
};

struct DomainParams {
  EncoderParams encoder;
  IdentifierParams identifier;
};

struct ModelParams {
  DomainParams source;
  DomainParams target;
  MatchingParams matching;
  Dense item_projection;  // K*d -> d, shared by both domains

  static ModelParams init(const ModelConfig& config, const DomainPair& pair, Rng& rng);
  const DomainParams& domain(Domain d) const { return d == Domain::Source ? source : target; }
  /// Every trainable tensor with a stable name, in a fixed order.
  std::vector<NamedParam> named() const;
  std::vector<Tensor> tensors() const;
};

/// Sampled inputs for one optimizer step. `user_pairs` index each domain's
/// graph directly; `cross_pairs` index group rows and the joint item space.
struct StepBatch {
  std::array<PairBatch, 2> user_pairs;
  std::array<std::vector<std::size_t>, 2> groups;
  std::array<PairBatch, 2> cross_pairs;
};

struct StepSampling {
  std::size_t negatives = 4;
  /// Enumerate every user-item pair instead of sampling negatives.
  bool exact = false;
};

/// `edges[d]` are this step's positive edges of domain d.
StepBatch sample_step(const DomainPair& pair, const ModelConfig& config, const std::array<std::vector<EdgeRef>, 2>& edges,
                      const StepSampling& sampling, Rng& group_rng, Rng& negative_rng);

struct ForwardContext {
  DropoutContext dropout;
  NoiseSource* noise = nullptr;  // null samples nothing and uses posterior means
};

/// Computes the loss terms the configured variant trains on.
LossTerms compute_losses(const DomainPair& pair, const ModelParams& params, const ModelConfig& config,
                         const VibWeights& beta, const StepBatch& batch, const ForwardContext& ctx);

/// Eval-mode scores of cold-start users against every to-domain item,
/// one row per history. Histories index from-domain training items.
Tensor score_cold_users(const DomainPair& pair, const ModelParams& params, const ModelConfig& config,
                        Direction direction, std::span<const std::vector<std::size_t>> histories);

}  // namespace prefmatch
