#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "prefmatch/data.hpp"
#include "prefmatch/identifier.hpp"

namespace prefmatch {

/// sigmoid(<a, b>) for two 1 x m rows.
double score(std::span<const double> a, std::span<const double> b);
/// Row-wise logits <users[i], items[i]>, n x 1.
Tensor pair_logits(const Tensor& users, const Tensor& items);

/// Labelled user-item pairs. `users`/`items` index rows of the latent
/// tensors handed to the loss; the loss is sum(weight * bce) / normalizer.
struct PairBatch {
  std::vector<std::size_t> users;
  std::vector<std::size_t> items;
  std::vector<double> labels;
  std::vector<double> weights;
  double normalizer = 0.0;

  std::size_t size() const { return users.size(); }
  void add(std::size_t user, std::size_t item, double label, double weight = 1.0);
  void validate(std::size_t user_rows, std::size_t item_rows) const;
};

struct EdgeRef {
  std::size_t user;
  std::size_t item;
};

/// Each positive edge with `negatives` uniform non-positive items of the
/// same user; plain mean over pairs.
PairBatch sampled_pairs(const BipartiteGraph& graph, std::span<const EdgeRef> edges, std::size_t negatives, Rng& rng);

/// Every (user, item) pair of the graph, mean over |U| * |V|.
PairBatch exact_pairs(const BipartiteGraph& graph);

/// All positives plus `negatives` draws per user, weighted so the loss is an
/// unbiased estimate of exact_pairs' loss.
PairBatch importance_pairs(const BipartiteGraph& graph, std::size_t negatives, Rng& rng);

/// Mean binary cross-entropy (from logits) over the batch.
Tensor reconstruction_loss(const Tensor& z_users, const Tensor& z_items, const PairBatch& batch);

/// One multiplier shared by every compression term, with per-term overrides.
struct VibWeights {
  double beta = 1.0;
  std::optional<double> user_source, item_source, user_target, item_target;
  std::optional<double> domain_source, domain_target;

  double user(Domain d) const { return (d == Domain::Source ? user_source : user_target).value_or(beta); }
  double item(Domain d) const { return (d == Domain::Source ? item_source : item_target).value_or(beta); }
  double domain(Domain d) const { return (d == Domain::Source ? domain_source : domain_target).value_or(beta); }
  void validate() const;
};

/// Inputs for one domain's user-specific term. Posteriors and samples cover
/// the rows the batch indexes.
struct UserVibInputs {
  const DiagGaussian& user_posterior;
  const Tensor& user_samples;
  const DiagGaussian& item_posterior;
  const Tensor& item_samples;
  const PairBatch& batch;
};

/// Reconstruction + beta_u KL(q(z1_u) || N(0, I)) + beta_v KL(q(z1_v) || N(0, I)).
Tensor user_vib_loss(const UserVibInputs& in, double beta_user, double beta_item);

/// One side of the cross-domain term: group users' level-2 samples scored
/// against the projected item latents of both domains (source items first),
/// plus beta2 KL(q(z2) || p(z2 | z1)).
struct DomainVibSide {
  const DiagGaussian& posterior;
  const DiagGaussian& prior;
  const Tensor& samples;
  const PairBatch& batch;
};

Tensor domain_vib_loss(const DomainVibSide& source, const DomainVibSide& target, const Tensor& joint_items,
                       double beta_source, double beta_target);

/// Pairs for one side of the cross-domain term. Group row n uses the
/// positives of user `group[n]`; items are indexed in the joint space, where
/// `offset` is where this domain's items start. Negatives come uniformly
/// from the joint space minus the positives.
PairBatch cross_domain_pairs(const BipartiteGraph& graph, std::span<const std::size_t> group, std::size_t offset,
                             std::size_t joint_items, std::size_t negatives, Rng& rng);
PairBatch exact_cross_domain_pairs(const BipartiteGraph& graph, std::span<const std::size_t> group,
                                   std::size_t offset, std::size_t joint_items);

/// Undefined tensors mark terms the active variant does not compute.
struct LossTerms {
  Tensor matching;
  Tensor domain;
  Tensor user_source;
  Tensor user_target;
};

struct LossBreakdown {
  double matching = 0.0;
  double domain = 0.0;
  double user_source = 0.0;
  double user_target = 0.0;
  double total = 0.0;
};

struct TotalLoss {
  Tensor objective;  // what gradients flow from
  LossBreakdown breakdown;
};

/// Reports every term and their sum; the objective drops the matching term
/// while epoch < warmup. Throws NumericError naming a non-finite component.
TotalLoss total_loss(const LossTerms& terms, std::size_t epoch, std::size_t warmup);

}  // namespace prefmatch
