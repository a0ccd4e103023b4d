#pragma once

#include <span>
#include <string>
#include <vector>

#include "prefmatch/data.hpp"
#include "prefmatch/layers.hpp"

namespace prefmatch {

enum class Side { User, Item };

struct EncoderConfig {
  std::size_t layers = 3;
  std::size_t dim = 16;
  double dropout = 0.3;
  /// Re-run the two-hop aggregation inside every layer k >= 2 instead of
  /// mixing the previous two layer outputs directly.
  bool reaggregate_per_layer = false;
  double leaky_slope = 0.01;
};

/// Per-domain encoder weights. The layer mixers are shared by users and items.
struct EncoderParams {
  Tensor user_embedding;  // |U| x d
  Tensor item_embedding;  // |V| x d
  Tensor w_user, w_user_out;
  Tensor w_item, w_item_out;
  std::vector<Dense> mixers;  // layer k maps 2d -> d

  static EncoderParams init(std::size_t users, std::size_t items, const EncoderConfig& config, Rng& rng);
  std::size_t dim() const { return user_embedding.cols(); }
  std::size_t layers() const { return mixers.size(); }
  void collect(std::vector<NamedParam>& out, const std::string& prefix) const;
};

struct EncodedNodes {
  Tensor users;  // |U| x K*d
  Tensor items;  // |V| x K*d
  std::vector<Tensor> user_layers;
  std::vector<Tensor> item_layers;
};

/// Users: A_bar * act(A_bar^T X W_in) * W_out. Items swap A_bar and A_bar^T.
Tensor aggregate_two_hop(const BipartiteGraph& graph, const Tensor& features, const Tensor& w_in,
                         const Tensor& w_out, Side side, double slope);

Tensor two_hop_aggregate(const BipartiteGraph& graph, const EncoderParams& params, Side side, double slope = 0.01);

/// Layer 1 mixes the two-hop aggregate with the initial embedding; layer
/// k >= 2 mixes the previous two layer outputs (layer 0 being the initial
/// embedding). The output concatenates layers 1..K.
EncodedNodes encode(const BipartiteGraph& graph, const EncoderParams& params, const EncoderConfig& config,
                    const DropoutContext& dropout = {});

/// Eval-mode encoding of users that are not nodes of `graph`, from their
/// item histories (indices into `graph`). A cold user's initial embedding
/// is the average, over its history items, of the mean embedding of each
/// item's training users.
Tensor encode_cold_users(const BipartiteGraph& graph, const EncoderParams& params, const EncoderConfig& config,
                         std::span<const std::vector<std::size_t>> histories);

}  // namespace prefmatch
