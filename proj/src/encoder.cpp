#include "prefmatch/encoder.hpp"

#include <cmath>
#include <functional>

namespace prefmatch {

EncoderParams EncoderParams::init(std::size_t users, std::size_t items, const EncoderConfig& config, Rng& rng) {
  if (config.layers < 1) throw std::invalid_argument("encoder needs at least one layer");
  if (config.dim < 1) throw std::invalid_argument("encoder dim must be positive");
  const std::size_t d = config.dim;
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  EncoderParams p;
  p.user_embedding = uniform_param({users, d}, bound, rng);
  p.item_embedding = uniform_param({items, d}, bound, rng);
  p.w_user = uniform_param({d, d}, bound, rng);
  p.w_user_out = uniform_param({d, d}, bound, rng);
  p.w_item = uniform_param({d, d}, bound, rng);
  p.w_item_out = uniform_param({d, d}, bound, rng);
  for (std::size_t k = 0; k < config.layers; ++k) p.mixers.push_back(Dense::init(2 * d, d, rng));
  return p;
}

void EncoderParams::collect(std::vector<NamedParam>& out, const std::string& prefix) const {
  const auto g = ParamGroup::Encoder;
  out.push_back({prefix + "user_embedding", user_embedding, g});
  out.push_back({prefix + "item_embedding", item_embedding, g});
  out.push_back({prefix + "w_user", w_user, g});
  out.push_back({prefix + "w_user_out", w_user_out, g});
  out.push_back({prefix + "w_item", w_item, g});
  out.push_back({prefix + "w_item_out", w_item_out, g});
  for (std::size_t k = 0; k < mixers.size(); ++k) mixers[k].collect(out, prefix + "mixer" + std::to_string(k + 1), g);
}

Tensor aggregate_two_hop(const BipartiteGraph& graph, const Tensor& features, const Tensor& w_in,
                         const Tensor& w_out, Side side, double slope) {
  const SparseMatrix& inward = side == Side::User ? graph.normalized_transpose() : graph.normalized();
  const SparseMatrix& outward = side == Side::User ? graph.normalized() : graph.normalized_transpose();
  if (features.rows() != inward.cols())
    throw ShapeError("two_hop_aggregate", features.shape(), {inward.rows(), inward.cols()});
  if (features.cols() != w_in.rows()) throw ShapeError("two_hop_aggregate", features.shape(), w_in.shape());
  const auto hop = leaky_relu(spmm(inward, matmul(features, w_in)), slope);
  return matmul(spmm(outward, hop), w_out);
}

Tensor two_hop_aggregate(const BipartiteGraph& graph, const EncoderParams& params, Side side, double slope) {
  if (side == Side::User)
    return aggregate_two_hop(graph, params.user_embedding, params.w_user, params.w_user_out, side, slope);
  return aggregate_two_hop(graph, params.item_embedding, params.w_item, params.w_item_out, side, slope);
}

namespace {

Tensor mix(const Dense& layer, const Tensor& a, const Tensor& b, double slope) {
  return leaky_relu(layer(concat_cols({a, b})), slope);
}

std::vector<Tensor> run_layers(const EncoderParams& p, const EncoderConfig& config, const Tensor& initial,
                               const Tensor& aggregated, const std::function<Tensor(const Tensor&)>& reaggregate,
                               const DropoutContext& dropout) {
  std::vector<Tensor> outs;
  Tensor prev2 = initial;
  Tensor prev1 = dropout.apply(mix(p.mixers[0], aggregated, initial, config.leaky_slope));
  outs.push_back(prev1);
  for (std::size_t k = 1; k < p.mixers.size(); ++k) {
    const Tensor first = config.reaggregate_per_layer ? reaggregate(prev1) : prev1;
    Tensor cur = dropout.apply(mix(p.mixers[k], first, prev2, config.leaky_slope));
    prev2 = prev1;
    prev1 = cur;
    outs.push_back(cur);
  }
  return outs;
}

}  // namespace

EncodedNodes encode(const BipartiteGraph& graph, const EncoderParams& params, const EncoderConfig& config,
                    const DropoutContext& dropout) {
  if (params.layers() < 1) throw std::invalid_argument("encode: K must be >= 1");
  if (params.user_embedding.rows() != graph.user_count() || params.item_embedding.rows() != graph.item_count())
    throw ShapeError("encode", params.user_embedding.shape(), {graph.user_count(), graph.item_count()});
  const double slope = config.leaky_slope;
  EncodedNodes out;
  out.user_layers = run_layers(
      params, config, params.user_embedding, two_hop_aggregate(graph, params, Side::User, slope),
      [&](const Tensor& x) { return aggregate_two_hop(graph, x, params.w_user, params.w_user_out, Side::User, slope); },
      dropout);
  out.item_layers = run_layers(
      params, config, params.item_embedding, two_hop_aggregate(graph, params, Side::Item, slope),
      [&](const Tensor& x) { return aggregate_two_hop(graph, x, params.w_item, params.w_item_out, Side::Item, slope); },
      dropout);
  out.users = out.user_layers.size() == 1 ? out.user_layers[0] : concat_cols(out.user_layers);
  out.items = out.item_layers.size() == 1 ? out.item_layers[0] : concat_cols(out.item_layers);
  return out;
}

Tensor encode_cold_users(const BipartiteGraph& graph, const EncoderParams& params, const EncoderConfig& config,
                         std::span<const std::vector<std::size_t>> histories) {
  if (histories.empty()) throw std::invalid_argument("encode_cold_users: no users");
  const double slope = config.leaky_slope;
  const auto& degrees = graph.item_degrees();
  std::vector<Triplet> norm_entries, mean_entries;
  for (std::size_t u = 0; u < histories.size(); ++u) {
    const auto& h = histories[u];
    if (h.empty()) throw std::invalid_argument("encode_cold_users: empty history");
    const double du = static_cast<double>(h.size());
    for (auto j : h) {
      if (j >= graph.item_count()) throw std::out_of_range("encode_cold_users: history item out of range");
      const double w = graph.normalization() == Normalization::Symmetric
                           ? 1.0 / std::sqrt(du * static_cast<double>(degrees[j]))
                           : 1.0 / du;
      norm_entries.push_back({u, j, w});
      mean_entries.push_back({u, j, 1.0 / du});
    }
  }
  const auto cold_norm = SparseMatrix::from_triplets(histories.size(), graph.item_count(), std::move(norm_entries));
  const auto cold_mean = SparseMatrix::from_triplets(histories.size(), graph.item_count(), std::move(mean_entries));

  // Per-item mean of the initial embeddings of its users.
  std::vector<Triplet> item_mean_entries;
  for (const auto& e : graph.adjacency().triplets())
    item_mean_entries.push_back({e.col, e.row, 1.0 / static_cast<double>(degrees[e.col])});
  const auto item_mean = SparseMatrix::from_triplets(graph.item_count(), graph.user_count(), std::move(item_mean_entries));

  const Tensor user_emb = params.user_embedding.detach();
  const Tensor initial = spmm(cold_mean, spmm(item_mean, user_emb));
  auto cold_aggregate = [&](const Tensor& train_features) {
    const auto hop = leaky_relu(spmm(graph.normalized_transpose(), matmul(train_features, params.w_user.detach())), slope);
    return matmul(spmm(cold_norm, hop), params.w_user_out.detach());
  };

  // Training-user layer outputs are needed when later layers re-aggregate.
  std::vector<Tensor> train_layers;
  if (config.reaggregate_per_layer) train_layers = encode(graph, params, config).user_layers;

  std::vector<Tensor> outs;
  Tensor prev2 = initial;
  Tensor prev1 = mix(params.mixers[0], cold_aggregate(user_emb), initial, slope);
  outs.push_back(prev1);
  for (std::size_t k = 1; k < params.layers(); ++k) {
    const Tensor first = config.reaggregate_per_layer ? cold_aggregate(train_layers[k - 1].detach()) : prev1;
    Tensor cur = mix(params.mixers[k], first, prev2, slope);
    prev2 = prev1;
    prev1 = cur;
    outs.push_back(cur);
  }
  return (outs.size() == 1 ? outs[0] : concat_cols(outs)).detach();
}

}  // namespace prefmatch
