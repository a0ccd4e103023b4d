#include "prefmatch/gradcheck.hpp"

#include <algorithm>
#include <numeric>
#include <set>

namespace prefmatch {

namespace {

BipartiteGraph toy_graph(std::size_t users, std::size_t items, const std::string& tag, Rng& rng) {
  std::set<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t v = 0; v < items; ++v) edges.emplace(v % users, v);
  std::uniform_int_distribution<std::size_t> pick(0, items - 1);
  for (std::size_t u = 0; u < users; ++u) edges.emplace(u, pick(rng));
  // Keep every user short of the full item set so negatives exist.
  std::vector<std::pair<std::size_t, std::size_t>> kept;
  std::vector<std::size_t> degree(users, 0);
  for (auto e : edges)
    if (degree[e.first] + 1 < items) {
      kept.push_back(e);
      ++degree[e.first];
    }
  std::vector<std::string> uids, iids;
  for (std::size_t u = 0; u < users; ++u) uids.push_back(tag + "u" + std::to_string(u));
  for (std::size_t v = 0; v < items; ++v) iids.push_back(tag + "i" + std::to_string(v));
  return BipartiteGraph::from_edges(std::move(uids), std::move(iids), kept);
}

}  // namespace

ToyProblem make_toy_problem(std::uint64_t seed, std::size_t users, std::size_t items) {
  if (users < 1 || items < 2) throw std::invalid_argument("toy problem needs >= 1 user and >= 2 items");
  Rng rng = RngStreams(seed).stream("synthetic");
  auto source = toy_graph(users, items, "s", rng);
  auto target = toy_graph(users, items, "t", rng);
  ToyProblem t{DomainPair{std::move(source), std::move(target), {}, {}, {}, {}, {}, seed, 0}, {}};
  t.config.encoder.layers = 2;
  t.config.encoder.dim = 4;
  t.config.encoder.dropout = 0.0;
  t.config.group_size = std::min<std::size_t>(4, users);
  t.config.heads = 2;
  return t;
}

ModelGradCheck gradcheck_model(const ToyProblem& toy, std::uint64_t seed, double step) {
  const RngStreams streams(seed);
  Rng init = streams.stream("init");
  Rng sampling = streams.stream("sampling");
  Rng negatives = streams.stream("negatives");
  const ModelParams params = ModelParams::init(toy.config, toy.pair, init);

  std::array<std::vector<EdgeRef>, 2> edges;
  for (int d = 0; d < 2; ++d)
    for (const auto& t : toy.pair.graph(d == 0 ? Domain::Source : Domain::Target).adjacency().triplets())
      edges[d].push_back({t.row, t.col});
  const StepBatch batch = sample_step(toy.pair, toy.config, edges, {2, false}, sampling, negatives);

  NoiseSource noise(streams.stream("noise"));
  noise.freeze();
  const VibWeights beta;
  auto loss_fn = [&] {
    noise.rewind();
    const ForwardContext ctx{{}, &noise};
    return total_loss(compute_losses(toy.pair, params, toy.config, beta, batch, ctx), 1, 0).objective;
  };

  auto named = params.named();
  std::vector<Tensor> tensors;
  for (auto& p : named) tensors.push_back(p.tensor);
  ModelGradCheck out;
  out.result = grad_check(loss_fn, tensors, step);
  out.worst_name = named[out.result.worst_param].name;
  out.tensors = tensors.size();
  out.entries = std::accumulate(tensors.begin(), tensors.end(), std::size_t{0},
                                [](std::size_t n, const Tensor& t) { return n + t.numel(); });
  return out;
}

}  // namespace prefmatch
