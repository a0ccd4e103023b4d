#include "prefmatch/trainer.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>

#include "prefmatch/io.hpp"

namespace prefmatch {

DomainPair load_data(const Config& config) {
  const std::uint64_t seed = config.seed();
  SplitConfig split = config.data.split;
  split.seed = config.data.split_seed.value_or(seed);
  if (config.data.is_synthetic()) {
    SyntheticConfig syn = config.data.synthetic;
    syn.seed = config.data.synthetic_seed.value_or(seed);
    syn.thresholds = split.thresholds;
    const auto data = generate_synthetic(syn);
    return make_splits(data.source, data.target, split);
  }
  const auto source = load_interactions(config.data.source, config.data.delimiter);
  const auto target = load_interactions(config.data.target, config.data.delimiter);
  return make_splits(source.records, target.records, split);
}

double validation_mrr(const DomainPair& pair, const ModelParams& params, const ModelConfig& config, std::uint64_t seed) {
  const auto groups = by_direction(pair.validation);
  if (groups.empty()) throw std::invalid_argument("validation split is empty");
  double total = 0.0;
  for (const auto& g : groups) total += evaluate(pair, params, config, g, seed).mrr;
  return total / static_cast<double>(groups.size());
}

namespace {

std::vector<EdgeRef> edges_of(const BipartiteGraph& g) {
  std::vector<EdgeRef> out;
  out.reserve(g.edge_count());
  for (const auto& t : g.adjacency().triplets()) out.push_back({t.row, t.col});
  return out;
}

using Snapshot = std::vector<std::vector<double>>;

Snapshot snapshot(const std::vector<Tensor>& tensors) {
  Snapshot s;
  for (const auto& t : tensors) s.emplace_back(t.values().begin(), t.values().end());
  return s;
}

void restore(std::vector<Tensor>& tensors, const Snapshot& s) {
  for (std::size_t i = 0; i < tensors.size(); ++i) std::copy(s[i].begin(), s[i].end(), tensors[i].mutable_values().begin());
}

void accumulate(LossBreakdown& into, const LossBreakdown& b) {
  into.matching += b.matching;
  into.domain += b.domain;
  into.user_source += b.user_source;
  into.user_target += b.user_target;
  into.total += b.total;
}

}  // namespace

TrainResult train(const DomainPair& pair, const Config& config, const EpochCallback& on_epoch) {
  config.validate();
  const std::uint64_t seed = config.seed();
  const auto& tc = config.train;
  const RngStreams streams(seed);
  Rng init = streams.stream("init");
  Rng sampling = streams.stream("sampling");
  Rng negatives = streams.stream("negatives");
  Rng dropout_rng = streams.stream("dropout");
  NoiseSource noise(streams.stream("noise"));

  TrainResult result{ModelParams::init(config.model, pair, init), {}, std::nullopt, 0, 0};
  auto tensors = result.params.tensors();
  AdamState adam = AdamState::for_params(tensors, tc.adam);
  std::array<std::vector<EdgeRef>, 2> all_edges{edges_of(pair.source), edges_of(pair.target)};
  const bool can_validate = !pair.validation.empty() && config.eval.every > 0;
  Snapshot best;
  std::size_t stale = 0;

  for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
    for (auto& e : all_edges) std::shuffle(e.begin(), e.end(), sampling);
    std::size_t steps = 1;
    if (!tc.exact_reconstruction)
      for (const auto& e : all_edges) steps = std::max(steps, (e.size() + tc.batch_size - 1) / tc.batch_size);

    EpochRecord rec;
    rec.epoch = epoch;
    for (std::size_t s = 0; s < steps; ++s) {
      std::array<std::vector<EdgeRef>, 2> batch_edges;
      for (int d = 0; d < 2; ++d) {
        const auto& e = all_edges[d];
        const std::size_t batches = (e.size() + tc.batch_size - 1) / tc.batch_size;
        const std::size_t begin = (s % batches) * tc.batch_size;
        batch_edges[d].assign(e.begin() + begin, e.begin() + std::min(e.size(), begin + tc.batch_size));
      }
      const StepBatch batch =
          sample_step(pair, config.model, batch_edges, {tc.negatives, tc.exact_reconstruction}, sampling, negatives);
      for (auto& t : tensors) t.zero_grad();
      const ForwardContext ctx{{config.model.encoder.dropout, true, &dropout_rng}, &noise};
      const TotalLoss loss = total_loss(compute_losses(pair, result.params, config.model, tc.beta, batch, ctx), epoch,
                                        tc.warmup);
      backward(loss.objective);
      adam_step(tensors, adam);
      accumulate(rec.loss, loss.breakdown);
      ++result.steps;
    }
    const double n = static_cast<double>(steps);
    auto& m = rec.loss;
    m = {m.matching / n, m.domain / n, m.user_source / n, m.user_target / n, 0.0};
    m.total = m.matching + m.domain + m.user_source + m.user_target;

    const bool last = epoch + 1 == tc.epochs;
    bool stop = false;
    if (can_validate && ((epoch + 1) % config.eval.every == 0 || last)) {
      rec.val_mrr = validation_mrr(pair, result.params, config.model, seed);
      if (!result.best_val_mrr || *rec.val_mrr > *result.best_val_mrr) {
        result.best_val_mrr = rec.val_mrr;
        result.best_epoch = epoch;
        best = snapshot(tensors);
        stale = 0;
      } else if (++stale >= config.eval.patience && config.eval.patience > 0) {
        stop = true;
      }
    }
    result.log.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (stop) break;
  }
  if (!best.empty()) restore(tensors, best);
  return result;
}

void write_losses(std::ostream& out, const std::vector<EpochRecord>& log) {
  out << kLossesHeader << '\n';
  char buf[512];
  for (const auto& r : log) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,", r.epoch, r.loss.matching, r.loss.domain,
                  r.loss.user_source, r.loss.user_target, r.loss.total);
    out << buf;
    if (r.val_mrr) {
      std::snprintf(buf, sizeof buf, "%.17g", *r.val_mrr);
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace prefmatch
