#include "prefmatch/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace prefmatch {

void RankingReport::validate() const {
  auto in_unit = [](double x) { return x >= 0.0 && x <= 1.0; };
  if (!in_unit(mrr)) throw std::logic_error("report: MRR outside [0, 1]");
  double prev_hr = 0.0, prev_ndcg = 0.0;
  for (auto k : kCutoffs) {
    const double h = hr.at(k), n = ndcg.at(k);
    if (!in_unit(h) || !in_unit(n)) throw std::logic_error("report: metric outside [0, 1] at K = " + std::to_string(k));
    if (h < prev_hr || n < prev_ndcg) throw std::logic_error("report: metric decreases in K");
    if (n > h + 1e-12) throw std::logic_error("report: NDCG exceeds HR at K = " + std::to_string(k));
    prev_hr = h;
    prev_ndcg = n;
  }
}

std::size_t rank_of(std::span<const double> scores, std::size_t truth, std::span<const std::size_t> exclusions) {
  if (truth >= scores.size()) throw std::out_of_range("rank_of: ground-truth item out of range");
  std::vector<bool> skip(scores.size(), false);
  for (auto e : exclusions)
    if (e < scores.size() && e != truth) skip[e] = true;
  std::vector<std::size_t> order;
  order.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (!skip[i]) order.push_back(i);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] != scores[b] ? scores[a] > scores[b] : a < b;
  });
  return static_cast<std::size_t>(std::find(order.begin(), order.end(), truth) - order.begin()) + 1;
}

RankingReport report_from_ranks(std::span<const std::size_t> ranks, std::string domain, std::uint64_t seed) {
  if (ranks.empty()) throw std::invalid_argument("evaluate: no instances");
  RankingReport r;
  r.domain = std::move(domain);
  r.seed = seed;
  r.users = ranks.size();
  for (auto k : kCutoffs) r.hr[k] = r.ndcg[k] = 0.0;
  for (auto rank : ranks) {
    if (rank < 1) throw std::invalid_argument("evaluate: ranks are 1-based");
    r.mrr += 1.0 / static_cast<double>(rank);
    for (auto k : kCutoffs)
      if (rank <= k) {
        r.hr[k] += 1.0;
        r.ndcg[k] += 1.0 / std::log2(1.0 + static_cast<double>(rank));
      }
  }
  const double n = static_cast<double>(ranks.size());
  r.mrr /= n;
  for (auto k : kCutoffs) {
    r.hr[k] /= n;
    r.ndcg[k] /= n;
  }
  return r;
}

namespace {

Direction common_direction(std::span<const EvalInstance> instances) {
  if (instances.empty()) throw std::invalid_argument("evaluate: no instances");
  const Direction d = instances.front().direction;
  for (const auto& inst : instances)
    if (inst.direction != d) throw std::invalid_argument("evaluate: instances mix directions");
  return d;
}

}  // namespace

RankingReport evaluate(const DomainPair& pair, const ModelParams& params, const ModelConfig& config,
                       std::span<const EvalInstance> instances, std::uint64_t seed) {
  const Direction dir = common_direction(instances);
  std::vector<std::vector<std::size_t>> histories;
  histories.reserve(instances.size());
  for (const auto& inst : instances) histories.push_back(inst.history);
  const Tensor scores = score_cold_users(pair, params, config, dir, histories);
  const std::size_t items = scores.cols();
  std::vector<std::size_t> ranks;
  ranks.reserve(instances.size());
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const std::span<const double> row(scores.values().data() + i * items, items);
    ranks.push_back(rank_of(row, instances[i].held_out, instances[i].exclusions));
  }
  return report_from_ranks(ranks, to_string(to_domain(dir)), seed);
}

RankingReport popularity_baseline(const DomainPair& pair, std::span<const EvalInstance> instances, std::uint64_t seed) {
  const Direction dir = common_direction(instances);
  const auto& degrees = pair.graph(to_domain(dir)).item_degrees();
  const std::vector<double> scores(degrees.begin(), degrees.end());
  std::vector<std::size_t> ranks;
  ranks.reserve(instances.size());
  for (const auto& inst : instances) ranks.push_back(rank_of(scores, inst.held_out, inst.exclusions));
  return report_from_ranks(ranks, to_string(to_domain(dir)), seed);
}

std::vector<std::vector<EvalInstance>> by_direction(std::span<const EvalInstance> instances) {
  std::vector<std::vector<EvalInstance>> out(2);
  for (const auto& inst : instances) out[inst.direction == Direction::SourceToTarget ? 0 : 1].push_back(inst);
  std::erase_if(out, [](const auto& v) { return v.empty(); });
  return out;
}

}  // namespace prefmatch
