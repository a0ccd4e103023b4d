#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "prefmatch/model.hpp"

namespace prefmatch {

inline constexpr std::array<std::size_t, 3> kCutoffs{10, 20, 30};

/// Leave-one-out full-ranking metrics; MRR is mean reciprocal rank.
struct RankingReport {
  std::string domain;
  double mrr = 0.0;
  std::map<std::size_t, double> ndcg;
  std::map<std::size_t, double> hr;
  std::size_t users = 0;
  std::uint64_t seed = 0;

  /// Range and monotonicity checks; throws std::logic_error on violation.
  void validate() const;
};

/// 1-based rank of `truth` among all items not in `exclusions`, scores
/// descending, ties broken by ascending item index.
std::size_t rank_of(std::span<const double> scores, std::size_t truth, std::span<const std::size_t> exclusions = {});

/// Averages the per-user contributions of a list of ranks.
RankingReport report_from_ranks(std::span<const std::size_t> ranks, std::string domain, std::uint64_t seed);

/// Scores each instance's cold user from its history and ranks the held-out
/// to-domain item. Every instance must share `direction`.
RankingReport evaluate(const DomainPair& pair, const ModelParams& params, const ModelConfig& config,
                       std::span<const EvalInstance> instances, std::uint64_t seed);

/// Same protocol, ranking items by training degree in the to-domain.
RankingReport popularity_baseline(const DomainPair& pair, std::span<const EvalInstance> instances, std::uint64_t seed);

/// Instances grouped by direction, source-to-target first; empty groups omitted.
std::vector<std::vector<EvalInstance>> by_direction(std::span<const EvalInstance> instances);

}  // namespace prefmatch
