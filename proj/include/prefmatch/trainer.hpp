#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "prefmatch/config.hpp"
#include "prefmatch/metrics.hpp"
#include "prefmatch/model.hpp"

namespace prefmatch {

/// Loads the two CSVs or generates the synthetic pair, then splits it.
/// Generation and splitting use data.*_seed, falling back to train.seed.
DomainPair load_data(const Config& config);

struct EpochRecord {
  std::size_t epoch = 0;
  LossBreakdown loss;  // mean over the epoch's steps
  std::optional<double> val_mrr;
};

struct TrainResult {
  ModelParams params;  // best validation snapshot, or the final state
  std::vector<EpochRecord> log;
  std::optional<double> best_val_mrr;
  std::size_t best_epoch = 0;
  std::size_t steps = 0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Deterministic given config.train.seed. Each step draws fresh groups of
/// N users per domain, samples negatives, masks the matching term during
/// warmup and takes one Adam step.
TrainResult train(const DomainPair& pair, const Config& config, const EpochCallback& on_epoch = {});

/// Mean of the per-direction validation MRRs.
double validation_mrr(const DomainPair& pair, const ModelParams& params, const ModelConfig& config, std::uint64_t seed);

void write_losses(std::ostream& out, const std::vector<EpochRecord>& log);

}  // namespace prefmatch
