#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "prefmatch/data.hpp"

namespace prefmatch {

/// Two-domain clustered interaction generator. Users carry one preference
/// cluster that holds in both domains; items get a cluster per domain.
/// A user interacts with an item with probability
/// noise + affinity * [clusters match], clipped to 1.
struct SyntheticConfig {
  std::size_t users_per_domain = 500;
  std::size_t items_per_domain = 200;
  std::size_t clusters = 8;
  /// How many people appear in both domains (ids "p<i>").
  std::size_t overlap_users = 500;
  double affinity = 0.6;
  double noise = 0.02;
  /// User cluster weights follow (c + 1)^-skew; 0 is uniform.
  double cluster_skew = 0.0;
  std::uint64_t seed = 1;
  /// Only used to reject configurations whose expected degrees would not
  /// survive filtering.
  FilterThresholds thresholds;
};

struct SyntheticDataset {
  std::vector<InteractionRecord> source;
  std::vector<InteractionRecord> target;
  std::map<std::string, std::size_t> user_cluster;
  std::map<std::string, std::size_t> source_item_cluster;
  std::map<std::string, std::size_t> target_item_cluster;
  std::vector<std::string> overlap_users;
  std::vector<double> cluster_weights;
};

SyntheticDataset generate_synthetic(const SyntheticConfig& config);

}  // namespace prefmatch
