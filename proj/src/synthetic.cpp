#include "prefmatch/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace prefmatch {
namespace {

std::string padded(const char* prefix, std::size_t i, std::size_t n) {
  const auto width = std::to_string(n > 0 ? n - 1 : 0).size();
  std::ostringstream os;
  os << prefix << std::setw(static_cast<int>(width)) << std::setfill('0') << i;
  return os.str();
}

}  // namespace

SyntheticDataset generate_synthetic(const SyntheticConfig& c) {
  if (c.clusters < 2) throw std::invalid_argument("synthetic: cluster count must be >= 2");
  if (!(c.affinity >= 0.0 && c.affinity <= 1.0)) throw std::invalid_argument("synthetic: affinity must lie in [0, 1]");
  if (!(c.noise >= 0.0 && c.noise <= 1.0)) throw std::invalid_argument("synthetic: noise must lie in [0, 1]");
  if (c.overlap_users > c.users_per_domain)
    throw std::invalid_argument("synthetic: overlap_users exceeds users_per_domain");
  if (c.users_per_domain == 0 || c.items_per_domain == 0) throw std::invalid_argument("synthetic: empty domain");

  SyntheticDataset out;
  out.cluster_weights.resize(c.clusters);
  for (std::size_t k = 0; k < c.clusters; ++k) out.cluster_weights[k] = std::pow(static_cast<double>(k + 1), -c.cluster_skew);
  const double wsum = std::accumulate(out.cluster_weights.begin(), out.cluster_weights.end(), 0.0);
  for (auto& w : out.cluster_weights) w /= wsum;

  const double items_per_cluster = static_cast<double>(c.items_per_domain) / static_cast<double>(c.clusters);
  const double expected_user_degree =
      static_cast<double>(c.items_per_domain) * c.noise + std::min(1.0, c.noise + c.affinity) * items_per_cluster -
      c.noise * items_per_cluster;
  const double w_min = *std::min_element(out.cluster_weights.begin(), out.cluster_weights.end());
  const double expected_min_item_degree =
      static_cast<double>(c.users_per_domain) * (c.noise + c.affinity * w_min);
  if (expected_user_degree < static_cast<double>(c.thresholds.min_user_interactions)) {
    std::ostringstream msg;
    msg << "synthetic: expected user degree " << expected_user_degree << " is below the filter threshold "
        << c.thresholds.min_user_interactions << "; raise items_per_domain, noise or affinity";
    throw std::invalid_argument(msg.str());
  }
  if (expected_min_item_degree < static_cast<double>(c.thresholds.min_item_interactions)) {
    std::ostringstream msg;
    msg << "synthetic: expected degree of the smallest-cluster items " << expected_min_item_degree
        << " is below the filter threshold " << c.thresholds.min_item_interactions
        << "; raise users_per_domain, noise or lower cluster_skew";
    throw std::invalid_argument(msg.str());
  }

  Rng rng = RngStreams(c.seed).stream("synthetic");
  std::discrete_distribution<std::size_t> pick_cluster(out.cluster_weights.begin(), out.cluster_weights.end());
  std::uniform_int_distribution<std::size_t> uniform_cluster(0, c.clusters - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // Shared people first, then each domain's own users.
  for (std::size_t i = 0; i < c.overlap_users; ++i) {
    const auto id = padded("p", i, c.users_per_domain);
    out.user_cluster[id] = pick_cluster(rng);
    out.overlap_users.push_back(id);
  }
  std::vector<std::string> users_s(out.overlap_users), users_t(out.overlap_users);
  for (std::size_t i = c.overlap_users; i < c.users_per_domain; ++i) {
    const auto s = padded("s", i, c.users_per_domain);
    out.user_cluster[s] = pick_cluster(rng);
    users_s.push_back(s);
  }
  for (std::size_t i = c.overlap_users; i < c.users_per_domain; ++i) {
    const auto t = padded("t", i, c.users_per_domain);
    out.user_cluster[t] = pick_cluster(rng);
    users_t.push_back(t);
  }

  auto fill_domain = [&](const char* item_prefix, const std::vector<std::string>& users,
                         std::map<std::string, std::size_t>& item_cluster, std::vector<InteractionRecord>& recs) {
    std::vector<std::string> items;
    for (std::size_t j = 0; j < c.items_per_domain; ++j) {
      items.push_back(padded(item_prefix, j, c.items_per_domain));
      item_cluster[items.back()] = uniform_cluster(rng);
    }
    for (const auto& u : users) {
      const auto cu = out.user_cluster.at(u);
      std::vector<std::size_t> chosen;
      for (std::size_t j = 0; j < items.size(); ++j) {
        const double p = std::min(1.0, c.noise + (item_cluster.at(items[j]) == cu ? c.affinity : 0.0));
        if (unit(rng) < p) chosen.push_back(j);
      }
      std::shuffle(chosen.begin(), chosen.end(), rng);
      std::int64_t ts = 1;
      for (auto j : chosen) recs.push_back({u, items[j], ts++});
    }
  };
  fill_domain("sv", users_s, out.source_item_cluster, out.source);
  fill_domain("tv", users_t, out.target_item_cluster, out.target);
  return out;
}

}  // namespace prefmatch
