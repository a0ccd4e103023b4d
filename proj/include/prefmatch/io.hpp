#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "prefmatch/config.hpp"
#include "prefmatch/metrics.hpp"
#include "prefmatch/model.hpp"

namespace prefmatch {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// model.bin: "PMCDRBIN", u32 version, u64 length + config JSON, u64 tensor
/// count, then per tensor: u64 name length + name, u64 rank, u64 dims,
/// f64 values. Integers and doubles are little-endian.
void save_model(const std::string& path, const Config& config, const ModelParams& params);
void write_model(std::ostream& out, const Config& config, const ModelParams& params);

struct SavedModel {
  Config config;
  std::vector<std::string> names;
  std::vector<Shape> shapes;
  std::vector<std::vector<double>> values;

  /// Copies the stored values into `params`; names and shapes must match.
  void restore_into(ModelParams& params) const;
};

SavedModel load_model(const std::string& path);
SavedModel read_model(std::istream& in);

nlohmann::json to_json(const RankingReport& report);
void write_metrics(const std::string& path, const RankingReport& report);

/// Split manifest: seed, overlap_users, val_users, test_users, held_out_edges.
nlohmann::json split_manifest(const DomainPair& pair);
void write_json(const std::string& path, const nlohmann::json& j);

inline constexpr const char* kLossesHeader = "epoch,L_m,L_d,L_u_source,L_u_target,total,val_mrr";

}  // namespace prefmatch
