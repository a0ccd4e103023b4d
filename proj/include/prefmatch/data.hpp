#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "prefmatch/rng.hpp"
#include "prefmatch/sparse.hpp"

namespace prefmatch {

struct InteractionRecord {
  std::string user_id;
  std::string item_id;
  std::optional<std::int64_t> timestamp;

  friend bool operator==(const InteractionRecord&, const InteractionRecord&) = default;
};

/// Fatal problem in an interaction file, tagged with its 1-based line.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

struct LoadResult {
  std::vector<InteractionRecord> records;
  std::size_t malformed = 0;
  std::vector<std::size_t> malformed_lines;
};

/// Parses `user_id,item_id[,timestamp]` lines. An optional header line and
/// `#` comments are skipped. Lines with an empty id or a non-integer
/// timestamp are counted as malformed and skipped; a line with fewer than
/// two columns is a ParseError, as is input with no records.
LoadResult load_interactions(std::istream& in, char delimiter = ',');
LoadResult load_interactions(const std::filesystem::path& path, char delimiter = ',');
void write_interactions(std::ostream& out, std::span<const InteractionRecord> records);

enum class Normalization { Symmetric, RowStochastic };

Normalization parse_normalization(const std::string& name);
std::string to_string(Normalization n);

/// Symmetric: A[i][j] / sqrt(deg_user(i) * deg_item(j)).
/// RowStochastic: A[i][j] / deg_user(i).
/// Throws if any row or column is empty.
SparseMatrix normalize_adjacency(const SparseMatrix& a, Normalization mode = Normalization::Symmetric);

struct FilterThresholds {
  std::size_t min_user_interactions = 5;
  std::size_t min_item_interactions = 10;
};

/// Drops users and items below the thresholds, repeating until stable.
/// Degrees count distinct partners, so duplicates never prop up a node.
/// Surviving records keep their input order (duplicates included).
std::vector<InteractionRecord> filter_to_fixpoint(std::span<const InteractionRecord> records,
                                                  FilterThresholds thresholds);

/// User-item interaction graph of one domain with dense indices assigned
/// by lexicographic id order.
class BipartiteGraph {
 public:
  std::size_t user_count() const noexcept { return user_ids_.size(); }
  std::size_t item_count() const noexcept { return item_ids_.size(); }
  std::size_t edge_count() const noexcept { return adjacency_.nnz(); }

  const std::vector<std::string>& user_ids() const noexcept { return user_ids_; }
  const std::vector<std::string>& item_ids() const noexcept { return item_ids_; }
  std::optional<std::size_t> user_index(const std::string& id) const;
  std::optional<std::size_t> item_index(const std::string& id) const;

  const SparseMatrix& adjacency() const noexcept { return adjacency_; }
  const SparseMatrix& normalized() const noexcept { return normalized_; }
  const SparseMatrix& normalized_transpose() const noexcept { return normalized_t_; }
  Normalization normalization() const noexcept { return normalization_; }

  /// Sorted item indices the user interacted with.
  std::span<const std::size_t> positives(std::size_t user) const;
  std::size_t user_degree(std::size_t user) const { return adjacency_.row_nnz(user); }
  const std::vector<std::size_t>& item_degrees() const noexcept { return item_degree_; }

  /// Builds directly from an edge list (indices already dense).
  static BipartiteGraph from_edges(std::vector<std::string> user_ids, std::vector<std::string> item_ids,
                                   const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                                   Normalization mode = Normalization::Symmetric);

 private:
  friend BipartiteGraph build_graph(std::span<const InteractionRecord>, FilterThresholds, Normalization);

  std::vector<std::string> user_ids_;
  std::vector<std::string> item_ids_;
  std::unordered_map<std::string, std::size_t> user_lookup_;
  std::unordered_map<std::string, std::size_t> item_lookup_;
  SparseMatrix adjacency_;
  SparseMatrix normalized_;
  SparseMatrix normalized_t_;
  std::vector<std::size_t> item_degree_;
  Normalization normalization_ = Normalization::Symmetric;
};

/// Deduplicates, filters to the threshold fixpoint and normalizes.
/// Throws if nothing survives filtering.
BipartiteGraph build_graph(std::span<const InteractionRecord> records, FilterThresholds thresholds = {},
                           Normalization mode = Normalization::Symmetric);

/// Uniform draw of `count` distinct items outside `sorted_positives` from
/// [0, item_count).
std::vector<std::size_t> sample_negatives(std::span<const std::size_t> sorted_positives, std::size_t item_count,
                                          std::size_t count, Rng& rng);
std::vector<std::size_t> sample_negatives(const BipartiteGraph& graph, std::size_t user, std::size_t count,
                                          Rng& rng);

// ---------------------------------------------------------------------------
// Cold-start split protocol

enum class Domain { Source, Target };
enum class SplitRole { Train, Validation, Test };
/// SourceToTarget: history in the source domain, ground truth in the target.
enum class Direction { SourceToTarget, TargetToSource };

std::string to_string(Domain d);
std::string to_string(SplitRole r);
constexpr Domain from_domain(Direction d) { return d == Direction::SourceToTarget ? Domain::Source : Domain::Target; }
constexpr Domain to_domain(Direction d) { return d == Direction::SourceToTarget ? Domain::Target : Domain::Source; }

/// One leave-one-out query for a cold-start user. Item indices refer to
/// the training graphs: `history` to the from-domain, `held_out` and
/// `exclusions` to the to-domain.
struct EvalInstance {
  std::string user_id;
  Direction direction = Direction::SourceToTarget;
  std::vector<std::size_t> history;
  std::size_t held_out = 0;
  std::vector<std::size_t> exclusions;
};

struct HeldOutEdge {
  std::string user_id;
  std::string item_id;
  Domain domain = Domain::Target;
  SplitRole role = SplitRole::Test;
};

struct SplitConfig {
  double overlap_fraction = 0.0;
  double eval_fraction = 0.2;
  std::uint64_t seed = 1;
  FilterThresholds thresholds;
  Normalization normalization = Normalization::Symmetric;
  /// Whether overlapping users outside the evaluation split keep their
  /// edges in training (as unlinked nodes unless linked by overlap_fraction).
  bool train_on_overlap_users = true;
};

struct DomainPair {
  BipartiteGraph source;
  BipartiteGraph target;
  /// Training-time identity links (source user, target user); empty under strict NOCDR.
  std::vector<std::pair<std::size_t, std::size_t>> linked_users;
  /// Every overlapping identity and its role.
  std::map<std::string, SplitRole> overlap_roles;
  std::vector<EvalInstance> validation;
  std::vector<EvalInstance> test;
  std::vector<HeldOutEdge> held_out;
  std::uint64_t seed = 0;
  /// Instances dropped because their ground-truth item lost all training edges.
  std::size_t dropped_instances = 0;

  const BipartiteGraph& graph(Domain d) const { return d == Domain::Source ? source : target; }
};

/// Filters both domains, finds users present in both, sends eval_fraction
/// of them (split evenly) to validation/test and removes all of their
/// edges from training. Each evaluation user yields one instance per
/// direction holding out their last interaction in the to-domain (by
/// timestamp, ties and missing timestamps by input order).
DomainPair make_splits(std::span<const InteractionRecord> source, std::span<const InteractionRecord> target,
                       const SplitConfig& config);

/// Suffix appended to unlinked overlapping ids in training graphs.
std::string domain_qualified(const std::string& id, Domain d);

}  // namespace prefmatch
