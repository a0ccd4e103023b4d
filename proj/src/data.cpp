#include "prefmatch/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_set>

namespace prefmatch {
namespace {

std::vector<std::string_view> split_fields(std::string_view line, char delimiter) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delimiter, start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

using EdgeKey = std::pair<std::string, std::string>;

}  // namespace

LoadResult load_interactions(std::istream& in, char delimiter) {
  LoadResult result;
  std::string raw;
  std::size_t line_no = 0;
  bool seen_content = false;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto fields = split_fields(line, delimiter);
    if (!seen_content) {
      seen_content = true;
      if (trim(fields[0]) == "user_id") continue;
    }
    if (fields.size() < 2) throw ParseError(line_no, "missing required column item_id");
    const auto user = trim(fields[0]);
    const auto item = trim(fields[1]);
    bool ok = !user.empty() && !item.empty() && fields.size() <= 3;
    std::optional<std::int64_t> ts;
    if (ok && fields.size() == 3) {
      const auto t = trim(fields[2]);
      if (!t.empty()) {
        std::int64_t v = 0;
        const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
        if (ec != std::errc() || ptr != t.data() + t.size())
          ok = false;
        else
          ts = v;
      }
    }
    if (!ok) {
      ++result.malformed;
      result.malformed_lines.push_back(line_no);
      continue;
    }
    result.records.push_back({std::string(user), std::string(item), ts});
  }
  if (result.records.empty()) throw ParseError(line_no, "no interaction records in input");
  return result;
}

LoadResult load_interactions(const std::filesystem::path& path, char delimiter) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open interaction file " + path.string());
  return load_interactions(in, delimiter);
}

void write_interactions(std::ostream& out, std::span<const InteractionRecord> records) {
  out << "user_id,item_id,timestamp\n";
  for (const auto& r : records) {
    out << r.user_id << ',' << r.item_id;
    if (r.timestamp) out << ',' << *r.timestamp;
    out << '\n';
  }
}

Normalization parse_normalization(const std::string& name) {
  if (name == "symmetric") return Normalization::Symmetric;
  if (name == "row") return Normalization::RowStochastic;
  throw std::invalid_argument("unknown normalization '" + name + "' (expected symmetric or row)");
}

std::string to_string(Normalization n) { return n == Normalization::Symmetric ? "symmetric" : "row"; }

SparseMatrix normalize_adjacency(const SparseMatrix& a, Normalization mode) {
  const auto col_deg = a.col_counts();
  for (std::size_t r = 0; r < a.rows(); ++r)
    if (a.row_nnz(r) == 0) throw std::invalid_argument("normalize_adjacency: user " + std::to_string(r) + " has no edges");
  for (std::size_t c = 0; c < a.cols(); ++c)
    if (col_deg[c] == 0) throw std::invalid_argument("normalize_adjacency: item " + std::to_string(c) + " has no edges");
  auto entries = a.triplets();
  for (auto& e : entries) {
    const double du = static_cast<double>(a.row_nnz(e.row));
    const double dv = static_cast<double>(col_deg[e.col]);
    e.value = mode == Normalization::Symmetric ? e.value / std::sqrt(du * dv) : e.value / du;
  }
  return SparseMatrix::from_triplets(a.rows(), a.cols(), std::move(entries));
}

std::vector<InteractionRecord> filter_to_fixpoint(std::span<const InteractionRecord> records,
                                                  FilterThresholds thresholds) {
  if (thresholds.min_user_interactions < 1 || thresholds.min_item_interactions < 1)
    throw std::invalid_argument("filter thresholds must be >= 1");
  std::set<EdgeKey> edges;
  for (const auto& r : records) edges.emplace(r.user_id, r.item_id);
  std::unordered_set<std::string> dead_users, dead_items;
  bool changed = true;
  while (changed) {
    changed = false;
    std::unordered_map<std::string, std::size_t> udeg, ideg;
    for (const auto& [u, i] : edges) {
      ++udeg[u];
      ++ideg[i];
    }
    for (auto it = edges.begin(); it != edges.end();) {
      if (udeg[it->first] < thresholds.min_user_interactions || ideg[it->second] < thresholds.min_item_interactions) {
        it = edges.erase(it);
        changed = true;
      } else {
        ++it;
      }
    }
  }
  std::vector<InteractionRecord> out;
  for (const auto& r : records)
    if (edges.count({r.user_id, r.item_id})) out.push_back(r);
  return out;
}

std::optional<std::size_t> BipartiteGraph::user_index(const std::string& id) const {
  auto it = user_lookup_.find(id);
  if (it == user_lookup_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> BipartiteGraph::item_index(const std::string& id) const {
  auto it = item_lookup_.find(id);
  if (it == item_lookup_.end()) return std::nullopt;
  return it->second;
}

std::span<const std::size_t> BipartiteGraph::positives(std::size_t user) const {
  const auto& rp = adjacency_.row_offsets();
  return std::span<const std::size_t>(adjacency_.col_indices()).subspan(rp.at(user), rp.at(user + 1) - rp[user]);
}

BipartiteGraph BipartiteGraph::from_edges(std::vector<std::string> user_ids, std::vector<std::string> item_ids,
                                          const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                                          Normalization mode) {
  BipartiteGraph g;
  g.user_ids_ = std::move(user_ids);
  g.item_ids_ = std::move(item_ids);
  for (std::size_t i = 0; i < g.user_ids_.size(); ++i) g.user_lookup_.emplace(g.user_ids_[i], i);
  for (std::size_t i = 0; i < g.item_ids_.size(); ++i) g.item_lookup_.emplace(g.item_ids_[i], i);
  std::vector<Triplet> t;
  t.reserve(edges.size());
  for (auto [u, v] : edges) t.push_back({u, v, 1.0});
  g.adjacency_ = SparseMatrix::from_triplets(g.user_ids_.size(), g.item_ids_.size(), std::move(t));
  g.normalization_ = mode;
  g.normalized_ = normalize_adjacency(g.adjacency_, mode);
  g.normalized_t_ = g.normalized_.transpose();
  g.item_degree_ = g.adjacency_.col_counts();
  return g;
}

BipartiteGraph build_graph(std::span<const InteractionRecord> records, FilterThresholds thresholds,
                           Normalization mode) {
  const auto kept = filter_to_fixpoint(records, thresholds);
  if (kept.empty()) throw std::runtime_error("graph is empty after filtering");
  std::set<std::string> users, items;
  std::set<EdgeKey> edge_ids;
  for (const auto& r : kept) {
    users.insert(r.user_id);
    items.insert(r.item_id);
    edge_ids.emplace(r.user_id, r.item_id);
  }
  std::vector<std::string> user_ids(users.begin(), users.end());
  std::vector<std::string> item_ids(items.begin(), items.end());
  std::unordered_map<std::string, std::size_t> ui, ii;
  for (std::size_t i = 0; i < user_ids.size(); ++i) ui.emplace(user_ids[i], i);
  for (std::size_t i = 0; i < item_ids.size(); ++i) ii.emplace(item_ids[i], i);
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  edges.reserve(edge_ids.size());
  for (const auto& [u, i] : edge_ids) edges.emplace_back(ui.at(u), ii.at(i));
  return BipartiteGraph::from_edges(std::move(user_ids), std::move(item_ids), edges, mode);
}

std::vector<std::size_t> sample_negatives(std::span<const std::size_t> sorted_positives, std::size_t item_count,
                                          std::size_t count, Rng& rng) {
  if (count < 1) throw std::invalid_argument("sample_negatives: count must be >= 1");
  if (sorted_positives.size() >= item_count)
    throw std::invalid_argument("sample_negatives: positives cover every item");
  const std::size_t available = item_count - sorted_positives.size();
  if (count > available)
    throw std::invalid_argument("sample_negatives: requested " + std::to_string(count) + " negatives but only " +
                                std::to_string(available) + " exist");
  auto is_positive = [&](std::size_t v) {
    return std::binary_search(sorted_positives.begin(), sorted_positives.end(), v);
  };
  std::vector<std::size_t> out;
  out.reserve(count);
  if (2 * count > available) {
    std::vector<std::size_t> pool;
    pool.reserve(available);
    for (std::size_t v = 0; v < item_count; ++v)
      if (!is_positive(v)) pool.push_back(v);
    for (std::size_t i = 0; i < count; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
      std::swap(pool[i], pool[pick(rng)]);
      out.push_back(pool[i]);
    }
    return out;
  }
  std::uniform_int_distribution<std::size_t> pick(0, item_count - 1);
  while (out.size() < count) {
    const std::size_t v = pick(rng);
    if (is_positive(v) || std::find(out.begin(), out.end(), v) != out.end()) continue;
    out.push_back(v);
  }
  return out;
}

std::vector<std::size_t> sample_negatives(const BipartiteGraph& graph, std::size_t user, std::size_t count,
                                          Rng& rng) {
  return sample_negatives(graph.positives(user), graph.item_count(), count, rng);
}

std::string to_string(Domain d) { return d == Domain::Source ? "source" : "target"; }

std::string to_string(SplitRole r) {
  switch (r) {
    case SplitRole::Train:
      return "train";
    case SplitRole::Validation:
      return "validation";
    case SplitRole::Test:
      return "test";
  }
  return "unknown";
}

std::string domain_qualified(const std::string& id, Domain d) {
  return id + (d == Domain::Source ? "@source" : "@target");
}

namespace {

struct UserHistory {
  std::vector<const InteractionRecord*> records;  // input order
};

std::unordered_map<std::string, UserHistory> group_by_user(std::span<const InteractionRecord> records) {
  std::unordered_map<std::string, UserHistory> out;
  for (const auto& r : records) out[r.user_id].records.push_back(&r);
  return out;
}

// Last interaction by timestamp when every record has one, else by input order.
const InteractionRecord* last_interaction(const UserHistory& h) {
  const bool timed = std::all_of(h.records.begin(), h.records.end(), [](auto* r) { return r->timestamp.has_value(); });
  const InteractionRecord* best = h.records.front();
  for (auto* r : h.records) {
    if (!timed || *r->timestamp >= *best->timestamp) best = r;
  }
  return best;
}

}  // namespace

DomainPair make_splits(std::span<const InteractionRecord> source, std::span<const InteractionRecord> target,
                       const SplitConfig& config) {
  if (!(config.overlap_fraction >= 0.0 && config.overlap_fraction <= 1.0))
    throw std::invalid_argument("overlap_fraction must lie in [0, 1]");
  if (!(config.eval_fraction > 0.0 && config.eval_fraction < 1.0))
    throw std::invalid_argument("eval_fraction must lie in (0, 1)");

  const auto fs = filter_to_fixpoint(source, config.thresholds);
  const auto ft = filter_to_fixpoint(target, config.thresholds);
  if (fs.empty() || ft.empty()) throw std::runtime_error("a domain is empty after filtering");
  const auto hist_s = group_by_user(fs);
  const auto hist_t = group_by_user(ft);

  std::vector<std::string> overlap;
  for (const auto& [id, _] : hist_s)
    if (hist_t.count(id)) overlap.push_back(id);
  std::sort(overlap.begin(), overlap.end());
  if (overlap.size() < 2)
    throw std::runtime_error("make_splits: need at least 2 overlapping users for evaluation, found " +
                             std::to_string(overlap.size()));

  Rng rng = RngStreams(config.seed).stream("splits");
  std::vector<std::string> shuffled = overlap;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const auto n = shuffled.size();
  std::size_t n_eval = static_cast<std::size_t>(std::llround(config.eval_fraction * static_cast<double>(n)));
  n_eval = std::clamp<std::size_t>(n_eval, 2, n);
  const std::size_t n_val = n_eval / 2;
  const std::size_t n_train = n - n_eval;
  const auto n_linked = config.train_on_overlap_users
                            ? static_cast<std::size_t>(std::llround(config.overlap_fraction * static_cast<double>(n_train)))
                            : 0;

  DomainPair pair;
  pair.seed = config.seed;
  std::unordered_set<std::string> linked, eval_users;
  for (std::size_t i = 0; i < n; ++i) {
    SplitRole role = i < n_val ? SplitRole::Validation : (i < n_eval ? SplitRole::Test : SplitRole::Train);
    pair.overlap_roles[shuffled[i]] = role;
    if (role != SplitRole::Train)
      eval_users.insert(shuffled[i]);
    else if (i - n_eval < n_linked)
      linked.insert(shuffled[i]);
  }
  const std::unordered_set<std::string> overlap_set(overlap.begin(), overlap.end());

  std::unordered_set<std::string> items_s, items_t;
  for (const auto& r : fs) items_s.insert(r.item_id);
  for (const auto& r : ft) items_t.insert(r.item_id);
  auto item_name = [&](const std::string& id, Domain d) {
    const bool collides = d == Domain::Source ? items_t.count(id) > 0 : items_s.count(id) > 0;
    return collides ? domain_qualified(id, d) : id;
  };

  auto training_records = [&](const std::vector<InteractionRecord>& recs, Domain d) {
    std::vector<InteractionRecord> out;
    for (const auto& r : recs) {
      if (eval_users.count(r.user_id)) continue;
      std::string user = r.user_id;
      if (overlap_set.count(user)) {
        if (!config.train_on_overlap_users) continue;
        if (!linked.count(user)) user = domain_qualified(user, d);
      }
      out.push_back({std::move(user), item_name(r.item_id, d), r.timestamp});
    }
    if (out.empty()) throw std::runtime_error("make_splits: no training interactions left in the " + to_string(d) + " domain");
    return out;
  };
  const FilterThresholds keep_all{1, 1};
  pair.source = build_graph(training_records(fs, Domain::Source), keep_all, config.normalization);
  pair.target = build_graph(training_records(ft, Domain::Target), keep_all, config.normalization);

  for (const auto& id : overlap) {
    if (!linked.count(id)) continue;
    pair.linked_users.emplace_back(*pair.source.user_index(id), *pair.target.user_index(id));
  }

  for (const auto& id : overlap) {
    const SplitRole role = pair.overlap_roles[id];
    if (role == SplitRole::Train) continue;
    auto& bucket = role == SplitRole::Validation ? pair.validation : pair.test;
    for (Direction dir : {Direction::SourceToTarget, Direction::TargetToSource}) {
      const Domain from = from_domain(dir), to = to_domain(dir);
      const auto& from_hist = (from == Domain::Source ? hist_s : hist_t).at(id);
      const auto& to_hist = (to == Domain::Source ? hist_s : hist_t).at(id);
      const auto& from_graph = pair.graph(from);
      const auto& to_graph = pair.graph(to);
      const InteractionRecord* truth = last_interaction(to_hist);
      pair.held_out.push_back({id, truth->item_id, to, role});
      EvalInstance inst;
      inst.user_id = id;
      inst.direction = dir;
      std::set<std::size_t> hist;
      for (auto* r : from_hist.records)
        if (auto idx = from_graph.item_index(item_name(r->item_id, from))) hist.insert(*idx);
      inst.history.assign(hist.begin(), hist.end());
      const auto gt = to_graph.item_index(item_name(truth->item_id, to));
      if (!gt || inst.history.empty()) {
        ++pair.dropped_instances;
        continue;
      }
      inst.held_out = *gt;
      bucket.push_back(std::move(inst));
    }
  }
  return pair;
}

}  // namespace prefmatch
