#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "prefmatch/data.hpp"
#include "prefmatch/synthetic.hpp"
#include "support.hpp"

using namespace prefmatch;

namespace {

LoadResult parse(const std::string& text) {
  std::istringstream in(text);
  return load_interactions(in);
}

InteractionRecord rec(std::string u, std::string i, std::optional<std::int64_t> ts = std::nullopt) {
  return {std::move(u), std::move(i), ts};
}

std::vector<InteractionRecord> random_corpus(std::size_t users, std::size_t items, double p, Rng& rng) {
  std::bernoulli_distribution coin(p);
  std::vector<InteractionRecord> out;
  for (std::size_t u = 0; u < users; ++u)
    for (std::size_t v = 0; v < items; ++v)
      if (coin(rng)) out.push_back(rec("u" + std::to_string(u), "i" + std::to_string(v)));
  return out;
}

// Remove every violator at once, repeat until nothing changes.
std::set<std::pair<std::string, std::string>> naive_fixpoint(const std::vector<InteractionRecord>& recs,
                                                              FilterThresholds t) {
  std::set<std::pair<std::string, std::string>> edges;
  for (const auto& r : recs) edges.emplace(r.user_id, r.item_id);
  for (;;) {
    std::map<std::string, std::size_t> du, dv;
    for (const auto& [u, v] : edges) ++du[u], ++dv[v];
    std::set<std::pair<std::string, std::string>> next;
    for (const auto& e : edges)
      if (du[e.first] >= t.min_user_interactions && dv[e.second] >= t.min_item_interactions) next.insert(e);
    if (next == edges) return edges;
    edges = std::move(next);
  }
}

}  // namespace

TEST_CASE("load_interactions parses records, header and comments") {
  auto r = parse("u1,i1,100\nu2,i1,101");
  REQUIRE(r.records.size() == 2);
  CHECK(r.records[0] == rec("u1", "i1", 100));
  CHECK(r.records[1] == rec("u2", "i1", 101));
  CHECK(r.malformed == 0);

  r = parse("user_id,item_id,timestamp\n# comment\nu1,i1\n\nu2,i2,7\n");
  REQUIRE(r.records.size() == 2);
  CHECK_FALSE(r.records[0].timestamp.has_value());
  CHECK(r.records[1].timestamp == 7);
}

TEST_CASE("load_interactions counts malformed lines") {
  auto r = parse("u1,,100\nu2,i2,3\n");
  CHECK(r.records.size() == 1);
  CHECK(r.malformed == 1);
  CHECK(r.malformed_lines == std::vector<std::size_t>{1});

  r = parse("u1,i1,abc\nu2,i2\n");
  CHECK(r.records.size() == 1);
  CHECK(r.malformed == 1);
}

TEST_CASE("load_interactions errors name the line") {
  try {
    parse("u1,i1\nu2\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK_THROWS_AS(parse(""), ParseError);
  CHECK_THROWS_AS(parse("# only a comment\n"), ParseError);
}

TEST_CASE("write_interactions round-trips") {
  std::vector<InteractionRecord> recs{rec("a", "x", 5), rec("b", "y")};
  std::ostringstream out;
  write_interactions(out, recs);
  CHECK(parse(out.str()).records == recs);
}

TEST_CASE("normalize_adjacency hand cases") {
  auto single = SparseMatrix::from_triplets(1, 1, {{0, 0, 1.0}});
  CHECK(normalize_adjacency(single).get(0, 0) == 1.0);

  auto fan = SparseMatrix::from_triplets(1, 2, {{0, 0, 1.0}, {0, 1, 1.0}});
  auto n = normalize_adjacency(fan);
  CHECK(n.get(0, 0) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
  CHECK(n.get(0, 1) == doctest::Approx(0.70710678118654752).epsilon(1e-15));

  auto row = normalize_adjacency(fan, Normalization::RowStochastic);
  CHECK(row.get(0, 0) == 0.5);

  auto empty_row = SparseMatrix::from_triplets(2, 1, {{0, 0, 1.0}});
  CHECK_THROWS(normalize_adjacency(empty_row));
  auto empty_col = SparseMatrix::from_triplets(1, 2, {{0, 0, 1.0}});
  CHECK_THROWS(normalize_adjacency(empty_col));
}

TEST_CASE("normalize_adjacency equals the dense degree product") {
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    std::uniform_int_distribution<std::size_t> size(2, 50);
    const std::size_t rows = size(rng), cols = size(rng);
    std::bernoulli_distribution coin(0.2);
    std::vector<Triplet> t;
    for (std::size_t i = 0; i < rows; ++i) t.push_back({i, i % cols, 1.0});
    for (std::size_t j = 0; j < cols; ++j)
      if (j >= rows) t.push_back({j % rows, j, 1.0});
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (auto& e : t) seen.emplace(e.row, e.col);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j)
        if (coin(rng) && seen.emplace(i, j).second) t.push_back({i, j, 1.0});
    const auto a = SparseMatrix::from_triplets(rows, cols, t);
    const auto n = normalize_adjacency(a).to_dense();

    const auto dense = a.to_dense();
    std::vector<double> du(rows, 0.0), dv(cols, 0.0);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) du[i] += dense[i * cols + j], dv[j] += dense[i * cols + j];
    bool exact = true;
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) {
        const double want = dense[i * cols + j] / std::sqrt(du[i] * dv[j]);
        exact = exact && (n[i * cols + j] == want);
      }
    CHECK(exact);
  }
}

TEST_CASE("row sums of normalized A times its transpose match a loop oracle") {
  Rng rng(11);
  auto recs = random_corpus(10, 10, 0.4, rng);
  auto g = build_graph(recs, {1, 1});
  const auto& n = g.normalized();
  const auto d = n.to_dense();
  const std::size_t r = n.rows(), c = n.cols();
  const auto nt = Tensor::from({c, r}, n.transpose().to_dense());
  const auto prod = spmm(n, nt);
  for (std::size_t i = 0; i < r; ++i) {
    double got = 0.0, want = 0.0;
    for (std::size_t k = 0; k < r; ++k) {
      got += prod.at(i, k);
      for (std::size_t j = 0; j < c; ++j) want += d[i * c + j] * d[k * c + j];
    }
    CHECK(std::abs(got - want) < 1e-12);
  }
}

TEST_CASE("build_graph dedupes, indexes by sorted id and keeps invariants") {
  std::vector<InteractionRecord> recs{rec("b", "y"), rec("a", "x"), rec("a", "x"), rec("b", "x"), rec("a", "z")};
  auto g = build_graph(recs, {1, 1});
  CHECK(g.user_ids() == std::vector<std::string>{"a", "b"});
  CHECK(g.item_ids() == std::vector<std::string>{"x", "y", "z"});
  CHECK(g.edge_count() == 4);
  CHECK(*g.item_index("z") == 2);
  CHECK_FALSE(g.user_index("c").has_value());
  for (const auto& t : g.adjacency().triplets()) {
    CHECK(t.value == 1.0);
    const double nv = g.normalized().get(t.row, t.col);
    CHECK(nv > 0.0);
    CHECK(nv <= 1.0);
  }
  CHECK(g.normalized().nnz() == g.adjacency().nnz());
  CHECK(g.normalized().col_indices() == g.adjacency().col_indices());
  CHECK(g.normalized().row_offsets() == g.adjacency().row_offsets());
  CHECK(g.item_degrees() == std::vector<std::size_t>{2, 1, 1});
  auto pos = g.positives(0);
  CHECK(std::vector<std::size_t>(pos.begin(), pos.end()) == std::vector<std::size_t>{0, 2});
}

TEST_CASE("build_graph threshold examples") {
  std::vector<InteractionRecord> recs;
  for (const char* u : {"u1", "u2", "u3"})
    for (int i = 0; i < 5; ++i) recs.push_back(rec(u, "i" + std::to_string(i)));
  auto all = build_graph(recs, {5, 3});
  CHECK(all.user_count() == 3);
  CHECK(all.item_count() == 5);

  // A lone item drags its user below the user threshold in the next round.
  recs.push_back(rec("u4", "i0"));
  recs.push_back(rec("u4", "i1"));
  recs.push_back(rec("u4", "i2"));
  recs.push_back(rec("u4", "i3"));
  recs.push_back(rec("u4", "solo"));
  auto g = build_graph(recs, {5, 3});
  CHECK(g.user_count() == 3);
  CHECK_FALSE(g.item_index("solo").has_value());
  CHECK_FALSE(g.user_index("u4").has_value());

  CHECK_THROWS(build_graph(recs, {50, 1}));
  CHECK_THROWS(build_graph(recs, {0, 1}));
}

TEST_CASE("fixpoint filter equals the naive repeat-until-stable oracle") {
  Rng rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    auto recs = random_corpus(20, 15, 0.25, rng);
    // Duplicates must not inflate degrees.
    recs.push_back(recs.front());
    const FilterThresholds t{3 + static_cast<std::size_t>(trial % 3), 3 + static_cast<std::size_t>(trial % 4)};
    const auto kept = filter_to_fixpoint(recs, t);
    std::set<std::pair<std::string, std::string>> got;
    for (const auto& r : kept) got.emplace(r.user_id, r.item_id);
    CHECK(got == naive_fixpoint(recs, t));
  }
}

TEST_CASE("graph construction is permutation invariant") {
  Rng rng(5);
  auto recs = random_corpus(12, 9, 0.4, rng);
  auto base = build_graph(recs, {1, 1});
  for (int k = 0; k < 5; ++k) {
    std::shuffle(recs.begin(), recs.end(), rng);
    auto g = build_graph(recs, {1, 1});
    CHECK(g.user_ids() == base.user_ids());
    CHECK(g.item_ids() == base.item_ids());
    CHECK(g.adjacency() == base.adjacency());
    CHECK(g.normalized() == base.normalized());
  }
}

TEST_CASE("sample_negatives contract") {
  Rng rng(1);
  const std::vector<std::size_t> pos{0};
  auto s = sample_negatives(pos, 3, 2, rng);
  std::sort(s.begin(), s.end());
  CHECK(s == std::vector<std::size_t>{1, 2});

  const std::vector<std::size_t> all{0, 1, 2};
  CHECK_THROWS(sample_negatives(all, 3, 1, rng));
  CHECK_THROWS(sample_negatives(pos, 3, 3, rng));
  CHECK_THROWS(sample_negatives(pos, 3, 0, rng));
}

TEST_CASE("sample_negatives never returns positives") {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    auto g = build_graph(random_corpus(8, 12, 0.3, rng), {1, 1});
    for (std::size_t u = 0; u < g.user_count(); ++u) {
      const auto pos = g.positives(u);
      const std::size_t free = g.item_count() - pos.size();
      if (free == 0) continue;
      auto neg = sample_negatives(g, u, std::min<std::size_t>(free, 4), rng);
      std::set<std::size_t> distinct(neg.begin(), neg.end());
      CHECK(distinct.size() == neg.size());
      for (auto v : neg) CHECK_FALSE(std::binary_search(pos.begin(), pos.end(), v));
    }
  }
}

TEST_CASE("sample_negatives is uniform over 1e5 draws") {
  Rng rng(99);
  const std::vector<std::size_t> pos{1, 4, 7};
  const std::size_t items = 10, draws = 100000;
  for (std::size_t count : {std::size_t{1}, std::size_t{3}}) {
    std::vector<double> hits(items, 0.0);
    for (std::size_t k = 0; k < draws; ++k)
      for (auto v : sample_negatives(pos, items, count, rng)) hits[v] += 1.0;
    const double p = static_cast<double>(count) / 7.0;
    const double expect = p * draws;
    const double se = std::sqrt(draws * p * (1.0 - p));
    double chi2 = 0.0;
    for (std::size_t v = 0; v < items; ++v) {
      if (std::binary_search(pos.begin(), pos.end(), v)) {
        CHECK(hits[v] == 0.0);
        continue;
      }
      CHECK(std::abs(hits[v] - expect) < 3.0 * se);
      chi2 += (hits[v] - expect) * (hits[v] - expect) / expect;
    }
    if (count == 1) CHECK(chi2 < 22.46);  // 6 dof, p = 0.001
  }
}

TEST_CASE("make_splits: ten overlapping users give one validation and one test user") {
  std::vector<InteractionRecord> s, t;
  for (int u = 0; u < 10; ++u)
    for (int i = 0; i < 3; ++i) {
      s.push_back(rec("p" + std::to_string(u), "s" + std::to_string((u + i) % 6), 10 + i));
      t.push_back(rec("p" + std::to_string(u), "t" + std::to_string((u * 2 + i) % 7), 10 + i));
    }
  SplitConfig cfg;
  cfg.thresholds = {1, 1};
  auto pair = make_splits(s, t, cfg);
  std::size_t val = 0, test = 0;
  for (const auto& [id, role] : pair.overlap_roles) {
    val += role == SplitRole::Validation;
    test += role == SplitRole::Test;
  }
  CHECK(val == 1);
  CHECK(test == 1);
  CHECK(pair.overlap_roles.size() == 10);
  CHECK(pair.linked_users.empty());

  auto again = make_splits(s, t, cfg);
  CHECK(again.overlap_roles == pair.overlap_roles);
  CHECK(again.source.adjacency() == pair.source.adjacency());

  // Held-out item is the last by timestamp.
  for (const auto& inst : pair.test) {
    const auto& recs = inst.direction == Direction::SourceToTarget ? t : s;
    std::string last;
    std::int64_t best = -1;
    for (const auto& r : recs)
      if (r.user_id == inst.user_id && *r.timestamp >= best) best = *r.timestamp, last = r.item_id;
    const auto& g = pair.graph(to_domain(inst.direction));
    CHECK(g.item_ids()[inst.held_out] == last);
  }

  std::vector<InteractionRecord> lone_s{rec("p0", "a")}, lone_t{rec("p0", "b")};
  CHECK_THROWS(make_splits(lone_s, lone_t, cfg));
}

TEST_CASE("held-out edge selection falls back to input order") {
  std::vector<InteractionRecord> s, t;
  for (int u = 0; u < 4; ++u)
    for (int i = 0; i < 3; ++i) {
      s.push_back(rec("p" + std::to_string(u), "s" + std::to_string(i)));
      t.push_back(rec("p" + std::to_string(u), "t" + std::to_string((u + i) % 3)));
    }
  s.push_back(rec("x", "s0"));
  t.push_back(rec("y", "t0"));
  t.push_back(rec("y", "t1"));
  t.push_back(rec("y", "t2"));
  SplitConfig cfg;
  cfg.thresholds = {1, 1};
  cfg.eval_fraction = 0.5;
  auto pair = make_splits(s, t, cfg);
  for (const auto& e : pair.held_out) {
    const auto& recs = e.domain == Domain::Target ? t : s;
    std::string last;
    for (const auto& r : recs)
      if (r.user_id == e.user_id) last = r.item_id;
    CHECK(e.item_id == last);
  }
}

TEST_CASE("strict NOCDR split on synthetic data") {
  SyntheticConfig sc;
  sc.seed = 4;
  auto data = generate_synthetic(sc);
  SplitConfig cfg;
  cfg.seed = 4;
  auto pair = make_splits(data.source, data.target, cfg);

  CHECK(pair.linked_users.empty());
  std::set<std::string> su(pair.source.user_ids().begin(), pair.source.user_ids().end());
  for (const auto& id : pair.target.user_ids()) CHECK(su.count(id) == 0);
  std::set<std::string> si(pair.source.item_ids().begin(), pair.source.item_ids().end());
  for (const auto& id : pair.target.item_ids()) CHECK(si.count(id) == 0);

  std::size_t eval_users = 0;
  for (const auto& [id, role] : pair.overlap_roles) eval_users += role != SplitRole::Train;
  CHECK(eval_users == 100);
  CHECK(pair.validation.size() + pair.test.size() + pair.dropped_instances == 2 * eval_users);

  // No held-out edge survives in training, edge by edge.
  for (const auto& e : pair.held_out) {
    for (Domain d : {Domain::Source, Domain::Target}) {
      const auto& g = pair.graph(d);
      CHECK_FALSE(g.user_index(e.user_id).has_value());
      CHECK_FALSE(g.user_index(domain_qualified(e.user_id, d)).has_value());
    }
  }
  for (const auto* bucket : {&pair.validation, &pair.test})
    for (const auto& inst : *bucket) {
      CHECK(pair.overlap_roles.count(inst.user_id) == 1);
      CHECK_FALSE(inst.history.empty());
      CHECK(std::find(inst.exclusions.begin(), inst.exclusions.end(), inst.held_out) == inst.exclusions.end());
      CHECK(inst.held_out < pair.graph(to_domain(inst.direction)).item_count());
    }
}

TEST_CASE("overlap_fraction links training identities") {
  SyntheticConfig sc;
  sc.seed = 2;
  auto data = generate_synthetic(sc);
  SplitConfig cfg;
  cfg.overlap_fraction = 0.5;
  auto pair = make_splits(data.source, data.target, cfg);
  CHECK(pair.linked_users.size() == 200);
  for (auto [s, t] : pair.linked_users) CHECK(pair.source.user_ids()[s] == pair.target.user_ids()[t]);
}

TEST_CASE("synthetic generator: degenerate probabilities") {
  SyntheticConfig sc;
  sc.affinity = 1.0;
  sc.noise = 0.0;
  auto data = generate_synthetic(sc);
  std::map<std::string, std::set<std::string>> seen;
  for (const auto& r : data.source) seen[r.user_id].insert(r.item_id);
  for (const auto& [u, items] : seen) {
    std::set<std::string> own;
    for (const auto& [item, c] : data.source_item_cluster)
      if (c == data.user_cluster.at(u)) own.insert(item);
    CHECK(items == own);
  }
}

TEST_CASE("synthetic generator: zero affinity ignores clusters") {
  SyntheticConfig sc;
  sc.affinity = 0.0;
  sc.noise = 0.1;
  sc.users_per_domain = 200;
  sc.overlap_users = 200;
  sc.items_per_domain = 100;
  std::vector<double> gap;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    sc.seed = seed;
    auto data = generate_synthetic(sc);
    std::set<std::pair<std::string, std::string>> edges;
    for (const auto& r : data.source) edges.emplace(r.user_id, r.item_id);
    double intra = 0, intra_n = 0, inter = 0, inter_n = 0;
    for (const auto& u : data.overlap_users)
      for (const auto& [item, c] : data.source_item_cluster) {
        const bool hit = edges.count({u, item}) > 0;
        if (c == data.user_cluster.at(u)) intra += hit, ++intra_n;
        else inter += hit, ++inter_n;
      }
    gap.push_back(intra / intra_n - inter / inter_n);
  }
  const auto m = testing::moments(gap);
  CHECK(std::abs(m.mean) < 3.0 * m.se);
}

TEST_CASE("synthetic generator: default sizes give mean degree in [8, 20]") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    SyntheticConfig sc;
    sc.seed = seed;
    auto data = generate_synthetic(sc);
    const double mean = static_cast<double>(data.source.size()) / static_cast<double>(sc.users_per_domain);
    CHECK(mean >= 8.0);
    CHECK(mean <= 20.0);
  }
}

TEST_CASE("synthetic generator: reproducible and validated") {
  SyntheticConfig sc;
  sc.seed = 12;
  auto a = generate_synthetic(sc), b = generate_synthetic(sc);
  CHECK(a.source == b.source);
  CHECK(a.target == b.target);
  CHECK(a.user_cluster == b.user_cluster);
  sc.seed = 13;
  CHECK(generate_synthetic(sc).source != a.source);

  SyntheticConfig bad;
  bad.items_per_domain = 10;
  bad.noise = 0.01;
  bad.affinity = 0.1;
  try {
    generate_synthetic(bad);
    FAIL("expected rejection");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("raise") != std::string::npos);
  }
  bad = {};
  bad.clusters = 1;
  CHECK_THROWS(generate_synthetic(bad));
  bad = {};
  bad.overlap_users = 600;
  CHECK_THROWS(generate_synthetic(bad));
}
