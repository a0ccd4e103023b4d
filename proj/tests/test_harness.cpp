#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "prefmatch/cli.hpp"
#include "prefmatch/config.hpp"
#include "prefmatch/io.hpp"
#include "prefmatch/metrics.hpp"
#include "prefmatch/trainer.hpp"

using namespace prefmatch;
namespace fs = std::filesystem;

namespace {

// Rank by counting items that beat the truth: strictly higher score, or an
// equal score at a lower index. No sorting.
std::size_t scan_rank(const std::vector<double>& scores, std::size_t truth, const std::vector<std::size_t>& excl) {
  std::size_t better = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (i == truth || std::find(excl.begin(), excl.end(), i) != excl.end()) continue;
    if (scores[i] > scores[truth] || (scores[i] == scores[truth] && i < truth)) ++better;
  }
  return better + 1;
}

struct BruteReport {
  double mrr = 0.0;
  std::map<std::size_t, double> hr, ndcg;
};

BruteReport brute_metrics(const std::vector<std::size_t>& ranks) {
  BruteReport b;
  for (std::size_t k : {10, 20, 30}) b.hr[k] = b.ndcg[k] = 0.0;
  for (auto r : ranks) {
    b.mrr += 1.0 / static_cast<double>(r);
    for (std::size_t k : {10, 20, 30})
      if (r <= k) {
        b.hr[k] += 1.0;
        b.ndcg[k] += 1.0 / std::log2(1.0 + static_cast<double>(r));
      }
  }
  const double n = static_cast<double>(ranks.size());
  b.mrr /= n;
  for (std::size_t k : {10, 20, 30}) b.hr[k] /= n, b.ndcg[k] /= n;
  return b;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("prefmatch_" + tag + "_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

struct CliRun {
  int status;
  std::string out, err;
};

CliRun cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int status = run_cli(args, out, err);
  return {status, out.str(), err.str()};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// A small synthetic problem that trains in well under a second per epoch.
std::vector<std::pair<std::string, std::string>> small_overrides() {
  return {{"users_per_domain", "60"}, {"overlap_users", "60"}, {"items_per_domain", "40"}, {"clusters", "4"},
          {"noise", "0.05"},          {"min_user_interactions", "2"}, {"min_item_interactions", "2"},
          {"dim", "4"},               {"layers", "2"},            {"group_size", "16"}, {"batch_size", "128"},
          {"epochs", "3"},            {"warmup", "1"},            {"seed", "5"}};
}

std::vector<std::string> small_cli_flags() {
  std::vector<std::string> out;
  for (const auto& [k, v] : small_overrides())
    if (k != "seed") out.push_back("--" + k), out.push_back(v);
  return out;
}

Config small_config() { return resolve_config("", small_overrides()); }

}  // namespace

TEST_CASE("rank and metric hand cases") {
  const std::vector<double> scores{0.9, 0.5, 0.7, 0.1};
  CHECK(rank_of(scores, 0) == 1);
  CHECK(rank_of(scores, 1) == 3);
  const std::vector<std::size_t> excl{2};
  CHECK(rank_of(scores, 1, excl) == 2);
  const std::vector<double> ties{0.5, 0.5, 0.5};
  CHECK(rank_of(ties, 0) == 1);
  CHECK(rank_of(ties, 2) == 3);
  CHECK_THROWS(rank_of(scores, 4));

  const std::vector<std::size_t> top{1};
  auto r = report_from_ranks(top, "target", 1);
  CHECK(r.mrr == 1.0);
  CHECK(r.ndcg.at(10) == 1.0);
  CHECK(r.hr.at(10) == 1.0);

  const std::vector<std::size_t> three{3};
  r = report_from_ranks(three, "target", 1);
  CHECK(r.ndcg.at(10) == 0.5);
  CHECK(r.mrr == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  const std::vector<std::size_t> five{1, 2, 4, 11, 25};
  r = report_from_ranks(five, "target", 7);
  CHECK(r.hr.at(10) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(r.hr.at(20) == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(r.hr.at(30) == 1.0);
  CHECK(r.users == 5);
  CHECK(r.seed == 7);
  CHECK_NOTHROW(r.validate());

  CHECK_THROWS(report_from_ranks(std::vector<std::size_t>{}, "target", 1));
  RankingReport bad = r;
  bad.hr[20] = 0.1;
  CHECK_THROWS(bad.validate());
  bad = r;
  bad.ndcg[10] = 0.9;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("sort-based ranking equals the scan oracle on random instance sets") {
  Rng rng(1);
  for (int set = 0; set < 50; ++set) {
    std::uniform_int_distribution<std::size_t> n_items(2, 50), n_users(1, 20);
    const std::size_t items = n_items(rng), users = n_users(rng);
    std::uniform_int_distribution<int> coarse(0, 5);  // frequent ties
    std::vector<std::size_t> ranks, oracle_ranks;
    for (std::size_t u = 0; u < users; ++u) {
      std::vector<double> scores(items);
      for (auto& s : scores) s = coarse(rng) * 0.25;
      std::uniform_int_distribution<std::size_t> pick(0, items - 1);
      const std::size_t truth = pick(rng);
      std::vector<std::size_t> excl;
      for (int e = 0; e < 3; ++e)
        if (const auto x = pick(rng); x != truth) excl.push_back(x);
      ranks.push_back(rank_of(scores, truth, excl));
      oracle_ranks.push_back(scan_rank(scores, truth, excl));
    }
    CHECK(ranks == oracle_ranks);
    const auto r = report_from_ranks(ranks, "target", 0);
    const auto b = brute_metrics(oracle_ranks);
    CHECK(r.mrr == b.mrr);
    CHECK(r.hr == b.hr);
    CHECK(r.ndcg == b.ndcg);
    CHECK_NOTHROW(r.validate());
  }
}

TEST_CASE("popularity baseline cases") {
  // Equal popularity: ranks follow item index.
  auto g = BipartiteGraph::from_edges({"a", "b", "c", "d"}, {"x", "y", "z", "w"}, {{0, 0}, {1, 1}, {2, 2}, {3, 3}});
  DomainPair pair{g, g, {}, {}, {}, {}, {}, 1, 0};
  std::vector<EvalInstance> inst;
  double want = 0.0;
  for (std::size_t t = 0; t < 4; ++t) {
    inst.push_back({"p" + std::to_string(t), Direction::SourceToTarget, {0}, t, {}});
    want += 1.0 / static_cast<double>(t + 1) / 4.0;
  }
  auto r = popularity_baseline(pair, inst, 1);
  CHECK(r.mrr == doctest::Approx(want).epsilon(1e-15));
  CHECK_NOTHROW(r.validate());

  // One dominant item that is everyone's ground truth.
  auto h = BipartiteGraph::from_edges({"a", "b", "c"}, {"x", "y"}, {{0, 1}, {1, 1}, {2, 1}, {0, 0}});
  DomainPair dom{h, h, {}, {}, {}, {}, {}, 1, 0};
  std::vector<EvalInstance> all_y(3, EvalInstance{"p", Direction::SourceToTarget, {0}, 1, {}});
  CHECK(popularity_baseline(dom, all_y, 1).mrr == 1.0);
  CHECK_THROWS(popularity_baseline(dom, std::vector<EvalInstance>{}, 1));
}

TEST_CASE("evaluate agrees with scoring plus the scan oracle and is pure") {
  const Config cfg = small_config();
  const DomainPair pair = load_data(cfg);
  Rng init(3);
  const ModelParams params = ModelParams::init(cfg.model, pair, init);
  for (Variant v : {Variant::Full, Variant::A, Variant::B}) {
    auto mc = cfg.model;
    mc.variant = v;
    for (const auto& group : by_direction(pair.test)) {
      const auto r1 = evaluate(pair, params, mc, group, 5);
      const auto r2 = evaluate(pair, params, mc, group, 5);
      CHECK(r1.mrr == r2.mrr);
      CHECK(r1.hr == r2.hr);
      CHECK(r1.ndcg == r2.ndcg);
      CHECK_NOTHROW(r1.validate());
      CHECK(r1.domain == to_string(to_domain(group.front().direction)));

      std::vector<std::vector<std::size_t>> hist;
      for (const auto& i : group) hist.push_back(i.history);
      const auto scores = score_cold_users(pair, params, mc, group.front().direction, hist);
      CHECK(scores.cols() == pair.graph(to_domain(group.front().direction)).item_count());
      std::vector<std::size_t> ranks;
      for (std::size_t i = 0; i < group.size(); ++i) {
        std::vector<double> row(scores.cols());
        for (std::size_t c = 0; c < scores.cols(); ++c) row[c] = scores.at(i, c);
        ranks.push_back(scan_rank(row, group[i].held_out, group[i].exclusions));
      }
      const auto b = brute_metrics(ranks);
      CHECK(r1.mrr == b.mrr);
      CHECK(r1.hr == b.hr);
      CHECK(r1.ndcg == b.ndcg);
    }
  }
  std::vector<EvalInstance> mixed{pair.test.front(), pair.test.back()};
  mixed[1].direction = mixed[0].direction == Direction::SourceToTarget ? Direction::TargetToSource : Direction::SourceToTarget;
  CHECK_THROWS(evaluate(pair, params, cfg.model, mixed, 5));
}

TEST_CASE("config defaults, strictness and overrides") {
  const Config d = config_from_json(nlohmann::json::object());
  CHECK(d.model.encoder.layers == 3);
  CHECK(d.model.encoder.dim == 16);
  CHECK(d.model.encoder.dropout == 0.3);
  CHECK(d.model.group_size == 128);
  CHECK(d.model.heads == 2);
  CHECK(d.train.batch_size == 1024);
  CHECK(d.train.adam.learning_rate == 1e-3);
  CHECK(d.train.adam.weight_decay == 1e-6);
  CHECK(d.train.epochs == 70);
  CHECK(d.train.warmup == 10);
  CHECK(d.train.beta.beta == 1.0);
  CHECK(d.eval.patience == 10);
  CHECK(d.model.variant == Variant::Full);
  CHECK_THROWS_AS(d.seed(), ConfigError);

  // Round trip through JSON.
  const Config again = config_from_json(to_json(d));
  CHECK(to_json(again) == to_json(d));

  using nlohmann::json;
  CHECK_THROWS_AS(config_from_json(json{{"bogus", 1}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(json{{"train", {{"epoch", 3}}}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(json{{"train", {{"epochs", "three"}}}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(json{{"model", {{"dropout", 1.0}}}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(json{{"ablation", {{"variant", "E"}}}}), ConfigError);
  CHECK(config_from_json(json{{"ablation", {{"variant", "C"}}}}).model.variant == Variant::C);

  json j = json::object();
  apply_overrides(j, {{"epochs", "5"}, {"model.dim", "8"}, {"exact_reconstruction", "true"}, {"beta", "0.5"}});
  const Config o = config_from_json(j);
  CHECK(o.train.epochs == 5);
  CHECK(o.model.encoder.dim == 8);
  CHECK(o.train.exact_reconstruction);
  CHECK(o.train.beta.beta == 0.5);
  CHECK_THROWS_AS(apply_overrides(j, {{"nope", "1"}}), ConfigError);
  CHECK_THROWS_AS(apply_overrides(j, {{"epochs", "-1"}}), ConfigError);
  CHECK_THROWS_AS(apply_overrides(j, {{"epochs", "2x"}}), ConfigError);

  const auto parsed = parse_overrides({"--learning-rate", "0.01", "--exact-reconstruction", "--dim=4"});
  REQUIRE(parsed.size() == 3);
  CHECK(parsed[0] == std::pair<std::string, std::string>{"learning_rate", "0.01"});
  CHECK(parsed[1].second == "true");
  CHECK(parsed[2] == std::pair<std::string, std::string>{"dim", "4"});
}

TEST_CASE("config files are read strictly") {
  TempDir dir("config");
  std::ofstream(dir / "ok.json") << R"({"train": {"epochs": 4}, "model": {"dim": 6}})";
  std::ofstream(dir / "bad.json") << R"({"train": {"epochs": 4, "lr": 1}})";
  std::ofstream(dir / "broken.json") << "{ not json";
  const Config c = resolve_config(dir / "ok.json", {{"seed", "3"}});
  CHECK(c.train.epochs == 4);
  CHECK(c.model.encoder.dim == 6);
  CHECK(c.seed() == 3);
  CHECK_THROWS_AS(resolve_config(dir / "bad.json", {}), ConfigError);
  CHECK_THROWS_AS(resolve_config(dir / "broken.json", {}), ConfigError);
  try {
    load_config(dir / "missing.json");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("missing.json") != std::string::npos);
  }
}

TEST_CASE("model.bin round trip and corruption") {
  Config cfg = small_config();
  const DomainPair pair = load_data(cfg);
  Rng a(1), b(2);
  const ModelParams saved = ModelParams::init(cfg.model, pair, a);
  std::stringstream buf;
  write_model(buf, cfg, saved);
  const std::string bytes = buf.str();

  std::istringstream in(bytes);
  const SavedModel loaded = read_model(in);
  CHECK(to_json(loaded.config) == to_json(cfg));
  ModelParams fresh = ModelParams::init(cfg.model, pair, b);
  loaded.restore_into(fresh);
  const auto x = saved.named(), y = fresh.named();
  REQUIRE(x.size() == y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(x[i].name == y[i].name);
    CHECK(std::equal(x[i].tensor.values().begin(), x[i].tensor.values().end(), y[i].tensor.values().begin()));
  }

  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  std::istringstream m(bad_magic);
  CHECK_THROWS_AS(read_model(m), FormatError);
  std::istringstream t(bytes.substr(0, bytes.size() / 2));
  CHECK_THROWS_AS(read_model(t), FormatError);

  Config other = cfg;
  other.model.encoder.dim = 6;
  Rng c(3);
  ModelParams mismatched = ModelParams::init(other.model, pair, c);
  CHECK_THROWS(loaded.restore_into(mismatched));
}

TEST_CASE("metrics and manifest JSON layout") {
  const std::vector<std::size_t> ranks{1, 5};
  const auto j = to_json(report_from_ranks(ranks, "target", 9));
  for (const char* key : {"domain", "mrr", "ndcg", "hr", "users", "seed"}) CHECK(j.contains(key));
  CHECK(j.size() == 6);
  for (const char* k : {"10", "20", "30"}) {
    CHECK(j["ndcg"].contains(k));
    CHECK(j["hr"].contains(k));
  }
  CHECK(j["users"] == 2);
  CHECK(j["seed"] == 9);

  const DomainPair pair = load_data(small_config());
  const auto m = split_manifest(pair);
  for (const char* key : {"seed", "overlap_users", "val_users", "test_users", "held_out_edges"}) CHECK(m.contains(key));
  CHECK(m["held_out_edges"].size() == pair.held_out.size());
  CHECK(m["test_users"].size() + m["val_users"].size() <= m["overlap_users"].size());
}

TEST_CASE("training writes a consistent, deterministic log") {
  const Config cfg = small_config();
  const DomainPair pair = load_data(cfg);
  std::vector<EpochRecord> seen;
  const auto r1 = train(pair, cfg, [&](const EpochRecord& r) { seen.push_back(r); });
  REQUIRE(r1.log.size() == 3);
  CHECK(seen.size() == 3);
  for (const auto& rec : r1.log) {
    const auto& l = rec.loss;
    CHECK(l.total == l.matching + l.domain + l.user_source + l.user_target);
    CHECK(l.matching >= 0.0);
    CHECK(l.domain >= 0.0);
    CHECK(l.user_source >= 0.0);
    CHECK(rec.val_mrr.has_value());
  }
  const auto r2 = train(pair, cfg);
  std::ostringstream a, b;
  write_losses(a, r1.log);
  write_losses(b, r2.log);
  CHECK(a.str() == b.str());
  CHECK(a.str().rfind(std::string(kLossesHeader) + "\n0,", 0) == 0);

  Config big = cfg;
  big.model.group_size = 1000;
  CHECK_THROWS(train(pair, big));
}

TEST_CASE("patience stops training early") {
  Config cfg = small_config();
  cfg.train.epochs = 40;
  cfg.eval.patience = 1;
  cfg.train.adam.learning_rate = 1e-9;
  const auto r = train(load_data(cfg), cfg);
  CHECK(r.log.size() < 40);
}

TEST_CASE("cli: stats") {
  TempDir dir("stats");
  std::ofstream(dir / "two.csv") << "user_id,item_id,timestamp\nu1,i1,1\nu2,i1,2\n";
  auto r = cli({"stats", dir / "two.csv"});
  CHECK(r.status == 0);
  CHECK(r.out.find("users 2, items 1, interactions 2") != std::string::npos);

  std::ofstream(dir / "other.csv") << "u2,i9\nu3,i9\n";
  r = cli({"stats", dir / "two.csv", dir / "other.csv"});
  CHECK(r.out.find("overlapping users 1") != std::string::npos);
}

TEST_CASE("cli: errors") {
  auto r = cli({"train", "--config", "missing.json", "--seed", "1"});
  CHECK(r.status != 0);
  CHECK(r.err.find("missing.json") != std::string::npos);

  r = cli({"train", "--seed", "1", "--no-such-flag", "3"});
  CHECK(r.status != 0);
  CHECK(r.err.find("no_such_flag") != std::string::npos);
  CHECK(r.err.find("Usage") != std::string::npos);

  r = cli({"stats", "--frobnicate"});
  CHECK(r.status != 0);
  CHECK(r.err.find("Usage") != std::string::npos);

  r = cli({"train", "--epochs", "2"});
  CHECK(r.status != 0);
  CHECK(r.err.find("--seed") != std::string::npos);

  r = cli({"train", "--seed", "1", "--dropout", "2"});
  CHECK(r.status != 0);
  CHECK(r.err.find("dropout") != std::string::npos);

  CHECK(cli({}).status != 0);
  CHECK(cli({"bogus"}).status != 0);
}

TEST_CASE("cli: gradcheck") {
  const auto r = cli({"gradcheck", "--seed", "1", "--toy"});
  CHECK(r.status == 0);
  CHECK(r.out.find("max relative error") != std::string::npos);
}

TEST_CASE("cli: synth, train and evaluate") {
  TempDir dir("cli");
  auto flags = small_cli_flags();

  std::vector<std::string> synth{"synth", "--seed", "5", "--out", dir / "data"};
  synth.insert(synth.end(), flags.begin(), flags.end());
  auto r = cli(synth);
  REQUIRE(r.status == 0);
  CHECK(fs::exists(dir / "data/source.csv"));
  CHECK(fs::exists(dir / "data/target.csv"));
  const auto overlap = nlohmann::json::parse(slurp(dir / "data/overlap.json"));
  CHECK(overlap.contains("held_out_edges"));

  std::vector<std::string> train_args{"train", "--seed", "5", "--out", dir / "run"};
  train_args.insert(train_args.end(), flags.begin(), flags.end());
  r = cli(train_args);
  REQUIRE(r.status == 0);
  for (const char* f : {"model.bin", "losses.csv", "metrics.json", "split.json"}) CHECK(fs::exists(dir / ("run/" + std::string(f))));
  const auto losses = slurp(dir / "run/losses.csv");
  CHECK(losses.rfind(std::string(kLossesHeader) + "\n", 0) == 0);
  CHECK(std::count(losses.begin(), losses.end(), '\n') == 4);
  const auto metrics = nlohmann::json::parse(slurp(dir / "run/metrics.json"));
  CHECK(metrics["domain"] == "target");
  CHECK(metrics["seed"] == 5);

  // Same flags through a config file reproduce the log.
  nlohmann::json file = nlohmann::json::object();
  apply_overrides(file, small_overrides());
  file["train"].erase("seed");
  std::ofstream(dir / "cfg.json") << file.dump(2);
  r = cli({"train", "--config", dir / "cfg.json", "--seed", "5", "--out", dir / "run2"});
  REQUIRE(r.status == 0);
  CHECK(slurp(dir / "run2/losses.csv") == losses);

  r = cli({"evaluate", "--model", dir / "run/model.bin", "--out", dir / "eval"});
  REQUIRE(r.status == 0);
  const auto evaluated = nlohmann::json::parse(slurp(dir / "eval/metrics.json"));
  CHECK(evaluated == metrics);

  r = cli({"evaluate", "--model", dir / "run/model.bin", "--out", dir / "pop", "--popularity"});
  CHECK(r.status == 0);
  CHECK(fs::exists(dir / "pop/metrics.json"));
}

TEST_CASE("twenty epochs on the default generator lower the loss; variant C validates worse") {
  double full_mrr = 0.0, c_mrr = 0.0;
  for (int seed = 1; seed <= 5; ++seed) {
    Config cfg = resolve_config("", {{"seed", std::to_string(seed)}, {"epochs", "20"}, {"patience", "0"}});
    const DomainPair pair = load_data(cfg);
    const auto full = train(pair, cfg);
    REQUIRE(full.log.size() == 20);
    CAPTURE(seed);
    CHECK(full.log.back().loss.total < full.log.front().loss.total);
    full_mrr += *full.best_val_mrr;
    cfg.model.variant = Variant::C;
    c_mrr += *train(pair, cfg).best_val_mrr;
  }
  CHECK(c_mrr < full_mrr);
}
