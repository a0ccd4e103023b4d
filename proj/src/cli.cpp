#include "prefmatch/cli.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include <CLI11.hpp>

#include "prefmatch/config.hpp"
#include "prefmatch/gradcheck.hpp"
#include "prefmatch/io.hpp"
#include "prefmatch/metrics.hpp"
#include "prefmatch/trainer.hpp"

namespace fs = std::filesystem;

namespace prefmatch {

std::vector<std::pair<std::string, std::string>> parse_overrides(const std::vector<std::string>& tokens) {
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto& tok = tokens[i];
    if (tok.rfind("--", 0) != 0 || tok.size() == 2) throw ConfigError("unexpected argument '" + tok + "'");
    std::string key = tok.substr(2), value;
    const auto eq = key.find('=');
    if (eq != std::string::npos) {
      value = key.substr(eq + 1);
      key.resize(eq);
    }
    std::replace(key.begin(), key.end(), '-', '_');
    if (eq == std::string::npos) {
      const bool next_is_value = i + 1 < tokens.size() && tokens[i + 1].rfind("--", 0) != 0;
      if (override_is_flag(key) && !next_is_value)
        value = "true";
      else if (next_is_value)
        value = tokens[++i];
      else
        throw ConfigError("option '--" + key + "' needs a value");
    }
    out.emplace_back(key, value);
  }
  return out;
}

namespace {

std::string fmt(double v, int precision = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

void print_report(std::ostream& out, const std::string& label, const RankingReport& r) {
  out << label << " [" << r.domain << ", " << r.users << " users] MRR " << fmt(r.mrr);
  for (auto k : kCutoffs) out << "  HR@" << k << " " << fmt(r.hr.at(k)) << "  NDCG@" << k << " " << fmt(r.ndcg.at(k));
  out << '\n';
}

void print_pair(std::ostream& out, const DomainPair& pair) {
  for (auto d : {Domain::Source, Domain::Target}) {
    const auto& g = pair.graph(d);
    out << to_string(d) << ": " << g.user_count() << " users, " << g.item_count() << " items, " << g.edge_count()
        << " interactions\n";
  }
  out << "validation instances " << pair.validation.size() << ", test instances " << pair.test.size()
      << ", dropped " << pair.dropped_instances << '\n';
}

std::string metrics_name(const RankingReport& r) {
  return r.domain == "target" ? "metrics.json" : "metrics_" + r.domain + ".json";
}

int cmd_train(const std::string& config_path, std::uint64_t seed, const std::string& out_dir,
              std::vector<std::pair<std::string, std::string>> overrides, std::ostream& out) {
  overrides.emplace_back("train.seed", std::to_string(seed));
  if (!out_dir.empty()) overrides.emplace_back("train.output_dir", out_dir);
  const Config config = resolve_config(config_path, overrides);
  const fs::path dir = config.train.output_dir;
  fs::create_directories(dir);
  const DomainPair pair = load_data(config);
  print_pair(out, pair);
  const auto result = train(pair, config, [&](const EpochRecord& r) {
    out << "epoch " << r.epoch << " L_m " << fmt(r.loss.matching) << " L_d " << fmt(r.loss.domain) << " L_u_source "
        << fmt(r.loss.user_source) << " L_u_target " << fmt(r.loss.user_target) << " total " << fmt(r.loss.total);
    if (r.val_mrr) out << " val_mrr " << fmt(*r.val_mrr);
    out << '\n';
  });
  save_model((dir / "model.bin").string(), config, result.params);
  {
    std::ofstream losses(dir / "losses.csv");
    write_losses(losses, result.log);
  }
  write_json((dir / "split.json").string(), split_manifest(pair));
  for (const auto& group : by_direction(pair.test)) {
    const auto report = evaluate(pair, result.params, config.model, group, config.seed());
    report.validate();
    write_metrics((dir / metrics_name(report)).string(), report);
    print_report(out, "test", report);
    print_report(out, "popularity", popularity_baseline(pair, group, config.seed()));
  }
  out << "wrote " << (dir / "model.bin").string() << '\n';
  return 0;
}

int cmd_evaluate(const std::string& model_path, const std::string& split_name, const std::string& out_dir,
                 bool baseline, std::ostream& out) {
  const SavedModel saved = load_model(model_path);
  const Config& config = saved.config;
  const DomainPair pair = load_data(config);
  RngStreams streams(config.seed());
  Rng init = streams.stream("init");
  ModelParams params = ModelParams::init(config.model, pair, init);
  saved.restore_into(params);
  const auto& instances = split_name == "test" ? pair.test : pair.validation;
  const fs::path dir = out_dir.empty() ? fs::path(model_path).parent_path() : fs::path(out_dir);
  if (!dir.empty()) fs::create_directories(dir);
  for (const auto& group : by_direction(instances)) {
    const auto report = baseline ? popularity_baseline(pair, group, config.seed())
                                 : evaluate(pair, params, config.model, group, config.seed());
    report.validate();
    write_metrics((dir / metrics_name(report)).string(), report);
    print_report(out, baseline ? "popularity" : split_name, report);
  }
  return 0;
}

int cmd_synth(std::uint64_t seed, const std::string& out_dir, std::vector<std::pair<std::string, std::string>> overrides,
              std::ostream& out) {
  overrides.emplace_back("train.seed", std::to_string(seed));
  const Config config = resolve_config("", overrides);
  if (!config.data.is_synthetic()) throw ConfigError("synth does not take data.source/data.target");
  SyntheticConfig syn = config.data.synthetic;
  syn.seed = config.data.synthetic_seed.value_or(seed);
  syn.thresholds = config.data.split.thresholds;
  const auto data = generate_synthetic(syn);
  const fs::path dir = out_dir;
  fs::create_directories(dir);
  for (auto [name, records] : {std::pair{"source.csv", &data.source}, std::pair{"target.csv", &data.target}}) {
    std::ofstream f(dir / name);
    write_interactions(f, *records);
    out << "wrote " << (dir / name).string() << " (" << records->size() << " interactions)\n";
  }
  SplitConfig split = config.data.split;
  split.seed = config.data.split_seed.value_or(seed);
  write_json((dir / "overlap.json").string(), split_manifest(make_splits(data.source, data.target, split)));
  out << "wrote " << (dir / "overlap.json").string() << '\n';
  return 0;
}

int cmd_stats(const std::vector<std::string>& files, char delimiter, std::ostream& out) {
  std::vector<std::set<std::string>> user_sets;
  for (const auto& f : files) {
    const auto loaded = load_interactions(fs::path(f), delimiter);
    std::set<std::string> users, items;
    std::set<std::pair<std::string, std::string>> pairs;
    for (const auto& r : loaded.records) {
      users.insert(r.user_id);
      items.insert(r.item_id);
      pairs.emplace(r.user_id, r.item_id);
    }
    const double density = static_cast<double>(pairs.size()) / (static_cast<double>(users.size()) * items.size());
    out << f << ": users " << users.size() << ", items " << items.size() << ", interactions " << pairs.size()
        << ", density " << fmt(100.0 * density, 4) << "%";
    if (loaded.malformed > 0) out << ", malformed lines " << loaded.malformed;
    out << '\n';
    user_sets.push_back(std::move(users));
  }
  if (user_sets.size() == 2) {
    std::size_t shared = 0;
    for (const auto& u : user_sets[0]) shared += user_sets[1].count(u);
    out << "overlapping users " << shared << '\n';
  }
  return 0;
}

int cmd_gradcheck(std::uint64_t seed, std::size_t users, std::size_t items, double step, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  const auto toy = make_toy_problem(seed, users, items);
  const auto r = gradcheck_model(toy, seed, step);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3e", r.result.max_relative_error);
  out << "max relative error " << buf << " at " << r.worst_name << "[" << r.result.worst_index << "] over "
      << r.entries << " entries in " << r.tensors << " tensors (" << fmt(secs, 2) << " s)\n";
  return r.result.max_relative_error < 1e-4 ? 0 : 1;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Distributional preference matching for non-overlapping cross-domain recommendation", "prefmatch"};
  app.require_subcommand(1);

  std::string config_path, out_dir, model_path, split_name = "test";
  std::uint64_t seed = 1;
  bool baseline = false, toy = false;
  std::vector<std::string> files;
  std::string delimiter = ",";
  std::size_t toy_users = 6, toy_items = 5;
  double step = 1e-5;

  auto* train_cmd = app.add_subcommand("train", "Train a model; any config key can be overridden with --key value");
  train_cmd->add_option("--config", config_path, "Config JSON")->check(CLI::ExistingFile);
  train_cmd->add_option("--seed", seed, "Master seed")->required();
  train_cmd->add_option("--out", out_dir, "Output directory (train.output_dir)");
  train_cmd->allow_extras();

  auto* eval_cmd = app.add_subcommand("evaluate", "Evaluate a saved model on the held-out split");
  eval_cmd->add_option("--model", model_path, "model.bin written by train")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--split", split_name, "test or validation")->check(CLI::IsMember({"test", "validation"}));
  eval_cmd->add_option("--out", out_dir, "Directory for metrics.json (default: next to the model)");
  eval_cmd->add_flag("--popularity", baseline, "Rank by training popularity instead of the model");

  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic interaction pair and its split manifest");
  synth_cmd->add_option("--seed", seed, "Generator and split seed")->required();
  synth_cmd->add_option("--out", out_dir, "Output directory")->required();
  synth_cmd->allow_extras();

  auto* stats_cmd = app.add_subcommand("stats", "Print user, item and interaction counts");
  stats_cmd->add_option("files", files, "Interaction CSVs")->required()->check(CLI::ExistingFile);
  stats_cmd->add_option("--delimiter", delimiter, "Field delimiter (one character or 'tab')");

  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every model gradient");
  grad_cmd->add_option("--seed", seed, "Seed for the toy problem and parameters");
  grad_cmd->add_flag("--toy", toy, "6 users / 5 items per domain, d = 4, K = 2, N = 4 (the default size)");
  grad_cmd->add_option("--users", toy_users, "Users per domain")->check(CLI::PositiveNumber);
  grad_cmd->add_option("--items", toy_items, "Items per domain")->check(CLI::Range(2, 1000));
  grad_cmd->add_option("--step", step, "Central-difference step");

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return e.get_exit_code() == 0 ? 2 : e.get_exit_code();
  }

  CLI::App* active = app.get_subcommands().front();
  try {
    if (active == train_cmd) return cmd_train(config_path, seed, out_dir, parse_overrides(train_cmd->remaining()), out);
    if (active == eval_cmd) return cmd_evaluate(model_path, split_name, out_dir, baseline, out);
    if (active == synth_cmd) return cmd_synth(seed, out_dir, parse_overrides(synth_cmd->remaining()), out);
    if (active == stats_cmd) {
      if (delimiter != "tab" && delimiter.size() != 1) throw ConfigError("--delimiter must be one character or 'tab'");
      return cmd_stats(files, delimiter == "tab" ? '\t' : delimiter[0], out);
    }
    if (active == grad_cmd) {
      if (toy) toy_users = 6, toy_items = 5;
      return cmd_gradcheck(seed, toy_users, toy_items, step, out);
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n\n" << active->help();
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace prefmatch
