#include "prefmatch/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>

namespace prefmatch {

using nlohmann::json;

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }
json optional_seed(const std::optional<std::uint64_t>& v) { return v ? json(*v) : json(nullptr); }

std::string delimiter_name(char c) { return c == '\t' ? "tab" : std::string(1, c); }

}  // namespace

std::uint64_t Config::seed() const {
  if (!train.seed) throw ConfigError("train.seed is required (pass --seed)");
  return *train.seed;
}

void Config::validate() const {
  try {
    model.validate();
    train.beta.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (data.source.empty() != data.target.empty())
    throw ConfigError("data.source and data.target must be given together");
  if (train.epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (train.batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (train.negatives < 1) throw ConfigError("train.negatives must be >= 1");
  if (!(train.adam.learning_rate > 0.0)) throw ConfigError("train.learning_rate must be > 0");
  if (!(train.adam.weight_decay >= 0.0)) throw ConfigError("train.weight_decay must be >= 0");
  if (!(train.adam.beta1 >= 0.0 && train.adam.beta1 < 1.0) || !(train.adam.beta2 >= 0.0 && train.adam.beta2 < 1.0))
    throw ConfigError("train.adam_beta1 and train.adam_beta2 must lie in [0, 1)");
  if (!(train.adam.epsilon > 0.0)) throw ConfigError("train.adam_epsilon must be > 0");
  const auto& s = data.split;
  if (!(s.overlap_fraction >= 0.0 && s.overlap_fraction <= 1.0))
    throw ConfigError("data.split.overlap_fraction must lie in [0, 1]");
  if (!(s.eval_fraction > 0.0 && s.eval_fraction < 1.0)) throw ConfigError("data.split.eval_fraction must lie in (0, 1)");
  if (train.output_dir.empty()) throw ConfigError("train.output_dir must not be empty");
}

json to_json(const Config& c) {
  const auto& syn = c.data.synthetic;
  const auto& sp = c.data.split;
  const auto& b = c.train.beta;
  return json{
      {"data",
       {{"source", c.data.source},
        {"target", c.data.target},
        {"delimiter", delimiter_name(c.data.delimiter)},
        {"synthetic_seed", optional_seed(c.data.synthetic_seed)},
        {"split_seed", optional_seed(c.data.split_seed)},
        {"synthetic",
         {{"users_per_domain", syn.users_per_domain},
          {"items_per_domain", syn.items_per_domain},
          {"clusters", syn.clusters},
          {"overlap_users", syn.overlap_users},
          {"affinity", syn.affinity},
          {"noise", syn.noise},
          {"cluster_skew", syn.cluster_skew}}},
        {"split",
         {{"overlap_fraction", sp.overlap_fraction},
          {"eval_fraction", sp.eval_fraction},
          {"min_user_interactions", sp.thresholds.min_user_interactions},
          {"min_item_interactions", sp.thresholds.min_item_interactions},
          {"normalization", to_string(sp.normalization)},
          {"train_on_overlap_users", sp.train_on_overlap_users}}}}},
      {"model",
       {{"layers", c.model.encoder.layers},
        {"dim", c.model.encoder.dim},
        {"dropout", c.model.encoder.dropout},
        {"reaggregate_per_layer", c.model.encoder.reaggregate_per_layer},
        {"leaky_slope", c.model.encoder.leaky_slope},
        {"group_size", c.model.group_size},
        {"heads", c.model.heads},
        {"sigma1_activation", to_string(c.model.sigma1)},
        {"sigma1_scale", c.model.sigma1_scale},
        {"learned_prior", c.model.learned_prior}}},
      {"train",
       {{"seed", optional_seed(c.train.seed)},
        {"epochs", c.train.epochs},
        {"batch_size", c.train.batch_size},
        {"negatives", c.train.negatives},
        {"learning_rate", c.train.adam.learning_rate},
        {"weight_decay", c.train.adam.weight_decay},
        {"adam_beta1", c.train.adam.beta1},
        {"adam_beta2", c.train.adam.beta2},
        {"adam_epsilon", c.train.adam.epsilon},
        {"warmup", c.train.warmup},
        {"beta", b.beta},
        {"beta_overrides",
         {{"user_source", optional_number(b.user_source)},
          {"item_source", optional_number(b.item_source)},
          {"user_target", optional_number(b.user_target)},
          {"item_target", optional_number(b.item_target)},
          {"domain_source", optional_number(b.domain_source)},
          {"domain_target", optional_number(b.domain_target)}}},
        {"exact_reconstruction", c.train.exact_reconstruction},
        {"output_dir", c.train.output_dir}}},
      {"eval", {{"every", c.eval.every}, {"patience", c.eval.patience}}},
      {"ablation", {{"variant", to_string(c.model.variant)}}},
  };
}

namespace {

void check_keys(const json& given, const json& schema, const std::string& path) {
  if (!given.is_object()) throw ConfigError("config: '" + (path.empty() ? "<root>" : path) + "' must be an object");
  for (auto it = given.begin(); it != given.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!schema.contains(it.key())) throw ConfigError("config: unknown key '" + key + "'");
    if (schema[it.key()].is_object()) check_keys(it.value(), schema[it.key()], key);
  }
}

void merge_into(json& base, const json& given) {
  for (auto it = given.begin(); it != given.end(); ++it) {
    if (base[it.key()].is_object())
      merge_into(base[it.key()], it.value());
    else
      base[it.key()] = it.value();
  }
}

class Reader {
 public:
  explicit Reader(const json& root) : root_(root) {}

  const json& at(const std::string& path) const {
    const json* node = &root_;
    std::size_t start = 0;
    while (true) {
      const auto dot = path.find('.', start);
      node = &node->at(path.substr(start, dot - start));
      if (dot == std::string::npos) return *node;
      start = dot + 1;
    }
  }

  std::size_t size(const std::string& path) const {
    const auto& v = at(path);
    if (v.is_number_unsigned()) return v.get<std::size_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return v.get<std::size_t>();
    throw ConfigError("config: '" + path + "' must be a non-negative integer");
  }
  double number(const std::string& path) const {
    const auto& v = at(path);
    if (!v.is_number() || !std::isfinite(v.get<double>())) throw ConfigError("config: '" + path + "' must be a number");
    return v.get<double>();
  }
  std::optional<double> optional_number(const std::string& path) const {
    return at(path).is_null() ? std::nullopt : std::optional<double>(number(path));
  }
  std::optional<std::uint64_t> optional_seed(const std::string& path) const {
    return at(path).is_null() ? std::nullopt : std::optional<std::uint64_t>(size(path));
  }
  bool boolean(const std::string& path) const {
    const auto& v = at(path);
    if (!v.is_boolean()) throw ConfigError("config: '" + path + "' must be true or false");
    return v.get<bool>();
  }
  std::string string(const std::string& path) const {
    const auto& v = at(path);
    if (!v.is_string()) throw ConfigError("config: '" + path + "' must be a string");
    return v.get<std::string>();
  }

 private:
  const json& root_;
};

json default_json() { return to_json(Config{}); }

template <typename F>
auto parse_enum(const std::string& path, F&& parse) {
  try {
    return parse();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("config: '" + path + "': " + e.what());
  }
}

}  // namespace

Config config_from_json(const json& given) {
  const json schema = default_json();
  check_keys(given, schema, "");
  json merged = schema;
  merge_into(merged, given);
  const Reader r(merged);
  Config c;
  c.data.source = r.string("data.source");
  c.data.target = r.string("data.target");
  const auto delim = r.string("data.delimiter");
  if (delim == "tab")
    c.data.delimiter = '\t';
  else if (delim.size() == 1)
    c.data.delimiter = delim[0];
  else
    throw ConfigError("config: 'data.delimiter' must be one character or \"tab\"");
  c.data.synthetic_seed = r.optional_seed("data.synthetic_seed");
  c.data.split_seed = r.optional_seed("data.split_seed");
  auto& syn = c.data.synthetic;
  syn.users_per_domain = r.size("data.synthetic.users_per_domain");
  syn.items_per_domain = r.size("data.synthetic.items_per_domain");
  syn.clusters = r.size("data.synthetic.clusters");
  syn.overlap_users = r.size("data.synthetic.overlap_users");
  syn.affinity = r.number("data.synthetic.affinity");
  syn.noise = r.number("data.synthetic.noise");
  syn.cluster_skew = r.number("data.synthetic.cluster_skew");
  auto& sp = c.data.split;
  sp.overlap_fraction = r.number("data.split.overlap_fraction");
  sp.eval_fraction = r.number("data.split.eval_fraction");
  sp.thresholds.min_user_interactions = r.size("data.split.min_user_interactions");
  sp.thresholds.min_item_interactions = r.size("data.split.min_item_interactions");
  sp.normalization = parse_enum("data.split.normalization",
                                [&] { return parse_normalization(r.string("data.split.normalization")); });
  sp.train_on_overlap_users = r.boolean("data.split.train_on_overlap_users");
  syn.thresholds = sp.thresholds;

  auto& m = c.model;
  m.encoder.layers = r.size("model.layers");
  m.encoder.dim = r.size("model.dim");
  m.encoder.dropout = r.number("model.dropout");
  m.encoder.reaggregate_per_layer = r.boolean("model.reaggregate_per_layer");
  m.encoder.leaky_slope = r.number("model.leaky_slope");
  m.group_size = r.size("model.group_size");
  m.heads = r.size("model.heads");
  m.sigma1 = parse_enum("model.sigma1_activation",
                        [&] { return parse_sigma_activation(r.string("model.sigma1_activation")); });
  m.sigma1_scale = r.number("model.sigma1_scale");
  m.learned_prior = r.boolean("model.learned_prior");
  m.variant = parse_enum("ablation.variant", [&] { return parse_variant(r.string("ablation.variant")); });

  auto& t = c.train;
  t.seed = r.optional_seed("train.seed");
  t.epochs = r.size("train.epochs");
  t.batch_size = r.size("train.batch_size");
  t.negatives = r.size("train.negatives");
  t.adam.learning_rate = r.number("train.learning_rate");
  t.adam.weight_decay = r.number("train.weight_decay");
  t.adam.beta1 = r.number("train.adam_beta1");
  t.adam.beta2 = r.number("train.adam_beta2");
  t.adam.epsilon = r.number("train.adam_epsilon");
  t.warmup = r.size("train.warmup");
  t.beta.beta = r.number("train.beta");
  t.beta.user_source = r.optional_number("train.beta_overrides.user_source");
  t.beta.item_source = r.optional_number("train.beta_overrides.item_source");
  t.beta.user_target = r.optional_number("train.beta_overrides.user_target");
  t.beta.item_target = r.optional_number("train.beta_overrides.item_target");
  t.beta.domain_source = r.optional_number("train.beta_overrides.domain_source");
  t.beta.domain_target = r.optional_number("train.beta_overrides.domain_target");
  t.exact_reconstruction = r.boolean("train.exact_reconstruction");
  t.output_dir = r.string("train.output_dir");

  c.eval.every = r.size("eval.every");
  c.eval.patience = r.size("eval.patience");
  c.validate();
  return c;
}

Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

namespace {

void collect_leaves(const json& node, const std::string& path, std::vector<std::string>& out) {
  for (auto it = node.begin(); it != node.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (it.value().is_object())
      collect_leaves(it.value(), key, out);
    else
      out.push_back(key);
  }
}

std::string resolve_key(const json& schema, const std::string& key) {
  std::vector<std::string> leaves;
  collect_leaves(schema, "", leaves);
  for (const auto& l : leaves)
    if (l == key) return l;
  std::vector<std::string> matches;
  for (const auto& l : leaves) {
    const auto dot = l.rfind('.');
    if (l.substr(dot + 1) == key) matches.push_back(l);
  }
  if (matches.empty()) throw ConfigError("unknown option '--" + key + "'");
  if (matches.size() > 1) throw ConfigError("option '--" + key + "' is ambiguous; use " + matches[0] + " or " + matches[1]);
  return matches.front();
}

json parse_value(const json& like, const std::string& key, const std::string& text) {
  auto fail = [&](const char* what) { return ConfigError("--" + key + ": '" + text + "' is not " + what); };
  if (like.is_boolean()) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw fail("a boolean");
  }
  if (like.is_string()) return text;
  std::size_t used = 0;
  try {
    if (like.is_number_unsigned() || like.is_number_integer() || (like.is_null() && key.find("seed") != std::string::npos)) {
      if (!text.empty() && text[0] == '-') throw fail("a non-negative integer");
      const auto v = std::stoull(text, &used);
      if (used != text.size()) throw fail("a non-negative integer");
      return v;
    }
    const double v = std::stod(text, &used);
    if (used != text.size()) throw fail("a number");
    return v;
  } catch (const std::logic_error&) {
    throw fail("a valid value");
  }
}

json& node_at(json& root, const std::string& path) {
  json* node = &root;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    node = &(*node)[path.substr(start, dot - start)];
    if (dot == std::string::npos) return *node;
    start = dot + 1;
  }
}

}  // namespace

void apply_overrides(json& j, const std::vector<std::pair<std::string, std::string>>& overrides) {
  json schema = default_json();
  for (const auto& [key, text] : overrides) {
    const std::string path = resolve_key(schema, key);
    const json value = parse_value(node_at(schema, path), key, text);
    node_at(j, path) = value;
  }
}

bool override_is_flag(const std::string& key) {
  json schema = default_json();
  return node_at(schema, resolve_key(schema, key)).is_boolean();
}

Config resolve_config(const std::string& path, const std::vector<std::pair<std::string, std::string>>& overrides) {
  json j = json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    try {
      j = json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
      throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
    }
    check_keys(j, default_json(), "");
  }
  apply_overrides(j, overrides);
  return config_from_json(j);
}

}  // namespace prefmatch
