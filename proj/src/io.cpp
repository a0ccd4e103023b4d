#include "prefmatch/io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <set>

namespace prefmatch {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'P', 'M', 'C', 'D', 'R', 'B', 'I', 'N'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "model.bin I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in, const char* what) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw FormatError(std::string("model.bin: truncated ") + what);
  return v;
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in, const char* what, std::uint64_t limit) {
  const auto n = get<std::uint64_t>(in, what);
  if (n > limit) throw FormatError(std::string("model.bin: implausible length for ") + what);
  std::string s(n, '\0');
  if (!in.read(s.data(), static_cast<std::streamsize>(n))) throw FormatError(std::string("model.bin: truncated ") + what);
  return s;
}

}  // namespace

void write_model(std::ostream& out, const Config& config, const ModelParams& params) {
  out.write(kMagic, sizeof kMagic);
  put(out, kVersion);
  put_string(out, to_json(config).dump());
  const auto named = params.named();
  put<std::uint64_t>(out, named.size());
  for (const auto& p : named) {
    put_string(out, p.name);
    put<std::uint64_t>(out, p.tensor.rank());
    for (auto d : p.tensor.shape()) put<std::uint64_t>(out, d);
    const auto& v = p.tensor.values();
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  }
  if (!out) throw FormatError("model.bin: write failed");
}

void save_model(const std::string& path, const Config& config, const ModelParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  write_model(out, config, params);
}

SavedModel read_model(std::istream& in) {
  char magic[sizeof kMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw FormatError("model.bin: bad magic");
  const auto version = get<std::uint32_t>(in, "version");
  if (version != kVersion) throw FormatError("model.bin: unsupported version " + std::to_string(version));
  SavedModel m;
  try {
    m.config = config_from_json(json::parse(get_string(in, "config", 1u << 24)));
  } catch (const json::exception& e) {
    throw FormatError(std::string("model.bin: bad config: ") + e.what());
  }
  const auto count = get<std::uint64_t>(in, "tensor count");
  if (count > 100000) throw FormatError("model.bin: implausible tensor count");
  for (std::uint64_t i = 0; i < count; ++i) {
    m.names.push_back(get_string(in, "tensor name", 4096));
    const auto rank = get<std::uint64_t>(in, "rank");
    if (rank > 8) throw FormatError("model.bin: implausible rank");
    Shape shape;
    for (std::uint64_t r = 0; r < rank; ++r) shape.push_back(get<std::uint64_t>(in, "dims"));
    std::vector<double> values(element_count(shape));
    if (!in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double))))
      throw FormatError("model.bin: truncated values of " + m.names.back());
    m.shapes.push_back(std::move(shape));
    m.values.push_back(std::move(values));
  }
  return m;
}

SavedModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open model file '" + path + "'");
  return read_model(in);
}

void SavedModel::restore_into(ModelParams& params) const {
  auto named = params.named();
  if (named.size() != names.size())
    throw FormatError("model.bin: holds " + std::to_string(names.size()) + " tensors, model expects " +
                      std::to_string(named.size()));
  for (std::size_t i = 0; i < named.size(); ++i) {
    if (named[i].name != names[i]) throw FormatError("model.bin: expected tensor '" + named[i].name + "', found '" + names[i] + "'");
    if (named[i].tensor.shape() != shapes[i])
      throw FormatError("model.bin: '" + names[i] + "' has shape " + to_string(shapes[i]) + ", model expects " +
                        to_string(named[i].tensor.shape()));
    std::copy(values[i].begin(), values[i].end(), named[i].tensor.mutable_values().begin());
  }
}

json to_json(const RankingReport& r) {
  json ndcg = json::object(), hr = json::object();
  for (auto k : kCutoffs) {
    ndcg[std::to_string(k)] = r.ndcg.at(k);
    hr[std::to_string(k)] = r.hr.at(k);
  }
  return json{{"domain", r.domain}, {"mrr", r.mrr}, {"ndcg", ndcg}, {"hr", hr}, {"users", r.users}, {"seed", r.seed}};
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  out << j.dump(2) << '\n';
}

void write_metrics(const std::string& path, const RankingReport& report) { write_json(path, to_json(report)); }

json split_manifest(const DomainPair& pair) {
  json overlap = json::array(), val = json::array(), test = json::array(), edges = json::array();
  for (const auto& [id, role] : pair.overlap_roles) {
    overlap.push_back(id);
    if (role == SplitRole::Validation) val.push_back(id);
    if (role == SplitRole::Test) test.push_back(id);
  }
  for (const auto& e : pair.held_out)
    edges.push_back({{"user_id", e.user_id}, {"item_id", e.item_id}, {"domain", to_string(e.domain)},
                     {"role", to_string(e.role)}});
  return json{{"seed", pair.seed},
              {"overlap_users", overlap},
              {"val_users", val},
              {"test_users", test},
              {"held_out_edges", edges}};
}

}  // namespace prefmatch
