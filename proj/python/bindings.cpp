#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "prefmatch/cli.hpp"
#include "prefmatch/config.hpp"
#include "prefmatch/gradcheck.hpp"
#include "prefmatch/io.hpp"
#include "prefmatch/trainer.hpp"

namespace py = pybind11;
using namespace prefmatch;

namespace {

using Rows = std::vector<std::vector<double>>;

Tensor to_tensor(const Rows& rows) {
  if (rows.empty() || rows.front().empty()) throw std::invalid_argument("expected a non-empty 2-D array");
  std::vector<double> flat;
  for (const auto& r : rows) {
    if (r.size() != rows.front().size()) throw std::invalid_argument("ragged rows");
    flat.insert(flat.end(), r.begin(), r.end());
  }
  return Tensor::from({rows.size(), rows.front().size()}, flat);
}

// Data, configuration and parameters of one run. Data is regenerated or
// reloaded from the config, so a saved model needs its inputs in place.
class Session {
 public:
  explicit Session(const std::string& config_json)
      : config_(config_from_json(nlohmann::json::parse(config_json))), pair_(load_data(config_)) {
    RngStreams streams(config_.seed());
    Rng init = streams.stream("init");
    params_ = ModelParams::init(config_.model, pair_, init);
  }

  static Session load(const std::string& path) {
    const SavedModel saved = load_model(path);
    Session s(to_json(saved.config).dump());
    saved.restore_into(s.params_);
    return s;
  }

  std::string config() const { return to_json(config_).dump(); }

  py::dict stats() const {
    py::dict d;
    for (auto dom : {Domain::Source, Domain::Target}) {
      const auto& g = pair_.graph(dom);
      d[py::str(to_string(dom))] =
          py::dict(py::arg("users") = g.user_count(), py::arg("items") = g.item_count(), py::arg("interactions") = g.edge_count());
    }
    d["validation"] = pair_.validation.size();
    d["test"] = pair_.test.size();
    return d;
  }

  std::vector<py::dict> train() {
    TrainResult r;
    {
      py::gil_scoped_release release;
      r = prefmatch::train(pair_, config_);
    }
    params_ = r.params;
    std::vector<py::dict> log;
    for (const auto& e : r.log) {
      py::dict d(py::arg("epoch") = e.epoch, py::arg("L_m") = e.loss.matching, py::arg("L_d") = e.loss.domain,
                 py::arg("L_u_source") = e.loss.user_source, py::arg("L_u_target") = e.loss.user_target,
                 py::arg("total") = e.loss.total);
      d["val_mrr"] = e.val_mrr ? py::cast(*e.val_mrr) : py::none();
      log.push_back(d);
    }
    return log;
  }

  std::vector<std::string> evaluate(const std::string& split, bool popularity) const {
    if (split != "test" && split != "validation") throw std::invalid_argument("split must be 'test' or 'validation'");
    std::vector<std::string> out;
    for (const auto& group : by_direction(split == "test" ? pair_.test : pair_.validation)) {
      const auto r = popularity ? popularity_baseline(pair_, group, config_.seed())
                                : prefmatch::evaluate(pair_, params_, config_.model, group, config_.seed());
      out.push_back(to_json(r).dump());
    }
    return out;
  }

  void save(const std::string& path) const { save_model(path, config_, params_); }

 private:
  Config config_;
  DomainPair pair_;
  ModelParams params_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Cross-domain preference matching: training, evaluation and numerical checks";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  m.def("resolve_config",
        [](const std::string& path, const std::vector<std::pair<std::string, std::string>>& overrides) {
          return to_json(resolve_config(path, overrides)).dump();
        },
        py::arg("path") = "", py::arg("overrides") = std::vector<std::pair<std::string, std::string>>{});

  py::class_<Session>(m, "Session")
      .def(py::init<const std::string&>(), py::arg("config_json"))
      .def_static("load", &Session::load, py::arg("path"))
      .def("config", &Session::config)
      .def("stats", &Session::stats)
      .def("train", &Session::train)
      .def("evaluate", &Session::evaluate, py::arg("split") = "test", py::arg("popularity") = false)
      .def("save", &Session::save, py::arg("path"));

  m.def("gaussian_kl", [](const Rows& mp, const Rows& sp, const Rows& mq, const Rows& sq) {
    return gaussian_kl({to_tensor(mp), to_tensor(sp)}, {to_tensor(mq), to_tensor(sq)}).item();
  });
  m.def("matching_loss", [](const Rows& mp, const Rows& sp, const Rows& mq, const Rows& sq) {
    return matching_loss({{to_tensor(mp), to_tensor(sp)}, {to_tensor(mq), to_tensor(sq)}}).item();
  });

  m.def("rank_of",
        [](const std::vector<double>& scores, std::size_t truth, const std::vector<std::size_t>& exclusions) {
          return rank_of(scores, truth, exclusions);
        },
        py::arg("scores"), py::arg("truth"), py::arg("exclusions") = std::vector<std::size_t>{});
  m.def("report_from_ranks",
        [](const std::vector<std::size_t>& ranks, const std::string& domain, std::uint64_t seed) {
          return to_json(report_from_ranks(ranks, domain, seed)).dump();
        },
        py::arg("ranks"), py::arg("domain") = "target", py::arg("seed") = 0);

  m.def("gradcheck",
        [](std::uint64_t seed, std::size_t users, std::size_t items) {
          const auto r = gradcheck_model(make_toy_problem(seed, users, items), seed);
          return py::dict(py::arg("max_relative_error") = r.result.max_relative_error,
                          py::arg("worst") = r.worst_name, py::arg("tensors") = r.tensors,
                          py::arg("entries") = r.entries);
        },
        py::arg("seed") = 1, py::arg("users") = 6, py::arg("items") = 5);

  m.def("run_cli", [](const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int status = run_cli(args, out, err);
    return py::make_tuple(status, out.str(), err.str());
  });
}
