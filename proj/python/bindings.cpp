#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <string>
#include <tuple>
#include <vector>

#include "ibtree/baseline.hpp"
#include "ibtree/errors.hpp"
#include "ibtree/evaluate.hpp"
#include "ibtree/harness.hpp"
#include "ibtree/ibmdp.hpp"
#include "ibtree/tree.hpp"
#include "json.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

ibtree::ExperimentConfig config_from_text(const std::string& text) {
  ibtree::ExperimentConfig c = ibtree::ExperimentConfig::from_json(json::parse(text));
  c.validate();
  return c;
}

py::dict row_to_dict(const ibtree::ResultRow& r) {
  py::dict d;
  d["method"] = r.method;
  d["env"] = r.env;
  d["trial"] = r.trial;
  d["episode"] = r.episode ? py::cast(*r.episode) : py::none();
  d["mean_reward"] = r.mean_reward;
  d["reward_std"] = r.reward_std;
  d["tree_depth"] = r.tree_depth;
  d["tree_nodes"] = r.tree_nodes;
  d["depth_limit"] = r.depth_limit ? py::cast(*r.depth_limit) : py::none();
  d["wall_time_s"] = r.wall_time_s;
  return d;
}

// Owns its environment so Python never sees a dangling reference.
class WrappedEnv {
 public:
  WrappedEnv(const std::string& env_json, const std::string& ibmdp_json, std::uint64_t seed)
      : env_(ibtree::make_environment(ibtree::EnvConfig::from_json(json::parse(env_json)))),
        ibmdp_(*env_, ibtree::ibmdp_config_from_json(json::parse(ibmdp_json))),
        rng_(seed) {}

  std::size_t n_actions() const { return ibmdp_.n_actions(); }
  std::size_t legal_count() const { return ibmdp_.legal_count(state_.splits_since_base); }

  py::dict reset() {
    state_ = ibmdp_.reset(rng_);
    return observe();
  }

  std::tuple<py::dict, double, bool, bool> step(std::size_t action) {
    ibtree::WrappedStep s = ibmdp_.step(state_, ibmdp_.decode(action), rng_);
    state_ = std::move(s.next);
    return {observe(), s.reward, s.terminal, s.truncated};
  }

 private:
  py::dict observe() const {
    py::dict d;
    d["lower"] = state_.lower;
    d["upper"] = state_.upper;
    d["base"] = state_.base.features;
    d["splits_since_base"] = state_.splits_since_base;
    return d;
  }

  std::unique_ptr<ibtree::Environment> env_;
  ibtree::Ibmdp ibmdp_;
  ibtree::Rng rng_;
  ibtree::WrappedState state_;
};

}  // namespace

PYBIND11_MODULE(_ibtree, m) {
  m.doc() = "Decision-tree policies learned through iterative bounding MDPs";

  py::register_exception<ibtree::InvalidInput>(m, "InvalidInput", PyExc_ValueError);
  py::register_exception<ibtree::ParseError>(m, "ParseError", PyExc_ValueError);

  m.attr("CSV_HEADER") = ibtree::kCsvHeader;

  m.def(
      "run_experiment",
      [](const std::string& config_json) {
        const ibtree::ExperimentConfig config = config_from_text(config_json);
        ibtree::ExperimentResult result;
        {
          py::gil_scoped_release release;
          result = ibtree::run_experiment(config);
        }
        py::list rows;
        for (const auto& r : result.rows()) rows.append(row_to_dict(r));
        py::list errors;
        for (const auto& t : result.trials) {
          if (!t.ok) errors.append(py::make_tuple(t.trial, t.error));
        }
        py::dict out;
        out["rows"] = rows;
        out["failures"] = errors;
        return out;
      },
      py::arg("config_json"), "Run every trial of an experiment config; returns result rows.");

  m.def(
      "run_trial",
      [](const std::string& config_json, std::size_t trial) {
        const ibtree::ExperimentConfig config = config_from_text(config_json);
        ibtree::TrialOutcome t;
        {
          py::gil_scoped_release release;
          t = ibtree::run_trial(config, trial);
        }
        if (!t.ok) throw ibtree::InvalidInput("trial " + std::to_string(trial) + " failed: " + t.error);
        py::list rows;
        for (const auto& r : t.rows) rows.append(row_to_dict(r));
        py::dict out;
        out["rows"] = rows;
        out["tree"] = ibtree::tree_serialize(*t.tree);
        return out;
      },
      py::arg("config_json"), py::arg("trial") = 0, "Run one trial; returns rows and tree JSON.");

  m.def(
      "evaluate_tree",
      [](const std::string& tree_json, const std::string& env_json, std::size_t episodes,
         std::uint64_t seed) {
        const ibtree::TreeNode tree = ibtree::tree_deserialize(tree_json);
        const auto env = ibtree::make_environment(ibtree::EnvConfig::from_json(json::parse(env_json)));
        ibtree::Rng rng(seed);
        const ibtree::EvalStats s = ibtree::evaluate_policy(tree, *env, episodes, rng);
        return py::make_tuple(s.mean, s.std);
      },
      py::arg("tree_json"), py::arg("env_json"), py::arg("episodes") = 100, py::arg("seed") = 0,
      "Mean and sample std of episode returns of a tree on the base environment.");

  m.def(
      "tree_metrics",
      [](const std::string& tree_json) {
        const ibtree::TreeMetrics mt = ibtree::tree_metrics(ibtree::tree_deserialize(tree_json));
        return py::make_tuple(mt.depth, mt.node_count);
      },
      py::arg("tree_json"), "(depth, node count) of a tree.");

  m.def(
      "tree_act",
      [](const std::string& tree_json, const std::vector<double>& features) {
        return ibtree::tree_act(ibtree::tree_deserialize(tree_json), features);
      },
      py::arg("tree_json"), py::arg("features"), "Action a tree takes for normalized features.");

  m.def(
      "optimal_start_value",
      [](const std::string& config_json) {
        const ibtree::ExperimentConfig config = config_from_text(config_json);
        const auto env = ibtree::make_environment(config.env);
        const ibtree::ExpertSetup setup = ibtree::make_expert(config, *env);
        return setup.expert.value(setup.mdp.start);
      },
      py::arg("config_json"), "Backward-induction value of the start state.");

  m.def(
      "fit_tree",
      [](const std::vector<std::vector<double>>& features, const std::vector<std::size_t>& labels,
         const std::vector<double>& weights, std::size_t n_classes,
         std::optional<std::size_t> max_depth) {
        if (features.size() != labels.size() || (!weights.empty() && weights.size() != labels.size())) {
          throw ibtree::InvalidInput("features, labels and weights must have equal length");
        }
        std::vector<ibtree::LabeledSample> samples;
        for (std::size_t i = 0; i < labels.size(); ++i) {
          samples.push_back({features[i], labels[i], weights.empty() ? 1.0 : weights[i]});
        }
        return ibtree::tree_serialize(ibtree::fit_tree(samples, n_classes, max_depth));
      },
      py::arg("features"), py::arg("labels"), py::arg("weights") = std::vector<double>{},
      py::arg("n_classes"), py::arg("max_depth") = py::none(),
      "Weighted-misclassification tree fit; returns tree JSON.");

  m.def(
      "extract_from_run",
      [](const std::string& run_dir, std::size_t trial) {
        return ibtree::tree_serialize(ibtree::extract_from_run(run_dir, trial));
      },
      py::arg("run_dir"), py::arg("trial") = 0, "Re-extract a tree from a saved run directory.");

  py::class_<WrappedEnv>(m, "WrappedEnv")
      .def(py::init<const std::string&, const std::string&, std::uint64_t>(), py::arg("env_json"),
           py::arg("ibmdp_json") = "{}", py::arg("seed") = 0)
      .def_property_readonly("n_actions", &WrappedEnv::n_actions)
      .def("legal_count", &WrappedEnv::legal_count)
      .def("reset", &WrappedEnv::reset)
      .def("step", &WrappedEnv::step, py::arg("action"));
}
