// ibtree: train, extract, evaluate and compare decision-tree policies.

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ibtree/errors.hpp"
#include "ibtree/evaluate.hpp"
#include "ibtree/harness.hpp"
#include "ibtree/tree.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunOverrides {
  std::optional<std::size_t> trials;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output;
  std::optional<std::string> run_dir;
  std::optional<std::size_t> threads;
  std::optional<std::size_t> episodes;
  bool no_wall_time = false;
  bool quiet = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--trials", trials, "Number of seeded trials");
    cmd->add_option("--seed", seed, "Base seed; trial i uses seed + i");
    cmd->add_option("-o,--output", output, "Results CSV path");
    cmd->add_option("--run-dir", run_dir, "Directory for saved trees and value memories");
    cmd->add_option("--threads", threads, "Worker pool width (0: all cores)");
    cmd->add_option("--episodes", episodes, "Training episodes per trial");
    cmd->add_flag("--no-wall-time", no_wall_time, "Write 0 for wall_time_s");
    cmd->add_flag("-q,--quiet", quiet, "Suppress per-trial progress");
  }

  void apply(json& doc) const {
    if (trials) doc["trials"] = *trials;
    if (seed) doc["base_seed"] = *seed;
    if (output) doc["output_path"] = *output;
    if (run_dir) doc["run_dir"] = *run_dir;
    if (threads) doc["threads"] = *threads;
    if (episodes) {
      doc["learner"]["episodes"] = *episodes;
      doc.erase("episodes_per_state");
    }
    if (no_wall_time) doc["record_wall_time"] = false;
  }
};

json read_config_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ibtree::InvalidInput("cannot open config file " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ibtree::ParseError(path + " byte " + std::to_string(e.byte), "malformed JSON");
  }
}

ibtree::ExperimentConfig parse_config(const json& doc, const std::string& source) {
  try {
    ibtree::ExperimentConfig c = ibtree::ExperimentConfig::from_json(doc);
    c.validate();
    return c;
  } catch (const ibtree::ParseError& e) {
    throw ibtree::ParseError(source + ":" + e.location(), e.what());
  } catch (const ibtree::InvalidInput& e) {
    throw ibtree::InvalidInput(source + ": " + e.what());
  }
}

int run_and_write(const ibtree::ExperimentConfig& config, bool quiet) {
  std::ostream* log = quiet ? nullptr : &std::cerr;
  const ibtree::ExperimentResult result = ibtree::run_experiment(config, log);
  ibtree::write_csv(config.output_path, result.rows());
  ibtree::save_run(config.effective_run_dir(), config, result);

  std::cout << "wrote " << config.output_path << " and " << config.effective_run_dir().string()
            << '\n';
  if (!result.summary) {
    std::cerr << "error: all " << config.trials << " trials failed\n";
    return 1;
  }
  const ibtree::ResultRow& s = *result.summary;
  std::cout << config.method << " on " << s.env << ": mean_reward "
            << ibtree::format_number(s.mean_reward) << " (std "
            << ibtree::format_number(s.reward_std) << "), depth "
            << ibtree::format_number(s.tree_depth) << ", nodes "
            << ibtree::format_number(s.tree_nodes);
  if (result.failed() > 0) std::cout << ", " << result.failed() << " failed trial(s)";
  std::cout << '\n';
  return 0;
}

std::string sweep_suffix(const std::string& param, const std::string& value) {
  // "depth_limit", "0.5" -> "_depth_limit0p5"
  std::string s = "_";
  for (char c : param) s += std::isalnum(static_cast<unsigned char>(c)) || c == '_' ? c : '_';
  for (char c : value) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '-') {
      s += c;
    } else if (c == '.') {
      s += 'p';
    } else {
      s += '_';
    }
  }
  return s;
}

std::vector<std::string> split_values(const std::string& text) {
  // Top-level commas separate values; commas inside brackets stay.
  std::vector<std::string> out;
  std::string cur;
  int depth = 0;
  for (char c : text) {
    if (c == '[' || c == '{') ++depth;
    if (c == ']' || c == '}') --depth;
    if (c == ',' && depth == 0) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decision-tree policies from iterative bounding MDPs"};
  app.require_subcommand(1);

  RunOverrides train_opts, baseline_opts, sweep_opts;
  std::string train_config, baseline_config, sweep_config;

  auto* train = app.add_subcommand("train", "Train the episodic-control learner and extract trees");
  train->add_option("config", train_config, "Experiment config JSON")->required();
  train_opts.attach(train);

  auto* baseline = app.add_subcommand("baseline", "Fit VIPER-lite trees to a backward-induction expert");
  baseline->add_option("config", baseline_config, "Experiment config JSON")->required();
  baseline_opts.attach(baseline);

  std::string run_dir, extract_out;
  std::size_t extract_trial = 0;
  auto* extract = app.add_subcommand("extract", "Re-extract a tree from a saved training run");
  extract->add_option("run-dir", run_dir, "Run directory written by train")->required();
  extract->add_option("--trial", extract_trial, "Trial index");
  extract->add_option("-o,--output", extract_out, "Tree JSON path")->required();

  std::string tree_path, eval_env, eval_config;
  std::size_t eval_m = 7, eval_episodes = 100;
  std::uint64_t eval_seed = 0;
  bool describe = false;
  auto* eval = app.add_subcommand("eval", "Evaluate a tree on the base environment");
  eval->add_option("--tree", tree_path, "Tree JSON path")->required();
  auto* env_opt = eval->add_option("--env", eval_env, "prereqworld | potholeworld | cartpole");
  auto* cfg_opt = eval->add_option("--config", eval_config, "Take the environment from a config");
  env_opt->excludes(cfg_opt);
  eval->add_option("--m", eval_m, "PrereqWorld item count");
  eval->add_option("--episodes", eval_episodes, "Evaluation episodes");
  eval->add_option("--seed", eval_seed, "Evaluation seed");
  eval->add_flag("--describe", describe, "Print the tree with thresholds in environment units");

  std::string sweep_param, sweep_values;
  auto* sweep = app.add_subcommand("sweep", "Run one experiment per value of a parameter");
  sweep->add_option("config", sweep_config, "Experiment config JSON")->required();
  sweep->add_option("--param", sweep_param, "Parameter name, e.g. m or depth_limit")->required();
  sweep->add_option("--values", sweep_values, "Comma-separated values")->required();
  sweep_opts.attach(sweep);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << '\n' << app.help();
    return 2;
  }

  try {
    if (train->parsed() || baseline->parsed()) {
      const bool is_train = train->parsed();
      const std::string& path = is_train ? train_config : baseline_config;
      json doc = read_config_json(path);
      if (!is_train) doc["method"] = ibtree::kMethodViper;
      (is_train ? train_opts : baseline_opts).apply(doc);
      const ibtree::ExperimentConfig config = parse_config(doc, path);
      return run_and_write(config, (is_train ? train_opts : baseline_opts).quiet);
    }

    if (extract->parsed()) {
      const ibtree::TreeNode tree = ibtree::extract_from_run(run_dir, extract_trial);
      std::ofstream out(extract_out);
      if (!out) throw ibtree::InvalidInput("cannot write " + extract_out);
      out << ibtree::tree_serialize(tree, 2) << '\n';
      const ibtree::TreeMetrics m = ibtree::tree_metrics(tree);
      std::cout << "wrote " << extract_out << " (depth " << m.depth << ", nodes " << m.node_count
                << ")\n";
      return 0;
    }

    if (eval->parsed()) {
      ibtree::EnvConfig env_cfg;
      if (!eval_config.empty()) {
        env_cfg = parse_config(read_config_json(eval_config), eval_config).env;
      } else if (!eval_env.empty()) {
        env_cfg.name = eval_env;
        env_cfg.m = eval_m;
      } else {
        throw ibtree::InvalidInput("eval needs --env or --config");
      }
      std::ifstream in(tree_path);
      if (!in) throw ibtree::InvalidInput("cannot open tree file " + tree_path);
      std::stringstream ss;
      ss << in.rdbuf();
      const ibtree::TreeNode tree = ibtree::tree_deserialize(ss.str());
      const auto env = ibtree::make_environment(env_cfg);
      ibtree::Rng rng(eval_seed);
      const ibtree::EvalStats stats = ibtree::evaluate_policy(tree, *env, eval_episodes, rng);
      const ibtree::TreeMetrics m = ibtree::tree_metrics(tree);
      std::cout << "mean_reward " << ibtree::format_number(stats.mean) << " reward_std "
                << ibtree::format_number(stats.std) << " depth " << m.depth << " nodes "
                << m.node_count << '\n';
      if (describe) std::cout << ibtree::describe_tree(tree, *env);
      return 0;
    }

    if (sweep->parsed()) {
      const json base = read_config_json(sweep_config);
      const std::vector<std::string> values = split_values(sweep_values);
      if (values.empty()) throw ibtree::InvalidInput("--values is empty");
      const ibtree::ExperimentConfig template_cfg = [&] {
        json doc = base;
        sweep_opts.apply(doc);
        return parse_config(doc, sweep_config);
      }();
      const fs::path out(template_cfg.output_path);
      int status = 0;
      for (const std::string& v : values) {
        json doc = base;
        sweep_opts.apply(doc);
        ibtree::set_config_param(doc, sweep_param, v);
        const std::string suffix = sweep_suffix(sweep_param, v);
        doc["output_path"] =
            (out.parent_path() / (out.stem().string() + suffix + out.extension().string())).string();
        if (template_cfg.run_dir) {
          doc["run_dir"] = *template_cfg.run_dir + suffix;
        } else {
          doc.erase("run_dir");
        }
        const ibtree::ExperimentConfig config =
            parse_config(doc, sweep_config + " [" + sweep_param + "=" + v + "]");
        status = std::max(status, run_and_write(config, sweep_opts.quiet));
      }
      return status;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
