#pragma once

// Experiment orchestration: JSON config parsing, seeded multi-trial runs on a
// small worker pool, and the results CSV.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ibtree/baseline.hpp"
#include "ibtree/env.hpp"
#include "ibtree/ibmdp.hpp"
#include "ibtree/learner.hpp"
#include "ibtree/tree.hpp"
#include "json.hpp"

namespace ibtree {

inline constexpr const char* kMethodCustard = "custard-mfec";
inline constexpr const char* kMethodViper = "viper-bi";
inline constexpr const char* kCsvHeader =
    "method,env,trial,episode,mean_reward,reward_std,tree_depth,tree_nodes,depth_limit,wall_time_s";

struct EnvConfig {
  std::string name = "prereqworld";  // prereqworld | potholeworld | cartpole
  std::size_t m = 7;
  std::optional<std::vector<double>> lane2;
  std::optional<std::vector<double>> lane3;

  static EnvConfig from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;
};

std::unique_ptr<Environment> make_environment(const EnvConfig& config);

struct BaselineConfig {
  std::optional<std::size_t> max_depth;  // falls back to the IBMDP depth limit
  std::size_t dagger_iters = 10;
  std::size_t rollouts_per_iter = 10;
  std::size_t selection_episodes = 100;  // evaluations used to pick the best iteration
  std::size_t max_samples = 200000;
  double resolution = 0.01;  // PotholeWorld grid width

  static BaselineConfig from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;
};

nlohmann::json ibmdp_config_to_json(const IbmdpConfig& config);
IbmdpConfig ibmdp_config_from_json(const nlohmann::json& doc);
nlohmann::json learner_config_to_json(const LearnerConfig& config);
LearnerConfig learner_config_from_json(const nlohmann::json& doc);

struct ExperimentConfig {
  std::string method = kMethodCustard;
  EnvConfig env;
  IbmdpConfig ibmdp;
  LearnerConfig learner;
  // PrereqWorld only: when set, the training budget is this many episodes
  // per base state (2^m of them), overriding learner.episodes.
  std::optional<std::size_t> episodes_per_state;
  BaselineConfig baseline;
  std::size_t trials = 10;
  std::uint64_t base_seed = 0;
  std::string output_path = "results.csv";
  std::optional<std::string> run_dir;  // default: output stem + "_run"
  std::size_t threads = 0;             // 0: one per hardware thread
  bool record_wall_time = true;

  // Unknown keys are rejected with ParseError naming the JSON pointer.
  static ExperimentConfig from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;
  void validate() const;

  LearnerConfig effective_learner() const;
  std::filesystem::path effective_run_dir() const;
};

ExperimentConfig load_experiment_config(const std::filesystem::path& path);

// Sets one parameter by name, e.g. "m", "depth_limit", "learner.k". A bare
// name is looked up in every config section and must be unambiguous. The
// value text is parsed as JSON ("4", "null", "[1.5,2]").
void set_config_param(nlohmann::json& doc, const std::string& name, const std::string& value);

struct ResultRow {
  std::string method;
  std::string env;
  std::string trial;  // trial index, or "summary"
  std::optional<std::size_t> episode;
  double mean_reward = 0.0;
  double reward_std = 0.0;
  double tree_depth = 0.0;
  double tree_nodes = 0.0;
  std::optional<std::size_t> depth_limit;
  double wall_time_s = 0.0;
};

struct TrialOutcome {
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  std::vector<ResultRow> rows;  // the last row is the final evaluation
  std::optional<TreeNode> tree;
  std::optional<nlohmann::json> q_memory;  // masked Q, custard-mfec only
};

struct ExperimentResult {
  std::vector<TrialOutcome> trials;  // in trial order
  std::optional<ResultRow> summary;  // absent when every trial failed

  std::size_t failed() const;
  std::vector<ResultRow> rows() const;
};

// Runs one trial with seed base_seed + trial.
TrialOutcome run_trial(const ExperimentConfig& config, std::size_t trial);

// Summary over the final rows of successful trials: mean of per-trial means,
// sample std across trials, mean depth and node count, summed wall time.
std::optional<ResultRow> summarize(const ExperimentConfig& config,
                                   const std::vector<TrialOutcome>& trials);

// Pool width: config.threads (or hardware concurrency), capped by the
// IBTREE_THREADS environment variable and by the trial count.
std::size_t pool_width(const ExperimentConfig& config);

// Runs every trial, logging progress and failures to `log` when given.
ExperimentResult run_experiment(const ExperimentConfig& config, std::ostream* log = nullptr);

std::string format_number(double value);
std::string format_row(const ResultRow& row);
void write_csv(const std::filesystem::path& path, const std::vector<ResultRow>& rows);
std::vector<ResultRow> read_csv(const std::filesystem::path& path);

// Writes config.json plus trial_<n>/tree.json (and q.json for the learner).
void save_run(const std::filesystem::path& dir, const ExperimentConfig& config,
              const ExperimentResult& result);

// Re-extracts the greedy tree from a saved run's masked Q memory.
TreeNode extract_from_run(const std::filesystem::path& dir, std::size_t trial);

// Expert and state mapping used by the viper-bi baseline.
struct ExpertSetup {
  FiniteMdp mdp;
  ExpertPolicy expert;
  StateMapper mapper;
};
// `env` must be the environment built from config.env and outlive the mapper.
ExpertSetup make_expert(const ExperimentConfig& config, const Environment& env);

}  // namespace ibtree
