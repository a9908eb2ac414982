#include "ibtree/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <charconv>
#include <cmath>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "ibtree/errors.hpp"
#include "ibtree/evaluate.hpp"

namespace ibtree {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Reads fields out of one JSON object, remembering which keys were consumed
// so leftovers can be reported.
class FieldReader {
 public:
  FieldReader(const json& doc, std::string pointer) : doc_(doc), pointer_(std::move(pointer)) {
    if (!doc_.is_object()) throw ParseError(pointer_.empty() ? "/" : pointer_, "expected an object");
  }

  const json* find(const char* key) {
    seen_.insert(key);
    const auto it = doc_.find(key);
    return it == doc_.end() ? nullptr : &*it;
  }

  std::string where(const char* key) const { return pointer_ + "/" + key; }

  void read(const char* key, std::size_t& out) {
    if (const json* v = find(key)) out = as_count(*v, where(key));
  }
  void read(const char* key, std::uint64_t& out, int) {
    if (const json* v = find(key)) out = as_count(*v, where(key));
  }
  void read(const char* key, std::optional<std::size_t>& out) {
    if (const json* v = find(key)) {
      out = v->is_null() ? std::nullopt : std::optional<std::size_t>(as_count(*v, where(key)));
    }
  }
  void read(const char* key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) throw ParseError(where(key), "expected a number");
      out = v->get<double>();
    }
  }
  void read(const char* key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) throw ParseError(where(key), "expected true or false");
      out = v->get<bool>();
    }
  }
  void read(const char* key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) throw ParseError(where(key), "expected a string");
      out = v->get<std::string>();
    }
  }
  void read(const char* key, std::optional<std::string>& out) {
    if (const json* v = find(key)) {
      if (v->is_null()) {
        out.reset();
        return;
      }
      if (!v->is_string()) throw ParseError(where(key), "expected a string or null");
      out = v->get<std::string>();
    }
  }
  void read(const char* key, std::optional<std::vector<double>>& out) {
    if (const json* v = find(key)) {
      if (v->is_null()) {
        out.reset();
        return;
      }
      if (!v->is_array()) throw ParseError(where(key), "expected an array of numbers");
      std::vector<double> values;
      for (std::size_t i = 0; i < v->size(); ++i) {
        if (!(*v)[i].is_number()) {
          throw ParseError(where(key) + "/" + std::to_string(i), "expected a number");
        }
        values.push_back((*v)[i].get<double>());
      }
      out = std::move(values);
    }
  }

  void finish() const {
    for (const auto& [key, value] : doc_.items()) {
      if (!seen_.contains(key)) throw ParseError(pointer_ + "/" + key, "unknown key");
    }
  }

 private:
  static std::uint64_t as_count(const json& v, const std::string& where) {
    if (!v.is_number_unsigned()) {
      // documents built in code hold small counts as signed integers
      if (v.is_number_integer() && v.get<std::int64_t>() >= 0) {
        return static_cast<std::uint64_t>(v.get<std::int64_t>());
      }
      if (v.is_number_float()) {
        const double d = v.get<double>();
        if (d >= 0.0 && d == std::floor(d) && d < 1.8e19) return static_cast<std::uint64_t>(d);
      }
      throw ParseError(where, "expected a non-negative integer");
    }
    return v.get<std::uint64_t>();
  }

  const json& doc_;
  std::string pointer_;
  std::set<std::string> seen_;
};

json optional_to_json(const std::optional<std::size_t>& v) { return v ? json(*v) : json(nullptr); }

std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json_file(const fs::path& path) {
  const std::string text = read_text_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + " byte " + std::to_string(e.byte), "malformed JSON");
  }
}

void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidInput("cannot write " + path.string());
  out << text;
  if (!out) throw InvalidInput("failed writing " + path.string());
}

}  // namespace

// ---------------------------------------------------------------------------
// Config sections

EnvConfig EnvConfig::from_json(const json& doc) {
  EnvConfig c;
  FieldReader r(doc, "/env");
  r.read("name", c.name);
  c.name = lowercase(c.name);
  r.read("m", c.m);
  r.read("lane2", c.lane2);
  r.read("lane3", c.lane3);
  r.finish();
  return c;
}

json EnvConfig::to_json() const {
  json j = {{"name", name}};
  if (name == "prereqworld") j["m"] = m;
  if (lane2) j["lane2"] = *lane2;
  if (lane3) j["lane3"] = *lane3;
  return j;
}

std::unique_ptr<Environment> make_environment(const EnvConfig& config) {
  const std::string name = lowercase(config.name);
  if (name != "potholeworld" && (config.lane2 || config.lane3)) {
    throw InvalidInput("pothole lists only apply to potholeworld");
  }
  if (name == "prereqworld") return std::make_unique<PrereqWorld>(PrereqSpec::standard(config.m));
  if (name == "potholeworld") {
    PotholeSpec spec = PotholeSpec::standard();
    if (config.lane2) spec.lane2_potholes = *config.lane2;
    if (config.lane3) spec.lane3_potholes = *config.lane3;
    return std::make_unique<PotholeWorld>(std::move(spec));
  }
  if (name == "cartpole") return std::make_unique<CartPole>();
  throw InvalidInput("unknown environment '" + config.name +
                     "' (expected prereqworld, potholeworld or cartpole)");
}

BaselineConfig BaselineConfig::from_json(const json& doc) {
  BaselineConfig c;
  FieldReader r(doc, "/baseline");
  r.read("max_depth", c.max_depth);
  r.read("dagger_iters", c.dagger_iters);
  r.read("rollouts_per_iter", c.rollouts_per_iter);
  r.read("selection_episodes", c.selection_episodes);
  r.read("max_samples", c.max_samples);
  r.read("resolution", c.resolution);
  r.finish();
  return c;
}

json BaselineConfig::to_json() const {
  return {{"max_depth", optional_to_json(max_depth)},
          {"dagger_iters", dagger_iters},
          {"rollouts_per_iter", rollouts_per_iter},
          {"selection_episodes", selection_episodes},
          {"max_samples", max_samples},
          {"resolution", resolution}};
}

json ibmdp_config_to_json(const IbmdpConfig& c) {
  return {{"p", c.p},
          {"zeta", c.zeta},
          {"gamma_b", c.gamma_b},
          {"gamma_w", c.gamma_w},
          {"depth_limit", optional_to_json(c.depth_limit)},
          {"max_wrapped_steps", c.max_wrapped_steps}};
}

IbmdpConfig ibmdp_config_from_json(const json& doc) {
  IbmdpConfig c;
  FieldReader r(doc, "/ibmdp");
  r.read("p", c.p);
  r.read("zeta", c.zeta);
  r.read("gamma_b", c.gamma_b);
  r.read("gamma_w", c.gamma_w);
  r.read("depth_limit", c.depth_limit);
  r.read("max_wrapped_steps", c.max_wrapped_steps);
  r.finish();
  return c;
}

json learner_config_to_json(const LearnerConfig& c) {
  return {{"k", c.k},
          {"alpha_b", c.alpha_b},
          {"alpha_o", c.alpha_o},
          {"epsilon_start", c.epsilon_start},
          {"epsilon_end", c.epsilon_end},
          {"epsilon_decay_episodes", optional_to_json(c.epsilon_decay_episodes)},
          {"episodes", c.episodes},
          {"eval_every", c.eval_every},
          {"eval_episodes", c.eval_episodes},
          {"capacity", c.capacity},
          {"extract_depth_cap", c.extract_depth_cap}};
}

LearnerConfig learner_config_from_json(const json& doc) {
  LearnerConfig c;
  FieldReader r(doc, "/learner");
  r.read("k", c.k);
  r.read("alpha_b", c.alpha_b);
  r.read("alpha_o", c.alpha_o);
  r.read("epsilon_start", c.epsilon_start);
  r.read("epsilon_end", c.epsilon_end);
  r.read("epsilon_decay_episodes", c.epsilon_decay_episodes);
  r.read("episodes", c.episodes);
  r.read("eval_every", c.eval_every);
  r.read("eval_episodes", c.eval_episodes);
  r.read("capacity", c.capacity);
  r.read("extract_depth_cap", c.extract_depth_cap);
  r.finish();
  return c;
}

// ---------------------------------------------------------------------------
// ExperimentConfig

ExperimentConfig ExperimentConfig::from_json(const json& doc) {
  ExperimentConfig c;
  FieldReader r(doc, "");
  r.read("method", c.method);
  c.method = lowercase(c.method);
  if (const json* v = r.find("env")) c.env = EnvConfig::from_json(*v);
  if (const json* v = r.find("ibmdp")) c.ibmdp = ibmdp_config_from_json(*v);
  if (const json* v = r.find("learner")) c.learner = learner_config_from_json(*v);
  if (const json* v = r.find("baseline")) c.baseline = BaselineConfig::from_json(*v);
  r.read("episodes_per_state", c.episodes_per_state);
  r.read("trials", c.trials);
  r.read("base_seed", c.base_seed, 0);
  r.read("output_path", c.output_path);
  r.read("run_dir", c.run_dir);
  r.read("threads", c.threads);
  r.read("record_wall_time", c.record_wall_time);
  r.finish();
  return c;
}

json ExperimentConfig::to_json() const {
  json j = {{"method", method},
            {"env", env.to_json()},
            {"ibmdp", ibmdp_config_to_json(ibmdp)},
            {"learner", learner_config_to_json(learner)},
            {"episodes_per_state", optional_to_json(episodes_per_state)},
            {"baseline", baseline.to_json()},
            {"trials", trials},
            {"base_seed", base_seed},
            {"output_path", output_path},
            {"threads", threads},
            {"record_wall_time", record_wall_time}};
  j["run_dir"] = run_dir ? json(*run_dir) : json(nullptr);
  return j;
}

LearnerConfig ExperimentConfig::effective_learner() const {
  LearnerConfig l = learner;
  if (episodes_per_state) {
    if (lowercase(env.name) != "prereqworld") {
      throw InvalidInput("episodes_per_state only applies to prereqworld");
    }
    if (env.m >= 40) throw InvalidInput("m too large for episodes_per_state");
    l.episodes = *episodes_per_state << env.m;
  }
  return l;
}

fs::path ExperimentConfig::effective_run_dir() const {
  if (run_dir) return *run_dir;
  fs::path out(output_path);
  return out.parent_path() / (out.stem().string() + "_run");
}

void ExperimentConfig::validate() const {
  if (method != kMethodCustard && method != kMethodViper) {
    throw InvalidInput("unknown method '" + method + "' (expected custard-mfec or viper-bi)");
  }
  if (trials < 1) throw InvalidInput("trials must be at least 1");
  if (output_path.empty()) throw InvalidInput("output_path must not be empty");
  make_environment(env);
  ibmdp.validate();
  effective_learner().validate();
  if (method == kMethodViper) {
    if (lowercase(env.name) == "cartpole") {
      throw InvalidInput("viper-bi needs a finite expert; cartpole has none");
    }
    if (!(baseline.resolution > 0.0)) throw InvalidInput("baseline resolution must be positive");
    if (baseline.dagger_iters < 1 || baseline.rollouts_per_iter < 1 ||
        baseline.selection_episodes < 1 || baseline.max_samples < 1) {
      throw InvalidInput("baseline iteration, rollout, episode and sample counts must be positive");
    }
  }
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  const json doc = read_json_file(path);
  try {
    ExperimentConfig c = ExperimentConfig::from_json(doc);
    c.validate();
    return c;
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ":" + e.location(), e.what());
  } catch (const InvalidInput& e) {
    throw InvalidInput(path.string() + ": " + e.what());
  }
}

void set_config_param(json& doc, const std::string& name, const std::string& value) {
  static const std::vector<std::pair<std::string, std::set<std::string>>> kSections = {
      {"env", {"name", "m", "lane2", "lane3"}},
      {"ibmdp", {"p", "zeta", "gamma_b", "gamma_w", "depth_limit", "max_wrapped_steps"}},
      {"learner",
       {"k", "alpha_b", "alpha_o", "epsilon_start", "epsilon_end", "epsilon_decay_episodes",
        "episodes", "eval_every", "eval_episodes", "capacity", "extract_depth_cap"}},
      {"baseline",
       {"max_depth", "dagger_iters", "rollouts_per_iter", "selection_episodes", "max_samples",
        "resolution"}},
      {"", {"method", "episodes_per_state", "trials", "base_seed", "output_path", "run_dir",
            "threads", "record_wall_time"}},
  };

  std::string section, key = name;
  if (const auto dot = name.find('.'); dot != std::string::npos) {
    section = name.substr(0, dot);
    key = name.substr(dot + 1);
  }
  const std::set<std::string>* keys = nullptr;
  for (const auto& [sec, ks] : kSections) {
    const bool match = name.find('.') != std::string::npos ? sec == section : ks.contains(key);
    if (match) {
      section = sec;
      keys = &ks;
      break;
    }
  }
  if (!keys || !keys->contains(key)) throw InvalidInput("unknown parameter '" + name + "'");

  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::parse_error&) {
    parsed = value;  // bare words such as environment names
  }
  if (!doc.is_object()) throw InvalidInput("config must be a JSON object");
  json& target = section.empty() ? doc : doc[section];
  if (!target.is_object()) target = json::object();
  target[key] = std::move(parsed);
}

// ---------------------------------------------------------------------------
// Experts

ExpertSetup make_expert(const ExperimentConfig& config, const Environment& env) {
  const std::string name = lowercase(config.env.name);
  const double gamma = config.ibmdp.gamma_b;
  if (name == "prereqworld") {
    const auto* world = dynamic_cast<const PrereqWorld*>(&env);
    if (!world) throw InvalidInput("environment does not match the prereqworld config");
    FiniteMdp mdp = enumerate_prereq(*world);
    ExpertPolicy expert = backward_induction(mdp, gamma, TieBreak::Random);
    StateMapper mapper = [world](const BaseState& s) {
      return static_cast<std::size_t>(world->encode(s));
    };
    return {std::move(mdp), std::move(expert), std::move(mapper)};
  }
  if (name == "potholeworld") {
    const auto* world = dynamic_cast<const PotholeWorld*>(&env);
    if (!world) throw InvalidInput("environment does not match the potholeworld config");
    const double res = config.baseline.resolution;
    FiniteMdp mdp = discretize_pothole(world->pothole_spec(), res);
    ExpertPolicy expert = backward_induction(mdp, gamma, TieBreak::FavorPrevious);
    StateMapper mapper = [world, res](const BaseState& s) {
      return pothole_cell(world->pothole_spec(), res, s.raw.at(0));
    };
    return {std::move(mdp), std::move(expert), std::move(mapper)};
  }
  throw InvalidInput("viper-bi needs a finite expert; " + config.env.name + " has none");
}

// ---------------------------------------------------------------------------
// Trials

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::optional<std::size_t> row_depth_limit(const ExperimentConfig& config) {
  if (config.method == kMethodViper && config.baseline.max_depth) return config.baseline.max_depth;
  return config.ibmdp.depth_limit;
}

ResultRow make_row(const ExperimentConfig& config, std::size_t trial, std::size_t episode,
                   double mean, double std, std::size_t depth, std::size_t nodes, double wall) {
  ResultRow row;
  row.method = config.method;
  row.env = lowercase(config.env.name);
  row.trial = std::to_string(trial);
  row.episode = episode;
  row.mean_reward = mean;
  row.reward_std = std;
  row.tree_depth = static_cast<double>(depth);
  row.tree_nodes = static_cast<double>(nodes);
  row.depth_limit = row_depth_limit(config);
  row.wall_time_s = config.record_wall_time ? wall : 0.0;
  return row;
}

void run_custard(const ExperimentConfig& config, const Environment& env, TrialOutcome& out) {
  const auto start = std::chrono::steady_clock::now();
  const Ibmdp ibmdp(env, config.ibmdp);
  Rng rng(out.seed);
  TrainResult result = train(ibmdp, config.effective_learner(), rng, [&](const CurvePoint& c) {
    out.rows.push_back(make_row(config, out.trial, c.episode, c.mean_reward, c.reward_std, c.depth,
                                c.nodes, seconds_since(start)));
  });
  out.tree = std::move(result.tree);
  out.q_memory = result.q.to_json();
}

void run_viper(const ExperimentConfig& config, const Environment& env, TrialOutcome& out) {
  const auto start = std::chrono::steady_clock::now();
  const ExpertSetup setup = make_expert(config, env);
  ImitationConfig ic;
  ic.max_depth = config.baseline.max_depth ? config.baseline.max_depth : config.ibmdp.depth_limit;
  ic.dagger_iters = config.baseline.dagger_iters;
  ic.rollouts_per_iter = config.baseline.rollouts_per_iter;
  ic.eval_episodes = config.baseline.selection_episodes;
  ic.max_samples = config.baseline.max_samples;

  Rng rng(out.seed);
  const double setup_time = seconds_since(start);
  ImitationResult result = fit_tree_imitation(setup.expert, setup.mapper, env, ic, rng);
  for (const auto& h : result.history) {
    out.rows.push_back(make_row(config, out.trial, (h.iteration + 1) * ic.rollouts_per_iter,
                                h.mean_reward, h.reward_std, h.depth, h.nodes,
                                setup_time + h.elapsed_s));
  }

  Rng eval_rng(rng());
  const EvalStats stats =
      evaluate_policy(result.tree, env, config.effective_learner().eval_episodes, eval_rng);
  const TreeMetrics m = tree_metrics(result.tree);
  out.rows.push_back(make_row(config, out.trial, ic.dagger_iters * ic.rollouts_per_iter,
                              stats.mean, stats.std, m.depth, m.node_count, seconds_since(start)));
  out.tree = std::move(result.tree);
}

}  // namespace

TrialOutcome run_trial(const ExperimentConfig& config, std::size_t trial) {
  TrialOutcome out;
  out.trial = trial;
  out.seed = config.base_seed + trial;
  try {
    const auto env = make_environment(config.env);
    if (config.method == kMethodCustard) {
      run_custard(config, *env, out);
    } else if (config.method == kMethodViper) {
      run_viper(config, *env, out);
    } else {
      throw InvalidInput("unknown method '" + config.method + "'");
    }
    if (out.rows.empty()) throw InvariantViolation("trial produced no rows");
    out.ok = true;
  } catch (const std::exception& e) {
    out.ok = false;
    out.error = e.what();
    out.rows.clear();
    out.tree.reset();
    out.q_memory.reset();
  }
  return out;
}

std::optional<ResultRow> summarize(const ExperimentConfig& config,
                                   const std::vector<TrialOutcome>& trials) {
  std::vector<double> rewards;
  double depth = 0.0, nodes = 0.0, wall = 0.0;
  for (const auto& t : trials) {
    if (!t.ok) continue;
    const ResultRow& last = t.rows.back();
    rewards.push_back(last.mean_reward);
    depth += last.tree_depth;
    nodes += last.tree_nodes;
    wall += last.wall_time_s;
  }
  if (rewards.empty()) return std::nullopt;
  const EvalStats s = mean_and_std(rewards);
  const double n = static_cast<double>(rewards.size());
  ResultRow row;
  row.method = config.method;
  row.env = lowercase(config.env.name);
  row.trial = "summary";
  row.mean_reward = s.mean;
  row.reward_std = s.std;
  row.tree_depth = depth / n;
  row.tree_nodes = nodes / n;
  row.depth_limit = row_depth_limit(config);
  row.wall_time_s = wall;
  return row;
}

std::size_t ExperimentResult::failed() const {
  return static_cast<std::size_t>(
      std::count_if(trials.begin(), trials.end(), [](const TrialOutcome& t) { return !t.ok; }));
}

std::vector<ResultRow> ExperimentResult::rows() const {
  std::vector<ResultRow> out;
  for (const auto& t : trials) out.insert(out.end(), t.rows.begin(), t.rows.end());
  if (summary) out.push_back(*summary);
  return out;
}

std::size_t pool_width(const ExperimentConfig& config) {
  std::size_t width = config.threads;
  if (width == 0) width = std::max(1u, std::thread::hardware_concurrency());
  if (const char* cap = std::getenv("IBTREE_THREADS")) {
    std::size_t value = 0;
    const char* end = cap + std::char_traits<char>::length(cap);
    const auto [ptr, ec] = std::from_chars(cap, end, value);
    if (ec != std::errc() || ptr != end || value == 0) {
      throw InvalidInput(std::string("IBTREE_THREADS must be a positive integer, got '") + cap + "'");
    }
    width = std::min(width, value);
  }
  return std::max<std::size_t>(1, std::min(width, config.trials));
}

ExperimentResult run_experiment(const ExperimentConfig& config, std::ostream* log) {
  config.validate();
  ExperimentResult result;
  result.trials.resize(config.trials);
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;

  const auto worker = [&] {
    for (;;) {
      const std::size_t t = next.fetch_add(1);
      if (t >= config.trials) return;
      result.trials[t] = run_trial(config, t);
      if (!log) continue;
      const TrialOutcome& o = result.trials[t];
      std::lock_guard lock(log_mutex);
      if (o.ok) {
        const ResultRow& r = o.rows.back();
        *log << "trial " << t << " (seed " << o.seed << "): reward " << format_number(r.mean_reward)
             << ", depth " << format_number(r.tree_depth) << ", nodes "
             << format_number(r.tree_nodes) << '\n';
      } else {
        *log << "trial " << t << " (seed " << o.seed << ") failed: " << o.error << '\n';
      }
      log->flush();
    }
  };

  const std::size_t width = pool_width(config);
  if (width == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < width; ++i) pool.emplace_back(worker);
  }
  result.summary = summarize(config, result.trials);
  return result;
}

// ---------------------------------------------------------------------------
// CSV

std::string format_number(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) throw InvariantViolation("number formatting failed");
  return {buf, ptr};
}

std::string format_row(const ResultRow& row) {
  std::string s;
  s += row.method + ',' + row.env + ',' + row.trial + ',';
  s += (row.episode ? std::to_string(*row.episode) : std::string()) + ',';
  s += format_number(row.mean_reward) + ',' + format_number(row.reward_std) + ',';
  s += format_number(row.tree_depth) + ',' + format_number(row.tree_nodes) + ',';
  s += (row.depth_limit ? std::to_string(*row.depth_limit) : std::string()) + ',';
  s += format_number(row.wall_time_s);
  return s;
}

void write_csv(const fs::path& path, const std::vector<ResultRow>& rows) {
  std::string text = std::string(kCsvHeader) + '\n';
  for (const auto& r : rows) text += format_row(r) + '\n';
  write_text_file(path, text);
}

namespace {

double parse_double(const std::string& field, const std::string& where) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw ParseError(where, "expected a number, got '" + field + "'");
  }
  return v;
}

std::optional<std::size_t> parse_optional_count(const std::string& field, const std::string& where) {
  if (field.empty()) return std::nullopt;
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw ParseError(where, "expected a count, got '" + field + "'");
  }
  return v;
}

}  // namespace

std::vector<ResultRow> read_csv(const fs::path& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) {
    throw ParseError(path.string() + " line 1", "unexpected CSV header");
  }
  std::vector<ResultRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (line.back() == ',') f.emplace_back();
    const std::string where = path.string() + " line " + std::to_string(line_no);
    if (f.size() != 10) throw ParseError(where, "expected 10 fields");
    ResultRow r;
    r.method = f[0];
    r.env = f[1];
    r.trial = f[2];
    r.episode = parse_optional_count(f[3], where);
    r.mean_reward = parse_double(f[4], where);
    r.reward_std = parse_double(f[5], where);
    r.tree_depth = parse_double(f[6], where);
    r.tree_nodes = parse_double(f[7], where);
    r.depth_limit = parse_optional_count(f[8], where);
    r.wall_time_s = parse_double(f[9], where);
    rows.push_back(std::move(r));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Run directories

void save_run(const fs::path& dir, const ExperimentConfig& config, const ExperimentResult& result) {
  fs::create_directories(dir);
  write_text_file(dir / "config.json", config.to_json().dump(2) + '\n');
  for (const auto& t : result.trials) {
    const fs::path td = dir / ("trial_" + std::to_string(t.trial));
    if (!t.ok) {
      write_text_file(td / "error.txt", t.error + '\n');
      continue;
    }
    write_text_file(td / "tree.json", tree_serialize(*t.tree, 2) + '\n');
    if (t.q_memory) write_text_file(td / "q.json", t.q_memory->dump() + '\n');
  }
}

TreeNode extract_from_run(const fs::path& dir, std::size_t trial) {
  if (!fs::is_directory(dir)) throw InvalidInput("run directory not found: " + dir.string());
  const ExperimentConfig config = load_experiment_config(dir / "config.json");
  const fs::path td = dir / ("trial_" + std::to_string(trial));
  if (config.method != kMethodCustard) {
    throw InvalidInput("run " + dir.string() + " is a " + config.method +
                       " run with no value memory; its tree is in " + (td / "tree.json").string());
  }
  const fs::path qpath = td / "q.json";
  if (!fs::exists(qpath)) throw InvalidInput("no saved value memory at " + qpath.string());
  QMemory q = QMemory::from_json(read_json_file(qpath));
  const auto env = make_environment(config.env);
  const Ibmdp ibmdp(*env, config.ibmdp);
  if (q.n_actions() != ibmdp.n_actions() || q.key_dim() != ibmdp.observation_key_size()) {
    throw InvalidInput(qpath.string() + " does not match the run's environment");
  }
  return extract_greedy_tree(q, ibmdp, extraction_depth_cap(ibmdp, config.effective_learner()));
}

}  // namespace ibtree
