#include "disctt/run_config.hpp"

#include <set>
#include <string>

#include "disctt/error.hpp"
#include "json.hpp"

namespace disctt::cli {

namespace {

using nlohmann::ordered_json;

// Tracks which keys of one JSON object were consumed, so leftovers can be
// reported as unknown fields with their full path.
class Section {
 public:
  Section(const ordered_json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) {
      throw ConfigError(path_ + ": must be an object");
    }
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return node_.contains(key);
  }

  const ordered_json& at(const std::string& key) { return node_.at(key); }

  std::string path_of(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  void read_int(const std::string& key, int& field) {
    if (!has(key)) return;
    const auto& v = at(key);
    if (!v.is_number_integer()) {
      throw ConfigError(path_of(key) + ": must be an integer");
    }
    field = v.get<int>();
  }

  void read_i64(const std::string& key, std::int64_t& field) {
    if (!has(key)) return;
    const auto& v = at(key);
    if (!v.is_number_integer()) {
      throw ConfigError(path_of(key) + ": must be an integer");
    }
    field = v.get<std::int64_t>();
  }

  void read_u64(const std::string& key, std::uint64_t& field) {
    if (!has(key)) return;
    const auto& v = at(key);
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() &&
                                   v.get<std::int64_t>() < 0)) {
      throw ConfigError(path_of(key) + ": must be a non-negative integer");
    }
    field = v.get<std::uint64_t>();
  }

  void read_double(const std::string& key, double& field) {
    if (!has(key)) return;
    const auto& v = at(key);
    if (!v.is_number()) {
      throw ConfigError(path_of(key) + ": must be a number");
    }
    field = v.get<double>();
  }

  void read_bool(const std::string& key, bool& field) {
    if (!has(key)) return;
    const auto& v = at(key);
    if (!v.is_boolean()) {
      throw ConfigError(path_of(key) + ": must be true or false");
    }
    field = v.get<bool>();
  }

  void read_string(const std::string& key, std::string& field) {
    if (!has(key)) return;
    const auto& v = at(key);
    if (!v.is_string()) {
      throw ConfigError(path_of(key) + ": must be a string");
    }
    field = v.get<std::string>();
  }

  void finish() const {
    for (const auto& [key, value] : node_.items()) {
      if (seen_.count(key) == 0) {
        throw ConfigError(path_of(key) + ": unknown field");
      }
    }
  }

 private:
  const ordered_json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_dataset(Section& sec, DatasetConfig& cfg) {
  sec.read_u64("seed", cfg.seed);
  sec.read_int("count", cfg.count);
  sec.read_int("depth_min", cfg.depth_min);
  sec.read_int("depth_max", cfg.depth_max);
  sec.read_int("modulus", cfg.modulus);
  sec.finish();
}

void read_policy(Section& sec, PolicyConfig& cfg) {
  sec.read_int("feature_order", cfg.feature_order);
  sec.read_int("n_buckets", cfg.n_buckets);
  sec.finish();
}

void read_init(Section& sec, InitConfig& cfg) {
  sec.read_string("mode", cfg.mode);
  sec.read_int("pretrain_epochs", cfg.pretrain_epochs);
  sec.read_double("pretrain_lr", cfg.pretrain_lr);
  sec.read_int("pretrain_batch_size", cfg.pretrain_batch_size);
  sec.finish();
}

void read_curriculum(Section& sec, curriculum::CurriculumConfig& cfg) {
  sec.read_int("m_consensus", cfg.m_consensus);
  sec.read_double("rho", cfg.rho);
  sec.read_i64("reroute_interval_k", cfg.reroute_interval_k);
  sec.read_int("sft_epochs_per_cycle", cfg.sft_epochs_per_cycle);
  sec.read_int("rl_epochs_per_cycle", cfg.rl_epochs_per_cycle);
  sec.read_int("total_cycles", cfg.total_cycles);
  sec.read_int("n_rl_completions", cfg.n_rl_completions);
  sec.read_double("consensus_temperature", cfg.consensus_temperature);
  sec.read_double("sft_temperature", cfg.sft_temperature);
  sec.read_double("rl_temperature", cfg.rl_temperature);
  sec.read_double("eval_temperature", cfg.eval_temperature);
  sec.read_double("sft_lr", cfg.sft_lr);
  sec.read_double("rl_lr", cfg.rl_lr);
  sec.read_int("sft_batch_size", cfg.sft_batch_size);
  sec.read_int("rl_prompt_batch_size", cfg.rl_prompt_batch_size);
  sec.read_double("clip", cfg.clip);
  sec.read_int("inner_epochs", cfg.inner_epochs);
  sec.read_double("kl_coeff", cfg.kl_coeff);
  sec.read_int("max_len", cfg.max_len);
  sec.read_int("eval_m", cfg.eval_m);
  sec.finish();
}

void read_reward(Section& sec, reward::RewardConfig& cfg) {
  sec.read_double("alpha", cfg.alpha);
  sec.read_double("beta", cfg.beta);
  sec.read_double("epsilon", cfg.epsilon);
  sec.read_bool("leave_one_out", cfg.leave_one_out);
  sec.finish();
}

void read_cost(Section& sec, CostConfig& cfg) {
  sec.read_double("c_sft", cfg.c_sft);
  sec.read_double("c_rl", cfg.c_rl);
  sec.read_bool("paired_rl_baseline", cfg.paired_rl_baseline);
  sec.finish();
}

}  // namespace

RunConfig default_run_config() { return RunConfig{}; }

RunConfig parse_run_config(const std::string& text) {
  ordered_json root;
  try {
    root = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }

  RunConfig cfg = default_run_config();
  Section top(root, "");

  std::string mode_name = curriculum::mode_name(cfg.curriculum.mode);
  top.read_string("mode", mode_name);
  try {
    cfg.curriculum.mode = curriculum::mode_from_name(mode_name);
  } catch (const std::invalid_argument&) {
    throw ConfigError("mode: must be one of disctt, sft_only, rl_only");
  }
  top.read_u64("seed", cfg.curriculum.seed);
  top.read_string("output_dir", cfg.output_dir);

  if (top.has("dataset")) {
    Section sec(top.at("dataset"), "dataset");
    read_dataset(sec, cfg.dataset);
  }
  if (top.has("policy")) {
    Section sec(top.at("policy"), "policy");
    read_policy(sec, cfg.policy);
  }
  if (top.has("init")) {
    Section sec(top.at("init"), "init");
    read_init(sec, cfg.init);
  }
  if (top.has("curriculum")) {
    Section sec(top.at("curriculum"), "curriculum");
    read_curriculum(sec, cfg.curriculum);
  }
  if (top.has("reward")) {
    Section sec(top.at("reward"), "reward");
    read_reward(sec, cfg.curriculum.reward);
  }
  if (top.has("cost")) {
    Section sec(top.at("cost"), "cost");
    read_cost(sec, cfg.cost);
  }
  top.finish();

  validate(cfg);
  return cfg;
}

void validate(const RunConfig& cfg) {
  if (cfg.dataset.count < 1) throw ConfigError("dataset.count: must be at least 1");
  if (cfg.dataset.modulus < 2) throw ConfigError("dataset.modulus: must be at least 2");
  if (cfg.dataset.depth_min < 1) throw ConfigError("dataset.depth_min: must be at least 1");
  if (cfg.dataset.depth_max < cfg.dataset.depth_min) {
    throw ConfigError("dataset.depth_max: must be at least dataset.depth_min");
  }
  if (cfg.policy.feature_order < 1) {
    throw ConfigError("policy.feature_order: must be at least 1");
  }
  if (cfg.policy.n_buckets < 1) throw ConfigError("policy.n_buckets: must be at least 1");
  if (cfg.init.mode != "zeros" && cfg.init.mode != "pretrain") {
    throw ConfigError("init.mode: must be one of zeros, pretrain");
  }
  if (cfg.init.pretrain_epochs < 0) {
    throw ConfigError("init.pretrain_epochs: must be non-negative");
  }
  if (cfg.init.pretrain_lr <= 0.0) throw ConfigError("init.pretrain_lr: must be positive");
  if (cfg.init.pretrain_batch_size < 1) {
    throw ConfigError("init.pretrain_batch_size: must be at least 1");
  }
  if (cfg.cost.c_sft <= 0.0) throw ConfigError("cost.c_sft: must be positive");
  if (cfg.cost.c_rl <= 0.0) throw ConfigError("cost.c_rl: must be positive");
  if (cfg.output_dir.empty()) throw ConfigError("output_dir: must not be empty");
  curriculum::validate(cfg.curriculum);
}

std::string dump_run_config(const RunConfig& cfg) {
  ordered_json j;
  j["mode"] = curriculum::mode_name(cfg.curriculum.mode);
  j["seed"] = cfg.curriculum.seed;
  j["output_dir"] = cfg.output_dir;
  j["dataset"] = {{"seed", cfg.dataset.seed},
                  {"count", cfg.dataset.count},
                  {"depth_min", cfg.dataset.depth_min},
                  {"depth_max", cfg.dataset.depth_max},
                  {"modulus", cfg.dataset.modulus}};
  j["policy"] = {{"feature_order", cfg.policy.feature_order},
                 {"n_buckets", cfg.policy.n_buckets}};
  j["init"] = {{"mode", cfg.init.mode},
               {"pretrain_epochs", cfg.init.pretrain_epochs},
               {"pretrain_lr", cfg.init.pretrain_lr},
               {"pretrain_batch_size", cfg.init.pretrain_batch_size}};
  const auto& cur = cfg.curriculum;
  j["curriculum"] = {{"m_consensus", cur.m_consensus},
                     {"rho", cur.rho},
                     {"reroute_interval_k", cur.reroute_interval_k},
                     {"sft_epochs_per_cycle", cur.sft_epochs_per_cycle},
                     {"rl_epochs_per_cycle", cur.rl_epochs_per_cycle},
                     {"total_cycles", cur.total_cycles},
                     {"n_rl_completions", cur.n_rl_completions},
                     {"consensus_temperature", cur.consensus_temperature},
                     {"sft_temperature", cur.sft_temperature},
                     {"rl_temperature", cur.rl_temperature},
                     {"eval_temperature", cur.eval_temperature},
                     {"sft_lr", cur.sft_lr},
                     {"rl_lr", cur.rl_lr},
                     {"sft_batch_size", cur.sft_batch_size},
                     {"rl_prompt_batch_size", cur.rl_prompt_batch_size},
                     {"clip", cur.clip},
                     {"inner_epochs", cur.inner_epochs},
                     {"kl_coeff", cur.kl_coeff},
                     {"max_len", cur.max_len},
                     {"eval_m", cur.eval_m}};
  j["reward"] = {{"alpha", cur.reward.alpha},
                 {"beta", cur.reward.beta},
                 {"epsilon", cur.reward.epsilon},
                 {"leave_one_out", cur.reward.leave_one_out}};
  j["cost"] = {{"c_sft", cfg.cost.c_sft},
               {"c_rl", cfg.cost.c_rl},
               {"paired_rl_baseline", cfg.cost.paired_rl_baseline}};
  return j.dump(2) + "\n";
}

}  // namespace disctt::cli
