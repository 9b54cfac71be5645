#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "disctt/consensus.hpp"
#include "disctt/policy.hpp"
#include "disctt/reward.hpp"
#include "disctt/tasks.hpp"

namespace disctt::curriculum {

enum class Mode { disctt, sft_only, rl_only };

const char* mode_name(Mode mode);
Mode mode_from_name(const std::string& name);

struct CurriculumConfig {
  int m_consensus = 8;
  double rho = 0.45;
  // Re-route check interval in phase steps (epochs); 0 means one full cycle.
  std::int64_t reroute_interval_k = 0;
  int sft_epochs_per_cycle = 2;
  int rl_epochs_per_cycle = 10;
  int total_cycles = 4;
  int n_rl_completions = 32;
  double consensus_temperature = 0.9;
  double sft_temperature = 0.9;
  double rl_temperature = 0.9;
  double eval_temperature = 0.9;
  double sft_lr = 1e-5;
  double rl_lr = 1e-6;
  int sft_batch_size = 8;
  int rl_prompt_batch_size = 8;
  double clip = 0.2;
  int inner_epochs = 1;
  double kl_coeff = 0.0;
  int max_len = 64;
  int eval_m = 8;
  reward::RewardConfig reward;
  std::uint64_t seed = 0;
  Mode mode = Mode::disctt;
};

void validate(const CurriculumConfig& cfg);

struct MetricsRecord {
  std::int64_t step = 0;
  std::string phase;  // route | sft | rl | eval
  std::optional<double> accuracy_majority;
  std::optional<double> accuracy_any;
  std::optional<double> mean_c;
  std::optional<double> easy_fraction;
  std::optional<std::int64_t> easy_count;
  std::optional<std::int64_t> hard_count;
  std::optional<std::int64_t> migrated_easy_to_hard;
  std::optional<std::int64_t> migrated_hard_to_easy;
  std::optional<std::int64_t> partition_step;  // when the active partition was made
  std::optional<double> loss_before;
  std::optional<double> loss_after;
  std::optional<double> grad_norm;
  std::optional<double> clipped_fraction;
  std::optional<std::int64_t> batches;
  std::optional<double> mean_reward;
  std::optional<double> gate_rate;
  std::optional<double> mean_jsd_nov;
  std::optional<double> mean_g_rel;
  std::optional<std::map<int, double>> accuracy_by_depth;
  std::optional<std::int64_t> sft_tokens;
  std::optional<std::int64_t> rl_tokens;
  std::optional<std::int64_t> sampling_tokens;
  std::optional<double> cost_ratio;
};

std::string metrics_to_json_line(const MetricsRecord& rec);
MetricsRecord metrics_from_json_line(const std::string& line);

// Per-cycle token bookkeeping for the all-hard counterfactual.
struct CycleCost {
  int cycle_index = 0;
  std::int64_t easy_count = 0;
  std::int64_t hard_count = 0;
  std::int64_t rl_update_tokens = 0;
  std::int64_t rl_prompt_visits = 0;
  // Estimated update tokens for one prompt visit, from the routing pass;
  // used when no hard prompt was actually visited this cycle.
  double est_visit_tokens = 0.0;
  int rl_epochs = 0;
};

struct CycleState {
  int cycle_index = 0;
  consensus::Partition partition;
  std::vector<consensus::ConsensusReport> reports;
  std::int64_t sft_tokens = 0;
  std::int64_t rl_tokens = 0;
  std::int64_t sampling_tokens = 0;
  std::vector<CycleCost> cycles;
};

struct CostSummary {
  std::int64_t sft_tokens = 0;
  std::int64_t rl_tokens = 0;
  std::int64_t sampling_tokens = 0;
  double cost_ratio = 1.0;  // vs routing every problem to RL
};

CostSummary cost_accounting(const CycleState& state, double c_sft = 1.0, double c_rl = 1.0);

struct EvalResult {
  double accuracy_majority = 0.0;
  double accuracy_any = 0.0;
  double mean_c = 0.0;
  std::map<int, double> accuracy_by_depth;
};

// Majority-vote and per-sample accuracy from already-materialized answers.
EvalResult accuracy_from_answers(const std::vector<std::vector<tasks::Answer>>& groups,
                                 const std::vector<tasks::Answer>& truths,
                                 const std::vector<int>* depths = nullptr);

// Fresh-sample evaluation; never reuses routing samples.
EvalResult eval_accuracy(const policy::PolicyParams& params,
                         const std::vector<tasks::ProblemInstance>& problems,
                         const Vocabulary& vocab, int m, double temperature, int max_len,
                         std::uint64_t seed);

// True when the phase-step counter sits on a re-route boundary.
bool reroute_due(std::int64_t step, std::int64_t k);

struct RunObserver {
  std::function<void(int cycle, const consensus::Partition&)> on_route;
  std::function<void(std::int64_t step, const std::string& phase,
                     const consensus::Partition&)>
      on_phase_step;
  std::function<void(int cycle, const policy::PolicyParams&)> on_cycle_end;
};

struct RunResult {
  policy::PolicyParams params;
  std::vector<MetricsRecord> metrics;
  CycleState state;
};

// Consensus-routed adaptation: at each due cycle boundary, sample a consensus
// group per problem and split easy/hard; then run SFT epochs on the easy side
// against pseudo-labels frozen at routing time, and reward-guided RL epochs
// on the hard side. Fully deterministic for a given config and seed.
RunResult run_disctt(const CurriculumConfig& cfg,
                     const std::vector<tasks::ProblemInstance>& problems,
                     const Vocabulary& vocab, policy::PolicyParams initial,
                     const RunObserver* obs = nullptr);

// Supervised warm start on reference solutions; builds the partially trained
// policies the adaptation runs begin from.
policy::PolicyParams pretrain_supervised(policy::PolicyParams params,
                                         const std::vector<tasks::ProblemInstance>& problems,
                                         const Vocabulary& vocab, int epochs, double lr,
                                         double temperature, int batch_size);

}  // namespace disctt::curriculum
