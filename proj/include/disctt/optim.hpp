#pragma once

#include <utility>
#include <vector>

#include "disctt/policy.hpp"
#include "disctt/tokens.hpp"

namespace disctt::optim {

struct SftItem {
  TokenSeq prompt;
  TokenSeq target;  // full pseudo-label completion, terminator included
};

struct SftBatch {
  std::vector<SftItem> items;
};

// One prompt's sampled group for a policy update. Old distributions and
// log-probabilities stay frozen from sampling time; ratios and rewards are
// taken over reasoning tokens only.
struct RlBatch {
  TokenSeq prompt;
  std::vector<policy::SampledCompletion> completions;  // N >= 2
  std::vector<double> rewards;
};

struct UpdateReport {
  double loss_before = 0.0;
  double loss_after = 0.0;
  double grad_norm = 0.0;
  double clipped_fraction = 0.0;
  double step_size = 0.0;
};

// Mean negative log-likelihood of the targets.
double sft_loss(const policy::PolicyParams& params, const SftBatch& batch,
                double temperature);

// One full-batch gradient-descent step on sft_loss.
std::pair<policy::PolicyParams, UpdateReport> sft_step(policy::PolicyParams params,
                                                       const SftBatch& batch, double lr,
                                                       double temperature);

// Group-relative advantages: (r - mean) / (population std + 1e-8).
std::vector<double> grpo_advantages(const std::vector<double>& rewards);

struct GrpoOptions {
  double clip = 0.2;
  double lr = 0.0;
  double temperature = 1.0;
  int inner_epochs = 1;
  double kl_coeff = 0.0;  // penalty toward the sampling-time distributions
};

// Clipped-surrogate ascent over one or more prompts' groups. The objective is
// the mean over prompts of the mean over completions of
// min(ratio * A, clip(ratio, 1-c, 1+c) * A), ratio = exp(new - old logprob).
std::pair<policy::PolicyParams, UpdateReport> grpo_step(
    policy::PolicyParams params, const std::vector<RlBatch>& batches,
    const std::vector<std::vector<double>>& advantages, const GrpoOptions& opts);

std::pair<policy::PolicyParams, UpdateReport> grpo_step(
    policy::PolicyParams params, const RlBatch& batch,
    const std::vector<double>& advantages, const GrpoOptions& opts);

// Surrogate value alone (no update); exposed for gradient checks.
double grpo_objective(const policy::PolicyParams& params,
                      const std::vector<RlBatch>& batches,
                      const std::vector<std::vector<double>>& advantages,
                      const GrpoOptions& opts);

}  // namespace disctt::optim
