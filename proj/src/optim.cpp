#include "disctt/optim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "disctt/error.hpp"

namespace disctt::optim {

namespace {

void check_sft_batch(const SftBatch& batch) {
  if (batch.items.empty()) throw std::invalid_argument("sft: batch must be non-empty");
  for (const auto& item : batch.items) {
    if (item.target.empty()) throw std::invalid_argument("sft: empty target completion");
  }
}

void check_rl_batches(const std::vector<RlBatch>& batches,
                      const std::vector<std::vector<double>>& advantages) {
  if (batches.empty()) throw std::invalid_argument("grpo: no batches");
  if (advantages.size() != batches.size()) {
    throw std::invalid_argument("grpo: advantage list count must match batch count");
  }
  for (std::size_t b = 0; b < batches.size(); ++b) {
    if (batches[b].completions.size() < 2) {
      throw std::invalid_argument("grpo: each batch needs at least 2 completions");
    }
    if (advantages[b].size() != batches[b].completions.size()) {
      throw std::invalid_argument("grpo: advantages must match completions");
    }
  }
}

struct SurrogatePass {
  double objective = 0.0;
  int clipped = 0;
  int total = 0;
};

// Evaluates the surrogate at `params`; when `grad` is given, accumulates its
// gradient. Gradient flows through a completion only when the unclipped
// branch attains the min (standard pessimistic-clip behavior).
SurrogatePass surrogate_pass(const policy::PolicyParams& params,
                             const std::vector<RlBatch>& batches,
                             const std::vector<std::vector<double>>& advantages,
                             const GrpoOptions& opts, policy::SparseGrad* grad) {
  SurrogatePass pass;
  double prompt_weight = 1.0 / static_cast<double>(batches.size());
  for (std::size_t b = 0; b < batches.size(); ++b) {
    const RlBatch& batch = batches[b];
    double comp_weight = prompt_weight / static_cast<double>(batch.completions.size());
    for (std::size_t i = 0; i < batch.completions.size(); ++i) {
      const auto& sc = batch.completions[i];
      double adv = advantages[b][i];
      std::size_t trace_len = sc.completion.trace.size();
      double new_lp = policy::prefix_logprob(params, batch.prompt, sc.completion.raw,
                                             trace_len, opts.temperature);
      double ratio = std::exp(new_lp - sc.trace_logprob);
      double unclipped = ratio * adv;
      double clipped = std::clamp(ratio, 1.0 - opts.clip, 1.0 + opts.clip) * adv;
      pass.total += 1;
      bool out_of_range = ratio < 1.0 - opts.clip || ratio > 1.0 + opts.clip;
      if (out_of_range && clipped < unclipped) {
        pass.objective += comp_weight * clipped;
        pass.clipped += 1;  // clip branch active: no gradient through this term
      } else {
        pass.objective += comp_weight * unclipped;
        if (grad && adv != 0.0) {
          policy::accumulate_logprob_grad(params, batch.prompt, sc.completion.raw, trace_len,
                                          opts.temperature, comp_weight * ratio * adv, *grad);
        }
      }
      if (opts.kl_coeff != 0.0) {
        double kl_sum = 0.0;
        policy::walk_positions(
            params, batch.prompt, sc.completion.raw, trace_len, opts.temperature,
            [&](std::size_t t, const std::vector<int>& buckets,
                const policy::NextTokenDist& dist) {
              const auto& old_probs = sc.trace_dists[t].probs;
              double kl = 0.0;
              for (std::size_t v = 0; v < dist.probs.size(); ++v) {
                double p = dist.probs[v];
                if (p > 0.0) {
                  kl += p * std::log(p / std::max(old_probs[v], 1e-300));
                }
              }
              kl_sum += kl;
              if (grad) {
                double w = -opts.kl_coeff * comp_weight /
                           (static_cast<double>(trace_len) * opts.temperature);
                for (int bk : buckets) {
                  auto& row = grad->row(bk);
                  for (std::size_t v = 0; v < dist.probs.size(); ++v) {
                    double p = dist.probs[v];
                    double term =
                        p > 0.0 ? p * (std::log(p / std::max(old_probs[v], 1e-300)) - kl)
                                : 0.0;
                    row[v] += w * term;
                  }
                }
              }
            });
        if (trace_len > 0) {
          pass.objective -=
              opts.kl_coeff * comp_weight * kl_sum / static_cast<double>(trace_len);
        }
      }
    }
  }
  return pass;
}

}  // namespace

double sft_loss(const policy::PolicyParams& params, const SftBatch& batch,
                double temperature) {
  check_sft_batch(batch);
  double total = 0.0;
  for (const auto& item : batch.items) {
    total -= policy::logprob(params, item.prompt, item.target, temperature);
  }
  double loss = total / static_cast<double>(batch.items.size());
  if (!std::isfinite(loss)) throw NumericError("sft_loss: non-finite loss");
  return loss;
}

std::pair<policy::PolicyParams, UpdateReport> sft_step(policy::PolicyParams params,
                                                       const SftBatch& batch, double lr,
                                                       double temperature) {
  check_sft_batch(batch);
  if (lr < 0.0) throw std::invalid_argument("sft_step: lr must be >= 0");

  UpdateReport rep;
  rep.step_size = lr;
  rep.loss_before = sft_loss(params, batch, temperature);

  policy::SparseGrad grad(params.vocab_size);
  double item_weight = -1.0 / static_cast<double>(batch.items.size());  // d(mean NLL)
  for (const auto& item : batch.items) {
    policy::accumulate_logprob_grad(params, item.prompt, item.target, item.target.size(),
                                    temperature, item_weight, grad);
  }
  if (!grad.finite()) throw NumericError("sft_step: non-finite gradient");
  rep.grad_norm = grad.l2norm();

  grad.apply(params.theta, -lr);  // descend
  rep.loss_after = sft_loss(params, batch, temperature);
  return {std::move(params), rep};
}

std::vector<double> grpo_advantages(const std::vector<double>& rewards) {
  if (rewards.size() < 2) {
    throw std::invalid_argument("grpo_advantages: need at least 2 rewards");
  }
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(rewards.size());
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= static_cast<double>(rewards.size());  // population variance
  double denom = std::sqrt(var) + 1e-8;
  std::vector<double> adv;
  adv.reserve(rewards.size());
  for (double r : rewards) adv.push_back((r - mean) / denom);
  return adv;
}

double grpo_objective(const policy::PolicyParams& params,
                      const std::vector<RlBatch>& batches,
                      const std::vector<std::vector<double>>& advantages,
                      const GrpoOptions& opts) {
  check_rl_batches(batches, advantages);
  return surrogate_pass(params, batches, advantages, opts, nullptr).objective;
}

std::pair<policy::PolicyParams, UpdateReport> grpo_step(
    policy::PolicyParams params, const std::vector<RlBatch>& batches,
    const std::vector<std::vector<double>>& advantages, const GrpoOptions& opts) {
  check_rl_batches(batches, advantages);
  if (opts.lr < 0.0) throw std::invalid_argument("grpo_step: lr must be >= 0");
  if (opts.inner_epochs < 1) {
    throw std::invalid_argument("grpo_step: inner_epochs must be >= 1");
  }
  if (!(opts.clip > 0.0)) throw std::invalid_argument("grpo_step: clip must be > 0");

  UpdateReport rep;
  rep.step_size = opts.lr;
  for (int e = 0; e < opts.inner_epochs; ++e) {
    policy::SparseGrad grad(params.vocab_size);
    SurrogatePass pass = surrogate_pass(params, batches, advantages, opts, &grad);
    if (e == 0) rep.loss_before = -pass.objective;
    if (!grad.finite()) throw NumericError("grpo_step: non-finite gradient");
    rep.grad_norm = grad.l2norm();
    rep.clipped_fraction =
        pass.total > 0 ? static_cast<double>(pass.clipped) / pass.total : 0.0;
    grad.apply(params.theta, opts.lr);  // ascend
  }
  rep.loss_after = -surrogate_pass(params, batches, advantages, opts, nullptr).objective;
  return {std::move(params), rep};
}

std::pair<policy::PolicyParams, UpdateReport> grpo_step(
    policy::PolicyParams params, const RlBatch& batch,
    const std::vector<double>& advantages, const GrpoOptions& opts) {
  return grpo_step(std::move(params), std::vector<RlBatch>{batch},
                   std::vector<std::vector<double>>{advantages}, opts);
}

}  // namespace disctt::optim
