#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <vector>

#include "disctt/tasks.hpp"
#include "disctt/tokens.hpp"

namespace disctt::policy {

// Log-linear next-token model. At each position the active features are the
// context windows of length 0..feature_order-1 ending at that position (the
// window may extend into the prompt); each window hashes to one of n_buckets
// rows, and the logit of token v is the sum of theta[row * vocab_size + v]
// over active rows. Sampling and training both use softmax(logits / T).
struct PolicyParams {
  std::vector<double> theta;  // size n_buckets * vocab_size
  int feature_order = 2;
  int vocab_size = 0;
  int n_buckets = 0;
};

PolicyParams init_params(int feature_order, int vocab_size, int n_buckets);

struct NextTokenDist {
  std::vector<double> probs;  // sums to 1 within 1e-9
};

struct SampledCompletion {
  tasks::Completion completion;
  std::vector<NextTokenDist> trace_dists;  // one per reasoning token
  double trace_logprob = 0.0;              // over reasoning tokens
  double full_logprob = 0.0;               // over every generated token
};

struct SampleGroup {
  std::int64_t prompt_id = 0;
  double temperature = 1.0;
  std::uint64_t seed = 0;
  std::vector<SampledCompletion> samples;
};

// Active feature rows for the position following prompt + prefix[0..t).
std::vector<int> context_buckets(const TokenSeq& prompt, const TokenSeq& prefix,
                                 std::size_t t, int feature_order, int n_buckets);

NextTokenDist next_dist(const PolicyParams& params, const TokenSeq& prompt,
                        const TokenSeq& prefix, double temperature);

SampleGroup sample_completions(const PolicyParams& params, const Vocabulary& vocab,
                               const TokenSeq& prompt, std::int64_t prompt_id, int m,
                               double temperature, int max_len, std::uint64_t seed);

// Log-probability of a generated sequence, summed over all its positions.
double logprob(const PolicyParams& params, const TokenSeq& prompt, const TokenSeq& raw,
               double temperature);

// Same sum restricted to the first n_positions tokens of raw.
double prefix_logprob(const PolicyParams& params, const TokenSeq& prompt,
                      const TokenSeq& raw, std::size_t n_positions, double temperature);

// Sparse gradient accumulator keyed by feature row. Ordered keys keep
// accumulation and application deterministic.
class SparseGrad {
 public:
  explicit SparseGrad(int vocab_size) : vocab_size_(vocab_size) {}

  std::vector<double>& row(int bucket);
  double l2norm() const;
  bool finite() const;
  // theta[row * vocab_size + v] += factor * grad[row][v]
  void apply(std::vector<double>& theta, double factor) const;
  std::vector<double> to_dense(std::size_t theta_size) const;
  bool empty() const { return rows_.empty(); }

 private:
  int vocab_size_;
  std::map<int, std::vector<double>> rows_;
};

// Adds scale * d(log p(raw[t]))/d(theta) for t in [0, n_positions).
void accumulate_logprob_grad(const PolicyParams& params, const TokenSeq& prompt,
                             const TokenSeq& raw, std::size_t n_positions,
                             double temperature, double scale, SparseGrad& acc);

// Dense gradient of logprob() with respect to theta.
std::vector<double> grad_logprob(const PolicyParams& params, const TokenSeq& prompt,
                                 const TokenSeq& raw, double temperature);

// Visits each position of raw[0..n_positions) with its active rows and
// next-token distribution under params.
void walk_positions(
    const PolicyParams& params, const TokenSeq& prompt, const TokenSeq& raw,
    std::size_t n_positions, double temperature,
    const std::function<void(std::size_t t, const std::vector<int>& buckets,
                             const NextTokenDist& dist)>& fn);

void save_checkpoint(std::ostream& out, const PolicyParams& params);
PolicyParams load_checkpoint(std::istream& in);

}  // namespace disctt::policy
