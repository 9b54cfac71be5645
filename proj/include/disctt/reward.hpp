#pragma once

#include <optional>
#include <vector>

#include "disctt/consensus.hpp"
#include "disctt/policy.hpp"
#include "disctt/tokens.hpp"

namespace disctt::reward {

struct RewardConfig {
  double alpha = 1.0;
  double beta = 1.0;      // >= 0
  double epsilon = 0.2;   // in (0, 1]; floor of the relevance factor
  bool leave_one_out = false;
};

struct RewardBreakdown {
  int completion_index = 0;
  int gate = 0;  // 1 iff the completion's answer equals the majority answer
  double jsd_nov = 0.0;
  double g_rel = 0.0;
  double relevance_factor = 0.0;  // epsilon + (1 - epsilon) * g_rel
  double total = 0.0;             // gate * (alpha + beta * jsd_nov) * relevance_factor
  std::vector<int> majority_index_set;
};

// Jensen-Shannon divergence in nats; symmetric, bounded by ln 2, zero-mass
// terms contribute zero.
double js_divergence(const std::vector<double>& p, const std::vector<double>& q);

// Per-position mean of the majority completions' stored distributions.
// Positions where no majority trace is long enough are absent.
struct ReferenceDists {
  std::vector<std::optional<policy::NextTokenDist>> per_position;
};

// `exclude` removes one member's own trace from the average, but only while
// at least two members remain; a singleton majority keeps itself.
ReferenceDists reference_dists(const policy::SampleGroup& group,
                               const std::vector<int>& majority_indices,
                               std::optional<int> exclude);

// Mean Jensen-Shannon divergence between a trace's distributions and the
// reference, over positions where the reference exists. No such position
// (or an empty trace) scores zero.
double novelty_score(const std::vector<policy::NextTokenDist>& trace_dists,
                     const ReferenceDists& reference);

struct StepSegments {
  std::vector<TokenSeq> segments;
};

// Splits a trace on the step separator, dropping empty pieces. A trace with
// no separator is one segment; an empty trace has none.
StepSegments segment_trace(const TokenSeq& trace, const Vocabulary& vocab);

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::vector<double> embed(const TokenSeq& tokens) const = 0;
};

// L2-normalized token frequency vector; the empty sequence maps to zero.
class BagOfTokensEmbedder : public Embedder {
 public:
  explicit BagOfTokensEmbedder(int vocab_size) : vocab_size_(vocab_size) {}
  std::vector<double> embed(const TokenSeq& tokens) const override;

 private:
  int vocab_size_;
};

// Mean over segments of cos(e(segment), e(prompt)) clipped to [0, 1].
// Zero-norm embeddings contribute zero; zero segments score zero.
double relevance_gate(const StepSegments& segments, const TokenSeq& prompt,
                      const Embedder& embedder);

// Full per-completion breakdown for one sample group. The reference set is
// the majority-matching completions, self included unless leave_one_out.
std::vector<RewardBreakdown> composite_reward(const policy::SampleGroup& group,
                                              const consensus::ConsensusReport& report,
                                              const RewardConfig& config,
                                              const TokenSeq& prompt,
                                              const Vocabulary& vocab,
                                              const Embedder* embedder = nullptr);

}  // namespace disctt::reward
