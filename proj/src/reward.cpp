#include "disctt/reward.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace disctt::reward {

namespace {

void check_config(const RewardConfig& cfg) {
  if (cfg.beta < 0.0) throw std::invalid_argument("reward: beta must be >= 0");
  if (!(cfg.epsilon > 0.0 && cfg.epsilon <= 1.0)) {
    throw std::invalid_argument("reward: epsilon must lie in (0, 1]");
  }
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace

double js_divergence(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) {
    throw std::invalid_argument("js_divergence: dimension mismatch");
  }
  double js = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0.0) js += 0.5 * p[i] * std::log(p[i] / m);
    if (q[i] > 0.0) js += 0.5 * q[i] * std::log(q[i] / m);
  }
  return std::max(js, 0.0);
}

ReferenceDists reference_dists(const policy::SampleGroup& group,
                               const std::vector<int>& majority_indices,
                               std::optional<int> exclude) {
  if (majority_indices.empty()) {
    throw std::invalid_argument("reference_dists: empty majority set");
  }
  std::vector<int> members = majority_indices;
  if (exclude && members.size() >= 2) {
    members.erase(std::remove(members.begin(), members.end(), *exclude), members.end());
  }
  std::size_t max_len = 0;
  for (int i : members) {
    max_len = std::max(max_len, group.samples[static_cast<std::size_t>(i)].trace_dists.size());
  }
  ReferenceDists ref;
  ref.per_position.resize(max_len);
  if (max_len == 0) return ref;
  int v_count = 0;
  for (int i : members) {
    const auto& td = group.samples[static_cast<std::size_t>(i)].trace_dists;
    if (!td.empty()) {
      v_count = static_cast<int>(td[0].probs.size());
      break;
    }
  }
  for (std::size_t t = 0; t < max_len; ++t) {
    std::vector<double> mean(static_cast<std::size_t>(v_count), 0.0);
    int present = 0;
    for (int i : members) {
      const auto& td = group.samples[static_cast<std::size_t>(i)].trace_dists;
      if (t < td.size()) {
        for (std::size_t v = 0; v < mean.size(); ++v) mean[v] += td[t].probs[v];
        ++present;
      }
    }
    if (present > 0) {
      for (double& x : mean) x /= static_cast<double>(present);
      ref.per_position[t] = policy::NextTokenDist{std::move(mean)};
    }
  }
  return ref;
}

double novelty_score(const std::vector<policy::NextTokenDist>& trace_dists,
                     const ReferenceDists& reference) {
  double sum = 0.0;
  int counted = 0;
  std::size_t limit = std::min(trace_dists.size(), reference.per_position.size());
  for (std::size_t t = 0; t < limit; ++t) {
    if (reference.per_position[t]) {
      sum += js_divergence(trace_dists[t].probs, reference.per_position[t]->probs);
      ++counted;
    }
  }
  return counted > 0 ? sum / static_cast<double>(counted) : 0.0;
}

StepSegments segment_trace(const TokenSeq& trace, const Vocabulary& vocab) {
  StepSegments out;
  TokenSeq current;
  for (TokenId tok : trace) {
    if (tok == vocab.step_sep()) {
      if (!current.empty()) out.segments.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(tok);
    }
  }
  if (!current.empty()) out.segments.push_back(std::move(current));
  return out;
}

std::vector<double> BagOfTokensEmbedder::embed(const TokenSeq& tokens) const {
  std::vector<double> vec(static_cast<std::size_t>(vocab_size_), 0.0);
  for (TokenId tok : tokens) {
    if (tok < 0 || tok >= vocab_size_) {
      throw std::invalid_argument("embed: token id outside the vocabulary");
    }
    vec[static_cast<std::size_t>(tok)] += 1.0;
  }
  double norm = 0.0;
  for (double x : vec) norm += x * x;
  if (norm > 0.0) {
    norm = std::sqrt(norm);
    for (double& x : vec) x /= norm;
  }
  return vec;
}

double relevance_gate(const StepSegments& segments, const TokenSeq& prompt,
                      const Embedder& embedder) {
  if (segments.segments.empty()) return 0.0;
  std::vector<double> prompt_vec = embedder.embed(prompt);
  double sum = 0.0;
  for (const auto& seg : segments.segments) {
    double cos = cosine(embedder.embed(seg), prompt_vec);
    sum += std::clamp(cos, 0.0, 1.0);
  }
  return sum / static_cast<double>(segments.segments.size());
}

std::vector<RewardBreakdown> composite_reward(const policy::SampleGroup& group,
                                              const consensus::ConsensusReport& report,
                                              const RewardConfig& config,
                                              const TokenSeq& prompt,
                                              const Vocabulary& vocab,
                                              const Embedder* embedder) {
  check_config(config);
  if (report.m != static_cast<int>(group.samples.size())) {
    throw std::invalid_argument("composite_reward: report does not describe this group");
  }
  BagOfTokensEmbedder default_embedder(vocab.size());
  const Embedder& emb = embedder ? *embedder : default_embedder;

  std::vector<int> majority;
  for (std::size_t i = 0; i < group.samples.size(); ++i) {
    if (group.samples[i].completion.answer == report.a_maj) {
      majority.push_back(static_cast<int>(i));
    }
  }

  std::optional<ReferenceDists> shared_ref;
  if (!config.leave_one_out) shared_ref = reference_dists(group, majority, std::nullopt);

  std::vector<RewardBreakdown> out;
  out.reserve(group.samples.size());
  for (std::size_t i = 0; i < group.samples.size(); ++i) {
    const auto& sc = group.samples[i];
    RewardBreakdown b;
    b.completion_index = static_cast<int>(i);
    b.majority_index_set = majority;
    b.gate = sc.completion.answer == report.a_maj ? 1 : 0;
    if (config.leave_one_out) {
      std::optional<int> exclude;
      if (b.gate) exclude = static_cast<int>(i);
      ReferenceDists ref = reference_dists(group, majority, exclude);
      b.jsd_nov = novelty_score(sc.trace_dists, ref);
    } else {
      b.jsd_nov = novelty_score(sc.trace_dists, *shared_ref);
    }
    StepSegments segs = segment_trace(sc.completion.trace, vocab);
    b.g_rel = relevance_gate(segs, prompt, emb);
    b.relevance_factor = config.epsilon + (1.0 - config.epsilon) * b.g_rel;
    b.total = b.gate * (config.alpha + config.beta * b.jsd_nov) * b.relevance_factor;
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace disctt::reward
