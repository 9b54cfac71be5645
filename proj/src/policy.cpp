#include "disctt/policy.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "disctt/error.hpp"
#include "disctt/rng.hpp"

namespace disctt::policy {

namespace {

using json = nlohmann::ordered_json;

constexpr std::uint64_t kPadToken = 0xfffffffffull;

void check_params(const PolicyParams& p) {
  if (p.feature_order < 1) throw std::invalid_argument("policy: feature_order must be >= 1");
  if (p.vocab_size < 2) throw std::invalid_argument("policy: vocab_size must be >= 2");
  if (p.n_buckets < 1) throw std::invalid_argument("policy: n_buckets must be >= 1");
  if (p.theta.size() != static_cast<std::size_t>(p.n_buckets) *
                            static_cast<std::size_t>(p.vocab_size)) {
    throw std::invalid_argument("policy: theta size must equal n_buckets * vocab_size");
  }
}

void check_temperature(double t) {
  if (!(t > 0.0) || !std::isfinite(t)) {
    throw std::invalid_argument("policy: temperature must be positive and finite");
  }
}

void check_tokens(const TokenSeq& seq, int vocab_size, const char* what) {
  for (TokenId id : seq) {
    if (id < 0 || id >= vocab_size) {
      throw std::invalid_argument(std::string("policy: ") + what +
                                  " contains token id outside the vocabulary");
    }
  }
}

// Hash of the length-k window ending just before the next position. Windows
// shorter than k (near the sequence start) are padded so different nominal
// lengths never alias.
std::uint64_t window_hash(const TokenSeq& prompt, const TokenSeq& prefix, std::size_t t,
                          int k) {
  std::uint64_t h = mix64(0x575ull ^ static_cast<std::uint64_t>(k));
  std::size_t ctx_len = prompt.size() + t;
  for (int j = k; j >= 1; --j) {
    std::uint64_t tok;
    if (static_cast<std::size_t>(j) > ctx_len) {
      tok = kPadToken;
    } else {
      std::size_t idx = ctx_len - static_cast<std::size_t>(j);
      tok = static_cast<std::uint64_t>(idx < prompt.size() ? prompt[idx]
                                                           : prefix[idx - prompt.size()]);
    }
    h = mix64(h ^ tok);
  }
  return h;
}

NextTokenDist dist_from_buckets(const PolicyParams& params, const std::vector<int>& buckets,
                                double temperature) {
  int v_count = params.vocab_size;
  std::vector<double> logits(static_cast<std::size_t>(v_count), 0.0);
  for (int b : buckets) {
    const double* row = params.theta.data() + static_cast<std::size_t>(b) * v_count;
    for (int v = 0; v < v_count; ++v) logits[static_cast<std::size_t>(v)] += row[v];
  }
  double max_logit = -std::numeric_limits<double>::infinity();
  for (double& l : logits) {
    l /= temperature;
    max_logit = std::max(max_logit, l);
  }
  NextTokenDist dist;
  dist.probs.resize(static_cast<std::size_t>(v_count));
  double sum = 0.0;
  for (int v = 0; v < v_count; ++v) {
    double e = std::exp(logits[static_cast<std::size_t>(v)] - max_logit);
    dist.probs[static_cast<std::size_t>(v)] = e;
    sum += e;
  }
  for (double& p : dist.probs) p /= sum;
  return dist;
}

}  // namespace

PolicyParams init_params(int feature_order, int vocab_size, int n_buckets) {
  PolicyParams p;
  p.feature_order = feature_order;
  p.vocab_size = vocab_size;
  p.n_buckets = n_buckets;
  p.theta.assign(static_cast<std::size_t>(n_buckets) * static_cast<std::size_t>(vocab_size),
                 0.0);
  check_params(p);
  return p;
}

std::vector<int> context_buckets(const TokenSeq& prompt, const TokenSeq& prefix,
                                 std::size_t t, int feature_order, int n_buckets) {
  std::vector<int> buckets;
  buckets.reserve(static_cast<std::size_t>(feature_order));
  for (int k = 0; k < feature_order; ++k) {
    buckets.push_back(static_cast<int>(window_hash(prompt, prefix, t, k) %
                                       static_cast<std::uint64_t>(n_buckets)));
  }
  return buckets;
}

NextTokenDist next_dist(const PolicyParams& params, const TokenSeq& prompt,
                        const TokenSeq& prefix, double temperature) {
  check_params(params);
  check_temperature(temperature);
  check_tokens(prompt, params.vocab_size, "prompt");
  check_tokens(prefix, params.vocab_size, "prefix");
  auto buckets =
      context_buckets(prompt, prefix, prefix.size(), params.feature_order, params.n_buckets);
  return dist_from_buckets(params, buckets, temperature);
}

SampleGroup sample_completions(const PolicyParams& params, const Vocabulary& vocab,
                               const TokenSeq& prompt, std::int64_t prompt_id, int m,
                               double temperature, int max_len, std::uint64_t seed) {
  check_params(params);
  check_temperature(temperature);
  if (m < 1) throw std::invalid_argument("sample_completions: m must be >= 1");
  if (max_len < 1) throw std::invalid_argument("sample_completions: max_len must be >= 1");
  if (vocab.size() != params.vocab_size) {
    throw std::invalid_argument("sample_completions: vocabulary size does not match params");
  }
  check_tokens(prompt, params.vocab_size, "prompt");

  SampleGroup group;
  group.prompt_id = prompt_id;
  group.temperature = temperature;
  group.seed = seed;
  group.samples.reserve(static_cast<std::size_t>(m));

  for (int i = 0; i < m; ++i) {
    Rng rng(derive_seed(seed, "completion", static_cast<std::uint64_t>(i)));
    TokenSeq raw;
    std::vector<NextTokenDist> dists;
    std::vector<double> logps;
    while (static_cast<int>(raw.size()) < max_len) {
      auto buckets = context_buckets(prompt, raw, raw.size(), params.feature_order,
                                     params.n_buckets);
      NextTokenDist dist = dist_from_buckets(params, buckets, temperature);
      double u = rng.next_double();
      double cum = 0.0;
      TokenId tok = static_cast<TokenId>(params.vocab_size - 1);
      for (int v = 0; v < params.vocab_size; ++v) {
        cum += dist.probs[static_cast<std::size_t>(v)];
        if (u < cum) {
          tok = static_cast<TokenId>(v);
          break;
        }
      }
      logps.push_back(std::log(dist.probs[static_cast<std::size_t>(tok)]));
      dists.push_back(std::move(dist));
      raw.push_back(tok);
      if (tok == vocab.eos()) break;
    }

    SampledCompletion sc;
    sc.completion = tasks::make_completion(std::move(raw), vocab);
    std::size_t trace_len = sc.completion.trace.size();
    sc.trace_dists.assign(dists.begin(),
                          dists.begin() + static_cast<std::ptrdiff_t>(trace_len));
    sc.trace_logprob = 0.0;
    for (std::size_t t = 0; t < trace_len; ++t) sc.trace_logprob += logps[t];
    sc.full_logprob = 0.0;
    for (double lp : logps) sc.full_logprob += lp;
    group.samples.push_back(std::move(sc));
  }
  return group;
}

void walk_positions(
    const PolicyParams& params, const TokenSeq& prompt, const TokenSeq& raw,
    std::size_t n_positions, double temperature,
    const std::function<void(std::size_t t, const std::vector<int>& buckets,
                             const NextTokenDist& dist)>& fn) {
  check_params(params);
  check_temperature(temperature);
  check_tokens(prompt, params.vocab_size, "prompt");
  check_tokens(raw, params.vocab_size, "completion");
  if (n_positions > raw.size()) {
    throw std::invalid_argument("policy: position count exceeds sequence length");
  }
  for (std::size_t t = 0; t < n_positions; ++t) {
    auto buckets = context_buckets(prompt, raw, t, params.feature_order, params.n_buckets);
    NextTokenDist dist = dist_from_buckets(params, buckets, temperature);
    fn(t, buckets, dist);
  }
}

double prefix_logprob(const PolicyParams& params, const TokenSeq& prompt,
                      const TokenSeq& raw, std::size_t n_positions, double temperature) {
  double total = 0.0;
  walk_positions(params, prompt, raw, n_positions, temperature,
                 [&](std::size_t t, const std::vector<int>&, const NextTokenDist& dist) {
                   total += std::log(dist.probs[static_cast<std::size_t>(raw[t])]);
                 });
  return total;
}

double logprob(const PolicyParams& params, const TokenSeq& prompt, const TokenSeq& raw,
               double temperature) {
  return prefix_logprob(params, prompt, raw, raw.size(), temperature);
}

std::vector<double>& SparseGrad::row(int bucket) {
  auto it = rows_.find(bucket);
  if (it == rows_.end()) {
    it = rows_.emplace(bucket, std::vector<double>(static_cast<std::size_t>(vocab_size_), 0.0))
             .first;
  }
  return it->second;
}

double SparseGrad::l2norm() const {
  double sq = 0.0;
  for (const auto& [b, row] : rows_) {
    for (double g : row) sq += g * g;
  }
  return std::sqrt(sq);
}

bool SparseGrad::finite() const {
  for (const auto& [b, row] : rows_) {
    for (double g : row) {
      if (!std::isfinite(g)) return false;
    }
  }
  return true;
}

void SparseGrad::apply(std::vector<double>& theta, double factor) const {
  for (const auto& [b, row] : rows_) {
    double* dst = theta.data() + static_cast<std::size_t>(b) * vocab_size_;
    for (int v = 0; v < vocab_size_; ++v) dst[v] += factor * row[static_cast<std::size_t>(v)];
  }
}

std::vector<double> SparseGrad::to_dense(std::size_t theta_size) const {
  std::vector<double> dense(theta_size, 0.0);
  apply(dense, 1.0);
  return dense;
}

void accumulate_logprob_grad(const PolicyParams& params, const TokenSeq& prompt,
                             const TokenSeq& raw, std::size_t n_positions,
                             double temperature, double scale, SparseGrad& acc) {
  double inv_t = scale / temperature;
  walk_positions(params, prompt, raw, n_positions, temperature,
                 [&](std::size_t t, const std::vector<int>& buckets,
                     const NextTokenDist& dist) {
                   TokenId y = raw[t];
                   for (int b : buckets) {
                     auto& row = acc.row(b);
                     for (int v = 0; v < params.vocab_size; ++v) {
                       row[static_cast<std::size_t>(v)] -=
                           inv_t * dist.probs[static_cast<std::size_t>(v)];
                     }
                     row[static_cast<std::size_t>(y)] += inv_t;
                   }
                 });
}

std::vector<double> grad_logprob(const PolicyParams& params, const TokenSeq& prompt,
                                 const TokenSeq& raw, double temperature) {
  SparseGrad acc(params.vocab_size);
  accumulate_logprob_grad(params, prompt, raw, raw.size(), temperature, 1.0, acc);
  return acc.to_dense(params.theta.size());
}

void save_checkpoint(std::ostream& out, const PolicyParams& params) {
  check_params(params);
  for (double w : params.theta) {
    if (!std::isfinite(w)) throw NumericError("checkpoint: non-finite parameter");
  }
  json rec;
  rec["format"] = "disctt-policy";
  rec["version"] = 1;
  rec["feature_order"] = params.feature_order;
  rec["vocab_size"] = params.vocab_size;
  rec["n_buckets"] = params.n_buckets;
  rec["theta"] = params.theta;
  out << rec.dump() << '\n';
}

PolicyParams load_checkpoint(std::istream& in) {
  json rec;
  try {
    rec = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
  PolicyParams p;
  try {
    if (rec.at("format").get<std::string>() != "disctt-policy") {
      throw ParseError("checkpoint: unrecognized format tag");
    }
    p.feature_order = rec.at("feature_order").get<int>();
    p.vocab_size = rec.at("vocab_size").get<int>();
    p.n_buckets = rec.at("n_buckets").get<int>();
    p.theta = rec.at("theta").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
  try {
    check_params(p);
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
  return p;
}

}  // namespace disctt::policy
