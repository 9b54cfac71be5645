#include <cmath>
#include <set>
#include <sstream>

#include "doctest.h"
#include "disctt/error.hpp"
#include "disctt/policy.hpp"
#include "disctt/rng.hpp"
#include "disctt/tokens.hpp"

using namespace disctt;
using namespace disctt::policy;

namespace {

PolicyParams random_params(int feature_order, int vocab_size, int n_buckets,
                           std::uint64_t seed, double scale = 0.5) {
  auto params = init_params(feature_order, vocab_size, n_buckets);
  Rng rng(seed);
  for (auto& w : params.theta) w = scale * (2.0 * rng.next_double() - 1.0);
  return params;
}

}  // namespace

TEST_CASE("zero parameters give the uniform next-token distribution") {
  auto v = Vocabulary::for_modulus(7);
  auto params = init_params(2, v.size(), 128);
  auto prompt = v.to_ids({"2", "+", "3", "mod", "7", "<go>"});
  auto dist = next_dist(params, prompt, {}, 0.9);
  REQUIRE(static_cast<int>(dist.probs.size()) == v.size());
  for (double p : dist.probs) {
    CHECK(p == doctest::Approx(1.0 / v.size()).epsilon(1e-12));
  }
}

TEST_CASE("softmax matches the closed form for a single bumped logit") {
  auto v = Vocabulary::for_modulus(7);
  const int vocab = v.size();  // 16
  auto prompt = v.to_ids({"2", "+", "3", "mod", "7", "<go>"});

  // order 1 means the empty window is the only active feature
  auto params = init_params(1, vocab, 64);
  auto rows = context_buckets(prompt, {}, 0, 1, 64);
  REQUIRE(rows.size() == 1);
  params.theta[static_cast<std::size_t>(rows[0]) * vocab + 3] = 2.0;

  SUBCASE("temperature one") {
    auto dist = next_dist(params, prompt, {}, 1.0);
    const double expected = std::exp(2.0) / (std::exp(2.0) + (vocab - 1));
    CHECK(dist.probs[3] == doctest::Approx(expected).epsilon(1e-12));
    CHECK(dist.probs[0] == doctest::Approx(expected / std::exp(2.0)).epsilon(1e-12));
  }
  SUBCASE("temperature scales the logits before the softmax") {
    auto dist = next_dist(params, prompt, {}, 2.0);
    const double expected = std::exp(1.0) / (std::exp(1.0) + (vocab - 1));
    CHECK(dist.probs[3] == doctest::Approx(expected).epsilon(1e-12));
  }
  SUBCASE("probabilities sum to one") {
    auto dist = next_dist(params, prompt, {}, 0.7);
    double sum = 0.0;
    for (double p : dist.probs) sum += p;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("context windows hash per order and ignore unrelated history") {
  auto v = Vocabulary::for_modulus(7);
  auto prompt_a = v.to_ids({"2", "+", "3", "mod", "7", "<go>"});
  auto prompt_b = v.to_ids({"6", "-", "1", "mod", "7", "<go>"});
  const int buckets = 1 << 14;

  auto rows_a = context_buckets(prompt_a, v.to_ids({"5", "<sep>"}), 2, 3, buckets);
  REQUIRE(rows_a.size() == 3);

  // the empty window is position independent
  auto bias_elsewhere = context_buckets(prompt_b, {}, 0, 3, buckets);
  CHECK(rows_a[0] == bias_elsewhere[0]);

  // short windows only see the tail of the context, not the prompt before it
  auto rows_b = context_buckets(prompt_b, v.to_ids({"4", "<sep>"}), 2, 3, buckets);
  CHECK(rows_a[1] == rows_b[1]);        // both tails end in <sep>
  CHECK(rows_a[2] != rows_b[2]);        // two-token windows differ: 5 vs 4
  CHECK(rows_a[1] != rows_a[2]);        // orders hash to distinct streams

  // a window reaching past the start of a short context is padded, not dropped
  auto rows_short = context_buckets(v.to_ids({"<go>"}), {}, 0, 3, buckets);
  REQUIRE(rows_short.size() == 3);
  CHECK(rows_short[1] != rows_short[2]);
}

TEST_CASE("sampling is deterministic in the seed and respects the length cap") {
  auto v = Vocabulary::for_modulus(7);
  auto params = random_params(2, v.size(), 256, 11);
  auto prompt = v.to_ids({"2", "+", "3", "mod", "7", "<go>"});

  auto a = sample_completions(params, v, prompt, 3, 6, 0.9, 20, 77);
  auto b = sample_completions(params, v, prompt, 3, 6, 0.9, 20, 77);
  REQUIRE(a.samples.size() == 6);
  CHECK(a.prompt_id == 3);
  CHECK(a.seed == 77);
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(a.samples[i].completion.raw == b.samples[i].completion.raw);
    CHECK(a.samples[i].trace_logprob == b.samples[i].trace_logprob);
    CHECK(a.samples[i].full_logprob == b.samples[i].full_logprob);
  }

  auto c = sample_completions(params, v, prompt, 3, 6, 0.9, 20, 78);
  bool differs = false;
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    differs = differs || a.samples[i].completion.raw != c.samples[i].completion.raw;
  }
  CHECK(differs);

  for (const auto& sc : a.samples) {
    REQUIRE(!sc.completion.raw.empty());
    CHECK(sc.completion.raw.size() <= 20);
    if (sc.completion.raw.size() < 20) {
      CHECK(sc.completion.raw.back() == v.eos());
    }
    // every raw token before a terminator is not <eos>
    for (std::size_t t = 0; t + 1 < sc.completion.raw.size(); ++t) {
      CHECK(sc.completion.raw[t] != v.eos());
    }
  }
}

TEST_CASE("sampled logprobs and distributions match recomputation") {
  auto v = Vocabulary::for_modulus(5);
  auto params = random_params(3, v.size(), 512, 4);
  auto prompt = v.to_ids({"1", "*", "4", "mod", "5", "<go>"});

  auto group = sample_completions(params, v, prompt, 0, 8, 0.8, 16, 5);
  for (const auto& sc : group.samples) {
    const auto& comp = sc.completion;
    REQUIRE(sc.trace_dists.size() == comp.trace.size());
    CHECK(sc.trace_logprob ==
          doctest::Approx(prefix_logprob(params, prompt, comp.raw, comp.trace.size(), 0.8))
              .epsilon(1e-12));
    CHECK(sc.full_logprob ==
          doctest::Approx(logprob(params, prompt, comp.raw, 0.8)).epsilon(1e-12));
    for (std::size_t t = 0; t < comp.trace.size(); ++t) {
      auto fresh = next_dist(params, prompt,
                             TokenSeq(comp.raw.begin(), comp.raw.begin() + t), 0.8);
      for (int tok = 0; tok < v.size(); ++tok) {
        CHECK(sc.trace_dists[t].probs[tok] ==
              doctest::Approx(fresh.probs[tok]).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("logprob gradient agrees with finite differences") {
  auto v = Vocabulary::for_modulus(3);
  auto params = random_params(2, v.size(), 64, 21);
  auto prompt = v.to_ids({"2", "+", "1", "mod", "3", "<go>"});
  auto raw = v.to_ids({"0", "<ans>", "0", "<eos>"});
  const double temp = 0.8;

  auto grad = grad_logprob(params, prompt, raw, temp);
  REQUIRE(grad.size() == params.theta.size());

  Rng pick(99);
  const double h = 1e-6;
  for (int trial = 0; trial < 24; ++trial) {
    auto idx = static_cast<std::size_t>(pick.next_below(params.theta.size()));
    auto bumped = params;
    bumped.theta[idx] += h;
    auto dropped = params;
    dropped.theta[idx] -= h;
    const double fd =
        (logprob(bumped, prompt, raw, temp) - logprob(dropped, prompt, raw, temp)) /
        (2.0 * h);
    CHECK(grad[idx] == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("sparse gradients accumulate and apply like dense ones") {
  auto v = Vocabulary::for_modulus(3);
  auto params = random_params(2, v.size(), 32, 8);
  auto prompt = v.to_ids({"1", "-", "2", "mod", "3", "<go>"});
  auto raw = v.to_ids({"2", "<ans>", "2", "<eos>"});

  SparseGrad acc(params.vocab_size);
  accumulate_logprob_grad(params, prompt, raw, raw.size(), 0.9, 2.5, acc);
  CHECK_FALSE(acc.empty());
  auto dense = acc.to_dense(params.theta.size());
  auto reference = grad_logprob(params, prompt, raw, 0.9);
  for (std::size_t i = 0; i < dense.size(); ++i) {
    CHECK(dense[i] == doctest::Approx(2.5 * reference[i]).epsilon(1e-12));
  }

  auto theta = params.theta;
  acc.apply(theta, -0.5);
  for (std::size_t i = 0; i < theta.size(); ++i) {
    CHECK(theta[i] == doctest::Approx(params.theta[i] - 0.5 * dense[i]).epsilon(1e-12));
  }

  const double norm = acc.l2norm();
  double sum_sq = 0.0;
  for (double g : dense) sum_sq += g * g;
  CHECK(norm == doctest::Approx(std::sqrt(sum_sq)).epsilon(1e-12));
}

TEST_CASE("checkpoints round-trip bit exactly") {
  auto params = random_params(3, 12, 128, 33);
  std::ostringstream out;
  save_checkpoint(out, params);

  std::istringstream in(out.str());
  auto back = load_checkpoint(in);
  CHECK(back.feature_order == params.feature_order);
  CHECK(back.vocab_size == params.vocab_size);
  CHECK(back.n_buckets == params.n_buckets);
  REQUIRE(back.theta.size() == params.theta.size());
  for (std::size_t i = 0; i < params.theta.size(); ++i) {
    CHECK(back.theta[i] == params.theta[i]);
  }

  std::ostringstream out2;
  save_checkpoint(out2, back);
  CHECK(out.str() == out2.str());
}

TEST_CASE("checkpoint io rejects bad data") {
  auto params = init_params(2, 4, 8);
  params.theta[3] = std::nan("");
  std::ostringstream out;
  CHECK_THROWS_AS(save_checkpoint(out, params), NumericError);

  std::istringstream not_ours("{\"format\":\"something-else\"}");
  CHECK_THROWS_AS(load_checkpoint(not_ours), ParseError);

  std::istringstream truncated("{\"format\":\"disctt-policy\",\"version\":1,"
                               "\"feature_order\":2,\"vocab_size\":4,\"n_buckets\":8,"
                               "\"theta\":[0.0,0.0]}");
  CHECK_THROWS_AS(load_checkpoint(truncated), ParseError);
}

TEST_CASE("parameter and argument validation") {
  auto v = Vocabulary::for_modulus(5);
  auto prompt = v.to_ids({"1", "+", "1", "mod", "5", "<go>"});

  CHECK_THROWS_AS(init_params(0, 4, 8), std::invalid_argument);
  CHECK_THROWS_AS(init_params(2, 0, 8), std::invalid_argument);
  CHECK_THROWS_AS(init_params(2, 4, 0), std::invalid_argument);

  auto params = init_params(2, v.size(), 16);
  CHECK_THROWS_AS(next_dist(params, prompt, {}, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(next_dist(params, prompt, {}, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(sample_completions(params, v, prompt, 0, 0, 0.9, 8, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(sample_completions(params, v, prompt, 0, 4, 0.9, 0, 1),
                  std::invalid_argument);

  auto mismatched = params;
  mismatched.theta.pop_back();
  CHECK_THROWS_AS(next_dist(mismatched, prompt, {}, 1.0), std::invalid_argument);
}
