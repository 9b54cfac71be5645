#include <sstream>

#include "doctest.h"
#include "disctt/error.hpp"
#include "disctt/tasks.hpp"
#include "disctt/tokens.hpp"

using namespace disctt;
using namespace disctt::tasks;

namespace {

TokenSeq ids(const Vocabulary& v, const std::vector<std::string>& symbols) {
  return v.to_ids(symbols);
}

}  // namespace

TEST_CASE("vocabulary for a modulus holds numbers, operators and markers") {
  auto v = Vocabulary::for_modulus(11);
  CHECK(v.size() == 20);  // "0".."11", three operators, "mod", four markers
  CHECK(v.has("0"));
  CHECK(v.has("11"));
  CHECK_FALSE(v.has("12"));
  CHECK(v.has("+"));
  CHECK(v.has("-"));
  CHECK(v.has("*"));
  CHECK(v.has("mod"));
  CHECK(v.symbol(v.prompt_end()) == kPromptEnd);
  CHECK(v.symbol(v.step_sep()) == kStepSep);
  CHECK(v.symbol(v.answer_delim()) == kAnswerDelim);
  CHECK(v.symbol(v.eos()) == kEos);
  for (TokenId t = 0; t < v.size(); ++t) {
    CHECK(v.id(v.symbol(t)) == t);
  }
}

TEST_CASE("vocabulary rejects unknown symbols and duplicate construction") {
  auto v = Vocabulary::for_modulus(5);
  CHECK_THROWS_AS(v.id("17"), std::invalid_argument);
  CHECK_THROWS_AS((void)v.symbol(-1), std::invalid_argument);
  CHECK_THROWS_AS((void)v.symbol(v.size()), std::invalid_argument);
  CHECK_THROWS_AS(Vocabulary({"a", "a", "<go>", "<sep>", "<ans>", "<eos>"}, "<go>", "<sep>",
                             "<ans>", "<eos>"),
                  std::invalid_argument);
}

TEST_CASE("oracle evaluates chains left to right with per-step reduction") {
  auto v = Vocabulary::for_modulus(7);
  // 3 + 4 = 7, reduced to 0
  CHECK(oracle_solve(ids(v, {"3", "+", "4", "mod", "7", "<go>"}), v) == ids(v, {"0"}));
  // no operator precedence: (2 * 3) + 1 under mod 7
  CHECK(oracle_solve(ids(v, {"2", "*", "3", "+", "1", "mod", "7", "<go>"}), v) ==
        ids(v, {"0"}));
  // negative intermediate wraps into [0, m)
  CHECK(oracle_solve(ids(v, {"1", "-", "4", "mod", "7", "<go>"}), v) == ids(v, {"4"}));
  CHECK(oracle_solve(ids(v, {"2", "-", "5", "*", "3", "mod", "7", "<go>"}), v) ==
        ids(v, {"5"}));
  // trailing prompt-end marker is optional
  CHECK(oracle_solve(ids(v, {"3", "+", "4", "mod", "7"}), v) == ids(v, {"0"}));
}

TEST_CASE("oracle rejects malformed prompts") {
  auto v = Vocabulary::for_modulus(7);
  CHECK_THROWS_AS(oracle_solve(ids(v, {"3", "+", "mod", "7"}), v), ParseError);
  CHECK_THROWS_AS(oracle_solve(ids(v, {"3", "mod", "7"}), v), ParseError);
  CHECK_THROWS_AS(oracle_solve(ids(v, {"3", "+", "4", "*", "7"}), v), ParseError);
  CHECK_THROWS_AS(oracle_solve(ids(v, {"+", "3", "4", "mod", "7"}), v), ParseError);
  CHECK_THROWS_AS(oracle_solve(ids(v, {"3", "+", "mod", "4", "7"}), v), ParseError);
}

TEST_CASE("answer parsing takes the span after the last delimiter") {
  auto v = Vocabulary::for_modulus(7);
  auto ans = [&](const std::vector<std::string>& raw) { return parse_answer(ids(v, raw), v); };

  CHECK(ans({"3", "<ans>", "5", "<eos>"}) == Answer::of(ids(v, {"5"})));
  CHECK(ans({"<ans>", "1", "<ans>", "2", "<eos>"}) == Answer::of(ids(v, {"2"})));
  CHECK(ans({"<ans>", "3", "4", "<eos>"}) == Answer::of(ids(v, {"3", "4"})));
  // trailing junk after the first terminator is ignored
  CHECK(ans({"<ans>", "6", "<eos>", "1", "<eos>"}) == Answer::of(ids(v, {"6"})));

  CHECK_FALSE(ans({"3", "5", "<eos>"}).parseable);       // no delimiter
  CHECK_FALSE(ans({"3", "<ans>", "5"}).parseable);       // no terminator
  CHECK_FALSE(ans({"3", "<ans>", "<eos>"}).parseable);   // empty span
  CHECK_FALSE(ans({}).parseable);
}

TEST_CASE("unparseable answers form one equivalence class") {
  auto v = Vocabulary::for_modulus(7);
  CHECK(Answer::none() == Answer::none());
  CHECK_FALSE(Answer::none() == Answer::of(ids(v, {"0"})));
  AnswerLess less;
  CHECK(less(Answer::of(ids(v, {"0"})), Answer::none()));
  CHECK_FALSE(less(Answer::none(), Answer::of(ids(v, {"0"}))));
  CHECK_FALSE(less(Answer::none(), Answer::none()));
}

TEST_CASE("completions split into trace and answer") {
  auto v = Vocabulary::for_modulus(7);
  auto comp = make_completion(ids(v, {"1", "<sep>", "2", "<ans>", "2", "<eos>"}), v);
  CHECK(comp.trace == ids(v, {"1", "<sep>", "2"}));
  CHECK(comp.answer == Answer::of(ids(v, {"2"})));
  CHECK(comp.raw.size() == 6);

  // unparseable: trace ends at the first terminator instead
  auto bare = make_completion(ids(v, {"1", "2", "<eos>", "4"}), v);
  CHECK(bare.trace == ids(v, {"1", "2"}));
  CHECK_FALSE(bare.answer.parseable);

  // neither delimiter nor terminator: everything is trace
  auto open = make_completion(ids(v, {"1", "2", "3"}), v);
  CHECK(open.trace == ids(v, {"1", "2", "3"}));
  CHECK_FALSE(open.answer.parseable);

  // the trace is always a prefix of the raw tokens
  for (const auto& c : {comp, bare, open}) {
    REQUIRE(c.trace.size() <= c.raw.size());
    CHECK(TokenSeq(c.raw.begin(), c.raw.begin() + c.trace.size()) == c.trace);
  }
}

TEST_CASE("canonical completions show each step and restate the answer") {
  auto v = Vocabulary::for_modulus(7);
  ProblemInstance inst;
  inst.prompt = ids(v, {"2", "-", "5", "*", "3", "mod", "7", "<go>"});
  inst.ground_truth = oracle_solve(inst.prompt, v);
  inst.depth = 2;
  inst.modulus = 7;

  // 2 - 5 = -3 -> 4, then 4 * 3 = 12 -> 5
  CHECK(canonical_completion(inst, v) == ids(v, {"4", "<sep>", "5", "<ans>", "5", "<eos>"}));

  auto comp = make_completion(canonical_completion(inst, v), v);
  CHECK(comp.answer == Answer::of(inst.ground_truth));
}

TEST_CASE("generated datasets are deterministic and oracle-consistent") {
  auto v = Vocabulary::for_modulus(11);
  auto ds = gen_dataset(42, 50, DepthRange{1, 4}, 11);
  REQUIRE(ds.size() == 50);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& inst = ds[i];
    CHECK(inst.id == static_cast<std::int64_t>(i));
    CHECK(inst.modulus == 11);
    CHECK(inst.depth >= 1);
    CHECK(inst.depth <= 4);
    REQUIRE(inst.prompt.size() == 2 * static_cast<std::size_t>(inst.depth) + 4);
    CHECK(inst.prompt.back() == v.prompt_end());
    CHECK(v.symbol(inst.prompt[inst.prompt.size() - 3]) == "mod");
    CHECK(oracle_solve(inst.prompt, v) == inst.ground_truth);
  }

  auto same = gen_dataset(42, 50, DepthRange{1, 4}, 11);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(ds[i].prompt == same[i].prompt);
  }

  auto other = gen_dataset(43, 50, DepthRange{1, 4}, 11);
  bool any_difference = false;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    any_difference = any_difference || ds[i].prompt != other[i].prompt;
  }
  CHECK(any_difference);
}

TEST_CASE("dataset generation validates its arguments") {
  CHECK_THROWS_AS(gen_dataset(1, 0, DepthRange{1, 2}, 7), std::invalid_argument);
  CHECK_THROWS_AS(gen_dataset(1, 5, DepthRange{0, 2}, 7), std::invalid_argument);
  CHECK_THROWS_AS(gen_dataset(1, 5, DepthRange{3, 2}, 7), std::invalid_argument);
  CHECK_THROWS_AS(gen_dataset(1, 5, DepthRange{1, 2}, 1), std::invalid_argument);
}

TEST_CASE("dataset jsonl round-trips exactly") {
  auto ds = gen_dataset(7, 12, DepthRange{1, 3}, 5);
  auto v = Vocabulary::for_modulus(5);

  std::ostringstream out;
  save_dataset_jsonl(out, ds, v);

  std::istringstream in(out.str());
  auto [back, vocab2] = load_dataset_jsonl(in);
  REQUIRE(back.size() == ds.size());
  CHECK(vocab2.size() == v.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(back[i].id == ds[i].id);
    CHECK(back[i].prompt == ds[i].prompt);
    CHECK(back[i].ground_truth == ds[i].ground_truth);
    CHECK(back[i].depth == ds[i].depth);
    CHECK(back[i].modulus == ds[i].modulus);
  }

  std::ostringstream out2;
  save_dataset_jsonl(out2, back, vocab2);
  CHECK(out.str() == out2.str());
}

TEST_CASE("dataset loading reports the offending line") {
  std::istringstream bad("{\"id\":0,\"prompt_tokens\":[\"2\",\"+\",\"2\",\"mod\",\"5\","
                         "\"<go>\"],\"ground_truth_tokens\":[\"4\"],\"depth\":1,"
                         "\"modulus\":5}\nnot json\n");
  CHECK_THROWS_WITH_AS(load_dataset_jsonl(bad), doctest::Contains("line 2"), ParseError);
}
