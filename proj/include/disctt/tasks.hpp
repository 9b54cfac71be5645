#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "disctt/tokens.hpp"

namespace disctt::tasks {

// Final answer of a completion. Unparseable output forms its own class that
// never compares equal to any parsed token sequence.
struct Answer {
  bool parseable = false;
  TokenSeq tokens;

  static Answer none() { return Answer{}; }
  static Answer of(TokenSeq t) { return Answer{true, std::move(t)}; }

  bool operator==(const Answer& o) const {
    return parseable == o.parseable && (!parseable || tokens == o.tokens);
  }
};

// Strict weak order used for tie-breaking: parseable answers sort before the
// unparseable class, and parseable answers sort lexicographically by token id.
struct AnswerLess {
  bool operator()(const Answer& a, const Answer& b) const {
    if (a.parseable != b.parseable) return a.parseable;
    if (!a.parseable) return false;
    return a.tokens < b.tokens;
  }
};

struct ProblemInstance {
  std::int64_t id = 0;
  TokenSeq prompt;        // ends with the prompt-end marker
  TokenSeq ground_truth;  // canonical answer rendering; hidden from adaptation
  int depth = 0;          // number of arithmetic steps
  int modulus = 0;
};

struct Completion {
  TokenSeq trace;  // reasoning tokens: prefix of raw up to the answer delimiter
  Answer answer;
  TokenSeq raw;  // full generated sequence, prompt excluded
};

struct DepthRange {
  int lo = 1;
  int hi = 1;
};

// Deterministic problem set: `count` instances with depths uniform over the
// range and operands uniform over [0, modulus).
std::vector<ProblemInstance> gen_dataset(std::uint64_t seed, int count,
                                         DepthRange depth, int modulus);

// Evaluates a prompt left to right (no operator precedence) and returns the
// canonical answer tokens. The trailing prompt-end marker is optional.
// Throws ParseError on malformed input.
TokenSeq oracle_solve(const TokenSeq& prompt, const Vocabulary& vocab);

// Extracts the span strictly between the last answer delimiter and the first
// end-of-sequence marker after it. No delimiter, no terminator, or an empty
// span gives the unparseable class. Never throws on well-formed token ids.
Answer parse_answer(const TokenSeq& raw, const Vocabulary& vocab);

// Derives trace and answer from a raw generated sequence.
Completion make_completion(TokenSeq raw, const Vocabulary& vocab);

// Reference solution rendered as a full completion: intermediate values
// separated by step markers, then delimiter, answer, end-of-sequence.
TokenSeq canonical_completion(const ProblemInstance& inst, const Vocabulary& vocab);

void save_dataset_jsonl(std::ostream& out, const std::vector<ProblemInstance>& ds,
                        const Vocabulary& vocab);
// Requires all records to share one modulus; instances keep their stored order.
std::pair<std::vector<ProblemInstance>, Vocabulary> load_dataset_jsonl(std::istream& in);

}  // namespace disctt::tasks
