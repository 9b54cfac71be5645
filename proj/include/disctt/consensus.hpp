#pragma once

#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "disctt/policy.hpp"
#include "disctt/tasks.hpp"

namespace disctt::consensus {

// Vote summary for one prompt's sample group.
struct ConsensusReport {
  std::int64_t prompt_id = 0;
  std::map<tasks::Answer, int, tasks::AnswerLess> histogram;
  tasks::Answer a_maj;
  int majority_count = 0;
  double c = 0.0;  // majority_count / m
  int m = 0;
};

// Modal answer with deterministic tie-breaking: on equal counts the smallest
// answer under AnswerLess wins, so parseable answers beat the unparseable
// class and ties among parseable answers go to the lexicographically least.
std::pair<tasks::Answer, int> majority_answer(const std::vector<tasks::Answer>& answers);

double agreement_ratio(const std::vector<tasks::Answer>& answers);

ConsensusReport make_report(std::int64_t prompt_id,
                            const std::vector<tasks::Answer>& answers);

// Difficulty split: ids with c >= rho go easy, the rest hard. Both lists are
// sorted by id; together they cover the input exactly once.
struct Partition {
  std::vector<std::int64_t> easy;
  std::vector<std::int64_t> hard;
  double rho = 0.0;
  std::int64_t created_at_step = 0;
};

Partition partition(const std::vector<ConsensusReport>& reports, double rho,
                    std::int64_t step);

// Among completions matching the majority answer, picks the one with the
// highest mean per-token log-probability; exact ties go to the lowest index.
// Returns the sample index into group.samples.
int select_pseudo_label(const policy::SampleGroup& group, const ConsensusReport& report);

std::vector<tasks::Answer> answers_of(const policy::SampleGroup& group);

}  // namespace disctt::consensus
