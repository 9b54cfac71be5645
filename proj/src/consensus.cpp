#include "disctt/consensus.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace disctt::consensus {

std::pair<tasks::Answer, int> majority_answer(const std::vector<tasks::Answer>& answers) {
  if (answers.empty()) throw std::invalid_argument("majority_answer: empty answer list");
  std::map<tasks::Answer, int, tasks::AnswerLess> hist;
  for (const auto& a : answers) hist[a] += 1;
  const tasks::Answer* best = nullptr;
  int best_count = 0;
  for (const auto& [answer, count] : hist) {
    if (count > best_count) {  // first maximum in sorted order wins ties
      best = &answer;
      best_count = count;
    }
  }
  return {*best, best_count};
}

double agreement_ratio(const std::vector<tasks::Answer>& answers) {
  auto [a, count] = majority_answer(answers);
  return static_cast<double>(count) / static_cast<double>(answers.size());
}

ConsensusReport make_report(std::int64_t prompt_id,
                            const std::vector<tasks::Answer>& answers) {
  if (answers.empty()) throw std::invalid_argument("make_report: empty answer list");
  ConsensusReport rep;
  rep.prompt_id = prompt_id;
  for (const auto& a : answers) rep.histogram[a] += 1;
  auto [a_maj, count] = majority_answer(answers);
  rep.a_maj = a_maj;
  rep.majority_count = count;
  rep.m = static_cast<int>(answers.size());
  rep.c = static_cast<double>(count) / static_cast<double>(rep.m);
  return rep;
}

Partition partition(const std::vector<ConsensusReport>& reports, double rho,
                    std::int64_t step) {
  if (!(rho > 0.0 && rho < 1.0)) {
    throw std::invalid_argument("partition: rho must lie in (0, 1)");
  }
  std::set<std::int64_t> seen;
  Partition p;
  p.rho = rho;
  p.created_at_step = step;
  for (const auto& rep : reports) {
    if (!seen.insert(rep.prompt_id).second) {
      throw std::invalid_argument("partition: duplicate prompt id " +
                                  std::to_string(rep.prompt_id));
    }
    if (rep.c >= rho) {
      p.easy.push_back(rep.prompt_id);
    } else {
      p.hard.push_back(rep.prompt_id);
    }
  }
  std::sort(p.easy.begin(), p.easy.end());
  std::sort(p.hard.begin(), p.hard.end());
  return p;
}

int select_pseudo_label(const policy::SampleGroup& group, const ConsensusReport& report) {
  int best = -1;
  double best_mean = 0.0;
  for (std::size_t i = 0; i < group.samples.size(); ++i) {
    const auto& sc = group.samples[i];
    if (!(sc.completion.answer == report.a_maj)) continue;
    double mean = sc.full_logprob / static_cast<double>(sc.completion.raw.size());
    if (best < 0 || mean > best_mean) {
      best = static_cast<int>(i);
      best_mean = mean;
    }
  }
  if (best < 0) {
    throw std::logic_error("select_pseudo_label: no completion matches the majority answer");
  }
  return best;
}

std::vector<tasks::Answer> answers_of(const policy::SampleGroup& group) {
  std::vector<tasks::Answer> out;
  out.reserve(group.samples.size());
  for (const auto& sc : group.samples) out.push_back(sc.completion.answer);
  return out;
}

}  // namespace disctt::consensus
