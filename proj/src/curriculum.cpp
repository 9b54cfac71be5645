#include "disctt/curriculum.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "disctt/error.hpp"
#include "disctt/optim.hpp"
#include "disctt/rng.hpp"

namespace disctt::curriculum {

namespace {

using json = nlohmann::ordered_json;

std::int64_t raw_tokens(const policy::SampleGroup& group) {
  std::int64_t n = 0;
  for (const auto& sc : group.samples) {
    n += static_cast<std::int64_t>(sc.completion.raw.size());
  }
  return n;
}

std::int64_t trace_tokens(const std::vector<policy::SampledCompletion>& samples) {
  std::int64_t n = 0;
  for (const auto& sc : samples) n += static_cast<std::int64_t>(sc.completion.trace.size());
  return n;
}

std::int64_t intersection_size(const std::vector<std::int64_t>& a,
                               const std::vector<std::int64_t>& b) {
  std::vector<std::int64_t> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return static_cast<std::int64_t>(out.size());
}

template <typename T>
std::vector<std::vector<T>> chunked(const std::vector<T>& items, int chunk_size) {
  std::vector<std::vector<T>> out;
  for (std::size_t i = 0; i < items.size(); i += static_cast<std::size_t>(chunk_size)) {
    std::size_t end = std::min(items.size(), i + static_cast<std::size_t>(chunk_size));
    out.emplace_back(items.begin() + static_cast<std::ptrdiff_t>(i),
                     items.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

struct RoutedProblems {
  consensus::Partition partition;
  std::vector<consensus::ConsensusReport> reports;
  std::map<std::int64_t, TokenSeq> pseudo_labels;  // easy id -> frozen target
  double mean_trace_tokens_per_completion = 0.0;
};

}  // namespace

const char* mode_name(Mode mode) {
  switch (mode) {
    case Mode::disctt:
      return "disctt";
    case Mode::sft_only:
      return "sft_only";
    case Mode::rl_only:
      return "rl_only";
  }
  throw std::logic_error("mode_name: unknown mode");
}

Mode mode_from_name(const std::string& name) {
  if (name == "disctt") return Mode::disctt;
  if (name == "sft_only") return Mode::sft_only;
  if (name == "rl_only") return Mode::rl_only;
  throw std::invalid_argument("mode: expected one of disctt|sft_only|rl_only, got '" +
                              name + "'");
}

void validate(const CurriculumConfig& cfg) {
  auto fail = [](const std::string& msg) { throw ConfigError("curriculum." + msg); };
  if (cfg.m_consensus < 1) fail("m_consensus: must be >= 1");
  if (!(cfg.rho > 0.0 && cfg.rho < 1.0)) fail("rho: must lie in (0, 1)");
  if (cfg.reroute_interval_k < 0) fail("reroute_interval_k: must be >= 0");
  if (cfg.sft_epochs_per_cycle < 0) fail("sft_epochs_per_cycle: must be >= 0");
  if (cfg.rl_epochs_per_cycle < 0) fail("rl_epochs_per_cycle: must be >= 0");
  if (cfg.sft_epochs_per_cycle + cfg.rl_epochs_per_cycle < 1) {
    fail("sft_epochs_per_cycle: cycle must contain at least one phase epoch");
  }
  if (cfg.total_cycles < 1) fail("total_cycles: must be >= 1");
  if (cfg.n_rl_completions < 2) fail("n_rl_completions: must be >= 2");
  for (auto [value, name] :
       {std::pair{cfg.consensus_temperature, "consensus_temperature"},
        std::pair{cfg.sft_temperature, "sft_temperature"},
        std::pair{cfg.rl_temperature, "rl_temperature"},
        std::pair{cfg.eval_temperature, "eval_temperature"}}) {
    if (!(value > 0.0) || !std::isfinite(value)) {
      fail(std::string(name) + ": must be positive and finite");
    }
  }
  if (cfg.sft_lr < 0.0) fail("sft_lr: must be >= 0");
  if (cfg.rl_lr < 0.0) fail("rl_lr: must be >= 0");
  if (cfg.sft_batch_size < 1) fail("sft_batch_size: must be >= 1");
  if (cfg.rl_prompt_batch_size < 1) fail("rl_prompt_batch_size: must be >= 1");
  if (!(cfg.clip > 0.0)) fail("clip: must be > 0");
  if (cfg.inner_epochs < 1) fail("inner_epochs: must be >= 1");
  if (cfg.max_len < 1) fail("max_len: must be >= 1");
  if (cfg.eval_m < 1) fail("eval_m: must be >= 1");
  if (cfg.reward.beta < 0.0) fail("reward.beta: must be >= 0");
  if (!(cfg.reward.epsilon > 0.0 && cfg.reward.epsilon <= 1.0)) {
    fail("reward.epsilon: must lie in (0, 1]");
  }
}

std::string metrics_to_json_line(const MetricsRecord& rec) {
  json j;
  j["step"] = rec.step;
  j["phase"] = rec.phase;
  auto put = [&](const char* key, const auto& opt) {
    if (opt) j[key] = *opt;
  };
  put("accuracy_majority", rec.accuracy_majority);
  put("accuracy_any", rec.accuracy_any);
  put("mean_c", rec.mean_c);
  put("easy_fraction", rec.easy_fraction);
  put("easy_count", rec.easy_count);
  put("hard_count", rec.hard_count);
  put("migrated_easy_to_hard", rec.migrated_easy_to_hard);
  put("migrated_hard_to_easy", rec.migrated_hard_to_easy);
  put("partition_step", rec.partition_step);
  put("loss_before", rec.loss_before);
  put("loss_after", rec.loss_after);
  put("grad_norm", rec.grad_norm);
  put("clipped_fraction", rec.clipped_fraction);
  put("batches", rec.batches);
  put("mean_reward", rec.mean_reward);
  put("gate_rate", rec.gate_rate);
  put("mean_jsd_nov", rec.mean_jsd_nov);
  put("mean_g_rel", rec.mean_g_rel);
  if (rec.accuracy_by_depth) {
    json by_depth;
    for (const auto& [depth, acc] : *rec.accuracy_by_depth) {
      by_depth[std::to_string(depth)] = acc;
    }
    j["accuracy_by_depth"] = by_depth;
  }
  put("sft_tokens", rec.sft_tokens);
  put("rl_tokens", rec.rl_tokens);
  put("sampling_tokens", rec.sampling_tokens);
  put("cost_ratio", rec.cost_ratio);
  return j.dump();
}

MetricsRecord metrics_from_json_line(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("metrics: ") + e.what());
  }
  MetricsRecord rec;
  try {
    rec.step = j.at("step").get<std::int64_t>();
    rec.phase = j.at("phase").get<std::string>();
    auto get_d = [&](const char* key, std::optional<double>& dst) {
      if (j.contains(key)) dst = j[key].get<double>();
    };
    auto get_i = [&](const char* key, std::optional<std::int64_t>& dst) {
      if (j.contains(key)) dst = j[key].get<std::int64_t>();
    };
    get_d("accuracy_majority", rec.accuracy_majority);
    get_d("accuracy_any", rec.accuracy_any);
    get_d("mean_c", rec.mean_c);
    get_d("easy_fraction", rec.easy_fraction);
    get_i("easy_count", rec.easy_count);
    get_i("hard_count", rec.hard_count);
    get_i("migrated_easy_to_hard", rec.migrated_easy_to_hard);
    get_i("migrated_hard_to_easy", rec.migrated_hard_to_easy);
    get_i("partition_step", rec.partition_step);
    get_d("loss_before", rec.loss_before);
    get_d("loss_after", rec.loss_after);
    get_d("grad_norm", rec.grad_norm);
    get_d("clipped_fraction", rec.clipped_fraction);
    get_i("batches", rec.batches);
    get_d("mean_reward", rec.mean_reward);
    get_d("gate_rate", rec.gate_rate);
    get_d("mean_jsd_nov", rec.mean_jsd_nov);
    get_d("mean_g_rel", rec.mean_g_rel);
    if (j.contains("accuracy_by_depth")) {
      std::map<int, double> by_depth;
      for (const auto& [key, value] : j["accuracy_by_depth"].items()) {
        by_depth[std::stoi(key)] = value.get<double>();
      }
      rec.accuracy_by_depth = std::move(by_depth);
    }
    get_i("sft_tokens", rec.sft_tokens);
    get_i("rl_tokens", rec.rl_tokens);
    get_i("sampling_tokens", rec.sampling_tokens);
    get_d("cost_ratio", rec.cost_ratio);
  } catch (const json::exception& e) {
    throw ParseError(std::string("metrics: ") + e.what());
  }
  return rec;
}

CostSummary cost_accounting(const CycleState& state, double c_sft, double c_rl) {
  if (c_sft < 0.0 || c_rl < 0.0) {
    throw std::invalid_argument("cost_accounting: per-token costs must be >= 0");
  }
  CostSummary out;
  out.sft_tokens = state.sft_tokens;
  out.rl_tokens = state.rl_tokens;
  out.sampling_tokens = state.sampling_tokens;
  double counterfactual = 0.0;
  for (const auto& cyc : state.cycles) {
    double per_visit = cyc.rl_prompt_visits > 0
                           ? static_cast<double>(cyc.rl_update_tokens) /
                                 static_cast<double>(cyc.rl_prompt_visits)
                           : cyc.est_visit_tokens;
    counterfactual += per_visit * static_cast<double>(cyc.rl_epochs) *
                      static_cast<double>(cyc.easy_count + cyc.hard_count);
  }
  double numerator = static_cast<double>(state.sft_tokens) * c_sft +
                     static_cast<double>(state.rl_tokens) * c_rl;
  double denominator = counterfactual * c_rl;
  if (denominator > 0.0) {
    out.cost_ratio = numerator / denominator;
  } else {
    out.cost_ratio = numerator == 0.0 ? 1.0 : std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

EvalResult accuracy_from_answers(const std::vector<std::vector<tasks::Answer>>& groups,
                                 const std::vector<tasks::Answer>& truths,
                                 const std::vector<int>* depths) {
  if (groups.size() != truths.size() || groups.empty()) {
    throw std::invalid_argument("accuracy: need one non-empty answer group per truth");
  }
  if (depths && depths->size() != groups.size()) {
    throw std::invalid_argument("accuracy: depth list must match group count");
  }
  EvalResult res;
  std::int64_t majority_hits = 0, any_hits = 0, total_samples = 0;
  double c_sum = 0.0;
  std::map<int, std::pair<std::int64_t, std::int64_t>> depth_counts;  // hits, totals
  for (std::size_t i = 0; i < groups.size(); ++i) {
    auto [a_maj, count] = consensus::majority_answer(groups[i]);
    bool majority_correct = a_maj == truths[i];
    majority_hits += majority_correct ? 1 : 0;
    c_sum += static_cast<double>(count) / static_cast<double>(groups[i].size());
    for (const auto& a : groups[i]) {
      any_hits += a == truths[i] ? 1 : 0;
    }
    total_samples += static_cast<std::int64_t>(groups[i].size());
    if (depths) {
      auto& [hits, totals] = depth_counts[(*depths)[i]];
      hits += majority_correct ? 1 : 0;
      totals += 1;
    }
  }
  res.accuracy_majority =
      static_cast<double>(majority_hits) / static_cast<double>(groups.size());
  res.accuracy_any = static_cast<double>(any_hits) / static_cast<double>(total_samples);
  res.mean_c = c_sum / static_cast<double>(groups.size());
  for (const auto& [depth, counts] : depth_counts) {
    res.accuracy_by_depth[depth] =
        static_cast<double>(counts.first) / static_cast<double>(counts.second);
  }
  return res;
}

EvalResult eval_accuracy(const policy::PolicyParams& params,
                         const std::vector<tasks::ProblemInstance>& problems,
                         const Vocabulary& vocab, int m, double temperature, int max_len,
                         std::uint64_t seed) {
  if (problems.empty()) throw std::invalid_argument("eval_accuracy: empty problem set");
  std::vector<std::vector<tasks::Answer>> groups;
  std::vector<tasks::Answer> truths;
  std::vector<int> depths;
  groups.reserve(problems.size());
  for (const auto& inst : problems) {
    auto group = policy::sample_completions(
        params, vocab, inst.prompt, inst.id, m, temperature, max_len,
        derive_seed(seed, "eval", static_cast<std::uint64_t>(inst.id)));
    groups.push_back(consensus::answers_of(group));
    truths.push_back(tasks::Answer::of(inst.ground_truth));
    depths.push_back(inst.depth);
  }
  return accuracy_from_answers(groups, truths, &depths);
}

bool reroute_due(std::int64_t step, std::int64_t k) {
  if (k < 1) throw std::invalid_argument("reroute_due: interval must be >= 1");
  return step % k == 0;
}

policy::PolicyParams pretrain_supervised(policy::PolicyParams params,
                                         const std::vector<tasks::ProblemInstance>& problems,
                                         const Vocabulary& vocab, int epochs, double lr,
                                         double temperature, int batch_size) {
  if (epochs < 0) throw std::invalid_argument("pretrain: epochs must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("pretrain: batch_size must be >= 1");
  std::vector<optim::SftItem> items;
  items.reserve(problems.size());
  for (const auto& inst : problems) {
    items.push_back({inst.prompt, tasks::canonical_completion(inst, vocab)});
  }
  for (int e = 0; e < epochs; ++e) {
    for (const auto& chunk : chunked(items, batch_size)) {
      params = optim::sft_step(std::move(params), optim::SftBatch{chunk}, lr, temperature)
                   .first;
    }
  }
  return params;
}

RunResult run_disctt(const CurriculumConfig& cfg,
                     const std::vector<tasks::ProblemInstance>& problems,
                     const Vocabulary& vocab, policy::PolicyParams initial,
                     const RunObserver* obs) {
  validate(cfg);
  if (problems.empty()) throw std::invalid_argument("run: empty problem set");
  {
    std::set<std::int64_t> ids;
    for (const auto& inst : problems) {
      if (!ids.insert(inst.id).second) {
        throw std::invalid_argument("run: duplicate problem id " + std::to_string(inst.id));
      }
    }
  }
  std::vector<tasks::ProblemInstance> ds = problems;
  std::sort(ds.begin(), ds.end(),
            [](const auto& a, const auto& b) { return a.id < b.id; });
  std::map<std::int64_t, const tasks::ProblemInstance*> by_id;
  for (const auto& inst : ds) by_id[inst.id] = &inst;

  const std::int64_t cycle_len = cfg.sft_epochs_per_cycle + cfg.rl_epochs_per_cycle;
  const std::int64_t k = cfg.reroute_interval_k > 0 ? cfg.reroute_interval_k : cycle_len;

  RunResult result{std::move(initial), {}, {}};
  CycleState& state = result.state;
  RoutedProblems routed;
  bool have_partition = false;
  std::int64_t step = 0;

  auto emit_eval = [&](std::uint64_t eval_index) {
    std::uint64_t pass_seed = derive_seed(cfg.seed, "eval-pass", eval_index);
    std::vector<std::vector<tasks::Answer>> groups;
    std::vector<tasks::Answer> truths;
    std::vector<int> depths;
    for (const auto& inst : ds) {
      auto group = policy::sample_completions(
          result.params, vocab, inst.prompt, inst.id, cfg.eval_m, cfg.eval_temperature,
          cfg.max_len, derive_seed(pass_seed, "eval", static_cast<std::uint64_t>(inst.id)));
      state.sampling_tokens += raw_tokens(group);
      groups.push_back(consensus::answers_of(group));
      truths.push_back(tasks::Answer::of(inst.ground_truth));
      depths.push_back(inst.depth);
    }
    EvalResult ev = accuracy_from_answers(groups, truths, &depths);
    CostSummary cost = cost_accounting(state);
    MetricsRecord rec;
    rec.step = step;
    rec.phase = "eval";
    rec.accuracy_majority = ev.accuracy_majority;
    rec.accuracy_any = ev.accuracy_any;
    rec.mean_c = ev.mean_c;
    rec.accuracy_by_depth = ev.accuracy_by_depth;
    rec.sft_tokens = state.sft_tokens;
    rec.rl_tokens = state.rl_tokens;
    rec.sampling_tokens = state.sampling_tokens;
    rec.cost_ratio = cost.cost_ratio;
    result.metrics.push_back(std::move(rec));
  };

  emit_eval(0);

  for (int cycle = 0; cycle < cfg.total_cycles; ++cycle) {
    if (reroute_due(step, k)) {
      RoutedProblems next;
      std::int64_t routing_trace_tokens = 0;
      std::int64_t routing_completions = 0;
      double c_sum = 0.0;
      for (const auto& inst : ds) {
        auto group = policy::sample_completions(
            result.params, vocab, inst.prompt, inst.id, cfg.m_consensus,
            cfg.consensus_temperature, cfg.max_len,
            derive_seed(cfg.seed, "route", static_cast<std::uint64_t>(cycle),
                        static_cast<std::uint64_t>(inst.id)));
        state.sampling_tokens += raw_tokens(group);
        routing_trace_tokens += trace_tokens(group.samples);
        routing_completions += static_cast<std::int64_t>(group.samples.size());
        auto report = consensus::make_report(inst.id, consensus::answers_of(group));
        c_sum += report.c;
        bool easy = false;
        switch (cfg.mode) {
          case Mode::disctt:
            easy = report.c >= cfg.rho;
            break;
          case Mode::sft_only:
            easy = true;
            break;
          case Mode::rl_only:
            easy = false;
            break;
        }
        if (easy) {
          next.partition.easy.push_back(inst.id);
          int label = consensus::select_pseudo_label(group, report);
          const auto& chosen = group.samples[static_cast<std::size_t>(label)];
          // The SFT target must be a parseable completion; a group whose
          // majority is the unparseable class contributes no label and sits
          // out the SFT phase.
          if (chosen.completion.answer.parseable) {
            next.pseudo_labels[inst.id] = chosen.completion.raw;
          }
        } else {
          next.partition.hard.push_back(inst.id);
        }
        next.reports.push_back(std::move(report));
      }
      next.partition.rho = cfg.rho;
      next.partition.created_at_step = step;
      next.mean_trace_tokens_per_completion =
          routing_completions > 0
              ? static_cast<double>(routing_trace_tokens) /
                    static_cast<double>(routing_completions)
              : 0.0;

      MetricsRecord rec;
      rec.step = step;
      rec.phase = "route";
      rec.mean_c = c_sum / static_cast<double>(ds.size());
      rec.easy_count = static_cast<std::int64_t>(next.partition.easy.size());
      rec.hard_count = static_cast<std::int64_t>(next.partition.hard.size());
      rec.easy_fraction = static_cast<double>(next.partition.easy.size()) /
                          static_cast<double>(ds.size());
      rec.partition_step = step;
      rec.migrated_easy_to_hard =
          have_partition ? intersection_size(routed.partition.easy, next.partition.hard)
                         : 0;
      rec.migrated_hard_to_easy =
          have_partition ? intersection_size(routed.partition.hard, next.partition.easy)
                         : 0;
      result.metrics.push_back(std::move(rec));

      routed = std::move(next);
      have_partition = true;
      if (obs && obs->on_route) obs->on_route(cycle, routed.partition);
    }

    state.cycle_index = cycle;
    state.partition = routed.partition;
    state.reports = routed.reports;

    CycleCost cost;
    cost.cycle_index = cycle;
    cost.easy_count = static_cast<std::int64_t>(routed.partition.easy.size());
    cost.hard_count = static_cast<std::int64_t>(routed.partition.hard.size());
    cost.rl_epochs = cfg.rl_epochs_per_cycle;
    cost.est_visit_tokens = routed.mean_trace_tokens_per_completion *
                            static_cast<double>(cfg.n_rl_completions) *
                            static_cast<double>(cfg.inner_epochs);

    // SFT phase on the easy side, pseudo-labels frozen at routing time.
    std::vector<optim::SftItem> sft_items;
    for (std::int64_t id : routed.partition.easy) {
      auto it = routed.pseudo_labels.find(id);
      if (it != routed.pseudo_labels.end()) {
        sft_items.push_back({by_id.at(id)->prompt, it->second});
      }
    }
    for (int e = 0; e < cfg.sft_epochs_per_cycle; ++e) {
      ++step;
      if (!sft_items.empty()) {
        double loss_before_sum = 0.0, loss_after_sum = 0.0, grad_norm_sum = 0.0;
        std::int64_t n_batches = 0;
        for (const auto& chunk : chunked(sft_items, cfg.sft_batch_size)) {
          auto [next_params, rep] = optim::sft_step(std::move(result.params),
                                                    optim::SftBatch{chunk}, cfg.sft_lr,
                                                    cfg.sft_temperature);
          result.params = std::move(next_params);
          for (const auto& item : chunk) {
            state.sft_tokens += static_cast<std::int64_t>(item.target.size());
          }
          loss_before_sum += rep.loss_before;
          loss_after_sum += rep.loss_after;
          grad_norm_sum += rep.grad_norm;
          ++n_batches;
        }
        MetricsRecord rec;
        rec.step = step;
        rec.phase = "sft";
        rec.partition_step = routed.partition.created_at_step;
        rec.batches = n_batches;
        rec.loss_before = loss_before_sum / static_cast<double>(n_batches);
        rec.loss_after = loss_after_sum / static_cast<double>(n_batches);
        rec.grad_norm = grad_norm_sum / static_cast<double>(n_batches);
        result.metrics.push_back(std::move(rec));
      }
      if (obs && obs->on_phase_step) obs->on_phase_step(step, "sft", routed.partition);
    }

    // RL phase on the hard side.
    for (int e = 0; e < cfg.rl_epochs_per_cycle; ++e) {
      ++step;
      if (!routed.partition.hard.empty()) {
        double loss_before_sum = 0.0, loss_after_sum = 0.0, grad_norm_sum = 0.0;
        double clipped_sum = 0.0;
        double reward_sum = 0.0, gate_sum = 0.0, jsd_sum = 0.0, grel_sum = 0.0;
        std::int64_t n_updates = 0, n_completions = 0;
        for (const auto& chunk : chunked(routed.partition.hard, cfg.rl_prompt_batch_size)) {
          std::vector<optim::RlBatch> batches;
          std::vector<std::vector<double>> advantages;
          for (std::int64_t id : chunk) {
            const auto& inst = *by_id.at(id);
            auto group = policy::sample_completions(
                result.params, vocab, inst.prompt, inst.id, cfg.n_rl_completions,
                cfg.rl_temperature, cfg.max_len,
                derive_seed(cfg.seed, "rl", static_cast<std::uint64_t>(cycle),
                            static_cast<std::uint64_t>(e),
                            static_cast<std::uint64_t>(id)));
            state.sampling_tokens += raw_tokens(group);
            auto report = consensus::make_report(inst.id, consensus::answers_of(group));
            auto breakdowns =
                reward::composite_reward(group, report, cfg.reward, inst.prompt, vocab);
            std::vector<double> rewards;
            rewards.reserve(breakdowns.size());
            for (const auto& b : breakdowns) {
              rewards.push_back(b.total);
              reward_sum += b.total;
              gate_sum += b.gate;
              jsd_sum += b.jsd_nov;
              grel_sum += b.g_rel;
              ++n_completions;
            }
            advantages.push_back(optim::grpo_advantages(rewards));
            std::int64_t batch_trace = trace_tokens(group.samples);
            state.rl_tokens += batch_trace * cfg.inner_epochs;
            cost.rl_update_tokens += batch_trace * cfg.inner_epochs;
            cost.rl_prompt_visits += 1;
            batches.push_back(
                optim::RlBatch{inst.prompt, std::move(group.samples), std::move(rewards)});
          }
          optim::GrpoOptions opts;
          opts.clip = cfg.clip;
          opts.lr = cfg.rl_lr;
          opts.temperature = cfg.rl_temperature;
          opts.inner_epochs = cfg.inner_epochs;
          opts.kl_coeff = cfg.kl_coeff;
          auto [next_params, rep] =
              optim::grpo_step(std::move(result.params), batches, advantages, opts);
          result.params = std::move(next_params);
          loss_before_sum += rep.loss_before;
          loss_after_sum += rep.loss_after;
          grad_norm_sum += rep.grad_norm;
          clipped_sum += rep.clipped_fraction;
          ++n_updates;
        }
        MetricsRecord rec;
        rec.step = step;
        rec.phase = "rl";
        rec.partition_step = routed.partition.created_at_step;
        rec.batches = n_updates;
        rec.loss_before = loss_before_sum / static_cast<double>(n_updates);
        rec.loss_after = loss_after_sum / static_cast<double>(n_updates);
        rec.grad_norm = grad_norm_sum / static_cast<double>(n_updates);
        rec.clipped_fraction = clipped_sum / static_cast<double>(n_updates);
        rec.mean_reward = reward_sum / static_cast<double>(n_completions);
        rec.gate_rate = gate_sum / static_cast<double>(n_completions);
        rec.mean_jsd_nov = jsd_sum / static_cast<double>(n_completions);
        rec.mean_g_rel = grel_sum / static_cast<double>(n_completions);
        result.metrics.push_back(std::move(rec));
      }
      if (obs && obs->on_phase_step) obs->on_phase_step(step, "rl", routed.partition);
    }

    state.cycles.push_back(cost);
    emit_eval(static_cast<std::uint64_t>(cycle) + 1);
    if (obs && obs->on_cycle_end) obs->on_cycle_end(cycle, result.params);
  }
  return result;
}

}  // namespace disctt::curriculum
