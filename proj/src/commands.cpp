#include "disctt/commands.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "disctt/consensus.hpp"
#include "disctt/curriculum.hpp"
#include "disctt/error.hpp"
#include "disctt/policy.hpp"
#include "disctt/reward.hpp"
#include "disctt/rng.hpp"
#include "disctt/run_config.hpp"
#include "disctt/tasks.hpp"
#include "json.hpp"

namespace disctt::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write file: " + path.string());
  out << content;
}

policy::PolicyParams load_checkpoint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open checkpoint: " + path);
  return policy::load_checkpoint(in);
}

std::pair<std::vector<tasks::ProblemInstance>, Vocabulary> load_dataset_file(
    const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open dataset: " + path);
  return tasks::load_dataset_jsonl(in);
}

// Number formatting shared with the JSON outputs, so CSV and JSONL agree on
// the textual value of every double.
std::string num(double v) { return nlohmann::json(v).dump(); }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string quoted = "\"";
  for (char ch : s) {
    if (ch == '"') quoted += '"';
    quoted += ch;
  }
  quoted += '"';
  return quoted;
}

class LineSink {
 public:
  LineSink(const std::string& out_path, std::ostream& fallback) : fallback_(fallback) {
    if (!out_path.empty() && out_path != "-") {
      file_.open(out_path, std::ios::binary);
      if (!file_) throw ParseError("cannot write file: " + out_path);
      use_file_ = true;
    }
  }

  std::ostream& stream() { return use_file_ ? file_ : fallback_; }

 private:
  std::ofstream file_;
  std::ostream& fallback_;
  bool use_file_ = false;
};

policy::PolicyParams build_initial_params(const RunConfig& cfg,
                                          const std::vector<tasks::ProblemInstance>& ds,
                                          const Vocabulary& vocab) {
  auto params =
      policy::init_params(cfg.policy.feature_order, vocab.size(), cfg.policy.n_buckets);
  if (cfg.init.mode == "pretrain") {
    params = curriculum::pretrain_supervised(std::move(params), ds, vocab,
                                             cfg.init.pretrain_epochs, cfg.init.pretrain_lr,
                                             cfg.curriculum.sft_temperature,
                                             cfg.init.pretrain_batch_size);
  }
  return params;
}

struct RunOutputs {
  curriculum::RunResult result;
  curriculum::CostSummary cost;
};

RunOutputs execute_run(const RunConfig& cfg, const std::vector<tasks::ProblemInstance>& ds,
                       const Vocabulary& vocab, policy::PolicyParams initial) {
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);

  {
    std::ofstream f(dir / "dataset.jsonl", std::ios::binary);
    if (!f) throw ParseError("cannot write file: " + (dir / "dataset.jsonl").string());
    tasks::save_dataset_jsonl(f, ds, vocab);
  }
  write_text_file(dir / "config_resolved.json", dump_run_config(cfg));

  curriculum::RunObserver obs;
  obs.on_cycle_end = [&dir](int cycle, const policy::PolicyParams& p) {
    const fs::path path = dir / ("checkpoint_cycle_" + std::to_string(cycle) + ".json");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ParseError("cannot write file: " + path.string());
    policy::save_checkpoint(f, p);
  };

  RunOutputs outputs{curriculum::run_disctt(cfg.curriculum, ds, vocab, std::move(initial), &obs),
                     {}};
  outputs.cost = curriculum::cost_accounting(outputs.result.state, cfg.cost.c_sft, cfg.cost.c_rl);

  {
    std::ofstream f(dir / "metrics.jsonl", std::ios::binary);
    if (!f) throw ParseError("cannot write file: " + (dir / "metrics.jsonl").string());
    for (const auto& rec : outputs.result.metrics) {
      f << curriculum::metrics_to_json_line(rec) << "\n";
    }
  }
  {
    std::ofstream f(dir / "checkpoint_final.json", std::ios::binary);
    if (!f) throw ParseError("cannot write file: " + (dir / "checkpoint_final.json").string());
    policy::save_checkpoint(f, outputs.result.params);
  }
  return outputs;
}

const curriculum::MetricsRecord* last_eval(const std::vector<curriculum::MetricsRecord>& recs) {
  for (auto it = recs.rbegin(); it != recs.rend(); ++it) {
    if (it->phase == "eval") return &*it;
  }
  return nullptr;
}

ordered_json eval_to_json(const curriculum::EvalResult& ev) {
  ordered_json by_depth = ordered_json::object();
  for (const auto& [depth, acc] : ev.accuracy_by_depth) {
    by_depth[std::to_string(depth)] = acc;
  }
  return ordered_json{{"accuracy_majority", ev.accuracy_majority},
                      {"accuracy_any", ev.accuracy_any},
                      {"mean_c", ev.mean_c},
                      {"accuracy_by_depth", by_depth}};
}

}  // namespace

int cmd_run(const RunArgs& args, std::ostream& out, std::ostream& err) {
  try {
    RunConfig cfg = parse_run_config(read_text_file(args.config_path));
    if (args.out_dir) cfg.output_dir = *args.out_dir;
    if (args.seed) cfg.curriculum.seed = *args.seed;
    if (args.mode) {
      try {
        cfg.curriculum.mode = curriculum::mode_from_name(*args.mode);
      } catch (const std::invalid_argument&) {
        throw ConfigError("mode: must be one of disctt, sft_only, rl_only");
      }
    }
    validate(cfg);

    const auto ds = tasks::gen_dataset(cfg.dataset.seed, cfg.dataset.count,
                                       tasks::DepthRange{cfg.dataset.depth_min,
                                                         cfg.dataset.depth_max},
                                       cfg.dataset.modulus);
    const auto vocab = Vocabulary::for_modulus(cfg.dataset.modulus);
    auto initial = build_initial_params(cfg, ds, vocab);

    const bool paired = cfg.cost.paired_rl_baseline &&
                        cfg.curriculum.mode == curriculum::Mode::disctt;
    std::optional<policy::PolicyParams> initial_copy;
    if (paired) initial_copy = initial;

    auto main_run = execute_run(cfg, ds, vocab, std::move(initial));

    if (paired) {
      RunConfig base = cfg;
      base.curriculum.mode = curriculum::Mode::rl_only;
      base.output_dir = (fs::path(cfg.output_dir) / "rl_baseline").string();
      base.cost.paired_rl_baseline = false;
      auto base_run = execute_run(base, ds, vocab, std::move(*initial_copy));

      const auto& s = main_run.result.state;
      const auto& b = base_run.result.state;
      const double spent = static_cast<double>(s.sft_tokens) * cfg.cost.c_sft +
                           static_cast<double>(s.rl_tokens) * cfg.cost.c_rl;
      const double base_spent = static_cast<double>(b.sft_tokens) * cfg.cost.c_sft +
                                static_cast<double>(b.rl_tokens) * cfg.cost.c_rl;
      ordered_json cmp{
          {"estimated_cost_ratio", main_run.cost.cost_ratio},
          {"measured_cost_ratio", base_spent > 0.0 ? spent / base_spent : 1.0},
          {"disctt",
           {{"sft_tokens", s.sft_tokens}, {"rl_tokens", s.rl_tokens}}},
          {"rl_baseline",
           {{"sft_tokens", b.sft_tokens}, {"rl_tokens", b.rl_tokens}}}};
      write_text_file(fs::path(cfg.output_dir) / "cost_comparison.json", cmp.dump(2) + "\n");
    }

    const auto& result = main_run.result;
    out << "run complete: mode=" << curriculum::mode_name(cfg.curriculum.mode)
        << " problems=" << ds.size() << " records=" << result.metrics.size() << "\n";
    if (const auto* ev = last_eval(result.metrics)) {
      out << "final eval: accuracy_majority=" << num(ev->accuracy_majority.value_or(0.0))
          << " accuracy_any=" << num(ev->accuracy_any.value_or(0.0))
          << " mean_c=" << num(ev->mean_c.value_or(0.0)) << "\n";
    }
    out << "cost: sft_tokens=" << main_run.result.state.sft_tokens
        << " rl_tokens=" << main_run.result.state.rl_tokens
        << " cost_ratio=" << num(main_run.cost.cost_ratio) << "\n";
    out << "outputs in " << cfg.output_dir << "\n";
    return 0;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_route(const RouteArgs& args, std::ostream& out, std::ostream& err) {
  try {
    if (args.m < 1) throw ConfigError("m: must be at least 1");
    if (!(args.rho > 0.0 && args.rho < 1.0)) throw ConfigError("rho: must lie in (0, 1)");
    const auto params = load_checkpoint_file(args.checkpoint_path);
    auto [ds, vocab] = load_dataset_file(args.dataset_path);

    LineSink sink(args.out_path, out);
    std::int64_t easy = 0;
    double c_sum = 0.0;
    for (const auto& inst : ds) {
      auto group = policy::sample_completions(
          params, vocab, inst.prompt, inst.id, args.m, args.temperature, args.max_len,
          derive_seed(args.seed, "route", 0, static_cast<std::uint64_t>(inst.id)));
      auto report = consensus::make_report(inst.id, consensus::answers_of(group));
      const bool is_easy = report.c >= args.rho;
      easy += is_easy ? 1 : 0;
      c_sum += report.c;
      ordered_json line{{"prompt_id", inst.id},
                        {"c", report.c},
                        {"majority_count", report.majority_count},
                        {"a_maj", report.a_maj.parseable
                                      ? ordered_json(vocab.join(report.a_maj.tokens))
                                      : ordered_json(nullptr)},
                        {"route", is_easy ? "easy" : "hard"}};
      sink.stream() << line.dump() << "\n";
    }
    const auto n = static_cast<std::int64_t>(ds.size());
    err << "routed " << n << " problems at rho=" << num(args.rho) << ": easy " << easy
        << " hard " << (n - easy) << " mean_c=" << num(n > 0 ? c_sum / double(n) : 0.0)
        << "\n";
    return 0;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_reward(const RewardArgs& args, std::ostream& out, std::ostream& err) {
  try {
    if (args.n < 2) throw ConfigError("n: must be at least 2");
    reward::RewardConfig rc;
    rc.alpha = args.alpha;
    rc.beta = args.beta;
    rc.epsilon = args.epsilon;
    rc.leave_one_out = args.leave_one_out;
    if (args.terms == "gate") {
      rc.beta = 0.0;
      rc.epsilon = 1.0;
    } else if (args.terms == "novelty") {
      rc.epsilon = 1.0;
    } else if (args.terms != "full") {
      throw ConfigError("terms: must be one of gate, novelty, full");
    }
    if (!(rc.epsilon > 0.0 && rc.epsilon <= 1.0)) {
      throw ConfigError("epsilon: must lie in (0, 1]");
    }

    const auto params = load_checkpoint_file(args.checkpoint_path);
    auto [ds, vocab] = load_dataset_file(args.dataset_path);

    LineSink sink(args.out_path, out);
    double total_sum = 0.0;
    std::int64_t gated_in = 0;
    std::int64_t rows = 0;
    for (const auto& inst : ds) {
      auto group = policy::sample_completions(
          params, vocab, inst.prompt, inst.id, args.n, args.temperature, args.max_len,
          derive_seed(args.seed, "reward", 0, static_cast<std::uint64_t>(inst.id)));
      auto report = consensus::make_report(inst.id, consensus::answers_of(group));
      auto breakdowns = reward::composite_reward(group, report, rc, inst.prompt, vocab);
      for (const auto& b : breakdowns) {
        ordered_json line{{"prompt_id", inst.id}, {"index", b.completion_index},
                          {"gate", b.gate ? 1 : 0}, {"jsd_nov", b.jsd_nov},
                          {"g_rel", b.g_rel},       {"total", b.total}};
        sink.stream() << line.dump() << "\n";
        total_sum += b.total;
        gated_in += b.gate ? 1 : 0;
        ++rows;
      }
    }
    err << "scored " << rows << " completions (terms=" << args.terms
        << "): mean_total=" << num(rows > 0 ? total_sum / double(rows) : 0.0)
        << " gate_rate=" << num(rows > 0 ? double(gated_in) / double(rows) : 0.0) << "\n";
    return 0;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_plotdata(const PlotdataArgs& args, std::ostream& out, std::ostream& err) {
  try {
    if (args.kind != "accuracy_curve" && args.kind != "difficulty_curves" &&
        args.kind != "cost") {
      throw ConfigError("kind: must be one of accuracy_curve, difficulty_curves, cost");
    }
    std::ifstream in(args.metrics_path, std::ios::binary);
    if (!in) throw ParseError("cannot open metrics: " + args.metrics_path);

    std::vector<curriculum::MetricsRecord> evals;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto rec = curriculum::metrics_from_json_line(line);
      if (rec.phase == "eval") evals.push_back(std::move(rec));
    }

    LineSink sink(args.out_path, out);
    std::ostream& os = sink.stream();
    os << "step,series,value\n";
    std::int64_t rows = 0;
    auto row = [&os, &rows](std::int64_t step, const std::string& series,
                            const std::string& value) {
      os << step << "," << csv_field(series) << "," << csv_field(value) << "\n";
      ++rows;
    };
    for (const auto& rec : evals) {
      if (args.kind == "accuracy_curve") {
        if (rec.accuracy_majority) row(rec.step, "accuracy_majority", num(*rec.accuracy_majority));
        if (rec.accuracy_any) row(rec.step, "accuracy_any", num(*rec.accuracy_any));
        if (rec.mean_c) row(rec.step, "mean_c", num(*rec.mean_c));
      } else if (args.kind == "difficulty_curves") {
        if (!rec.accuracy_by_depth) continue;
        for (const auto& [depth, acc] : *rec.accuracy_by_depth) {
          row(rec.step, "depth_" + std::to_string(depth), num(acc));
        }
      } else {
        if (rec.sft_tokens) row(rec.step, "sft_tokens", std::to_string(*rec.sft_tokens));
        if (rec.rl_tokens) row(rec.step, "rl_tokens", std::to_string(*rec.rl_tokens));
        if (rec.sampling_tokens) {
          row(rec.step, "sampling_tokens", std::to_string(*rec.sampling_tokens));
        }
        if (rec.cost_ratio) row(rec.step, "cost_ratio", num(*rec.cost_ratio));
      }
    }
    err << "plotdata " << args.kind << ": " << evals.size() << " eval records, " << rows
        << " rows\n";
    return 0;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream& err) {
  try {
    if (args.m < 1) throw ConfigError("m: must be at least 1");
    const auto params = load_checkpoint_file(args.checkpoint_path);
    auto [ds, vocab] = load_dataset_file(args.dataset_path);
    auto ev = curriculum::eval_accuracy(params, ds, vocab, args.m, args.temperature,
                                        args.max_len, args.seed);
    const std::string line = eval_to_json(ev).dump() + "\n";
    out << line;
    if (!args.out_path.empty() && args.out_path != "-") {
      write_text_file(args.out_path, line);
    }
    return 0;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace disctt::cli
