#include <string>
#include <vector>

#include "doctest.h"
#include "disctt/curriculum.hpp"
#include "disctt/error.hpp"
#include "disctt/optim.hpp"
#include "disctt/policy.hpp"
#include "disctt/rng.hpp"
#include "disctt/tasks.hpp"
#include "disctt/tokens.hpp"

using namespace disctt;
using namespace disctt::curriculum;

namespace {

CurriculumConfig small_config() {
  CurriculumConfig cfg;
  cfg.m_consensus = 4;
  cfg.n_rl_completions = 4;
  cfg.total_cycles = 2;
  cfg.sft_epochs_per_cycle = 1;
  cfg.rl_epochs_per_cycle = 2;
  cfg.sft_lr = 0.2;
  cfg.rl_lr = 0.05;
  cfg.max_len = 20;
  cfg.eval_m = 4;
  cfg.seed = 11;
  return cfg;
}

policy::PolicyParams seeded_params(const Vocabulary& vocab, std::uint64_t seed,
                                   int n_buckets = 512, double scale = 0.3) {
  auto params = policy::init_params(2, vocab.size(), n_buckets);
  Rng rng(seed);
  for (auto& w : params.theta) w = scale * (2.0 * rng.next_double() - 1.0);
  return params;
}

tasks::Answer sym(const Vocabulary& vocab, const std::string& s) {
  return tasks::Answer::of({vocab.id(s)});
}

}  // namespace

TEST_CASE("reroute boundary check") {
  CHECK(reroute_due(0, 12));
  CHECK(reroute_due(12, 12));
  CHECK(reroute_due(24, 12));
  for (std::int64_t s = 1; s < 12; ++s) CHECK_FALSE(reroute_due(s, 12));
  CHECK(reroute_due(3, 3));
  CHECK_THROWS_AS(reroute_due(0, 0), std::invalid_argument);
  CHECK_THROWS_AS(reroute_due(5, -1), std::invalid_argument);
}

TEST_CASE("config validation names the offending field") {
  auto cfg = small_config();
  cfg.rho = 1.5;
  CHECK_THROWS_WITH_AS(validate(cfg), doctest::Contains("curriculum.rho"), ConfigError);
  cfg = small_config();
  cfg.n_rl_completions = 1;
  CHECK_THROWS_WITH_AS(validate(cfg), doctest::Contains("n_rl_completions"), ConfigError);
  cfg = small_config();
  cfg.rl_temperature = 0.0;
  CHECK_THROWS_WITH_AS(validate(cfg), doctest::Contains("rl_temperature"), ConfigError);
  cfg = small_config();
  cfg.reward.epsilon = 0.0;
  CHECK_THROWS_WITH_AS(validate(cfg), doctest::Contains("reward.epsilon"), ConfigError);
}

TEST_CASE("mode names round-trip") {
  for (Mode m : {Mode::disctt, Mode::sft_only, Mode::rl_only}) {
    CHECK(mode_from_name(mode_name(m)) == m);
  }
  CHECK_THROWS_AS(mode_from_name("hybrid"), std::invalid_argument);
}

TEST_CASE("metrics records round-trip through jsonl") {
  MetricsRecord rec;
  rec.step = 17;
  rec.phase = "eval";
  rec.accuracy_majority = 0.625;
  rec.accuracy_any = 0.75;
  rec.mean_c = 0.40625;
  rec.accuracy_by_depth = std::map<int, double>{{1, 1.0}, {3, 0.25}};
  rec.sft_tokens = 1200;
  rec.rl_tokens = 34000;
  rec.sampling_tokens = 50000;
  rec.cost_ratio = 0.3125;

  auto line = metrics_to_json_line(rec);
  auto back = metrics_from_json_line(line);
  CHECK(back.step == rec.step);
  CHECK(back.phase == rec.phase);
  CHECK(back.accuracy_majority == rec.accuracy_majority);
  CHECK(back.accuracy_by_depth == rec.accuracy_by_depth);
  CHECK(back.cost_ratio == rec.cost_ratio);
  CHECK_FALSE(back.loss_before.has_value());
  CHECK_FALSE(back.mean_reward.has_value());
  CHECK(metrics_to_json_line(back) == line);

  MetricsRecord sparse;
  sparse.step = 2;
  sparse.phase = "sft";
  sparse.loss_before = 3.5;
  auto sparse_back = metrics_from_json_line(metrics_to_json_line(sparse));
  CHECK(sparse_back.loss_before == 3.5);
  CHECK_FALSE(sparse_back.accuracy_majority.has_value());

  CHECK_THROWS_AS(metrics_from_json_line("not json"), ParseError);
}

TEST_CASE("cost accounting against hand arithmetic") {
  CycleState state;
  state.sft_tokens = 100;
  state.rl_tokens = 1000;
  CycleCost cycle;
  cycle.cycle_index = 0;
  cycle.easy_count = 5;
  cycle.hard_count = 5;
  cycle.rl_update_tokens = 1000;
  cycle.rl_prompt_visits = 50;
  cycle.rl_epochs = 10;
  state.cycles.push_back(cycle);

  // per visit: 1000 / 50 = 20; all-hard counterfactual: 20 * 10 * 10 = 2000
  auto summary = cost_accounting(state);
  CHECK(summary.sft_tokens == 100);
  CHECK(summary.rl_tokens == 1000);
  CHECK(summary.cost_ratio == doctest::Approx((100.0 + 1000.0) / 2000.0).epsilon(1e-9));

  // token prices weight the two sides
  auto cheap_sft = cost_accounting(state, 0.5, 1.0);
  CHECK(cheap_sft.cost_ratio == doctest::Approx((50.0 + 1000.0) / 2000.0).epsilon(1e-9));

  SUBCASE("every problem hard means ratio one") {
    CycleState all_hard;
    all_hard.sft_tokens = 0;
    all_hard.rl_tokens = 1000;
    CycleCost c2;
    c2.easy_count = 0;
    c2.hard_count = 5;
    c2.rl_update_tokens = 1000;
    c2.rl_prompt_visits = 50;  // 5 prompts x 10 epochs
    c2.rl_epochs = 10;
    all_hard.cycles.push_back(c2);
    CHECK(cost_accounting(all_hard).cost_ratio == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("no rl visits falls back to the routing estimate") {
    CycleState no_visits;
    no_visits.sft_tokens = 60;
    CycleCost c3;
    c3.easy_count = 10;
    c3.hard_count = 0;
    c3.rl_update_tokens = 0;
    c3.rl_prompt_visits = 0;
    c3.est_visit_tokens = 24.0;
    c3.rl_epochs = 10;
    no_visits.cycles.push_back(c3);
    // counterfactual: 24 * 10 * 10 = 2400
    CHECK(cost_accounting(no_visits).cost_ratio ==
          doctest::Approx(60.0 / 2400.0).epsilon(1e-9));
  }
  SUBCASE("nothing spent and nothing to compare yields one") {
    CHECK(cost_accounting(CycleState{}).cost_ratio == doctest::Approx(1.0));
  }
}

TEST_CASE("accuracy from answers matches a hand count") {
  auto vocab = Vocabulary::for_modulus(7);
  auto truth = [&](const std::string& s) { return sym(vocab, s); };
  std::vector<std::vector<tasks::Answer>> groups = {
      {truth("3"), truth("3"), truth("1"), tasks::Answer::none()},
      {truth("1"), truth("1"), truth("2"), truth("2")},
      {truth("5"), tasks::Answer::none(), tasks::Answer::none(), tasks::Answer::none()},
  };
  std::vector<tasks::Answer> truths = {truth("3"), truth("2"), truth("0")};
  std::vector<int> depths = {1, 2, 2};

  auto ev = accuracy_from_answers(groups, truths, &depths);
  // majority answers: "3" (right), tie broken to "1" (wrong), unparseable (wrong)
  CHECK(ev.accuracy_majority == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  // per-sample: 2 + 2 + 0 correct completions out of 12
  CHECK(ev.accuracy_any == doctest::Approx(4.0 / 12.0).epsilon(1e-12));
  CHECK(ev.mean_c == doctest::Approx((0.5 + 0.5 + 0.75) / 3.0).epsilon(1e-12));
  REQUIRE(ev.accuracy_by_depth.size() == 2);
  CHECK(ev.accuracy_by_depth.at(1) == doctest::Approx(1.0));
  CHECK(ev.accuracy_by_depth.at(2) == doctest::Approx(0.0));

  CHECK_THROWS_AS(accuracy_from_answers(groups, {truth("3")}, nullptr),
                  std::invalid_argument);
}

TEST_CASE("evaluation is deterministic and fresh per seed") {
  auto vocab = Vocabulary::for_modulus(5);
  auto ds = tasks::gen_dataset(2, 10, tasks::DepthRange{1, 2}, 5);
  auto params = seeded_params(vocab, 5);

  auto a = eval_accuracy(params, ds, vocab, 4, 0.9, 20, 7);
  auto b = eval_accuracy(params, ds, vocab, 4, 0.9, 20, 7);
  CHECK(a.accuracy_majority == b.accuracy_majority);
  CHECK(a.mean_c == b.mean_c);
  CHECK(a.accuracy_by_depth == b.accuracy_by_depth);
}

TEST_CASE("runs emit the promised schedule of records") {
  auto vocab = Vocabulary::for_modulus(5);
  auto ds = tasks::gen_dataset(4, 8, tasks::DepthRange{1, 2}, 5);
  auto cfg = small_config();  // cycle length 3, two cycles

  std::vector<std::pair<std::int64_t, std::string>> phase_steps;
  std::vector<int> route_cycles;
  RunObserver obs;
  obs.on_phase_step = [&phase_steps](std::int64_t step, const std::string& phase,
                                     const consensus::Partition&) {
    phase_steps.emplace_back(step, phase);
  };
  obs.on_route = [&route_cycles](int cycle, const consensus::Partition&) {
    route_cycles.push_back(cycle);
  };

  auto result = run_disctt(cfg, ds, vocab, seeded_params(vocab, 6), &obs);

  CHECK(route_cycles == std::vector<int>{0, 1});
  CHECK(phase_steps ==
        std::vector<std::pair<std::int64_t, std::string>>{
            {1, "sft"}, {2, "rl"}, {3, "rl"}, {4, "sft"}, {5, "rl"}, {6, "rl"}});

  // route records carry the boundary steps; evals bracket each cycle
  std::vector<std::int64_t> route_steps, eval_steps;
  for (const auto& rec : result.metrics) {
    if (rec.phase == "route") route_steps.push_back(rec.step);
    if (rec.phase == "eval") eval_steps.push_back(rec.step);
  }
  CHECK(route_steps == std::vector<std::int64_t>{0, 3});
  CHECK(eval_steps == std::vector<std::int64_t>{0, 3, 6});

  // partitions cover the dataset
  CHECK(result.state.partition.easy.size() + result.state.partition.hard.size() ==
        ds.size());
  CHECK(result.state.cycles.size() == 2);
}

TEST_CASE("a long reroute interval freezes the partition across cycles") {
  auto vocab = Vocabulary::for_modulus(5);
  auto ds = tasks::gen_dataset(4, 8, tasks::DepthRange{1, 2}, 5);
  auto cfg = small_config();
  cfg.reroute_interval_k = 100;  // longer than the whole run

  std::vector<int> route_cycles;
  RunObserver obs;
  obs.on_route = [&route_cycles](int cycle, const consensus::Partition&) {
    route_cycles.push_back(cycle);
  };
  auto result = run_disctt(cfg, ds, vocab, seeded_params(vocab, 6), &obs);
  CHECK(route_cycles == std::vector<int>{0});
  CHECK(result.state.partition.created_at_step == 0);
}

TEST_CASE("vanishing threshold reduces to pure sft") {
  auto vocab = Vocabulary::for_modulus(5);
  auto ds = tasks::gen_dataset(9, 10, tasks::DepthRange{1, 2}, 5);
  auto initial = seeded_params(vocab, 12);

  auto cfg = small_config();
  cfg.rho = 1e-9;  // c >= rho always holds
  auto low = run_disctt(cfg, ds, vocab, initial);

  auto sft_cfg = small_config();
  sft_cfg.mode = Mode::sft_only;
  auto pure = run_disctt(sft_cfg, ds, vocab, initial);

  REQUIRE(low.params.theta.size() == pure.params.theta.size());
  for (std::size_t i = 0; i < low.params.theta.size(); ++i) {
    CHECK(low.params.theta[i] == pure.params.theta[i]);
  }
  CHECK(low.state.rl_tokens == 0);
  CHECK(pure.state.partition.hard.empty());
}

TEST_CASE("saturating threshold reduces to pure rl when no group is unanimous") {
  auto vocab = Vocabulary::for_modulus(5);
  auto ds = tasks::gen_dataset(13, 10, tasks::DepthRange{1, 2}, 5);
  // warm start so samples are well formed yet still disagree; a cold policy
  // is unanimous in the degenerate sense (every sample unparseable)
  auto initial = pretrain_supervised(policy::init_params(2, vocab.size(), 512), ds,
                                     vocab, 3, 0.3, 0.9, 4);

  auto cfg = small_config();
  cfg.rho = 0.999999;
  auto high = run_disctt(cfg, ds, vocab, initial);

  // the reduction only holds if no routing group was unanimous; the fixture
  // seed was picked to satisfy that, so verify it stayed true
  for (const auto& rep : high.state.reports) {
    REQUIRE(rep.c < 1.0);
  }

  auto rl_cfg = small_config();
  rl_cfg.mode = Mode::rl_only;
  auto pure = run_disctt(rl_cfg, ds, vocab, initial);

  REQUIRE(high.params.theta.size() == pure.params.theta.size());
  for (std::size_t i = 0; i < high.params.theta.size(); ++i) {
    CHECK(high.params.theta[i] == pure.params.theta[i]);
  }
  CHECK(high.state.sft_tokens == 0);
  CHECK(pure.state.partition.easy.empty());
}

TEST_CASE("identical configs give bitwise identical runs") {
  auto vocab = Vocabulary::for_modulus(5);
  auto ds = tasks::gen_dataset(21, 8, tasks::DepthRange{1, 2}, 5);
  auto cfg = small_config();

  auto a = run_disctt(cfg, ds, vocab, seeded_params(vocab, 3));
  auto b = run_disctt(cfg, ds, vocab, seeded_params(vocab, 3));
  REQUIRE(a.metrics.size() == b.metrics.size());
  for (std::size_t i = 0; i < a.metrics.size(); ++i) {
    CHECK(metrics_to_json_line(a.metrics[i]) == metrics_to_json_line(b.metrics[i]));
  }
  for (std::size_t i = 0; i < a.params.theta.size(); ++i) {
    CHECK(a.params.theta[i] == b.params.theta[i]);
  }
}

TEST_CASE("run rejects duplicate problem ids") {
  auto vocab = Vocabulary::for_modulus(5);
  auto ds = tasks::gen_dataset(2, 4, tasks::DepthRange{1, 1}, 5);
  ds.push_back(ds.front());
  CHECK_THROWS_AS(run_disctt(small_config(), ds, vocab, seeded_params(vocab, 1)),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      run_disctt(small_config(), {}, vocab, seeded_params(vocab, 1)),
      std::invalid_argument);
}

TEST_CASE("supervised warm start reduces loss on reference solutions") {
  auto vocab = Vocabulary::for_modulus(5);
  auto ds = tasks::gen_dataset(31, 12, tasks::DepthRange{1, 2}, 5);
  auto params = policy::init_params(2, vocab.size(), 1024);

  optim::SftBatch all;
  for (const auto& inst : ds) {
    all.items.push_back({inst.prompt, tasks::canonical_completion(inst, vocab)});
  }
  const double before = optim::sft_loss(params, all, 0.9);

  auto trained = pretrain_supervised(std::move(params), ds, vocab, 10, 0.3, 0.9, 4);
  const double after = optim::sft_loss(trained, all, 0.9);
  CHECK(after < before * 0.7);
}
