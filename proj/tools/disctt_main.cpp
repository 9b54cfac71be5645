#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "disctt/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"consensus-routed test-time adaptation for modular arithmetic chains"};
  app.require_subcommand(1);

  disctt::cli::RunArgs run_args;
  std::optional<std::string> run_out;
  std::optional<std::uint64_t> run_seed;
  std::optional<std::string> run_mode;
  auto* run = app.add_subcommand("run", "execute a full adaptation run from a config file");
  run->add_option("--config", run_args.config_path, "run config JSON")->required();
  run->add_option("--out", run_out, "output directory (overrides config)");
  run->add_option("--seed", run_seed, "root seed (overrides config)");
  run->add_option("--mode", run_mode, "disctt, sft_only or rl_only (overrides config)");

  disctt::cli::RouteArgs route_args;
  auto* route = app.add_subcommand("route", "consensus-route a dataset against a checkpoint");
  route->add_option("--checkpoint", route_args.checkpoint_path, "policy checkpoint")->required();
  route->add_option("--dataset", route_args.dataset_path, "dataset JSONL")->required();
  route->add_option("--out", route_args.out_path, "output JSONL ('-' for stdout)");
  route->add_option("--m", route_args.m, "completions per problem");
  route->add_option("--rho", route_args.rho, "agreement threshold");
  route->add_option("--temperature", route_args.temperature, "sampling temperature");
  route->add_option("--max-len", route_args.max_len, "completion length cap");
  route->add_option("--seed", route_args.seed, "sampling seed");

  disctt::cli::RewardArgs reward_args;
  auto* rew = app.add_subcommand("reward", "dump per-completion reward breakdowns");
  rew->add_option("--checkpoint", reward_args.checkpoint_path, "policy checkpoint")->required();
  rew->add_option("--dataset", reward_args.dataset_path, "dataset JSONL")->required();
  rew->add_option("--out", reward_args.out_path, "output JSONL ('-' for stdout)");
  rew->add_option("--n", reward_args.n, "completions per problem");
  rew->add_option("--terms", reward_args.terms, "gate, novelty or full");
  rew->add_option("--alpha", reward_args.alpha, "base reward weight");
  rew->add_option("--beta", reward_args.beta, "novelty weight");
  rew->add_option("--epsilon", reward_args.epsilon, "relevance floor");
  rew->add_flag("--leave-one-out", reward_args.leave_one_out,
                "exclude each completion from its own reference set");
  rew->add_option("--temperature", reward_args.temperature, "sampling temperature");
  rew->add_option("--max-len", reward_args.max_len, "completion length cap");
  rew->add_option("--seed", reward_args.seed, "sampling seed");

  disctt::cli::PlotdataArgs plot_args;
  auto* plot = app.add_subcommand("plotdata", "flatten metrics into tidy CSV");
  plot->add_option("--metrics", plot_args.metrics_path, "metrics JSONL from a run")->required();
  plot->add_option("--kind", plot_args.kind, "accuracy_curve, difficulty_curves or cost")
      ->required();
  plot->add_option("--out", plot_args.out_path, "output CSV ('-' for stdout)");

  disctt::cli::EvalArgs eval_args;
  auto* ev = app.add_subcommand("eval", "majority-vote accuracy of a checkpoint on a dataset");
  ev->add_option("--checkpoint", eval_args.checkpoint_path, "policy checkpoint")->required();
  ev->add_option("--dataset", eval_args.dataset_path, "dataset JSONL")->required();
  ev->add_option("--out", eval_args.out_path, "also write the result line here");
  ev->add_option("--m", eval_args.m, "completions per problem");
  ev->add_option("--temperature", eval_args.temperature, "sampling temperature");
  ev->add_option("--max-len", eval_args.max_len, "completion length cap");
  ev->add_option("--seed", eval_args.seed, "sampling seed");

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) {
    run_args.out_dir = run_out;
    run_args.seed = run_seed;
    run_args.mode = run_mode;
    return disctt::cli::cmd_run(run_args, std::cout, std::cerr);
  }
  if (route->parsed()) return disctt::cli::cmd_route(route_args, std::cout, std::cerr);
  if (rew->parsed()) return disctt::cli::cmd_reward(reward_args, std::cout, std::cerr);
  if (plot->parsed()) return disctt::cli::cmd_plotdata(plot_args, std::cout, std::cerr);
  if (ev->parsed()) return disctt::cli::cmd_eval(eval_args, std::cout, std::cerr);
  return 1;
}
