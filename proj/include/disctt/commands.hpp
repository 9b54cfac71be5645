#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

namespace disctt::cli {

// Command bodies behind the executable, callable in-process. Each returns a
// process exit code: 0 success, 1 runtime failure, 2 config/argument failure.

struct RunArgs {
  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
};

int cmd_run(const RunArgs& args, std::ostream& out, std::ostream& err);

struct RouteArgs {
  std::string checkpoint_path;
  std::string dataset_path;
  std::string out_path;  // empty or "-" writes to stdout
  int m = 8;
  double rho = 0.45;
  double temperature = 0.9;
  int max_len = 64;
  std::uint64_t seed = 0;
};

int cmd_route(const RouteArgs& args, std::ostream& out, std::ostream& err);

struct RewardArgs {
  std::string checkpoint_path;
  std::string dataset_path;
  std::string out_path;  // empty or "-" writes to stdout
  int n = 32;
  std::string terms = "full";  // gate | novelty | full
  double alpha = 1.0;
  double beta = 1.0;
  double epsilon = 0.2;
  bool leave_one_out = false;
  double temperature = 0.9;
  int max_len = 64;
  std::uint64_t seed = 0;
};

int cmd_reward(const RewardArgs& args, std::ostream& out, std::ostream& err);

struct PlotdataArgs {
  std::string metrics_path;
  std::string kind;      // accuracy_curve | difficulty_curves | cost
  std::string out_path;  // empty or "-" writes to stdout
};

int cmd_plotdata(const PlotdataArgs& args, std::ostream& out, std::ostream& err);

struct EvalArgs {
  std::string checkpoint_path;
  std::string dataset_path;
  std::string out_path;  // optional copy of the result line
  int m = 8;
  double temperature = 0.9;
  int max_len = 64;
  std::uint64_t seed = 0;
};

int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream& err);

}  // namespace disctt::cli
