#pragma once

#include <cstdint>
#include <string>

#include "disctt/curriculum.hpp"

namespace disctt::cli {

struct DatasetConfig {
  std::uint64_t seed = 1;
  int count = 40;
  int depth_min = 1;
  int depth_max = 3;
  int modulus = 7;
};

struct PolicyConfig {
  int feature_order = 2;
  int n_buckets = 4096;
};

struct InitConfig {
  std::string mode = "zeros";  // zeros | pretrain
  int pretrain_epochs = 1;
  double pretrain_lr = 0.2;
  int pretrain_batch_size = 8;
};

struct CostConfig {
  double c_sft = 1.0;
  double c_rl = 1.0;
  bool paired_rl_baseline = false;
};

// Full description of one adaptation run. File form is nested JSON with the
// same field names; omitted fields keep these defaults.
struct RunConfig {
  DatasetConfig dataset;
  PolicyConfig policy;
  InitConfig init;
  curriculum::CurriculumConfig curriculum;  // carries reward, seed and mode
  CostConfig cost;
  std::string output_dir = "out";
};

RunConfig default_run_config();

// Parses and validates config text. Unknown fields and out-of-range values
// raise ConfigError naming the offending field path.
RunConfig parse_run_config(const std::string& text);

std::string dump_run_config(const RunConfig& cfg);

void validate(const RunConfig& cfg);

}  // namespace disctt::cli
