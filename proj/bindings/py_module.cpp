#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "disctt/commands.hpp"
#include "disctt/consensus.hpp"
#include "disctt/curriculum.hpp"
#include "disctt/policy.hpp"
#include "disctt/reward.hpp"
#include "disctt/run_config.hpp"
#include "disctt/tasks.hpp"
#include "disctt/tokens.hpp"

namespace py = pybind11;
using namespace disctt;

namespace {

// Policy plus the vocabulary it was built for; python talks in token symbols.
struct PyPolicy {
  policy::PolicyParams params;
  Vocabulary vocab;
  int modulus;
};

TokenSeq to_ids(const Vocabulary& vocab, const std::vector<std::string>& symbols) {
  return vocab.to_ids(symbols);
}

py::dict completion_dict(const Vocabulary& vocab, const policy::SampledCompletion& sc) {
  py::dict d;
  d["raw"] = vocab.to_symbols(sc.completion.raw);
  d["trace"] = vocab.to_symbols(sc.completion.trace);
  d["answer"] = sc.completion.answer.parseable
                    ? py::object(py::cast(vocab.to_symbols(sc.completion.answer.tokens)))
                    : py::object(py::none());
  d["trace_logprob"] = sc.trace_logprob;
  d["full_logprob"] = sc.full_logprob;
  return d;
}

}  // namespace

PYBIND11_MODULE(_disctt, m) {
  m.doc() = "consensus-routed test-time adaptation on modular arithmetic chains";

  m.def(
      "generate_dataset",
      [](std::uint64_t seed, int count, int depth_min, int depth_max, int modulus) {
        auto ds = tasks::gen_dataset(seed, count, tasks::DepthRange{depth_min, depth_max},
                                     modulus);
        auto vocab = Vocabulary::for_modulus(modulus);
        py::list out;
        for (const auto& inst : ds) {
          py::dict d;
          d["id"] = inst.id;
          d["prompt"] = vocab.to_symbols(inst.prompt);
          d["ground_truth"] = vocab.to_symbols(inst.ground_truth);
          d["depth"] = inst.depth;
          d["modulus"] = inst.modulus;
          out.append(std::move(d));
        }
        return out;
      },
      py::arg("seed"), py::arg("count"), py::arg("depth_min"), py::arg("depth_max"),
      py::arg("modulus"));

  m.def(
      "solve",
      [](const std::vector<std::string>& prompt, int modulus) {
        auto vocab = Vocabulary::for_modulus(modulus);
        return vocab.to_symbols(tasks::oracle_solve(to_ids(vocab, prompt), vocab));
      },
      py::arg("prompt"), py::arg("modulus"));

  py::class_<PyPolicy>(m, "Policy")
      .def_static(
          "create",
          [](int feature_order, int modulus, int n_buckets) {
            auto vocab = Vocabulary::for_modulus(modulus);
            return PyPolicy{policy::init_params(feature_order, vocab.size(), n_buckets),
                            vocab, modulus};
          },
          py::arg("feature_order"), py::arg("modulus"), py::arg("n_buckets"))
      .def_static(
          "load",
          [](const std::string& path, int modulus) {
            std::ifstream in(path, std::ios::binary);
            if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
            auto params = policy::load_checkpoint(in);
            return PyPolicy{std::move(params), Vocabulary::for_modulus(modulus), modulus};
          },
          py::arg("path"), py::arg("modulus"))
      .def("save",
           [](const PyPolicy& self, const std::string& path) {
             std::ofstream out(path, std::ios::binary);
             if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
             policy::save_checkpoint(out, self.params);
           })
      .def_property_readonly("feature_order",
                             [](const PyPolicy& self) { return self.params.feature_order; })
      .def_property_readonly("vocab_size",
                             [](const PyPolicy& self) { return self.params.vocab_size; })
      .def_property_readonly("n_buckets",
                             [](const PyPolicy& self) { return self.params.n_buckets; })
      .def_property_readonly("modulus", [](const PyPolicy& self) { return self.modulus; })
      .def(
          "sample",
          [](const PyPolicy& self, const std::vector<std::string>& prompt, int m,
             double temperature, int max_len, std::uint64_t seed) {
            auto group = policy::sample_completions(self.params, self.vocab,
                                                    to_ids(self.vocab, prompt), 0, m,
                                                    temperature, max_len, seed);
            py::list out;
            for (const auto& sc : group.samples) out.append(completion_dict(self.vocab, sc));
            return out;
          },
          py::arg("prompt"), py::arg("m"), py::arg("temperature") = 0.9,
          py::arg("max_len") = 64, py::arg("seed") = 0)
      .def(
          "consensus",
          [](const PyPolicy& self, const std::vector<std::string>& prompt, int m,
             double temperature, int max_len, std::uint64_t seed) {
            auto group = policy::sample_completions(self.params, self.vocab,
                                                    to_ids(self.vocab, prompt), 0, m,
                                                    temperature, max_len, seed);
            auto report = consensus::make_report(0, consensus::answers_of(group));
            py::dict d;
            d["c"] = report.c;
            d["majority_count"] = report.majority_count;
            d["m"] = report.m;
            d["a_maj"] = report.a_maj.parseable
                             ? py::object(py::cast(self.vocab.to_symbols(report.a_maj.tokens)))
                             : py::object(py::none());
            return d;
          },
          py::arg("prompt"), py::arg("m"), py::arg("temperature") = 0.9,
          py::arg("max_len") = 64, py::arg("seed") = 0)
      .def(
          "score",
          [](const PyPolicy& self, const std::vector<std::string>& prompt, int n,
             double temperature, int max_len, std::uint64_t seed, double alpha, double beta,
             double epsilon) {
            auto group = policy::sample_completions(self.params, self.vocab,
                                                    to_ids(self.vocab, prompt), 0, n,
                                                    temperature, max_len, seed);
            auto report = consensus::make_report(0, consensus::answers_of(group));
            reward::RewardConfig rc;
            rc.alpha = alpha;
            rc.beta = beta;
            rc.epsilon = epsilon;
            auto breakdowns = reward::composite_reward(group, report, rc,
                                                       to_ids(self.vocab, prompt), self.vocab);
            py::list out;
            for (const auto& b : breakdowns) {
              py::dict d;
              d["index"] = b.completion_index;
              d["gate"] = b.gate;
              d["jsd_nov"] = b.jsd_nov;
              d["g_rel"] = b.g_rel;
              d["total"] = b.total;
              out.append(std::move(d));
            }
            return out;
          },
          py::arg("prompt"), py::arg("n"), py::arg("temperature") = 0.9,
          py::arg("max_len") = 64, py::arg("seed") = 0, py::arg("alpha") = 1.0,
          py::arg("beta") = 1.0, py::arg("epsilon") = 0.2);

  m.def(
      "run_from_config",
      [](const std::string& config_text, py::object output_dir) {
        auto cfg = cli::parse_run_config(config_text);
        if (!output_dir.is_none()) cfg.output_dir = py::cast<std::string>(output_dir);
        cli::validate(cfg);
        auto ds = tasks::gen_dataset(cfg.dataset.seed, cfg.dataset.count,
                                     tasks::DepthRange{cfg.dataset.depth_min,
                                                       cfg.dataset.depth_max},
                                     cfg.dataset.modulus);
        auto vocab = Vocabulary::for_modulus(cfg.dataset.modulus);
        auto params = policy::init_params(cfg.policy.feature_order, vocab.size(),
                                          cfg.policy.n_buckets);
        if (cfg.init.mode == "pretrain") {
          params = curriculum::pretrain_supervised(
              std::move(params), ds, vocab, cfg.init.pretrain_epochs, cfg.init.pretrain_lr,
              cfg.curriculum.sft_temperature, cfg.init.pretrain_batch_size);
        }
        auto result = curriculum::run_disctt(cfg.curriculum, ds, vocab, std::move(params));
        auto cost = curriculum::cost_accounting(result.state, cfg.cost.c_sft, cfg.cost.c_rl);

        const curriculum::MetricsRecord* final_eval = nullptr;
        for (auto it = result.metrics.rbegin(); it != result.metrics.rend(); ++it) {
          if (it->phase == "eval") {
            final_eval = &*it;
            break;
          }
        }
        py::dict d;
        d["records"] = result.metrics.size();
        d["sft_tokens"] = cost.sft_tokens;
        d["rl_tokens"] = cost.rl_tokens;
        d["cost_ratio"] = cost.cost_ratio;
        if (final_eval) {
          d["accuracy_majority"] = final_eval->accuracy_majority.value_or(0.0);
          d["accuracy_any"] = final_eval->accuracy_any.value_or(0.0);
          d["mean_c"] = final_eval->mean_c.value_or(0.0);
        }
        if (!output_dir.is_none()) {
          std::ostringstream lines;
          for (const auto& rec : result.metrics) {
            lines << curriculum::metrics_to_json_line(rec) << "\n";
          }
          const std::string dir = py::cast<std::string>(output_dir);
          std::filesystem::create_directories(dir);
          std::ofstream mf(dir + "/metrics.jsonl", std::ios::binary);
          mf << lines.str();
          std::ofstream cf(dir + "/checkpoint_final.json", std::ios::binary);
          policy::save_checkpoint(cf, result.params);
        }
        return d;
      },
      py::arg("config_text"), py::arg("output_dir") = py::none());
}
