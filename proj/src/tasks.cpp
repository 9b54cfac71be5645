#include "disctt/tasks.hpp"

#include <charconv>
#include <istream>
#include <optional>
#include <ostream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "disctt/error.hpp"
#include "disctt/rng.hpp"

namespace disctt::tasks {

namespace {

using json = nlohmann::ordered_json;

std::optional<std::int64_t> parse_number(const std::string& symbol) {
  if (symbol.empty()) return std::nullopt;
  std::int64_t value = 0;
  auto [ptr, ec] = std::from_chars(symbol.data(), symbol.data() + symbol.size(), value);
  if (ec != std::errc() || ptr != symbol.data() + symbol.size()) return std::nullopt;
  return value;
}

std::int64_t apply_op(std::int64_t acc, char op, std::int64_t operand, std::int64_t m) {
  switch (op) {
    case '+':
      acc += operand;
      break;
    case '-':
      acc -= operand;
      break;
    case '*':
      acc *= operand;
      break;
    default:
      throw std::logic_error("unknown operator");
  }
  // Reducing after every step keeps values small; +, - and * commute with the
  // final reduction, so the result matches exact evaluation followed by mod.
  acc %= m;
  if (acc < 0) acc += m;
  return acc;
}

// Left-to-right evaluation of "a op b op c ... mod m". Returns each step's
// running value reduced into [0, m).
std::vector<std::int64_t> evaluate_chain(const TokenSeq& prompt, const Vocabulary& vocab) {
  std::size_t n = prompt.size();
  if (n > 0 && prompt[n - 1] == vocab.prompt_end()) --n;
  if (n < 4) throw ParseError("prompt too short for 'a op b mod m'");
  if (n % 2 == 0) throw ParseError("prompt has unexpected token count");

  const std::string& mod_kw = vocab.symbol(prompt[n - 2]);
  if (mod_kw != "mod") throw ParseError("expected 'mod' before the modulus");
  auto modulus = parse_number(vocab.symbol(prompt[n - 1]));
  if (!modulus || *modulus < 1) throw ParseError("modulus must be a positive number");

  auto first = parse_number(vocab.symbol(prompt[0]));
  if (!first) throw ParseError("expected a number at position 0, got '" +
                               vocab.symbol(prompt[0]) + "'");

  std::vector<std::int64_t> steps;
  std::int64_t acc = *first % *modulus;
  if (acc < 0) acc += *modulus;
  for (std::size_t i = 1; i + 2 < n; i += 2) {
    const std::string& op = vocab.symbol(prompt[i]);
    if (op != "+" && op != "-" && op != "*") {
      throw ParseError("expected an operator at position " + std::to_string(i) +
                       ", got '" + op + "'");
    }
    auto operand = parse_number(vocab.symbol(prompt[i + 1]));
    if (!operand) {
      throw ParseError("expected a number at position " + std::to_string(i + 1) +
                       ", got '" + vocab.symbol(prompt[i + 1]) + "'");
    }
    acc = apply_op(acc, op[0], *operand, *modulus);
    steps.push_back(acc);
  }
  if (steps.empty()) throw ParseError("prompt has no arithmetic step");
  return steps;
}

}  // namespace

std::vector<ProblemInstance> gen_dataset(std::uint64_t seed, int count, DepthRange depth,
                                         int modulus) {
  if (count < 1) throw std::invalid_argument("gen_dataset: count must be >= 1");
  if (modulus < 2) throw std::invalid_argument("gen_dataset: modulus must be >= 2");
  if (depth.lo < 1 || depth.hi < depth.lo) {
    throw std::invalid_argument("gen_dataset: depth range must satisfy 1 <= lo <= hi");
  }

  Vocabulary vocab = Vocabulary::for_modulus(modulus);
  const char* ops[] = {"+", "-", "*"};
  Rng rng(derive_seed(seed, "dataset"));

  std::vector<ProblemInstance> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    int d = depth.lo + static_cast<int>(rng.next_below(
                           static_cast<std::uint64_t>(depth.hi - depth.lo + 1)));
    auto number = [&](std::int64_t v) { return vocab.id(std::to_string(v)); };
    TokenSeq prompt;
    prompt.push_back(number(rng.next_below(modulus)));
    for (int s = 0; s < d; ++s) {
      prompt.push_back(vocab.id(ops[rng.next_below(3)]));
      prompt.push_back(number(rng.next_below(modulus)));
    }
    prompt.push_back(vocab.id("mod"));
    prompt.push_back(number(modulus));
    prompt.push_back(vocab.prompt_end());

    ProblemInstance inst;
    inst.id = i;
    inst.prompt = std::move(prompt);
    inst.depth = d;
    inst.modulus = modulus;
    inst.ground_truth = oracle_solve(inst.prompt, vocab);
    out.push_back(std::move(inst));
  }
  return out;
}

TokenSeq oracle_solve(const TokenSeq& prompt, const Vocabulary& vocab) {
  auto steps = evaluate_chain(prompt, vocab);
  return {vocab.id(std::to_string(steps.back()))};
}

Answer parse_answer(const TokenSeq& raw, const Vocabulary& vocab) {
  std::size_t delim = raw.size();
  for (std::size_t i = raw.size(); i-- > 0;) {
    if (raw[i] == vocab.answer_delim()) {
      delim = i;
      break;
    }
  }
  if (delim == raw.size()) return Answer::none();
  std::size_t end = raw.size();
  for (std::size_t i = delim + 1; i < raw.size(); ++i) {
    if (raw[i] == vocab.eos()) {
      end = i;
      break;
    }
  }
  if (end == raw.size()) return Answer::none();  // truncated: no terminator
  if (end == delim + 1) return Answer::none();   // empty span
  return Answer::of(TokenSeq(raw.begin() + static_cast<std::ptrdiff_t>(delim) + 1,
                             raw.begin() + static_cast<std::ptrdiff_t>(end)));
}

Completion make_completion(TokenSeq raw, const Vocabulary& vocab) {
  Completion c;
  c.answer = parse_answer(raw, vocab);
  std::size_t trace_end = raw.size();
  bool has_delim = false;
  for (std::size_t i = raw.size(); i-- > 0;) {
    if (raw[i] == vocab.answer_delim()) {
      trace_end = i;
      has_delim = true;
      break;
    }
  }
  if (!has_delim) {
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (raw[i] == vocab.eos()) {
        trace_end = i;
        break;
      }
    }
  }
  c.trace.assign(raw.begin(), raw.begin() + static_cast<std::ptrdiff_t>(trace_end));
  c.raw = std::move(raw);
  return c;
}

TokenSeq canonical_completion(const ProblemInstance& inst, const Vocabulary& vocab) {
  auto steps = evaluate_chain(inst.prompt, vocab);
  TokenSeq raw;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (i) raw.push_back(vocab.step_sep());
    raw.push_back(vocab.id(std::to_string(steps[i])));
  }
  raw.push_back(vocab.answer_delim());
  raw.push_back(vocab.id(std::to_string(steps.back())));
  raw.push_back(vocab.eos());
  return raw;
}

void save_dataset_jsonl(std::ostream& out, const std::vector<ProblemInstance>& ds,
                        const Vocabulary& vocab) {
  for (const auto& inst : ds) {
    json rec;
    rec["id"] = inst.id;
    rec["prompt_tokens"] = vocab.to_symbols(inst.prompt);
    rec["ground_truth_tokens"] = vocab.to_symbols(inst.ground_truth);
    rec["depth"] = inst.depth;
    rec["modulus"] = inst.modulus;
    out << rec.dump() << '\n';
  }
}

std::pair<std::vector<ProblemInstance>, Vocabulary> load_dataset_jsonl(std::istream& in) {
  std::vector<ProblemInstance> insts;
  std::vector<std::vector<std::string>> prompts, truths;
  int modulus = -1;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError("dataset line " + std::to_string(line_no) + ": " + e.what());
    }
    ProblemInstance inst;
    try {
      inst.id = rec.at("id").get<std::int64_t>();
      inst.depth = rec.at("depth").get<int>();
      inst.modulus = rec.at("modulus").get<int>();
      prompts.push_back(rec.at("prompt_tokens").get<std::vector<std::string>>());
      truths.push_back(rec.at("ground_truth_tokens").get<std::vector<std::string>>());
    } catch (const json::exception& e) {
      throw ParseError("dataset line " + std::to_string(line_no) + ": " + e.what());
    }
    if (modulus == -1) {
      modulus = inst.modulus;
    } else if (inst.modulus != modulus) {
      throw ParseError("dataset line " + std::to_string(line_no) +
                       ": mixed moduli in one dataset");
    }
    insts.push_back(std::move(inst));
  }
  if (insts.empty()) throw ParseError("dataset: no records");
  Vocabulary vocab = Vocabulary::for_modulus(modulus);
  for (std::size_t i = 0; i < insts.size(); ++i) {
    insts[i].prompt = vocab.to_ids(prompts[i]);
    insts[i].ground_truth = vocab.to_ids(truths[i]);
  }
  return {std::move(insts), std::move(vocab)};
}

}  // namespace disctt::tasks
