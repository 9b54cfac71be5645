#include "disctt/tokens.hpp"

#include <stdexcept>

#include "disctt/error.hpp"

namespace disctt {

Vocabulary::Vocabulary(std::vector<std::string> symbols,
                       const std::string& prompt_end, const std::string& step_sep,
                       const std::string& answer_delim, const std::string& eos)
    : symbols_(std::move(symbols)) {
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    auto [it, inserted] = index_.emplace(symbols_[i], static_cast<TokenId>(i));
    if (!inserted) {
      throw std::invalid_argument("vocabulary: duplicate symbol '" + symbols_[i] + "'");
    }
  }
  auto find_marker = [&](const std::string& s) {
    auto it = index_.find(s);
    if (it == index_.end()) {
      throw std::invalid_argument("vocabulary: marker '" + s + "' not in symbol list");
    }
    return it->second;
  };
  prompt_end_ = find_marker(prompt_end);
  step_sep_ = find_marker(step_sep);
  answer_delim_ = find_marker(answer_delim);
  eos_ = find_marker(eos);
  if (prompt_end_ == step_sep_ || prompt_end_ == answer_delim_ || prompt_end_ == eos_ ||
      step_sep_ == answer_delim_ || step_sep_ == eos_ || answer_delim_ == eos_) {
    throw std::invalid_argument("vocabulary: markers must be four distinct symbols");
  }
}

Vocabulary Vocabulary::for_modulus(int modulus) {
  if (modulus < 2) {
    throw std::invalid_argument("vocabulary: modulus must be >= 2");
  }
  std::vector<std::string> symbols;
  for (int v = 0; v <= modulus; ++v) {
    symbols.push_back(std::to_string(v));
  }
  symbols.insert(symbols.end(), {"+", "-", "*", "mod"});
  symbols.insert(symbols.end(), {kPromptEnd, kStepSep, kAnswerDelim, kEos});
  return Vocabulary(std::move(symbols), kPromptEnd, kStepSep, kAnswerDelim, kEos);
}

const std::string& Vocabulary::symbol(TokenId id) const {
  if (id < 0 || id >= size()) {
    throw std::invalid_argument("vocabulary: token id " + std::to_string(id) +
                                " out of range [0, " + std::to_string(size()) + ")");
  }
  return symbols_[static_cast<std::size_t>(id)];
}

TokenId Vocabulary::id(const std::string& symbol) const {
  auto it = index_.find(symbol);
  if (it == index_.end()) {
    throw std::invalid_argument("vocabulary: unknown symbol '" + symbol + "'");
  }
  return it->second;
}

std::vector<std::string> Vocabulary::to_symbols(const TokenSeq& seq) const {
  std::vector<std::string> out;
  out.reserve(seq.size());
  for (TokenId t : seq) out.push_back(symbol(t));
  return out;
}

TokenSeq Vocabulary::to_ids(const std::vector<std::string>& symbols) const {
  TokenSeq out;
  out.reserve(symbols.size());
  for (const auto& s : symbols) out.push_back(id(s));
  return out;
}

std::string Vocabulary::join(const TokenSeq& seq) const {
  std::string out;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (i) out += ' ';
    out += symbol(seq[i]);
  }
  return out;
}

}  // namespace disctt
