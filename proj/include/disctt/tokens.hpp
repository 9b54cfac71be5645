#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace disctt {

using TokenId = std::int32_t;
using TokenSeq = std::vector<TokenId>;

// Finite symbol set with four reserved markers: end-of-prompt, reasoning step
// separator, answer delimiter, and end-of-sequence. Symbol <-> id mapping is
// bijective; ids are dense in [0, size).
class Vocabulary {
 public:
  Vocabulary(std::vector<std::string> symbols, const std::string& prompt_end,
             const std::string& step_sep, const std::string& answer_delim,
             const std::string& eos);

  // Vocabulary for modular arithmetic over a fixed modulus: number symbols
  // "0".."modulus", operators, the "mod" keyword, and the four markers.
  static Vocabulary for_modulus(int modulus);

  int size() const { return static_cast<int>(symbols_.size()); }
  const std::string& symbol(TokenId id) const;
  TokenId id(const std::string& symbol) const;
  bool has(const std::string& symbol) const { return index_.count(symbol) > 0; }

  TokenId prompt_end() const { return prompt_end_; }
  TokenId step_sep() const { return step_sep_; }
  TokenId answer_delim() const { return answer_delim_; }
  TokenId eos() const { return eos_; }

  std::vector<std::string> to_symbols(const TokenSeq& seq) const;
  TokenSeq to_ids(const std::vector<std::string>& symbols) const;
  std::string join(const TokenSeq& seq) const;

 private:
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, TokenId> index_;
  TokenId prompt_end_ = -1;
  TokenId step_sep_ = -1;
  TokenId answer_delim_ = -1;
  TokenId eos_ = -1;
};

inline constexpr const char* kPromptEnd = "<go>";
inline constexpr const char* kStepSep = "<sep>";
inline constexpr const char* kAnswerDelim = "<ans>";
inline constexpr const char* kEos = "<eos>";

}  // namespace disctt
