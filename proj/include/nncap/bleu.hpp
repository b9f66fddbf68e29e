#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace nncap::bleu {

using TokenSeq = std::vector<std::string>;

// Lowercases ASCII letters, splits on whitespace and emits every ASCII
// punctuation character as its own token.
TokenSeq tokenize(std::string_view caption);

class BleuError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct NgramCount {
  std::int64_t clipped = 0;
  std::int64_t total = 0;

  friend bool operator==(const NgramCount&, const NgramCount&) = default;
};

// Corpus-level clipped n-gram matches. references[i] holds the references of
// candidates[i].
NgramCount modified_precision(const std::vector<TokenSeq>& candidates,
                              const std::vector<std::vector<TokenSeq>>& references, int n);

// Reference length closest to `candidate_len`; ties go to the shorter one.
std::int64_t closest_ref_length(std::int64_t candidate_len, const std::vector<TokenSeq>& refs);

double brevity_penalty(std::int64_t candidate_len, std::int64_t effective_ref_len);

struct BleuBreakdown {
  std::array<NgramCount, 4> p{};
  std::int64_t candidate_len = 0;
  std::int64_t effective_ref_len = 0;
  double brevity_penalty = 0.0;
  double bleu4 = 0.0;
};

// Uniform weights, no smoothing.
BleuBreakdown bleu4(const std::vector<TokenSeq>& candidates,
                    const std::vector<std::vector<TokenSeq>>& references);

nlohmann::json to_json(const BleuBreakdown& b);

}  // namespace nncap::bleu
