#include "nncap/bleu.hpp"

#include <cmath>
#include <map>

namespace nncap::bleu {

namespace {

bool is_space(unsigned char c) { return c == ' ' || (c >= '\t' && c <= '\r'); }

bool is_punct(unsigned char c) {
  return (c >= '!' && c <= '/') || (c >= ':' && c <= '@') || (c >= '[' && c <= '`') ||
         (c >= '{' && c <= '~');
}

using Counts = std::map<std::vector<std::string>, std::int64_t>;

Counts ngrams(const TokenSeq& seq, int n) {
  Counts out;
  if (seq.size() < static_cast<std::size_t>(n)) return out;
  for (std::size_t i = 0; i + n <= seq.size(); ++i)
    ++out[std::vector<std::string>(seq.begin() + i, seq.begin() + i + n)];
  return out;
}

void check_shapes(const std::vector<TokenSeq>& candidates,
                  const std::vector<std::vector<TokenSeq>>& references) {
  if (candidates.size() != references.size())
    throw BleuError("candidate and reference lists differ in length");
}

}  // namespace

TokenSeq tokenize(std::string_view caption) {
  TokenSeq out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (unsigned char c : caption) {
    if (is_space(c)) {
      flush();
    } else if (is_punct(c)) {
      flush();
      out.emplace_back(1, static_cast<char>(c));
    } else {
      cur += (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c);
    }
  }
  flush();
  return out;
}

NgramCount modified_precision(const std::vector<TokenSeq>& candidates,
                              const std::vector<std::vector<TokenSeq>>& references, int n) {
  check_shapes(candidates, references);
  if (candidates.empty()) throw BleuError("empty corpus");
  if (n < 1 || n > 4) throw BleuError("n must be in 1..4");
  NgramCount acc;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    Counts cand = ngrams(candidates[i], n);
    Counts max_ref;
    for (const auto& ref : references[i])
      for (const auto& [gram, count] : ngrams(ref, n)) {
        auto& slot = max_ref[gram];
        if (count > slot) slot = count;
      }
    for (const auto& [gram, count] : cand) {
      acc.total += count;
      auto it = max_ref.find(gram);
      if (it != max_ref.end()) acc.clipped += std::min(count, it->second);
    }
  }
  return acc;
}

std::int64_t closest_ref_length(std::int64_t candidate_len, const std::vector<TokenSeq>& refs) {
  if (refs.empty()) throw BleuError("candidate has no references");
  std::int64_t best = static_cast<std::int64_t>(refs.front().size());
  for (const auto& r : refs) {
    auto len = static_cast<std::int64_t>(r.size());
    auto d = std::llabs(len - candidate_len), bd = std::llabs(best - candidate_len);
    if (d < bd || (d == bd && len < best)) best = len;
  }
  return best;
}

double brevity_penalty(std::int64_t candidate_len, std::int64_t effective_ref_len) {
  if (candidate_len < 0 || effective_ref_len < 0) throw BleuError("negative length");
  if (effective_ref_len == 0) throw BleuError("effective reference length is zero");
  if (candidate_len == 0) return 0.0;
  if (candidate_len > effective_ref_len) return 1.0;
  return std::exp(1.0 - static_cast<double>(effective_ref_len) / static_cast<double>(candidate_len));
}

BleuBreakdown bleu4(const std::vector<TokenSeq>& candidates,
                    const std::vector<std::vector<TokenSeq>>& references) {
  check_shapes(candidates, references);
  if (candidates.empty()) throw BleuError("empty corpus");
  BleuBreakdown b;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    auto c = static_cast<std::int64_t>(candidates[i].size());
    b.candidate_len += c;
    b.effective_ref_len += closest_ref_length(c, references[i]);
  }
  for (int n = 1; n <= 4; ++n) b.p[n - 1] = modified_precision(candidates, references, n);
  // Only empty references: nothing to be shorter than.
  b.brevity_penalty = b.effective_ref_len == 0
                          ? 1.0
                          : brevity_penalty(b.candidate_len, b.effective_ref_len);
  double log_sum = 0.0;
  for (const auto& p : b.p) {
    if (p.clipped == 0) return b;  // bleu4 stays 0
    log_sum += 0.25 * std::log(static_cast<double>(p.clipped) / static_cast<double>(p.total));
  }
  b.bleu4 = b.brevity_penalty * std::exp(log_sum);
  return b;
}

nlohmann::json to_json(const BleuBreakdown& b) {
  nlohmann::json p = nlohmann::json::array();
  for (int n = 0; n < 4; ++n)
    p.push_back({{"n", n + 1}, {"clipped", b.p[n].clipped}, {"total", b.p[n].total}});
  return {{"precisions", p},
          {"candidate_len", b.candidate_len},
          {"effective_ref_len", b.effective_ref_len},
          {"brevity_penalty", b.brevity_penalty},
          {"bleu4", b.bleu4}};
}

}  // namespace nncap::bleu
