#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "nncap/bleu.hpp"

namespace nncap::bleu::test {

using Corpus = std::vector<TokenSeq>;
using Refs = std::vector<std::vector<TokenSeq>>;

// Brute-force reference: explicit n-gram multisets per segment.
inline double oracle_bleu(const Corpus& cands, const Refs& refs) {
  double log_sum = 0;
  for (int n = 1; n <= 4; ++n) {
    long clipped = 0, total = 0;
    for (std::size_t i = 0; i < cands.size(); ++i) {
      std::map<TokenSeq, long> mine;
      for (std::size_t k = 0; k + n <= cands[i].size(); ++k)
        ++mine[TokenSeq(cands[i].begin() + k, cands[i].begin() + k + n)];
      for (const auto& [gram, count] : mine) {
        long best = 0;
        for (const auto& r : refs[i]) {
          long c = 0;
          for (std::size_t k = 0; k + n <= r.size(); ++k)
            if (TokenSeq(r.begin() + k, r.begin() + k + n) == gram) ++c;
          best = std::max(best, c);
        }
        clipped += std::min(count, best);
        total += count;
      }
    }
    if (clipped == 0 || total == 0) return 0.0;
    log_sum += std::log(static_cast<double>(clipped) / total);
  }
  long c = 0, r = 0;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    c += cands[i].size();
    long best = -1;
    for (const auto& ref : refs[i]) {
      long len = ref.size();
      long d = std::labs(len - static_cast<long>(cands[i].size()));
      long bd = std::labs(best - static_cast<long>(cands[i].size()));
      if (best < 0 || d < bd || (d == bd && len < best)) best = len;
    }
    r += best;
  }
  double bp = c > r ? 1.0 : std::exp(1.0 - static_cast<double>(r) / c);
  return bp * std::exp(log_sum / 4);
}

struct RandomCorpus {
  Corpus cands;
  Refs refs;
};

inline RandomCorpus random_corpus(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> vocab(2, 10), len(0, 12), segs(1, 5), nrefs(1, 3);
  int v = vocab(rng);
  std::uniform_int_distribution<int> word(0, v - 1);
  auto seq = [&] {
    TokenSeq s(len(rng));
    for (auto& t : s) t = "w" + std::to_string(word(rng));
    return s;
  };
  RandomCorpus rc;
  int n = segs(rng);
  for (int i = 0; i < n; ++i) {
    rc.cands.push_back(seq());
    std::vector<TokenSeq> rs;
    int k = nrefs(rng);
    for (int j = 0; j < k; ++j) {
      TokenSeq s = seq();
      if (s.empty()) s.push_back("w0");
      rs.push_back(s);
    }
    rc.refs.push_back(rs);
  }
  // Keep the candidate side non-empty so the brevity penalty is defined.
  if (std::all_of(rc.cands.begin(), rc.cands.end(), [](const TokenSeq& s) { return s.empty(); }))
    rc.cands[0].push_back("w0");
  return rc;
}

}  // namespace nncap::bleu::test
