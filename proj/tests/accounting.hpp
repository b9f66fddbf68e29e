#pragma once

#include <nlohmann/json.hpp>

#include "nncap/registry.hpp"
#include "support.hpp"

namespace nncap::test {

struct TableRow {
  std::string prefix;
  DecoderType decoder;
  std::int64_t models;
};

// Decoder labels in the counts fixture carry annotations; the store only
// knows the base recurrent type.
inline DecoderType table_decoder(const std::string& label) {
  if (label.rfind("GRU", 0) == 0) return DecoderType::GRU;
  if (label.rfind("LSTM", 0) == 0) return DecoderType::LSTM;
  if (label == "Transformer") return DecoderType::Transformer;
  throw std::runtime_error("unknown decoder label " + label);
}

inline std::vector<TableRow> family_counts() {
  auto j = nlohmann::json::parse(read_file(kFixtures / "accounting" / "family_counts.json"));
  std::vector<TableRow> rows;
  for (const auto& r : j)
    rows.push_back({r.at("prefix"), table_decoder(r.at("decoder")), r.at("models")});
  return rows;
}

// Seeds one successful attempt per generated model plus failures that must
// not be counted.
inline void seed_family_counts(Store& store) {
  store.ensure_run("family-counts");
  int k = 0;
  for (const auto& row : family_counts()) {
    auto parts = parse_family_prefix(row.prefix).value();
    auto add = [&](AttemptStatus status, DecoderType decoder) {
      AttemptRecord a;
      a.run_id = "family-counts";
      a.family_prefix = row.prefix;
      a.snippet_count = parts.snippet_count;
      a.prompt_hash = sha256_hex("prompt " + std::to_string(k));
      a.raw_output = "output " + std::to_string(k++);
      a.status = status;
      a.decoder_type = decoder;
      if (status == AttemptStatus::Success) a.final_source = "class Net: pass\n";
      store.record_attempt(a);
    };
    for (std::int64_t i = 0; i < row.models; ++i) add(AttemptStatus::Success, row.decoder);
    add(AttemptStatus::ContractFail, DecoderType::Unknown);
    add(AttemptStatus::RuntimeFail, DecoderType::Transformer);
  }
}

}  // namespace nncap::test
