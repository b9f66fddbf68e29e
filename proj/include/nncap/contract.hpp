#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "nncap/source_recovery.hpp"
#include "nncap/types.hpp"

namespace nncap {

enum class RuleId {
  NetClass,
  CtorSig,
  Methods,
  Hyperparams,
  ForbiddenIdent,
  VocabToDecoder,
  TupleReturn,
  IgnoreIndex,
};

enum class Severity { Error, Warning };

std::string_view to_string(RuleId id);
std::optional<RuleId> rule_from_string(std::string_view s);
std::string_view to_string(Severity s);

// Default severity of a rule: IGNORE_INDEX warns, everything else errors.
Severity default_severity(RuleId id);

struct Violation {
  RuleId rule = RuleId::NetClass;
  Severity severity = Severity::Error;
  int line = 1;
  int column = 1;
  std::string message;
  std::optional<std::string> identifier;
};

struct ContractReport {
  std::vector<Violation> violations;  // sorted by (line, column, rule)
  bool passed = true;
  DecoderType decoder_type = DecoderType::Unknown;
  std::string rules_version;

  std::size_t error_count() const;
};

struct ContractConfig {
  std::string rules_version = "nncap-rules/1";
  // Dotted names that must not be referenced, e.g. "nn.SelfAttention".
  std::vector<std::string> deny_list = {"nn.SelfAttention"};
  std::vector<std::string> required_methods = {"train_setup", "learn", "forward"};
};

class ContractError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Static check of a parsed candidate against the Net API contract.
// Throws ContractError when the source does not parse.
ContractReport check(std::string_view source, const ContractConfig& config = {});
ContractReport check(const CandidateSource& source, const ContractConfig& config = {});

// Transformer when a transformer decoder or multi-head attention is
// constructed; otherwise the first recurrent constructor (LSTM or GRU) in
// source order; Unknown if none. Throws ContractError on unparsable input.
DecoderType classify_decoder(std::string_view source);

// Line-referenced repair feedback. Throws ContractError when there is nothing
// to explain (no violations and no syntax failure).
std::string explain(const ContractReport& report);
std::string explain(const SyntaxFailure& failure);

nlohmann::json to_json(const ContractReport& report);
nlohmann::json to_json(const SyntaxFailure& failure);

}  // namespace nncap
