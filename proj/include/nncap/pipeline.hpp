#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nncap/contract.hpp"
#include "nncap/gateway.hpp"
#include "nncap/prompt.hpp"
#include "nncap/registry.hpp"
#include "nncap/smoke.hpp"
#include "nncap/source_recovery.hpp"

namespace nncap {

class PipelineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PipelineConfig {
  int snippet_count = 5;
  int rounds = 1;
  int repair_limit = 2;
  bool smoke_enabled = false;
  std::uint64_t seed = 0;
  std::string base_name = "RESNETLSTM";
  std::string run_id;  // derived from the configuration when empty
  double temperature = 0.8;
  double repair_temperature = 0.2;
  int max_tokens = 4096;
  std::string model_name;
  int workers = 2;
  // Recorded training configuration.
  int epochs = 3;
  int batch_size = 32;
  double learning_rate = 1e-3;

  // Throws PipelineError on repair_limit < 0, rounds < 1 or workers < 1.
  void validate() const;
  // Canonical JSON of every field except run_id.
  nlohmann::json to_json() const;
};

// "run-" followed by 16 hex digits of the configuration digest.
std::string derive_run_id(const PipelineConfig& config);

struct RepairStep {
  std::string error_text;
  std::string response_hash;
};

struct AttemptOutcome {
  std::string attempt_id;
  AttemptStatus status = AttemptStatus::SyntaxFail;
  std::optional<std::string> final_source;
  std::optional<ContractReport> contract_report;
  std::optional<SmokeReport> smoke_report;
  std::vector<RepairStep> repair_transcript;
  DecoderType decoder_type = DecoderType::Unknown;
  std::string detail;
  int gateway_calls = 0;

  int repair_count() const { return static_cast<int>(repair_transcript.size()); }
};

// Strict header, original rules, feedback, then the current code.
// Throws PipelineError on empty feedback.
PromptText build_repair_prompt(const PromptText& original, const std::string& current_code,
                               const std::string& feedback);

// Prompt spec for one round: the template spec with seed + round.
PromptSpec spec_for_round(const PipelineConfig& config, const PromptSpec& spec_template,
                          int round);

// One attempt: generate, sanitize, check, repair up to repair_limit times,
// optionally smoke-run, then record. Store failures propagate.
AttemptOutcome run_attempt(const PipelineConfig& config, const PromptSpec& spec,
                           Gateway& gateway, Store& store, const SmokeClient* smoke,
                           const std::string& run_id, const std::string& attempt_id);

struct RunSummary {
  std::string run_id;
  int rounds = 0;
  double success_rate = 0.0;
  std::map<AttemptStatus, int> status_counts;
  std::vector<AttemptOutcome> outcomes;  // by round

  nlohmann::json to_json() const;
};

// Attempt ids are "<run_id>/r<round>"; rounds run on up to config.workers
// threads.
RunSummary run_batch(const PipelineConfig& config, const PromptSpec& spec_template,
                     Gateway& gateway, Store& store, const SmokeClient* smoke = nullptr);

}  // namespace nncap
