#pragma once

#include "nncap/pipeline.hpp"
#include "support.hpp"

namespace nncap::test {

// Prompt inputs as the CLI builds them from its defaults.
inline PromptSpec cli_spec() {
  PromptSpec spec;
  spec.baseline_source = read_file(kAssets / "baseline" / "resnet_lstm.py");
  spec.snippet_pool = load_pool(kAssets / "pool");
  spec.excluded_families = {"ResNet"};
  return spec;
}

inline PipelineConfig cli_config(int snippets, int rounds, std::uint64_t seed,
                                 const std::string& base) {
  PipelineConfig c;
  c.snippet_count = snippets;
  c.rounds = rounds;
  c.seed = seed;
  c.base_name = base;
  return c;
}

// Records replay fixtures for every request a run with `config` will make.
inline void record_fixtures(const std::filesystem::path& dir, const PipelineConfig& config,
                            ScriptedGateway::Responder responder) {
  TempDir scratch;
  Store store(scratch / "scratch.db");
  ScriptedGateway live(std::move(responder));
  RecordingGateway rec(live, dir);
  run_batch(config, cli_spec(), rec, store);
}

inline std::string tiny_model_output() {
  return as_model_output(read_file(kFixtures / "models" / "tiny_lstm.py"));
}

inline std::string contract_broken_output() {
  std::string src = read_file(kFixtures / "models" / "tiny_lstm.py");
  auto p = src.find("def learn(");
  src.replace(p, 10, "def learn_later(");
  return as_model_output(src);
}

// Responder giving clean output except for the listed rounds, which stay
// broken through every repair.
inline ScriptedGateway::Responder clean_except(const PipelineConfig& config,
                                               std::set<int> broken_rounds) {
  std::set<std::string> bad;
  for (int r : broken_rounds) bad.insert(assemble_prompt(spec_for_round(config, cli_spec(), r)).hash());
  return [bad](const ChatRequest& req, int) {
    bool broken = bad.count(req.prompt_hash()) || req.user_message.rfind("REPAIR MODE", 0) == 0;
    return broken ? contract_broken_output() : tiny_model_output();
  };
}

}  // namespace nncap::test
