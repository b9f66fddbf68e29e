#include "nncap/pipeline.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <thread>

namespace nncap {

namespace {

constexpr const char* kRepairHeader =
    "REPAIR MODE. The code below failed automatic verification.\n"
    "Fix only the reported errors and change nothing else.\n"
    "Output the complete corrected file as one fenced python block, with no explanations.\n"
    "The original instructions follow for reference.\n";

AttemptStatus smoke_to_status(SmokeStatus s) {
  switch (s) {
    case SmokeStatus::Pass: return AttemptStatus::Success;
    case SmokeStatus::Diverged: return AttemptStatus::Diverged;
    default: return AttemptStatus::RuntimeFail;
  }
}

std::string syntax_detail(const SyntaxFailure& f) {
  return "syntax error at line " + std::to_string(f.line) + ", column " +
         std::to_string(f.column) + ": " + f.message;
}

}  // namespace

void PipelineConfig::validate() const {
  if (repair_limit < 0) throw PipelineError("repair_limit must be >= 0");
  if (rounds < 1) throw PipelineError("rounds must be >= 1");
  if (snippet_count < 1) throw PipelineError("snippet_count must be >= 1");
  if (workers < 1) throw PipelineError("workers must be >= 1");
  if (!(temperature > 0) || !(repair_temperature > 0))
    throw PipelineError("temperatures must be > 0");
}

nlohmann::json PipelineConfig::to_json() const {
  return {{"snippet_count", snippet_count},
          {"rounds", rounds},
          {"repair_limit", repair_limit},
          {"smoke_enabled", smoke_enabled},
          {"seed", seed},
          {"base_name", base_name},
          {"temperature", temperature},
          {"repair_temperature", repair_temperature},
          {"max_tokens", max_tokens},
          {"model_name", model_name},
          {"epochs", epochs},
          {"batch_size", batch_size},
          {"learning_rate", learning_rate}};
}

std::string derive_run_id(const PipelineConfig& config) {
  return "run-" + sha256_hex(config.to_json().dump()).substr(0, 16);
}

PromptText build_repair_prompt(const PromptText& original, const std::string& current_code,
                               const std::string& feedback) {
  if (feedback.empty()) throw PipelineError("repair feedback must be non-empty");
  PromptText out;
  out.system_message = original.system_message;
  out.snippet_manifest = original.snippet_manifest;
  out.family_prefix = original.family_prefix;
  out.rules_text = original.rules_text;
  std::string code = current_code;
  if (!code.empty() && code.back() != '\n') code += '\n';
  out.user_message = std::string(kRepairHeader) + "\n" + original.rules_text +
                     "\n## Reported errors\n" + feedback +
                     (feedback.back() == '\n' ? "" : "\n") + "\n## Current code\n```python\n" +
                     code + "```\n";
  return out;
}

PromptSpec spec_for_round(const PipelineConfig& config, const PromptSpec& spec_template,
                          int round) {
  PromptSpec spec = spec_template;
  spec.snippet_count = config.snippet_count;
  spec.base_name = config.base_name;
  spec.temperature = config.temperature;
  spec.seed = config.seed + static_cast<std::uint64_t>(round);
  return spec;
}

AttemptOutcome run_attempt(const PipelineConfig& config, const PromptSpec& spec,
                           Gateway& gateway, Store& store, const SmokeClient* smoke,
                           const std::string& run_id, const std::string& attempt_id) {
  config.validate();
  PromptText prompt = assemble_prompt(spec);

  AttemptOutcome out;
  out.attempt_id = attempt_id;
  std::string raw_output;
  std::optional<SyntaxFailure> last_syntax;

  auto ask = [&](const PromptText& p, double temperature) {
    ChatRequest req{p.system_message, p.user_message, temperature, config.max_tokens,
                    config.model_name};
    ++out.gateway_calls;
    return gateway.complete(req);
  };

  bool generated = true;
  try {
    raw_output = ask(prompt, config.temperature).raw_text;
  } catch (const GatewayError& e) {
    generated = false;
    out.status = AttemptStatus::SyntaxFail;
    out.detail = std::string("GEN_FAIL: ") + e.what();
  }

  bool accepted = false;
  if (generated) {
    std::string current = raw_output;
    while (true) {
      CandidateSource cand = sanitize(current);
      out.final_source = cand.text;
      std::string feedback;
      AttemptStatus failing;
      if (!cand.parses()) {
        last_syntax = cand.syntax;
        out.contract_report.reset();
        out.decoder_type = DecoderType::Unknown;
        feedback = explain(*cand.syntax);
        failing = AttemptStatus::SyntaxFail;
        out.detail = syntax_detail(*cand.syntax);
      } else {
        last_syntax.reset();
        ContractReport report = check(cand);
        out.contract_report = report;
        out.decoder_type = report.decoder_type;
        if (report.passed) {
          accepted = true;
          out.detail.clear();
          break;
        }
        feedback = explain(report);
        failing = AttemptStatus::ContractFail;
        out.detail = "contract: " + std::to_string(report.error_count()) + " error(s)";
      }
      out.status = failing;
      if (out.repair_count() >= config.repair_limit) break;
      PromptText repair = build_repair_prompt(prompt, cand.text, feedback);
      ChatResponse resp;
      try {
        resp = ask(repair, config.repair_temperature);
      } catch (const GatewayError& e) {
        out.detail = std::string("GEN_FAIL during repair: ") + e.what();
        break;
      }
      out.repair_transcript.push_back({feedback, sha256_hex(resp.raw_text)});
      current = resp.raw_text;
    }
  }

  if (accepted) {
    if (config.smoke_enabled && smoke) {
      SmokeRequest req;
      req.source_text = *out.final_source;
      req.lr = config.learning_rate;
      req.epochs = config.epochs;
      req.batch_size = config.batch_size;
      out.smoke_report = smoke->run(req);
      out.status = smoke_to_status(out.smoke_report->status);
      if (out.status != AttemptStatus::Success)
        out.detail = std::string(to_string(out.smoke_report->status)) + ": " +
                     out.smoke_report->message;
    } else {
      out.status = AttemptStatus::Valid;
    }
  }

  AttemptRecord rec;
  rec.attempt_id = attempt_id;
  rec.run_id = run_id;
  rec.family_prefix = prompt.family_prefix;
  rec.snippet_count = spec.snippet_count;
  rec.snippet_ids = prompt.snippet_manifest;
  rec.prompt_hash = prompt.hash();
  rec.raw_output = raw_output;
  rec.final_source = out.final_source;
  rec.repair_count = out.repair_count();
  rec.status = out.status;
  rec.decoder_type = out.decoder_type;
  rec.seed = spec.seed;
  rec.detail = out.detail;
  if (out.contract_report)
    rec.contract_report = to_json(*out.contract_report).dump();
  else if (last_syntax)
    rec.contract_report = to_json(*last_syntax).dump();
  nlohmann::json transcript = nlohmann::json::array();
  for (const auto& step : out.repair_transcript)
    transcript.push_back({{"error_text", step.error_text}, {"response_hash", step.response_hash}});
  rec.repair_transcript = transcript.dump();
  out.attempt_id = store.record_attempt(rec);

  if (out.smoke_report && !out.smoke_report->losses.empty()) {
    double last = out.smoke_report->losses.back();
    bool nan = !std::isfinite(last);
    if (!nan || out.status == AttemptStatus::Diverged) {
      MetricRecord m;
      m.attempt_id = out.attempt_id;
      m.epoch = 0;
      m.loss_nan = nan;
      if (!nan) m.loss = last;
      if (store.metrics(out.attempt_id).empty()) store.record_metric(m);
    }
  }
  return out;
}

nlohmann::json RunSummary::to_json() const {
  nlohmann::json counts = nlohmann::json::object();
  for (auto s : {AttemptStatus::Valid, AttemptStatus::SyntaxFail, AttemptStatus::ContractFail,
                 AttemptStatus::RuntimeFail, AttemptStatus::Diverged, AttemptStatus::Success}) {
    auto it = status_counts.find(s);
    counts[std::string(nncap::to_string(s))] = it == status_counts.end() ? 0 : it->second;
  }
  nlohmann::json attempts = nlohmann::json::array();
  for (const auto& o : outcomes)
    attempts.push_back({{"attempt_id", o.attempt_id},
                        {"status", nncap::to_string(o.status)},
                        {"repair_count", o.repair_count()},
                        {"decoder_type", nncap::to_string(o.decoder_type)},
                        {"gateway_calls", o.gateway_calls},
                        {"detail", o.detail}});
  return {{"run_id", run_id},
          {"rounds", rounds},
          {"success_rate", success_rate},
          {"status_counts", counts},
          {"attempts", attempts}};
}

RunSummary run_batch(const PipelineConfig& config, const PromptSpec& spec_template,
                     Gateway& gateway, Store& store, const SmokeClient* smoke) {
  config.validate();
  RunSummary summary;
  summary.run_id = config.run_id.empty() ? derive_run_id(config) : config.run_id;
  summary.rounds = config.rounds;
  store.ensure_run(summary.run_id, config.to_json().dump());

  summary.outcomes.resize(config.rounds);
  std::vector<std::exception_ptr> errors(config.rounds);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int r = next++; r < config.rounds; r = next++) {
      try {
        summary.outcomes[r] =
            run_attempt(config, spec_for_round(config, spec_template, r), gateway, store, smoke,
                        summary.run_id, summary.run_id + "/r" + std::to_string(r));
      } catch (...) {
        errors[r] = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    int n = std::min(config.workers, config.rounds);
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  for (const auto& o : summary.outcomes) ++summary.status_counts[o.status];
  summary.success_rate = store.success_rate(summary.run_id);
  return summary;
}

}  // namespace nncap
