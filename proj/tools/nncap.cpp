// nncap command-line front end.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "nncap/bleu.hpp"
#include "nncap/contract.hpp"
#include "nncap/gateway.hpp"
#include "nncap/pipeline.hpp"
#include "nncap/prompt.hpp"
#include "nncap/registry.hpp"
#include "nncap/smoke.hpp"
#include "nncap/source_recovery.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kValidationFailure = 1;
constexpr int kOperationalError = 2;

struct OperationalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw OperationalError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> read_lines(const fs::path& p) {
  std::istringstream in(read_file(p));
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(line);
  }
  return out;
}

std::vector<std::string> runner_command(const std::string& runner) {
  const char* python = std::getenv("NNCAP_PYTHON");
  return {python && *python ? python : "python3", runner};
}

json candidate_json(const nncap::CandidateSource& c) {
  json log = json::array();
  for (const auto& p : c.pass_log)
    log.push_back({{"pass", p.pass}, {"changed", p.changed}, {"detail", p.detail}});
  json out = {{"text", c.text},
              {"origin", c.origin == nncap::SourceOrigin::FencedBlock ? "fenced-block"
                                                                       : "whole-text-fallback"},
              {"pass_log", log},
              {"parses", c.parses()}};
  if (c.syntax)
    out["syntax_error"] = {
        {"line", c.syntax->line}, {"column", c.syntax->column}, {"message", c.syntax->message}};
  return out;
}

struct GlobalOptions {
  std::string db = "nncap.db";
};

struct GenerateOptions {
  int snippets = 5;
  int rounds = 1;
  std::uint64_t seed = 0;
  std::string base = "RESNETLSTM";
  std::string replay;
  std::string endpoint;
  std::string record;
  bool smoke = false;
  std::string runner;
  int repair_limit = 2;
  int workers = 2;
  std::string run_id;
  std::string baseline = NNCAP_ASSET_DIR "/baseline/resnet_lstm.py";
  std::string pool = NNCAP_ASSET_DIR "/pool";
  std::vector<std::string> exclude = {"ResNet"};
  std::string template_file;
  double temperature = 0.8;
  double repair_temperature = 0.2;
  int max_tokens = 4096;
  std::string model;
  int epochs = 3;
  int batch_size = 32;
  double lr = 1e-3;
  std::size_t max_chars = 0;
};

int cmd_generate(const GlobalOptions& g, const GenerateOptions& o) {
  nncap::PipelineConfig config;
  config.snippet_count = o.snippets;
  config.rounds = o.rounds;
  config.seed = o.seed;
  config.base_name = o.base;
  config.repair_limit = o.repair_limit;
  config.workers = o.workers;
  config.run_id = o.run_id;
  config.temperature = o.temperature;
  config.repair_temperature = o.repair_temperature;
  config.max_tokens = o.max_tokens;
  config.model_name = o.model;
  config.epochs = o.epochs;
  config.batch_size = o.batch_size;
  config.learning_rate = o.lr;
  config.smoke_enabled = o.smoke;
  config.validate();

  nncap::PromptSpec spec;
  spec.baseline_source = read_file(o.baseline);
  spec.snippet_pool = nncap::load_pool(o.pool);
  spec.excluded_families = {o.exclude.begin(), o.exclude.end()};
  if (!o.template_file.empty()) spec.template_text = read_file(o.template_file);
  if (o.max_chars) spec.max_chars = o.max_chars;

  nncap::Store store(g.db);
  for (const auto& s : spec.snippet_pool) store.put_snippet(s);

  std::unique_ptr<nncap::Gateway> inner, gateway;
  if (!o.replay.empty()) {
    gateway = std::make_unique<nncap::ReplayGateway>(o.replay);
  } else {
    nncap::EndpointConfig ec = nncap::endpoint_from_env();
    if (!o.endpoint.empty()) ec.url = o.endpoint;
    if (!o.model.empty()) ec.model_name = o.model;
    if (ec.url.empty())
      throw OperationalError("no endpoint: pass --replay DIR, --endpoint URL or set "
                             "NNCAP_ENDPOINT_URL");
    inner = std::make_unique<nncap::HttpGateway>(ec);
    if (!o.record.empty())
      gateway = std::make_unique<nncap::RecordingGateway>(*inner, o.record);
    else
      gateway = std::move(inner);
  }
  gateway->attach(&store);

  std::unique_ptr<nncap::SmokeClient> smoke;
  if (o.smoke) {
    nncap::SmokeConfig sc;
    if (!o.runner.empty()) sc.command = runner_command(o.runner);
    try {
      smoke = std::make_unique<nncap::SmokeClient>(sc);
      auto probe = smoke->probe();
      if (!probe.ok) {
        std::cerr << "warning: smoke runner unavailable (" << probe.details.dump()
                  << "); smoke disabled\n";
        smoke.reset();
      }
    } catch (const std::exception& e) {
      std::cerr << "warning: " << e.what() << "; smoke disabled\n";
      smoke.reset();
    }
    config.smoke_enabled = smoke != nullptr;
  }

  for (int r = 0; r < config.rounds; ++r) {
    auto prompt = nncap::assemble_prompt(nncap::spec_for_round(config, spec, r));
    for (const auto& w : prompt.warnings) std::cerr << "warning: round " << r << ": " << w << "\n";
  }
  auto summary = nncap::run_batch(config, spec, *gateway, store, smoke.get());
  std::cout << summary.to_json().dump(2) << "\n";
  return kOk;
}

int cmd_sanitize(const std::string& file, bool as_json) {
  auto c = nncap::sanitize(read_file(file));
  if (as_json)
    std::cout << candidate_json(c).dump(2) << "\n";
  else
    std::cout << c.text;
  if (!c.parses()) {
    std::cerr << "syntax error at line " << c.syntax->line << ", column " << c.syntax->column
              << ": " << c.syntax->message << "\n";
    return kValidationFailure;
  }
  return kOk;
}

int cmd_validate(const std::string& file) {
  std::string text = read_file(file);
  if (auto failure = nncap::syntax_check(text)) {
    std::cout << nncap::to_json(*failure).dump(2) << "\n";
    return kValidationFailure;
  }
  auto report = nncap::check(text);
  std::cout << nncap::to_json(report).dump(2) << "\n";
  return report.passed ? kOk : kValidationFailure;
}

int cmd_smoke(const std::string& file, const std::string& runner, double timeout_s, int steps) {
  nncap::SmokeConfig sc;
  if (!runner.empty()) sc.command = runner_command(runner);
  nncap::SmokeClient client(sc);
  nncap::SmokeRequest req;
  req.source_text = read_file(file);
  req.timeout_s = timeout_s;
  req.steps = steps;
  auto report = client.run(req);
  std::cout << report.to_json().dump(2) << "\n";
  return report.status == nncap::SmokeStatus::Pass ? kOk : kValidationFailure;
}

int cmd_bleu(const std::string& hyp, const std::vector<std::string>& refs) {
  auto hyps = read_lines(hyp);
  std::vector<std::vector<std::string>> ref_lines;
  for (const auto& r : refs) {
    ref_lines.push_back(read_lines(r));
    if (ref_lines.back().size() != hyps.size())
      throw OperationalError("reference file " + r + " has " +
                             std::to_string(ref_lines.back().size()) + " lines, hypothesis has " +
                             std::to_string(hyps.size()));
  }
  std::vector<nncap::bleu::TokenSeq> cands;
  std::vector<std::vector<nncap::bleu::TokenSeq>> refsets(hyps.size());
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    cands.push_back(nncap::bleu::tokenize(hyps[i]));
    for (const auto& lines : ref_lines) refsets[i].push_back(nncap::bleu::tokenize(lines[i]));
  }
  std::cout << nncap::bleu::to_json(nncap::bleu::bleu4(cands, refsets)).dump(2) << "\n";
  return kOk;
}

int cmd_report(const GlobalOptions& g, const std::string& run, const std::string& format) {
  if (!fs::exists(g.db)) throw OperationalError("no store at " + g.db);
  nncap::Store store(g.db);
  if (!run.empty()) {
    double rate = store.success_rate(run);
    json counts = json::object();
    for (const auto& a : store.attempts(run)) {
      auto key = std::string(nncap::to_string(a.status));
      counts[key] = counts.value(key, 0) + 1;
    }
    json out = {{"run_id", run}, {"success_rate", rate}, {"status_counts", counts}};
    std::cout << out.dump(2) << "\n";
    return kOk;
  }
  auto families = store.family_summary();
  auto bleu = store.bleu_summary();
  if (format == "csv") {
    std::cout << nncap::to_csv(families) << "\n" << nncap::to_csv(bleu);
  } else if (format == "json") {
    json rows = json::array();
    for (const auto& r : families.rows)
      rows.push_back(
          {{"prefix", r.prefix}, {"decoder_type", nncap::to_string(r.decoder_type)}, {"count", r.count}});
    json b = json::array();
    for (const auto& r : bleu)
      b.push_back({{"prefix", r.prefix}, {"best_bleu4", r.best_bleu4 ? json(*r.best_bleu4) : json()}});
    std::cout << json{{"families", rows}, {"total", families.total}, {"bleu", b}}.dump(2) << "\n";
  } else {
    std::cout << nncap::to_text(families) << "\n" << nncap::to_text(bleu);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"NN-Caption toolchain: prompt assembly, code recovery, contract checks, BLEU"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML/INI configuration file mirroring the flags");
  GlobalOptions g;
  app.add_option("--db", g.db, "Registry database file")->capture_default_str();

  GenerateOptions gen;
  auto* generate = app.add_subcommand("generate", "Run a batch of generation attempts");
  generate->add_option("--snippets", gen.snippets, "Snippets per prompt")->capture_default_str();
  generate->add_option("--rounds", gen.rounds, "Attempts in the run")->capture_default_str();
  generate->add_option("--seed", gen.seed, "Base seed; round r uses seed + r")->capture_default_str();
  generate->add_option("--base", gen.base, "Baseline name used in the family prefix")
      ->capture_default_str();
  auto* replay = generate->add_option("--replay", gen.replay, "Replay fixtures from DIR");
  auto* endpoint = generate->add_option("--endpoint", gen.endpoint, "Chat-completions URL");
  replay->excludes(endpoint);
  generate->add_option("--record", gen.record, "Store live completions as fixtures in DIR")
      ->excludes(replay);
  generate->add_flag("--smoke", gen.smoke, "Smoke-run accepted candidates");
  generate->add_option("--runner", gen.runner, "Smoke runner script");
  generate->add_option("--repair-limit", gen.repair_limit)->capture_default_str();
  generate->add_option("--workers", gen.workers)->capture_default_str();
  generate->add_option("--run-id", gen.run_id, "Run id (derived from the config if omitted)");
  generate->add_option("--baseline", gen.baseline, "Baseline captioning model source")
      ->capture_default_str();
  generate->add_option("--pool", gen.pool, "Snippet pool directory")->capture_default_str();
  generate->add_option("--exclude", gen.exclude, "Excluded snippet families")
      ->capture_default_str();
  generate->add_option("--template", gen.template_file, "Prompt template file");
  generate->add_option("--temperature", gen.temperature)->capture_default_str();
  generate->add_option("--repair-temperature", gen.repair_temperature)->capture_default_str();
  generate->add_option("--max-tokens", gen.max_tokens)->capture_default_str();
  generate->add_option("--model", gen.model, "Model name sent to the endpoint");
  generate->add_option("--epochs", gen.epochs)->capture_default_str();
  generate->add_option("--batch-size", gen.batch_size)->capture_default_str();
  generate->add_option("--lr", gen.lr)->capture_default_str();
  generate->add_option("--max-chars", gen.max_chars, "Warn when a prompt exceeds this size");

  std::string sanitize_file;
  bool sanitize_json = false;
  auto* sanitize = app.add_subcommand("sanitize", "Recover candidate code from raw output");
  sanitize->add_option("FILE", sanitize_file)->required();
  sanitize->add_flag("--json", sanitize_json, "Print text, origin and pass log as JSON");

  std::string validate_file;
  auto* validate = app.add_subcommand("validate", "Check a source file against the Net API");
  validate->add_option("FILE", validate_file)->required();

  std::string smoke_file, smoke_runner;
  double smoke_timeout = 120;
  int smoke_steps = 2;
  auto* smoke = app.add_subcommand("smoke", "Smoke-run a candidate in a child process");
  smoke->add_option("FILE", smoke_file)->required();
  smoke->add_option("--runner", smoke_runner, "Runner script (default NNCAP_SMOKE_RUNNER)");
  smoke->add_option("--timeout", smoke_timeout)->capture_default_str();
  smoke->add_option("--steps", smoke_steps)->capture_default_str();

  std::string hyp;
  std::vector<std::string> refs;
  auto* bleu = app.add_subcommand("bleu", "Corpus BLEU-4 of line-aligned captions");
  bleu->add_option("--hyp", hyp, "Candidate captions, one per line")->required();
  bleu->add_option("--refs", refs, "Reference files, line-aligned")->required();

  std::string report_run, report_format = "text";
  auto* report = app.add_subcommand("report", "Family and BLEU summaries");
  report->add_option("--run", report_run, "Report one run instead");
  report->add_option("--format", report_format)
      ->check(CLI::IsMember({"text", "csv", "json"}))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kOperationalError;
  }

  try {
    if (*generate) return cmd_generate(g, gen);
    if (*sanitize) return cmd_sanitize(sanitize_file, sanitize_json);
    if (*validate) return cmd_validate(validate_file);
    if (*smoke) return cmd_smoke(smoke_file, smoke_runner, smoke_timeout, smoke_steps);
    if (*bleu) return cmd_bleu(hyp, refs);
    if (*report) return cmd_report(g, report_run, report_format);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kOperationalError;
  }
  return kOperationalError;
}
