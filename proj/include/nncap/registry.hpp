#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nncap/types.hpp"

struct sqlite3;

namespace nncap {

class StoreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kSchemaVersion = 1;

struct AttemptRecord {
  std::string attempt_id;  // derived from (run_id, prompt_hash, raw_output) when empty
  std::string run_id;
  std::string family_prefix;
  int snippet_count = 1;
  std::vector<std::string> snippet_ids;
  std::string prompt_hash;
  std::string raw_output;
  std::optional<std::string> final_source;
  int repair_count = 0;
  AttemptStatus status = AttemptStatus::Valid;
  DecoderType decoder_type = DecoderType::Unknown;
  std::uint64_t seed = 0;
  std::string detail;
  std::optional<std::string> contract_report;  // JSON text
  std::string repair_transcript = "[]";        // JSON text
  std::string created_at;
  std::string finished_at;

  friend bool operator==(const AttemptRecord&, const AttemptRecord&) = default;
};

struct MetricRecord {
  std::string attempt_id;
  int epoch = 0;  // 0 = smoke run
  std::optional<double> loss;
  bool loss_nan = false;
  std::optional<double> bleu4;

  friend bool operator==(const MetricRecord&, const MetricRecord&) = default;
};

struct FamilyRow {
  std::string prefix;
  DecoderType decoder_type = DecoderType::Unknown;
  std::int64_t count = 0;
};

struct FamilySummary {
  std::vector<FamilyRow> rows;
  std::int64_t total = 0;
};

struct BleuRow {
  std::string prefix;
  std::optional<double> best_bleu4;
};

struct StoreOptions {
  int max_repairs = 2;
  std::set<AttemptStatus> success = {AttemptStatus::Valid, AttemptStatus::Success};
};

// Single-file SQLite store. All methods are safe to call from several threads;
// writes are serialized on an internal mutex and across processes by SQLite
// file locking.
class Store {
 public:
  // Throws StoreError("unwritable path: ...") or
  // StoreError("incompatible schema version ...").
  explicit Store(const std::filesystem::path& path, StoreOptions options = {});
  ~Store();
  Store(const Store&) = delete;
  Store& operator=(const Store&) = delete;

  const StoreOptions& options() const { return options_; }

  void put_snippet(const SnippetRecord& s);
  std::vector<SnippetRecord> snippets() const;

  // Creates the run row if absent; keeps an existing row untouched.
  void ensure_run(const std::string& run_id, const std::string& config_json = "{}");
  std::vector<std::string> run_ids() const;

  // Idempotent on (run_id, prompt_hash, raw_output): returns the existing id.
  std::string record_attempt(AttemptRecord attempt);
  std::optional<AttemptRecord> attempt(const std::string& attempt_id) const;
  std::vector<AttemptRecord> attempts(const std::optional<std::string>& run_id = {}) const;
  std::int64_t attempt_count() const;

  void record_metric(const MetricRecord& m);
  std::vector<MetricRecord> metrics(const std::string& attempt_id) const;

  void record_exchange(const std::string& prompt_hash, const std::string& request_json,
                       const std::string& response_json, std::int64_t latency_ms);
  std::int64_t exchange_count() const;

  FamilySummary family_summary() const;
  std::vector<BleuRow> bleu_summary() const;

  // Throws StoreError for an unknown or empty run.
  double success_rate(const std::string& run_id) const;

  // Full content as JSON with timestamps and latencies removed, rows in a
  // canonical order.
  nlohmann::json dump() const;

 private:
  bool counts(AttemptStatus s) const { return options_.success.count(s) > 0; }
  void exec(const char* sql) const;

  sqlite3* db_ = nullptr;
  StoreOptions options_;
  mutable std::mutex mu_;
};

std::string attempt_id_for(const std::string& run_id, const std::string& prompt_hash,
                           const std::string& raw_output);

std::string to_csv(const FamilySummary& s);
std::string to_text(const FamilySummary& s);
std::string to_csv(const std::vector<BleuRow>& rows);
std::string to_text(const std::vector<BleuRow>& rows);

}  // namespace nncap
