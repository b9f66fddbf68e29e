#include "nncap/registry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <tuple>

#include <sqlite3.h>

namespace nncap {

namespace {

const char* kSchema = R"SQL(
CREATE TABLE IF NOT EXISTS meta (
  key TEXT PRIMARY KEY,
  value TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS snippets (
  snippet_id TEXT PRIMARY KEY,
  family TEXT NOT NULL CHECK (family <> ''),
  source_text TEXT NOT NULL CHECK (source_text <> ''),
  role_tag TEXT NOT NULL CHECK (role_tag IN ('encoder-donor', 'baseline-captioner'))
);
CREATE TABLE IF NOT EXISTS runs (
  run_id TEXT PRIMARY KEY,
  config TEXT NOT NULL,
  created_at TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS attempts (
  attempt_id TEXT PRIMARY KEY,
  run_id TEXT NOT NULL REFERENCES runs(run_id),
  family_prefix TEXT NOT NULL,
  snippet_count INTEGER NOT NULL CHECK (snippet_count >= 1),
  snippet_ids TEXT NOT NULL,
  prompt_hash TEXT NOT NULL,
  raw_output TEXT NOT NULL,
  final_source TEXT,
  repair_count INTEGER NOT NULL CHECK (repair_count >= 0),
  status TEXT NOT NULL CHECK (status IN
    ('VALID', 'SYNTAX_FAIL', 'CONTRACT_FAIL', 'RUNTIME_FAIL', 'DIVERGED', 'SUCCESS')),
  decoder_type TEXT NOT NULL CHECK (decoder_type IN ('LSTM', 'GRU', 'Transformer', 'Unknown')),
  seed INTEGER NOT NULL,
  detail TEXT NOT NULL,
  contract_report TEXT,
  repair_transcript TEXT NOT NULL,
  created_at TEXT NOT NULL,
  finished_at TEXT NOT NULL,
  UNIQUE (run_id, prompt_hash, raw_output),
  CHECK (status <> 'SUCCESS' OR final_source IS NOT NULL)
);
CREATE INDEX IF NOT EXISTS attempts_by_prefix ON attempts(family_prefix);
CREATE TABLE IF NOT EXISTS metrics (
  attempt_id TEXT NOT NULL REFERENCES attempts(attempt_id),
  epoch INTEGER NOT NULL CHECK (epoch >= 0),
  loss REAL,
  loss_nan INTEGER NOT NULL,
  bleu4 REAL CHECK (bleu4 IS NULL OR (bleu4 >= 0 AND bleu4 <= 1)),
  PRIMARY KEY (attempt_id, epoch)
);
CREATE TABLE IF NOT EXISTS exchanges (
  id INTEGER PRIMARY KEY AUTOINCREMENT,
  prompt_hash TEXT NOT NULL,
  request TEXT NOT NULL,
  response TEXT NOT NULL,
  latency_ms INTEGER NOT NULL,
  created_at TEXT NOT NULL
);
)SQL";

class Statement {
 public:
  Statement(sqlite3* db, const char* sql) : db_(db) {
    if (sqlite3_prepare_v2(db, sql, -1, &st_, nullptr) != SQLITE_OK)
      throw StoreError(std::string("prepare failed: ") + sqlite3_errmsg(db));
  }
  ~Statement() { sqlite3_finalize(st_); }
  Statement(const Statement&) = delete;
  Statement& operator=(const Statement&) = delete;

  Statement& bind(int i, const std::string& v) {
    check(sqlite3_bind_text(st_, i, v.data(), static_cast<int>(v.size()), SQLITE_TRANSIENT));
    return *this;
  }
  Statement& bind(int i, const std::optional<std::string>& v) {
    return v ? bind(i, *v) : bind_null(i);
  }
  Statement& bind(int i, std::int64_t v) {
    check(sqlite3_bind_int64(st_, i, v));
    return *this;
  }
  Statement& bind(int i, int v) { return bind(i, static_cast<std::int64_t>(v)); }
  Statement& bind(int i, std::optional<double> v) {
    check(v ? sqlite3_bind_double(st_, i, *v) : sqlite3_bind_null(st_, i));
    return *this;
  }
  Statement& bind_null(int i) {
    check(sqlite3_bind_null(st_, i));
    return *this;
  }

  // True while rows remain.
  bool step() {
    int rc = sqlite3_step(st_);
    if (rc == SQLITE_ROW) return true;
    if (rc == SQLITE_DONE) return false;
    std::string msg = sqlite3_errmsg(db_);
    if ((rc & 0xff) == SQLITE_CONSTRAINT) throw StoreError("constraint violation: " + msg);
    if ((rc & 0xff) == SQLITE_READONLY || (rc & 0xff) == SQLITE_CANTOPEN ||
        (rc & 0xff) == SQLITE_IOERR)
      throw StoreError("unwritable path: " + msg);
    throw StoreError("store error: " + msg);
  }
  void run() {
    while (step()) {
    }
  }

  std::string text(int col) const {
    auto* p = reinterpret_cast<const char*>(sqlite3_column_text(st_, col));
    return p ? std::string(p, sqlite3_column_bytes(st_, col)) : std::string();
  }
  std::optional<std::string> opt_text(int col) const {
    if (sqlite3_column_type(st_, col) == SQLITE_NULL) return std::nullopt;
    return text(col);
  }
  std::int64_t integer(int col) const { return sqlite3_column_int64(st_, col); }
  std::optional<double> opt_real(int col) const {
    if (sqlite3_column_type(st_, col) == SQLITE_NULL) return std::nullopt;
    return sqlite3_column_double(st_, col);
  }

 private:
  void check(int rc) {
    if (rc != SQLITE_OK) throw StoreError(std::string("bind failed: ") + sqlite3_errmsg(db_));
  }
  sqlite3* db_;
  sqlite3_stmt* st_ = nullptr;
};

class Transaction {
 public:
  explicit Transaction(sqlite3* db) : db_(db) { run("BEGIN IMMEDIATE"); }
  ~Transaction() {
    if (!done_) sqlite3_exec(db_, "ROLLBACK", nullptr, nullptr, nullptr);
  }
  void commit() {
    run("COMMIT");
    done_ = true;
  }

 private:
  void run(const char* sql) {
    char* err = nullptr;
    if (sqlite3_exec(db_, sql, nullptr, nullptr, &err) != SQLITE_OK) {
      std::string msg = err ? err : "unknown";
      sqlite3_free(err);
      throw StoreError(std::string(sql) + " failed: " + msg);
    }
  }
  sqlite3* db_;
  bool done_ = false;
};

std::string snippet_ids_json(const std::vector<std::string>& ids) {
  return nlohmann::json(ids).dump();
}

const char* kAttemptColumns =
    "attempt_id, run_id, family_prefix, snippet_count, snippet_ids, prompt_hash, raw_output, "
    "final_source, repair_count, status, decoder_type, seed, detail, contract_report, "
    "repair_transcript, created_at, finished_at";

AttemptRecord read_attempt(const Statement& st) {
  AttemptRecord a;
  a.attempt_id = st.text(0);
  a.run_id = st.text(1);
  a.family_prefix = st.text(2);
  a.snippet_count = static_cast<int>(st.integer(3));
  a.snippet_ids = nlohmann::json::parse(st.text(4)).get<std::vector<std::string>>();
  a.prompt_hash = st.text(5);
  a.raw_output = st.text(6);
  a.final_source = st.opt_text(7);
  a.repair_count = static_cast<int>(st.integer(8));
  a.status = status_from_string(st.text(9)).value();
  a.decoder_type = decoder_from_string(st.text(10)).value();
  a.seed = static_cast<std::uint64_t>(st.integer(11));
  a.detail = st.text(12);
  a.contract_report = st.opt_text(13);
  a.repair_transcript = st.text(14);
  a.created_at = st.text(15);
  a.finished_at = st.text(16);
  return a;
}

using SortKey = std::tuple<int, std::string, int, std::string>;

SortKey prefix_key(const std::string& prefix) {
  if (auto parts = parse_family_prefix(prefix))
    return {0, parts->base_name, parts->snippet_count, prefix};
  return {1, "", 0, prefix};
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string format_bleu(const std::optional<double>& v) {
  if (!v) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *v);
  return buf;
}

std::string aligned(const std::vector<std::vector<std::string>>& rows,
                    const std::vector<bool>& right) {
  std::vector<std::size_t> width(rows.front().size(), 0);
  for (const auto& r : rows)
    for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
  std::string out;
  for (const auto& r : rows) {
    std::string line;
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i) line += "  ";
      std::string pad(width[i] - r[i].size(), ' ');
      line += right[i] ? pad + r[i] : r[i] + pad;
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
  }
  return out;
}

}  // namespace

std::string attempt_id_for(const std::string& run_id, const std::string& prompt_hash,
                           const std::string& raw_output) {
  std::string buf = run_id;
  buf += '\0';
  buf += prompt_hash;
  buf += '\0';
  buf += raw_output;
  return sha256_hex(buf).substr(0, 32);
}

Store::Store(const std::filesystem::path& path, StoreOptions options)
    : options_(std::move(options)) {
  if (options_.max_repairs < 0) throw StoreError("max_repairs must be >= 0");
  int rc = sqlite3_open_v2(path.c_str(), &db_,
                           SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE | SQLITE_OPEN_FULLMUTEX,
                           nullptr);
  auto fail = [&](const std::string& why) {
    std::string msg = why;
    if (db_) {
      msg += std::string(": ") + sqlite3_errmsg(db_);
      sqlite3_close(db_);
      db_ = nullptr;
    }
    throw StoreError(msg);
  };
  if (rc != SQLITE_OK) fail("unwritable path " + path.string());
  if (sqlite3_db_readonly(db_, "main") == 1) fail("unwritable path " + path.string());
  sqlite3_busy_timeout(db_, 10000);
  sqlite3_extended_result_codes(db_, 1);

  // Reading the schema forces SQLite to open the file.
  int tables = 0;
  try {
    Statement st(db_, "SELECT count(*) FROM sqlite_master WHERE type = 'table'");
    if (st.step()) tables = static_cast<int>(st.integer(0));
  } catch (const StoreError&) {
    fail("unwritable path " + path.string());
  }
  if (tables > 0) {
    std::optional<std::string> version;
    try {
      Statement st(db_, "SELECT value FROM meta WHERE key = 'schema_version'");
      if (st.step()) version = st.text(0);
    } catch (const StoreError&) {
    }
    if (version != std::to_string(kSchemaVersion))
      fail("incompatible schema version " + version.value_or("(none)") + ", expected " +
           std::to_string(kSchemaVersion));
  }
  char* err = nullptr;
  for (const char* sql : {"PRAGMA journal_mode = WAL", "PRAGMA foreign_keys = ON", kSchema}) {
    if (sqlite3_exec(db_, sql, nullptr, nullptr, &err) != SQLITE_OK) {
      std::string msg = err ? err : "unknown";
      sqlite3_free(err);
      sqlite3_close(db_);
      db_ = nullptr;
      throw StoreError("unwritable path " + path.string() + ": " + msg);
    }
  }
  try {
    Statement st(db_, "INSERT OR IGNORE INTO meta(key, value) VALUES ('schema_version', ?)");
    st.bind(1, std::to_string(kSchemaVersion)).run();
  } catch (const StoreError&) {
    fail("unwritable path " + path.string());
  }
}

Store::~Store() {
  if (db_) sqlite3_close(db_);
}

void Store::exec(const char* sql) const {
  char* err = nullptr;
  if (sqlite3_exec(db_, sql, nullptr, nullptr, &err) != SQLITE_OK) {
    std::string msg = err ? err : "unknown";
    sqlite3_free(err);
    throw StoreError("store error: " + msg);
  }
}

void Store::put_snippet(const SnippetRecord& s) {
  if (s.snippet_id.empty() || s.family.empty() || s.source_text.empty())
    throw StoreError("invalid snippet: empty id, family or source");
  std::lock_guard lock(mu_);
  Transaction tx(db_);
  {
    Statement q(db_, "SELECT family, source_text, role_tag FROM snippets WHERE snippet_id = ?");
    q.bind(1, s.snippet_id);
    if (q.step()) {
      if (q.text(0) != s.family || q.text(1) != s.source_text ||
          q.text(2) != to_string(s.role_tag))
        throw StoreError("constraint violation: snippet " + s.snippet_id +
                         " already stored with different content");
      return;
    }
  }
  Statement ins(db_,
                "INSERT INTO snippets(snippet_id, family, source_text, role_tag) "
                "VALUES (?, ?, ?, ?)");
  ins.bind(1, s.snippet_id).bind(2, s.family).bind(3, s.source_text);
  ins.bind(4, std::string(to_string(s.role_tag))).run();
  tx.commit();
}

std::vector<SnippetRecord> Store::snippets() const {
  std::lock_guard lock(mu_);
  Statement q(db_,
              "SELECT snippet_id, family, source_text, role_tag FROM snippets ORDER BY snippet_id");
  std::vector<SnippetRecord> out;
  while (q.step())
    out.push_back({q.text(0), q.text(1), q.text(2), role_from_string(q.text(3)).value()});
  return out;
}

void Store::ensure_run(const std::string& run_id, const std::string& config_json) {
  if (run_id.empty()) throw StoreError("run_id must be non-empty");
  std::lock_guard lock(mu_);
  Statement st(db_, "INSERT OR IGNORE INTO runs(run_id, config, created_at) VALUES (?, ?, ?)");
  st.bind(1, run_id).bind(2, config_json).bind(3, utc_now_iso8601()).run();
}

std::vector<std::string> Store::run_ids() const {
  std::lock_guard lock(mu_);
  Statement q(db_, "SELECT run_id FROM runs ORDER BY run_id");
  std::vector<std::string> out;
  while (q.step()) out.push_back(q.text(0));
  return out;
}

std::string Store::record_attempt(AttemptRecord a) {
  if (a.run_id.empty()) throw StoreError("invalid attempt: empty run_id");
  if (a.prompt_hash.empty()) throw StoreError("invalid attempt: empty prompt_hash");
  if (a.family_prefix.empty()) throw StoreError("invalid attempt: empty family_prefix");
  if (a.snippet_count < 1) throw StoreError("invalid attempt: snippet_count must be >= 1");
  if (a.repair_count < 0 || a.repair_count > options_.max_repairs)
    throw StoreError("invalid attempt: repair_count " + std::to_string(a.repair_count) +
                     " outside 0.." + std::to_string(options_.max_repairs));
  if (a.status == AttemptStatus::Success && !a.final_source)
    throw StoreError("invalid attempt: SUCCESS requires final_source");
  if (a.attempt_id.empty()) a.attempt_id = attempt_id_for(a.run_id, a.prompt_hash, a.raw_output);
  if (a.created_at.empty()) a.created_at = utc_now_iso8601();
  if (a.finished_at.empty()) a.finished_at = a.created_at;

  std::lock_guard lock(mu_);
  Transaction tx(db_);
  {
    Statement q(db_,
                "SELECT attempt_id FROM attempts WHERE run_id = ? AND prompt_hash = ? AND "
                "raw_output = ?");
    q.bind(1, a.run_id).bind(2, a.prompt_hash).bind(3, a.raw_output);
    if (q.step()) return q.text(0);
  }
  {
    Statement q(db_, "SELECT 1 FROM attempts WHERE attempt_id = ?");
    q.bind(1, a.attempt_id);
    if (q.step())
      throw StoreError("constraint violation: duplicate attempt_id " + a.attempt_id +
                       " with differing payload");
  }
  {
    Statement r(db_, "INSERT OR IGNORE INTO runs(run_id, config, created_at) VALUES (?, '{}', ?)");
    r.bind(1, a.run_id).bind(2, a.created_at).run();
  }
  Statement ins(db_, (std::string("INSERT INTO attempts(") + kAttemptColumns +
                      ") VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)")
                         .c_str());
  ins.bind(1, a.attempt_id).bind(2, a.run_id).bind(3, a.family_prefix).bind(4, a.snippet_count);
  ins.bind(5, snippet_ids_json(a.snippet_ids)).bind(6, a.prompt_hash).bind(7, a.raw_output);
  ins.bind(8, a.final_source).bind(9, a.repair_count);
  ins.bind(10, std::string(to_string(a.status))).bind(11, std::string(to_string(a.decoder_type)));
  ins.bind(12, static_cast<std::int64_t>(a.seed)).bind(13, a.detail).bind(14, a.contract_report);
  ins.bind(15, a.repair_transcript).bind(16, a.created_at).bind(17, a.finished_at);
  ins.run();
  tx.commit();
  return a.attempt_id;
}

std::optional<AttemptRecord> Store::attempt(const std::string& attempt_id) const {
  std::lock_guard lock(mu_);
  Statement q(db_,
              (std::string("SELECT ") + kAttemptColumns + " FROM attempts WHERE attempt_id = ?")
                  .c_str());
  q.bind(1, attempt_id);
  if (!q.step()) return std::nullopt;
  return read_attempt(q);
}

std::vector<AttemptRecord> Store::attempts(const std::optional<std::string>& run_id) const {
  std::lock_guard lock(mu_);
  std::string sql = std::string("SELECT ") + kAttemptColumns + " FROM attempts";
  if (run_id) sql += " WHERE run_id = ?";
  sql += " ORDER BY attempt_id";
  Statement q(db_, sql.c_str());
  if (run_id) q.bind(1, *run_id);
  std::vector<AttemptRecord> out;
  while (q.step()) out.push_back(read_attempt(q));
  return out;
}

std::int64_t Store::attempt_count() const {
  std::lock_guard lock(mu_);
  Statement q(db_, "SELECT count(*) FROM attempts");
  q.step();
  return q.integer(0);
}

void Store::record_metric(const MetricRecord& m) {
  if (m.epoch < 0) throw StoreError("invalid metric: epoch must be >= 0");
  if (m.bleu4 && !(*m.bleu4 >= 0.0 && *m.bleu4 <= 1.0))
    throw StoreError("invalid metric: bleu4 outside [0,1]");
  bool nan = m.loss_nan || (m.loss && !std::isfinite(*m.loss));
  std::lock_guard lock(mu_);
  Transaction tx(db_);
  {
    Statement q(db_, "SELECT status FROM attempts WHERE attempt_id = ?");
    q.bind(1, m.attempt_id);
    if (!q.step()) throw StoreError("invalid metric: unknown attempt " + m.attempt_id);
    if (nan && q.text(0) != "DIVERGED")
      throw StoreError("invalid metric: NaN loss on attempt " + m.attempt_id +
                       " whose status is not DIVERGED");
  }
  Statement ins(db_,
                "INSERT INTO metrics(attempt_id, epoch, loss, loss_nan, bleu4) "
                "VALUES (?, ?, ?, ?, ?)");
  ins.bind(1, m.attempt_id).bind(2, m.epoch);
  ins.bind(3, nan ? std::nullopt : m.loss).bind(4, nan ? 1 : 0).bind(5, m.bleu4);
  ins.run();
  tx.commit();
}

std::vector<MetricRecord> Store::metrics(const std::string& attempt_id) const {
  std::lock_guard lock(mu_);
  Statement q(db_,
              "SELECT attempt_id, epoch, loss, loss_nan, bleu4 FROM metrics WHERE attempt_id = ? "
              "ORDER BY epoch");
  q.bind(1, attempt_id);
  std::vector<MetricRecord> out;
  while (q.step())
    out.push_back({q.text(0), static_cast<int>(q.integer(1)), q.opt_real(2), q.integer(3) != 0,
                   q.opt_real(4)});
  return out;
}

void Store::record_exchange(const std::string& prompt_hash, const std::string& request_json,
                            const std::string& response_json, std::int64_t latency_ms) {
  std::lock_guard lock(mu_);
  Statement ins(db_,
                "INSERT INTO exchanges(prompt_hash, request, response, latency_ms, created_at) "
                "VALUES (?, ?, ?, ?, ?)");
  ins.bind(1, prompt_hash).bind(2, request_json).bind(3, response_json).bind(4, latency_ms);
  ins.bind(5, utc_now_iso8601()).run();
}

std::int64_t Store::exchange_count() const {
  std::lock_guard lock(mu_);
  Statement q(db_, "SELECT count(*) FROM exchanges");
  q.step();
  return q.integer(0);
}

FamilySummary Store::family_summary() const {
  struct Acc {
    std::int64_t count = 0;
    std::map<DecoderType, std::int64_t> counted, all;
  };
  std::map<std::string, Acc> by_prefix;
  {
    std::lock_guard lock(mu_);
    Statement q(db_, "SELECT family_prefix, status, decoder_type FROM attempts");
    while (q.step()) {
      auto& acc = by_prefix[q.text(0)];
      auto status = status_from_string(q.text(1)).value();
      auto decoder = decoder_from_string(q.text(2)).value();
      ++acc.all[decoder];
      if (counts(status)) {
        ++acc.count;
        ++acc.counted[decoder];
      }
    }
  }
  auto mode = [](const std::map<DecoderType, std::int64_t>& m) {
    DecoderType best = DecoderType::Unknown;
    std::int64_t n = 0;
    for (const auto& [d, c] : m)
      if (c > n) best = d, n = c;
    return best;
  };
  FamilySummary out;
  for (const auto& [prefix, acc] : by_prefix) {
    out.rows.push_back({prefix, mode(acc.counted.empty() ? acc.all : acc.counted), acc.count});
    out.total += acc.count;
  }
  std::sort(out.rows.begin(), out.rows.end(), [](const FamilyRow& a, const FamilyRow& b) {
    return prefix_key(a.prefix) < prefix_key(b.prefix);
  });
  return out;
}

std::vector<BleuRow> Store::bleu_summary() const {
  std::vector<BleuRow> out;
  {
    std::lock_guard lock(mu_);
    Statement q(db_,
                "SELECT a.family_prefix, MAX(m.bleu4) FROM attempts a "
                "LEFT JOIN metrics m ON m.attempt_id = a.attempt_id GROUP BY a.family_prefix");
    while (q.step()) out.push_back({q.text(0), q.opt_real(1)});
  }
  std::sort(out.begin(), out.end(), [](const BleuRow& a, const BleuRow& b) {
    return prefix_key(a.prefix) < prefix_key(b.prefix);
  });
  return out;
}

double Store::success_rate(const std::string& run_id) const {
  std::int64_t total = 0, ok = 0;
  {
    std::lock_guard lock(mu_);
    Statement q(db_, "SELECT status FROM attempts WHERE run_id = ?");
    q.bind(1, run_id);
    while (q.step()) {
      ++total;
      if (counts(status_from_string(q.text(0)).value())) ++ok;
    }
  }
  if (total == 0) throw StoreError("unknown or empty run: " + run_id);
  return static_cast<double>(ok) / static_cast<double>(total);
}

nlohmann::json Store::dump() const {
  using nlohmann::json;
  json out;
  out["schema_version"] = kSchemaVersion;
  json snippets_j = json::array();
  for (const auto& s : snippets())
    snippets_j.push_back({{"snippet_id", s.snippet_id},
                          {"family", s.family},
                          {"source_text", s.source_text},
                          {"role_tag", to_string(s.role_tag)}});
  out["snippets"] = snippets_j;

  std::lock_guard lock(mu_);
  json runs = json::array();
  {
    Statement q(db_, "SELECT run_id, config FROM runs ORDER BY run_id");
    while (q.step()) runs.push_back({{"run_id", q.text(0)}, {"config", q.text(1)}});
  }
  out["runs"] = runs;

  json attempts_j = json::array();
  {
    Statement q(db_, (std::string("SELECT ") + kAttemptColumns +
                      " FROM attempts ORDER BY attempt_id")
                         .c_str());
    while (q.step()) {
      auto a = read_attempt(q);
      attempts_j.push_back({{"attempt_id", a.attempt_id},
                            {"run_id", a.run_id},
                            {"family_prefix", a.family_prefix},
                            {"snippet_count", a.snippet_count},
                            {"snippet_ids", a.snippet_ids},
                            {"prompt_hash", a.prompt_hash},
                            {"raw_output", a.raw_output},
                            {"final_source", a.final_source ? json(*a.final_source) : json()},
                            {"repair_count", a.repair_count},
                            {"status", to_string(a.status)},
                            {"decoder_type", to_string(a.decoder_type)},
                            {"seed", a.seed},
                            {"detail", a.detail},
                            {"contract_report",
                             a.contract_report ? json(*a.contract_report) : json()},
                            {"repair_transcript", a.repair_transcript}});
    }
  }
  out["attempts"] = attempts_j;

  json metrics_j = json::array();
  {
    Statement q(db_,
                "SELECT attempt_id, epoch, loss, loss_nan, bleu4 FROM metrics "
                "ORDER BY attempt_id, epoch");
    while (q.step()) {
      auto loss = q.opt_real(2);
      auto bleu = q.opt_real(4);
      metrics_j.push_back({{"attempt_id", q.text(0)},
                           {"epoch", q.integer(1)},
                           {"loss", loss ? json(*loss) : json()},
                           {"loss_nan", q.integer(3) != 0},
                           {"bleu4", bleu ? json(*bleu) : json()}});
    }
  }
  out["metrics"] = metrics_j;

  json exchanges = json::array();
  {
    Statement q(db_,
                "SELECT prompt_hash, request, response FROM exchanges "
                "ORDER BY prompt_hash, request, response");
    while (q.step())
      exchanges.push_back(
          {{"prompt_hash", q.text(0)}, {"request", q.text(1)}, {"response", q.text(2)}});
  }
  out["exchanges"] = exchanges;
  return out;
}

std::string to_csv(const FamilySummary& s) {
  std::string out = "prefix,decoder_type,count\n";
  for (const auto& r : s.rows)
    out += csv_field(r.prefix) + "," + std::string(to_string(r.decoder_type)) + "," +
           std::to_string(r.count) + "\n";
  out += "total,," + std::to_string(s.total) + "\n";
  return out;
}

std::string to_text(const FamilySummary& s) {
  std::vector<std::vector<std::string>> rows = {{"prefix", "decoder_type", "count"}};
  for (const auto& r : s.rows)
    rows.push_back({r.prefix, std::string(to_string(r.decoder_type)), std::to_string(r.count)});
  rows.push_back({"total", "", std::to_string(s.total)});
  return aligned(rows, {false, false, true});
}

std::string to_csv(const std::vector<BleuRow>& rows) {
  std::string out = "prefix,best_bleu4\n";
  for (const auto& r : rows) out += csv_field(r.prefix) + "," + format_bleu(r.best_bleu4) + "\n";
  return out;
}

std::string to_text(const std::vector<BleuRow>& rows) {
  std::vector<std::vector<std::string>> table = {{"prefix", "best_bleu4"}};
  for (const auto& r : rows) table.push_back({r.prefix, format_bleu(r.best_bleu4)});
  return aligned(table, {false, true});
}

}  // namespace nncap
