#include <gtest/gtest.h>

#include <cmath>
#include <thread>

#include <sqlite3.h>

#include "accounting.hpp"
#include "nncap/registry.hpp"
#include "support.hpp"

namespace nncap {
namespace {

AttemptRecord sample_attempt(const std::string& run, int i, AttemptStatus status) {
  AttemptRecord a;
  a.run_id = run;
  a.family_prefix = "C5C-RESNETLSTM";
  a.snippet_count = 5;
  a.snippet_ids = {"a", "b", "c", "d", "e"};
  a.prompt_hash = sha256_hex("p" + std::to_string(i));
  a.raw_output = "raw " + std::to_string(i);
  a.status = status;
  a.decoder_type = DecoderType::LSTM;
  if (status == AttemptStatus::Success || status == AttemptStatus::Valid)
    a.final_source = "class Net: pass\n";
  a.seed = 100 + i;
  return a;
}

void expect_store_error(const std::function<void()>& fn, const std::string& fragment) {
  try {
    fn();
    ADD_FAILURE() << "no StoreError, expected " << fragment;
  } catch (const StoreError& e) {
    EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
  }
}

TEST(Store, AttemptRoundTrip) {
  test::TempDir dir;
  Store store(dir / "s.db");
  store.ensure_run("r1", R"({"seed":1})");
  AttemptRecord a = sample_attempt("r1", 1, AttemptStatus::Valid);
  a.detail = "ok";
  a.contract_report = R"({"passed":true})";
  a.repair_count = 2;
  a.repair_transcript = R"([{"error_text":"x"}])";
  std::string id = store.record_attempt(a);
  EXPECT_EQ(id, attempt_id_for("r1", a.prompt_hash, a.raw_output));
  EXPECT_EQ(id.size(), 32u);

  auto got = store.attempt(id);
  ASSERT_TRUE(got);
  AttemptRecord want = a;
  want.attempt_id = id;
  want.created_at = got->created_at;
  want.finished_at = got->finished_at;
  EXPECT_EQ(*got, want);
  EXPECT_FALSE(got->created_at.empty());
  EXPECT_FALSE(store.attempt("nope"));
}

TEST(Store, SnippetRoundTrip) {
  test::TempDir dir;
  Store store(dir / "s.db");
  SnippetRecord s{"id1", "ResNet", "x = 1\n", RoleTag::EncoderDonor};
  store.put_snippet(s);
  store.put_snippet(s);
  ASSERT_EQ(store.snippets().size(), 1u);
  EXPECT_EQ(store.snippets()[0], s);
  s.source_text = "x = 2\n";
  expect_store_error([&] { store.put_snippet(s); }, "constraint violation");
}

TEST(Store, IdempotentOnPromptAndOutput) {
  test::TempDir dir;
  Store store(dir / "s.db");
  store.ensure_run("r1");
  auto a = sample_attempt("r1", 1, AttemptStatus::Valid);
  std::string first = store.record_attempt(a);
  a.attempt_id = "other-id";
  EXPECT_EQ(store.record_attempt(a), first);
  EXPECT_EQ(store.attempt_count(), 1);

  auto b = sample_attempt("r1", 2, AttemptStatus::Valid);
  b.attempt_id = first;
  expect_store_error([&] { store.record_attempt(b); }, "constraint violation");
}

TEST(Store, RejectsInvalidAttempts) {
  test::TempDir dir;
  Store store(dir / "s.db");
  store.ensure_run("r1");
  auto a = sample_attempt("r1", 1, AttemptStatus::ContractFail);
  a.repair_count = 3;
  expect_store_error([&] { store.record_attempt(a); }, "repair_count");

  auto s = sample_attempt("r1", 2, AttemptStatus::Success);
  s.final_source.reset();
  expect_store_error([&] { store.record_attempt(s); }, "final_source");

  auto e = sample_attempt("", 3, AttemptStatus::Valid);
  expect_store_error([&] { store.record_attempt(e); }, "run_id");
  EXPECT_EQ(store.attempt_count(), 0);
}

TEST(Store, RepairLimitFollowsOptions) {
  test::TempDir dir;
  Store store(dir / "s.db", StoreOptions{3});
  store.ensure_run("r1");
  auto a = sample_attempt("r1", 1, AttemptStatus::ContractFail);
  a.repair_count = 3;
  EXPECT_NO_THROW(store.record_attempt(a));
}

TEST(Store, MetricRules) {
  test::TempDir dir;
  Store store(dir / "s.db");
  store.ensure_run("r1");
  std::string ok = store.record_attempt(sample_attempt("r1", 1, AttemptStatus::Success));
  auto d = sample_attempt("r1", 2, AttemptStatus::Diverged);
  d.final_source = "x\n";
  std::string diverged = store.record_attempt(d);

  expect_store_error([&] { store.record_metric({ok, 0, std::nan(""), false, {}}); }, "NaN");
  expect_store_error([&] { store.record_metric({ok, 0, {}, true, {}}); }, "NaN");
  expect_store_error([&] { store.record_metric({ok, 1, 1.0, false, 1.5}); }, "bleu4");
  expect_store_error([&] { store.record_metric({"missing", 1, 1.0, false, {}}); }, "unknown");

  store.record_metric({ok, 1, 2.5, false, 0.1192});
  store.record_metric({diverged, 0, std::nan(""), false, {}});
  auto m = store.metrics(diverged);
  ASSERT_EQ(m.size(), 1u);
  EXPECT_TRUE(m[0].loss_nan);
  EXPECT_FALSE(m[0].loss);
  EXPECT_EQ(store.metrics(ok), (std::vector<MetricRecord>{{ok, 1, 2.5, false, 0.1192}}));
}

TEST(Store, SuccessRate) {
  test::TempDir dir;
  Store store(dir / "s.db");
  store.ensure_run("four");
  store.ensure_run("three");
  for (int i = 0; i < 5; ++i) {
    store.record_attempt(sample_attempt(
        "four", i, i < 4 ? AttemptStatus::Success : AttemptStatus::ContractFail));
    store.record_attempt(sample_attempt(
        "three", i, i < 3 ? AttemptStatus::Valid : AttemptStatus::SyntaxFail));
  }
  EXPECT_DOUBLE_EQ(store.success_rate("four"), 0.8);
  EXPECT_DOUBLE_EQ(store.success_rate("three"), 0.6);
  store.ensure_run("empty");
  expect_store_error([&] { store.success_rate("empty"); }, "unknown or empty run");
  expect_store_error([&] { store.success_rate("absent"); }, "unknown or empty run");
}

TEST(Store, FamilySummaryCounts) {
  test::TempDir dir;
  Store store(dir / "s.db");
  test::seed_family_counts(store);
  FamilySummary s = store.family_summary();
  auto table = test::family_counts();
  ASSERT_EQ(s.rows.size(), table.size());
  for (std::size_t i = 0; i < table.size(); ++i) {
    EXPECT_EQ(s.rows[i].prefix, table[i].prefix);
    EXPECT_EQ(s.rows[i].decoder_type, table[i].decoder) << table[i].prefix;
    EXPECT_EQ(s.rows[i].count, table[i].models) << table[i].prefix;
  }
  EXPECT_EQ(s.total, 357);

  std::string csv = to_csv(s);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "prefix,decoder_type,count");
  EXPECT_NE(csv.find("C5C-ResNetTransformer,Transformer,250\n"), std::string::npos);
  EXPECT_NE(csv.find("total,,357"), std::string::npos);
  EXPECT_NE(to_text(s).find("357"), std::string::npos);
}

TEST(Store, BleuSummaryKeepsBestPerFamily) {
  test::TempDir dir;
  Store store(dir / "s.db");
  store.ensure_run("r");
  auto table = nlohmann::json::parse(test::read_file(test::kFixtures / "accounting" / "family_bleu.json"));
  int i = 0;
  for (const auto& row : table) {
    for (double scale : {1.0, 0.5}) {
      auto a = sample_attempt("r", i++, AttemptStatus::Success);
      a.family_prefix = row.at("prefix");
      std::string id = store.record_attempt(a);
      store.record_metric({id, 3, 1.0, false, row.at("bleu4").get<double>() * scale});
    }
  }
  auto rows = store.bleu_summary();
  ASSERT_EQ(rows.size(), table.size());
  std::map<std::string, double> best;
  for (const auto& r : rows) best[r.prefix] = r.best_bleu4.value();
  for (const auto& row : table) EXPECT_DOUBLE_EQ(best.at(row.at("prefix")), row.at("bleu4").get<double>());
  EXPECT_NE(to_csv(rows).find("C5C-RESNETLSTM,0.1192"), std::string::npos);
}

TEST(Store, UnwritablePath) {
  expect_store_error([] { Store s("/proc/nncap-no-such-dir/store.db"); }, "unwritable path");
}

TEST(Store, IncompatibleSchemaVersion) {
  test::TempDir dir;
  auto path = dir / "s.db";
  { Store s(path); }
  sqlite3* db = nullptr;
  ASSERT_EQ(sqlite3_open(path.c_str(), &db), SQLITE_OK);
  ASSERT_EQ(sqlite3_exec(db, "UPDATE meta SET value = '99' WHERE key = 'schema_version'", nullptr,
                         nullptr, nullptr),
            SQLITE_OK);
  sqlite3_close(db);
  expect_store_error([&] { Store s(path); }, "incompatible schema version 99, expected 1");
}

TEST(Store, ReopenKeepsContent) {
  test::TempDir dir;
  auto path = dir / "s.db";
  nlohmann::json before;
  {
    Store s(path);
    test::seed_family_counts(s);
    before = s.dump();
  }
  Store s(path);
  EXPECT_EQ(s.dump(), before);
  EXPECT_EQ(s.family_summary().total, 357);
}

TEST(Store, DumpOmitsTimestamps) {
  test::TempDir dir;
  Store a(dir / "a.db"), b(dir / "b.db");
  for (Store* s : {&a, &b}) {
    s->ensure_run("r", "{}");
    s->record_attempt(sample_attempt("r", 1, AttemptStatus::Valid));
    s->record_exchange("h", "{}", "{}", 12);
  }
  std::this_thread::sleep_for(std::chrono::milliseconds(5));
  b.record_exchange("h", "{}", "{}", 99);
  a.record_exchange("h", "{}", "{}", 1);
  EXPECT_EQ(a.dump(), b.dump());
  EXPECT_EQ(a.dump().dump().find("created_at"), std::string::npos);
}

TEST(Store, ConcurrentWriters) {
  test::TempDir dir;
  Store store(dir / "s.db");
  store.ensure_run("r");
  std::vector<std::jthread> threads;
  for (int t = 0; t < 4; ++t)
    threads.emplace_back([&, t] {
      for (int i = 0; i < 25; ++i)
        store.record_attempt(sample_attempt("r", t * 100 + i, AttemptStatus::Valid));
    });
  threads.clear();
  EXPECT_EQ(store.attempt_count(), 100);
}

TEST(Store, TwoHandlesOnOneFile) {
  test::TempDir dir;
  auto path = dir / "s.db";
  Store a(path), b(path);
  a.ensure_run("r");
  a.record_attempt(sample_attempt("r", 1, AttemptStatus::Valid));
  b.record_attempt(sample_attempt("r", 2, AttemptStatus::Valid));
  EXPECT_EQ(a.attempt_count(), 2);
  EXPECT_EQ(b.run_ids(), std::vector<std::string>{"r"});
}

}  // namespace
}  // namespace nncap
