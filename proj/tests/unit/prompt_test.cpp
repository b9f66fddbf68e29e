#include <gtest/gtest.h>

#include "nncap/pysyntax.hpp"
#include "nncap/prompt.hpp"
#include "support.hpp"

namespace nncap {
namespace {

std::size_t occurrences(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
  return n;
}

PromptSpec default_spec(int n = 5, std::uint64_t seed = 7) {
  PromptSpec spec;
  spec.baseline_source = test::read_file(test::kAssets / "baseline" / "resnet_lstm.py");
  spec.snippet_pool = load_pool(test::kAssets / "pool");
  spec.excluded_families = {"ResNet"};
  spec.snippet_count = n;
  spec.seed = seed;
  spec.base_name = "RESNETLSTM";
  return spec;
}

std::vector<SnippetRecord> synthetic_pool(int eligible) {
  std::vector<SnippetRecord> pool;
  for (int i = 0; i < eligible; ++i)
    pool.push_back({"s" + std::to_string(i), "Fam" + std::to_string(i), "x = " + std::to_string(i),
                    RoleTag::EncoderDonor});
  pool.push_back({"excluded", "ResNet", "y = 1", RoleTag::EncoderDonor});
  pool.push_back({"base", "Captioner", "z = 1", RoleTag::BaselineCaptioner});
  return pool;
}

TEST(FamilyPrefix, KnownFamilyNames) {
  EXPECT_EQ(family_prefix(10, "RESNETLSTM"), "C10C-RESNETLSTM");
  EXPECT_EQ(family_prefix(1, "RESNETLSTM"), "C1C-RESNETLSTM");
  EXPECT_EQ(family_prefix(8, "ResNetTransformer"), "C8C-ResNetTransformer");
  EXPECT_THROW(family_prefix(0, "X"), std::invalid_argument);
  EXPECT_THROW(family_prefix(1, ""), std::invalid_argument);
  auto parts = parse_family_prefix("C5C-ResNetTransformer");
  ASSERT_TRUE(parts);
  EXPECT_EQ(parts->snippet_count, 5);
  EXPECT_EQ(parts->base_name, "ResNetTransformer");
  EXPECT_FALSE(parse_family_prefix("C5-X"));
}

TEST(SampleSnippets, DistinctAndOutsideExcludedFamily) {
  auto pool = synthetic_pool(12);
  auto picked = sample_snippets(pool, 5, {"ResNet"}, 7);
  ASSERT_EQ(picked.size(), 5u);
  std::set<std::string> ids;
  for (const auto& s : picked) {
    ids.insert(s.snippet_id);
    EXPECT_NE(s.family, "ResNet");
    EXPECT_EQ(s.role_tag, RoleTag::EncoderDonor);
  }
  EXPECT_EQ(ids.size(), 5u);
  EXPECT_EQ(sample_snippets(pool, 5, {"ResNet"}, 7), picked);
}

TEST(SampleSnippets, InsufficientPool) {
  auto pool = synthetic_pool(12);
  EXPECT_NO_THROW(sample_snippets(pool, 12, {"ResNet"}, 1));
  EXPECT_THROW(sample_snippets(pool, 13, {"ResNet"}, 1), PromptError);
  EXPECT_THROW(sample_snippets(pool, 0, {}, 1), PromptError);
}

TEST(SampleSnippets, SeedsSpreadOverPool) {
  auto pool = synthetic_pool(12);
  std::set<std::string> seen;
  for (std::uint64_t seed = 0; seed < 50; ++seed)
    for (const auto& s : sample_snippets(pool, 3, {"ResNet"}, seed)) seen.insert(s.snippet_id);
  EXPECT_EQ(seen.size(), 12u);
}

TEST(AssemblePrompt, PrefixAndDeterminism) {
  auto spec = default_spec();
  spec.base_name = "ResNetTransformer";
  PromptText a = assemble_prompt(spec);
  PromptText b = assemble_prompt(spec);
  EXPECT_EQ(a.family_prefix, "C5C-ResNetTransformer");
  EXPECT_EQ(a.user_message, b.user_message);
  EXPECT_EQ(a.system_message, b.system_message);
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_EQ(a.hash(), prompt_hash(a.system_message, a.user_message));
  EXPECT_EQ(a.hash().size(), 64u);
}

TEST(AssemblePrompt, QuotedFragmentsPresent) {
  PromptText p = assemble_prompt(default_spec());
  std::string all = p.system_message + "\n" + p.user_message;
  for (const char* fragment : {
           "Your task is to generate a high-performance image captioning model by taking "
           "inspiration from classification model code blocks, and by making safe, meaningful "
           "structural tweaks to the target captioning model.",
           "Remove the classification head from the chosen classification blocks. Keep the "
           "convolutional backbone for the encoder.",
           "YOU decide which decoder architecture best suits your chosen encoder",
           "use either nn.LSTM/GRU or nn.TransformerDecoder",
           "def __init__(self, in_shape, out_shape, prm, device)",
           "[B, T-1, vocab_size]",
           "inputs = captions[:, :-1]",
           "ignore_index=0, label_smoothing=0.1",
           "Safe edits only",
           "Diversity requirements",
           "larger hidden sizes and multi-head attention generally improve BLEU",
           "keep dropout modest",
           "nn.SelfAttention",
       })
    EXPECT_NE(all.find(fragment), std::string::npos) << fragment;
  // The baseline source in the payload defines the same set, so only the
  // instruction part is counted.
  EXPECT_EQ(occurrences(p.rules_text, "{'lr', 'momentum'}"), 1u);
  auto api = p.rules_text.find("## Mandatory API");
  ASSERT_NE(api, std::string::npos);
  EXPECT_GT(p.rules_text.find("{'lr', 'momentum'}"), api);
  EXPECT_EQ(p.user_message.find(p.rules_text), 0u);
}

TEST(AssemblePrompt, SnippetContainment) {
  auto spec = default_spec();
  PromptText p = assemble_prompt(spec);
  ASSERT_EQ(p.snippet_manifest.size(), 5u);
  std::set<std::string> chosen(p.snippet_manifest.begin(), p.snippet_manifest.end());
  for (const auto& s : spec.snippet_pool) {
    if (s.role_tag != RoleTag::EncoderDonor) continue;
    std::size_t n = occurrences(p.user_message, s.source_text);
    if (chosen.count(s.snippet_id))
      EXPECT_EQ(n, 1u) << s.snippet_id;
    else
      EXPECT_EQ(n, 0u) << s.snippet_id;
  }
  EXPECT_TRUE(p.warnings.empty());
}

TEST(AssemblePrompt, TenSnippetsMakeALongerPrompt) {
  for (std::uint64_t seed : {0ull, 7ull, 99ull}) {
    auto five = assemble_prompt(default_spec(5, seed));
    auto ten = assemble_prompt(default_spec(10, seed));
    EXPECT_GT(ten.user_message.size(), five.user_message.size()) << seed;
    EXPECT_EQ(ten.family_prefix, "C10C-RESNETLSTM");
  }
}

TEST(AssemblePrompt, MaxCharsOnlyWarns) {
  auto spec = default_spec();
  spec.max_chars = 100;
  PromptText p = assemble_prompt(spec);
  ASSERT_EQ(p.warnings.size(), 1u);
  EXPECT_NE(p.warnings[0].find("max_chars"), std::string::npos);
}

TEST(AssemblePrompt, Errors) {
  auto spec = default_spec();
  spec.baseline_source = "class Net(:\n";
  EXPECT_THROW(assemble_prompt(spec), PromptError);

  spec = default_spec();
  spec.temperature = 0;
  EXPECT_THROW(assemble_prompt(spec), PromptError);

  spec = default_spec();
  spec.rules_version = "nncap-rules/0";
  EXPECT_THROW(assemble_prompt(spec), PromptError);

  spec = default_spec();
  spec.template_text = "[system]\nx\n[rules]\n{{missing}}\n[payload]\n";
  EXPECT_THROW(assemble_prompt(spec), PromptError);
}

TEST(RenderTemplate, SinglePass) {
  EXPECT_EQ(render_template("a {{x}} b", {{"x", "{{y}}"}, {"y", "no"}}), "a {{y}} b");
  EXPECT_THROW(render_template("{{z}}", {}), PromptError);
}

TEST(Pool, ShippedPoolIsValid) {
  auto pool = load_pool(test::kAssets / "pool");
  int donors = 0;
  for (const auto& s : pool) {
    donors += s.role_tag == RoleTag::EncoderDonor;
    EXPECT_NO_THROW(py::parse(s.source_text)) << s.snippet_id;
  }
  EXPECT_GE(donors, 11);
}

}  // namespace
}  // namespace nncap
