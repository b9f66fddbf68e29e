#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "nncap/types.hpp"

namespace nncap {

class PromptError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kDefaultRulesVersion = "nncap-rules/1";

// Template text for a rules version. Throws PromptError for unknown versions.
std::string builtin_template(const std::string& rules_version);

// Loads a snippet pool from a directory holding manifest.json, an array of
// {"file", "snippet_id", "family", "role_tag"} objects. Order is preserved.
std::vector<SnippetRecord> load_pool(const std::filesystem::path& dir);

// Draws n distinct encoder-donor snippets outside `excluded_families`.
// Partial Fisher-Yates over the eligible pool in stored order, driven by
// std::mt19937_64(seed) with rejection sampling for the index bound.
std::vector<SnippetRecord> sample_snippets(const std::vector<SnippetRecord>& pool, int n,
                                           const std::set<std::string>& excluded_families,
                                           std::uint64_t seed);

struct PromptSpec {
  std::string baseline_source;
  int snippet_count = 5;
  std::vector<SnippetRecord> snippet_pool;
  std::set<std::string> excluded_families;
  std::uint64_t seed = 0;
  std::string rules_version = kDefaultRulesVersion;
  double temperature = 0.8;
  std::string base_name;
  // Overrides the built-in template for rules_version when set.
  std::optional<std::string> template_text;
  // Exceeding this produces a warning only.
  std::optional<std::size_t> max_chars;
};

struct PromptText {
  std::string system_message;
  std::string user_message;
  std::vector<std::string> snippet_manifest;
  std::string family_prefix;
  // The instruction part of user_message, reused by repair prompts.
  std::string rules_text;
  std::vector<std::string> warnings;

  // sha256 over system_message, a NUL byte and user_message.
  std::string hash() const;
};

std::string prompt_hash(const std::string& system_message, const std::string& user_message);

// Renders `{{name}}` placeholders in a single pass; substituted values are
// not rescanned. Throws PromptError on an unresolved name.
std::string render_template(const std::string& text,
                            const std::vector<std::pair<std::string, std::string>>& vars);

PromptText assemble_prompt(const PromptSpec& spec);

}  // namespace nncap
