#include "nncap/prompt.hpp"

#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "default_template.hpp"
#include "nncap/pysyntax.hpp"

namespace nncap {

namespace {

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw PromptError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Uniform integer in [0, bound) from raw 64-bit draws.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

struct Sections {
  std::string system, rules, payload;
};

Sections split_sections(const std::string& text) {
  Sections out;
  std::string* cur = nullptr;
  bool seen[3] = {false, false, false};
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line == "[system]" || line == "[rules]" || line == "[payload]") {
      int idx = line == "[system]" ? 0 : line == "[rules]" ? 1 : 2;
      if (seen[idx]) throw PromptError("template section repeated: " + line);
      seen[idx] = true;
      cur = idx == 0 ? &out.system : idx == 1 ? &out.rules : &out.payload;
      continue;
    }
    if (!cur) {
      if (line.empty()) continue;
      throw PromptError("template text before first section");
    }
    *cur += line;
    *cur += '\n';
  }
  if (!seen[0] || !seen[1] || !seen[2])
    throw PromptError("template needs [system], [rules] and [payload] sections");
  return out;
}

std::string chomp(std::string s) {
  while (!s.empty() && s.back() == '\n') s.pop_back();
  return s;
}

std::size_t count_occurrences(const std::string& hay, const std::string& needle) {
  if (needle.empty()) return 0;
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) ++n;
  return n;
}

}  // namespace

std::string builtin_template(const std::string& rules_version) {
  if (rules_version != kDefaultRulesVersion)
    throw PromptError("no built-in template for rules version " + rules_version);
  return detail::kDefaultTemplate;
}

std::vector<SnippetRecord> load_pool(const std::filesystem::path& dir) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_file(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw PromptError("bad pool manifest: " + std::string(e.what()));
  }
  if (!manifest.is_array()) throw PromptError("pool manifest must be an array");
  std::vector<SnippetRecord> pool;
  std::set<std::string> ids;
  for (const auto& entry : manifest) {
    SnippetRecord r;
    try {
      r.snippet_id = entry.at("snippet_id").get<std::string>();
      r.family = entry.at("family").get<std::string>();
      auto role = role_from_string(entry.value("role_tag", "encoder-donor"));
      if (!role) throw PromptError("unknown role_tag for " + r.snippet_id);
      r.role_tag = *role;
      r.source_text = read_file(dir / entry.at("file").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw PromptError("bad pool manifest entry: " + std::string(e.what()));
    }
    if (r.source_text.empty() || r.family.empty() || r.snippet_id.empty())
      throw PromptError("pool entry with empty id, family or source");
    if (!ids.insert(r.snippet_id).second) throw PromptError("duplicate snippet_id " + r.snippet_id);
    pool.push_back(std::move(r));
  }
  return pool;
}

std::vector<SnippetRecord> sample_snippets(const std::vector<SnippetRecord>& pool, int n,
                                           const std::set<std::string>& excluded_families,
                                           std::uint64_t seed) {
  if (n < 1) throw PromptError("snippet count must be >= 1");
  std::vector<SnippetRecord> eligible;
  for (const auto& s : pool)
    if (s.role_tag == RoleTag::EncoderDonor && !excluded_families.count(s.family))
      eligible.push_back(s);
  if (eligible.size() < static_cast<std::size_t>(n))
    throw PromptError("insufficient eligible pool: need " + std::to_string(n) + ", have " +
                      std::to_string(eligible.size()));
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i) {
    std::size_t j = i + bounded(rng, eligible.size() - i);
    std::swap(eligible[i], eligible[j]);
  }
  eligible.resize(n);
  return eligible;
}

std::string prompt_hash(const std::string& system_message, const std::string& user_message) {
  std::string buf = system_message;
  buf += '\0';
  buf += user_message;
  return sha256_hex(buf);
}

std::string PromptText::hash() const { return prompt_hash(system_message, user_message); }

std::string render_template(const std::string& text,
                            const std::vector<std::pair<std::string, std::string>>& vars) {
  std::string out;
  std::size_t pos = 0;
  while (true) {
    auto open = text.find("{{", pos);
    if (open == std::string::npos) break;
    auto close = text.find("}}", open + 2);
    if (close == std::string::npos) break;
    std::string name = text.substr(open + 2, close - open - 2);
    auto b = name.find_first_not_of(' '), e = name.find_last_not_of(' ');
    name = b == std::string::npos ? "" : name.substr(b, e - b + 1);
    const std::string* value = nullptr;
    for (const auto& [k, v] : vars)
      if (k == name) value = &v;
    if (!value) throw PromptError("unresolved template variable: " + name);
    out.append(text, pos, open - pos);
    out += *value;
    pos = close + 2;
  }
  out.append(text, pos, std::string::npos);
  return out;
}

PromptText assemble_prompt(const PromptSpec& spec) {
  if (!(spec.temperature > 0)) throw PromptError("temperature must be > 0");
  if (spec.base_name.empty()) throw PromptError("base_name must be non-empty");
  try {
    py::parse(spec.baseline_source);
  } catch (const py::SyntaxError& e) {
    throw PromptError("baseline fails to parse: line " + std::to_string(e.location().line) +
                      ": " + e.message());
  }

  auto chosen =
      sample_snippets(spec.snippet_pool, spec.snippet_count, spec.excluded_families, spec.seed);

  PromptText out;
  out.family_prefix = family_prefix(spec.snippet_count, spec.base_name);

  std::string snippets;
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    const auto& s = chosen[i];
    out.snippet_manifest.push_back(s.snippet_id);
    snippets += "### Snippet " + std::to_string(i + 1) + ": " + s.family + " (" + s.snippet_id +
                ")\n```python\n" + s.source_text;
    if (s.source_text.back() != '\n') snippets += '\n';
    snippets += "```\n\n";
  }

  Sections sec = split_sections(spec.template_text ? *spec.template_text
                                                   : builtin_template(spec.rules_version));
  std::vector<std::pair<std::string, std::string>> vars = {
      {"rules_version", spec.rules_version},
      {"base_name", spec.base_name},
      {"family_prefix", out.family_prefix},
      {"snippet_count", std::to_string(spec.snippet_count)},
      {"baseline_source", chomp(spec.baseline_source)},
      {"snippets", snippets},
  };
  out.system_message = chomp(render_template(sec.system, vars));
  out.rules_text = render_template(sec.rules, vars);
  out.user_message = out.rules_text + render_template(sec.payload, vars);

  for (const auto& s : chosen)
    if (count_occurrences(out.user_message, s.source_text) != 1)
      out.warnings.push_back("snippet " + s.snippet_id +
                             " source does not occur exactly once in the prompt");
  if (spec.max_chars && out.system_message.size() + out.user_message.size() > *spec.max_chars)
    out.warnings.push_back("prompt exceeds max_chars (" +
                           std::to_string(out.system_message.size() + out.user_message.size()) +
                           " > " + std::to_string(*spec.max_chars) + ")");
  return out;
}

}  // namespace nncap
