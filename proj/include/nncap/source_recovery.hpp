#pragma once

// Recovery of a candidate Python source from raw model output: fenced-block
// extraction, block selection and the ordered fix-up passes that end in a
// syntax gate.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace nncap {

struct FencedBlock {
  std::string info;   // info string after the opening fence ("python"), may be empty
  std::string text;   // block body, or the whole input for the fallback entry
  bool fenced = true; // false for the whole-text fallback
};

// All maximal fenced blocks in document order. Fences are runs of three or
// more backticks or tildes; a closing fence uses the same character, is at
// least as long and carries no info string. An unterminated block runs to
// EOF. With no fences at all, a single whole-text fallback entry is returned.
std::vector<FencedBlock> extract_blocks(std::string_view raw);

// True when `text` declares a class named Net at the start of some line.
bool declares_net(std::string_view text);

// Prefers Net-declaring blocks; longest wins, then the earliest.
// Precondition: blocks non-empty.
const FencedBlock& select_candidate(const std::vector<FencedBlock>& blocks);

// Removes <think>...</think> spans. An unclosed opening tag removes to EOF and
// orphan closing tags are dropped.
std::string strip_think_segments(std::string_view text);

// Drops fence lines (``` or ~~~) that sit outside string literals.
std::string strip_residual_fences(std::string_view text);

struct ImportPolicy {
  std::vector<std::string> required = {"import torch", "import torch.nn as nn"};
};

// Every required import line is present exactly once; missing ones are
// inserted at the top (after a shebang, encoding line or __future__ imports)
// and later duplicates removed.
std::string normalize_imports(std::string_view text, const ImportPolicy& policy = {});

inline constexpr std::string_view kCanonicalHyperparameters =
    "def supported_hyperparameters():\n    return {'lr', 'momentum'}\n";

// Rewrites every top-level supported_hyperparameters definition that does not
// return exactly {'lr', 'momentum'}; inserts the canonical definition after
// the import header when none exists.
std::string enforce_hyperparameters(std::string_view text);

struct BalanceResult {
  std::string text;
  std::string appended;           // closers added at EOF, in order
  std::vector<int> unmatched_closer_lines;
  bool skipped_unterminated = false;  // EOF inside a triple-quoted string
};

// Closes unmatched (, [ and { at EOF in nesting order, ignoring brackets in
// string literals and comments. Unmatched closers are reported, not fixed.
BalanceResult balance_brackets(std::string_view text);

struct SyntaxFailure {
  int line = 0;
  int column = 0;
  std::string message;
};

// nullopt when the text parses.
std::optional<SyntaxFailure> syntax_check(std::string_view text);

struct PassEntry {
  std::string pass;
  bool changed = false;
  std::string detail;
};

enum class SourceOrigin { FencedBlock, WholeTextFallback };

struct CandidateSource {
  std::string text;
  std::vector<PassEntry> pass_log;
  SourceOrigin origin = SourceOrigin::WholeTextFallback;
  std::optional<SyntaxFailure> syntax;  // set when the final syntax gate failed

  bool parses() const { return !syntax.has_value(); }
};

// Pass names in execution order, as they appear in CandidateSource::pass_log.
const std::vector<std::string>& sanitize_pass_names();

// extract_blocks -> select_candidate -> strip_think_segments ->
// strip_residual_fences -> normalize_imports -> enforce_hyperparameters ->
// balance_brackets -> syntax_check.
CandidateSource sanitize(std::string_view raw, const ImportPolicy& policy = {});

}  // namespace nncap
