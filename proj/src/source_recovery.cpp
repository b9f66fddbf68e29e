#include "nncap/source_recovery.hpp"

#include <algorithm>
#include <map>
#include <cctype>

#include "nncap/pysyntax.hpp"

namespace nncap {

namespace {

struct Line {
  std::size_t begin = 0;  // offset of first byte
  std::size_t end = 0;    // offset one past the last byte, excluding '\n'
  std::size_t next = 0;   // offset of the following line
};

std::vector<Line> split_lines(std::string_view text) {
  std::vector<Line> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) {
      lines.push_back({pos, text.size(), text.size()});
      break;
    }
    lines.push_back({pos, nl, nl + 1});
    pos = nl + 1;
  }
  return lines;
}

std::string_view rstrip(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string_view lstrip(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

struct Fence {
  char ch = 0;
  std::size_t length = 0;
  std::string info;
};

std::optional<Fence> parse_fence(std::string_view line) {
  std::string_view s = lstrip(rstrip(line));
  if (s.size() < 3 || (s[0] != '`' && s[0] != '~')) return std::nullopt;
  Fence f;
  f.ch = s[0];
  while (f.length < s.size() && s[f.length] == f.ch) ++f.length;
  if (f.length < 3) return std::nullopt;
  std::string_view info = lstrip(s.substr(f.length));
  if (f.ch == '`' && info.find('`') != std::string_view::npos) return std::nullopt;
  f.info = std::string(info);
  return f;
}

bool is_closer(char c) { return c == ')' || c == ']' || c == '}'; }

// A line that starts a new top-level statement: code at column 0 that is not
// a comment and not a continuation of a bracketed or string construct.
bool starts_top_level(std::string_view text, const py::Classification& cls, const Line& line,
                      bool prev_continues) {
  if (prev_continues || line.begin >= line.end) return false;
  char c = text[line.begin];
  if (cls.classes[line.begin] != py::CharClass::Code) return false;
  return !std::isspace(static_cast<unsigned char>(c)) && c != '#' && !is_closer(c);
}

bool ends_with_backslash(std::string_view text, const py::Classification& cls, const Line& line) {
  std::string_view s = rstrip(text.substr(line.begin, line.end - line.begin));
  return !s.empty() && s.back() == '\\' &&
         cls.classes[line.begin + s.size() - 1] == py::CharClass::Code;
}

bool is_blank_or_comment(std::string_view text, const Line& line) {
  std::string_view s = lstrip(text.substr(line.begin, line.end - line.begin));
  s = rstrip(s);
  return s.empty() || s.front() == '#';
}

bool starts_with_word(std::string_view s, std::string_view word) {
  if (s.substr(0, word.size()) != word) return false;
  return s.size() == word.size() || !(std::isalnum(static_cast<unsigned char>(s[word.size()])) ||
                                      s[word.size()] == '_');
}

}  // namespace

std::vector<FencedBlock> extract_blocks(std::string_view raw) {
  std::vector<FencedBlock> blocks;
  auto lines = split_lines(raw);
  std::optional<Fence> open;
  FencedBlock current;
  for (const Line& line : lines) {
    std::string_view body = raw.substr(line.begin, line.next - line.begin);
    auto fence = parse_fence(raw.substr(line.begin, line.end - line.begin));
    if (!open) {
      if (fence) {
        open = fence;
        current = FencedBlock{fence->info, {}, true};
      }
      continue;
    }
    if (fence && fence->ch == open->ch && fence->length >= open->length && fence->info.empty()) {
      blocks.push_back(std::move(current));
      open.reset();
      continue;
    }
    current.text.append(body);
  }
  if (open) blocks.push_back(std::move(current));
  if (blocks.empty()) blocks.push_back(FencedBlock{{}, std::string(raw), false});
  return blocks;
}

bool declares_net(std::string_view text) {
  for (const Line& line : split_lines(text)) {
    std::string_view s = lstrip(text.substr(line.begin, line.end - line.begin));
    if (!starts_with_word(s, "class")) continue;
    s = lstrip(s.substr(5));
    if (starts_with_word(s, "Net")) return true;
  }
  return false;
}

const FencedBlock& select_candidate(const std::vector<FencedBlock>& blocks) {
  const FencedBlock* best = nullptr;
  bool best_net = false;
  for (const auto& b : blocks) {
    bool net = declares_net(b.text);
    if (best == nullptr || (net && !best_net) ||
        (net == best_net && b.text.size() > best->text.size())) {
      best = &b;
      best_net = net;
    }
  }
  return *best;
}

std::string strip_think_segments(std::string_view text) {
  static constexpr std::string_view open_tag = "<think>";
  static constexpr std::string_view close_tag = "</think>";
  std::string out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t open = text.find(open_tag, pos);
    std::size_t close = text.find(close_tag, pos);
    if (close != std::string_view::npos && (open == std::string_view::npos || close < open)) {
      out.append(text.substr(pos, close - pos));  // orphan closing tag
      pos = close + close_tag.size();
      continue;
    }
    if (open == std::string_view::npos) {
      out.append(text.substr(pos));
      break;
    }
    out.append(text.substr(pos, open - pos));
    std::size_t end = text.find(close_tag, open + open_tag.size());
    if (end == std::string_view::npos) break;
    pos = end + close_tag.size();
  }
  return out;
}

std::string strip_residual_fences(std::string_view text) {
  auto cls = py::classify(text);
  std::string out;
  for (const Line& line : split_lines(text)) {
    std::string_view content = text.substr(line.begin, line.end - line.begin);
    std::string_view s = lstrip(content);
    std::size_t first = line.begin + (content.size() - s.size());
    if (first < line.end && cls.classes[first] == py::CharClass::Code && parse_fence(content))
      continue;
    out.append(text.substr(line.begin, line.next - line.begin));
  }
  return out;
}

std::string normalize_imports(std::string_view text, const ImportPolicy& policy) {
  auto cls = py::classify(text);
  auto lines = split_lines(text);
  std::vector<bool> seen(policy.required.size(), false);
  std::vector<std::size_t> first_line(policy.required.size(), 0);
  std::vector<bool> drop(lines.size(), false);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const Line& line = lines[i];
    if (line.begin >= line.end || cls.classes[line.begin] != py::CharClass::Code) continue;
    std::string_view content = rstrip(text.substr(line.begin, line.end - line.begin));
    for (std::size_t r = 0; r < policy.required.size(); ++r) {
      if (content != policy.required[r]) continue;
      if (seen[r]) drop[i] = true;
      else first_line[r] = i;
      seen[r] = true;
    }
  }
  // Header lines that must stay first: shebang, encoding cookie, __future__.
  std::size_t insert_line = 0;
  while (insert_line < lines.size()) {
    std::string_view content =
        text.substr(lines[insert_line].begin, lines[insert_line].end - lines[insert_line].begin);
    bool header = (insert_line == 0 && content.substr(0, 2) == "#!") ||
                  (insert_line < 2 && content.substr(0, 1) == "#" &&
                   content.find("coding") != std::string_view::npos) ||
                  content.substr(0, 22) == "from __future__ import";
    if (!header) break;
    ++insert_line;
  }
  // A missing line goes right after the nearest earlier required line that is
  // present, otherwise below the header.
  std::string at_header;
  std::map<std::size_t, std::string> after;
  for (std::size_t r = 0; r < policy.required.size(); ++r) {
    if (seen[r]) continue;
    std::optional<std::size_t> anchor;
    for (std::size_t p = r; p-- > 0;)
      if (seen[p]) {
        anchor = first_line[p];
        break;
      }
    (anchor ? after[*anchor] : at_header) += policy.required[r] + "\n";
  }

  std::string out;
  for (std::size_t i = 0; i <= lines.size(); ++i) {
    if (i == insert_line) {
      if (i > 0 && i == lines.size() && lines.back().next == lines.back().end) out += '\n';
      out += at_header;
    }
    if (i == lines.size()) break;
    if (!drop[i]) out.append(text.substr(lines[i].begin, lines[i].next - lines[i].begin));
    if (auto it = after.find(i); it != after.end()) {
      if (lines[i].next == lines[i].end) out += '\n';
      out += it->second;
    }
  }
  return out;
}

namespace {

bool is_canonical_hyperparameter_def(std::string_view def_text) {
  py::Module m;
  try {
    m = py::parse(def_text);
  } catch (const py::SyntaxError&) {
    return false;
  }
  if (m.body.size() != 1) return false;
  const py::Stmt& fn = m.body.front();
  if (fn.kind != py::StmtKind::FunctionDef || !fn.params.empty() || !fn.decorators.empty() ||
      !fn.exprs.empty() || fn.is_async || fn.body.size() != 1)
    return false;
  const py::Stmt& ret = fn.body.front();
  if (ret.kind != py::StmtKind::Return || ret.exprs.size() != 1) return false;
  const py::Expr& set = ret.exprs.front();
  if (set.kind != py::ExprKind::Set || set.items.size() != 2) return false;
  std::vector<std::string> names;
  for (const auto& item : set.items) {
    if (item.kind != py::ExprKind::Constant || item.constant != py::ConstKind::Str) return false;
    names.push_back(item.text);
  }
  std::sort(names.begin(), names.end());
  return names == std::vector<std::string>{"lr", "momentum"};
}

bool is_hyperparameter_def_line(std::string_view content) {
  if (!starts_with_word(content, "def")) return false;
  std::string_view s = lstrip(content.substr(3));
  if (!starts_with_word(s, "supported_hyperparameters")) return false;
  s = lstrip(s.substr(std::string_view("supported_hyperparameters").size()));
  return !s.empty() && s.front() == '(';
}

bool is_import_line(std::string_view content) {
  return starts_with_word(content, "import") || starts_with_word(content, "from");
}

}  // namespace

std::string enforce_hyperparameters(std::string_view text) {
  auto cls = py::classify(text);
  auto lines = split_lines(text);
  const std::size_t count = lines.size();

  std::vector<bool> top(count, false);
  for (std::size_t i = 0; i < count; ++i) {
    bool prev_continues = i > 0 && ends_with_backslash(text, cls, lines[i - 1]);
    top[i] = starts_top_level(text, cls, lines[i], prev_continues);
  }

  struct Span {
    std::size_t first, last;
  };
  std::vector<Span> spans;
  for (std::size_t i = 0; i < count; ++i) {
    if (!top[i]) continue;
    if (!is_hyperparameter_def_line(text.substr(lines[i].begin, lines[i].end - lines[i].begin)))
      continue;
    std::size_t first = i;
    while (first > 0 && top[first - 1] && text[lines[first - 1].begin] == '@') --first;
    std::size_t last = i;
    for (std::size_t j = i + 1; j < count && !top[j]; ++j)
      if (!is_blank_or_comment(text, lines[j]) || cls.classes[lines[j].begin] == py::CharClass::String)
        last = j;
    spans.push_back({first, last});
  }

  if (spans.empty()) {
    // Insert after the leading import header.
    std::size_t after = 0;  // line index where insertion happens
    bool in_import = false;
    for (std::size_t i = 0; i < count; ++i) {
      std::string_view content = text.substr(lines[i].begin, lines[i].end - lines[i].begin);
      if (top[i]) {
        if (!is_import_line(content)) break;
        in_import = true;
        after = i + 1;
      } else if (in_import && !is_blank_or_comment(text, lines[i])) {
        after = i + 1;
      }
    }
    std::size_t offset = after == 0 ? 0 : lines[after - 1].next;
    std::string before(text.substr(0, offset));
    std::string rest(text.substr(offset));
    std::string out = before;
    if (!out.empty()) {
      if (out.back() != '\n') out += '\n';
      out += "\n\n";
    }
    out += kCanonicalHyperparameters;
    if (!rest.empty()) {
      if (rest.front() != '\n') out += "\n\n";
      out += rest;
    }
    return out;
  }

  std::string out;
  std::size_t cursor = 0;
  for (const Span& span : spans) {
    std::size_t b = lines[span.first].begin;
    std::size_t e = lines[span.last].next;
    std::string_view def_text = text.substr(b, e - b);
    if (is_canonical_hyperparameter_def(def_text)) continue;
    out.append(text.substr(cursor, b - cursor));
    std::string canonical(kCanonicalHyperparameters);
    if (lines[span.last].next == lines[span.last].end) canonical.pop_back();
    out += canonical;
    cursor = e;
  }
  out.append(text.substr(cursor));
  return out;
}

BalanceResult balance_brackets(std::string_view text) {
  BalanceResult result;
  auto cls = py::classify(text);
  std::vector<char> stack;
  int line = 1;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (c == '\n') ++line;
    if (cls.classes[i] != py::CharClass::Code) continue;
    if (c == '(' || c == '[' || c == '{') {
      stack.push_back(c);
    } else if (is_closer(c)) {
      char want = c == ')' ? '(' : c == ']' ? '[' : '{';
      if (!stack.empty() && stack.back() == want) stack.pop_back();
      else result.unmatched_closer_lines.push_back(line);
    }
  }
  if (stack.empty()) {
    result.text = std::string(text);
    return result;
  }
  for (auto it = stack.rbegin(); it != stack.rend(); ++it)
    result.appended += *it == '(' ? ')' : *it == '[' ? ']' : '}';

  std::size_t p = text.size();
  while (p > 0 && std::isspace(static_cast<unsigned char>(text[p - 1]))) --p;

  auto closers_are_code = [&](const std::string& candidate, std::size_t at) {
    auto c2 = py::classify(candidate);
    for (std::size_t k = 0; k < result.appended.size(); ++k)
      if (c2.classes[at + k] != py::CharClass::Code) return false;
    return true;
  };
  bool after_backslash = p > 0 && text[p - 1] == '\\' && cls.classes[p - 1] == py::CharClass::Code;
  std::string direct = std::string(text.substr(0, p)) + result.appended + std::string(text.substr(p));
  if (!after_backslash && closers_are_code(direct, p)) {
    result.text = std::move(direct);
    return result;
  }
  std::string broken =
      std::string(text.substr(0, p)) + "\n" + result.appended + std::string(text.substr(p));
  if (closers_are_code(broken, p + 1)) {
    result.text = std::move(broken);
    return result;
  }
  result.skipped_unterminated = true;
  result.appended.clear();
  result.text = std::string(text);
  return result;
}

std::optional<SyntaxFailure> syntax_check(std::string_view text) {
  try {
    py::parse(text);
  } catch (const py::SyntaxError& e) {
    return SyntaxFailure{e.location().line, e.location().column, e.message()};
  }
  return std::nullopt;
}

const std::vector<std::string>& sanitize_pass_names() {
  static const std::vector<std::string> names = {
      "extract_blocks",        "select_candidate",  "strip_think_segments",
      "strip_residual_fences", "normalize_imports", "enforce_hyperparameters",
      "balance_brackets",      "syntax_check"};
  return names;
}

CandidateSource sanitize(std::string_view raw, const ImportPolicy& policy) {
  CandidateSource out;
  auto log = [&](const char* pass, bool changed, std::string detail) {
    out.pass_log.push_back(PassEntry{pass, changed, std::move(detail)});
  };

  auto blocks = extract_blocks(raw);
  bool fenced = blocks.front().fenced;
  out.origin = fenced ? SourceOrigin::FencedBlock : SourceOrigin::WholeTextFallback;
  log("extract_blocks", fenced,
      fenced ? std::to_string(blocks.size()) + " fenced block(s)" : "no fences; whole text");

  const FencedBlock& chosen = select_candidate(blocks);
  std::size_t index = static_cast<std::size_t>(&chosen - blocks.data());
  std::string text = chosen.text;
  log("select_candidate", text != raw,
      "block " + std::to_string(index + 1) + " of " + std::to_string(blocks.size()) +
          (declares_net(text) ? " (declares Net)" : " (longest)"));

  auto step = [&](const char* pass, std::string next, std::string detail) {
    bool changed = next != text;
    log(pass, changed, changed ? std::move(detail) : std::string("unchanged"));
    text = std::move(next);
  };

  step("strip_think_segments", strip_think_segments(text), "removed think segments");
  step("strip_residual_fences", strip_residual_fences(text), "removed stray fence lines");
  step("normalize_imports", normalize_imports(text, policy), "required imports normalized");
  step("enforce_hyperparameters", enforce_hyperparameters(text),
       "supported_hyperparameters set to {'lr', 'momentum'}");

  BalanceResult balanced = balance_brackets(text);
  std::string detail;
  if (!balanced.appended.empty()) detail = "appended '" + balanced.appended + "'";
  if (balanced.skipped_unterminated) detail = "EOF inside triple-quoted string; not balanced";
  if (!balanced.unmatched_closer_lines.empty()) {
    if (!detail.empty()) detail += "; ";
    detail += "unmatched closer on line " + std::to_string(balanced.unmatched_closer_lines.front());
  }
  bool changed = balanced.text != text;
  log("balance_brackets", changed, detail.empty() ? "unchanged" : detail);
  text = std::move(balanced.text);

  out.syntax = syntax_check(text);
  log("syntax_check", false,
      out.syntax ? "line " + std::to_string(out.syntax->line) + ", column " +
                       std::to_string(out.syntax->column) + ": " + out.syntax->message
                 : "ok");
  out.text = std::move(text);
  return out;
}

}  // namespace nncap
