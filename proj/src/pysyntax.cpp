#include "nncap/pysyntax.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstring>
#include <unordered_set>

namespace nncap::py {

namespace {

bool is_ident_start(unsigned char c) { return std::isalpha(c) || c == '_' || c >= 0x80; }
bool is_ident_char(unsigned char c) { return std::isalnum(c) || c == '_' || c >= 0x80; }

// Length of a valid string prefix (r, b, u, f and the two-letter combinations)
// at `pos` that is immediately followed by a quote, or npos.
std::size_t string_prefix_length(std::string_view s, std::size_t pos) {
  std::size_t len = 0;
  while (len < 3 && pos + len < s.size() && std::isalpha(static_cast<unsigned char>(s[pos + len])))
    ++len;
  if (len > 2 || pos + len >= s.size() || (s[pos + len] != '\'' && s[pos + len] != '"'))
    return std::string_view::npos;
  std::string p;
  for (std::size_t k = 0; k < len; ++k)
    p += static_cast<char>(std::tolower(static_cast<unsigned char>(s[pos + k])));
  static const std::unordered_set<std::string> prefixes = {"",   "r",  "u",  "b",  "f",
                                                           "br", "rb", "fr", "rf"};
  return prefixes.count(p) ? len : std::string_view::npos;
}

}  // namespace

Classification classify(std::string_view text) {
  Classification out;
  out.classes.assign(text.size(), CharClass::Code);
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    unsigned char c = static_cast<unsigned char>(text[i]);
    if (c == '#') {
      while (i < n && text[i] != '\n') out.classes[i++] = CharClass::Comment;
      if (i >= n) out.ends_in_comment = true;
      continue;
    }
    if (is_ident_start(c) || c == '\'' || c == '"') {
      std::size_t plen = 0;
      if (is_ident_start(c)) {
        plen = string_prefix_length(text, i);
        if (plen == std::string_view::npos) {
          while (i < n && is_ident_char(static_cast<unsigned char>(text[i]))) ++i;
          continue;
        }
      }
      std::size_t start = i;
      char q = text[i + plen];
      bool triple = i + plen + 2 < n && text[i + plen + 1] == q && text[i + plen + 2] == q;
      std::size_t j = i + plen + (triple ? 3 : 1);
      bool closed = false;
      while (j < n) {
        if (text[j] == '\\') {
          j += 2;
          continue;
        }
        if (!triple && text[j] == '\n') break;
        if (text[j] == q) {
          if (!triple) {
            ++j;
            closed = true;
            break;
          }
          if (j + 2 < n && text[j + 1] == q && text[j + 2] == q) {
            j += 3;
            closed = true;
            break;
          }
        }
        ++j;
      }
      j = std::min(j, n);
      for (std::size_t k = start; k < j; ++k) out.classes[k] = CharClass::String;
      if (!closed && j >= n) {
        out.ends_in_string = true;
        out.ends_in_triple = triple;
      }
      i = j;
      continue;
    }
    ++i;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tokenizer

namespace {

class Tokenizer {
 public:
  explicit Tokenizer(std::string_view src) : src_(src) {}

  struct Result {
    std::vector<Token> tokens;
    std::optional<SyntaxError> pending;  // unclosed bracket, reported lazily
    std::size_t eof_index = 0;           // first token synthesized at EOF
  };

  Result run() {
    const std::size_t n = src_.size();
    bool at_line_start = true;
    while (true) {
      if (at_line_start && !brackets_.empty()) at_line_start = false;
      if (at_line_start && brackets_.empty()) {
        int col = 0;
        std::size_t p = pos_;
        while (p < n && (src_[p] == ' ' || src_[p] == '\t' || src_[p] == '\f')) {
          col = src_[p] == '\t' ? (col / 8 + 1) * 8 : (src_[p] == '\f' ? 0 : col + 1);
          ++p;
        }
        if (p >= n) {
          pos_ = p;
          break;
        }
        if (src_[p] == '#' || src_[p] == '\n' || src_[p] == '\r') {
          while (p < n && src_[p] != '\n') ++p;
          pos_ = p;
          if (p < n) newline();
          continue;
        }
        pos_ = p;
        Location here = loc();
        if (col > indents_.back()) {
          indents_.push_back(col);
          emit(TokenKind::Indent, "", here);
        } else {
          while (col < indents_.back()) {
            indents_.pop_back();
            emit(TokenKind::Dedent, "", here);
          }
          if (col != indents_.back())
            throw SyntaxError("unindent does not match any outer indentation level", here);
        }
        at_line_start = false;
      }
      if (pos_ >= n) break;
      char c = src_[pos_];
      if (c == ' ' || c == '\t' || c == '\f' || c == '\r') {
        ++pos_;
        continue;
      }
      if (c == '#') {
        while (pos_ < n && src_[pos_] != '\n') ++pos_;
        continue;
      }
      if (c == '\n') {
        if (brackets_.empty()) emit(TokenKind::Newline, "", loc());
        newline();
        at_line_start = true;
        continue;
      }
      if (c == '\\') {
        std::size_t p = pos_ + 1;
        if (p < n && src_[p] == '\r') ++p;
        if (p >= n) throw SyntaxError("unexpected EOF while parsing", loc());
        if (src_[p] != '\n')
          throw SyntaxError("unexpected character after line continuation character", loc());
        pos_ = p;
        newline();
        continue;
      }
      unsigned char uc = static_cast<unsigned char>(c);
      if (is_ident_start(uc)) {
        std::size_t plen = string_prefix_length(src_, pos_);
        if (plen != std::string_view::npos) {
          lex_string(plen);
        } else {
          lex_name();
        }
        continue;
      }
      if (c == '\'' || c == '"') {
        lex_string(0);
        continue;
      }
      if (std::isdigit(uc) || (c == '.' && pos_ + 1 < n && std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
        lex_number();
        continue;
      }
      lex_operator();
    }
    Result result;
    if (!brackets_.empty()) {
      auto [ch, where] = brackets_.back();
      result.pending = SyntaxError(std::string("'") + ch + "' was never closed", where);
    }
    result.eof_index = out_.size();
    Location eof = loc();
    if (!out_.empty() && out_.back().kind != TokenKind::Newline &&
        out_.back().kind != TokenKind::Dedent && out_.back().kind != TokenKind::Indent)
      emit(TokenKind::Newline, "", eof);
    while (indents_.size() > 1) {
      indents_.pop_back();
      emit(TokenKind::Dedent, "", eof);
    }
    emit(TokenKind::EndMarker, "", eof);
    result.tokens = std::move(out_);
    return result;
  }

 private:
  Location loc() const {
    return Location{line_, static_cast<int>(pos_ - line_start_) + 1};
  }

  void newline() {
    ++pos_;
    ++line_;
    line_start_ = pos_;
  }

  void emit(TokenKind kind, std::string text, Location start) {
    out_.push_back(Token{kind, std::move(text), start, loc()});
  }

  void lex_name() {
    Location start = loc();
    std::size_t b = pos_;
    while (pos_ < src_.size() && is_ident_char(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    emit(TokenKind::Name, std::string(src_.substr(b, pos_ - b)), start);
  }

  void lex_number() {
    Location start = loc();
    const std::size_t n = src_.size();
    std::size_t b = pos_;
    auto digits = [&](auto pred) {
      while (pos_ < n && (pred(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) ++pos_;
    };
    auto is_dec = [](unsigned char ch) { return std::isdigit(ch) != 0; };
    if (src_[pos_] == '0' && pos_ + 1 < n && std::strchr("xXoObB", src_[pos_ + 1]) != nullptr) {
      char base = static_cast<char>(std::tolower(static_cast<unsigned char>(src_[pos_ + 1])));
      pos_ += 2;
      if (base == 'x') digits([](unsigned char ch) { return std::isxdigit(ch) != 0; });
      else if (base == 'o') digits([](unsigned char ch) { return ch >= '0' && ch <= '7'; });
      else digits([](unsigned char ch) { return ch == '0' || ch == '1'; });
    } else {
      digits(is_dec);
      if (pos_ < n && src_[pos_] == '.') {
        ++pos_;
        digits(is_dec);
      }
      if (pos_ < n && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
        std::size_t save = pos_;
        ++pos_;
        if (pos_ < n && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
        if (pos_ < n && std::isdigit(static_cast<unsigned char>(src_[pos_]))) digits(is_dec);
        else pos_ = save;
      }
      if (pos_ < n && (src_[pos_] == 'j' || src_[pos_] == 'J')) ++pos_;
    }
    if (pos_ < n && is_ident_start(static_cast<unsigned char>(src_[pos_])))
      throw SyntaxError("invalid decimal literal", start);
    emit(TokenKind::Number, std::string(src_.substr(b, pos_ - b)), start);
  }

  void lex_string(std::size_t prefix_len) {
    Location start = loc();
    const std::size_t n = src_.size();
    std::size_t b = pos_;
    pos_ += prefix_len;
    char q = src_[pos_];
    bool triple = pos_ + 2 < n && src_[pos_ + 1] == q && src_[pos_ + 2] == q;
    pos_ += triple ? 3 : 1;
    while (true) {
      if (pos_ >= n) {
        throw SyntaxError(triple ? "unterminated triple-quoted string literal (detected at line " +
                                       std::to_string(line_) + ")"
                                 : "unterminated string literal (detected at line " +
                                       std::to_string(line_) + ")",
                          start);
      }
      char c = src_[pos_];
      if (c == '\\') {
        if (pos_ + 1 < n && src_[pos_ + 1] == '\n') {
          ++pos_;
          newline();
        } else {
          pos_ += 2;
        }
        continue;
      }
      if (c == '\n') {
        if (!triple)
          throw SyntaxError("unterminated string literal (detected at line " +
                                std::to_string(line_) + ")",
                            start);
        newline();
        continue;
      }
      if (c == q) {
        if (!triple) {
          ++pos_;
          break;
        }
        if (pos_ + 2 < n && src_[pos_ + 1] == q && src_[pos_ + 2] == q) {
          pos_ += 3;
          break;
        }
      }
      ++pos_;
    }
    out_.push_back(Token{TokenKind::String, std::string(src_.substr(b, pos_ - b)), start, loc()});
  }

  void lex_operator() {
    static const std::array<std::string_view, 5> three = {"**=", "//=", ">>=", "<<=", "..."};
    static const std::array<std::string_view, 19> two = {
        "**", "//", ">>", "<<", "<=", ">=", "==", "!=", "->", ":=",
        "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "@="};
    static const std::string_view one = "+-*/%@&|^~<>()[]{},:.;=";
    Location start = loc();
    std::string_view rest = src_.substr(pos_);
    for (auto op : three)
      if (rest.substr(0, 3) == op) return op_token(op, start);
    for (auto op : two)
      if (rest.substr(0, 2) == op) return op_token(op, start);
    if (one.find(rest[0]) != std::string_view::npos) return op_token(rest.substr(0, 1), start);
    throw SyntaxError(std::string("invalid character '") + rest[0] + "'", start);
  }

  void op_token(std::string_view op, Location start) {
    pos_ += op.size();
    if (op.size() == 1) {
      char c = op[0];
      if (c == '(' || c == '[' || c == '{') {
        brackets_.emplace_back(c, start);
      } else if (c == ')' || c == ']' || c == '}') {
        if (brackets_.empty())
          throw SyntaxError(std::string("unmatched '") + c + "'", start);
        char open = brackets_.back().first;
        char want = open == '(' ? ')' : open == '[' ? ']' : '}';
        if (c != want)
          throw SyntaxError(std::string("closing parenthesis '") + c +
                                "' does not match opening parenthesis '" + open + "'",
                            start);
        brackets_.pop_back();
      }
    }
    out_.push_back(Token{TokenKind::Op, std::string(op), start, loc()});
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  std::size_t line_start_ = 0;
  std::vector<int> indents_{0};
  std::vector<std::pair<char, Location>> brackets_;
  std::vector<Token> out_;
};

}  // namespace

std::vector<Token> tokenize(std::string_view text) {
  auto result = Tokenizer(text).run();
  if (result.pending) throw *result.pending;
  return std::move(result.tokens);
}

// ---------------------------------------------------------------------------
// Parser

namespace {

const std::unordered_set<std::string>& keywords() {
  static const std::unordered_set<std::string> kw = {
      "False", "None",   "True",    "and",      "as",     "assert", "async", "await",
      "break", "class",  "continue", "def",     "del",    "elif",   "else",  "except",
      "finally", "for",  "from",    "global",   "if",     "import", "in",    "is",
      "lambda", "nonlocal", "not",  "or",       "pass",   "raise",  "return", "try",
      "while", "with",   "yield"};
  return kw;
}

std::string decode_string_body(std::string_view body) {
  std::string out;
  out.reserve(body.size());
  for (std::size_t i = 0; i < body.size(); ++i) {
    char c = body[i];
    if (c != '\\' || i + 1 >= body.size()) {
      out += c;
      continue;
    }
    char e = body[++i];
    switch (e) {
      case '\n': break;
      case '\\': out += '\\'; break;
      case '\'': out += '\''; break;
      case '"': out += '"'; break;
      case 'n': out += '\n'; break;
      case 't': out += '\t'; break;
      case 'r': out += '\r'; break;
      case 'a': out += '\a'; break;
      case 'b': out += '\b'; break;
      case 'f': out += '\f'; break;
      case 'v': out += '\v'; break;
      case 'x':
        if (i + 2 < body.size() + 0 && std::isxdigit(static_cast<unsigned char>(body[i + 1])) &&
            i + 2 < body.size() && std::isxdigit(static_cast<unsigned char>(body[i + 2]))) {
          out += static_cast<char>(std::stoi(std::string(body.substr(i + 1, 2)), nullptr, 16));
          i += 2;
        } else {
          out += "\\x";
        }
        break;
      default:
        if (e >= '0' && e <= '7') {
          int v = 0, k = 0;
          while (k < 3 && i < body.size() && body[i] >= '0' && body[i] <= '7') {
            v = v * 8 + (body[i] - '0');
            ++i;
            ++k;
          }
          --i;
          out += static_cast<char>(v & 0xff);
        } else {
          out += '\\';
          out += e;
        }
    }
  }
  return out;
}

const char* describe(const Expr& e) {
  switch (e.kind) {
    case ExprKind::Call: return "function call";
    case ExprKind::Constant:
      return e.constant == ConstKind::None || e.constant == ConstKind::True ||
                     e.constant == ConstKind::False
                 ? e.constant == ConstKind::None ? "None" : e.constant == ConstKind::True ? "True" : "False"
                 : "literal";
    case ExprKind::BinOp:
    case ExprKind::UnaryOp: return "expression";
    case ExprKind::BoolOp: return "expression";
    case ExprKind::Compare: return "comparison";
    case ExprKind::IfExp: return "conditional expression";
    case ExprKind::Lambda: return "lambda";
    case ExprKind::Comprehension: return "comprehension";
    case ExprKind::NamedExpr: return "named expression";
    case ExprKind::Yield:
    case ExprKind::YieldFrom: return "yield expression";
    case ExprKind::Await: return "await expression";
    case ExprKind::Dict: return "dict literal";
    case ExprKind::Set: return "set display";
    case ExprKind::Slice: return "slice";
    default: return "expression";
  }
}

class Parser {
 public:
  explicit Parser(std::string_view text) {
    auto result = Tokenizer(text).run();
    toks_ = std::move(result.tokens);
    pending_ = std::move(result.pending);
    eof_index_ = result.eof_index;
  }

  Module parse_module() {
    Module m;
    while (peek().kind != TokenKind::EndMarker) {
      if (peek().kind == TokenKind::Newline) {
        next();
        continue;
      }
      parse_statement(m.body);
    }
    if (pending_) throw *pending_;
    return m;
  }

 private:
  // -- token helpers -------------------------------------------------------

  const Token& peek(std::size_t k = 0) const {
    std::size_t idx = std::min(i_ + k, toks_.size() - 1);
    return toks_[idx];
  }

  const Token& next() {
    const Token& t = toks_[std::min(i_, toks_.size() - 1)];
    if (i_ < toks_.size() - 1) ++i_;
    if (t.kind == TokenKind::Name || t.kind == TokenKind::Number ||
        t.kind == TokenKind::String || t.kind == TokenKind::Op)
      last_end_ = t.end;
    return t;
  }

  bool is_op(std::string_view op, std::size_t k = 0) const {
    const Token& t = peek(k);
    return t.kind == TokenKind::Op && t.text == op;
  }

  bool is_kw(std::string_view kw, std::size_t k = 0) const {
    const Token& t = peek(k);
    return t.kind == TokenKind::Name && t.text == kw;
  }

  bool is_identifier(std::size_t k = 0) const {
    const Token& t = peek(k);
    return t.kind == TokenKind::Name && !keywords().count(t.text);
  }

  [[noreturn]] void fail(const std::string& msg, const Token& t) const {
    if (pending_ && static_cast<std::size_t>(&t - toks_.data()) >= eof_index_) throw *pending_;
    throw SyntaxError(msg, t.loc);
  }

  // Reported at the last byte of the indentation.
  [[noreturn]] void unexpected_indent(const Token& t) const {
    throw SyntaxError("unexpected indent", {t.loc.line, std::max(1, t.loc.column - 1)});
  }

  [[noreturn]] void fail_here() const {
    const Token& t = peek();
    if (pending_ && i_ >= eof_index_) throw *pending_;
    if (t.kind == TokenKind::Indent) unexpected_indent(t);
    if (t.kind == TokenKind::EndMarker) fail("unexpected EOF while parsing", t);
    fail("invalid syntax", t);
  }

  void expect_op(std::string_view op) {
    if (!is_op(op)) {
      if (op == ":" || op == "(" || op == ")" || op == "]" || op == "}" || op == "=")
        fail("expected '" + std::string(op) + "'", peek());
      fail_here();
    }
    next();
  }

  void expect_kw(std::string_view kw) {
    if (!is_kw(kw)) fail_here();
    next();
  }

  std::string expect_identifier() {
    if (!is_identifier()) fail_here();
    return next().text;
  }

  // -- statements ----------------------------------------------------------

  void parse_statement(std::vector<Stmt>& out) {
    const Token& t = peek();
    if (t.kind == TokenKind::Indent) unexpected_indent(t);
    if (t.kind == TokenKind::Dedent || t.kind == TokenKind::EndMarker) fail_here();
    if (t.kind == TokenKind::Name) {
      const std::string& w = t.text;
      if (w == "if") return out.push_back(parse_if());
      if (w == "while") return out.push_back(parse_while());
      if (w == "for") return out.push_back(parse_for(false, t.loc));
      if (w == "try") return out.push_back(parse_try());
      if (w == "with") return out.push_back(parse_with(false, t.loc));
      if (w == "def") return out.push_back(parse_def({}, false, t.loc));
      if (w == "class") return out.push_back(parse_class({}, t.loc));
      if (w == "async") {
        Location start = t.loc;
        next();
        if (is_kw("def")) return out.push_back(parse_def({}, true, start));
        if (is_kw("for")) return out.push_back(parse_for(true, start));
        if (is_kw("with")) return out.push_back(parse_with(true, start));
        fail_here();
      }
    }
    if (is_op("@")) return out.push_back(parse_decorated());
    if (is_kw("match") && !is_op("=", 1) && !is_op(".", 1)) {
      std::size_t save = i_;
      Location save_end = last_end_;
      try {
        return out.push_back(parse_match());
      } catch (const SyntaxError&) {
        if (match_committed_) throw;
        i_ = save;
        last_end_ = save_end;
      }
    }
    parse_simple_statements(out);
  }

  void parse_simple_statements(std::vector<Stmt>& out) {
    while (true) {
      out.push_back(parse_small_statement());
      if (is_op(";")) {
        next();
        if (peek().kind == TokenKind::Newline) break;
        continue;
      }
      break;
    }
    if (peek().kind != TokenKind::Newline) fail_here();
    next();
  }

  std::vector<Stmt> parse_block(const std::string& context, Location header) {
    expect_op(":");
    std::vector<Stmt> body;
    if (peek().kind == TokenKind::Newline) {
      next();
      if (peek().kind != TokenKind::Indent)
        fail("expected an indented block after " + context + " on line " +
                 std::to_string(header.line),
             peek());
      next();
      while (peek().kind != TokenKind::Dedent && peek().kind != TokenKind::EndMarker)
        parse_statement(body);
      if (peek().kind == TokenKind::Dedent) next();
    } else {
      parse_simple_statements(body);
    }
    return body;
  }

  Stmt make(StmtKind kind, Location loc) {
    Stmt s;
    s.kind = kind;
    s.loc = loc;
    return s;
  }

  Stmt finish(Stmt s) {
    s.end = last_end_;
    return s;
  }

  Stmt parse_if() {
    Location start = next().loc;  // 'if' or 'elif'
    Stmt s = make(StmtKind::If, start);
    s.exprs.push_back(parse_namedexpr());
    s.body = parse_block("'if' statement", start);
    if (is_kw("elif")) {
      s.orelse.push_back(parse_if());
    } else if (is_kw("else")) {
      Location e = next().loc;
      s.orelse = parse_block("'else' statement", e);
    }
    return finish(std::move(s));
  }

  Stmt parse_while() {
    Location start = next().loc;
    Stmt s = make(StmtKind::While, start);
    s.exprs.push_back(parse_namedexpr());
    s.body = parse_block("'while' statement", start);
    if (is_kw("else")) {
      Location e = next().loc;
      s.orelse = parse_block("'else' statement", e);
    }
    return finish(std::move(s));
  }

  Stmt parse_for(bool is_async, Location start) {
    expect_kw("for");
    Stmt s = make(StmtKind::For, start);
    s.is_async = is_async;
    Expr target = parse_target_list();
    validate_target(target);
    s.exprs.push_back(std::move(target));
    expect_kw("in");
    s.exprs.push_back(parse_star_expressions());
    s.body = parse_block("'for' statement", start);
    if (is_kw("else")) {
      Location e = next().loc;
      s.orelse = parse_block("'else' statement", e);
    }
    return finish(std::move(s));
  }

  Stmt parse_try() {
    Location start = next().loc;
    Stmt s = make(StmtKind::Try, start);
    s.body = parse_block("'try' statement", start);
    bool bare_seen = false;
    while (is_kw("except")) {
      const Token& kw = next();
      if (bare_seen) fail("default 'except:' must be last", kw);
      Stmt h = make(StmtKind::ExceptHandler, kw.loc);
      if (is_op("*")) next();
      if (!is_op(":")) {
        h.exprs.push_back(parse_test());
        if (is_op(",")) {
          std::vector<Expr> elts;
          elts.push_back(std::move(h.exprs.back()));
          while (is_op(",")) {
            next();
            elts.push_back(parse_test());
          }
          Expr tup;
          tup.kind = ExprKind::Tuple;
          tup.loc = elts.front().loc;
          tup.items = std::move(elts);
          h.exprs.back() = std::move(tup);
        }
        if (is_kw("as")) {
          next();
          h.name = expect_identifier();
        }
      } else {
        bare_seen = true;
      }
      h.body = parse_block("'except' statement", kw.loc);
      s.handlers.push_back(finish(std::move(h)));
    }
    if (is_kw("else")) {
      if (s.handlers.empty()) fail_here();
      Location e = next().loc;
      s.orelse = parse_block("'else' statement", e);
    }
    if (is_kw("finally")) {
      Location f = next().loc;
      s.finalbody = parse_block("'finally' statement", f);
    }
    if (s.handlers.empty() && s.finalbody.empty())
      fail("expected 'except' or 'finally' block", peek());
    return finish(std::move(s));
  }

  void parse_with_item(Stmt& s) {
    s.exprs.push_back(parse_test());
    if (is_kw("as")) {
      next();
      Expr target = parse_star_target();
      validate_target(target);
      s.exprs.push_back(std::move(target));
    }
  }

  Stmt parse_with(bool is_async, Location start) {
    expect_kw("with");
    Stmt s = make(StmtKind::With, start);
    s.is_async = is_async;
    bool done = false;
    if (is_op("(")) {
      // Parenthesized with-items; fall back to an ordinary expression on failure.
      std::size_t save = i_;
      Location save_end = last_end_;
      try {
        Stmt trial = make(StmtKind::With, start);
        next();
        while (!is_op(")")) {
          parse_with_item(trial);
          if (!is_op(",")) break;
          next();
        }
        expect_op(")");
        if (is_op(":")) {
          s.exprs = std::move(trial.exprs);
          done = true;
        } else {
          i_ = save;
          last_end_ = save_end;
        }
      } catch (const SyntaxError&) {
        i_ = save;
        last_end_ = save_end;
      }
    }
    if (!done) {
      while (true) {
        parse_with_item(s);
        if (!is_op(",")) break;
        next();
      }
    }
    s.body = parse_block("'with' statement", start);
    return finish(std::move(s));
  }

  // `match` is a soft keyword: the statement form is only committed once the
  // subject, ':' and an indented 'case' are seen.
  Stmt parse_match() {
    match_committed_ = false;
    Location start = next().loc;
    Stmt s = make(StmtKind::Match, start);
    s.exprs.push_back(parse_star_expressions());
    expect_op(":");
    if (peek().kind != TokenKind::Newline) fail_here();
    next();
    if (peek().kind != TokenKind::Indent || !is_kw("case", 1)) fail_here();
    next();
    match_committed_ = true;
    while (is_kw("case")) {
      Location c = next().loc;
      Stmt kase = make(StmtKind::MatchCase, c);
      kase.exprs.push_back(parse_pattern());
      if (is_kw("if")) {
        next();
        kase.exprs.push_back(parse_namedexpr());
      }
      kase.body = parse_block("'case' statement", c);
      s.handlers.push_back(finish(std::move(kase)));
    }
    match_committed_ = false;
    if (peek().kind != TokenKind::Dedent) fail_here();
    next();
    return finish(std::move(s));
  }

  Expr parse_pattern() {
    Location start = peek().loc;
    auto one = [&] {
      Expr p = parse_star_target();
      if (is_kw("as")) {
        next();
        expect_identifier();
      }
      return p;
    };
    Expr first = one();
    if (!is_op(",")) return first;
    Expr tup = make_expr(ExprKind::Tuple, start);
    tup.items.push_back(std::move(first));
    while (is_op(",")) {
      next();
      if (is_op(":") || is_kw("if")) break;
      tup.items.push_back(one());
    }
    return tup;
  }

  Stmt parse_decorated() {
    std::vector<Expr> decorators;
    Location start = peek().loc;
    while (is_op("@")) {
      next();
      decorators.push_back(parse_namedexpr());
      if (peek().kind != TokenKind::Newline) fail_here();
      next();
    }
    if (is_kw("def")) return parse_def(std::move(decorators), false, start);
    if (is_kw("class")) return parse_class(std::move(decorators), start);
    if (is_kw("async") && is_kw("def", 1)) {
      next();
      return parse_def(std::move(decorators), true, start);
    }
    fail_here();
  }

  Stmt parse_def(std::vector<Expr> decorators, bool is_async, Location start) {
    const Token& kw = peek();
    expect_kw("def");
    Stmt s = make(StmtKind::FunctionDef, start);
    s.is_async = is_async;
    s.decorators = std::move(decorators);
    s.name = expect_identifier();
    expect_op("(");
    s.params = parse_params(")", true);
    expect_op(")");
    if (is_op("->")) {
      next();
      Expr ann = parse_test();
      s.exprs.push_back(std::move(ann));
    }
    s.body = parse_block("function definition", kw.loc);
    return finish(std::move(s));
  }

  Stmt parse_class(std::vector<Expr> decorators, Location start) {
    const Token& kw = peek();
    expect_kw("class");
    Stmt s = make(StmtKind::ClassDef, start);
    s.decorators = std::move(decorators);
    s.name = expect_identifier();
    if (is_op("(")) {
      next();
      Expr call;
      parse_call_arguments(call);
      expect_op(")");
      s.exprs = std::move(call.items);
      s.keywords = std::move(call.keywords);
    }
    s.body = parse_block("class definition", kw.loc);
    return finish(std::move(s));
  }

  std::vector<Param> parse_params(std::string_view close, bool annotations) {
    std::vector<Param> params;
    bool seen_default = false;
    bool star_seen = false;
    bool bare_star_pending = false;
    bool kwargs_seen = false;
    bool slash_seen = false;
    while (!is_op(close)) {
      if (kwargs_seen) fail("arguments cannot follow var-keyword argument", peek());
      if (is_op("/")) {
        const Token& t = next();
        if (slash_seen || star_seen || params.empty())
          fail("invalid syntax", t);
        slash_seen = true;
        for (auto& p : params) p.kind = ParamKind::PositionalOnly;
      } else if (is_op("*")) {
        const Token& t = next();
        if (star_seen) fail("* argument may appear only once", t);
        star_seen = true;
        if (is_op(",") || is_op(close)) {
          bare_star_pending = true;
        } else {
          Param p;
          p.loc = peek().loc;
          p.name = expect_identifier();
          p.kind = ParamKind::VarArgs;
          if (annotations && is_op(":")) {
            next();
            p.exprs.push_back(is_op("*") ? parse_star_expression() : parse_test());
          }
          params.push_back(std::move(p));
        }
      } else if (is_op("**")) {
        next();
        Param p;
        p.loc = peek().loc;
        p.name = expect_identifier();
        p.kind = ParamKind::VarKeywords;
        if (annotations && is_op(":")) {
          next();
          p.exprs.push_back(parse_test());
        }
        params.push_back(std::move(p));
        kwargs_seen = true;
      } else {
        Param p;
        p.loc = peek().loc;
        p.name = expect_identifier();
        p.kind = star_seen ? ParamKind::KeywordOnly : ParamKind::Positional;
        if (annotations && is_op(":")) {
          next();
          p.exprs.push_back(parse_test());
        }
        if (is_op("=")) {
          next();
          p.exprs.push_back(parse_test());
          p.has_default = true;
          if (!star_seen) seen_default = true;
        } else if (seen_default && !star_seen) {
          throw SyntaxError("non-default argument follows default argument", p.loc);
        }
        bare_star_pending = false;
        params.push_back(std::move(p));
      }
      if (!is_op(",")) break;
      next();
    }
    if (bare_star_pending) fail("named arguments must follow bare *", peek());
    return params;
  }

  Stmt parse_small_statement() {
    const Token& t = peek();
    Location start = t.loc;
    if (t.kind == TokenKind::Name) {
      const std::string& w = t.text;
      if (w == "pass") return next(), finish(make(StmtKind::Pass, start));
      if (w == "break") return next(), finish(make(StmtKind::Break, start));
      if (w == "continue") return next(), finish(make(StmtKind::Continue, start));
      if (w == "return") {
        next();
        Stmt s = make(StmtKind::Return, start);
        if (!at_statement_end()) s.exprs.push_back(parse_star_expressions());
        return finish(std::move(s));
      }
      if (w == "raise") {
        next();
        Stmt s = make(StmtKind::Raise, start);
        if (!at_statement_end()) {
          s.exprs.push_back(parse_test());
          if (is_kw("from")) {
            next();
            s.exprs.push_back(parse_test());
          }
        }
        return finish(std::move(s));
      }
      if (w == "global" || w == "nonlocal") {
        next();
        Stmt s = make(w == "global" ? StmtKind::Global : StmtKind::Nonlocal, start);
        do {
          if (is_op(",")) next();
          s.aliases.push_back(Alias{expect_identifier(), {}});
        } while (is_op(","));
        return finish(std::move(s));
      }
      if (w == "del") {
        next();
        Stmt s = make(StmtKind::Delete, start);
        Expr targets = parse_target_list();
        validate_target(targets, "delete");
        s.exprs.push_back(std::move(targets));
        return finish(std::move(s));
      }
      if (w == "assert") {
        next();
        Stmt s = make(StmtKind::Assert, start);
        s.exprs.push_back(parse_test());
        if (is_op(",")) {
          next();
          s.exprs.push_back(parse_test());
        }
        return finish(std::move(s));
      }
      if (w == "import") return parse_import();
      if (w == "from") return parse_from_import();
    }
    return parse_expression_statement();
  }

  bool at_statement_end() const {
    return peek().kind == TokenKind::Newline || is_op(";") ||
           peek().kind == TokenKind::EndMarker;
  }

  std::string parse_dotted_name() {
    std::string name = expect_identifier();
    while (is_op(".")) {
      next();
      name += "." + expect_identifier();
    }
    return name;
  }

  Stmt parse_import() {
    Location start = next().loc;
    Stmt s = make(StmtKind::Import, start);
    while (true) {
      Alias a;
      a.name = parse_dotted_name();
      if (is_kw("as")) {
        next();
        a.asname = expect_identifier();
      }
      s.aliases.push_back(std::move(a));
      if (!is_op(",")) break;
      next();
    }
    return finish(std::move(s));
  }

  Stmt parse_from_import() {
    Location start = next().loc;
    Stmt s = make(StmtKind::ImportFrom, start);
    while (is_op(".") || is_op("...")) s.level += static_cast<int>(next().text.size());
    if (!is_kw("import")) s.name = parse_dotted_name();
    else if (s.level == 0) fail_here();
    expect_kw("import");
    if (is_op("*")) {
      next();
      s.aliases.push_back(Alias{"*", {}});
      return finish(std::move(s));
    }
    bool paren = is_op("(");
    if (paren) next();
    while (true) {
      Alias a;
      a.name = expect_identifier();
      if (is_kw("as")) {
        next();
        a.asname = expect_identifier();
      }
      s.aliases.push_back(std::move(a));
      if (!is_op(",")) break;
      next();
      if (paren && is_op(")")) break;
    }
    if (paren) expect_op(")");
    return finish(std::move(s));
  }

  static bool is_augassign(const Token& t) {
    static const std::unordered_set<std::string> ops = {"+=", "-=", "*=", "/=", "//=", "%=", "@=",
                                                        "&=", "|=", "^=", ">>=", "<<=", "**="};
    return t.kind == TokenKind::Op && ops.count(t.text);
  }

  Stmt parse_expression_statement() {
    Location start = peek().loc;
    Expr first = parse_star_expressions();
    if (is_op(":")) {
      next();
      if (first.kind == ExprKind::Tuple && !first.parenthesized)
        throw SyntaxError("only single target (not tuple) can be annotated", first.loc);
      if (first.kind != ExprKind::Name && first.kind != ExprKind::Attribute &&
          first.kind != ExprKind::Subscript)
        throw SyntaxError(std::string("illegal target for annotation"), first.loc);
      Stmt s = make(StmtKind::AnnAssign, start);
      s.exprs.push_back(std::move(first));
      s.exprs.push_back(parse_test());
      if (is_op("=")) {
        next();
        s.exprs.push_back(is_kw("yield") ? parse_yield() : parse_star_expressions());
      }
      return finish(std::move(s));
    }
    if (is_augassign(peek())) {
      if (first.kind != ExprKind::Name && first.kind != ExprKind::Attribute &&
          first.kind != ExprKind::Subscript)
        throw SyntaxError(std::string("'") + describe(first) +
                              "' is an illegal expression for augmented assignment",
                          first.loc);
      Stmt s = make(StmtKind::AugAssign, start);
      s.name = next().text;
      s.exprs.push_back(std::move(first));
      s.exprs.push_back(is_kw("yield") ? parse_yield() : parse_star_expressions());
      return finish(std::move(s));
    }
    if (is_op("=")) {
      Stmt s = make(StmtKind::Assign, start);
      s.exprs.push_back(std::move(first));
      while (is_op("=")) {
        next();
        s.exprs.push_back(is_kw("yield") ? parse_yield() : parse_star_expressions());
      }
      for (std::size_t k = 0; k + 1 < s.exprs.size(); ++k) validate_target(s.exprs[k]);
      return finish(std::move(s));
    }
    Stmt s = make(StmtKind::ExprStmt, start);
    s.exprs.push_back(std::move(first));
    return finish(std::move(s));
  }

  void validate_target(const Expr& e, const char* verb = "assign to") const {
    switch (e.kind) {
      case ExprKind::Name:
      case ExprKind::Attribute:
      case ExprKind::Subscript:
        return;
      case ExprKind::Starred:
        if (!e.items.empty()) validate_target(e.items[0], verb);
        return;
      case ExprKind::Tuple:
      case ExprKind::List:
        for (const auto& item : e.items) validate_target(item, verb);
        return;
      default:
        throw SyntaxError(std::string("cannot ") + verb + " " + describe(e), e.loc);
    }
  }

  // -- expressions ---------------------------------------------------------

  static Expr make_expr(ExprKind kind, Location loc) {
    Expr e;
    e.kind = kind;
    e.loc = loc;
    return e;
  }

  Expr parse_star_expression() {
    if (is_op("*")) {
      Location start = next().loc;
      Expr e = make_expr(ExprKind::Starred, start);
      e.items.push_back(parse_bitor());
      return e;
    }
    return parse_test();
  }

  // Comma-separated expressions with optional starring; a trailing comma or
  // more than one element produces a Tuple.
  Expr parse_star_expressions() {
    Location start = peek().loc;
    Expr first = parse_star_expression();
    if (!is_op(",")) return first;
    Expr tup = make_expr(ExprKind::Tuple, start);
    tup.items.push_back(std::move(first));
    while (is_op(",")) {
      next();
      if (!starts_expression()) break;
      tup.items.push_back(parse_star_expression());
    }
    return tup;
  }

  bool starts_expression() const {
    const Token& t = peek();
    switch (t.kind) {
      case TokenKind::Name:
        if (!keywords().count(t.text)) return true;
        return t.text == "None" || t.text == "True" || t.text == "False" || t.text == "not" ||
               t.text == "lambda" || t.text == "await" || t.text == "yield";
      case TokenKind::Number:
      case TokenKind::String:
        return true;
      case TokenKind::Op:
        return t.text == "(" || t.text == "[" || t.text == "{" || t.text == "-" ||
               t.text == "+" || t.text == "~" || t.text == "*" || t.text == "..." ||
               t.text == "**";
      default:
        return false;
    }
  }

  Expr parse_star_target() {
    if (is_op("*")) {
      Location start = next().loc;
      Expr e = make_expr(ExprKind::Starred, start);
      e.items.push_back(parse_bitor());
      return e;
    }
    return parse_bitor();
  }

  Expr parse_target_list() {
    Location start = peek().loc;
    Expr first = parse_star_target();
    if (!is_op(",")) return first;
    Expr tup = make_expr(ExprKind::Tuple, start);
    tup.items.push_back(std::move(first));
    while (is_op(",")) {
      next();
      if (is_kw("in") || is_op("=") || at_statement_end()) break;
      tup.items.push_back(parse_star_target());
    }
    return tup;
  }

  Expr parse_namedexpr() {
    if (is_identifier() && is_op(":=", 1)) {
      Location start = peek().loc;
      Expr target = make_expr(ExprKind::Name, start);
      target.text = next().text;
      next();
      Expr e = make_expr(ExprKind::NamedExpr, start);
      e.items.push_back(std::move(target));
      e.items.push_back(parse_test());
      return e;
    }
    return parse_test();
  }

  Expr parse_yield() {
    Location start = next().loc;
    if (is_kw("from")) {
      next();
      Expr e = make_expr(ExprKind::YieldFrom, start);
      e.items.push_back(parse_test());
      return e;
    }
    Expr e = make_expr(ExprKind::Yield, start);
    if (starts_expression()) e.items.push_back(parse_star_expressions());
    return e;
  }

  Expr parse_test() {
    if (is_kw("lambda")) return parse_lambda();
    if (is_kw("yield")) return parse_yield();
    Location start = peek().loc;
    Expr body = parse_or();
    if (!is_kw("if")) return body;
    next();
    Expr cond = parse_or();
    if (!is_kw("else")) fail("expected 'else' after 'if' expression", peek());
    next();
    Expr e = make_expr(ExprKind::IfExp, start);
    e.items.push_back(std::move(body));
    e.items.push_back(std::move(cond));
    e.items.push_back(parse_test());
    return e;
  }

  Expr parse_lambda() {
    Location start = next().loc;
    Expr e = make_expr(ExprKind::Lambda, start);
    auto params = parse_params(":", false);
    for (auto& p : params)
      for (auto& x : p.exprs) e.items.push_back(std::move(x));
    expect_op(":");
    e.items.push_back(parse_test());
    return e;
  }

  Expr parse_or() {
    Location start = peek().loc;
    Expr first = parse_and();
    if (!is_kw("or")) return first;
    Expr e = make_expr(ExprKind::BoolOp, start);
    e.text = "or";
    e.items.push_back(std::move(first));
    while (is_kw("or")) {
      next();
      e.items.push_back(parse_and());
    }
    return e;
  }

  Expr parse_and() {
    Location start = peek().loc;
    Expr first = parse_not();
    if (!is_kw("and")) return first;
    Expr e = make_expr(ExprKind::BoolOp, start);
    e.text = "and";
    e.items.push_back(std::move(first));
    while (is_kw("and")) {
      next();
      e.items.push_back(parse_not());
    }
    return e;
  }

  Expr parse_not() {
    if (is_kw("not")) {
      Location start = next().loc;
      Expr e = make_expr(ExprKind::UnaryOp, start);
      e.text = "not";
      e.items.push_back(parse_not());
      return e;
    }
    return parse_comparison();
  }

  std::optional<std::string> comparison_operator() {
    const Token& t = peek();
    if (t.kind == TokenKind::Op &&
        (t.text == "<" || t.text == ">" || t.text == "==" || t.text == ">=" || t.text == "<=" ||
         t.text == "!="))
      return next().text;
    if (is_kw("in")) return next(), std::string("in");
    if (is_kw("not") && is_kw("in", 1)) {
      next();
      next();
      return std::string("not in");
    }
    if (is_kw("is")) {
      next();
      if (is_kw("not")) return next(), std::string("is not");
      return std::string("is");
    }
    return std::nullopt;
  }

  Expr parse_comparison() {
    Location start = peek().loc;
    Expr first = parse_bitor();
    auto op = comparison_operator();
    if (!op) return first;
    Expr e = make_expr(ExprKind::Compare, start);
    e.items.push_back(std::move(first));
    while (op) {
      if (!e.text.empty()) e.text += ' ';
      e.text += *op;
      e.items.push_back(parse_bitor());
      op = comparison_operator();
    }
    return e;
  }

  template <typename Sub>
  Expr parse_binary(std::initializer_list<std::string_view> ops, Sub sub) {
    Location start = peek().loc;
    Expr left = (this->*sub)();
    while (true) {
      const Token& t = peek();
      if (t.kind != TokenKind::Op) break;
      bool match = false;
      for (auto op : ops) match = match || t.text == op;
      if (!match) break;
      Expr e = make_expr(ExprKind::BinOp, start);
      e.text = next().text;
      e.items.push_back(std::move(left));
      e.items.push_back((this->*sub)());
      left = std::move(e);
    }
    return left;
  }

  Expr parse_bitor() { return parse_binary({"|"}, &Parser::parse_xor); }
  Expr parse_xor() { return parse_binary({"^"}, &Parser::parse_bitand); }
  Expr parse_bitand() { return parse_binary({"&"}, &Parser::parse_shift); }
  Expr parse_shift() { return parse_binary({"<<", ">>"}, &Parser::parse_arith); }
  Expr parse_arith() { return parse_binary({"+", "-"}, &Parser::parse_term); }
  Expr parse_term() { return parse_binary({"*", "/", "//", "%", "@"}, &Parser::parse_factor); }

  Expr parse_factor() {
    if (is_op("+") || is_op("-") || is_op("~")) {
      const Token& t = next();
      Expr e = make_expr(ExprKind::UnaryOp, t.loc);
      e.text = t.text;
      e.items.push_back(parse_factor());
      return e;
    }
    return parse_power();
  }

  Expr parse_power() {
    Location start = peek().loc;
    Expr base = parse_await();
    if (!is_op("**")) return base;
    next();
    Expr e = make_expr(ExprKind::BinOp, start);
    e.text = "**";
    e.items.push_back(std::move(base));
    e.items.push_back(parse_factor());
    return e;
  }

  Expr parse_await() {
    if (is_kw("await")) {
      Location start = next().loc;
      Expr e = make_expr(ExprKind::Await, start);
      e.items.push_back(parse_primary());
      return e;
    }
    return parse_primary();
  }

  Expr parse_primary() {
    Expr e = parse_atom();
    while (true) {
      if (is_op("(")) {
        Location start = e.loc;
        next();
        Expr call = make_expr(ExprKind::Call, start);
        call.items.push_back(std::move(e));
        parse_call_arguments(call);
        expect_op(")");
        e = std::move(call);
      } else if (is_op("[")) {
        Location start = e.loc;
        next();
        Expr sub = make_expr(ExprKind::Subscript, start);
        sub.items.push_back(std::move(e));
        sub.items.push_back(parse_slices());
        expect_op("]");
        e = std::move(sub);
      } else if (is_op(".")) {
        Location start = e.loc;
        next();
        Expr attr = make_expr(ExprKind::Attribute, start);
        attr.items.push_back(std::move(e));
        attr.text = expect_identifier();
        e = std::move(attr);
      } else {
        break;
      }
    }
    return e;
  }

  // Appends positional args to call.items and keyword args to call.keywords.
  void parse_call_arguments(Expr& call) {
    bool keyword_seen = false;
    bool kwunpack_seen = false;
    std::size_t count = 0;
    while (!is_op(")")) {
      const Token& t = peek();
      ++count;
      if (is_op("**")) {
        next();
        call.keywords.push_back(Keyword{std::nullopt, parse_test(), t.loc});
        kwunpack_seen = true;
      } else if (is_op("*")) {
        next();
        if (kwunpack_seen)
          fail("iterable argument unpacking follows keyword argument unpacking", t);
        Expr star = make_expr(ExprKind::Starred, t.loc);
        star.items.push_back(parse_test());
        call.items.push_back(std::move(star));
      } else if (is_identifier() && is_op("=", 1)) {
        std::string name = next().text;
        next();
        call.keywords.push_back(Keyword{name, parse_test(), t.loc});
        keyword_seen = true;
      } else {
        Expr arg = parse_namedexpr();
        if (is_op("=")) fail("expression cannot contain assignment, perhaps you meant \"==\"?", t);
        if (is_kw("for") || (is_kw("async") && is_kw("for", 1))) {
          arg = parse_comprehension(std::move(arg), "generator", t.loc);
          if (count > 1 || (is_op(",") && !is_op(")", 1)))
            throw SyntaxError("Generator expression must be parenthesized", t.loc);
        }
        if (kwunpack_seen) fail("positional argument follows keyword argument unpacking", t);
        if (keyword_seen) fail("positional argument follows keyword argument", t);
        call.items.push_back(std::move(arg));
      }
      if (!is_op(",")) break;
      next();
    }
  }

  Expr parse_slice_item() {
    Location start = peek().loc;
    Expr lower;
    bool has_lower = false;
    if (!is_op(":")) {
      lower = is_op("*") ? parse_star_expression() : parse_namedexpr();
      has_lower = true;
      if (!is_op(":")) return lower;
    }
    Expr slice = make_expr(ExprKind::Slice, start);
    slice.items.push_back(has_lower ? std::move(lower) : make_expr(ExprKind::Constant, start));
    next();  // ':'
    slice.items.push_back(!is_op(":") && !is_op(",") && !is_op("]")
                              ? parse_test()
                              : make_expr(ExprKind::Constant, peek().loc));
    if (is_op(":")) {
      next();
      slice.items.push_back(!is_op(",") && !is_op("]") ? parse_test()
                                                       : make_expr(ExprKind::Constant, peek().loc));
    }
    return slice;
  }

  Expr parse_slices() {
    Location start = peek().loc;
    Expr first = parse_slice_item();
    if (!is_op(",")) return first;
    Expr tup = make_expr(ExprKind::Tuple, start);
    tup.items.push_back(std::move(first));
    while (is_op(",")) {
      next();
      if (is_op("]")) break;
      tup.items.push_back(parse_slice_item());
    }
    return tup;
  }

  Expr parse_comprehension(Expr element, const char* kind, Location start) {
    Expr comp = make_expr(ExprKind::Comprehension, start);
    comp.text = kind;
    comp.items.push_back(std::move(element));
    while (is_kw("for") || (is_kw("async") && is_kw("for", 1))) {
      if (is_kw("async")) next();
      next();
      Expr target = parse_target_list();
      validate_target(target);
      comp.items.push_back(std::move(target));
      expect_kw("in");
      comp.items.push_back(parse_or());
      while (is_kw("if")) {
        next();
        comp.items.push_back(parse_or());
      }
    }
    return comp;
  }

  Expr parse_star_named() {
    if (is_op("*")) return parse_star_expression();
    return parse_namedexpr();
  }

  Expr parse_atom() {
    const Token& t = peek();
    Location start = t.loc;
    switch (t.kind) {
      case TokenKind::Number: {
        Expr e = make_expr(ExprKind::Constant, start);
        e.constant = ConstKind::Number;
        e.text = next().text;
        return e;
      }
      case TokenKind::String:
        return parse_strings();
      case TokenKind::Name: {
        if (t.text == "None" || t.text == "True" || t.text == "False") {
          Expr e = make_expr(ExprKind::Constant, start);
          e.constant = t.text == "None" ? ConstKind::None
                       : t.text == "True" ? ConstKind::True
                                          : ConstKind::False;
          e.text = next().text;
          return e;
        }
        if (keywords().count(t.text)) fail_here();
        Expr e = make_expr(ExprKind::Name, start);
        e.text = next().text;
        return e;
      }
      case TokenKind::Op:
        break;
      default:
        fail_here();
    }
    if (t.text == "...") {
      next();
      Expr e = make_expr(ExprKind::Constant, start);
      e.constant = ConstKind::Ellipsis;
      e.text = "...";
      return e;
    }
    if (t.text == "(") {
      next();
      if (is_op(")")) {
        next();
        Expr e = make_expr(ExprKind::Tuple, start);
        e.parenthesized = true;
        return e;
      }
      if (is_kw("yield")) {
        Expr y = parse_yield();
        expect_op(")");
        y.parenthesized = true;
        return y;
      }
      Expr first = parse_star_named();
      if (is_kw("for") || (is_kw("async") && is_kw("for", 1))) {
        Expr comp = parse_comprehension(std::move(first), "generator", start);
        expect_op(")");
        comp.parenthesized = true;
        return comp;
      }
      if (is_op(")")) {
        next();
        if (first.kind == ExprKind::Starred)
          throw SyntaxError("cannot use starred expression here", first.loc);
        first.parenthesized = true;
        return first;
      }
      Expr tup = make_expr(ExprKind::Tuple, start);
      tup.parenthesized = true;
      tup.items.push_back(std::move(first));
      while (is_op(",")) {
        next();
        if (is_op(")")) break;
        tup.items.push_back(parse_star_named());
      }
      expect_op(")");
      return tup;
    }
    if (t.text == "[") {
      next();
      Expr list = make_expr(ExprKind::List, start);
      if (is_op("]")) {
        next();
        return list;
      }
      Expr first = parse_star_named();
      if (is_kw("for") || (is_kw("async") && is_kw("for", 1))) {
        Expr comp = parse_comprehension(std::move(first), "list", start);
        expect_op("]");
        return comp;
      }
      list.items.push_back(std::move(first));
      while (is_op(",")) {
        next();
        if (is_op("]")) break;
        list.items.push_back(parse_star_named());
      }
      expect_op("]");
      return list;
    }
    if (t.text == "{") {
      next();
      if (is_op("}")) {
        next();
        return make_expr(ExprKind::Dict, start);
      }
      if (is_op("**")) return parse_dict_rest(make_expr(ExprKind::Dict, start));
      Expr first = parse_star_named();
      if (is_op(":")) {
        next();
        Expr value = parse_test();
        if (is_kw("for") || (is_kw("async") && is_kw("for", 1))) {
          Expr pair = make_expr(ExprKind::Tuple, first.loc);
          pair.items.push_back(std::move(first));
          pair.items.push_back(std::move(value));
          Expr comp = parse_comprehension(std::move(pair), "dict", start);
          expect_op("}");
          return comp;
        }
        Expr dict = make_expr(ExprKind::Dict, start);
        dict.items.push_back(std::move(first));
        dict.items.push_back(std::move(value));
        if (is_op(",")) {
          next();
          return parse_dict_rest(std::move(dict));
        }
        expect_op("}");
        return dict;
      }
      if (is_kw("for") || (is_kw("async") && is_kw("for", 1))) {
        Expr comp = parse_comprehension(std::move(first), "set", start);
        expect_op("}");
        return comp;
      }
      Expr set = make_expr(ExprKind::Set, start);
      set.items.push_back(std::move(first));
      while (is_op(",")) {
        next();
        if (is_op("}")) break;
        set.items.push_back(parse_star_named());
      }
      expect_op("}");
      return set;
    }
    fail_here();
  }

  Expr parse_dict_rest(Expr dict) {
    while (!is_op("}")) {
      if (is_op("**")) {
        Location s = next().loc;
        Expr unpack = make_expr(ExprKind::DoubleStarred, s);
        unpack.items.push_back(parse_bitor());
        dict.items.push_back(std::move(unpack));
      } else {
        dict.items.push_back(parse_test());
        expect_op(":");
        dict.items.push_back(parse_test());
      }
      if (!is_op(",")) break;
      next();
    }
    expect_op("}");
    return dict;
  }

  Expr parse_strings() {
    Location start = peek().loc;
    Expr e = make_expr(ExprKind::Constant, start);
    bool first = true;
    while (peek().kind == TokenKind::String) {
      const Token& t = next();
      std::size_t q = t.text.find_first_of("'\"");
      std::string prefix;
      for (std::size_t k = 0; k < q; ++k)
        prefix += static_cast<char>(std::tolower(static_cast<unsigned char>(t.text[k])));
      bool raw = prefix.find('r') != std::string::npos;
      bool bytes = prefix.find('b') != std::string::npos;
      bool fstr = prefix.find('f') != std::string::npos;
      std::size_t qlen = t.text.size() - q >= 6 && t.text[q + 1] == t.text[q] &&
                                 t.text[q + 2] == t.text[q]
                             ? 3
                             : 1;
      std::string_view body =
          std::string_view(t.text).substr(q + qlen, t.text.size() - q - 2 * qlen);
      ConstKind kind = bytes ? ConstKind::Bytes : fstr ? ConstKind::FString : ConstKind::Str;
      if (!first && ((kind == ConstKind::Bytes) != (e.constant == ConstKind::Bytes)))
        fail("cannot mix bytes and nonbytes literals", t);
      if (first || kind == ConstKind::FString) e.constant = kind;
      e.text += raw ? std::string(body) : decode_string_body(body);
      first = false;
    }
    return e;
  }

  std::vector<Token> toks_;
  std::optional<SyntaxError> pending_;
  std::size_t eof_index_ = 0;
  bool match_committed_ = false;
  std::size_t i_ = 0;
  Location last_end_;
};

}  // namespace

Module parse(std::string_view text) {
  Parser parser(text);
  Module m = parser.parse_module();
  return m;
}

std::string dotted_name(const Expr& e) {
  if (e.kind == ExprKind::Name) return e.text;
  if (e.kind == ExprKind::Attribute && !e.items.empty()) {
    std::string base = dotted_name(e.items[0]);
    if (base.empty()) return {};
    return base + "." + e.text;
  }
  return {};
}

}  // namespace nncap::py
