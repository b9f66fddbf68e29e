#pragma once

// Python source model used by the sanitizer and the contract checker: a
// tolerant character classifier, a strict tokenizer and a recursive-descent
// parser that produces a small AST.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace nncap::py {

// 1-based line and column (column counts bytes).
struct Location {
  int line = 1;
  int column = 1;

  friend bool operator==(const Location&, const Location&) = default;
};

class SyntaxError : public std::runtime_error {
 public:
  SyntaxError(std::string message, Location loc)
      : std::runtime_error(message), message_(std::move(message)), loc_(loc) {}

  const std::string& message() const { return message_; }
  Location location() const { return loc_; }

 private:
  std::string message_;
  Location loc_;
};

// ---------------------------------------------------------------------------
// Tolerant lexical classification. Never fails; unterminated constructs run
// to the end of their line (single-quoted strings) or to EOF (triple quotes).

enum class CharClass : std::uint8_t { Code, String, Comment };

struct Classification {
  std::vector<CharClass> classes;  // one per byte of the input
  bool ends_in_string = false;     // EOF inside a string literal
  bool ends_in_triple = false;     // EOF inside a triple-quoted literal
  bool ends_in_comment = false;
};

Classification classify(std::string_view text);

// ---------------------------------------------------------------------------
// Strict tokenizer.

enum class TokenKind { Name, Number, String, Op, Newline, Indent, Dedent, EndMarker };

struct Token {
  TokenKind kind;
  std::string text;
  Location loc;
  Location end;
};

// Throws SyntaxError.
std::vector<Token> tokenize(std::string_view text);

// ---------------------------------------------------------------------------
// AST

enum class ExprKind {
  Name,
  Constant,
  Attribute,   // items[0] = value, text = attr
  Call,        // items[0] = callee, items[1..] = positional args, keywords
  Subscript,   // items[0] = value, items[1] = slice
  Slice,       // items = lower, upper, step (absent parts are Constant None)
  Starred,
  DoubleStarred,
  Tuple,
  List,
  Set,
  Dict,        // items flattened; key/value pairs or DoubleStarred entries
  BinOp,       // text = operator
  UnaryOp,
  BoolOp,
  Compare,     // items = operands, text = space separated operators
  IfExp,       // items = body, test, orelse
  Lambda,
  Comprehension,  // text = list/set/dict/generator
  NamedExpr,
  Yield,
  YieldFrom,
  Await,
};

enum class ConstKind { None, True, False, Ellipsis, Number, Str, Bytes, FString };

struct Keyword;

struct Expr {
  ExprKind kind = ExprKind::Constant;
  Location loc;
  std::string text;
  ConstKind constant = ConstKind::None;
  std::vector<Expr> items;
  std::vector<Keyword> keywords;
  bool parenthesized = false;
};

struct Keyword {
  std::optional<std::string> name;  // nullopt for **kwargs
  Expr value;
  Location loc;
};

enum class ParamKind { PositionalOnly, Positional, VarArgs, KeywordOnly, VarKeywords };

struct Param {
  std::string name;
  ParamKind kind = ParamKind::Positional;
  bool has_default = false;
  Location loc;
  std::vector<Expr> exprs;  // annotation and/or default
};

struct Alias {
  std::string name;
  std::string asname;
};

enum class StmtKind {
  FunctionDef,
  ClassDef,
  Return,
  Delete,
  Assign,
  AugAssign,
  AnnAssign,
  For,
  While,
  If,
  With,
  Raise,
  Try,
  ExceptHandler,
  Assert,
  Import,
  ImportFrom,
  Global,
  Nonlocal,
  ExprStmt,
  Pass,
  Break,
  Continue,
  Match,      // exprs[0] = subject, handlers = cases
  MatchCase,  // exprs = pattern [, guard]
};

struct Stmt {
  StmtKind kind = StmtKind::Pass;
  Location loc;
  Location end;
  std::string name;  // def/class name, ImportFrom module
  bool is_async = false;
  int level = 0;     // ImportFrom relative dots
  std::vector<Param> params;
  std::vector<Expr> decorators;
  std::vector<Expr> exprs;
  std::vector<Keyword> keywords;
  std::vector<Alias> aliases;
  std::vector<Stmt> body;
  std::vector<Stmt> orelse;
  std::vector<Stmt> handlers;
  std::vector<Stmt> finalbody;
};

struct Module {
  std::vector<Stmt> body;
};

// Throws SyntaxError.
Module parse(std::string_view text);

// Dotted rendering of Name/Attribute chains ("torch.nn.LSTM"); empty for
// anything else.
std::string dotted_name(const Expr& e);

// ---------------------------------------------------------------------------
// Traversal. Visitors return false to stop descending into a node's children.

template <typename ExprFn>
void walk_expr(const Expr& e, ExprFn&& fn) {
  if (!fn(e)) return;
  for (const auto& child : e.items) walk_expr(child, fn);
  for (const auto& kw : e.keywords) walk_expr(kw.value, fn);
}

template <typename StmtFn, typename ExprFn>
void walk(const Stmt& s, StmtFn&& on_stmt, ExprFn&& on_expr) {
  if (!on_stmt(s)) return;
  for (const auto& d : s.decorators) walk_expr(d, on_expr);
  for (const auto& p : s.params)
    for (const auto& e : p.exprs) walk_expr(e, on_expr);
  for (const auto& e : s.exprs) walk_expr(e, on_expr);
  for (const auto& kw : s.keywords) walk_expr(kw.value, on_expr);
  for (const auto* block : {&s.body, &s.orelse, &s.handlers, &s.finalbody})
    for (const auto& child : *block) walk(child, on_stmt, on_expr);
}

template <typename StmtFn, typename ExprFn>
void walk(const Module& m, StmtFn&& on_stmt, ExprFn&& on_expr) {
  for (const auto& s : m.body) walk(s, on_stmt, on_expr);
}

}  // namespace nncap::py
