#include <gtest/gtest.h>

#include "nncap/pysyntax.hpp"
#include "support.hpp"

namespace nncap::py {
namespace {

struct ErrorCase {
  const char* source;
  int line;
  int column;
  const char* message;
};

// Locations and messages as reported by CPython 3.10.
const ErrorCase kErrors[] = {
    {"x = (1,\n", 1, 5, "'(' was never closed"},
    {"def f(:\n    pass\n", 1, 7, "invalid syntax"},
    {"if x\n    y = 1\n", 1, 5, "expected ':'"},
    {"for a in b:\nx = 1\n", 2, 1, "expected an indented block after 'for' statement on line 1"},
    {"x = 1\n  y = 2\n", 2, 2, "unexpected indent"},
    {"s = 'abc\n", 1, 5, "unterminated string literal (detected at line 1)"},
    {"return = 3\n", 1, 8, "invalid syntax"},
    {"class A:\n    def f(self):\n        pass\n    x = [1, 2\n", 4, 9, "'[' was never closed"},
};

TEST(PySyntax, ErrorLocationsMatchCPython) {
  for (const auto& c : kErrors) {
    try {
      parse(c.source);
      ADD_FAILURE() << "parsed: " << c.source;
    } catch (const SyntaxError& e) {
      EXPECT_EQ(e.location().line, c.line) << c.source;
      EXPECT_EQ(e.location().column, c.column) << c.source;
      EXPECT_EQ(e.message(), c.message) << c.source;
    }
  }
}

TEST(PySyntax, AcceptsModernSyntax) {
  const char* ok[] = {
      "match cmd:\n    case [x, *rest] if x:\n        pass\n    case {'k': v} | None:\n        pass\n",
      "match = 3\nmatch.x = 1\nprint(match)\n",
      "async def f():\n    async with a as b:\n        await b\n",
      "x = f'{a!r:>{width}}'\n",
      "def f(a, /, b, *, c=1, **kw) -> int:\n    return (y := a)\n",
      "@dec\nclass A(B, metaclass=M):\n    x: int = 1\n",
      "try:\n    pass\nexcept (A, B) as e:\n    raise C from e\nelse:\n    pass\nfinally:\n    pass\n",
      "lam = lambda *a, **k: {**k, 'x': [i for i in a if i]}\n",
      "x = a[1:2, ::3, ...]\n",
      "s = '''multi\nline'''\nb = rb'\\d'\n",
  };
  for (const char* src : ok) EXPECT_NO_THROW(parse(src)) << src;
}

TEST(PySyntax, ParsesTinyModelFixture) {
  Module m = parse(test::read_file(test::kFixtures / "models" / "tiny_lstm.py"));
  bool has_net = false;
  for (const auto& s : m.body) has_net |= s.kind == StmtKind::ClassDef && s.name == "Net";
  EXPECT_TRUE(has_net);
}

TEST(PySyntax, DottedNames) {
  Module m = parse("torch.nn.LSTM(3, 4)\n");
  ASSERT_EQ(m.body.size(), 1u);
  const Expr& call = m.body[0].exprs.at(0);
  ASSERT_EQ(call.kind, ExprKind::Call);
  EXPECT_EQ(dotted_name(call.items[0]), "torch.nn.LSTM");
  EXPECT_EQ(dotted_name(call), "");
}

TEST(PySyntax, ClassifierMarksStringsAndComments) {
  std::string text = "x = '(' # [\ny = \"\"\"{\n";
  Classification c = classify(text);
  EXPECT_EQ(c.classes[text.find('(')], CharClass::String);
  EXPECT_EQ(c.classes[text.find('[')], CharClass::Comment);
  EXPECT_EQ(c.classes[0], CharClass::Code);
  EXPECT_TRUE(c.ends_in_triple);
}

TEST(PySyntax, TokenizerTracksIndentation) {
  auto toks = tokenize("if a:\n    b\n");
  int indents = 0, dedents = 0;
  for (const auto& t : toks) {
    indents += t.kind == TokenKind::Indent;
    dedents += t.kind == TokenKind::Dedent;
  }
  EXPECT_EQ(indents, 1);
  EXPECT_EQ(dedents, 1);
  EXPECT_EQ(toks.back().kind, TokenKind::EndMarker);
}

}  // namespace
}  // namespace nncap::py
