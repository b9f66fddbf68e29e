#include "nncap/contract.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <set>

#include "nncap/pysyntax.hpp"

namespace nncap {

namespace {

constexpr std::array<std::string_view, 8> kRuleNames = {
    "NET_CLASS",       "CTOR_SIG",         "METHODS",      "HYPERPARAMS",
    "FORBIDDEN_IDENT", "VOCAB_TO_DECODER", "TUPLE_RETURN", "IGNORE_INDEX"};

std::string_view last_component(std::string_view dotted) {
  auto dot = dotted.rfind('.');
  return dot == std::string_view::npos ? dotted : dotted.substr(dot + 1);
}

std::string callee_name(const py::Expr& call) {
  if (call.kind != py::ExprKind::Call || call.items.empty()) return {};
  return py::dotted_name(call.items.front());
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

// Maps local names bound by imports to the fully qualified module path.
class ImportAliases {
 public:
  explicit ImportAliases(const py::Module& m) {
    py::walk(
        m,
        [&](const py::Stmt& s) {
          if (s.kind == py::StmtKind::Import) {
            for (const auto& a : s.aliases) {
              if (!a.asname.empty()) aliases_[a.asname] = a.name;
            }
          } else if (s.kind == py::StmtKind::ImportFrom && s.level == 0) {
            for (const auto& a : s.aliases) {
              if (a.name == "*") continue;
              aliases_[a.asname.empty() ? a.name : a.asname] = s.name + "." + a.name;
            }
          }
          return true;
        },
        [](const py::Expr&) { return false; });
  }

  std::string canonical(std::string_view dotted) const {
    std::string_view head = dotted.substr(0, dotted.find('.'));
    auto it = aliases_.find(std::string(head));
    if (it == aliases_.end()) return std::string(dotted);
    return it->second + std::string(dotted.substr(head.size()));
  }

  // True when the bare name was imported rather than defined locally.
  bool is_imported(const std::string& name) const { return aliases_.count(name) != 0; }

 private:
  std::map<std::string, std::string> aliases_;
};

bool is_module_base(const py::Expr& base, const ImportAliases& aliases) {
  std::string d = py::dotted_name(base);
  if (d.empty()) return false;
  if (d == "Module") return true;  // imported-name form
  std::string c = aliases.canonical(d);
  return d == "nn.Module" || ends_with(c, "nn.Module");
}

bool is_canonical_hyperparameters(const py::Stmt& fn) {
  if (!fn.params.empty() || fn.body.size() != 1) return false;
  const py::Stmt& ret = fn.body.front();
  if (ret.kind != py::StmtKind::Return || ret.exprs.size() != 1) return false;
  const py::Expr& set = ret.exprs.front();
  if (set.kind != py::ExprKind::Set || set.items.size() != 2) return false;
  std::set<std::string> names;
  for (const auto& item : set.items) {
    if (item.kind != py::ExprKind::Constant || item.constant != py::ConstKind::Str) return false;
    names.insert(item.text);
  }
  return names == std::set<std::string>{"lr", "momentum"};
}

const py::Stmt* find_method(const py::Stmt& cls, std::string_view name) {
  for (const auto& s : cls.body)
    if (s.kind == py::StmtKind::FunctionDef && s.name == name) return &s;
  return nullptr;
}

// Return statements of a function body, not descending into nested scopes.
void collect_returns(const std::vector<py::Stmt>& body, std::vector<const py::Stmt*>& out) {
  for (const auto& s : body) {
    if (s.kind == py::StmtKind::FunctionDef || s.kind == py::StmtKind::ClassDef) continue;
    if (s.kind == py::StmtKind::Return) out.push_back(&s);
    for (const auto* block : {&s.body, &s.orelse, &s.handlers, &s.finalbody})
      collect_returns(*block, out);
  }
}

template <typename Fn>
void for_each_expr(const py::Module& m, Fn&& fn) {
  py::walk(
      m, [](const py::Stmt&) { return true; },
      [&](const py::Expr& e) {
        fn(e);
        return true;
      });
}

bool is_zero_literal(const py::Expr& e) {
  return e.kind == py::ExprKind::Constant && e.constant == py::ConstKind::Number && e.text == "0";
}

DecoderType classify_module(const py::Module& m) {
  static const std::set<std::string_view> transformer = {
      "TransformerDecoder", "TransformerDecoderLayer", "MultiheadAttention", "Transformer"};
  bool has_transformer = false;
  std::optional<std::pair<py::Location, DecoderType>> recurrent;
  for_each_expr(m, [&](const py::Expr& e) {
    if (e.kind != py::ExprKind::Call) return;
    std::string name = callee_name(e);
    std::string_view last = last_component(name);
    if (last.empty()) return;
    if (transformer.count(last)) {
      has_transformer = true;
      return;
    }
    DecoderType kind;
    if (last == "LSTM" || last == "LSTMCell") kind = DecoderType::LSTM;
    else if (last == "GRU" || last == "GRUCell") kind = DecoderType::GRU;
    else return;
    auto before = [](py::Location a, py::Location b) {
      return a.line < b.line || (a.line == b.line && a.column < b.column);
    };
    if (!recurrent || before(e.loc, recurrent->first)) recurrent = {e.loc, kind};
  });
  if (has_transformer) return DecoderType::Transformer;
  return recurrent ? recurrent->second : DecoderType::Unknown;
}

py::Module parse_or_throw(std::string_view source) {
  try {
    return py::parse(source);
  } catch (const py::SyntaxError& e) {
    throw ContractError("source does not parse (line " + std::to_string(e.location().line) +
                        "): " + e.message());
  }
}

}  // namespace

std::string_view to_string(RuleId id) { return kRuleNames[static_cast<std::size_t>(id)]; }

std::optional<RuleId> rule_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kRuleNames.size(); ++i)
    if (kRuleNames[i] == s) return static_cast<RuleId>(i);
  return std::nullopt;
}

std::string_view to_string(Severity s) { return s == Severity::Error ? "error" : "warning"; }

Severity default_severity(RuleId id) {
  return id == RuleId::IgnoreIndex ? Severity::Warning : Severity::Error;
}

std::size_t ContractReport::error_count() const {
  return static_cast<std::size_t>(std::count_if(violations.begin(), violations.end(), [](const Violation& v) {
    return v.severity == Severity::Error;
  }));
}

ContractReport check(const CandidateSource& source, const ContractConfig& config) {
  return check(source.text, config);
}

ContractReport check(std::string_view source, const ContractConfig& config) {
  py::Module m = parse_or_throw(source);
  ImportAliases aliases(m);
  ContractReport report;
  report.rules_version = config.rules_version;
  auto add = [&](RuleId rule, py::Location loc, std::string message,
                 std::optional<std::string> ident = std::nullopt,
                 std::optional<Severity> severity = std::nullopt) {
    report.violations.push_back(Violation{rule, severity.value_or(default_severity(rule)),
                                          loc.line, loc.column, std::move(message),
                                          std::move(ident)});
  };

  // NET_CLASS
  std::vector<const py::Stmt*> nets;
  for (const auto& s : m.body)
    if (s.kind == py::StmtKind::ClassDef && s.name == "Net") nets.push_back(&s);
  const py::Stmt* net = nets.empty() ? nullptr : nets.front();
  if (!net) {
    add(RuleId::NetClass, {1, 1}, "no top-level class named Net", "Net");
  } else {
    for (std::size_t k = 1; k < nets.size(); ++k)
      add(RuleId::NetClass, nets[k]->loc, "class Net is defined more than once", "Net");
    bool ok = std::any_of(net->exprs.begin(), net->exprs.end(),
                          [&](const py::Expr& b) { return is_module_base(b, aliases); });
    if (!ok) add(RuleId::NetClass, net->loc, "class Net must subclass nn.Module", "Net");
  }

  if (net) {
    // CTOR_SIG
    const py::Stmt* ctor = find_method(*net, "__init__");
    static const std::vector<std::string> expected = {"self", "in_shape", "out_shape", "prm",
                                                      "device"};
    if (!ctor) {
      add(RuleId::CtorSig, net->loc,
          "class Net has no __init__(self, in_shape, out_shape, prm, device)", "__init__");
    } else {
      std::vector<std::string> positional;
      for (const auto& p : ctor->params) {
        switch (p.kind) {
          case py::ParamKind::PositionalOnly:
          case py::ParamKind::Positional:
            positional.push_back(p.name);
            break;
          case py::ParamKind::KeywordOnly:
            if (p.has_default)
              add(RuleId::CtorSig, p.loc,
                  "extra keyword-only constructor parameter '" + p.name + "'", p.name,
                  Severity::Warning);
            else
              add(RuleId::CtorSig, p.loc,
                  "keyword-only constructor parameter '" + p.name + "' has no default", p.name);
            break;
          case py::ParamKind::VarArgs:
          case py::ParamKind::VarKeywords:
            add(RuleId::CtorSig, p.loc,
                "constructor must not take variadic parameter '" + p.name + "'", p.name);
            break;
        }
      }
      if (positional != expected) {
        std::string got;
        for (const auto& n : positional) got += (got.empty() ? "" : ", ") + n;
        add(RuleId::CtorSig, ctor->loc,
            "constructor parameters must be (self, in_shape, out_shape, prm, device), got (" +
                got + ")",
            "__init__");
      }
    }

    // METHODS
    for (const auto& method : config.required_methods)
      if (!find_method(*net, method))
        add(RuleId::Methods, net->loc, "class Net is missing method '" + method + "'", method);

    // TUPLE_RETURN
    if (const py::Stmt* forward = find_method(*net, "forward")) {
      std::vector<const py::Stmt*> returns;
      collect_returns(forward->body, returns);
      if (returns.empty())
        add(RuleId::TupleReturn, forward->loc,
            "forward never returns; it must return (logits, hidden_state)", "forward");
      for (const py::Stmt* r : returns) {
        bool ok = r->exprs.size() == 1 && r->exprs.front().kind == py::ExprKind::Tuple &&
                  r->exprs.front().items.size() == 2 &&
                  std::none_of(r->exprs.front().items.begin(), r->exprs.front().items.end(),
                               [](const py::Expr& e) { return e.kind == py::ExprKind::Starred; });
        if (!ok)
          add(RuleId::TupleReturn, r->loc,
              "forward must return a two-element tuple (logits, hidden_state)", "forward");
      }
    }
  }

  // HYPERPARAMS
  std::vector<const py::Stmt*> hp;
  for (const auto& s : m.body)
    if (s.kind == py::StmtKind::FunctionDef && s.name == "supported_hyperparameters")
      hp.push_back(&s);
  if (hp.empty())
    add(RuleId::Hyperparams, {1, 1}, "missing top-level supported_hyperparameters()",
        "supported_hyperparameters");
  for (const py::Stmt* fn : hp)
    if (!is_canonical_hyperparameters(*fn))
      add(RuleId::Hyperparams, fn->loc,
          "supported_hyperparameters() must return exactly {'lr', 'momentum'}",
          "supported_hyperparameters");

  // FORBIDDEN_IDENT, VOCAB_TO_DECODER, IGNORE_INDEX
  static const std::set<std::string_view> decoder_ctors = {"TransformerDecoder",
                                                           "TransformerDecoderLayer", "Transformer"};
  static const std::set<std::string_view> losses = {"CrossEntropyLoss", "NLLLoss", "cross_entropy",
                                                    "nll_loss"};
  for_each_expr(m, [&](const py::Expr& e) {
    if (e.kind == py::ExprKind::Attribute || e.kind == py::ExprKind::Name) {
      std::string d = py::dotted_name(e);
      if (d.empty()) return;
      if (e.kind == py::ExprKind::Name && !aliases.is_imported(d)) {
        // Locally bound names only match when written in full.
        for (const auto& entry : config.deny_list)
          if (d == entry) add(RuleId::ForbiddenIdent, e.loc, "'" + d + "' is not a real class", d);
        return;
      }
      std::string c = aliases.canonical(d);
      for (const auto& entry : config.deny_list) {
        if (d == entry || c == entry || ends_with(c, "." + entry)) {
          add(RuleId::ForbiddenIdent, e.loc, "'" + d + "' is not a real class", d);
          break;
        }
      }
      return;
    }
    if (e.kind != py::ExprKind::Call) return;
    std::string name = callee_name(e);
    std::string_view last = last_component(name);
    if (decoder_ctors.count(last)) {
      for (const auto& kw : e.keywords)
        if (kw.name && *kw.name == "vocab_size")
          add(RuleId::VocabToDecoder, kw.loc,
              "vocab_size must not be passed to " + std::string(last), "vocab_size");
      for (std::size_t k = 1; k < e.items.size(); ++k)
        if (last_component(py::dotted_name(e.items[k])) == "vocab_size")
          add(RuleId::VocabToDecoder, e.items[k].loc,
              "vocab_size must not be passed to " + std::string(last), "vocab_size");
    }
    if (losses.count(last)) {
      bool ok = std::any_of(e.keywords.begin(), e.keywords.end(), [](const py::Keyword& kw) {
        return kw.name && *kw.name == "ignore_index" && is_zero_literal(kw.value);
      });
      if (!ok)
        add(RuleId::IgnoreIndex, e.loc, std::string(last) + " should use ignore_index=0",
            std::string(last));
    }
  });

  std::stable_sort(report.violations.begin(), report.violations.end(),
                   [](const Violation& a, const Violation& b) {
                     if (a.line != b.line) return a.line < b.line;
                     if (a.column != b.column) return a.column < b.column;
                     return a.rule < b.rule;
                   });
  report.passed = report.error_count() == 0;
  report.decoder_type = classify_module(m);
  return report;
}

DecoderType classify_decoder(std::string_view source) {
  return classify_module(parse_or_throw(source));
}

std::string explain(const ContractReport& report) {
  if (report.violations.empty()) throw ContractError("nothing to explain: report is clean");
  std::string out;
  for (const auto& v : report.violations) {
    out += "- line " + std::to_string(v.line) + ", column " + std::to_string(v.column) + ": [" +
           std::string(to_string(v.rule)) + "] " + v.message;
    if (v.severity == Severity::Warning) out += " (warning)";
    out += '\n';
  }
  return out;
}

std::string explain(const SyntaxFailure& failure) {
  return "- line " + std::to_string(failure.line) + ", column " + std::to_string(failure.column) +
         ": [SYNTAX] " + failure.message + "\n";
}

nlohmann::json to_json(const ContractReport& report) {
  nlohmann::json violations = nlohmann::json::array();
  for (const auto& v : report.violations) {
    nlohmann::json j = {{"rule_id", to_string(v.rule)},
                        {"severity", to_string(v.severity)},
                        {"line", v.line},
                        {"column", v.column},
                        {"message", v.message}};
    if (v.identifier) j["identifier"] = *v.identifier;
    violations.push_back(std::move(j));
  }
  return {{"rules_version", report.rules_version},
          {"passed", report.passed},
          {"decoder_type", to_string(report.decoder_type)},
          {"violations", std::move(violations)}};
}

nlohmann::json to_json(const SyntaxFailure& failure) {
  return {{"passed", false},
          {"syntax_error",
           {{"line", failure.line}, {"column", failure.column}, {"message", failure.message}}}};
}

}  // namespace nncap
