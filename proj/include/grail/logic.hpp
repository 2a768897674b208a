#pragma once

// First-order rule language: terms, atoms, definite clauses with action
// heads, plus a line-oriented parser, printer and validator for the
// shipped rule files.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "grail/common.hpp"

namespace grail {

// Sorts are plain names; "object" matches any slot type.
using Sort = std::string;

enum class PredicateKind { BodySoft, BodyCrisp, ActionHead };

struct PredicateSignature {
  std::string name;
  int arity = 0;
  std::vector<Sort> arg_sorts;
  PredicateKind kind = PredicateKind::BodySoft;
};

struct SignatureSet {
  std::vector<PredicateSignature> predicates;

  const PredicateSignature* find(const std::string& name, int arity) const {
    for (const auto& p : predicates) {
      if (p.name == name && p.arity == arity) return &p;
    }
    return nullptr;
  }

  void add(PredicateSignature sig) {
    if (find(sig.name, sig.arity) != nullptr) {
      throw std::runtime_error("duplicate predicate signature: " + sig.name + "/" +
                               std::to_string(sig.arity));
    }
    predicates.push_back(std::move(sig));
  }
};

struct Term {
  enum class Kind { Variable, Constant } kind;
  std::string name;
  Sort sort;  // empty for variables until resolved against a signature

  static Term variable(std::string n) { return Term{Kind::Variable, std::move(n), {}}; }
  static Term constant(std::string n, Sort s = {}) {
    return Term{Kind::Constant, std::move(n), std::move(s)};
  }
  bool is_variable() const { return kind == Kind::Variable; }

  friend bool operator==(const Term& a, const Term& b) {
    return a.kind == b.kind && a.name == b.name;
  }
};

struct ClauseAtom {
  std::string predicate;  // resolved against the signature set at parse time
  std::vector<Term> args;

  friend bool operator==(const ClauseAtom& a, const ClauseAtom& b) {
    return a.predicate == b.predicate && a.args == b.args;
  }
};

struct SourceSpan {
  int line = 0;
  int column = 0;
};

struct Clause {
  ClauseAtom head;
  std::vector<ClauseAtom> body;
  int weight_slot = -1;
  SourceSpan source_span;

  Action action() const { return action_of_head(head.predicate); }

  std::string to_string() const {
    std::ostringstream os;
    auto print_atom = [&os](const ClauseAtom& a) {
      os << a.predicate << '(';
      for (std::size_t i = 0; i < a.args.size(); ++i) {
        if (i > 0) os << ',';
        os << a.args[i].name;
      }
      os << ')';
    };
    print_atom(head);
    os << " :- ";
    for (std::size_t i = 0; i < body.size(); ++i) {
      if (i > 0) os << ", ";
      print_atom(body[i]);
    }
    os << '.';
    return os.str();
  }

  friend bool operator==(const Clause& a, const Clause& b) {
    return a.head == b.head && a.body == b.body && a.weight_slot == b.weight_slot;
  }
};

struct RuleBase {
  std::vector<Clause> clauses;
  SignatureSet signatures;
  // Distinct actions covered by the clause heads, in the fixed Action order.
  std::vector<Action> actions;

  std::size_t size() const { return clauses.size(); }

  int action_index(Action a) const {
    for (std::size_t i = 0; i < actions.size(); ++i) {
      if (actions[i] == a) return static_cast<int>(i);
    }
    return -1;
  }

  void rebuild_action_list() {
    bool present[kNumActions] = {};
    for (const auto& c : clauses) present[static_cast<int>(c.action())] = true;
    actions.clear();
    for (int a = 0; a < kNumActions; ++a) {
      if (present[a]) actions.push_back(static_cast<Action>(a));
    }
  }

  friend bool operator==(const RuleBase& a, const RuleBase& b) {
    return a.clauses == b.clauses;
  }
};

struct ParseError : std::runtime_error {
  int line;
  int column;
  ParseError(int l, int c, const std::string& msg)
      : std::runtime_error("parse error at " + std::to_string(l) + ":" + std::to_string(c) +
                           ": " + msg),
        line(l),
        column(c) {}
};

namespace detail {

class RuleParser {
 public:
  RuleParser(std::string text, const SignatureSet& sigs, int max_body_len)
      : text_(std::move(text)), sigs_(sigs), max_body_len_(max_body_len) {}

  RuleBase parse() {
    RuleBase rb;
    rb.signatures = sigs_;
    skip_ws();
    while (!eof()) {
      rb.clauses.push_back(parse_clause());
      rb.clauses.back().weight_slot = static_cast<int>(rb.clauses.size()) - 1;
      skip_ws();
    }
    rb.rebuild_action_list();
    return rb;
  }

 private:
  bool eof() const { return pos_ >= text_.size(); }
  char peek() const { return eof() ? '\0' : text_[pos_]; }

  void advance() {
    if (text_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void skip_ws() {
    while (!eof()) {
      char c = peek();
      if (c == '%') {
        while (!eof() && peek() != '\n') advance();
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        advance();
      } else {
        break;
      }
    }
  }

  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(line_, col_, msg); }

  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    advance();
  }

  void expect_str(const char* s) {
    for (const char* p = s; *p; ++p) expect(*p);
  }

  std::string parse_ident() {
    if (!std::isalpha(static_cast<unsigned char>(peek()))) fail("expected identifier");
    std::string out;
    while (!eof()) {
      char c = peek();
      if (std::isalnum(static_cast<unsigned char>(c)) || c == '_') {
        out.push_back(c);
        advance();
      } else {
        break;
      }
    }
    return out;
  }

  ClauseAtom parse_atom(bool head_position) {
    int line = line_, col = col_;
    std::string name = parse_ident();
    skip_ws();
    expect('(');
    std::vector<Term> args;
    skip_ws();
    while (true) {
      std::string t = parse_ident();
      if (std::isupper(static_cast<unsigned char>(t[0]))) {
        args.push_back(Term::variable(t));
      } else {
        args.push_back(Term::constant(t));
      }
      skip_ws();
      if (peek() == ',') {
        advance();
        skip_ws();
        continue;
      }
      break;
    }
    expect(')');

    const PredicateSignature* sig = sigs_.find(name, static_cast<int>(args.size()));
    if (sig == nullptr) {
      bool name_known = false;
      for (const auto& p : sigs_.predicates) name_known |= (p.name == name);
      if (name_known) throw ParseError(line, col, "arity mismatch for predicate '" + name + "'");
      throw ParseError(line, col, "unknown predicate '" + name + "/" +
                                      std::to_string(args.size()) + "'");
    }
    if (!head_position && sig->kind == PredicateKind::ActionHead) {
      throw ParseError(line, col, "action-head predicate '" + name + "' used in clause body");
    }
    if (head_position && sig->kind != PredicateKind::ActionHead) {
      throw ParseError(line, col, "body predicate '" + name + "' used as clause head");
    }
    // attach sorts to constants from the signature
    for (std::size_t i = 0; i < args.size(); ++i) {
      if (!args[i].is_variable()) args[i].sort = sig->arg_sorts[i];
    }
    return ClauseAtom{std::move(name), std::move(args)};
  }

  Clause parse_clause() {
    Clause c;
    c.source_span = SourceSpan{line_, col_};
    c.head = parse_atom(true);
    skip_ws();
    expect_str(":-");
    skip_ws();
    while (true) {
      c.body.push_back(parse_atom(false));
      skip_ws();
      if (peek() == ',') {
        advance();
        skip_ws();
        continue;
      }
      break;
    }
    expect('.');
    if (static_cast<int>(c.body.size()) > max_body_len_) {
      throw ParseError(c.source_span.line, c.source_span.column,
                       "clause body longer than " + std::to_string(max_body_len_) + " atoms");
    }
    return c;
  }

  std::string text_;
  const SignatureSet& sigs_;
  int max_body_len_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

}  // namespace detail

inline constexpr int kDefaultMaxBodyLen = 8;

inline RuleBase parse_rulebase(const std::string& text, const SignatureSet& signatures,
                               int max_body_len = kDefaultMaxBodyLen) {
  return detail::RuleParser(text, signatures, max_body_len).parse();
}

inline std::string pretty_print(const RuleBase& rb) {
  std::string out;
  for (const auto& c : rb.clauses) {
    out += c.to_string();
    out += '\n';
  }
  return out;
}

struct Diagnostic {
  enum class Severity { Warning, Error } severity;
  std::string message;
  SourceSpan span;
};

// Returns warnings and errors; an empty list means the rule base satisfies
// every structural invariant. Head-only variables (the X in up_air(X)) are
// warnings: heads are grounded to a designated per-action atom, so an
// unbound head variable is expected in the shipped rule files.
inline std::vector<Diagnostic> validate_rulebase(const RuleBase& rb) {
  std::vector<Diagnostic> out;
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& c : rb.clauses) {
    std::set<std::string> body_vars;
    for (const auto& a : c.body) {
      const auto* sig = rb.signatures.find(a.predicate, static_cast<int>(a.args.size()));
      if (sig != nullptr && sig->kind == PredicateKind::ActionHead) {
        out.push_back({Diagnostic::Severity::Error,
                       "action-head predicate '" + a.predicate + "' in body", c.source_span});
      }
      for (const auto& t : a.args) {
        if (t.is_variable()) body_vars.insert(t.name);
      }
    }
    for (const auto& t : c.head.args) {
      if (t.is_variable() && body_vars.count(t.name) == 0) {
        out.push_back({Diagnostic::Severity::Warning,
                       "head-only variable '" + t.name + "' in clause for " + c.head.predicate,
                       c.source_span});
      }
    }
    std::string body_key = c.to_string();
    body_key.erase(0, body_key.find(":-"));
    if (!seen.insert({c.head.predicate, body_key}).second) {
      out.push_back({Diagnostic::Severity::Warning,
                     "duplicate clause for " + c.head.predicate, c.source_span});
    }
  }
  // weight slots must be a permutation of 0..M-1
  std::vector<int> slots;
  for (const auto& c : rb.clauses) slots.push_back(c.weight_slot);
  std::sort(slots.begin(), slots.end());
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i] != static_cast<int>(i)) {
      out.push_back({Diagnostic::Severity::Error, "weight slots are not a permutation", {}});
      break;
    }
  }
  return out;
}

inline bool has_errors(const std::vector<Diagnostic>& diags) {
  return std::any_of(diags.begin(), diags.end(), [](const Diagnostic& d) {
    return d.severity == Diagnostic::Severity::Error;
  });
}

}  // namespace grail
