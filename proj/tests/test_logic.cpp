#include <doctest.h>

#include <fstream>
#include <sstream>

#include "grail/domains.hpp"
#include "grail/logic.hpp"

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

const std::string kDataDir = GRAIL_DATA_DIR;

}  // namespace

TEST_CASE("action names map to the fixed action order") {
  CHECK(grail::action_of_head("noop_far_enemy") == grail::Action::Noop);
  CHECK(grail::action_of_head("up_dodge_left") == grail::Action::Up);
  CHECK(grail::action_of_head("fire_right") == grail::Action::Fire);
  CHECK(grail::action_of_head("left_bonus") == grail::Action::Left);
  CHECK_THROWS(grail::action_of_head("jump_high"));
}

TEST_CASE("shipped rule files parse with the expected clause counts") {
  auto asterix = grail::parse_rulebase(slurp(kDataDir + "/asterix.rules"),
                                       grail::asterix_signatures());
  CHECK(asterix.size() == 12);
  auto lure = grail::parse_rulebase(slurp(kDataDir + "/asterix_lure.rules"),
                                    grail::asterix_signatures());
  CHECK(lure.size() == 16);
  auto seaquest = grail::parse_rulebase(slurp(kDataDir + "/seaquest.rules"),
                                        grail::seaquest_signatures());
  CHECK(seaquest.size() == 18);
}

TEST_CASE("weight slots follow file order") {
  auto rb = grail::parse_rulebase(slurp(kDataDir + "/asterix.rules"),
                                  grail::asterix_signatures());
  for (std::size_t i = 0; i < rb.size(); ++i) {
    CHECK(rb.clauses[i].weight_slot == static_cast<int>(i));
  }
}

TEST_CASE("parse / pretty-print round trip is the identity") {
  auto sigs = grail::asterix_signatures();
  auto rb = grail::parse_rulebase(slurp(kDataDir + "/asterix.rules"), sigs);
  std::string printed = grail::pretty_print(rb);
  auto rb2 = grail::parse_rulebase(printed, sigs);
  CHECK(rb == rb2);
  CHECK(grail::pretty_print(rb2) == printed);
}

TEST_CASE("whitespace and comments do not change the parse") {
  auto sigs = grail::asterix_signatures();
  auto a = grail::parse_rulebase("left_bonus(X) :- on_right(O1,O2), type(O1,player), "
                                 "type(O2,bonus), same_row(O1,O2), closeby(O1,O2), visible(O2).",
                                 sigs);
  auto b = grail::parse_rulebase("% a comment\n  left_bonus( X )\t:-\n  on_right(O1, O2),"
                                 "type(O1,player),type(O2,bonus),\n  same_row(O1,O2),"
                                 "closeby(O1,O2),visible(O2)\n  .  % trailing\n",
                                 sigs);
  CHECK(a == b);
}

TEST_CASE("parser rejects malformed input with positions") {
  auto sigs = grail::asterix_signatures();
  SUBCASE("unknown predicate") {
    CHECK_THROWS_AS(grail::parse_rulebase("up_lure(X) :- teleports(O1).", sigs),
                    grail::ParseError);
  }
  SUBCASE("arity mismatch") {
    try {
      grail::parse_rulebase("up_lure(X) :- closeby(O1).", sigs);
      FAIL("expected ParseError");
    } catch (const grail::ParseError& e) {
      CHECK(e.line == 1);
      CHECK(std::string(e.what()).find("arity") != std::string::npos);
    }
  }
  SUBCASE("action head used in a body") {
    CHECK_THROWS_AS(grail::parse_rulebase("up_lure(X) :- left_bonus(O1).", sigs),
                    grail::ParseError);
  }
  SUBCASE("body predicate used as head") {
    CHECK_THROWS_AS(grail::parse_rulebase("closeby(X,Y) :- visible(X).", sigs),
                    grail::ParseError);
  }
  SUBCASE("missing terminator") {
    CHECK_THROWS_AS(grail::parse_rulebase("up_lure(X) :- visible(O1)", sigs),
                    grail::ParseError);
  }
  SUBCASE("error carries the line number") {
    try {
      grail::parse_rulebase("up_lure(X) :- visible(O1).\ndown_lure(X) :- nope(O1).", sigs);
      FAIL("expected ParseError");
    } catch (const grail::ParseError& e) {
      CHECK(e.line == 2);
    }
  }
}

TEST_CASE("validation diagnostics") {
  auto sigs = grail::asterix_signatures();
  SUBCASE("head-only variable is a warning, not an error") {
    auto rb = grail::parse_rulebase("up_lure(X) :- visible(O1).", sigs);
    auto diags = grail::validate_rulebase(rb);
    CHECK(!grail::has_errors(diags));
    bool warned = false;
    for (const auto& d : diags) warned = warned || d.message.find("X") != std::string::npos;
    CHECK(warned);
  }
  SUBCASE("duplicate clause is flagged") {
    auto rb = grail::parse_rulebase(
        "up_lure(X) :- visible(O1).\nup_lure(X) :- visible(O1).", sigs);
    auto diags = grail::validate_rulebase(rb);
    CHECK(diags.size() >= 1);
  }
  SUBCASE("shipped rule bases validate cleanly") {
    auto rb = grail::parse_rulebase(slurp(kDataDir + "/seaquest.rules"),
                                    grail::seaquest_signatures());
    CHECK(!grail::has_errors(grail::validate_rulebase(rb)));
  }
}

TEST_CASE("clause to_string matches the canonical layout") {
  auto sigs = grail::asterix_signatures();
  auto rb = grail::parse_rulebase("up_lure(X):-visible(O1),closeby(O1,O2).", sigs);
  CHECK(rb.clauses[0].to_string() == "up_lure(X) :- visible(O1), closeby(O1,O2).");
}

TEST_CASE("rule base action list follows the fixed action order") {
  auto rb = grail::parse_rulebase(slurp(kDataDir + "/asterix.rules"),
                                  grail::asterix_signatures());
  using grail::Action;
  std::vector<Action> expected = {Action::Noop, Action::Up, Action::Right, Action::Left,
                                  Action::Down};
  CHECK(rb.actions == expected);
}
