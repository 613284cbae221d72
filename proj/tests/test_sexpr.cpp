#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <string>
#include <vector>

#include "pigi/rng.h"
#include "pigi/sexpr.h"

using namespace pigi;

namespace {

int ri(Rng& rng, int lo, int hi) {
  return lo + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(hi - lo + 1)));
}

SExpr random_atom(Rng& rng) {
  switch (ri(rng, 0, 2)) {
    case 0: {
      static const char* first = "abcdefghijklmnopqrstuvwxyz";
      static const char* rest = "abcdefghijklmnopqrstuvwxyz0123456789_:-";
      std::string s(1, first[ri(rng, 0, 25)]);
      int len = ri(rng, 0, 6);
      for (int i = 0; i < len; ++i) s += rest[ri(rng, 0, 38)];
      return SExpr::symbol(s);
    }
    case 1: {
      double v;
      switch (ri(rng, 0, 4)) {
        case 0: v = ri(rng, -1000000, 1000000); break;
        case 1: v = 0.0; break;
        case 2: v = 0.1 + rng.uniform(); break;
        default:
          v = (rng.uniform() * 2 - 1) *
              std::pow(10.0, ri(rng, -30, 30));
      }
      return SExpr::number(v);
    }
    default: {
      static const char* chars =
          "abc XYZ 0123456789 \"\\()\n\t;#~!$%^&*[]{}";
      std::string s;
      int len = ri(rng, 0, 12);
      for (int i = 0; i < len; ++i) s += chars[ri(rng, 0, 37)];
      return SExpr::string(s);
    }
  }
}

SExpr random_tree(Rng& rng, int depth) {
  if (depth == 0 || rng.uniform() < 0.4) return random_atom(rng);
  int n = ri(rng, 0, 4);
  std::vector<SExpr> items;
  for (int i = 0; i < n; ++i) items.push_back(random_tree(rng, depth - 1));
  return SExpr::list(std::move(items));
}

}  // namespace

TEST_CASE("atoms parse with their payloads") {
  CHECK(parse_sexpr("foo").kind == SExpr::Kind::Symbol);
  CHECK(parse_sexpr("foo").text == "foo");
  CHECK(parse_sexpr("42").kind == SExpr::Kind::Number);
  CHECK(parse_sexpr("42").num == 42.0);
  CHECK(parse_sexpr("-3.5").num == -3.5);
  CHECK(parse_sexpr("1e-9").num == 1e-9);
  CHECK(parse_sexpr("6.02e23").num == 6.02e23);
  CHECK(parse_sexpr("\"hi there\"").kind == SExpr::Kind::String);
  CHECK(parse_sexpr("\"hi there\"").text == "hi there");
}

TEST_CASE("nested lists keep structure and head") {
  SExpr e = parse_sexpr("(a (b c) 1.5)");
  REQUIRE(e.kind == SExpr::Kind::List);
  REQUIRE(e.items.size() == 3);
  CHECK(e.head() == "a");
  CHECK(e.items[1].kind == SExpr::Kind::List);
  CHECK(e.items[1].head() == "b");
  CHECK(e.items[2].num == 1.5);
  CHECK(SExpr::list({}).head().empty());
}

TEST_CASE("spans point into the source text") {
  std::string text = "\n  foo";
  SExpr e = parse_sexpr(text);
  CHECK(e.span.line == 2);
  CHECK(e.span.column == 3);
  CHECK(e.span.offset == 3);
  CHECK(e.span.length == 3);

  SExpr l = parse_sexpr("(a (b c) 1.5)");
  CHECK(l.span.offset == 0);
  CHECK(l.span.length == 13);
  // Children lie inside the parent span.
  for (const SExpr& c : l.items) {
    CHECK(c.span.offset >= l.span.offset);
    CHECK(c.span.offset + c.span.length <= l.span.offset + l.span.length);
  }
}

TEST_CASE("write then parse reproduces random trees exactly") {
  Rng rng(Rng::stream(2024, 1, 0, 0));
  for (int i = 0; i < 1200; ++i) {
    SExpr e = random_tree(rng, 4);
    std::string text = write_sexpr(e);
    SExpr back = parse_sexpr(text, "roundtrip");
    CAPTURE(text);
    CHECK(e.structurally_equal(back));
    // Idempotent writer.
    CHECK(write_sexpr(back) == text);
  }
}

TEST_CASE("doubles survive the writer shortest-form rule") {
  for (double v : {0.1, 1.0 / 3.0, 1e17, 5e-324, 1.7976931348623157e308,
                   123456789.123456789, -2.2250738585072014e-308}) {
    SExpr back = parse_sexpr(write_sexpr(SExpr::number(v)));
    CHECK(back.num == v);
  }
}

TEST_CASE("malformed input raises a parse error, never anything else") {
  Rng rng(Rng::stream(2024, 1, 1, 0));
  static const char* chars = "()\"\\abc019. \n\t;#-e";
  int parsed = 0, rejected = 0;
  for (int i = 0; i < 3000; ++i) {
    std::string s;
    int len = ri(rng, 0, 40);
    for (int j = 0; j < len; ++j) s += chars[ri(rng, 0, 17)];
    try {
      parse_sexpr(s, "fuzz");
      ++parsed;
    } catch (const ParseError&) {
      ++rejected;
    }
  }
  CHECK(parsed + rejected == 3000);
  CHECK(rejected > 0);
}

TEST_CASE("error context names the mismatch") {
  auto expect_error = [](const std::string& text) {
    try {
      parse_sexpr(text, "bad.sx");
      FAIL_CHECK("no error for: " << text);
    } catch (const ParseError& e) {
      CHECK(!e.expected().empty());
      CHECK(!e.found().empty());
      CHECK(e.span().line >= 1);
      CHECK(e.span().column >= 1);
      CHECK(e.span().file == "bad.sx");
    }
  };
  expect_error("(a b");
  expect_error(")");
  expect_error("\"unterminated");
  expect_error("");
  expect_error("(a) trailing");

  try {
    parse_sexpr("(a\n  (b", "bad.sx");
    FAIL_CHECK("unclosed list accepted");
  } catch (const ParseError& e) {
    // Truncation points at end of input, which is on line 2.
    CHECK(e.span().line == 2);
  }
}

TEST_CASE("file parsing handles many forms and comments") {
  auto es = parse_sexpr_file("; header\n(a 1) ; tail\n(b 2)\n\n(c)\n", "f");
  REQUIRE(es.size() == 3);
  CHECK(es[0].head() == "a");
  CHECK(es[2].head() == "c");
  CHECK(parse_sexpr_file("  ; only a comment\n").empty());

  std::string text = write_sexpr_file(es);
  auto back = parse_sexpr_file(text);
  REQUIRE(back.size() == es.size());
  for (size_t i = 0; i < es.size(); ++i)
    CHECK(es[i].structurally_equal(back[i]));
}

TEST_CASE("structural equality distinguishes kind, payload, and shape") {
  CHECK(!SExpr::symbol("a").structurally_equal(SExpr::string("a")));
  CHECK(!SExpr::number(1).structurally_equal(SExpr::number(2)));
  CHECK(!SExpr::list({SExpr::symbol("a")})
             .structurally_equal(SExpr::list({})));
  // Spans are not part of identity.
  SExpr x = parse_sexpr("(a b)");
  SExpr y = parse_sexpr("  (a   b)  ");
  CHECK(x.structurally_equal(y));
}
