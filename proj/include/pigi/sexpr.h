#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace pigi {

struct SourceSpan {
  std::string file = "<string>";
  size_t offset = 0;
  size_t length = 0;
  int line = 1;    // 1-based
  int column = 1;  // 1-based, bytes

  bool operator==(const SourceSpan&) const = default;
};

// Parse failure with machine-readable context. `expected`/`found` describe
// the token-level mismatch; `span` always lies inside the offending token
// (or at end of input for truncation).
class ParseError : public std::runtime_error {
 public:
  ParseError(SourceSpan span, std::string expected, std::string found,
             const std::string& detail)
      : std::runtime_error(format(span, expected, found, detail)),
        span_(span),
        expected_(std::move(expected)),
        found_(std::move(found)) {}

  const SourceSpan& span() const { return span_; }
  const std::string& expected() const { return expected_; }
  const std::string& found() const { return found_; }

 private:
  static std::string format(const SourceSpan& s, const std::string& expected,
                            const std::string& found,
                            const std::string& detail);

  SourceSpan span_;
  std::string expected_;
  std::string found_;
};

struct SExpr {
  enum class Kind { Symbol, Number, String, List };

  Kind kind = Kind::List;
  std::string text;          // Symbol / String payload
  double num = 0.0;          // Number payload
  std::vector<SExpr> items;  // List payload
  SourceSpan span;

  static SExpr symbol(std::string s);
  static SExpr number(double v);
  static SExpr string(std::string s);
  static SExpr list(std::vector<SExpr> items);

  bool is_symbol(const char* s) const {
    return kind == Kind::Symbol && text == s;
  }
  // Head symbol of a list, or empty string.
  const std::string& head() const;

  bool structurally_equal(const SExpr& other) const;
};

// Parses a single s-expression; trailing whitespace/comments allowed.
SExpr parse_sexpr(const std::string& text,
                  const std::string& file = "<string>");

// Parses a whole file: zero or more top-level expressions.
std::vector<SExpr> parse_sexpr_file(const std::string& text,
                                    const std::string& file = "<string>");

// Canonical writer. Doubles are emitted shortest-round-trip, so
// parse(write(e)) reproduces e exactly.
std::string write_sexpr(const SExpr& e, int indent = 0);
std::string write_sexpr_file(const std::vector<SExpr>& es);

}  // namespace pigi
