#include "pigi/sexpr.h"

#include <charconv>
#include <cmath>
#include <cstdio>

namespace pigi {

std::string ParseError::format(const SourceSpan& s, const std::string& expected,
                               const std::string& found,
                               const std::string& detail) {
  std::string m = s.file + ":" + std::to_string(s.line) + ":" +
                  std::to_string(s.column) + ": expected " + expected +
                  ", found " + found;
  if (!detail.empty()) m += " (" + detail + ")";
  return m;
}

SExpr SExpr::symbol(std::string s) {
  SExpr e;
  e.kind = Kind::Symbol;
  e.text = std::move(s);
  return e;
}

SExpr SExpr::number(double v) {
  SExpr e;
  e.kind = Kind::Number;
  e.num = v;
  return e;
}

SExpr SExpr::string(std::string s) {
  SExpr e;
  e.kind = Kind::String;
  e.text = std::move(s);
  return e;
}

SExpr SExpr::list(std::vector<SExpr> items) {
  SExpr e;
  e.kind = Kind::List;
  e.items = std::move(items);
  return e;
}

const std::string& SExpr::head() const {
  static const std::string empty;
  if (kind != Kind::List || items.empty() ||
      items[0].kind != Kind::Symbol)
    return empty;
  return items[0].text;
}

bool SExpr::structurally_equal(const SExpr& o) const {
  if (kind != o.kind) return false;
  switch (kind) {
    case Kind::Symbol:
    case Kind::String:
      return text == o.text;
    case Kind::Number:
      // Bit-level: round-trip identity is exact, including -0.0 vs 0.0.
      return num == o.num && std::signbit(num) == std::signbit(o.num);
    case Kind::List: {
      if (items.size() != o.items.size()) return false;
      for (size_t i = 0; i < items.size(); ++i)
        if (!items[i].structurally_equal(o.items[i])) return false;
      return true;
    }
  }
  return false;
}

namespace {

struct Lexer {
  const std::string& src;
  std::string file;
  size_t pos = 0;
  int line = 1;
  int col = 1;

  Lexer(const std::string& s, std::string f) : src(s), file(std::move(f)) {}

  bool eof() const { return pos >= src.size(); }
  char peek() const { return src[pos]; }

  void advance() {
    if (src[pos] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
    ++pos;
  }

  SourceSpan here(size_t len = 1) const {
    SourceSpan s;
    s.file = file;
    s.offset = pos;
    s.length = len;
    s.line = line;
    s.column = col;
    return s;
  }

  void skip_ws() {
    while (!eof()) {
      char c = peek();
      if (c == ';') {
        while (!eof() && peek() != '\n') advance();
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        advance();
      } else {
        break;
      }
    }
  }

  static bool atom_char(char c) {
    return !(c == '(' || c == ')' || c == ';' || c == '"' || c == ' ' ||
             c == '\t' || c == '\r' || c == '\n');
  }

  [[noreturn]] void fail(SourceSpan span, const std::string& expected,
                         const std::string& found,
                         const std::string& detail = "") {
    throw ParseError(span, expected, found, detail);
  }

  SExpr parse_string() {
    SourceSpan start = here();
    advance();  // opening quote
    std::string out;
    while (true) {
      if (eof()) fail(start, "closing '\"'", "end of input");
      char c = peek();
      if (c == '"') {
        advance();
        break;
      }
      if (c == '\\') {
        advance();
        if (eof()) fail(start, "escape character", "end of input");
        char e = peek();
        if (e == 'n')
          out += '\n';
        else if (e == 't')
          out += '\t';
        else if (e == '\\' || e == '"')
          out += e;
        else
          fail(here(), "escape in {n,t,\\\\,\\\"}",
               std::string("'\\") + e + "'");
        advance();
      } else {
        out += c;
        advance();
      }
    }
    SExpr e = SExpr::string(std::move(out));
    start.length = pos - start.offset;
    e.span = start;
    return e;
  }

  SExpr parse_atom() {
    SourceSpan start = here();
    size_t begin = pos;
    while (!eof() && atom_char(peek())) advance();
    std::string word = src.substr(begin, pos - begin);
    start.length = word.size();

    // Number if it parses completely as one; otherwise a symbol.
    double v = 0;
    auto [p, ec] =
        std::from_chars(word.data(), word.data() + word.size(), v);
    SExpr e;
    if (ec == std::errc() && p == word.data() + word.size()) {
      if (!std::isfinite(v))
        fail(start, "finite number", "'" + word + "'");
      e = SExpr::number(v);
    } else {
      e = SExpr::symbol(std::move(word));
    }
    e.span = start;
    return e;
  }

  SExpr parse_expr(int depth) {
    if (depth > 200) fail(here(), "shallower nesting", "depth > 200");
    skip_ws();
    if (eof()) fail(here(0), "expression", "end of input");
    char c = peek();
    if (c == ')') fail(here(), "expression", "')'");
    if (c == '(') {
      SourceSpan start = here();
      advance();
      SExpr list = SExpr::list({});
      while (true) {
        skip_ws();
        if (eof()) fail(start, "')'", "end of input", "unterminated list");
        if (peek() == ')') {
          advance();
          break;
        }
        list.items.push_back(parse_expr(depth + 1));
      }
      start.length = pos - start.offset;
      list.span = start;
      return list;
    }
    if (c == '"') return parse_string();
    return parse_atom();
  }
};

void write_number(std::string& out, double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  out.append(buf, p);
}

void write_rec(std::string& out, const SExpr& e, int indent, int depth) {
  switch (e.kind) {
    case SExpr::Kind::Symbol:
      out += e.text;
      break;
    case SExpr::Kind::Number:
      write_number(out, e.num);
      break;
    case SExpr::Kind::String: {
      out += '"';
      for (char c : e.text) {
        if (c == '"' || c == '\\') out += '\\';
        if (c == '\n') {
          out += "\\n";
          continue;
        }
        out += c;
      }
      out += '"';
      break;
    }
    case SExpr::Kind::List: {
      out += '(';
      bool break_lines = indent > 0 && depth < 2 && e.items.size() > 3;
      for (size_t i = 0; i < e.items.size(); ++i) {
        if (i > 0) {
          if (break_lines) {
            out += '\n';
            out.append(static_cast<size_t>(indent), ' ');
          } else {
            out += ' ';
          }
        }
        // Negative indent disables line breaking all the way down.
        write_rec(out, e.items[i], indent < 0 ? indent : indent + 2,
                  depth + 1);
      }
      out += ')';
      break;
    }
  }
}

}  // namespace

SExpr parse_sexpr(const std::string& text, const std::string& file) {
  Lexer lx(text, file);
  SExpr e = lx.parse_expr(0);
  lx.skip_ws();
  if (!lx.eof())
    throw ParseError(lx.here(), "end of input",
                     std::string("'") + lx.peek() + "'",
                     "trailing content");
  return e;
}

std::vector<SExpr> parse_sexpr_file(const std::string& text,
                                    const std::string& file) {
  Lexer lx(text, file);
  std::vector<SExpr> out;
  while (true) {
    lx.skip_ws();
    if (lx.eof()) break;
    out.push_back(lx.parse_expr(0));
  }
  return out;
}

std::string write_sexpr(const SExpr& e, int indent) {
  std::string out;
  write_rec(out, e, indent, 0);
  return out;
}

std::string write_sexpr_file(const std::vector<SExpr>& es) {
  std::string out;
  for (const SExpr& e : es) {
    out += write_sexpr(e, 2);
    out += '\n';
  }
  return out;
}

}  // namespace pigi
