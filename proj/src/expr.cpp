#include "novlab/expr.hpp"

#include <cctype>

namespace novlab {
namespace {

struct Token {
  enum Kind { Int, Ident, Plus, Minus, Star, Caret, LParen, RParen, End } kind;
  std::string text;
  size_t pos = 0;
};

std::vector<Token> tokenize(const std::string& s) {
  std::vector<Token> out;
  size_t i = 0;
  while (i < s.size()) {
    char c = s[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    size_t start = i;
    if (std::isdigit(static_cast<unsigned char>(c))) {
      while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
      // "1_p" style identity arrows: a digit run followed by '_' is an
      // identifier, not an integer literal.
      if (i < s.size() && (s[i] == '_' || std::isalpha(static_cast<unsigned char>(s[i])))) {
        while (i < s.size() &&
               (s[i] == '_' || std::isalnum(static_cast<unsigned char>(s[i]))))
          ++i;
        out.push_back({Token::Ident, s.substr(start, i - start), start});
      } else {
        out.push_back({Token::Int, s.substr(start, i - start), start});
      }
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      while (i < s.size() && (s[i] == '_' || std::isalnum(static_cast<unsigned char>(s[i])))) ++i;
      out.push_back({Token::Ident, s.substr(start, i - start), start});
      continue;
    }
    switch (c) {
      case '+': out.push_back({Token::Plus, "+", i}); break;
      case '-': out.push_back({Token::Minus, "-", i}); break;
      case '*': out.push_back({Token::Star, "*", i}); break;
      case '^': out.push_back({Token::Caret, "^", i}); break;
      case '(': out.push_back({Token::LParen, "(", i}); break;
      case ')': out.push_back({Token::RParen, ")", i}); break;
      default: throw ExprError(std::string("unexpected character '") + c + "'", i);
    }
    ++i;
  }
  out.push_back({Token::End, "", s.size()});
  return out;
}

class Parser {
 public:
  Parser(std::vector<Token> toks, const TruncationContext& ctx)
      : toks_(std::move(toks)), ctx_(ctx) {}

  RingElement parse() {
    RingElement e = expr();
    expect(Token::End, "end of expression");
    return e;
  }

 private:
  const Token& peek() const { return toks_[pos_]; }
  Token next() { return toks_[pos_++]; }
  void expect(Token::Kind k, const char* what) {
    if (peek().kind != k) throw ExprError(std::string("expected ") + what, peek().pos);
    ++pos_;
  }

  RingElement expr() {
    RingElement acc = term();
    while (peek().kind == Token::Plus || peek().kind == Token::Minus) {
      bool minus = next().kind == Token::Minus;
      RingElement rhs = term();
      acc = minus ? sub(acc, rhs) : add(acc, rhs);
    }
    return acc;
  }

  RingElement term() {
    RingElement acc = factor();
    while (peek().kind == Token::Star) {
      next();
      acc = mul(acc, factor());
    }
    return acc;
  }

  RingElement factor() {
    RingElement base = primary();
    if (peek().kind == Token::Caret) {
      size_t at = next().pos;
      bool neg = false;
      if (peek().kind == Token::Minus) {
        neg = true;
        next();
      }
      if (peek().kind != Token::Int) throw ExprError("expected integer exponent", peek().pos);
      long k = std::stol(next().text);
      if (neg) throw ExprError("negative exponents are not supported; use inv()", at);
      RingElement acc = RingElement::one(ctx_);
      for (long j = 0; j < k; ++j) acc = mul(acc, base);
      return acc;
    }
    return base;
  }

  RingElement primary() {
    const Token& t = peek();
    switch (t.kind) {
      case Token::Int: {
        Coeff c(next().text);
        return scale(RingElement::one(ctx_), c);
      }
      case Token::Minus:
        next();
        return negate(factor());
      case Token::LParen: {
        next();
        RingElement e = expr();
        expect(Token::RParen, "')'");
        return e;
      }
      case Token::Ident: {
        Token id = next();
        if (id.text == "inv") {
          expect(Token::LParen, "'(' after inv");
          RingElement e = expr();
          expect(Token::RParen, "')'");
          try {
            return unit_inverse(e);
          } catch (const RingError& err) {
            throw ExprError(std::string("inv: ") + err.what(), id.pos);
          }
        }
        try {
          Arrow a = Arrow::parse(ctx_.graph, id.text);
          return RingElement(ctx_, a);
        } catch (const GroupoidError& err) {
          throw ExprError(err.what(), id.pos);
        }
      }
      default:
        throw ExprError("expected a value", t.pos);
    }
  }

  std::vector<Token> toks_;
  TruncationContext ctx_;
  size_t pos_ = 0;
};

}  // namespace

RingElement parse_ring_expression(const std::string& text, const TruncationContext& ctx) {
  return Parser(tokenize(text), ctx).parse();
}

}  // namespace novlab
