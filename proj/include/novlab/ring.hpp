#pragma once

// Truncated Novikov-ring arithmetic: finite integer combinations of arrows,
// kept truncated so that every stored arrow has valuation strictly above -L.

#include <map>

#include <boost/multiprecision/cpp_int.hpp>

#include "novlab/groupoid.hpp"

namespace novlab {

using Coeff = boost::multiprecision::cpp_int;

struct RingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TruncationContext {
  double L = 1.0;
  GraphPtr graph;

  TruncationContext(double length, GraphPtr g) : L(length), graph(std::move(g)) {
    if (!(L > 0)) throw RingError("truncation length must be positive");
    if (!graph) throw RingError("truncation context needs a graph");
  }
  friend bool operator==(const TruncationContext& a, const TruncationContext& b) {
    return a.L == b.L && a.graph == b.graph;
  }
};

class RingElement {
 public:
  explicit RingElement(TruncationContext ctx) : ctx_(std::move(ctx)) {}
  RingElement(TruncationContext ctx, const Arrow& g, Coeff c = 1);

  static RingElement zero(const TruncationContext& ctx) { return RingElement(ctx); }
  static RingElement one(const TruncationContext& ctx);  // sum of all identities

  const TruncationContext& context() const { return ctx_; }
  const std::map<Arrow, Coeff>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  Coeff coeff(const Arrow& g) const;

  // Adds c*g, dropping the term when it falls at or below the cutoff.
  void accumulate(const Arrow& g, const Coeff& c);

  // True when every non-identity term has strictly negative valuation
  // (the condition under which truncation is a ring congruence).
  bool has_negative_support() const;

  std::string str() const;  // sorted by valuation then word
  nlohmann::json to_json() const;
  static RingElement from_json(const nlohmann::json& doc, GraphPtr graph);

 private:
  TruncationContext ctx_;
  std::map<Arrow, Coeff> terms_;
};

RingElement add(const RingElement& a, const RingElement& b);
RingElement sub(const RingElement& a, const RingElement& b);
RingElement negate(const RingElement& a);
RingElement scale(const RingElement& a, const Coeff& c);
RingElement mul(const RingElement& a, const RingElement& b);
RingElement truncate(const RingElement& a, double L_new);
bool l_equal(const RingElement& a, const RingElement& b, double L_cmp);

// 1 + g + g^2 + ... for a loop g with u(g) < 0, truncated.
RingElement geometric_series(const Arrow& g, const TruncationContext& ctx);

// Neumann-series inverse of d + r, where d is the identity part (either the
// full `one` or identities over a subset of objects) with all coefficients 1
// and every term of r has strictly negative valuation with endpoints covered
// by d. Satisfies mul(a, result) == d up to truncation.
RingElement unit_inverse(const RingElement& a);

}  // namespace novlab
