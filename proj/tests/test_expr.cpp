#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "novlab/expr.hpp"

using namespace novlab;

namespace {

GraphPtr graph() {
  return GroupoidGraph::make({{"p", 2}, {"q", 1}},
                             {{"g", 0, 0, -1.0}, {"h", 1, 1, -1.0}, {"e", 0, 1, -0.5}});
}

}  // namespace

TEST_CASE("atoms") {
  auto gr = graph();
  TruncationContext ctx(5.0, gr);
  Arrow id_p = Arrow::identity(gr, 0);
  Arrow g = Arrow::generator(gr, 0);

  CHECK(parse_ring_expression("1_p", ctx).terms() == RingElement(ctx, id_p).terms());
  CHECK(parse_ring_expression("g", ctx).terms() == RingElement(ctx, g).terms());
  CHECK(parse_ring_expression("3", ctx).coeff(id_p) == 3);
  CHECK(parse_ring_expression("3", ctx).coeff(Arrow::identity(gr, 1)) == 3);
  CHECK(parse_ring_expression("0", ctx).is_zero());
}

TEST_CASE("precedence and grouping") {
  auto gr = graph();
  TruncationContext ctx(5.0, gr);
  Arrow id_p = Arrow::identity(gr, 0);
  Arrow g = Arrow::generator(gr, 0);

  RingElement a = parse_ring_expression("1_p + 2*g", ctx);
  CHECK(a.coeff(id_p) == 1);
  CHECK(a.coeff(g) == 2);

  RingElement b = parse_ring_expression("(1_p + g) * (1_p - g)", ctx);
  CHECK(b.coeff(id_p) == 1);
  CHECK(b.coeff(power(g, 2)) == -1);
  CHECK(b.terms().size() == 2);

  CHECK(parse_ring_expression("1_p - g + g", ctx).terms() ==
        RingElement(ctx, id_p).terms());
  CHECK(parse_ring_expression("-g", ctx).coeff(g) == -1);
  CHECK(parse_ring_expression("- -g", ctx).coeff(g) == 1);
}

TEST_CASE("powers") {
  auto gr = graph();
  TruncationContext ctx(5.0, gr);
  Arrow g = Arrow::generator(gr, 0);
  CHECK(parse_ring_expression("g^3", ctx).coeff(power(g, 3)) == 1);
  RingElement sq = parse_ring_expression("(1_p + g)^2", ctx);
  CHECK(sq.coeff(Arrow::identity(gr, 0)) == 1);
  CHECK(sq.coeff(g) == 2);
  CHECK(sq.coeff(power(g, 2)) == 1);
  CHECK(parse_ring_expression("g^0", ctx).terms() == RingElement::one(ctx).terms());
}

TEST_CASE("inv") {
  auto gr = graph();
  TruncationContext ctx(3.5, gr);
  Arrow g = Arrow::generator(gr, 0);
  RingElement inv = parse_ring_expression("inv(1_p - g)", ctx);
  CHECK(inv.terms() == geometric_series(g, ctx).terms());
  RingElement prod = parse_ring_expression("inv(1_p - g) * (1_p - g)", ctx);
  CHECK(l_equal(prod, RingElement(ctx, Arrow::identity(gr, 0)), 3.5));
  // Non-units inside inv surface as expression errors.
  CHECK_THROWS_AS(parse_ring_expression("inv(g)", ctx), ExprError);
}

TEST_CASE("orthogonal products vanish") {
  auto gr = graph();
  TruncationContext ctx(5.0, gr);
  CHECK(parse_ring_expression("g * h", ctx).is_zero());
  CHECK(!parse_ring_expression("g * e", ctx).is_zero());
}

TEST_CASE("errors carry a position") {
  auto gr = graph();
  TruncationContext ctx(5.0, gr);
  auto pos_of = [&](const std::string& text) {
    try {
      parse_ring_expression(text, ctx);
    } catch (const ExprError& e) {
      return (long)e.position;
    }
    return -1L;
  };
  CHECK(pos_of("1_p + ") >= 5);
  CHECK(pos_of("(1_p + g") >= 7);
  CHECK(pos_of("1_p + zz") == 6);
  CHECK(pos_of("g ^ x") >= 3);
  CHECK(pos_of("g^-1") >= 0);  // negative exponents: use inv()
  CHECK(pos_of("1_p + g) ") >= 7);
  CHECK(pos_of("") >= 0);
  CHECK(pos_of("g + h + 1_p") == -1L);  // well formed
}
