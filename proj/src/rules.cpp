#include "novlab/rules.hpp"

namespace novlab {

namespace {

void require_valid_loop(const Arrow& g) {
  if (!g.is_loop()) throw RingError("crossing loop must be a loop");
  if (!(u_value(g) < 0)) throw RingError("crossing loop must have negative valuation");
}

RingElement one_at(const TruncationContext& ctx, int p) {
  return RingElement(ctx, Arrow::identity(ctx.graph, p), 1);
}

}  // namespace

SlideScript SlideScript::from_json(const nlohmann::json& doc, GraphPtr graph) {
  SlideScript script;
  for (const auto& ev : doc.at("events")) {
    CrossingEvent e{Arrow::parse(graph, ev.at("g").get<std::string>())};
    if (ev.value("stratum", "self_slide") == "doubling") {
      e.stratum = StratumKind::doubling;
    } else {
      std::string ch = ev.at("character").get<std::string>();
      if (ch == "plus" || ch == "+")
        e.character = Character::plus;
      else if (ch == "minus" || ch == "-")
        e.character = Character::minus;
      else
        throw RingError("script: bad character \"" + ch + "\"");
    }
    std::string sg = ev.at("sign").get<std::string>();
    if (sg == "positive" || sg == "+")
      e.sign = CrossingSign::positive;
    else if (sg == "negative" || sg == "-")
      e.sign = CrossingSign::negative;
    else
      throw RingError("script: bad sign \"" + sg + "\"");
    script.events.push_back(std::move(e));
  }
  return script;
}

RingElement self_slide_factor(const CrossingEvent& e, const TruncationContext& ctx) {
  require_valid_loop(e.g);
  int p = e.g.source();
  RingElement g_elem(ctx, e.g, 1);
  switch (e.character) {
    case Character::plus:
      if (e.sign == CrossingSign::positive) return geometric_series(e.g, ctx);
      return sub(one_at(ctx, p), g_elem);
    case Character::minus:
      if (e.sign == CrossingSign::positive) return add(one_at(ctx, p), g_elem);
      return unit_inverse(add(one_at(ctx, p), g_elem));  // 1 - g + g^2 - ...
  }
  throw RingError("unreachable");
}

NovikovComplex apply_self_slide(const NovikovComplex& c, const CrossingEvent& e) {
  require_valid_loop(e.g);
  int p = e.g.source();
  if (p < 0 || p >= (int)c.graph()->objects().size())
    throw ComplexError("apply_self_slide: base point is not a generator");
  RingElement factor = crossing_factor(e, c.context());
  RingElement dual = unit_inverse(factor);
  NovikovComplex out = c;
  for (const auto& [pq, elem] : c.incidences()) {
    if (pq.first == p)
      out = out.set_incidence(pq.first, pq.second, mul(factor, elem));
    else if (pq.second == p)
      out = out.set_incidence(pq.first, pq.second, mul(elem, dual));
  }
  return out;
}

RingElement doubling_factor(const Arrow& g, const TruncationContext& ctx) {
  require_valid_loop(g);
  Arrow g2 = power(g, 2);
  RingElement a = sub(one_at(ctx, g.source()), RingElement(ctx, g2, 1));
  return unit_inverse(a);
}

RingElement crossing_factor(const CrossingEvent& e, const TruncationContext& ctx) {
  if (e.stratum == StratumKind::self_slide) return self_slide_factor(e, ctx);
  require_valid_loop(e.g);
  RingElement fac = doubling_factor(e.g, ctx);
  if (e.sign == CrossingSign::negative)
    fac = sub(one_at(ctx, e.g.source()), RingElement(ctx, power(e.g, 2), 1));
  return fac;
}

LoopAudit loop_consistency(const SlideScript& script, const TruncationContext& ctx) {
  if (script.events.empty()) {
    RingElement one = RingElement::one(ctx);
    return LoopAudit{true, one};
  }
  int base = script.events.front().g.source();
  for (const auto& e : script.events) {
    require_valid_loop(e.g);
    if (e.g.source() != base) throw RingError("loop_consistency: mixed base points");
  }
  RingElement prod = one_at(ctx, base);
  for (const auto& e : script.events) prod = mul(prod, crossing_factor(e, ctx));
  bool ok = l_equal(prod, one_at(ctx, base), ctx.L);
  return LoopAudit{ok, prod};
}

}  // namespace novlab
