#include "novlab/ring.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <vector>

namespace novlab {

RingElement::RingElement(TruncationContext ctx, const Arrow& g, Coeff c) : ctx_(std::move(ctx)) {
  if (g.graph() != ctx_.graph) throw RingError("arrow does not belong to the context graph");
  accumulate(g, c);
}

RingElement RingElement::one(const TruncationContext& ctx) {
  RingElement e(ctx);
  for (int p = 0; p < (int)ctx.graph->objects().size(); ++p)
    e.accumulate(Arrow::identity(ctx.graph, p), 1);
  return e;
}

Coeff RingElement::coeff(const Arrow& g) const {
  auto it = terms_.find(g);
  return it == terms_.end() ? Coeff(0) : it->second;
}

void RingElement::accumulate(const Arrow& g, const Coeff& c) {
  if (c == 0) return;
  if (!(u_value(g) > -ctx_.L)) return;  // strict cutoff; ties dropped
  auto [it, inserted] = terms_.try_emplace(g, c);
  if (!inserted) {
    it->second += c;
    if (it->second == 0) terms_.erase(it);
  }
}

bool RingElement::has_negative_support() const {
  for (const auto& [g, c] : terms_)
    if (!g.is_identity() && !(u_value(g) < 0)) return false;
  return true;
}

std::string RingElement::str() const {
  if (terms_.empty()) return "0";
  std::vector<std::pair<Arrow, Coeff>> sorted(terms_.begin(), terms_.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    double ua = u_value(a.first), ub = u_value(b.first);
    if (ua != ub) return ua > ub;
    return a.first.str() < b.first.str();
  });
  std::ostringstream os;
  bool first = true;
  for (const auto& [g, c] : sorted) {
    Coeff mag = c < 0 ? Coeff(-c) : c;
    if (first) {
      if (c < 0) os << '-';
    } else {
      os << (c < 0 ? " - " : " + ");
    }
    if (mag != 1) os << mag.str() << '*';
    os << g.str();
    first = false;
  }
  return os.str();
}

nlohmann::json RingElement::to_json() const {
  nlohmann::json doc;
  doc["L"] = ctx_.L;
  doc["terms"] = nlohmann::json::array();
  std::vector<std::pair<Arrow, Coeff>> sorted(terms_.begin(), terms_.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    double ua = u_value(a.first), ub = u_value(b.first);
    if (ua != ub) return ua > ub;
    return a.first.str() < b.first.str();
  });
  for (const auto& [g, c] : sorted)
    doc["terms"].push_back({{"arrow", g.str()}, {"coeff", c.str()}});
  return doc;
}

RingElement RingElement::from_json(const nlohmann::json& doc, GraphPtr graph) {
  TruncationContext ctx(doc.at("L").get<double>(), std::move(graph));
  RingElement e(ctx);
  if (doc.contains("terms")) {
    for (const auto& t : doc["terms"]) {
      Arrow g = Arrow::parse(ctx.graph, t.at("arrow").get<std::string>());
      Coeff c;
      const auto& cj = t.at("coeff");
      if (cj.is_string())
        c = Coeff(cj.get<std::string>());
      else
        c = Coeff(cj.get<long long>());
      e.accumulate(g, c);
    }
  }
  return e;
}

namespace {
void require_same_context(const RingElement& a, const RingElement& b) {
  if (!(a.context() == b.context())) throw RingError("mismatched truncation contexts");
}
}  // namespace

RingElement add(const RingElement& a, const RingElement& b) {
  require_same_context(a, b);
  RingElement out = a;
  for (const auto& [g, c] : b.terms()) out.accumulate(g, c);
  return out;
}

RingElement negate(const RingElement& a) { return scale(a, -1); }

RingElement sub(const RingElement& a, const RingElement& b) { return add(a, negate(b)); }

RingElement scale(const RingElement& a, const Coeff& c) {
  RingElement out(a.context());
  for (const auto& [g, n] : a.terms()) out.accumulate(g, n * c);
  return out;
}

RingElement mul(const RingElement& a, const RingElement& b) {
  require_same_context(a, b);
  RingElement out(a.context());
  for (const auto& [g, cg] : a.terms()) {
    for (const auto& [h, ch] : b.terms()) {
      if (auto gh = compose(g, h)) out.accumulate(*gh, cg * ch);
    }
  }
  return out;
}

RingElement truncate(const RingElement& a, double L_new) {
  if (L_new > a.context().L) throw RingError("cannot truncate to a longer length");
  RingElement out(TruncationContext(L_new, a.context().graph));
  for (const auto& [g, c] : a.terms()) out.accumulate(g, c);
  return out;
}

bool l_equal(const RingElement& a, const RingElement& b, double L_cmp) {
  if (L_cmp > a.context().L || L_cmp > b.context().L)
    throw RingError("l_equal: comparison length exceeds a context length");
  if (a.context().graph != b.context().graph) throw RingError("l_equal: different graphs");
  RingElement diff(TruncationContext(L_cmp, a.context().graph));
  for (const auto& [g, c] : a.terms()) diff.accumulate(g, c);
  for (const auto& [g, c] : b.terms()) diff.accumulate(g, -c);
  return diff.is_zero();
}

RingElement geometric_series(const Arrow& g, const TruncationContext& ctx) {
  if (!g.is_loop()) throw RingError("geometric_series: arrow is not a loop");
  double u = u_value(g);
  if (!(u < 0)) throw RingError("geometric_series: loop valuation must be negative");
  RingElement out(ctx);
  Arrow pow = Arrow::identity(ctx.graph, g.source());
  for (int j = 0; j * (-u) < ctx.L; ++j) {
    out.accumulate(pow, 1);
    pow = *compose(pow, g);
  }
  return out;
}

RingElement unit_inverse(const RingElement& a) {
  const auto& ctx = a.context();
  RingElement d(ctx);  // identity part
  RingElement r(ctx);  // strictly negative-valuation remainder
  std::set<int> covered;
  for (const auto& [g, c] : a.terms()) {
    if (g.is_identity()) {
      if (c != 1) throw RingError("unit_inverse: identity coefficient must be 1");
      d.accumulate(g, c);
      covered.insert(g.source());
    } else {
      r.accumulate(g, c);
    }
  }
  if (covered.empty()) throw RingError("unit_inverse: no identity part");
  for (const auto& [g, c] : r.terms()) {
    if (!(u_value(g) < 0))
      throw RingError("unit_inverse: remainder term with non-negative valuation");
    if (!covered.count(g.source()) || !covered.count(g.target()))
      throw RingError("unit_inverse: remainder endpoints outside the identity part");
  }
  RingElement out = d;
  RingElement pow = d;
  RingElement neg_r = negate(r);
  while (!pow.is_zero() && !neg_r.is_zero()) {
    pow = mul(pow, neg_r);
    if (pow.is_zero()) break;
    out = add(out, pow);
  }
  return out;
}

}  // namespace novlab
