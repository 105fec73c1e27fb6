#include "novlab/complex.hpp"

namespace novlab {

NovikovComplex NovikovComplex::set_incidence(int p, int q, const RingElement& value) const {
  const auto& objs = graph()->objects();
  if (p < 0 || p >= (int)objs.size() || q < 0 || q >= (int)objs.size())
    throw ComplexError("set_incidence: unknown generator");
  if (objs[q].morse_index != objs[p].morse_index - 1)
    throw ComplexError("set_incidence: index of " + objs[q].name + " must be index of " +
                       objs[p].name + " minus one");
  if (!(value.context() == ctx_)) throw ComplexError("set_incidence: context mismatch");
  for (const auto& [g, c] : value.terms()) {
    if (g.source() != p || g.target() != q)
      throw ComplexError("set_incidence: term " + g.str() + " is not an arrow " + objs[p].name +
                         " -> " + objs[q].name);
    if (!(u_value(g) < 0))
      throw ComplexError("set_incidence: term " + g.str() + " has non-negative valuation");
  }
  NovikovComplex out = *this;
  if (value.is_zero())
    out.incidences_.erase({p, q});
  else
    out.incidences_.insert_or_assign({p, q}, value);
  return out;
}

std::optional<RingElement> NovikovComplex::incidence(int p, int q) const {
  auto it = incidences_.find({p, q});
  if (it == incidences_.end()) return std::nullopt;
  return it->second;
}

NovikovComplex::DSquaredReport NovikovComplex::check_d_squared() const {
  DSquaredReport report;
  const auto& objs = graph()->objects();
  for (int p = 0; p < (int)objs.size(); ++p) {
    for (int r = 0; r < (int)objs.size(); ++r) {
      if (objs[r].morse_index != objs[p].morse_index - 2) continue;
      RingElement acc(ctx_);
      bool any = false;
      for (int q = 0; q < (int)objs.size(); ++q) {
        auto pq = incidences_.find({p, q});
        auto qr = incidences_.find({q, r});
        if (pq == incidences_.end() || qr == incidences_.end()) continue;
        acc = add(acc, mul(pq->second, qr->second));
        any = true;
      }
      if (any && !acc.is_zero()) {
        report.ok = false;
        report.violating_pair = {p, r};
        report.residue = acc;
        return report;
      }
    }
  }
  return report;
}

std::vector<std::pair<int, RingElement>> NovikovComplex::boundary_of(int p) const {
  std::vector<std::pair<int, RingElement>> row;
  for (const auto& [pq, elem] : incidences_)
    if (pq.first == p) row.emplace_back(pq.second, elem);
  return row;
}

nlohmann::json NovikovComplex::to_json() const {
  nlohmann::json doc;
  doc["context"] = {{"L", ctx_.L}};
  doc["incidences"] = nlohmann::json::array();
  for (const auto& [pq, elem] : incidences_) {
    doc["incidences"].push_back({{"p", graph()->objects()[pq.first].name},
                                 {"q", graph()->objects()[pq.second].name},
                                 {"element", elem.to_json()}});
  }
  return doc;
}

NovikovComplex NovikovComplex::from_json(const nlohmann::json& doc, GraphPtr graph) {
  double L = doc.at("context").at("L").get<double>();
  NovikovComplex c{TruncationContext(L, graph)};
  if (doc.contains("incidences")) {
    for (const auto& inc : doc["incidences"]) {
      int p = graph->object_id(inc.at("p").get<std::string>());
      int q = graph->object_id(inc.at("q").get<std::string>());
      nlohmann::json elem_doc = inc.at("element");
      if (!elem_doc.contains("L")) elem_doc["L"] = L;
      RingElement elem = RingElement::from_json(elem_doc, graph);
      if (elem.context().L != L)
        throw ComplexError("incidence element truncation length differs from complex context");
      c = c.set_incidence(p, q, elem);
    }
  }
  return c;
}

}  // namespace novlab
