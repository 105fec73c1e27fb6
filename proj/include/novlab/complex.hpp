#pragma once

// Morse-Novikov chain complexes: generators are the graph's objects graded by
// Morse index; incidence entries are ring elements supported on arrows p -> q
// with strictly negative valuation. Complexes are immutable; edits return a
// new complex.

#include <optional>
#include <utility>

#include "novlab/ring.hpp"

namespace novlab {

struct ComplexError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class NovikovComplex {
 public:
  explicit NovikovComplex(TruncationContext ctx) : ctx_(std::move(ctx)) {}

  const TruncationContext& context() const { return ctx_; }
  const GraphPtr& graph() const { return ctx_.graph; }
  const std::map<std::pair<int, int>, RingElement>& incidences() const { return incidences_; }

  // Replaces the entry <p,q>; validates grading and support.
  NovikovComplex set_incidence(int p, int q, const RingElement& value) const;
  std::optional<RingElement> incidence(int p, int q) const;

  struct DSquaredReport {
    bool ok = true;
    std::optional<std::pair<int, int>> violating_pair;  // (p, r)
    std::optional<RingElement> residue;
  };
  DSquaredReport check_d_squared() const;

  // Row of the differential at p: (q, <p,q>) for each stored entry.
  std::vector<std::pair<int, RingElement>> boundary_of(int p) const;

  nlohmann::json to_json() const;
  static NovikovComplex from_json(const nlohmann::json& doc, GraphPtr graph);

 private:
  TruncationContext ctx_;
  std::map<std::pair<int, int>, RingElement> incidences_;
};

}  // namespace novlab
