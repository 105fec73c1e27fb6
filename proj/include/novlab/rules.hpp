#pragma once

// Rewrite factors attached to stratum crossings: self-slide factors, the dual
// column correction, the doubling factor, and loop-consistency auditing.

#include "novlab/complex.hpp"

namespace novlab {

enum class Character { plus, minus };
enum class CrossingSign { positive, negative };
// Which stratum the event crosses: the self-slide stratum of g, or the
// doubling stratum of g^2 reached at a character zero.
enum class StratumKind { self_slide, doubling };

struct CrossingEvent {
  Arrow g;  // loop with u(g) < 0
  Character character = Character::minus;
  CrossingSign sign = CrossingSign::positive;
  StratumKind stratum = StratumKind::self_slide;
};

struct SlideScript {
  std::vector<CrossingEvent> events;

  static SlideScript from_json(const nlohmann::json& doc, GraphPtr graph);
};

// The row factor for one crossing:
//   (+, positive) -> 1 + g + g^2 + ...
//   (-, positive) -> 1 + g
//   (+, negative) -> 1 - g
//   (-, negative) -> 1 - g + g^2 - ...
RingElement self_slide_factor(const CrossingEvent& e, const TruncationContext& ctx);

// Rows <p,q> become factor * <p,q>; columns <q',p> become <q',p> * inv(factor).
NovikovComplex apply_self_slide(const NovikovComplex& c, const CrossingEvent& e);

// inv(1 - g^2) = 1 + g^2 + g^4 + ...
RingElement doubling_factor(const Arrow& g, const TruncationContext& ctx);

// Factor of an arbitrary event: self_slide_factor for self-slides, the
// doubling factor (or its inverse, per crossing sign) for doubling events.
RingElement crossing_factor(const CrossingEvent& e, const TruncationContext& ctx);

struct LoopAudit {
  bool ok = false;
  RingElement residual;
};

// Ordered product of the factors of a closed crossing script; consistent
// scripts multiply to the identity at the base point.
LoopAudit loop_consistency(const SlideScript& script, const TruncationContext& ctx);

}  // namespace novlab
