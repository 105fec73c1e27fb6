#pragma once

// Infix expression evaluator over the truncated ring: integers, generator
// names, identity arrows "1_p", +, -, *, ^k, inv(), parentheses.

#include "novlab/ring.hpp"

namespace novlab {

struct ExprError : std::runtime_error {
  size_t position;
  ExprError(const std::string& what, size_t pos)
      : std::runtime_error(what + " (at position " + std::to_string(pos) + ")"), position(pos) {}
};

RingElement parse_ring_expression(const std::string& text, const TruncationContext& ctx);

}  // namespace novlab
