#pragma once

#include <utility>

#include "depthgen/attention.hpp"
#include "depthgen/normalization.hpp"

namespace depthgen {

/// Fusion weights: layout embedding for the semantic alignment, one
/// patch embedding per branch, the bidirectional attention, and one
/// unconstrained blend logit per branch (used through a sigmoid so the
/// merge stays convex).
struct CafParams {
  Var embed_w, embed_b;  // 1x1 conv [C, L, 1, 1], [C]
  Var pe_d_w, pe_d_b;    // [p*p*C, p*p*C], [p*p*C]
  Var pe_r_w, pe_r_b;
  CrossAttnParams cross;
  Var alpha_d, alpha_r;  // scalars
  std::size_t patch = 1;
};

/// Semantic alignment (F * embed(one_hot(M))), per-branch patch
/// embedding, bidirectional cross attention, reconstruction to map
/// space, and the sigmoid-gated blend with the inputs.
std::pair<Var, Var> caf_fuse(const Var& fd, const Var& fr, const SemanticLayout& m,
                             const CafParams& p, CafValueSource vsrc);

}  // namespace depthgen
