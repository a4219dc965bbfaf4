#pragma once

#include <utility>

#include "depthgen/layers.hpp"

namespace depthgen {

/// Multi-head window attention weights. heads * head_dim == E; the bias
/// table holds one learned logit per relative offset per head.
struct MsaParams {
  std::size_t heads = 1;
  Var q_w, q_b;        // [E, E], [E]
  Var k_w, k_b;
  Var v_w, v_b;
  Var o_w, o_b;
  Var bias_table;      // [(2w-1)^2, heads]
};

/// Window multi-head self-attention. Per window: softmax(QK^T/sqrt(d) +
/// relative-position bias + region mask) V, heads merged, output
/// projected, geometry restored. shift = shifted ? w/2 : 0.
/// If attn_probs is given it receives the probabilities [nW, h, T, T].
TokenGrid wmsa(const TokenGrid& t, std::size_t w, bool shifted, const MsaParams& p,
               Tensor* attn_probs = nullptr);

/// The regular/shifted pair: wmsa(shift=0) then wmsa(shift=w/2).
TokenGrid msa_pair(const TokenGrid& t, std::size_t w, const MsaParams& p1, const MsaParams& p2);

/// Per-branch projection set for one attention direction.
struct AttnProj {
  Var q_w, q_b;  // [E, d], [d]
  Var k_w, k_b;  // [E, d], [d]
  Var v_w, v_b;  // [E, dv], [dv]
  Var o_w, o_b;  // [dv, E], [E]
};

struct CrossAttnParams {
  AttnProj d;  // depth branch
  AttnProj r;  // rgb branch
};

/// Where each branch's attention takes its values from.
enum class CafValueSource {
  self,   // queries, values from the same branch; keys from the other
  other,  // values follow the keys instead
};

/// Bidirectional global cross attention, single head:
///   out_d = softmax(Q_d K_r^T / sqrt(d)) V,  out_r mirrored.
std::pair<TokenGrid, TokenGrid> cross_attention(const TokenGrid& fd, const TokenGrid& fr,
                                                const CrossAttnParams& p, CafValueSource vsrc,
                                                Tensor* attn_d = nullptr,
                                                Tensor* attn_r = nullptr);

}  // namespace depthgen
