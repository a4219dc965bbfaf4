#pragma once

#include "depthgen/layers.hpp"

namespace depthgen {

/// Which axes feed the normalization statistics of ctn_forward.
enum class CtnStats {
  joint,      // one (mu, sigma) over all tokens and channels together
  per_token,  // per-token statistics over the embedding axis
};

/// Conditioning MLPs: shared hidden layer over the tokenized layout,
/// then separate gamma and beta heads sized to the feature width.
struct CtnParams {
  Var shared_w, shared_b;  // [E_m, hidden], [hidden]
  Var gamma_w, gamma_b;    // [hidden, E], [E]
  Var beta_w, beta_b;      // [hidden, E], [E]
};

/// Layout conv stack for the spatial modulation: 1x1 projection of the
/// normalized input plus gamma/beta heads fed by a shared 3x3 conv.
struct SpadeParams {
  Var proj_w, proj_b;      // [C_out, C_in, 1, 1], [C_out]
  Var shared_w, shared_b;  // [hidden, L, 3, 3], [hidden]
  Var gamma_w, gamma_b;    // [C_out, hidden, 3, 3], [C_out]
  Var beta_w, beta_b;      // [C_out, hidden, 3, 3], [C_out]
};

/// M^T: layout resampled (nearest) to the token grid's pixel extent,
/// one-hot encoded, and patch-embedded with the feature tokens' p.
TokenGrid tokenize_layout(const SemanticLayout& m, std::size_t grid_h, std::size_t grid_w,
                          std::size_t p, const Var& embed_w, const Var& embed_b);

/// gamma(M^T) (x - mu)/sigma + beta(M^T), with mu/sigma per `stats` and
/// per-token gamma/beta [N_tok, E] from the conditioning MLPs.
TokenGrid ctn_forward(const TokenGrid& f, const TokenGrid& mt, const CtnParams& p,
                      CtnStats stats);

/// Parameter-free per-channel spatial normalization of f, 1x1 projection
/// to C_out, then proj * (1 + gamma(M)) + beta(M).
Var spade_shortcut(const Var& f, const SemanticLayout& m, const SpadeParams& p);

}  // namespace depthgen
