#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "depthgen/autograd.hpp"

namespace depthgen {

/// Integer label grid; the sole conditioning input.
struct SemanticLayout {
  std::size_t h = 0, w = 0;
  std::size_t num_labels = 0;
  std::vector<int> labels;  // row-major h*w entries

  int at(std::size_t y, std::size_t x) const { return labels[y * w + x]; }
};

/// Token sequence [N_tok, E] carrying its source 2D geometry so
/// token<->map reshapes are unambiguous.
struct TokenGrid {
  Var tokens;  // [N_tok, E]
  std::size_t grid_h = 0, grid_w = 0;
  std::size_t patch = 1;  // side of the source patch each token covers

  std::size_t ntok() const { return grid_h * grid_w; }
  std::size_t embed() const { return tokens.shape()[1]; }
};

void check_layout(const SemanticLayout& m);

/// [num_labels, H, W] constant indicator map; exactly one 1 per pixel.
Var one_hot(const SemanticLayout& m);

/// Nearest-neighbor resampling at pixel centers: source row of output
/// row i is floor((i+0.5) * h/h2). Labels stay categorical.
SemanticLayout resample_labels(const SemanticLayout& m, std::size_t h2, std::size_t w2);

/// Splits map [C,H,W] into non-overlapping p x p patches, flattens each
/// channel-major then row-major spatial, and projects with w [p*p*C, E]
/// plus bias b [E].
TokenGrid patch_embed(const Var& fmap, std::size_t p, const Var& w, const Var& b);

/// Tokenization without projection: token (r,c) = pixel column of the
/// map; requires p == 1 semantics (each token is one pixel, E = C).
TokenGrid map_to_tokens(const Var& fmap, std::size_t patch_tag);

/// [E, grid_h, grid_w]; token k lands at (k div grid_w, k mod grid_w).
Var token_to_map(const TokenGrid& t);

/// [C*r*r, H, W] -> [C, rH, rW]; out[c, h*r+i, w*r+j] = in[c*r*r+i*r+j, h, w].
Var pixel_shuffle(const Var& fmap, std::size_t r);

/// Cyclic roll by (-shift, -shift), then w x w windows row-major.
/// Returns windows [nW, w*w, E] and an additive attention mask
/// [nW, w*w, w*w]: 0 where both tokens come from the same pre-roll
/// region, kMaskLogit otherwise (all zeros when shift == 0).
std::pair<Var, Tensor> window_partition(const TokenGrid& t, std::size_t w, std::size_t shift);

/// Exact inverse of window_partition, including the roll-back.
TokenGrid window_reverse(const Var& windows, std::size_t w, std::size_t shift,
                         std::size_t grid_h, std::size_t grid_w, std::size_t patch_tag);

/// conv2d with pad (k-1)/2 so output spatial dims match input; odd k only.
Var conv_same(const Var& x, const Var& w, const Var& b, std::size_t stride = 1);

/// Each pixel replicated 2x2.
Var upsample_nearest(const Var& fmap);

/// Tokenwise Linear(E -> H) -> GELU -> Linear(H -> E2).
TokenGrid mlp(const TokenGrid& t, const Var& w1, const Var& b1, const Var& w2, const Var& b2);

}  // namespace depthgen
