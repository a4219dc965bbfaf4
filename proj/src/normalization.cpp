#include "depthgen/normalization.hpp"

#include <stdexcept>
#include <string>

namespace depthgen {

TokenGrid tokenize_layout(const SemanticLayout& m, std::size_t grid_h, std::size_t grid_w,
                          std::size_t p, const Var& embed_w, const Var& embed_b) {
  SemanticLayout r = resample_labels(m, grid_h * p, grid_w * p);
  return patch_embed(one_hot(r), p, embed_w, embed_b);
}

TokenGrid ctn_forward(const TokenGrid& f, const TokenGrid& mt, const CtnParams& p,
                      CtnStats stats) {
  if (f.ntok() != mt.ntok())
    throw std::invalid_argument("ctn_forward: " + std::to_string(f.ntok()) +
                                " feature tokens vs " + std::to_string(mt.ntok()) +
                                " layout tokens");
  auto [mu, sigma] = stats == CtnStats::joint ? joint_stats(f.tokens, {0, 1})
                                              : joint_stats(f.tokens, {1});
  Var hidden = gelu(add(matmul(mt.tokens, p.shared_w), p.shared_b));
  Var gamma = add(matmul(hidden, p.gamma_w), p.gamma_b);
  Var beta = add(matmul(hidden, p.beta_w), p.beta_b);
  TokenGrid out = f;
  out.tokens = add(mul(gamma, div_v(sub(f.tokens, mu), sigma)), beta);
  return out;
}

Var spade_shortcut(const Var& f, const SemanticLayout& m, const SpadeParams& p) {
  const Shape& s = f.shape();
  if (s.size() != 3)
    throw std::invalid_argument("spade_shortcut: want [C,H,W], got " + shape_str(s));
  auto [mu, sigma] = joint_stats(f, {1, 2});  // per-channel spatial stats
  Var norm = div_v(sub(f, mu), sigma);
  Var proj = conv2d(norm, p.proj_w, p.proj_b, 1, 0);
  Var oh = one_hot(resample_labels(m, s[1], s[2]));
  Var hidden = relu(conv_same(oh, p.shared_w, p.shared_b));
  Var gamma = conv_same(hidden, p.gamma_w, p.gamma_b);
  Var beta = conv_same(hidden, p.beta_w, p.beta_b);
  return add(mul(proj, add_scalar(gamma, 1.0)), beta);
}

}  // namespace depthgen
