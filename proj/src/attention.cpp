#include "depthgen/attention.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>

namespace depthgen {

namespace {

Var linear_tokens(const Var& x, const Var& w, const Var& b) {
  return add(matmul(x, w), b);
}

}  // namespace

TokenGrid wmsa(const TokenGrid& t, std::size_t w, bool shifted, const MsaParams& p,
               Tensor* attn_probs) {
  const std::size_t E = t.embed();
  const std::size_t h = p.heads;
  if (h == 0 || E % h != 0)
    throw std::invalid_argument("wmsa: " + std::to_string(h) + " heads for width " +
                                std::to_string(E));
  const std::size_t d = E / h;
  const std::size_t table_rows = (2 * w - 1) * (2 * w - 1);
  if (p.bias_table.shape().size() != 2 || p.bias_table.shape()[0] != table_rows ||
      p.bias_table.shape()[1] != h)
    throw std::invalid_argument("wmsa: bias table " + shape_str(p.bias_table.shape()) +
                                " for window " + std::to_string(w) + ", " + std::to_string(h) +
                                " heads");
  if (shifted && w < 2) throw std::invalid_argument("wmsa: shifted needs w >= 2");

  const std::size_t shift = shifted ? w / 2 : 0;
  auto [wins, mask] = window_partition(t, w, shift);
  const std::size_t nw = wins.shape()[0], T = w * w;

  auto split_heads = [&](const Var& x) {
    // [nW, T, E] -> [nW, h, T, d]
    return permute(reshape(x, {nw, T, h, d}), {0, 2, 1, 3});
  };
  Var q = split_heads(linear_tokens(wins, p.q_w, p.q_b));
  Var k = split_heads(linear_tokens(wins, p.k_w, p.k_b));
  Var v = split_heads(linear_tokens(wins, p.v_w, p.v_b));

  Var scores = scale(matmul(q, permute(k, {0, 1, 3, 2})), 1.0 / std::sqrt(static_cast<double>(d)));

  // per-head bias [h, T, T] gathered from the table by relative offset
  auto bidx = std::make_shared<std::vector<std::size_t>>(h * T * T);
  for (std::size_t hd = 0; hd < h; ++hd)
    for (std::size_t qi = 0; qi < T; ++qi)
      for (std::size_t ki = 0; ki < T; ++ki) {
        const long dy = static_cast<long>(qi / w) - static_cast<long>(ki / w);
        const long dx = static_cast<long>(qi % w) - static_cast<long>(ki % w);
        const std::size_t rel = static_cast<std::size_t>(dy + static_cast<long>(w) - 1) *
                                    (2 * w - 1) +
                                static_cast<std::size_t>(dx + static_cast<long>(w) - 1);
        (*bidx)[(hd * T + qi) * T + ki] = rel * h + hd;
      }
  scores = add(scores, gather(p.bias_table, {h, T, T}, std::move(bidx)));
  if (shift > 0)
    scores = add(scores, Var::constant(Tensor({nw, 1, T, T}, mask.vec())));

  Var probs = softmax(scores, -1);
  if (attn_probs) *attn_probs = probs.val();

  Var ctx = matmul(probs, v);                              // [nW, h, T, d]
  Var merged = reshape(permute(ctx, {0, 2, 1, 3}), {nw, T, E});
  Var out = linear_tokens(merged, p.o_w, p.o_b);
  return window_reverse(out, w, shift, t.grid_h, t.grid_w, t.patch);
}

TokenGrid msa_pair(const TokenGrid& t, std::size_t w, const MsaParams& p1,
                   const MsaParams& p2) {
  return wmsa(wmsa(t, w, false, p1), w, true, p2);
}

std::pair<TokenGrid, TokenGrid> cross_attention(const TokenGrid& fd, const TokenGrid& fr,
                                                const CrossAttnParams& p, CafValueSource vsrc,
                                                Tensor* attn_d, Tensor* attn_r) {
  if (fd.ntok() != fr.ntok() || fd.embed() != fr.embed())
    throw std::invalid_argument("cross_attention: token geometry " +
                                shape_str(fd.tokens.shape()) + " vs " +
                                shape_str(fr.tokens.shape()));
  if (p.r.k_w.shape()[1] != p.d.q_w.shape()[1] ||
      p.r.q_w.shape()[1] != p.d.k_w.shape()[1])
    throw std::invalid_argument("cross_attention: query/key widths disagree");

  auto one_direction = [&](const TokenGrid& self, const TokenGrid& peer, const AttnProj& sp,
                           const AttnProj& pp, Tensor* probs_out) {
    Var q = linear_tokens(self.tokens, sp.q_w, sp.q_b);
    Var k = linear_tokens(peer.tokens, pp.k_w, pp.k_b);
    const double sc = 1.0 / std::sqrt(static_cast<double>(sp.q_w.shape()[1]));
    Var probs = softmax(scale(matmul(q, permute(k, {1, 0})), sc), -1);
    if (probs_out) *probs_out = probs.val();
    Var v = vsrc == CafValueSource::self ? linear_tokens(self.tokens, sp.v_w, sp.v_b)
                                         : linear_tokens(peer.tokens, pp.v_w, pp.v_b);
    TokenGrid out = self;
    out.tokens = add(matmul(matmul(probs, v), sp.o_w), sp.o_b);
    return out;
  };
  TokenGrid od = one_direction(fd, fr, p.d, p.r, attn_d);
  TokenGrid orr = one_direction(fr, fd, p.r, p.d, attn_r);
  return {std::move(od), std::move(orr)};
}

}  // namespace depthgen
