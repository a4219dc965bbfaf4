#include "depthgen/caf.hpp"

#include <stdexcept>
#include <string>

namespace depthgen {

std::pair<Var, Var> caf_fuse(const Var& fd, const Var& fr, const SemanticLayout& m,
                             const CafParams& p, CafValueSource vsrc) {
  const Shape& s = fd.shape();
  if (s.size() != 3 || !shape_eq(s, fr.shape()))
    throw std::invalid_argument("caf_fuse: branch shapes " + shape_str(fd.shape()) + " vs " +
                                shape_str(fr.shape()));
  const std::size_t H = s[1], W = s[2];
  if (p.patch == 0 || H % p.patch != 0 || W % p.patch != 0)
    throw std::invalid_argument("caf_fuse: " + std::to_string(H) + "x" + std::to_string(W) +
                                " map not divisible by patch " + std::to_string(p.patch));

  Var mt = conv2d(one_hot(resample_labels(m, H, W)), p.embed_w, p.embed_b, 1, 0);
  Var ad = mul(fd, mt);
  Var ar = mul(fr, mt);
  TokenGrid td = patch_embed(ad, p.patch, p.pe_d_w, p.pe_d_b);
  TokenGrid tr = patch_embed(ar, p.patch, p.pe_r_w, p.pe_r_b);
  auto [hd, hr] = cross_attention(td, tr, p.cross, vsrc);
  Var rec_d = pixel_shuffle(token_to_map(hd), p.patch);
  Var rec_r = pixel_shuffle(token_to_map(hr), p.patch);

  auto blend = [](const Var& base, const Var& rec, const Var& alpha) {
    Var g = sigmoid(alpha);  // scalar gate
    return add(mul(base, add_scalar(scale(g, -1.0), 1.0)), mul(rec, g));
  };
  return {blend(fd, rec_d, p.alpha_d), blend(fr, rec_r, p.alpha_r)};
}

}  // namespace depthgen
