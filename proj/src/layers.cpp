#include "depthgen/layers.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>

namespace depthgen {

void check_layout(const SemanticLayout& m) {
  if (m.h == 0 || m.w == 0) throw std::invalid_argument("layout: empty grid");
  if (m.num_labels == 0) throw std::invalid_argument("layout: zero label set");
  if (m.labels.size() != m.h * m.w)
    throw std::invalid_argument("layout: " + std::to_string(m.labels.size()) +
                                " labels for a " + std::to_string(m.h) + "x" +
                                std::to_string(m.w) + " grid");
  for (int v : m.labels)
    if (v < 0 || static_cast<std::size_t>(v) >= m.num_labels)
      throw std::out_of_range("layout: label " + std::to_string(v) + " outside [0," +
                              std::to_string(m.num_labels) + ")");
}

Var one_hot(const SemanticLayout& m) {
  check_layout(m);
  Tensor t({m.num_labels, m.h, m.w});
  double* p = t.data();
  const std::size_t plane = m.h * m.w;
  for (std::size_t i = 0; i < plane; ++i)
    p[static_cast<std::size_t>(m.labels[i]) * plane + i] = 1.0;
  return Var::constant(std::move(t));
}

SemanticLayout resample_labels(const SemanticLayout& m, std::size_t h2, std::size_t w2) {
  check_layout(m);
  if (h2 == 0 || w2 == 0) throw std::invalid_argument("resample_labels: empty target");
  SemanticLayout out;
  out.h = h2;
  out.w = w2;
  out.num_labels = m.num_labels;
  out.labels.resize(h2 * w2);
  const double sy = static_cast<double>(m.h) / static_cast<double>(h2);
  const double sx = static_cast<double>(m.w) / static_cast<double>(w2);
  for (std::size_t i = 0; i < h2; ++i) {
    std::size_t src_y = static_cast<std::size_t>((static_cast<double>(i) + 0.5) * sy);
    if (src_y >= m.h) src_y = m.h - 1;
    for (std::size_t j = 0; j < w2; ++j) {
      std::size_t src_x = static_cast<std::size_t>((static_cast<double>(j) + 0.5) * sx);
      if (src_x >= m.w) src_x = m.w - 1;
      out.labels[i * w2 + j] = m.at(src_y, src_x);
    }
  }
  return out;
}

TokenGrid patch_embed(const Var& fmap, std::size_t p, const Var& w, const Var& b) {
  const Shape& s = fmap.shape();
  if (s.size() != 3)
    throw std::invalid_argument("patch_embed: want [C,H,W], got " + shape_str(s));
  const std::size_t C = s[0], H = s[1], W = s[2];
  if (p == 0 || H % p != 0 || W % p != 0)
    throw std::invalid_argument("patch_embed: H=" + std::to_string(H) +
                                ", W=" + std::to_string(W) + " not divisible by p=" +
                                std::to_string(p));
  const std::size_t gh = H / p, gw = W / p, n = gh * gw, d = C * p * p;
  if (w.shape().size() != 2 || w.shape()[0] != d)
    throw std::invalid_argument("patch_embed: weight " + shape_str(w.shape()) + " for " +
                                std::to_string(d) + " patch values");
  // patch rows: channel-major then row-major spatial
  auto idx = std::make_shared<std::vector<std::size_t>>(n * d);
  std::size_t o = 0;
  for (std::size_t r = 0; r < gh; ++r)
    for (std::size_t c = 0; c < gw; ++c)
      for (std::size_t ci = 0; ci < C; ++ci)
        for (std::size_t dy = 0; dy < p; ++dy)
          for (std::size_t dx = 0; dx < p; ++dx)
            (*idx)[o++] = (ci * H + r * p + dy) * W + c * p + dx;
  Var patches = gather(fmap, {n, d}, std::move(idx));
  TokenGrid t;
  t.tokens = add(matmul(patches, w), b);
  t.grid_h = gh;
  t.grid_w = gw;
  t.patch = p;
  return t;
}

TokenGrid map_to_tokens(const Var& fmap, std::size_t patch_tag) {
  const Shape& s = fmap.shape();
  if (s.size() != 3)
    throw std::invalid_argument("map_to_tokens: want [C,H,W], got " + shape_str(s));
  TokenGrid t;
  // [C,H,W] -> [H,W,C] -> [H*W, C]
  t.tokens = reshape(permute(fmap, {1, 2, 0}), {s[1] * s[2], s[0]});
  t.grid_h = s[1];
  t.grid_w = s[2];
  t.patch = patch_tag;
  return t;
}

Var token_to_map(const TokenGrid& t) {
  const Shape& s = t.tokens.shape();
  if (s.size() != 2 || s[0] != t.ntok())
    throw std::invalid_argument("token_to_map: tokens " + shape_str(s) + " for a " +
                                std::to_string(t.grid_h) + "x" + std::to_string(t.grid_w) +
                                " grid");
  return permute(reshape(t.tokens, {t.grid_h, t.grid_w, s[1]}), {2, 0, 1});
}

Var pixel_shuffle(const Var& fmap, std::size_t r) {
  const Shape& s = fmap.shape();
  if (s.size() != 3)
    throw std::invalid_argument("pixel_shuffle: want [C,H,W], got " + shape_str(s));
  if (r == 0 || s[0] % (r * r) != 0)
    throw std::invalid_argument("pixel_shuffle: " + std::to_string(s[0]) +
                                " channels not divisible by r^2, r=" + std::to_string(r));
  const std::size_t C = s[0] / (r * r), H = s[1], W = s[2];
  auto idx = std::make_shared<std::vector<std::size_t>>(s[0] * H * W);
  std::size_t o = 0;
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t y = 0; y < H * r; ++y)
      for (std::size_t x = 0; x < W * r; ++x)
        (*idx)[o++] = ((c * r * r + (y % r) * r + x % r) * H + y / r) * W + x / r;
  return gather(fmap, {C, H * r, W * r}, std::move(idx));
}

std::pair<Var, Tensor> window_partition(const TokenGrid& t, std::size_t w, std::size_t shift) {
  const std::size_t gh = t.grid_h, gw = t.grid_w, E = t.embed();
  if (w == 0 || gh % w != 0 || gw % w != 0)
    throw std::invalid_argument("window_partition: grid " + std::to_string(gh) + "x" +
                                std::to_string(gw) + " not divisible by window " +
                                std::to_string(w));
  if (shift != 0 && shift != w / 2)
    throw std::invalid_argument("window_partition: shift must be 0 or w/2");
  const std::size_t nw = (gh / w) * (gw / w), area = w * w;
  auto idx = std::make_shared<std::vector<std::size_t>>(nw * area * E);
  std::size_t o = 0;
  for (std::size_t wr = 0; wr < gh / w; ++wr)
    for (std::size_t wc = 0; wc < gw / w; ++wc)
      for (std::size_t qy = 0; qy < w; ++qy)
        for (std::size_t qx = 0; qx < w; ++qx) {
          // rolled grid position -> pre-roll source token
          const std::size_t sy = (wr * w + qy + shift) % gh;
          const std::size_t sx = (wc * w + qx + shift) % gw;
          const std::size_t src = (sy * gw + sx) * E;
          for (std::size_t e = 0; e < E; ++e) (*idx)[o++] = src + e;
        }
  Var windows = gather(t.tokens, {nw, area, E}, std::move(idx));

  Tensor mask({nw, area, area});
  if (shift > 0) {
    // region class of a rolled-frame coordinate: positions left of the
    // wrap seam, between seam boundaries, and past the seam get
    // distinct classes; same class <=> contiguous pre-roll provenance
    auto axis_class = [&](std::size_t y, std::size_t extent) -> int {
      if (y < extent - w) return 0;
      if (y < extent - shift) return 1;
      return 2;
    };
    std::vector<int> cls(area);
    double* pm = mask.data();
    for (std::size_t wr = 0; wr < gh / w; ++wr)
      for (std::size_t wc = 0; wc < gw / w; ++wc) {
        const std::size_t n = wr * (gw / w) + wc;
        for (std::size_t qy = 0; qy < w; ++qy)
          for (std::size_t qx = 0; qx < w; ++qx)
            cls[qy * w + qx] =
                3 * axis_class(wr * w + qy, gh) + axis_class(wc * w + qx, gw);
        for (std::size_t q = 0; q < area; ++q)
          for (std::size_t k = 0; k < area; ++k)
            pm[(n * area + q) * area + k] = cls[q] == cls[k] ? 0.0 : kMaskLogit;
      }
  }
  return {std::move(windows), std::move(mask)};
}

TokenGrid window_reverse(const Var& windows, std::size_t w, std::size_t shift,
                         std::size_t grid_h, std::size_t grid_w, std::size_t patch_tag) {
  if (w == 0 || grid_h % w != 0 || grid_w % w != 0)
    throw std::invalid_argument("window_reverse: grid " + std::to_string(grid_h) + "x" +
                                std::to_string(grid_w) + " not divisible by window " +
                                std::to_string(w));
  if (shift != 0 && shift != w / 2)
    throw std::invalid_argument("window_reverse: shift must be 0 or w/2");
  const Shape& s = windows.shape();
  const std::size_t nw = (grid_h / w) * (grid_w / w);
  if (s.size() != 3 || s[0] != nw || s[1] != w * w)
    throw std::invalid_argument("window_reverse: windows " + shape_str(s) + " for grid " +
                                std::to_string(grid_h) + "x" + std::to_string(grid_w) +
                                ", window " + std::to_string(w));
  const std::size_t E = s[2];
  auto idx = std::make_shared<std::vector<std::size_t>>(grid_h * grid_w * E);
  std::size_t o = 0;
  for (std::size_t y = 0; y < grid_h; ++y)
    for (std::size_t x = 0; x < grid_w; ++x) {
      // pre-roll token -> rolled position -> owning window slot
      const std::size_t ry = (y + grid_h - shift) % grid_h;
      const std::size_t rx = (x + grid_w - shift) % grid_w;
      const std::size_t n = (ry / w) * (grid_w / w) + rx / w;
      const std::size_t q = (ry % w) * w + rx % w;
      const std::size_t src = (n * w * w + q) * E;
      for (std::size_t e = 0; e < E; ++e) (*idx)[o++] = src + e;
    }
  TokenGrid t;
  t.tokens = gather(windows, {grid_h * grid_w, E}, std::move(idx));
  t.grid_h = grid_h;
  t.grid_w = grid_w;
  t.patch = patch_tag;
  return t;
}

Var conv_same(const Var& x, const Var& w, const Var& b, std::size_t stride) {
  const Shape& ws = w.shape();
  if (ws.size() != 4 || ws[2] % 2 == 0)
    throw std::invalid_argument("conv_same: want an odd square kernel, got " + shape_str(ws));
  return conv2d(x, w, b, stride, (ws[2] - 1) / 2);
}

Var upsample_nearest(const Var& fmap) {
  const Shape& s = fmap.shape();
  if (s.size() != 3)
    throw std::invalid_argument("upsample_nearest: want [C,H,W], got " + shape_str(s));
  const std::size_t C = s[0], H = s[1], W = s[2];
  auto idx = std::make_shared<std::vector<std::size_t>>(C * 4 * H * W);
  std::size_t o = 0;
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t y = 0; y < 2 * H; ++y)
      for (std::size_t x = 0; x < 2 * W; ++x) (*idx)[o++] = (c * H + y / 2) * W + x / 2;
  return gather(fmap, {C, 2 * H, 2 * W}, std::move(idx));
}

TokenGrid mlp(const TokenGrid& t, const Var& w1, const Var& b1, const Var& w2, const Var& b2) {
  if (t.tokens.shape()[1] != w1.shape()[0])
    throw std::invalid_argument("mlp: tokens " + shape_str(t.tokens.shape()) +
                                " vs first weight " + shape_str(w1.shape()));
  Var h = gelu(add(matmul(t.tokens, w1), b1));
  TokenGrid out = t;
  out.tokens = add(matmul(h, w2), b2);
  return out;
}

}  // namespace depthgen
