#include "depthgen/checks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <utility>

#include "depthgen/adversarial.hpp"
#include "depthgen/caf.hpp"
#include "depthgen/generator.hpp"

namespace depthgen {
namespace {

// Every scene owns a base seed; the caller's seed shifts the stream so
// repeated audits explore fresh draws without losing reproducibility.
std::uint64_t mix(std::uint64_t base, std::uint64_t seed) { return base + 1000003 * seed; }

SemanticLayout random_layout(std::size_t h, std::size_t w, std::size_t nl, Rng& rng) {
  SemanticLayout m;
  m.h = h;
  m.w = w;
  m.num_labels = nl;
  m.labels.resize(h * w);
  for (auto& v : m.labels) v = static_cast<int>(rng.next_u64() % nl);
  return m;
}

TokenGrid tokens_of(const Var& t, std::size_t gh, std::size_t gw) {
  TokenGrid g;
  g.tokens = t;
  g.grid_h = gh;
  g.grid_w = gw;
  g.patch = 1;
  return g;
}

/// Central-difference audit of every probed entry against the analytic
/// gradient. Differs from the strict unit-test form in two ways, both
/// needed so that any seed passes, not just a hand-picked one:
///   - Each entry is judged against max(|a| + |fd|, 1e-3 * gmax): an
///     entry carrying less than 0.1% of the scene's peak gradient is
///     held to an absolute bar scaled to the model instead of an
///     unreachable relative one. Seed-dependent near-cancellations
///     (attention score paths, normalization-absorbed biases) otherwise
///     leave true gradients near 1e-7 whose differences are pure
///     rounding noise. A wiring bug still surfaces, since it perturbs
///     gradients at the scale of the gradients themselves.
///   - Deep composites compound curvature until no single step size
///     beats the h^2 truncation term; `richardson` extrapolates each
///     difference from steps h and h/2 to cancel it.
double audit(const std::function<Var()>& fn, ParamStore& ps, double h, bool richardson) {
  ps.zero_grad();
  backward(fn());
  double gmax = 0.0;
  for (const auto& [name, var] : ps.items()) {
    const Tensor g = var.grad();
    for (std::size_t i = 0; i < g.numel(); ++i) gmax = std::max(gmax, std::abs(g[i]));
  }
  if (!(gmax > 0.0)) throw std::runtime_error("gradient audit: zero gradient field");
  const double floor = 1e-3 * gmax;

  double worst = 0.0;
  for (const auto& [name, var] : ps.items()) {
    const Tensor g = var.grad();
    Tensor& t = ps.get(name).mutable_val();
    for (std::size_t i = 0; i < t.numel(); ++i) {
      const double keep = t[i];
      auto at = [&](double x) {
        t.data()[i] = x;
        const double v = fn().val()[0];
        t.data()[i] = keep;
        if (!std::isfinite(v))
          throw std::runtime_error("gradient audit: non-finite loss while probing");
        return v;
      };
      double fd = (at(keep + h) - at(keep - h)) / (2 * h);
      if (richardson) {
        const double narrow = (at(keep + h / 2) - at(keep - h / 2)) / h;
        fd = (4.0 * narrow - fd) / 3.0;
      }
      const double err = std::abs(g[i] - fd) / std::max(floor, std::abs(g[i]) + std::abs(fd));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

/// Conditioned token normalization, both statistics modes.
double scene_ctn(std::uint64_t seed) {
  Rng rng(mix(113, seed));
  SemanticLayout m = random_layout(4, 4, 3, rng);
  ParamStore ps;
  ps.add("f", init_uniform({16, 4}, -1, 1, rng));
  ps.add("emb.w", init_uniform({3, 2}, -0.5, 0.5, rng));
  ps.add("emb.b", init_uniform({2}, -0.5, 0.5, rng));
  ps.add("c.sw", init_uniform({2, 4}, -0.5, 0.5, rng));
  ps.add("c.sb", init_uniform({4}, -0.5, 0.5, rng));
  ps.add("c.gw", init_uniform({4, 4}, -0.5, 0.5, rng));
  ps.add("c.gb", init_uniform({4}, 0.5, 1.5, rng));
  ps.add("c.bw", init_uniform({4, 4}, -0.5, 0.5, rng));
  ps.add("c.bb", init_uniform({4}, -0.5, 0.5, rng));
  Var w = Var::constant(init_uniform({16, 4}, -1, 1, rng));
  double worst = 0.0;
  for (CtnStats st : {CtnStats::joint, CtnStats::per_token}) {
    auto fn = [&]() {
      TokenGrid f = tokens_of(ps.get("f"), 4, 4);
      TokenGrid mt = tokenize_layout(m, 4, 4, 1, ps.get("emb.w"), ps.get("emb.b"));
      CtnParams p{ps.get("c.sw"), ps.get("c.sb"), ps.get("c.gw"),
                  ps.get("c.gb"), ps.get("c.bw"), ps.get("c.bb")};
      return sum_all(mul(ctn_forward(f, mt, p, st).tokens, w));
    };
    worst = std::max(worst, audit(fn, ps, 1e-5, false));
  }
  return worst;
}

/// Windowed self-attention, plain or shifted.
double scene_wmsa(std::uint64_t seed, bool shifted) {
  Rng rng(mix(241, seed));
  ParamStore ps;
  ps.add("t", init_uniform({16, 4}, -0.8, 0.8, rng));
  ps.add("q.w", init_uniform({4, 4}, -0.5, 0.5, rng));
  ps.add("q.b", init_uniform({4}, -0.2, 0.2, rng));
  ps.add("k.w", init_uniform({4, 4}, -0.5, 0.5, rng));
  ps.add("v.w", init_uniform({4, 4}, -0.5, 0.5, rng));
  ps.add("v.b", init_uniform({4}, -0.2, 0.2, rng));
  ps.add("o.w", init_uniform({4, 4}, -0.5, 0.5, rng));
  ps.add("o.b", init_uniform({4}, -0.2, 0.2, rng));
  ps.add("bias", init_uniform({9, 2}, -0.5, 0.5, rng));
  // the key bias shifts every score of a softmax row equally, so its
  // true gradient is identically zero -- below the resolution of the
  // relative metric; it stays out of the probe (the unit tests assert
  // the analytic zero directly)
  Var kb = Var::leaf(init_uniform({4}, -0.2, 0.2, rng));
  Var w = Var::constant(init_uniform({16, 4}, -1, 1, rng));
  auto fn = [&]() {
    MsaParams p;
    p.heads = 2;
    p.q_w = ps.get("q.w");
    p.q_b = ps.get("q.b");
    p.k_w = ps.get("k.w");
    p.k_b = kb;
    p.v_w = ps.get("v.w");
    p.v_b = ps.get("v.b");
    p.o_w = ps.get("o.w");
    p.o_b = ps.get("o.b");
    p.bias_table = ps.get("bias");
    return sum_all(mul(wmsa(tokens_of(ps.get("t"), 4, 4), 2, shifted, p).tokens, w));
  };
  return audit(fn, ps, 1e-5, false);
}

/// The whole fusion block: semantic alignment, per-branch patch
/// embeddings, bidirectional cross attention, and the gated blend.
double scene_caf(std::uint64_t seed) {
  Rng rng(mix(347, seed));
  SemanticLayout m = random_layout(2, 2, 3, rng);
  const std::size_t c = 2, e = 2;  // patch 1 keeps 4 tokens per softmax
  ParamStore ps;
  ps.add("fd", init_uniform({c, 2, 2}, -0.8, 0.8, rng));
  ps.add("fr", init_uniform({c, 2, 2}, -0.8, 0.8, rng));
  ps.add("emb.w", init_uniform({c, 3, 1, 1}, -0.6, 0.6, rng));
  ps.add("emb.b", init_uniform({c}, -0.2, 0.2, rng));
  ps.add("pe.d.w", init_uniform({e, e}, -0.5, 0.5, rng));
  ps.add("pe.d.b", init_uniform({e}, -0.2, 0.2, rng));
  ps.add("pe.r.w", init_uniform({e, e}, -0.5, 0.5, rng));
  ps.add("pe.r.b", init_uniform({e}, -0.2, 0.2, rng));
  for (std::string b : {"d", "r"}) {
    ps.add(b + ".qw", init_uniform({e, e}, -0.5, 0.5, rng));
    ps.add(b + ".qb", init_uniform({e}, -0.2, 0.2, rng));
    ps.add(b + ".kw", init_uniform({e, e}, -0.5, 0.5, rng));
    ps.add(b + ".vw", init_uniform({e, e}, -0.5, 0.5, rng));
    ps.add(b + ".vb", init_uniform({e}, -0.2, 0.2, rng));
    ps.add(b + ".ow", init_uniform({e, e}, -0.5, 0.5, rng));
    ps.add(b + ".ob", init_uniform({e}, -0.2, 0.2, rng));
  }
  ps.add("alpha.d", Tensor({1}, {0.3}));
  ps.add("alpha.r", Tensor({1}, {-0.2}));
  // key biases: identically-zero gradient, kept out of the probe
  Var kbd = Var::leaf(init_uniform({e}, -0.2, 0.2, rng));
  Var kbr = Var::leaf(init_uniform({e}, -0.2, 0.2, rng));
  Var wd = Var::constant(init_uniform({c, 2, 2}, -1, 1, rng));
  Var wr = Var::constant(init_uniform({c, 2, 2}, -1, 1, rng));
  auto proj_of = [&](const std::string& b) {
    AttnProj a;
    a.q_w = ps.get(b + ".qw");
    a.q_b = ps.get(b + ".qb");
    a.k_w = ps.get(b + ".kw");
    a.k_b = b == "d" ? kbd : kbr;
    a.v_w = ps.get(b + ".vw");
    a.v_b = ps.get(b + ".vb");
    a.o_w = ps.get(b + ".ow");
    a.o_b = ps.get(b + ".ob");
    return a;
  };
  double worst = 0.0;
  for (CafValueSource v : {CafValueSource::self, CafValueSource::other}) {
    auto fn = [&]() {
      CafParams p;
      p.embed_w = ps.get("emb.w");
      p.embed_b = ps.get("emb.b");
      p.pe_d_w = ps.get("pe.d.w");
      p.pe_d_b = ps.get("pe.d.b");
      p.pe_r_w = ps.get("pe.r.w");
      p.pe_r_b = ps.get("pe.r.b");
      p.cross.d = proj_of("d");
      p.cross.r = proj_of("r");
      p.alpha_d = ps.get("alpha.d");
      p.alpha_r = ps.get("alpha.r");
      p.patch = 1;
      auto [od, orr] = caf_fuse(ps.get("fd"), ps.get("fr"), m, p, v);
      return add(sum_all(mul(od, wd)), sum_all(mul(orr, wr)));
    };
    // h = 1e-4: a few q/k entries have ~1e-7 gradients where a smaller
    // step leaves only cancellation noise in the central difference
    worst = std::max(worst, audit(fn, ps, 1e-4, false));
  }
  return worst;
}

/// Tokenwise two-layer MLP on its own.
double scene_mlp(std::uint64_t seed) {
  Rng rng(mix(389, seed));
  ParamStore ps;
  ps.add("t", init_uniform({9, 3}, -0.8, 0.8, rng));
  ps.add("w1", init_uniform({3, 12}, -0.5, 0.5, rng));
  ps.add("b1", init_uniform({12}, -0.5, 0.5, rng));
  ps.add("w2", init_uniform({12, 3}, -0.5, 0.5, rng));
  ps.add("b2", init_uniform({3}, -0.5, 0.5, rng));
  Var w = Var::constant(init_uniform({9, 3}, -1, 1, rng));
  auto fn = [&]() {
    TokenGrid t = mlp(tokens_of(ps.get("t"), 3, 3), ps.get("w1"), ps.get("b1"),
                      ps.get("w2"), ps.get("b2"));
    return sum_all(mul(t.tokens, w));
  };
  return audit(fn, ps, 1e-5, false);
}

/// Patch embedding into tokens and back out through the sub-pixel
/// upsampling path.
double scene_pixel_shuffle_path(std::uint64_t seed) {
  Rng rng(mix(79, seed));
  ParamStore ps;
  ps.add("f", init_uniform({2, 4, 4}, -1, 1, rng));
  ps.add("pe.w", init_uniform({8, 4}, -0.5, 0.5, rng));
  ps.add("pe.b", init_uniform({4}, -0.5, 0.5, rng));
  ps.add("m.w1", init_uniform({4, 16}, -0.5, 0.5, rng));
  ps.add("m.b1", init_uniform({16}, -0.5, 0.5, rng));
  ps.add("m.w2", init_uniform({16, 4}, -0.5, 0.5, rng));
  ps.add("m.b2", init_uniform({4}, -0.5, 0.5, rng));
  Var w = Var::constant(init_uniform({1, 4, 4}, -1, 1, rng));
  auto fn = [&]() {
    TokenGrid t = patch_embed(ps.get("f"), 2, ps.get("pe.w"), ps.get("pe.b"));
    t = mlp(t, ps.get("m.w1"), ps.get("m.b1"), ps.get("m.w2"), ps.get("m.b2"));
    Var map = pixel_shuffle(token_to_map(t), 2);
    return sum_all(mul(map, w));
  };
  return audit(fn, ps, 1e-5, false);
}

/// Layout-modulated shortcut: normalize, project, scale-and-shift.
double scene_spade(std::uint64_t seed) {
  Rng rng(mix(137, seed));
  SemanticLayout m = random_layout(4, 4, 2, rng);
  ParamStore ps;
  ps.add("f", init_uniform({2, 4, 4}, -1, 1, rng));
  ps.add("s.pw", init_uniform({3, 2, 1, 1}, -0.5, 0.5, rng));
  ps.add("s.pb", init_uniform({3}, -0.5, 0.5, rng));
  ps.add("s.sw", init_uniform({2, 2, 3, 3}, -0.5, 0.5, rng));
  // positive shared-conv bias keeps the ReLU away from its kink
  ps.add("s.sb", init_uniform({2}, 0.1, 0.6, rng));
  ps.add("s.gw", init_uniform({3, 2, 3, 3}, -0.5, 0.5, rng));
  ps.add("s.gb", init_uniform({3}, -0.5, 0.5, rng));
  ps.add("s.bw", init_uniform({3, 2, 3, 3}, -0.5, 0.5, rng));
  ps.add("s.bb", init_uniform({3}, -0.5, 0.5, rng));
  Var w = Var::constant(init_uniform({3, 4, 4}, -1, 1, rng));
  auto fn = [&]() {
    SpadeParams p{ps.get("s.pw"), ps.get("s.pb"), ps.get("s.sw"), ps.get("s.sb"),
                  ps.get("s.gw"), ps.get("s.gb"), ps.get("s.bw"), ps.get("s.bb")};
    return sum_all(mul(spade_shortcut(ps.get("f"), m, p), w));
  };
  return audit(fn, ps, 1e-5, false);
}

/// Same-padding convolution fed through the shifted-window roundtrip
/// and nearest upsampling.
double scene_conv(std::uint64_t seed) {
  Rng rng(mix(797, seed));
  ParamStore ps;
  ps.add("tok", init_uniform({16, 2}, -1, 1, rng));
  ps.add("cw", init_uniform({2, 2, 3, 3}, -0.5, 0.5, rng));
  ps.add("cb", init_uniform({2}, -0.5, 0.5, rng));
  Var w = Var::constant(init_uniform({2, 8, 8}, -1, 1, rng));
  auto fn = [&]() {
    TokenGrid t = tokens_of(ps.get("tok"), 4, 4);
    auto [wins, mask] = window_partition(t, 2, 1);
    TokenGrid back = window_reverse(wins, 2, 1, 4, 4, 1);
    Var map = upsample_nearest(token_to_map(back));
    return sum_all(mul(conv_same(map, ps.get("cw"), ps.get("cb")), w));
  };
  return audit(fn, ps, 1e-5, false);
}

/// The training objectives as differentiable functions: both hinge
/// losses on leaf logits, feature matching on leaf maps, and the
/// structural-similarity score on a pair of leaf images.
double scene_losses(std::uint64_t seed) {
  Rng rng(mix(557, seed));
  ParamStore ps;
  ps.add("x", init_uniform({1, 12, 12}, -0.8, 0.8, rng));
  ps.add("y", init_uniform({1, 12, 12}, -0.8, 0.8, rng));
  // logits inside (-0.8, 0.8) keep 1 +/- logit clear of the hinge kink
  const Shape logit_shapes[2] = {{1, 3, 3}, {1, 2, 2}};
  const Shape feat_shapes[2][2] = {{{2, 5, 5}, {3, 3, 3}}, {{2, 4, 4}, {3, 2, 2}}};
  // real features stay out of the probe: feature matching deliberately
  // treats them as constants, so their analytic gradient is zero while
  // a finite difference would see the genuine dependence
  std::vector<std::vector<Var>> real_feats(2);
  for (int s = 0; s < 2; ++s) {
    const std::string sc = "s" + std::to_string(s);
    ps.add(sc + ".rl", init_uniform(logit_shapes[s], -0.8, 0.8, rng));
    ps.add(sc + ".fl", init_uniform(logit_shapes[s], -0.8, 0.8, rng));
    for (int l = 0; l < 2; ++l) {
      Tensor rf = init_uniform(feat_shapes[s][l], -0.8, 0.8, rng);
      // fake features sit a structural 0.3..0.7 away from the real ones,
      // alternating side, so the absolute-difference kink is never
      // crossed by the probe and both slope signs are exercised
      Tensor ff = rf;
      for (std::size_t i = 0; i < ff.numel(); ++i) {
        const double gap = 0.3 + 0.4 * rng.uniform01();
        ff.data()[i] += (i % 2 == 0) ? gap : -gap;
      }
      real_feats[s].push_back(Var::constant(rf));
      ps.add(sc + ".ff" + std::to_string(l), ff);
    }
  }
  auto fn = [&]() {
    std::vector<DiscScaleOutput> real, fake;
    for (int s = 0; s < 2; ++s) {
      const std::string sc = "s" + std::to_string(s);
      real.push_back({ps.get(sc + ".rl"), real_feats[s]});
      fake.push_back({ps.get(sc + ".fl"), {ps.get(sc + ".ff0"), ps.get(sc + ".ff1")}});
    }
    Var loss = hinge_d_loss(real, fake);
    loss = add(loss, scale(hinge_g_loss(fake), 0.5));
    loss = add(loss, scale(feature_matching_loss(real, fake), 0.25));
    return add(loss, ssim(ps.get("x"), ps.get("y")));
  };
  // h = 4e-5: the differences here are rounding-noise limited (the
  // objectives are nearly quadratic), so a wider step buys margin
  return audit(fn, ps, 4e-5, false);
}

void fill_value(ParamStore& ps, const std::string& name, double v) {
  Tensor& t = ps.get(name).mutable_val();
  std::fill(t.data(), t.data() + t.numel(), v);
}

/// Keeps ReLU pre-activations clear of the kink for FD probing.
void bias_relus_positive(ParamStore& ps) {
  for (const auto& [name, var] : ps.items()) {
    const bool enc = name.rfind("g.enc.c", 0) == 0 && name.size() > 2 &&
                     name.compare(name.size() - 2, 2, ".b") == 0;
    if (enc || name.find(".sp.s.b") != std::string::npos) fill_value(ps, name, 0.5);
  }
}

/// At the 0.02-sigma init the layout-conditioning and attention-score
/// paths carry true gradients of order 1e-8, inside the blind zone of
/// the relative metric. Re-draws matching weights at a measurable scale.
void boost(ParamStore& ps, Rng& rng, const std::string& needle, double half, bool prefix) {
  for (const auto& [name, var] : ps.items()) {
    const bool hit = prefix ? name.rfind(needle, 0) == 0 : name.find(needle) != std::string::npos;
    if (!hit || name.find(".sp.") != std::string::npos) continue;
    Tensor& t = ps.get(name).mutable_val();
    Tensor r = init_uniform(t.shape(), -half, half, rng);
    std::copy(r.data(), r.data() + r.numel(), t.data());
  }
}

/// Smallest legal two-stage pipeline: 4x4 -> 8x8, 4 channels throughout.
GeneratorConfig tiny_config() {
  GeneratorConfig cfg;
  cfg.output_resolution = 8;
  cfg.stages = {{4, 4, 4, 1, 2, 1}, {8, 4, 4, 1, 2, 1}};
  cfg.z_dim = 4;
  cfg.num_labels = 3;
  return cfg;
}

/// One complete stage: embedding, both attention variants, MLPs, all
/// four normalizations, and the modulated shortcut.
double scene_stage(std::uint64_t seed) {
  Rng rng(mix(421, seed));
  GeneratorConfig cfg = tiny_config();
  SemanticLayout m = random_layout(8, 8, 3, rng);
  ParamStore full = build_generator_params(cfg, 31 + seed);
  bias_relus_positive(full);

  // probe just stage 0's weights plus its input map; key biases stay
  // out (identically-zero gradients, asserted in the unit tests)
  ParamStore ps;
  ps.add("f", init_uniform({4, 4, 4}, -0.8, 0.8, rng));
  for (const auto& [name, var] : full.items())
    if (name.rfind("g.d.s0.", 0) == 0 && name.find(".kb") == std::string::npos)
      ps.add(name, var.val());
  for (const char* n : {".lt.", ".sw", ".sb", ".gw", ".gb", ".bw", ".bb"})
    boost(ps, rng, n, 0.4, false);
  for (const char* n : {".qw", ".qb", ".kw", ".bt"}) boost(ps, rng, n, 0.15, false);

  Var kb0 = Var::leaf(Tensor::zeros({4}));
  Var kb1 = Var::leaf(Tensor::zeros({4}));
  // small loss weighting: rounding noise in the finite differences
  // scales with the magnitude of the scalar being differenced
  Var w = Var::constant(init_uniform({4, 8, 8}, -1.0 / 64, 1.0 / 64, rng));
  auto fn = [&]() {
    StageParams sp;
    sp.pe_w = ps.get("g.d.s0.pe.w");
    sp.pe_b = ps.get("g.d.s0.pe.b");
    sp.lt_w = ps.get("g.d.s0.lt.w");
    sp.lt_b = ps.get("g.d.s0.lt.b");
    StagePairParams pair;
    auto ctn_of = [&](const char* n) {
      const std::string p = std::string("g.d.s0.p0.") + n;
      return CtnParams{ps.get(p + ".sw"), ps.get(p + ".sb"), ps.get(p + ".gw"),
                       ps.get(p + ".gb"), ps.get(p + ".bw"), ps.get(p + ".bb")};
    };
    pair.n0 = ctn_of("n0");
    pair.n1 = ctn_of("n1");
    pair.n2 = ctn_of("n2");
    pair.n3 = ctn_of("n3");
    auto msa_of = [&](const char* n, Var kb) {
      const std::string p = std::string("g.d.s0.p0.") + n;
      MsaParams a;
      a.heads = 1;
      a.q_w = ps.get(p + ".qw");
      a.q_b = ps.get(p + ".qb");
      a.k_w = ps.get(p + ".kw");
      a.k_b = kb;
      a.v_w = ps.get(p + ".vw");
      a.v_b = ps.get(p + ".vb");
      a.o_w = ps.get(p + ".ow");
      a.o_b = ps.get(p + ".ob");
      a.bias_table = ps.get(p + ".bt");
      return a;
    };
    pair.a0 = msa_of("a0", kb0);
    pair.a1 = msa_of("a1", kb1);
    pair.m0 = {ps.get("g.d.s0.p0.m0.w1"), ps.get("g.d.s0.p0.m0.b1"),
               ps.get("g.d.s0.p0.m0.w2"), ps.get("g.d.s0.p0.m0.b2")};
    pair.m1 = {ps.get("g.d.s0.p0.m1.w1"), ps.get("g.d.s0.p0.m1.b1"),
               ps.get("g.d.s0.p0.m1.w2"), ps.get("g.d.s0.p0.m1.b2")};
    sp.pairs = {pair};
    sp.sp = SpadeParams{ps.get("g.d.s0.sp.p.w"), ps.get("g.d.s0.sp.p.b"),
                        ps.get("g.d.s0.sp.s.w"), ps.get("g.d.s0.sp.s.b"),
                        ps.get("g.d.s0.sp.gw"),  ps.get("g.d.s0.sp.gb"),
                        ps.get("g.d.s0.sp.bw"),  ps.get("g.d.s0.sp.bb")};
    Var out = generator_stage(ps.get("f"), m, cfg.stages[0], sp, CtnStats::joint, false,
                              false);
    return sum_all(mul(out, w));
  };
  // h = 2e-4 against rounding noise in the tiny-gradient entries, with
  // extrapolation against the curvature the composite stacks up
  return audit(fn, ps, 2e-4, true);
}

/// Every parameter of the full two-stage pipeline, latent included.
/// Two stages of normalization compound the curvature of the
/// token-constant bias directions (patch-embed bias, attention output
/// bias, MLP output bias) until a plain central difference cannot
/// resolve them at any step size, so this scene runs the audit with
/// Richardson extrapolation.
double scene_full(std::uint64_t seed) {
  Rng rng(mix(907, seed));
  GeneratorConfig cfg = tiny_config();
  SemanticLayout m = random_layout(8, 8, 3, rng);
  ParamStore ps = build_generator_params(cfg, 31 + seed);
  bias_relus_positive(ps);
  for (const char* n : {".lt.", ".sw", ".sb", ".gw", ".gb", ".bw", ".bb"})
    boost(ps, rng, n, 0.4, false);
  for (const char* n : {".qw", ".qb", ".kw", ".bt"}) boost(ps, rng, n, 0.15, false);
  boost(ps, rng, "caf.e.", 0.3, true);
  boost(ps, rng, "caf.pd.", 0.3, true);
  boost(ps, rng, "caf.pr.", 0.3, true);
  boost(ps, rng, "head.", 0.12, true);

  Var wd = Var::constant(init_uniform({1, 8, 8}, -1.0 / 64, 1.0 / 64, rng));
  Var wr = Var::constant(init_uniform({3, 8, 8}, -1.0 / 64, 1.0 / 64, rng));
  auto fn = [&]() {
    auto [d, r] = generate(m, ps, cfg);
    return add(sum_all(mul(d, wd)), sum_all(mul(r, wr)));
  };
  return audit(fn, ps, 2e-4, true);
}

struct Scene {
  const char* name;
  double threshold;
  std::function<double(std::uint64_t)> run;
};

const Scene kScenes[] = {
    {"ctn", 1e-6, scene_ctn},
    {"wmsa", 1e-6, [](std::uint64_t s) { return scene_wmsa(s, false); }},
    {"sw_msa", 1e-6, [](std::uint64_t s) { return scene_wmsa(s, true); }},
    {"cross_attention", 1e-6, scene_caf},
    {"mlp", 1e-6, scene_mlp},
    {"pixel_shuffle_path", 1e-6, scene_pixel_shuffle_path},
    {"spade_shortcut", 1e-6, scene_spade},
    {"conv", 1e-6, scene_conv},
    {"losses", 1e-6, scene_losses},
    {"stage", 1e-5, scene_stage},
    {"full_generator", 1e-5, scene_full},
};

}  // namespace

std::vector<CheckResult> run_gradchecks(const std::string& which, std::uint64_t seed) {
  std::vector<const Scene*> picked;
  for (const Scene& s : kScenes) {
    const std::string n = s.name;
    const bool hit = which == "all" || n == which ||
                     (which == "wmsa" && (n == "wmsa" || n == "sw_msa")) ||
                     (which == "caf" && n == "cross_attention") ||
                     (which == "full" && n == "full_generator");
    if (hit) picked.push_back(&s);
  }
  if (picked.empty()) throw std::invalid_argument("run_gradchecks: unknown selector " + which);
  std::vector<CheckResult> out;
  for (const Scene* s : picked) {
    const auto t0 = std::chrono::steady_clock::now();
    CheckResult r;
    r.scene = s->name;
    r.threshold = s->threshold;
    r.max_rel_err = s->run(seed);
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace depthgen
