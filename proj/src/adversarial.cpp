#include "depthgen/adversarial.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace depthgen {

namespace {

void normalize_vec(Tensor& x) {
  double n = 0.0;
  for (std::size_t i = 0; i < x.numel(); ++i) n += x[i] * x[i];
  n = std::sqrt(n) + 1e-12;
  for (std::size_t i = 0; i < x.numel(); ++i) x.data()[i] /= n;
}

void check_mat(const Tensor& w, const Tensor& u, const char* op) {
  if (w.shape().empty() || w.numel() == 0)
    throw std::invalid_argument(std::string(op) + ": empty weight");
  if (u.numel() != w.shape()[0])
    throw std::invalid_argument(std::string(op) + ": u length " +
                                std::to_string(u.numel()) + " != weight rows " +
                                std::to_string(w.shape()[0]));
}

}  // namespace

Tensor power_v(const Tensor& w, const Tensor& u) {
  check_mat(w, u, "power_v");
  const std::size_t rows = w.shape()[0], cols = w.numel() / rows;
  Tensor v = Tensor::zeros({cols});
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) v.data()[j] += u[i] * w[i * cols + j];
  normalize_vec(v);
  return v;
}

void power_update(const Tensor& w, Tensor& u) {
  check_mat(w, u, "power_update");
  const Tensor v = power_v(w, u);
  const std::size_t rows = w.shape()[0], cols = w.numel() / rows;
  Tensor nu = Tensor::zeros({rows});
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) nu.data()[i] += w[i * cols + j] * v[j];
  normalize_vec(nu);
  u = nu;
}

double spectral_sigma(const Tensor& w, const Tensor& u) {
  check_mat(w, u, "spectral_sigma");
  const Tensor v = power_v(w, u);
  const std::size_t rows = w.shape()[0], cols = w.numel() / rows;
  double s = 0.0;
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) s += u[i] * w[i * cols + j] * v[j];
  return s;
}

ParamStore build_discriminator_params(const DiscriminatorConfig& cfg, std::uint64_t seed) {
  if (cfg.num_labels == 0 || cfg.widths.empty() || cfg.scales == 0)
    throw std::invalid_argument("discriminator config: empty labels, widths, or scales");
  Rng rng(seed);
  ParamStore ps;
  for (std::size_t k = 0; k < cfg.scales; ++k) {
    const std::string sp = "s" + std::to_string(k) + ".";
    std::size_t cin = cfg.num_labels + cfg.image_channels;
    for (std::size_t j = 0; j < cfg.widths.size(); ++j) {
      const std::string cp = sp + "c" + std::to_string(j) + ".";
      ps.add(cp + "w", init_trunc_normal({cfg.widths[j], cin, 4, 4}, 0.02, rng));
      ps.add(cp + "b", Tensor::zeros({cfg.widths[j]}));
      cin = cfg.widths[j];
    }
    ps.add(sp + "h.w", init_trunc_normal({1, cin, 1, 1}, 0.02, rng));
    ps.add(sp + "h.b", Tensor::zeros({1}));
  }
  return ps;
}

SpectralState init_spectral_state(const ParamStore& ps, std::uint64_t seed) {
  Rng rng(seed);
  SpectralState st;
  for (const auto& [name, var] : ps.items()) {
    if (name.size() < 2 || name.compare(name.size() - 2, 2, ".w") != 0) continue;
    Tensor u = init_normal({var.shape()[0]}, 0.0, 1.0, rng);
    normalize_vec(u);
    st.u.emplace(name, std::move(u));
  }
  return st;
}

namespace {

/// W / (u^T W v) with u fixed and v one transpose-step behind; in
/// training mode u first advances by one power iteration.
Var spectral_normalize(const Var& w, SpectralState& sn, const std::string& name,
                       bool train) {
  auto it = sn.u.find(name);
  if (it == sn.u.end())
    throw std::invalid_argument("discriminate: no spectral state for " + name);
  Tensor& u = it->second;
  if (train) power_update(w.val(), u);
  const Tensor v = power_v(w.val(), u);
  const std::size_t rows = w.shape()[0], cols = w.numel() / rows;
  Tensor ur({1, rows}), vc({cols, 1});
  std::copy(u.data(), u.data() + rows, ur.data());
  std::copy(v.data(), v.data() + cols, vc.data());
  Var sigma = matmul(matmul(Var::constant(std::move(ur)), reshape(w, {rows, cols})),
                     Var::constant(std::move(vc)));
  return div_v(w, reshape(sigma, {1}));
}

Var avg_pool2(const Var& x) {
  const Shape& s = x.shape();
  if (s[1] % 2 != 0 || s[2] % 2 != 0)
    throw std::invalid_argument("discriminate: cannot halve odd extent " + shape_str(s));
  return mean(reshape(x, {s[0], s[1] / 2, 2, s[2] / 2, 2}), {2, 4}, false);
}

}  // namespace

std::vector<DiscScaleOutput> discriminate(const Var& image, const SemanticLayout& m,
                                          const ParamStore& ps, SpectralState& sn,
                                          bool train,
                                          const std::vector<std::size_t>& scale_set) {
  const Shape& s = image.shape();
  if (s.size() != 3) throw std::invalid_argument("discriminate: image must be [C,H,W]");
  if (s[1] < 16 || s[2] < 16)
    throw std::invalid_argument("discriminate: input " + shape_str(s) +
                                " below the 16x16 minimum");
  const std::size_t cin = ps.get("s0.c0.w").shape()[1];
  if (cin != m.num_labels + s[0])
    throw std::invalid_argument("discriminate: expected " + std::to_string(cin) +
                                " input channels, got " + std::to_string(m.num_labels) +
                                " labels + " + std::to_string(s[0]) + " image channels");

  Var x0 = concat({one_hot(resample_labels(m, s[1], s[2])), image}, 0);
  std::vector<DiscScaleOutput> out;
  for (std::size_t k : scale_set) {
    const std::string sp = "s" + std::to_string(k) + ".";
    if (!ps.has(sp + "h.w"))
      throw std::invalid_argument("discriminate: no scale " + std::to_string(k));
    Var x = x0;
    for (std::size_t p = 0; p < k; ++p) x = avg_pool2(x);
    DiscScaleOutput o;
    for (std::size_t j = 0; ps.has(sp + "c" + std::to_string(j) + ".w"); ++j) {
      const std::string cp = sp + "c" + std::to_string(j) + ".";
      Var w = spectral_normalize(ps.get(cp + "w"), sn, cp + "w", train);
      x = leaky_relu(conv2d(x, w, ps.get(cp + "b"), 2, 2), 0.2);
      o.feats.push_back(x);
    }
    Var hw = spectral_normalize(ps.get(sp + "h.w"), sn, sp + "h.w", train);
    o.logits = conv2d(x, hw, ps.get(sp + "h.b"), 1, 0);
    out.push_back(std::move(o));
  }
  return out;
}

Var hinge_d_loss(const std::vector<DiscScaleOutput>& real,
                 const std::vector<DiscScaleOutput>& fake) {
  if (real.empty() || real.size() != fake.size())
    throw std::invalid_argument("hinge_d_loss: scale counts differ");
  Var acc;
  for (std::size_t k = 0; k < real.size(); ++k) {
    Var term = add(mean_all(max0_shift(scale(real[k].logits, -1.0), 1.0)),
                   mean_all(max0_shift(fake[k].logits, 1.0)));
    acc = acc.defined() ? add(acc, term) : term;
  }
  return scale(acc, 1.0 / static_cast<double>(real.size()));
}

Var hinge_g_loss(const std::vector<DiscScaleOutput>& fake) {
  if (fake.empty()) throw std::invalid_argument("hinge_g_loss: no scales");
  Var acc;
  for (const DiscScaleOutput& o : fake) {
    Var term = mean_all(scale(o.logits, -1.0));
    acc = acc.defined() ? add(acc, term) : term;
  }
  return scale(acc, 1.0 / static_cast<double>(fake.size()));
}

Var feature_matching_loss(const std::vector<DiscScaleOutput>& real,
                          const std::vector<DiscScaleOutput>& fake) {
  if (real.empty() || real.size() != fake.size())
    throw std::invalid_argument("feature_matching_loss: scale counts differ");
  Var acc;
  std::size_t pairs = 0;
  for (std::size_t k = 0; k < real.size(); ++k) {
    if (real[k].feats.size() != fake[k].feats.size())
      throw std::invalid_argument("feature_matching_loss: layer counts differ");
    for (std::size_t j = 0; j < real[k].feats.size(); ++j) {
      const Var& r = real[k].feats[j];
      const Var& f = fake[k].feats[j];
      if (!shape_eq(r.shape(), f.shape()))
        throw std::invalid_argument("feature_matching_loss: feature shapes " +
                                    shape_str(r.shape()) + " vs " + shape_str(f.shape()));
      Var term = mean_all(vabs(sub(detach(r), f)));
      acc = acc.defined() ? add(acc, term) : term;
      ++pairs;
    }
  }
  if (pairs == 0) throw std::invalid_argument("feature_matching_loss: no features");
  return scale(acc, 1.0 / static_cast<double>(pairs));
}

namespace {

constexpr std::size_t kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;
constexpr double kSsimC1 = 0.01 * 0.01;
constexpr double kSsimC2 = 0.03 * 0.03;

const Tensor& ssim_kernel() {
  static const Tensor k = [] {
    Tensor t({1, 1, kSsimWindow, kSsimWindow});
    const double c = (kSsimWindow - 1) / 2.0;
    double total = 0.0;
    for (std::size_t i = 0; i < kSsimWindow; ++i)
      for (std::size_t j = 0; j < kSsimWindow; ++j) {
        const double d2 = (i - c) * (i - c) + (j - c) * (j - c);
        const double g = std::exp(-d2 / (2.0 * kSsimSigma * kSsimSigma));
        t.data()[i * kSsimWindow + j] = g;
        total += g;
      }
    for (std::size_t i = 0; i < t.numel(); ++i) t.data()[i] /= total;
    return t;
  }();
  return k;
}

}  // namespace

Var ssim(const Var& x, const Var& y) {
  const Shape& s = x.shape();
  if (s.size() != 3 || s[0] != 1 || !shape_eq(s, y.shape()))
    throw std::invalid_argument("ssim: need matching [1,H,W] maps, got " +
                                shape_str(x.shape()) + " vs " + shape_str(y.shape()));
  if (s[1] < kSsimWindow || s[2] < kSsimWindow)
    throw std::invalid_argument("ssim: map smaller than the 11x11 window");
  Var a = add_scalar(scale(x, 0.5), 0.5);  // [-1,1] -> [0,1]
  Var b = add_scalar(scale(y, 0.5), 0.5);
  Var k = Var::constant(ssim_kernel());
  Var z = Var::constant(Tensor::zeros({1}));
  auto blur = [&](const Var& v) { return conv2d(v, k, z, 1, 0); };
  Var mu_a = blur(a);
  Var mu_b = blur(b);
  Var var_a = sub(blur(mul(a, a)), mul(mu_a, mu_a));
  Var var_b = sub(blur(mul(b, b)), mul(mu_b, mu_b));
  Var cov = sub(blur(mul(a, b)), mul(mu_a, mu_b));
  Var num = mul(add_scalar(scale(mul(mu_a, mu_b), 2.0), kSsimC1),
                add_scalar(scale(cov, 2.0), kSsimC2));
  Var den = mul(add_scalar(add(mul(mu_a, mu_a), mul(mu_b, mu_b)), kSsimC1),
                add_scalar(add(var_a, var_b), kSsimC2));
  return mean_all(div_v(num, den));
}

AdamState init_adam_state(const ParamStore& ps) {
  AdamState st;
  for (const auto& [name, var] : ps.items()) {
    st.m.emplace(name, Tensor::zeros(var.shape()));
    st.v.emplace(name, Tensor::zeros(var.shape()));
  }
  return st;
}

void adam_step(ParamStore& ps, AdamState& st, double lr, double beta1, double beta2,
               double eps) {
  for (const auto& [name, var] : ps.items()) {
    if (st.m.find(name) == st.m.end())
      throw std::invalid_argument("adam_step: no state for " + name);
    const Tensor& g = var.grad();
    for (std::size_t i = 0; i < g.numel(); ++i)
      if (!std::isfinite(g[i]))
        throw std::runtime_error("adam_step: non-finite gradient in " + name);
  }
  st.t += 1;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(st.t));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(st.t));
  for (const auto& [name, var] : ps.items()) {
    const Tensor& g = var.grad();
    Tensor& m = st.m.at(name);
    Tensor& v = st.v.at(name);
    Tensor& p = ps.get(name).mutable_val();
    for (std::size_t i = 0; i < g.numel(); ++i) {
      m.data()[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
      v.data()[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p.data()[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

std::string TrainReport::to_csv() const {
  std::string out = "step,loss_d_depth,loss_d_rgb,loss_g_adv,loss_fm,loss_ssim\n";
  char buf[192];
  for (const TrainStepRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.step,
                  r.loss_d_depth, r.loss_d_rgb, r.loss_g_adv, r.loss_fm, r.loss_ssim);
    out += buf;
  }
  return out;
}

namespace {

struct Sample {
  SemanticLayout m;
  Tensor depth, rgb;  // [1,R,R], [3,R,R] in [-1,1]
};

/// Blocky layout plus label-keyed depth/color maps with mild ramps, so
/// the critics have real structure to separate.
Sample synth_sample(std::size_t res, std::size_t num_labels,
                    const std::vector<double>& depth_base,
                    const std::vector<double>& colors, Rng& rng) {
  Sample s;
  s.m.h = s.m.w = res;
  s.m.num_labels = num_labels;
  s.m.labels.resize(res * res);
  const std::size_t block = res >= 4 ? res / 4 : 1;
  for (std::size_t by = 0; by < res; by += block)
    for (std::size_t bx = 0; bx < res; bx += block) {
      const int lab = static_cast<int>(rng.next_u64() % num_labels);
      for (std::size_t y = by; y < by + block && y < res; ++y)
        for (std::size_t x = bx; x < bx + block && x < res; ++x)
          s.m.labels[y * res + x] = lab;
    }
  s.depth = Tensor({1, res, res});
  s.rgb = Tensor({3, res, res});
  for (std::size_t y = 0; y < res; ++y)
    for (std::size_t x = 0; x < res; ++x) {
      const std::size_t lab = static_cast<std::size_t>(s.m.labels[y * res + x]);
      const double ramp = 0.2 * (static_cast<double>(y) / res - 0.5);
      s.depth.data()[y * res + x] = depth_base[lab] + ramp;
      const double hramp = 0.2 * (static_cast<double>(x) / res - 0.5);
      for (std::size_t c = 0; c < 3; ++c)
        s.rgb.data()[(c * res + y) * res + x] = colors[lab * 3 + c] + hramp;
    }
  return s;
}

double scalar_of(const Var& v) { return v.val()[0]; }

void require_finite(double v, const char* what, std::size_t step) {
  if (!std::isfinite(v))
    throw std::runtime_error(std::string("train_smoke: non-finite ") + what +
                             " at step " + std::to_string(step));
}

}  // namespace

TrainReport train_smoke(const TrainConfig& cfg) {
  cfg.gen.validate();
  if (cfg.gen.output_resolution > 32 || cfg.gen.stages.size() > 2)
    throw std::invalid_argument("train_smoke: config beyond the 32x32 / 2-stage scale");
  if (cfg.steps > 500) throw std::invalid_argument("train_smoke: more than 500 steps");
  if (cfg.batch == 0) throw std::invalid_argument("train_smoke: empty batch");
  const std::size_t res = cfg.gen.output_resolution;
  const std::size_t nl = cfg.gen.num_labels;

  ParamStore gp = build_generator_params(cfg.gen, cfg.seed);
  DiscriminatorConfig dc_depth{1, nl, {16, 32, 64, 128}, 2};
  DiscriminatorConfig dc_rgb{3, nl, {16, 32, 64, 128}, 2};
  ParamStore dp_depth = build_discriminator_params(dc_depth, cfg.seed + 1);
  ParamStore dp_rgb = build_discriminator_params(dc_rgb, cfg.seed + 2);
  SpectralState sn_depth = init_spectral_state(dp_depth, cfg.seed + 3);
  SpectralState sn_rgb = init_spectral_state(dp_rgb, cfg.seed + 4);
  AdamState ag = init_adam_state(gp);
  AdamState ad_depth = init_adam_state(dp_depth);
  AdamState ad_rgb = init_adam_state(dp_rgb);

  Rng data_rng(cfg.seed + 5);
  std::vector<double> depth_base(nl), colors(nl * 3);
  for (auto& v : depth_base) v = -0.8 + 1.6 * data_rng.uniform01();
  for (auto& v : colors) v = -0.8 + 1.6 * data_rng.uniform01();

  TrainReport report;
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    std::vector<Sample> batch;
    for (std::size_t i = 0; i < cfg.batch; ++i)
      batch.push_back(synth_sample(res, nl, depth_base, colors, data_rng));

    // fakes for the critic updates carry no generator graph
    std::vector<Tensor> fake_depth, fake_rgb;
    {
      NoGradGuard ng;
      for (const Sample& s : batch) {
        auto [d, r] = generate(s.m, gp, cfg.gen);
        fake_depth.push_back(d.val());
        fake_rgb.push_back(r.val());
      }
    }

    TrainStepRow row;
    row.step = step;

    auto critic_update = [&](ParamStore& dps, SpectralState& sns, AdamState& ast,
                             const std::vector<Tensor>& reals,
                             const std::vector<Tensor>& fakes) {
      dps.zero_grad();
      Var acc;
      for (std::size_t i = 0; i < batch.size(); ++i) {
        auto ro = discriminate(Var::constant(reals[i]), batch[i].m, dps, sns, true);
        auto fo = discriminate(Var::constant(fakes[i]), batch[i].m, dps, sns, true);
        Var l = hinge_d_loss(ro, fo);
        acc = acc.defined() ? add(acc, l) : l;
      }
      Var loss = scale(acc, 1.0 / static_cast<double>(batch.size()));
      backward(loss);
      adam_step(dps, ast, cfg.lr_d);
      return scalar_of(loss);
    };
    std::vector<Tensor> real_depth, real_rgb;
    for (const Sample& s : batch) {
      real_depth.push_back(s.depth);
      real_rgb.push_back(s.rgb);
    }
    row.loss_d_depth = critic_update(dp_depth, sn_depth, ad_depth, real_depth, fake_depth);
    row.loss_d_rgb = critic_update(dp_rgb, sn_rgb, ad_rgb, real_rgb, fake_rgb);
    require_finite(row.loss_d_depth, "critic depth loss", step);
    require_finite(row.loss_d_rgb, "critic rgb loss", step);

    // generator update; critics run frozen so their state advances only
    // in their own half of the alternation
    gp.zero_grad();
    Var adv_acc, fm_acc, ssim_acc;
    for (const Sample& s : batch) {
      auto [d, r] = generate(s.m, gp, cfg.gen);
      auto fo_d = discriminate(d, s.m, dp_depth, sn_depth, false);
      auto fo_r = discriminate(r, s.m, dp_rgb, sn_rgb, false);
      auto ro_r = discriminate(Var::constant(s.rgb), s.m, dp_rgb, sn_rgb, false);
      Var adv = add(hinge_g_loss(fo_d), hinge_g_loss(fo_r));
      Var fm = feature_matching_loss(ro_r, fo_r);
      Var sl = add_scalar(scale(ssim(d, Var::constant(s.depth)), -1.0), 1.0);
      adv_acc = adv_acc.defined() ? add(adv_acc, adv) : adv;
      fm_acc = fm_acc.defined() ? add(fm_acc, fm) : fm;
      ssim_acc = ssim_acc.defined() ? add(ssim_acc, sl) : sl;
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    adv_acc = scale(adv_acc, inv);
    fm_acc = scale(fm_acc, inv);
    ssim_acc = scale(ssim_acc, inv);
    Var g_loss = add(add(scale(adv_acc, cfg.weights.w_adv), scale(fm_acc, cfg.weights.w_fm)),
                     scale(ssim_acc, cfg.weights.w_ssim));
    backward(g_loss);
    row.loss_g_adv = scalar_of(adv_acc);
    row.loss_fm = scalar_of(fm_acc);
    row.loss_ssim = scalar_of(ssim_acc);
    require_finite(row.loss_g_adv, "adversarial generator loss", step);
    require_finite(row.loss_fm, "feature matching loss", step);
    require_finite(row.loss_ssim, "structural similarity loss", step);
    adam_step(gp, ag, cfg.lr_g);

    report.rows.push_back(row);
  }
  return report;
}

}  // namespace depthgen
