#include "depthgen/generator.hpp"

#include <json.hpp>

#include <cmath>
#include <stdexcept>

namespace depthgen {

namespace {

// sigmoid(kGateInit) == 0.1: the fusion starts close to an identity
constexpr double kGateInit = -2.1972245773362196;

bool pow2(std::size_t v) { return v != 0 && (v & (v - 1)) == 0; }

std::size_t ilog2(std::size_t v) {
  std::size_t k = 0;
  while ((std::size_t{1} << k) < v) ++k;
  return k;
}

}  // namespace

std::size_t stage_out_channels(const StageConfig& sc) {
  return sc.embedding / (sc.patch * sc.patch);
}

std::size_t stage_heads(const StageConfig& sc) {
  return sc.embedding < 32 ? 1 : sc.embedding / 32;
}

std::size_t caf_patch_size(std::size_t h) { return h < 64 ? 1 : h / 32; }

void GeneratorConfig::validate() const {
  if (stages.empty()) throw std::invalid_argument("config: no stages");
  if (stages.back().resolution != output_resolution)
    throw std::invalid_argument("config: last stage " +
                                std::to_string(stages.back().resolution) +
                                " != output resolution " + std::to_string(output_resolution));
  if (fuse_enabled && stages.size() < 2)
    throw std::invalid_argument("config: fusion needs at least 2 stages");
  if (z_dim == 0 || num_labels == 0)
    throw std::invalid_argument("config: z_dim and num_labels must be positive");
  if (!pow2(output_resolution) || output_resolution < 4)
    throw std::invalid_argument("config: output resolution " +
                                std::to_string(output_resolution) + " not a power of two >= 4");
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const StageConfig& s = stages[i];
    const std::string at = "config stage " + std::to_string(i) + ": ";
    if (s.pair_count < 1) throw std::invalid_argument(at + "pair_count < 1");
    if (s.patch < 1 || s.resolution % s.patch != 0)
      throw std::invalid_argument(at + "patch " + std::to_string(s.patch) +
                                  " does not divide resolution " + std::to_string(s.resolution));
    const std::size_t grid = s.resolution / s.patch;
    if (s.window < 1 || grid % s.window != 0)
      throw std::invalid_argument(at + "window " + std::to_string(s.window) +
                                  " does not tile the " + std::to_string(grid) + " token grid");
    if (s.window > 1 && s.window % 2 != 0)
      throw std::invalid_argument(at + "window must be even to shift");
    if (s.embedding % (s.patch * s.patch) != 0)
      throw std::invalid_argument(at + "embedding " + std::to_string(s.embedding) +
                                  " not divisible by patch^2");
    if (s.embedding % stage_heads(s) != 0)
      throw std::invalid_argument(at + "embedding not divisible by head count");
    if (i + 1 < stages.size()) {
      if (stages[i + 1].resolution != 2 * s.resolution)
        throw std::invalid_argument(at + "resolutions must double");
      if (stages[i + 1].channels != stage_out_channels(s))
        throw std::invalid_argument(at + "output channels " +
                                    std::to_string(stage_out_channels(s)) +
                                    " != next stage channels " +
                                    std::to_string(stages[i + 1].channels));
    }
  }
}

GeneratorConfig default_config(std::size_t resolution) {
  if (resolution != 32 && resolution != 64 && resolution != 128 && resolution != 256)
    throw std::invalid_argument("default_config: unsupported resolution " +
                                std::to_string(resolution));
  const std::size_t patch_div = resolution == 256 ? 64 : 32;
  GeneratorConfig cfg;
  cfg.output_resolution = resolution;
  std::size_t channels = 256;
  for (std::size_t res = 8; res <= resolution; res *= 2) {
    StageConfig s;
    s.resolution = res;
    s.channels = channels;
    s.patch = res < patch_div ? 1 : res / patch_div;
    const std::size_t out = channels > 128 ? channels / 2 : 64;
    s.embedding = out * s.patch * s.patch;
    const std::size_t grid = res / s.patch;
    s.window = std::min(grid, res == 8 ? std::size_t{4} : std::size_t{8});
    s.pair_count = res <= 32 ? 1 : 2;
    cfg.stages.push_back(s);
    channels = out;
  }
  cfg.validate();
  return cfg;
}

namespace {

const char* ctn_stats_name(CtnStats s) {
  return s == CtnStats::joint ? "joint" : "per_token";
}

const char* vsrc_name(CafValueSource v) {
  return v == CafValueSource::self ? "self" : "other";
}

std::size_t need_uint(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw std::invalid_argument(std::string("config json: missing ") + key);
  const auto& v = j.at(key);
  if (!v.is_number_unsigned())
    throw std::invalid_argument(std::string("config json: ") + key +
                                " must be a nonnegative integer");
  return v.get<std::size_t>();
}

bool need_bool(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw std::invalid_argument(std::string("config json: missing ") + key);
  if (!j.at(key).is_boolean())
    throw std::invalid_argument(std::string("config json: ") + key + " must be a boolean");
  return j.at(key).get<bool>();
}

std::string need_str(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw std::invalid_argument(std::string("config json: missing ") + key);
  if (!j.at(key).is_string())
    throw std::invalid_argument(std::string("config json: ") + key + " must be a string");
  return j.at(key).get<std::string>();
}

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                    const char* what) {
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : allowed)
      if (item.key() == k) known = true;
    if (!known)
      throw std::invalid_argument(std::string("config json: unknown ") + what + " key '" +
                                  item.key() + "'");
  }
}

}  // namespace

std::string config_to_json(const GeneratorConfig& cfg) {
  nlohmann::json j;
  j["output_resolution"] = cfg.output_resolution;
  j["stages"] = nlohmann::json::array();
  for (const StageConfig& s : cfg.stages) {
    nlohmann::json js;
    js["resolution"] = s.resolution;
    js["channels"] = s.channels;
    js["embedding"] = s.embedding;
    js["patch_size"] = s.patch;
    js["window_size"] = s.window;
    js["pair_count"] = s.pair_count;
    j["stages"].push_back(js);
  }
  j["z_dim"] = cfg.z_dim;
  j["num_labels"] = cfg.num_labels;
  j["fuse_enabled"] = cfg.fuse_enabled;
  j["ctn_stats"] = ctn_stats_name(cfg.ctn_stats);
  j["caf_value_source"] = vsrc_name(cfg.caf_value_source);
  j["literal_eq1"] = cfg.literal_eq1;
  return j.dump(2);
}

GeneratorConfig config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("config json: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("config json: top level must be an object");
  reject_unknown(j,
                 {"output_resolution", "stages", "z_dim", "num_labels", "fuse_enabled",
                  "ctn_stats", "caf_value_source", "literal_eq1"},
                 "config");
  GeneratorConfig cfg;
  cfg.output_resolution = need_uint(j, "output_resolution");
  cfg.z_dim = need_uint(j, "z_dim");
  cfg.num_labels = need_uint(j, "num_labels");
  cfg.fuse_enabled = need_bool(j, "fuse_enabled");
  cfg.literal_eq1 = need_bool(j, "literal_eq1");
  const std::string stats = need_str(j, "ctn_stats");
  if (stats == "joint")
    cfg.ctn_stats = CtnStats::joint;
  else if (stats == "per_token")
    cfg.ctn_stats = CtnStats::per_token;
  else
    throw std::invalid_argument("config json: ctn_stats must be 'joint' or 'per_token'");
  const std::string vsrc = need_str(j, "caf_value_source");
  if (vsrc == "self")
    cfg.caf_value_source = CafValueSource::self;
  else if (vsrc == "other")
    cfg.caf_value_source = CafValueSource::other;
  else
    throw std::invalid_argument("config json: caf_value_source must be 'self' or 'other'");
  if (!j.contains("stages") || !j.at("stages").is_array())
    throw std::invalid_argument("config json: stages must be an array");
  for (const auto& js : j.at("stages")) {
    if (!js.is_object()) throw std::invalid_argument("config json: stage must be an object");
    reject_unknown(
        js, {"resolution", "channels", "embedding", "patch_size", "window_size", "pair_count"},
        "stage");
    StageConfig s;
    s.resolution = need_uint(js, "resolution");
    s.channels = need_uint(js, "channels");
    s.embedding = need_uint(js, "embedding");
    s.patch = need_uint(js, "patch_size");
    s.window = need_uint(js, "window_size");
    s.pair_count = need_uint(js, "pair_count");
    cfg.stages.push_back(s);
  }
  cfg.validate();
  return cfg;
}

namespace {

struct Builder {
  ParamStore& ps;
  Rng& rng;

  void weight(const std::string& name, const Shape& shape) {
    ps.add(name, init_trunc_normal(shape, 0.02, rng));
  }
  void zeros(const std::string& name, const Shape& shape) {
    ps.add(name, Tensor::zeros(shape));
  }
  void ones(const std::string& name, const Shape& shape) {
    ps.add(name, Tensor::full(shape, 1.0));
  }
  void linear(const std::string& p, std::size_t in, std::size_t out) {
    weight(p + ".w", {in, out});
    zeros(p + ".b", {out});
  }
  void conv(const std::string& p, std::size_t co, std::size_t ci, std::size_t k) {
    weight(p + ".w", {co, ci, k, k});
    zeros(p + ".b", {co});
  }
  void ctn(const std::string& p, std::size_t em, std::size_t hidden, std::size_t e) {
    weight(p + ".sw", {em, hidden});
    zeros(p + ".sb", {hidden});
    weight(p + ".gw", {hidden, e});
    ones(p + ".gb", {e});  // gamma starts at 1
    weight(p + ".bw", {hidden, e});
    zeros(p + ".bb", {e});
  }
  void msa(const std::string& p, std::size_t e, std::size_t w, bool zero_table) {
    for (const char* n : {"q", "k", "v", "o"}) {
      weight(p + "." + n + "w", {e, e});
      zeros(p + "." + n + "b", {e});
    }
    const std::size_t span = 2 * w - 1;
    const Shape table = {span * span, e < 32 ? 1 : e / 32};
    if (zero_table)
      zeros(p + ".bt", table);
    else
      weight(p + ".bt", table);
  }
  void attn_proj(const std::string& p, std::size_t e) {
    for (const char* n : {"q", "k", "v", "o"}) {
      weight(p + "." + n + "w", {e, e});
      zeros(p + "." + n + "b", {e});
    }
  }
  void spade(const std::string& p, std::size_t cout, std::size_t cin, std::size_t labels) {
    conv(p + ".p", cout, cin, 1);
    conv(p + ".s", 32, labels, 3);
    weight(p + ".gw", {cout, 32, 3, 3});
    zeros(p + ".gb", {cout});
    weight(p + ".bw", {cout, 32, 3, 3});
    zeros(p + ".bb", {cout});
  }
};

}  // namespace

ParamStore build_generator_params(const GeneratorConfig& cfg, std::uint64_t seed,
                                  bool zero_bias_tables) {
  cfg.validate();
  ParamStore ps;
  Rng rng(seed);
  Builder b{ps, rng};

  // encoder tower: one_hot channels down to 4x4
  const std::size_t depth = ilog2(cfg.output_resolution / 4);
  std::size_t ci = cfg.num_labels;
  for (std::size_t i = 0; i < depth; ++i) {
    const std::size_t co = std::min<std::size_t>(256, std::size_t{16} << i);
    b.conv("g.enc.c" + std::to_string(i), co, ci, 3);
    ci = co;
  }
  const std::size_t c0 = cfg.stages[0].channels;
  const std::size_t base = cfg.stages[0].resolution;
  b.linear("g.enc.fc1", ci * 16, cfg.z_dim);
  b.linear("g.enc.fc2", cfg.z_dim, c0 * base * base);
  b.conv("g.stem", c0, c0, 3);

  for (const char* branch : {"d", "r"}) {
    for (std::size_t i = 0; i < cfg.stages.size(); ++i) {
      const StageConfig& s = cfg.stages[i];
      const std::string sp =
          std::string("g.") + branch + ".s" + std::to_string(i) + ".";
      const std::size_t e = s.embedding, pp = s.patch * s.patch;
      b.linear(sp + "pe", s.channels * pp, e);
      b.linear(sp + "lt", cfg.num_labels * pp, e);
      for (std::size_t jj = 0; jj < s.pair_count; ++jj) {
        const std::string bp = sp + "p" + std::to_string(jj) + ".";
        for (int n = 0; n < 4; ++n) b.ctn(bp + "n" + std::to_string(n), e, e, e);
        b.msa(bp + "a0", e, s.window, zero_bias_tables);
        b.msa(bp + "a1", e, s.window, zero_bias_tables);
        for (int n = 0; n < 2; ++n) {
          const std::string mp = bp + "m" + std::to_string(n);
          b.weight(mp + ".w1", {e, 2 * e});
          b.zeros(mp + ".b1", {2 * e});
          b.weight(mp + ".w2", {2 * e, e});
          b.zeros(mp + ".b2", {e});
        }
      }
      b.spade(sp + "sp", stage_out_channels(s), s.channels, cfg.num_labels);
    }
  }

  if (cfg.fuse_enabled) {
    const std::size_t c = cfg.stages.back().channels;
    const std::size_t pc = caf_patch_size(cfg.stages.back().resolution);
    const std::size_t e = c * pc * pc;
    b.conv("caf.e", c, cfg.num_labels, 1);
    b.linear("caf.pd", e, e);
    b.linear("caf.pr", e, e);
    b.attn_proj("caf.d", e);
    b.attn_proj("caf.r", e);
    ps.add("caf.ad", Tensor({1}, {kGateInit}));
    ps.add("caf.ar", Tensor({1}, {kGateInit}));
  }

  const std::size_t c_out = stage_out_channels(cfg.stages.back());
  b.conv("head.d", 1, c_out, 1);
  b.conv("head.r", 3, c_out, 1);
  return ps;
}

namespace {

CtnParams ctn_params(const ParamStore& ps, const std::string& p) {
  return {ps.get(p + ".sw"), ps.get(p + ".sb"), ps.get(p + ".gw"),
          ps.get(p + ".gb"), ps.get(p + ".bw"), ps.get(p + ".bb")};
}

MsaParams msa_params(const ParamStore& ps, const std::string& p, std::size_t heads) {
  MsaParams m;
  m.heads = heads;
  m.q_w = ps.get(p + ".qw");
  m.q_b = ps.get(p + ".qb");
  m.k_w = ps.get(p + ".kw");
  m.k_b = ps.get(p + ".kb");
  m.v_w = ps.get(p + ".vw");
  m.v_b = ps.get(p + ".vb");
  m.o_w = ps.get(p + ".ow");
  m.o_b = ps.get(p + ".ob");
  m.bias_table = ps.get(p + ".bt");
  return m;
}

AttnProj attn_proj_params(const ParamStore& ps, const std::string& p) {
  AttnProj a;
  a.q_w = ps.get(p + ".qw");
  a.q_b = ps.get(p + ".qb");
  a.k_w = ps.get(p + ".kw");
  a.k_b = ps.get(p + ".kb");
  a.v_w = ps.get(p + ".vw");
  a.v_b = ps.get(p + ".vb");
  a.o_w = ps.get(p + ".ow");
  a.o_b = ps.get(p + ".ob");
  return a;
}

SpadeParams spade_params(const ParamStore& ps, const std::string& p) {
  return {ps.get(p + ".p.w"), ps.get(p + ".p.b"), ps.get(p + ".s.w"), ps.get(p + ".s.b"),
          ps.get(p + ".gw"),  ps.get(p + ".gb"),  ps.get(p + ".bw"),  ps.get(p + ".bb")};
}

}  // namespace

StageParams stage_params(const ParamStore& ps, const std::string& prefix,
                         const StageConfig& sc) {
  StageParams sp;
  sp.pe_w = ps.get(prefix + "pe.w");
  sp.pe_b = ps.get(prefix + "pe.b");
  sp.lt_w = ps.get(prefix + "lt.w");
  sp.lt_b = ps.get(prefix + "lt.b");
  const std::size_t heads = stage_heads(sc);
  for (std::size_t j = 0; j < sc.pair_count; ++j) {
    const std::string bp = prefix + "p" + std::to_string(j) + ".";
    StagePairParams pair;
    pair.n0 = ctn_params(ps, bp + "n0");
    pair.n1 = ctn_params(ps, bp + "n1");
    pair.n2 = ctn_params(ps, bp + "n2");
    pair.n3 = ctn_params(ps, bp + "n3");
    pair.a0 = msa_params(ps, bp + "a0", heads);
    pair.a1 = msa_params(ps, bp + "a1", heads);
    pair.m0 = {ps.get(bp + "m0.w1"), ps.get(bp + "m0.b1"), ps.get(bp + "m0.w2"),
               ps.get(bp + "m0.b2")};
    pair.m1 = {ps.get(bp + "m1.w1"), ps.get(bp + "m1.b1"), ps.get(bp + "m1.w2"),
               ps.get(bp + "m1.b2")};
    sp.pairs.push_back(pair);
  }
  sp.sp = spade_params(ps, prefix + "sp");
  return sp;
}

CafParams collect_caf_params(const ParamStore& ps, std::size_t h) {
  CafParams p;
  p.embed_w = ps.get("caf.e.w");
  p.embed_b = ps.get("caf.e.b");
  p.pe_d_w = ps.get("caf.pd.w");
  p.pe_d_b = ps.get("caf.pd.b");
  p.pe_r_w = ps.get("caf.pr.w");
  p.pe_r_b = ps.get("caf.pr.b");
  p.cross.d = attn_proj_params(ps, "caf.d");
  p.cross.r = attn_proj_params(ps, "caf.r");
  p.alpha_d = ps.get("caf.ad");
  p.alpha_r = ps.get("caf.ar");
  p.patch = caf_patch_size(h);
  return p;
}

Var encode_layout(const SemanticLayout& m, const ParamStore& ps,
                  const GeneratorConfig& cfg) {
  if (m.h != cfg.output_resolution || m.w != cfg.output_resolution)
    throw std::invalid_argument("encode_layout: layout " + std::to_string(m.h) + "x" +
                                std::to_string(m.w) + " != configured " +
                                std::to_string(cfg.output_resolution));
  if (m.num_labels != cfg.num_labels)
    throw std::invalid_argument("encode_layout: layout labels " +
                                std::to_string(m.num_labels) + " != configured " +
                                std::to_string(cfg.num_labels));
  Var x = one_hot(m);
  const std::size_t depth = ilog2(cfg.output_resolution / 4);
  for (std::size_t i = 0; i < depth; ++i) {
    const std::string p = "g.enc.c" + std::to_string(i);
    x = relu(conv2d(x, ps.get(p + ".w"), ps.get(p + ".b"), 2, 1));
  }
  Var flat = reshape(x, {1, x.numel()});
  Var z = add(matmul(flat, ps.get("g.enc.fc1.w")), ps.get("g.enc.fc1.b"));
  Var h = gelu(add(matmul(z, ps.get("g.enc.fc2.w")), ps.get("g.enc.fc2.b")));
  const std::size_t c0 = cfg.stages[0].channels;
  const std::size_t base = cfg.stages[0].resolution;
  Var grid = reshape(h, {c0, base, base});
  return conv_same(grid, ps.get("g.stem.w"), ps.get("g.stem.b"));
}

Var generator_stage(const Var& f, const SemanticLayout& m, const StageConfig& sc,
                    const StageParams& sp, CtnStats stats, bool literal_eq1,
                    bool final_stage) {
  if (f.shape().size() != 3 || f.shape()[0] != sc.channels ||
      f.shape()[1] != sc.resolution || f.shape()[2] != sc.resolution)
    throw std::invalid_argument("generator_stage: feature map " + shape_str(f.shape()) +
                                " does not match stage geometry [" +
                                std::to_string(sc.channels) + "," +
                                std::to_string(sc.resolution) + "," +
                                std::to_string(sc.resolution) + "]");
  const std::size_t grid = sc.resolution / sc.patch;
  TokenGrid x = patch_embed(f, sc.patch, sp.pe_w, sp.pe_b);
  TokenGrid mt = tokenize_layout(m, grid, grid, sc.patch, sp.lt_w, sp.lt_b);

  auto step = [&](const TokenGrid& in, const Var& out) {
    TokenGrid t;
    t.tokens = literal_eq1 ? out : add(in.tokens, out);
    t.grid_h = in.grid_h;
    t.grid_w = in.grid_w;
    return t;
  };
  for (const StagePairParams& pair : sp.pairs) {
    x = step(x, wmsa(ctn_forward(x, mt, pair.n0, stats), sc.window, false, pair.a0).tokens);
    x = step(x, mlp(ctn_forward(x, mt, pair.n1, stats), pair.m0.w1, pair.m0.b1, pair.m0.w2,
                    pair.m0.b2)
                   .tokens);
    x = step(x, wmsa(ctn_forward(x, mt, pair.n2, stats), sc.window, true, pair.a1).tokens);
    x = step(x, mlp(ctn_forward(x, mt, pair.n3, stats), pair.m1.w1, pair.m1.b1, pair.m1.w2,
                    pair.m1.b2)
                   .tokens);
  }

  Var rec = pixel_shuffle(token_to_map(x), sc.patch);
  Var out = add(rec, spade_shortcut(f, m, sp.sp));
  return final_stage ? out : upsample_nearest(out);
}

std::pair<Var, Var> generate(const SemanticLayout& m, const ParamStore& ps,
                             const GeneratorConfig& cfg) {
  cfg.validate();
  Var f0 = encode_layout(m, ps, cfg);
  Var fd = f0, fr = f0;
  const std::size_t last = cfg.stages.size() - 1;
  for (std::size_t i = 0; i < cfg.stages.size(); ++i) {
    if (i == last && cfg.fuse_enabled) {
      CafParams cp = collect_caf_params(ps, cfg.stages[i].resolution);
      auto fused = caf_fuse(fd, fr, m, cp, cfg.caf_value_source);
      fd = fused.first;
      fr = fused.second;
    }
    const std::string si = ".s" + std::to_string(i) + ".";
    fd = generator_stage(fd, m, cfg.stages[i], stage_params(ps, "g.d" + si, cfg.stages[i]),
                         cfg.ctn_stats, cfg.literal_eq1, i == last);
    fr = generator_stage(fr, m, cfg.stages[i], stage_params(ps, "g.r" + si, cfg.stages[i]),
                         cfg.ctn_stats, cfg.literal_eq1, i == last);
  }
  Var depth = vtanh(conv2d(fd, ps.get("head.d.w"), ps.get("head.d.b"), 1, 0));
  Var rgb = vtanh(conv2d(fr, ps.get("head.r.w"), ps.get("head.r.b"), 1, 0));
  return {depth, rgb};
}

}  // namespace depthgen
