#include "depthgen/cli.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "depthgen/adversarial.hpp"
#include "depthgen/checks.hpp"
#include "depthgen/dataprep.hpp"
#include "depthgen/generator.hpp"
#include "depthgen/image_io.hpp"
#include "depthgen/metrics.hpp"
#include "depthgen/turbo.hpp"

namespace depthgen {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

/// Config/argument problems found before any computation starts; they
/// map to exit code 2 instead of the runtime failure code 1.
struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Removes everything registered with track() unless disarm() was
/// called first, so a failing subcommand never leaves partial outputs.
class OutputGuard {
 public:
  void track(const fs::path& p) { tracked_.push_back(p); }
  void disarm() { armed_ = false; }
  ~OutputGuard() {
    if (!armed_) return;
    for (const fs::path& p : tracked_) {
      std::error_code ec;
      fs::remove_all(p, ec);  // best effort; nothing to do about failures here
    }
  }

 private:
  std::vector<fs::path> tracked_;
  bool armed_ = true;
};

/// The JSON run config: generator architecture plus training knobs.
/// Every field except the generator has a default; unknown keys are
/// rejected so typos cannot silently fall back to defaults.
struct RunSpec {
  GeneratorConfig gen;
  LossWeights weights;
  std::uint64_t seed = 1;
  std::size_t steps = 100;
  std::size_t batch = 2;
  double lr_g = 1e-4;
  double lr_d = 4e-4;
};

void require_keys(const json& j, const char* where, const std::vector<std::string>& allowed) {
  for (const auto& [key, val] : j.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw SchemaError(std::string("config: unknown key \"") + key + "\" in " + where);
}

std::uint64_t uint_field(const json& j, const char* name) {
  if (!j.at(name).is_number_unsigned())
    throw SchemaError(std::string("config: ") + name + " must be a non-negative integer");
  return j.at(name).get<std::uint64_t>();
}

double positive_field(const json& j, const char* name) {
  if (!j.at(name).is_number())
    throw SchemaError(std::string("config: ") + name + " must be a number");
  const double v = j.at(name).get<double>();
  if (!(v > 0.0)) throw SchemaError(std::string("config: ") + name + " must be positive");
  return v;
}

RunSpec load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("config: cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw SchemaError("config: " + path.string() + " is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw SchemaError("config: top level must be a JSON object");
  require_keys(j, "top level",
               {"generator", "weights", "seed", "steps", "batch", "lr_g", "lr_d"});
  if (!j.contains("generator"))
    throw SchemaError("config: missing required key \"generator\"");

  RunSpec spec;
  try {
    spec.gen = config_from_json(j.at("generator").dump());
  } catch (const std::exception& e) {
    throw SchemaError(std::string("config: generator: ") + e.what());
  }
  if (j.contains("weights")) {
    const json& w = j.at("weights");
    if (!w.is_object()) throw SchemaError("config: weights must be an object");
    require_keys(w, "weights", {"w_ssim", "w_fm", "w_adv"});
    if (w.contains("w_ssim")) spec.weights.w_ssim = positive_field(w, "w_ssim");
    if (w.contains("w_fm")) spec.weights.w_fm = positive_field(w, "w_fm");
    if (w.contains("w_adv")) spec.weights.w_adv = positive_field(w, "w_adv");
  }
  if (j.contains("seed")) spec.seed = uint_field(j, "seed");
  if (j.contains("steps")) {
    spec.steps = static_cast<std::size_t>(uint_field(j, "steps"));
    if (spec.steps > 500) throw SchemaError("config: steps must be <= 500");
  }
  if (j.contains("batch")) {
    spec.batch = static_cast<std::size_t>(uint_field(j, "batch"));
    if (spec.batch == 0) throw SchemaError("config: batch must be >= 1");
  }
  if (j.contains("lr_g")) spec.lr_g = positive_field(j, "lr_g");
  if (j.contains("lr_d")) spec.lr_d = positive_field(j, "lr_d");
  return spec;
}

/// Integer label grid from a PGM file; the declared palette size must
/// cover every stored label by the format's own contract.
SemanticLayout layout_from_pgm(const fs::path& path) {
  unsigned maxval = 0;
  const Tensor t = read_pgm(path, &maxval);
  SemanticLayout m;
  m.h = t.shape()[1];
  m.w = t.shape()[2];
  m.num_labels = maxval + 1;
  m.labels.resize(m.h * m.w);
  for (std::size_t i = 0; i < m.labels.size(); ++i)
    m.labels[i] = static_cast<int>(std::nearbyint(t[i]));
  return m;
}

/// [-1, 1] generator output to the 0..255 range shared with the
/// prepared training data.
Tensor remap_unit(const Tensor& t) {
  Tensor out = t;
  for (std::size_t i = 0; i < out.numel(); ++i) out.data()[i] = (out[i] + 1.0) * 127.5;
  return out;
}

std::pair<double, double> value_range(const Tensor& t) {
  double lo = t[0], hi = t[0];
  for (std::size_t i = 0; i < t.numel(); ++i) {
    lo = std::min(lo, t[i]);
    hi = std::max(hi, t[i]);
  }
  return {lo, hi};
}

/// Turbo-colorized copy over the given range, quantized to 0..255. A
/// constant map widens its degenerate range symmetrically instead of
/// failing, so fresh untrained generators still produce an image.
Tensor colorized_255(const Tensor& depth, double lo, double hi) {
  if (!(lo < hi)) {
    lo -= 0.5;
    hi += 0.5;
  }
  Tensor rgb01 = turbo_colorize(depth, lo, hi);
  for (std::size_t i = 0; i < rgb01.numel(); ++i) rgb01.data()[i] *= 255.0;
  return rgb01;
}

// ---------------------------------------------------------------------------
// subcommands

struct PrepareArgs {
  std::string pano_dir, out_dir;
  std::size_t size = 128;
};

int run_prepare(const PrepareArgs& a) {
  const fs::path in_dir = a.pano_dir;
  if (!fs::is_directory(in_dir)) throw std::runtime_error("prepare-data: no such directory: " + in_dir.string());

  // a scene is the triplet <id>.rgb.ppm / <id>.sem.pgm / <id>.depth.pfm
  std::vector<std::string> ids;
  for (const auto& entry : fs::directory_iterator(in_dir)) {
    const std::string name = entry.path().filename().string();
    const std::string tag = ".rgb.ppm";
    if (name.size() > tag.size() && name.compare(name.size() - tag.size(), tag.size(), tag) == 0)
      ids.push_back(name.substr(0, name.size() - tag.size()));
  }
  std::sort(ids.begin(), ids.end());
  if (ids.empty()) throw std::runtime_error("prepare-data: no *.rgb.ppm panoramas in " + in_dir.string());

  OutputGuard guard;
  fs::create_directories(a.out_dir);
  std::size_t num_labels = 0;
  for (const std::string& id : ids) {
    SceneTriplet scene;
    {
      const Tensor rgb = read_ppm(in_dir / (id + ".rgb.ppm"));
      scene.rgb = {PanoKind::rgb, rgb.shape()[1], rgb.shape()[2], 0, rgb};
    }
    {
      unsigned maxval = 0;
      const Tensor sem = read_pgm(in_dir / (id + ".sem.pgm"), &maxval);
      scene.labels = {PanoKind::labels, sem.shape()[1], sem.shape()[2], maxval + 1u, sem};
    }
    {
      const Tensor d = read_pfm(in_dir / (id + ".depth.pfm"));
      scene.depth = {PanoKind::depth, d.shape()[1], d.shape()[2], 0, d};
    }
    if (num_labels == 0) num_labels = scene.labels.num_labels;
    if (scene.labels.num_labels != num_labels)
      throw std::runtime_error("prepare-data: scene " + id + " declares " +
                               std::to_string(scene.labels.num_labels) +
                               " labels, earlier scenes " + std::to_string(num_labels));
    guard.track(fs::path(a.out_dir) / id);
    prepare_scene(scene, a.size, a.out_dir, id);
  }

  // label palette: ids spread across the turbo ramp for quick visual checks
  const fs::path palette = fs::path(a.out_dir) / "labels.csv";
  guard.track(palette);
  {
    std::ofstream out(palette, std::ios::binary);
    if (!out) throw std::runtime_error("prepare-data: cannot write " + palette.string());
    out << "id,name,r,g,b\n";
    for (std::size_t k = 0; k < num_labels; ++k) {
      const std::size_t idx =
          num_labels == 1 ? 0 : k * 255 / (num_labels - 1);
      char buf[96];
      std::snprintf(buf, sizeof buf, "%zu,label_%zu,%d,%d,%d\n", k, k,
                    static_cast<int>(std::nearbyint(kTurboLut[idx][0] * 255)),
                    static_cast<int>(std::nearbyint(kTurboLut[idx][1] * 255)),
                    static_cast<int>(std::nearbyint(kTurboLut[idx][2] * 255)));
      out << buf;
    }
    if (!out.flush()) throw std::runtime_error("prepare-data: short write to " + palette.string());
  }
  guard.disarm();
  std::printf("prepare-data: %zu scene(s), %zu labels -> %s\n", ids.size(), num_labels,
              a.out_dir.c_str());
  return 0;
}

struct ForwardArgs {
  std::string config, checkpoint, layout, out_dir;
  std::uint64_t seed = 0;
  bool seed_given = false;
};

int run_forward(const ForwardArgs& a) {
  const RunSpec spec = load_run_config(a.config);
  const std::uint64_t seed = a.seed_given ? a.seed : spec.seed;

  SemanticLayout m = layout_from_pgm(a.layout);
  if (m.h != spec.gen.output_resolution || m.w != spec.gen.output_resolution)
    throw std::runtime_error("forward: layout is " + std::to_string(m.h) + "x" +
                             std::to_string(m.w) + " but the generator expects " +
                             std::to_string(spec.gen.output_resolution));
  for (int v : m.labels)
    if (v >= static_cast<int>(spec.gen.num_labels))
      throw std::runtime_error("forward: layout label " + std::to_string(v) +
                               " outside the generator's " +
                               std::to_string(spec.gen.num_labels) + " labels");
  m.num_labels = spec.gen.num_labels;

  ParamStore ps = build_generator_params(spec.gen, seed);
  if (!a.checkpoint.empty()) ps.load(a.checkpoint);

  const auto [d_raw, r_raw] = generate(m, ps, spec.gen);
  const Tensor depth = remap_unit(d_raw.val());
  const Tensor rgb = remap_unit(r_raw.val());

  OutputGuard guard;
  fs::create_directories(a.out_dir);
  const fs::path dp = fs::path(a.out_dir) / "depth.pfm";
  const fs::path rp = fs::path(a.out_dir) / "rgb.ppm";
  const fs::path tp = fs::path(a.out_dir) / "depth_turbo.ppm";
  guard.track(dp);
  guard.track(rp);
  guard.track(tp);
  write_pfm(dp, depth);
  write_ppm(rp, rgb);
  const auto [lo, hi] = value_range(depth);
  write_ppm(tp, colorized_255(depth, lo, hi));
  guard.disarm();
  std::printf("forward: wrote depth.pfm, rgb.ppm, depth_turbo.ppm -> %s\n", a.out_dir.c_str());
  return 0;
}

struct EvaluateArgs {
  std::string pred_dir, gt_dir, out_csv;
  bool align = false;
};

int run_evaluate(const EvaluateArgs& a) {
  const fs::path gt_dir = a.gt_dir, pred_dir = a.pred_dir;
  if (!fs::is_directory(gt_dir)) throw std::runtime_error("evaluate: no such directory: " + gt_dir.string());
  if (!fs::is_directory(pred_dir)) throw std::runtime_error("evaluate: no such directory: " + pred_dir.string());

  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(gt_dir))
    if (entry.path().extension() == ".pfm") names.push_back(entry.path().filename().string());
  std::sort(names.begin(), names.end());
  if (names.empty()) throw std::runtime_error("evaluate: no *.pfm maps in " + gt_dir.string());

  std::vector<MetricsReport> reports;
  std::string csv = "image,mae,abs_rel,sq_rel,rmse,rmse_log,log10,delta1,delta2,delta3\n";
  auto row = [](const std::string& name, const MetricsReport& r) {
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", name.c_str(),
                  r.mae, r.abs_rel, r.sq_rel, r.rmse, r.rmse_log, r.log10_err, r.delta1,
                  r.delta2, r.delta3);
    return std::string(buf);
  };
  for (const std::string& name : names) {
    const fs::path pp = pred_dir / name;
    if (!fs::exists(pp)) throw std::runtime_error("evaluate: missing prediction " + pp.string());
    const Tensor pred = read_pfm(pp);
    const Tensor gt = read_pfm(gt_dir / name);
    const MetricsReport r = depth_metrics(pred, gt, a.align);
    reports.push_back(r);
    csv += row(name, r);
  }
  csv += row("mean", mean_report(reports));

  OutputGuard guard;
  guard.track(a.out_csv);
  {
    std::ofstream out(a.out_csv, std::ios::binary);
    if (!out) throw std::runtime_error("evaluate: cannot write " + a.out_csv);
    out << csv;
    if (!out.flush()) throw std::runtime_error("evaluate: short write to " + a.out_csv);
  }
  guard.disarm();
  std::printf("evaluate: %zu map(s) -> %s\n", names.size(), a.out_csv.c_str());
  return 0;
}

int run_gradcheck(const std::string& module, std::uint64_t seed) {
  const std::vector<CheckResult> results = run_gradchecks(module, seed);
  bool all_ok = true;
  for (const CheckResult& r : results) {
    std::printf("%-20s max rel err %.3e  (threshold %.0e)  %s  [%.2fs]\n", r.scene.c_str(),
                r.max_rel_err, r.threshold, r.pass() ? "ok" : "FAIL", r.seconds);
    all_ok = all_ok && r.pass();
  }
  if (!all_ok) {
    std::fprintf(stderr, "gradcheck: at least one scene exceeded its threshold\n");
    return 1;
  }
  std::printf("gradcheck: %zu scene(s) ok\n", results.size());
  return 0;
}

struct TrainSmokeArgs {
  std::string config, report;
  std::size_t steps = 0;
  std::uint64_t seed = 0;
  bool seed_given = false;
};

int run_train_smoke(const TrainSmokeArgs& a) {
  const RunSpec spec = load_run_config(a.config);
  TrainConfig tc;
  tc.gen = spec.gen;
  tc.steps = a.steps;
  tc.batch = spec.batch;
  tc.seed = a.seed_given ? a.seed : spec.seed;
  tc.lr_g = spec.lr_g;
  tc.lr_d = spec.lr_d;
  tc.weights = spec.weights;

  const TrainReport report = train_smoke(tc);

  OutputGuard guard;
  guard.track(a.report);
  {
    std::ofstream out(a.report, std::ios::binary);
    if (!out) throw std::runtime_error("train-smoke: cannot write " + a.report);
    out << report.to_csv();
    if (!out.flush()) throw std::runtime_error("train-smoke: short write to " + a.report);
  }
  guard.disarm();
  std::printf("train-smoke: %zu step(s) -> %s\n", report.rows.size(), a.report.c_str());
  return 0;
}

struct ColorizeArgs {
  std::string pfm, out;
  double lo = 0.0, hi = 0.0;
  bool lo_given = false, hi_given = false;
};

int run_colorize(const ColorizeArgs& a) {
  const Tensor depth = read_pfm(a.pfm);
  auto [lo, hi] = value_range(depth);
  if (a.lo_given) lo = a.lo;
  if (a.hi_given) hi = a.hi;
  OutputGuard guard;
  guard.track(a.out);
  write_ppm(a.out, colorized_255(depth, lo, hi));
  guard.disarm();
  std::printf("colorize: %s -> %s\n", a.pfm.c_str(), a.out.c_str());
  return 0;
}

/// DEPTHGEN_THREADS caps worker parallelism; every subcommand currently
/// runs single-threaded, which satisfies any cap, but a malformed value
/// is still rejected up front like any other argument error.
void validate_thread_env() {
  const char* env = std::getenv("DEPTHGEN_THREADS");
  if (env == nullptr) return;
  const std::string s = env;
  if (s.empty() || !std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); }))
    throw SchemaError("DEPTHGEN_THREADS must be a non-negative integer (0 = auto), got \"" + s + "\"");
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"semantic-layout depth generator"};
  app.require_subcommand(1);

  PrepareArgs prep;
  CLI::App* prep_cmd = app.add_subcommand(
      "prepare-data", "project equirectangular scenes to cubemap training faces");
  prep_cmd->add_option("--pano-dir", prep.pano_dir, "directory of <id>.rgb.ppm/.sem.pgm/.depth.pfm panoramas")
      ->required();
  prep_cmd->add_option("--out", prep.out_dir, "output dataset directory")->required();
  prep_cmd->add_option("--size", prep.size, "cubemap face side in pixels")
      ->check(CLI::Range(static_cast<std::size_t>(2), static_cast<std::size_t>(4096)));

  ForwardArgs fwd;
  CLI::App* fwd_cmd =
      app.add_subcommand("forward", "generate depth and color for one label layout");
  fwd_cmd->add_option("--config", fwd.config, "run config JSON")->required();
  fwd_cmd->add_option("--checkpoint", fwd.checkpoint, "saved parameter store (default: fresh seeded weights)");
  fwd_cmd->add_option("--layout", fwd.layout, "label layout PGM")->required();
  fwd_cmd->add_option("--out-dir", fwd.out_dir, "output directory")->required();
  CLI::Option* fwd_seed = fwd_cmd->add_option("--seed", fwd.seed, "overrides the config seed");

  EvaluateArgs ev;
  CLI::App* ev_cmd = app.add_subcommand("evaluate", "depth metrics over matching PFM maps");
  ev_cmd->add_option("--pred-dir", ev.pred_dir, "predicted depth maps")->required();
  ev_cmd->add_option("--gt-dir", ev.gt_dir, "ground-truth depth maps")->required();
  ev_cmd->add_flag("--align", ev.align, "mean-ratio scale alignment before scoring");
  ev_cmd->add_option("--out", ev.out_csv, "output CSV path")->required();

  std::string gc_module = "all";
  std::uint64_t gc_seed = 0;
  CLI::App* gc_cmd = app.add_subcommand("gradcheck", "finite-difference gradient audit");
  gc_cmd->add_option("--module", gc_module, "scene selection")
      ->check(CLI::IsMember({"all", "ctn", "wmsa", "caf", "stage", "full"}));
  gc_cmd->add_option("--seed", gc_seed, "randomizes every scene's draws");

  TrainSmokeArgs ts;
  CLI::App* ts_cmd = app.add_subcommand("train-smoke", "short adversarial training liveness run");
  ts_cmd->add_option("--config", ts.config, "run config JSON")->required();
  ts_cmd->add_option("--steps", ts.steps, "training steps")
      ->required()
      ->check(CLI::Range(static_cast<std::size_t>(0), static_cast<std::size_t>(500)));
  ts_cmd->add_option("--report", ts.report, "per-step loss CSV path")->required();
  CLI::Option* ts_seed = ts_cmd->add_option("--seed", ts.seed, "overrides the config seed");

  ColorizeArgs col;
  CLI::App* col_cmd = app.add_subcommand("colorize", "turbo-colormap a PFM depth map to PPM");
  col_cmd->add_option("--pfm", col.pfm, "input depth map")->required();
  col_cmd->add_option("--out", col.out, "output PPM path")->required();
  CLI::Option* col_lo = col_cmd->add_option("--min", col.lo, "range low end (default: data min)");
  CLI::Option* col_hi = col_cmd->add_option("--max", col.hi, "range high end (default: data max)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints help or the error message
    return code == 0 ? 0 : 2;
  }

  try {
    validate_thread_env();
    if (app.got_subcommand(prep_cmd)) return run_prepare(prep);
    if (app.got_subcommand(fwd_cmd)) {
      fwd.seed_given = fwd_seed->count() > 0;
      return run_forward(fwd);
    }
    if (app.got_subcommand(ev_cmd)) return run_evaluate(ev);
    if (app.got_subcommand(gc_cmd)) return run_gradcheck(gc_module, gc_seed);
    if (app.got_subcommand(ts_cmd)) {
      ts.seed_given = ts_seed->count() > 0;
      return run_train_smoke(ts);
    }
    if (app.got_subcommand(col_cmd)) {
      col.lo_given = col_lo->count() > 0;
      col.hi_given = col_hi->count() > 0;
      return run_colorize(col);
    }
    std::fprintf(stderr, "error: no subcommand\n");
    return 2;
  } catch (const SchemaError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

}  // namespace depthgen
