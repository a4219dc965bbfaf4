#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "depthgen/cli.hpp"
#include "depthgen/dataprep.hpp"
#include "depthgen/generator.hpp"
#include "depthgen/image_io.hpp"
#include "depthgen/turbo.hpp"

using namespace depthgen;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Drive the real entry point with a forged argv.
int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "depthgen");
  std::vector<char*> argv;
  argv.reserve(args.size());
  for (std::string& a : args) argv.push_back(a.data());
  return cli_main(static_cast<int>(argv.size()), argv.data());
}

fs::path tmp_dir(const std::string& leaf) {
  const fs::path d = fs::temp_directory_path() / "depthgen_cli_test" / leaf;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spew(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  REQUIRE(out.good());
  out << text;
}

/// Two-stage 8x8 generator, small enough for sub-second forwards.
GeneratorConfig tiny_gen() {
  GeneratorConfig g;
  g.output_resolution = 8;
  g.stages = {{4, 4, 4, 1, 2, 1}, {8, 4, 4, 1, 2, 1}};
  g.z_dim = 4;
  g.num_labels = 3;
  return g;
}

/// 16x16 variant for the adversarial path: the patch discriminator
/// refuses anything smaller.
GeneratorConfig smoke_gen() {
  GeneratorConfig g;
  g.output_resolution = 16;
  g.stages = {{8, 8, 8, 1, 4, 1}, {16, 8, 8, 1, 4, 1}};
  g.z_dim = 8;
  g.num_labels = 4;
  return g;
}

/// Run-config file wrapping a generator section.
fs::path write_run_config(const fs::path& dir, const GeneratorConfig& g,
                          const json& extra = json::object()) {
  json j = extra;
  j["generator"] = json::parse(config_to_json(g));
  const fs::path p = dir / "run.json";
  spew(p, j.dump(2));
  return p;
}

/// Label grid as a stored PGM; values are the raw label ids.
fs::path write_layout(const fs::path& p, std::size_t n, unsigned maxval) {
  Tensor t({1, n, n});
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t x = 0; x < n; ++x)
      t.data()[y * n + x] = static_cast<double>((y + x) % (maxval + 1));
  write_pgm(p, t, maxval);
  return p;
}

/// Equirectangular triplet with constant depth and a simple label banding.
void write_pano_scene(const fs::path& dir, const std::string& id, unsigned sem_maxval) {
  const std::size_t h = 8, w = 16;
  Tensor rgb({3, h, w});
  for (std::size_t i = 0; i < rgb.numel(); ++i)
    rgb.data()[i] = static_cast<double>((i * 7) % 256);
  write_ppm(dir / (id + ".rgb.ppm"), rgb);

  Tensor sem({1, h, w});
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      sem.data()[y * w + x] = static_cast<double>(y % (sem_maxval + 1));
  write_pgm(dir / (id + ".sem.pgm"), sem, sem_maxval);

  Tensor depth({1, h, w});
  for (std::size_t i = 0; i < depth.numel(); ++i) depth.data()[i] = 2.0;
  write_pfm(dir / (id + ".depth.pfm"), depth);
}

}  // namespace

TEST_CASE("cli: argument and schema violations exit 2 before any work") {
  const fs::path dir = tmp_dir("schema");

  CHECK(run_cli({"frobnicate"}) == 2);
  CHECK(run_cli({"gradcheck", "--module", "bogus"}) == 2);
  CHECK(run_cli({"forward", "--layout", (dir / "x.pgm").string()}) == 2);

  // steps are range-limited both on the command line and in the file
  const fs::path cfg = write_run_config(dir, tiny_gen());
  const fs::path report = dir / "report.csv";
  CHECK(run_cli({"train-smoke", "--config", cfg.string(), "--steps", "501", "--report",
                 report.string()}) == 2);
  const fs::path cfg_steps = dir / "steps.json";
  spew(cfg_steps, json{{"generator", json::parse(config_to_json(tiny_gen()))}, {"steps", 501}}.dump());
  CHECK(run_cli({"train-smoke", "--config", cfg_steps.string(), "--steps", "1", "--report",
                 report.string()}) == 2);
  CHECK_FALSE(fs::exists(report));

  // unknown keys at either level, and malformed documents
  const fs::path cfg_bad = dir / "bad.json";
  spew(cfg_bad, "{\"generator\": {}, \"generatr\": 1}");
  CHECK(run_cli({"train-smoke", "--config", cfg_bad.string(), "--steps", "1", "--report",
                 report.string()}) == 2);
  json with_extra = json::parse(config_to_json(tiny_gen()));
  with_extra["stages"][0]["windw_size"] = 2;
  spew(cfg_bad, json{{"generator", with_extra}}.dump());
  CHECK(run_cli({"train-smoke", "--config", cfg_bad.string(), "--steps", "1", "--report",
                 report.string()}) == 2);
  spew(cfg_bad, "{\"generator\": ");
  CHECK(run_cli({"train-smoke", "--config", cfg_bad.string(), "--steps", "1", "--report",
                 report.string()}) == 2);
  CHECK_FALSE(fs::exists(report));

  // the parallelism cap must be a plain number
  setenv("DEPTHGEN_THREADS", "lots", 1);
  CHECK(run_cli({"gradcheck", "--module", "ctn"}) == 2);
  setenv("DEPTHGEN_THREADS", "4", 1);
  CHECK(run_cli({"gradcheck", "--module", "ctn"}) == 0);
  unsetenv("DEPTHGEN_THREADS");
}

TEST_CASE("cli: forward is deterministic, honors checkpoints, validates the layout") {
  const fs::path dir = tmp_dir("forward");
  const fs::path cfg = write_run_config(dir, tiny_gen(), {{"seed", 1}});
  const fs::path layout = write_layout(dir / "layout.pgm", 8, 2);

  REQUIRE(run_cli({"forward", "--config", cfg.string(), "--layout", layout.string(),
                   "--out-dir", (dir / "a").string()}) == 0);
  REQUIRE(run_cli({"forward", "--config", cfg.string(), "--layout", layout.string(),
                   "--out-dir", (dir / "b").string()}) == 0);
  for (const char* name : {"depth.pfm", "rgb.ppm", "depth_turbo.ppm"}) {
    CHECK(slurp(dir / "a" / name) == slurp(dir / "b" / name));
  }

  // a checkpoint fully replaces the seed-built parameters
  const fs::path ckpt = dir / "params.bin";
  build_generator_params(tiny_gen(), 7).save(ckpt);
  REQUIRE(run_cli({"forward", "--config", cfg.string(), "--layout", layout.string(),
                   "--checkpoint", ckpt.string(), "--out-dir", (dir / "c").string()}) == 0);
  REQUIRE(run_cli({"forward", "--config", cfg.string(), "--layout", layout.string(), "--seed",
                   "7", "--out-dir", (dir / "d").string()}) == 0);
  CHECK(slurp(dir / "c" / "depth.pfm") == slurp(dir / "d" / "depth.pfm"));
  CHECK(slurp(dir / "c" / "depth.pfm") != slurp(dir / "a" / "depth.pfm"));

  // wrong extent and out-of-palette labels are runtime failures
  const fs::path small = write_layout(dir / "small.pgm", 4, 2);
  CHECK(run_cli({"forward", "--config", cfg.string(), "--layout", small.string(), "--out-dir",
                 (dir / "e").string()}) == 1);
  CHECK_FALSE(fs::exists(dir / "e"));
  const fs::path wide = write_layout(dir / "wide.pgm", 8, 3);  // labels reach 3, palette has 3
  CHECK(run_cli({"forward", "--config", cfg.string(), "--layout", wide.string(), "--out-dir",
                 (dir / "f").string()}) == 1);
}

TEST_CASE("cli: evaluate sorts rows by filename and is exact on self-comparison") {
  const fs::path dir = tmp_dir("evaluate");
  const fs::path maps = dir / "maps";
  fs::create_directories(maps);
  Tensor d({1, 2, 2});
  d.data()[0] = 1.0, d.data()[1] = 2.0, d.data()[2] = 4.0, d.data()[3] = 2.0;
  write_pfm(maps / "b.pfm", d);
  for (std::size_t i = 0; i < d.numel(); ++i) d.data()[i] += 1.0;
  write_pfm(maps / "a.pfm", d);

  const fs::path csv = dir / "out.csv";
  REQUIRE(run_cli({"evaluate", "--pred-dir", maps.string(), "--gt-dir", maps.string(), "--out",
                   csv.string()}) == 0);
  CHECK(slurp(csv) ==
        "image,mae,abs_rel,sq_rel,rmse,rmse_log,log10,delta1,delta2,delta3\n"
        "a.pfm,0,0,0,0,0,0,1,1,1\n"
        "b.pfm,0,0,0,0,0,0,1,1,1\n"
        "mean,0,0,0,0,0,0,1,1,1\n");

  // a doubled prediction is exact again under mean alignment
  const fs::path pred = dir / "pred";
  fs::create_directories(pred);
  for (const char* name : {"a.pfm", "b.pfm"}) {
    Tensor twice = read_pfm(maps / name);
    for (std::size_t i = 0; i < twice.numel(); ++i) twice.data()[i] *= 2.0;
    write_pfm(pred / name, twice);
  }
  const fs::path csv_plain = dir / "plain.csv";
  const fs::path csv_aligned = dir / "aligned.csv";
  REQUIRE(run_cli({"evaluate", "--pred-dir", pred.string(), "--gt-dir", maps.string(), "--out",
                   csv_plain.string()}) == 0);
  REQUIRE(run_cli({"evaluate", "--pred-dir", pred.string(), "--gt-dir", maps.string(),
                   "--align", "--out", csv_aligned.string()}) == 0);
  CHECK(slurp(csv_aligned) == slurp(csv));
  CHECK(slurp(csv_plain) != slurp(csv));

  // a missing prediction aborts before the report is written
  fs::remove(pred / "b.pfm");
  const fs::path csv_missing = dir / "missing.csv";
  CHECK(run_cli({"evaluate", "--pred-dir", pred.string(), "--gt-dir", maps.string(), "--out",
                 csv_missing.string()}) == 1);
  CHECK_FALSE(fs::exists(csv_missing));
}

TEST_CASE("cli: prepare-data writes per-face sets and removes partial output on failure") {
  const fs::path dir = tmp_dir("prepare");
  const fs::path panos = dir / "panos";
  fs::create_directories(panos);
  write_pano_scene(panos, "room0", 2);

  const fs::path out = dir / "out";
  REQUIRE(run_cli({"prepare-data", "--pano-dir", panos.string(), "--out", out.string(),
                   "--size", "4"}) == 0);
  for (const char* face : {"front", "right", "back", "left"}) {
    CHECK(fs::exists(out / "room0" / (std::string(face) + ".rgb.ppm")));
    CHECK(fs::exists(out / "room0" / (std::string(face) + ".sem.pgm")));
    CHECK(fs::exists(out / "room0" / (std::string(face) + ".depth.pfm")));
  }
  const std::string palette = slurp(out / "labels.csv");
  CHECK(palette.substr(0, palette.find('\n')) == "id,name,r,g,b");
  CHECK(palette.find("0,label_0,") != std::string::npos);
  CHECK(palette.find("2,label_2,") != std::string::npos);

  // bit-identical on a rerun
  const fs::path out2 = dir / "out2";
  REQUIRE(run_cli({"prepare-data", "--pano-dir", panos.string(), "--out", out2.string(),
                   "--size", "4"}) == 0);
  CHECK(slurp(out / "labels.csv") == slurp(out2 / "labels.csv"));
  CHECK(slurp(out / "room0" / "front.depth.pfm") == slurp(out2 / "room0" / "front.depth.pfm"));

  // a palette mismatch in the second scene rolls back the first one's output
  write_pano_scene(panos, "room1", 3);
  const fs::path out3 = dir / "out3";
  CHECK(run_cli({"prepare-data", "--pano-dir", panos.string(), "--out", out3.string(),
                 "--size", "4"}) == 1);
  CHECK_FALSE(fs::exists(out3 / "room0"));
  CHECK_FALSE(fs::exists(out3 / "labels.csv"));
}

TEST_CASE("cli: train-smoke reports are bit-identical across reruns") {
  const fs::path dir = tmp_dir("smoke");
  const fs::path cfg = write_run_config(dir, smoke_gen(), {{"seed", 1}, {"batch", 1}});

  const fs::path r1 = dir / "r1.csv", r2 = dir / "r2.csv", r3 = dir / "r3.csv";
  REQUIRE(run_cli({"train-smoke", "--config", cfg.string(), "--steps", "2", "--report",
                   r1.string()}) == 0);
  REQUIRE(run_cli({"train-smoke", "--config", cfg.string(), "--steps", "2", "--report",
                   r2.string()}) == 0);
  CHECK(slurp(r1) == slurp(r2));
  CHECK(slurp(r1).substr(0, slurp(r1).find('\n')) ==
        "step,loss_d_depth,loss_d_rgb,loss_g_adv,loss_fm,loss_ssim");

  // the seed flag overrides the file and changes the trajectory
  REQUIRE(run_cli({"train-smoke", "--config", cfg.string(), "--steps", "2", "--seed", "2",
                   "--report", r3.string()}) == 0);
  CHECK(slurp(r3) != slurp(r1));

  const fs::path r0 = dir / "r0.csv";
  REQUIRE(run_cli({"train-smoke", "--config", cfg.string(), "--steps", "0", "--report",
                   r0.string()}) == 0);
  CHECK(slurp(r0) == "step,loss_d_depth,loss_d_rgb,loss_g_adv,loss_fm,loss_ssim\n");
}

TEST_CASE("cli: colorize maps depth onto the rainbow ramp, widening a constant range") {
  const fs::path dir = tmp_dir("colorize");
  Tensor d({1, 1, 2});
  d.data()[0] = 0.0, d.data()[1] = 1.0;
  write_pfm(dir / "ramp.pfm", d);
  REQUIRE(run_cli({"colorize", "--pfm", (dir / "ramp.pfm").string(), "--out",
                   (dir / "ramp.ppm").string(), "--min", "0", "--max", "1"}) == 0);
  const Tensor rgb = read_ppm(dir / "ramp.ppm");
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(rgb[c * 2 + 0] == std::nearbyint(kTurboLut[0][c] * 255));
    CHECK(rgb[c * 2 + 1] == std::nearbyint(kTurboLut[255][c] * 255));
  }

  // a constant map still renders: the degenerate range widens to +-0.5
  Tensor flat({1, 1, 1});
  flat.data()[0] = 3.0;
  write_pfm(dir / "flat.pfm", flat);
  REQUIRE(run_cli({"colorize", "--pfm", (dir / "flat.pfm").string(), "--out",
                   (dir / "flat.ppm").string()}) == 0);
  const Tensor mid = read_ppm(dir / "flat.ppm");
  for (std::size_t c = 0; c < 3; ++c)
    CHECK(mid[c] == std::nearbyint((kTurboLut[127][c] + kTurboLut[128][c]) * 0.5 * 255));
}
