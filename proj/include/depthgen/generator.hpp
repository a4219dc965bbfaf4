#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "depthgen/caf.hpp"
#include "depthgen/params.hpp"

namespace depthgen {

/// One cascade stage. resolution is the input (== output) extent of the
/// stage's feature map; the token grid is resolution/patch on a side.
struct StageConfig {
  std::size_t resolution = 0;
  std::size_t channels = 0;    // input channels C
  std::size_t embedding = 0;   // token width E; output channels are E/patch^2
  std::size_t patch = 1;
  std::size_t window = 1;
  std::size_t pair_count = 1;  // regular/shifted attention pairs
};

struct GeneratorConfig {
  std::size_t output_resolution = 0;
  std::vector<StageConfig> stages;  // coarse to fine
  std::size_t z_dim = 256;
  std::size_t num_labels = 40;
  bool fuse_enabled = true;
  CtnStats ctn_stats = CtnStats::joint;
  CafValueSource caf_value_source = CafValueSource::self;
  bool literal_eq1 = false;  // drop the in-block skip connections

  void validate() const;  // throws std::invalid_argument
};

/// Output channels of a stage: embedding / patch^2.
std::size_t stage_out_channels(const StageConfig& sc);

/// Attention head count for a stage: max(1, E/32).
std::size_t stage_heads(const StageConfig& sc);

/// Patch size of the fusion block for a map of extent h: max(1, h/32).
std::size_t caf_patch_size(std::size_t h);

/// Desk-scale schedule for a power-of-two output resolution in
/// {32, 64, 128, 256}: stages double from 8x8 up, channels halve from
/// 256 to a floor of 64, patch sizes reach resolution/32 (resolution/64
/// for the 256 task) with a minimum of 1, windows grow 4 -> 8.
GeneratorConfig default_config(std::size_t resolution);

std::string config_to_json(const GeneratorConfig& cfg);
GeneratorConfig config_from_json(const std::string& text);  // strict keys

/// Two-layer token MLP weights.
struct MlpParams {
  Var w1, b1, w2, b2;
};

/// One regular/shifted attention pair: pre-norm CTNs, the two window
/// attentions, and their follow-up MLPs.
struct StagePairParams {
  CtnParams n0, n1, n2, n3;
  MsaParams a0, a1;  // regular, shifted
  MlpParams m0, m1;
};

struct StageParams {
  Var pe_w, pe_b;  // patch embed [C p^2, E], [E]
  Var lt_w, lt_b;  // layout tokenizer [p^2 L, E], [E]
  std::vector<StagePairParams> pairs;
  SpadeParams sp;
};

/// Fresh parameters for cfg, deterministically drawn from seed. Weights
/// are truncated-normal (sigma 0.02), biases zero, CTN gamma-head biases
/// one, fusion gates start at sigmoid == 0.1. zero_bias_tables ablates
/// the relative-position bias by initializing the tables to zero.
ParamStore build_generator_params(const GeneratorConfig& cfg, std::uint64_t seed,
                                  bool zero_bias_tables = false);

/// Collect one stage's weights from the store under prefix (e.g. "g.d.s0.").
StageParams stage_params(const ParamStore& ps, const std::string& prefix,
                         const StageConfig& sc);

/// Collect the fusion weights; patch is set from the map extent h.
CafParams collect_caf_params(const ParamStore& ps, std::size_t h);

/// one_hot(M) -> strided conv tower to 4x4 -> linear to z -> linear +
/// GELU -> [C0, base, base] -> shared 3x3 stem conv. base is the first
/// stage's resolution.
Var encode_layout(const SemanticLayout& m, const ParamStore& ps,
                  const GeneratorConfig& cfg);

/// patch-embed, pair_count x (CTN -> W-MSA -> CTN -> MLP -> CTN -> SW-MSA
/// -> CTN -> MLP) with skip connections unless literal_eq1, reassemble via
/// pixel shuffle, add the SPADE shortcut, upsample x2 unless final.
Var generator_stage(const Var& f, const SemanticLayout& m, const StageConfig& sc,
                    const StageParams& sp, CtnStats stats, bool literal_eq1,
                    bool final_stage);

/// Full forward pass: encode, run both branch cascades with the fusion
/// block before the final stage, apply the tanh heads.
/// Returns (depth [1,H,W], rgb [3,H,W]), both in [-1, 1].
std::pair<Var, Var> generate(const SemanticLayout& m, const ParamStore& ps,
                             const GeneratorConfig& cfg);

}  // namespace depthgen
