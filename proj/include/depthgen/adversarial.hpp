#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "depthgen/generator.hpp"

namespace depthgen {

/// Conv stack shared by both image critics: per scale, four 4x4
/// stride-2 LeakyReLU(0.2) layers and a 1x1 logit head, every weight
/// spectrally normalized.
struct DiscriminatorConfig {
  std::size_t image_channels = 1;  // 1 for depth maps, 3 for color
  std::size_t num_labels = 0;
  std::vector<std::size_t> widths = {16, 32, 64, 128};
  std::size_t scales = 2;  // each further scale sees a 2x2-average-pooled input
};

/// Persistent left singular vector estimates, one per weight tensor,
/// advanced by one power iteration per training-mode forward.
struct SpectralState {
  std::map<std::string, Tensor> u;
};

/// Logits plus the intermediate (post-activation) feature maps of one
/// scale's stack, coarsest feature last.
struct DiscScaleOutput {
  Var logits;
  std::vector<Var> feats;
};

/// Fresh critic weights (truncated normal, sigma 0.02, zero biases)
/// named s{scale}.c{layer}.{w,b} and s{scale}.h.{w,b}.
ParamStore build_discriminator_params(const DiscriminatorConfig& cfg, std::uint64_t seed);

/// Unit-norm power-iteration vectors for every weight in ps.
SpectralState init_spectral_state(const ParamStore& ps, std::uint64_t seed);

/// Power-iteration pieces, operating on w flattened to
/// [shape[0], numel/shape[0]]. Exposed for direct convergence checks.
Tensor power_v(const Tensor& w, const Tensor& u);        // normalize(W^T u)
void power_update(const Tensor& w, Tensor& u);           // u <- normalize(W power_v)
double spectral_sigma(const Tensor& w, const Tensor& u); // u^T W power_v

/// Runs the critic on concat(one_hot(M), image). Scale k sees the input
/// 2x2-average-pooled k times. In training mode each forward advances
/// the power iteration by one step; in eval mode the state is frozen.
/// Returns one entry per requested scale, in scale_set order.
std::vector<DiscScaleOutput> discriminate(const Var& image, const SemanticLayout& m,
                                          const ParamStore& ps, SpectralState& sn,
                                          bool train,
                                          const std::vector<std::size_t>& scale_set = {0, 1});

/// Critic objective: mean over scales of per-scale pixel means of
/// max(0, 1 - real) + max(0, 1 + fake).
Var hinge_d_loss(const std::vector<DiscScaleOutput>& real,
                 const std::vector<DiscScaleOutput>& fake);

/// Generator objective: mean over scales of per-scale means of -fake.
Var hinge_g_loss(const std::vector<DiscScaleOutput>& fake);

/// Mean absolute difference between matching feature maps, averaged
/// over all (scale, layer) pairs. Real features enter as constants.
Var feature_matching_loss(const std::vector<DiscScaleOutput>& real,
                          const std::vector<DiscScaleOutput>& fake);

/// Mean structural similarity of two single-channel maps in [-1, 1]
/// (mapped to [0, 1] internally): 11x11 Gaussian window, sigma 1.5,
/// C1 = 0.01^2, C2 = 0.03^2, windows fully inside the map.
Var ssim(const Var& x, const Var& y);

/// First/second moment accumulators for every parameter, plus the
/// shared step count.
struct AdamState {
  std::map<std::string, Tensor> m, v;
  std::uint64_t t = 0;
};

AdamState init_adam_state(const ParamStore& ps);

/// Bias-corrected Adam over the accumulated leaf gradients, in place.
/// A non-finite gradient anywhere rejects the whole step.
void adam_step(ParamStore& ps, AdamState& st, double lr, double beta1 = 0.0,
               double beta2 = 0.999, double eps = 1e-8);

struct LossWeights {
  double w_ssim = 20.0;
  double w_fm = 10.0;
  double w_adv = 1.0;
};

struct TrainConfig {
  GeneratorConfig gen;  // desk-scale: resolution <= 32, <= 2 stages
  std::size_t steps = 100;
  std::size_t batch = 2;
  std::uint64_t seed = 1;
  double lr_g = 1e-4;
  double lr_d = 4e-4;
  LossWeights weights;
};

struct TrainStepRow {
  std::size_t step = 0;
  double loss_d_depth = 0, loss_d_rgb = 0;
  double loss_g_adv = 0, loss_fm = 0, loss_ssim = 0;
};

struct TrainReport {
  std::vector<TrainStepRow> rows;
  std::string to_csv() const;  // header + one row per step, %.17g fields
};

/// Alternating critic/generator updates against a synthetic layout
/// dataset derived from the seed. Aborts with the step index if any
/// loss turns non-finite. Deterministic for a fixed config.
TrainReport train_smoke(const TrainConfig& cfg);

}  // namespace depthgen
