#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace depthgen {

/// Outcome of one gradient-audit scene: the worst relative disagreement
/// between analytic and finite-difference gradients over every probed
/// parameter entry, plus the bar the scene is held to.
struct CheckResult {
  std::string scene;
  double max_rel_err = 0.0;
  double threshold = 0.0;
  double seconds = 0.0;

  bool pass() const { return max_rel_err < threshold; }
};

/// Runs the gradient audit scenes selected by `which`: "ctn", "wmsa"
/// (both window variants), "caf" (the fusion block), "stage", "full",
/// or "all" (those plus isolated mlp / pixel-shuffle path / spatial
/// modulation / conv / loss scenes). Isolated layers are held to 1e-6;
/// the composite stage and the full two-stage generator to 1e-5. The
/// seed perturbs every scene's random draws; any seed must pass.
/// Throws std::invalid_argument for an unknown selector.
std::vector<CheckResult> run_gradchecks(const std::string& which, std::uint64_t seed);

}  // namespace depthgen
