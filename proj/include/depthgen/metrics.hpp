#pragma once

#include <cstddef>
#include <vector>

#include "depthgen/tensor.hpp"

namespace depthgen {

/// Standard monocular-depth evaluation suite for one image pair.
/// Error metrics are means over valid pixels; the deltas are the
/// fraction of valid pixels whose depth ratio stays under 1.25^n.
struct MetricsReport {
  double mae = 0.0;
  double abs_rel = 0.0;
  double sq_rel = 0.0;
  double rmse = 0.0;
  double rmse_log = 0.0;
  double log10_err = 0.0;
  double delta1 = 0.0;
  double delta2 = 0.0;
  double delta3 = 0.0;
  std::size_t valid_pixels = 0;
};

/// 1.0 where both maps are strictly positive, else 0.0; the only pixels
/// every metric (and the alignment) ever looks at.
Tensor valid_mask(const Tensor& pred, const Tensor& gt);

/// Multiplicative mean alignment: scales pred by mean(gt)/mean(pred)
/// over the masked pixels, so a global scale on pred cancels exactly.
/// Throws if the mask is empty or either masked mean is nonpositive.
Tensor align_mean(const Tensor& pred, const Tensor& gt, const Tensor& mask);

/// Full nine-metric report over the valid pixels of one pair, optionally
/// mean-aligning pred first. Nonpositive depths never reach a logarithm;
/// they are excluded by the mask.
MetricsReport depth_metrics(const Tensor& pred, const Tensor& gt, bool align);

/// Unweighted per-image mean of each metric column; valid_pixels is the
/// total count. Throws on an empty batch.
MetricsReport mean_report(const std::vector<MetricsReport>& reports);

}  // namespace depthgen
