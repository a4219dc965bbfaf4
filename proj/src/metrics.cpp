#include "depthgen/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace depthgen {

namespace {

void check_pair(const Tensor& pred, const Tensor& gt) {
  if (!shape_eq(pred.shape(), gt.shape()))
    throw std::invalid_argument("depth metrics: shape mismatch");
  if (pred.numel() == 0) throw std::invalid_argument("depth metrics: empty maps");
}

}  // namespace

Tensor valid_mask(const Tensor& pred, const Tensor& gt) {
  check_pair(pred, gt);
  Tensor m(pred.shape());
  for (std::size_t i = 0; i < m.numel(); ++i)
    m.data()[i] = (pred[i] > 0.0 && gt[i] > 0.0) ? 1.0 : 0.0;
  return m;
}

Tensor align_mean(const Tensor& pred, const Tensor& gt, const Tensor& mask) {
  check_pair(pred, gt);
  if (!shape_eq(mask.shape(), pred.shape()))
    throw std::invalid_argument("align_mean: mask shape mismatch");
  double sp = 0.0, sg = 0.0, n = 0.0;
  for (std::size_t i = 0; i < pred.numel(); ++i) {
    if (mask[i] == 0.0) continue;
    sp += pred[i];
    sg += gt[i];
    n += 1.0;
  }
  if (n == 0.0) throw std::invalid_argument("align_mean: no valid pixels");
  const double mp = sp / n, mg = sg / n;
  if (mp <= 0.0 || mg <= 0.0)
    throw std::invalid_argument("align_mean: nonpositive masked mean");
  const double s = mg / mp;
  Tensor out = pred;
  for (std::size_t i = 0; i < out.numel(); ++i) out.data()[i] *= s;
  return out;
}

MetricsReport depth_metrics(const Tensor& pred, const Tensor& gt, bool align) {
  const Tensor mask = valid_mask(pred, gt);
  std::size_t n = 0;
  for (std::size_t i = 0; i < mask.numel(); ++i) n += mask[i] != 0.0;
  if (n == 0) throw std::invalid_argument("depth metrics: no valid pixels");
  const Tensor p = align ? align_mean(pred, gt, mask) : pred;

  MetricsReport r;
  r.valid_pixels = n;
  double se = 0.0, se_log = 0.0;
  std::size_t d1 = 0, d2 = 0, d3 = 0;
  for (std::size_t i = 0; i < mask.numel(); ++i) {
    if (mask[i] == 0.0) continue;
    const double d = gt[i], dh = p[i];
    const double err = std::abs(dh - d);
    r.mae += err;
    r.abs_rel += err / d;
    r.sq_rel += err * err / d;
    se += err * err;
    const double dl = std::log(dh) - std::log(d);
    se_log += dl * dl;
    r.log10_err += std::abs(std::log10(dh) - std::log10(d));
    const double ratio = std::max(dh / d, d / dh);
    d1 += ratio < 1.25;
    d2 += ratio < 1.25 * 1.25;
    d3 += ratio < 1.25 * 1.25 * 1.25;
  }
  const double dn = static_cast<double>(n);
  r.mae /= dn;
  r.abs_rel /= dn;
  r.sq_rel /= dn;
  r.rmse = std::sqrt(se / dn);
  r.rmse_log = std::sqrt(se_log / dn);
  r.log10_err /= dn;
  r.delta1 = static_cast<double>(d1) / dn;
  r.delta2 = static_cast<double>(d2) / dn;
  r.delta3 = static_cast<double>(d3) / dn;
  return r;
}

MetricsReport mean_report(const std::vector<MetricsReport>& reports) {
  if (reports.empty()) throw std::invalid_argument("mean_report: empty batch");
  MetricsReport m;
  for (const MetricsReport& r : reports) {
    m.mae += r.mae;
    m.abs_rel += r.abs_rel;
    m.sq_rel += r.sq_rel;
    m.rmse += r.rmse;
    m.rmse_log += r.rmse_log;
    m.log10_err += r.log10_err;
    m.delta1 += r.delta1;
    m.delta2 += r.delta2;
    m.delta3 += r.delta3;
    m.valid_pixels += r.valid_pixels;
  }
  const double k = static_cast<double>(reports.size());
  m.mae /= k;
  m.abs_rel /= k;
  m.sq_rel /= k;
  m.rmse /= k;
  m.rmse_log /= k;
  m.log10_err /= k;
  m.delta1 /= k;
  m.delta2 /= k;
  m.delta3 /= k;
  return m;
}

}  // namespace depthgen
