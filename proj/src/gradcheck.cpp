#include "depthgen/gradcheck.hpp"

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace depthgen {

namespace {

double probe(const std::function<Var()>& fn) {
  NoGradGuard ng;
  const double v = fn().val().item();
  if (!std::isfinite(v)) throw std::domain_error("grad_check: non-finite loss while probing");
  return v;
}

}  // namespace

double grad_check(const std::function<Var()>& fn, ParamStore& params, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("grad_check: need h > 0");
  params.zero_grad();
  {
    Var loss = fn();
    if (!std::isfinite(loss.val().item()))
      throw std::domain_error("grad_check: non-finite loss");
    backward(loss);
  }
  // copy the analytic grads before the probes disturb anything
  std::map<std::string, Tensor> analytic;
  for (const auto& [name, v] : params.items()) analytic.emplace(name, v.grad());

  double worst = 0.0;
  for (const auto& [name, v] : params.items()) {
    Var var = v;
    double* val = var.mutable_val().data();
    const Tensor& an = analytic.at(name);
    for (std::size_t i = 0; i < var.numel(); ++i) {
      const double keep = val[i];
      val[i] = keep + h;
      const double lp = probe(fn);
      val[i] = keep - h;
      const double lm = probe(fn);
      val[i] = keep;
      const double fd = (lp - lm) / (2.0 * h);
      const double a = an.data()[i];
      const double rel = std::abs(a - fd) / std::max(1e-8, std::abs(a) + std::abs(fd));
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace depthgen
