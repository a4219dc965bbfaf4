#include "depthgen/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <unordered_set>

namespace depthgen {

namespace {

thread_local bool g_grad_enabled = true;

void check_defined(const Var& v, const char* op) {
  if (!v.defined()) throw std::invalid_argument(std::string(op) + ": undefined operand");
}

/// Broadcast plan for two operands aligned on trailing axes. `sa`/`sb`
/// hold per-output-axis element strides, 0 where the operand is stretched.
struct BcastPlan {
  Shape out;
  std::vector<std::size_t> sa, sb;
};

BcastPlan plan_bcast(const Shape& a, const Shape& b, const char* op) {
  const std::size_t nd = std::max(a.size(), b.size());
  BcastPlan p;
  p.out.resize(nd);
  p.sa.resize(nd);
  p.sb.resize(nd);
  const std::vector<std::size_t> stra = row_major_strides(a);
  const std::vector<std::size_t> strb = row_major_strides(b);
  for (std::size_t d = 0; d < nd; ++d) {
    const bool ha = d + a.size() >= nd;  // operand covers this output axis
    const bool hb = d + b.size() >= nd;
    const std::size_t da = ha ? a[d + a.size() - nd] : 1;
    const std::size_t db = hb ? b[d + b.size() - nd] : 1;
    if (da != db && da != 1 && db != 1)
      throw std::invalid_argument(std::string(op) + ": cannot broadcast " + shape_str(a) +
                                  " with " + shape_str(b));
    p.out[d] = std::max(da, db);
    p.sa[d] = (ha && da != 1) ? stra[d + a.size() - nd] : 0;
    p.sb[d] = (hb && db != 1) ? strb[d + b.size() - nd] : 0;
  }
  return p;
}

/// Calls fn(out_index, a_index, b_index) for every output element in
/// row-major order.
template <class FN>
void for_bcast(const BcastPlan& p, FN&& fn) {
  const std::size_t n = shape_numel(p.out);
  const std::size_t nd = p.out.size();
  if (nd == 0) {
    fn(std::size_t{0}, std::size_t{0}, std::size_t{0});
    return;
  }
  std::vector<std::size_t> idx(nd, 0);
  std::size_t ia = 0, ib = 0;
  for (std::size_t io = 0; io < n; ++io) {
    fn(io, ia, ib);
    for (int d = static_cast<int>(nd) - 1; d >= 0; --d) {
      ++idx[d];
      ia += p.sa[d];
      ib += p.sb[d];
      if (idx[d] < p.out[d]) break;
      ia -= p.sa[d] * p.out[d];
      ib -= p.sb[d] * p.out[d];
      idx[d] = 0;
    }
  }
}

Var make_node(Tensor value, const std::vector<Var>& inputs, std::function<void(Node&)> back) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  bool rg = false;
  if (g_grad_enabled)
    for (const Var& v : inputs) rg = rg || v.requires_grad();
  n->requires_grad = rg;
  if (rg) {
    n->inputs.reserve(inputs.size());
    for (const Var& v : inputs) n->inputs.push_back(v.node());
    n->backprop = std::move(back);
  }
  return Var::wrap_node(std::move(n));
}

/// Elementwise binary op with broadcasting. dfa/dfb take (a, b, y) and
/// return the partial wrt that operand.
template <class F, class DA, class DB>
Var binary_elt(const Var& a, const Var& b, const char* op, F f, DA dfa, DB dfb) {
  check_defined(a, op);
  check_defined(b, op);
  BcastPlan plan = plan_bcast(a.shape(), b.shape(), op);
  Tensor out(plan.out);
  {
    const double* pa = a.val().data();
    const double* pb = b.val().data();
    double* po = out.data();
    for_bcast(plan, [&](std::size_t io, std::size_t ia, std::size_t ib) {
      po[io] = f(pa[ia], pb[ib]);
    });
  }
  NodePtr na = a.node(), nb = b.node();
  return make_node(std::move(out), {a, b}, [plan, na, nb, dfa, dfb](Node& self) {
    const double* g = self.grad.data();
    const double* pa = na->value.data();
    const double* pb = nb->value.data();
    const double* py = self.value.data();
    double* ga = na->requires_grad ? na->grad_ref().data() : nullptr;
    double* gb = nb->requires_grad ? nb->grad_ref().data() : nullptr;
    for_bcast(plan, [&](std::size_t io, std::size_t ia, std::size_t ib) {
      if (ga) ga[ia] += dfa(pa[ia], pb[ib], py[io]) * g[io];
      if (gb) gb[ib] += dfb(pa[ia], pb[ib], py[io]) * g[io];
    });
  });
}

/// Elementwise unary op. df takes (x, y).
template <class F, class DF>
Var unary_elt(const Var& x, const char* op, F f, DF df) {
  check_defined(x, op);
  Tensor out(x.shape());
  const std::size_t n = out.numel();
  {
    const double* px = x.val().data();
    double* po = out.data();
    for (std::size_t i = 0; i < n; ++i) po[i] = f(px[i]);
  }
  NodePtr nx = x.node();
  return make_node(std::move(out), {x}, [nx, n, df](Node& self) {
    if (!nx->requires_grad) return;
    const double* g = self.grad.data();
    const double* px = nx->value.data();
    const double* py = self.value.data();
    double* gx = nx->grad_ref().data();
    for (std::size_t i = 0; i < n; ++i) gx[i] += df(px[i], py[i]) * g[i];
  });
}

/// Per-axis "is reduced" flags; an empty axis list reduces everything.
std::vector<bool> reduced_mask(std::size_t ndim, const std::vector<int>& axes, const char* op) {
  std::vector<bool> red(ndim, false);
  if (axes.empty()) {
    std::fill(red.begin(), red.end(), true);
    return red;
  }
  for (int ax : axes) {
    const std::size_t d = normalize_axis(ax, ndim);
    if (red[d]) throw std::invalid_argument(std::string(op) + ": duplicate axis");
    red[d] = true;
  }
  return red;
}

}  // namespace

Tensor& Node::grad_ref() {
  if (!grad.defined()) grad = Tensor(value.shape());
  return grad;
}

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad && g_grad_enabled;
}

const Tensor& Var::grad() const {
  return node_->grad_ref();
}

void Var::clear_grad() {
  node_->grad = Tensor();
}

Var Var::wrap_node(NodePtr n) {
  Var v;
  v.node_ = std::move(n);
  return v;
}

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) {
  g_grad_enabled = false;
}

NoGradGuard::~NoGradGuard() {
  g_grad_enabled = prev_;
}

bool grad_enabled() {
  return g_grad_enabled;
}

void backward(const Var& loss) {
  if (!loss.defined()) throw std::invalid_argument("backward: undefined loss");
  if (loss.val().numel() != 1)
    throw std::invalid_argument("backward: loss must be a scalar, got shape " +
                                shape_str(loss.shape()));
  Node* root = loss.node().get();
  if (!root->requires_grad) {
    root->grad_ref().data()[0] += 1.0;
    return;
  }

  // postorder over the requires_grad subgraph (children before parents)
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  seen.insert(root);
  while (!stack.empty()) {
    auto& [n, child] = stack.back();
    if (child < n->inputs.size()) {
      Node* c = n->inputs[child++].get();
      if (c && c->requires_grad && seen.insert(c).second) stack.emplace_back(c, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  // interior grads are per-sweep scratch; only leaves accumulate across sweeps
  for (Node* n : order)
    if (n->backprop) n->grad = Tensor();
  root->grad_ref().data()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (!n->backprop) continue;
    n->grad_ref();  // a consumer may have skipped a zero contribution
    n->backprop(*n);
  }
}

// ---- elementwise / broadcast ----

Var add(const Var& a, const Var& b) {
  return binary_elt(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double, double, double) { return 1.0; }, [](double, double, double) { return 1.0; });
}

Var sub(const Var& a, const Var& b) {
  return binary_elt(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double, double) { return 1.0; }, [](double, double, double) { return -1.0; });
}

Var mul(const Var& a, const Var& b) {
  return binary_elt(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double, double y, double) { return y; }, [](double x, double, double) { return x; });
}

Var div_v(const Var& a, const Var& b) {
  return binary_elt(
      a, b, "div",
      [](double x, double y) {
        if (y == 0.0) throw std::domain_error("div: division by zero");
        return x / y;
      },
      [](double, double y, double) { return 1.0 / y; },
      [](double, double y, double out) { return -out / y; });
}

Var vexp(const Var& x) {
  return unary_elt(
      x, "exp", [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Var vlog(const Var& x) {
  return unary_elt(
      x, "log",
      [](double v) {
        if (v <= 0.0) throw std::domain_error("log: non-positive input " + std::to_string(v));
        return std::log(v);
      },
      [](double v, double) { return 1.0 / v; });
}

Var vsqrt(const Var& x) {
  return unary_elt(
      x, "sqrt",
      [](double v) {
        if (v < 0.0) throw std::domain_error("sqrt: negative input " + std::to_string(v));
        return std::sqrt(v);
      },
      [](double, double y) { return 0.5 / y; });
}

Var vtanh(const Var& x) {
  return unary_elt(
      x, "tanh", [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Var relu(const Var& x) {
  return unary_elt(
      x, "relu", [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var gelu(const Var& x) {
  // 0.5*x*(1 + tanh(kGeluC*(x + 0.044715*x^3)))
  return unary_elt(
      x, "gelu",
      [](double v) {
        const double t = std::tanh(kGeluC * (v + 0.044715 * v * v * v));
        return 0.5 * v * (1.0 + t);
      },
      [](double v, double) {
        const double t = std::tanh(kGeluC * (v + 0.044715 * v * v * v));
        const double du = kGeluC * (1.0 + 3.0 * 0.044715 * v * v);
        return 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du;
      });
}

Var scale(const Var& x, double c) {
  return unary_elt(
      x, "scale", [c](double v) { return c * v; }, [c](double, double) { return c; });
}

Var add_scalar(const Var& x, double c) {
  return unary_elt(
      x, "add_scalar", [c](double v) { return v + c; }, [](double, double) { return 1.0; });
}

Var max0_shift(const Var& x, double c) {
  return unary_elt(
      x, "max0_shift", [c](double v) { return v + c > 0.0 ? v + c : 0.0; },
      [c](double v, double) { return v + c > 0.0 ? 1.0 : 0.0; });
}

// ---- composites ----

Var vabs(const Var& x) {
  return add(relu(x), relu(scale(x, -1.0)));
}

Var sigmoid(const Var& x) {
  return add_scalar(scale(vtanh(scale(x, 0.5)), 0.5), 0.5);
}

Var leaky_relu(const Var& x, double slope) {
  return sub(relu(x), scale(relu(scale(x, -1.0)), slope));
}

Var square(const Var& x) {
  return mul(x, x);
}

// ---- contractions / reductions ----

Var matmul(const Var& a, const Var& b) {
  check_defined(a, "matmul");
  check_defined(b, "matmul");
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  if (as.size() < 2 || bs.size() < 2)
    throw std::invalid_argument("matmul: operands need >= 2 dims, got " + shape_str(as) +
                                " and " + shape_str(bs));
  const std::size_t m = as[as.size() - 2], k = as.back();
  const std::size_t kb = bs[bs.size() - 2], n = bs.back();
  if (k != kb)
    throw std::invalid_argument("matmul: inner dims disagree, " + shape_str(as) + " vs " +
                                shape_str(bs));
  const Shape abat(as.begin(), as.end() - 2);
  const Shape bbat(bs.begin(), bs.end() - 2);
  // batch strides count whole matrices; scale by matrix size when indexing
  BcastPlan bat = plan_bcast(abat, bbat, "matmul");
  Shape oshape = bat.out;
  oshape.push_back(m);
  oshape.push_back(n);
  Tensor out(oshape);
  const std::size_t asz = m * k, bsz = k * n, osz = m * n;
  {
    const double* pa = a.val().data();
    const double* pb = b.val().data();
    double* po = out.data();
    for_bcast(bat, [&](std::size_t io, std::size_t ia, std::size_t ib) {
      const double* A = pa + ia * asz;
      const double* B = pb + ib * bsz;
      double* O = po + io * osz;
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          double acc = 0.0;
          for (std::size_t p = 0; p < k; ++p) acc += A[i * k + p] * B[p * n + j];
          O[i * n + j] = acc;
        }
    });
  }
  NodePtr na = a.node(), nb = b.node();
  return make_node(std::move(out), {a, b}, [bat, na, nb, m, n, k, asz, bsz, osz](Node& self) {
    const double* g = self.grad.data();
    const double* pa = na->value.data();
    const double* pb = nb->value.data();
    double* ga = na->requires_grad ? na->grad_ref().data() : nullptr;
    double* gb = nb->requires_grad ? nb->grad_ref().data() : nullptr;
    for_bcast(bat, [&](std::size_t io, std::size_t ia, std::size_t ib) {
      const double* G = g + io * osz;
      const double* A = pa + ia * asz;
      const double* B = pb + ib * bsz;
      if (ga) {
        double* GA = ga + ia * asz;
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += G[i * n + j] * B[p * n + j];
            GA[i * k + p] += acc;
          }
      }
      if (gb) {
        double* GB = gb + ib * bsz;
        for (std::size_t p = 0; p < k; ++p)
          for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t i = 0; i < m; ++i) acc += A[i * k + p] * G[i * n + j];
            GB[p * n + j] += acc;
          }
      }
    });
  });
}

Var softmax(const Var& x, int axis) {
  check_defined(x, "softmax");
  const Shape& s = x.shape();
  if (s.empty()) throw std::invalid_argument("softmax: needs at least one dim");
  const std::size_t d = normalize_axis(axis, s.size());
  const std::size_t L = s[d];
  std::size_t inner = 1;
  for (std::size_t i = d + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t outer = x.numel() / (L * inner);
  Tensor out(s);
  {
    const double* px = x.val().data();
    double* po = out.data();
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t r = 0; r < inner; ++r) {
        const std::size_t base = o * L * inner + r;
        double mx = px[base];
        for (std::size_t l = 1; l < L; ++l) mx = std::max(mx, px[base + l * inner]);
        double sum = 0.0;
        for (std::size_t l = 0; l < L; ++l) {
          const double e = std::exp(px[base + l * inner] - mx);
          po[base + l * inner] = e;
          sum += e;
        }
        for (std::size_t l = 0; l < L; ++l) po[base + l * inner] /= sum;
      }
  }
  NodePtr nx = x.node();
  return make_node(std::move(out), {x}, [nx, outer, L, inner](Node& self) {
    if (!nx->requires_grad) return;
    const double* g = self.grad.data();
    const double* py = self.value.data();
    double* gx = nx->grad_ref().data();
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t r = 0; r < inner; ++r) {
        const std::size_t base = o * L * inner + r;
        double dot = 0.0;
        for (std::size_t l = 0; l < L; ++l) dot += g[base + l * inner] * py[base + l * inner];
        for (std::size_t l = 0; l < L; ++l) {
          const std::size_t i = base + l * inner;
          gx[i] += py[i] * (g[i] - dot);
        }
      }
  });
}

Var sum(const Var& x, const std::vector<int>& axes, bool keepdims) {
  check_defined(x, "sum");
  const Shape& s = x.shape();
  const std::size_t nd = s.size();
  const std::vector<bool> red = reduced_mask(nd, axes, "sum");
  Shape keep(nd);
  for (std::size_t d = 0; d < nd; ++d) keep[d] = red[d] ? 1 : s[d];
  Shape oshape;
  if (keepdims) {
    oshape = keep;
  } else {
    for (std::size_t d = 0; d < nd; ++d)
      if (!red[d]) oshape.push_back(s[d]);
  }
  Tensor out(oshape);
  // iterate the input space; out strides are 0 on reduced axes
  BcastPlan plan;
  plan.out = s;
  plan.sa.assign(nd, 0);
  plan.sb.assign(nd, 0);
  {
    const std::vector<std::size_t> ks = row_major_strides(keep);
    for (std::size_t d = 0; d < nd; ++d)
      if (!red[d]) plan.sa[d] = ks[d];
  }
  {
    const double* px = x.val().data();
    double* po = out.data();
    for_bcast(plan, [&](std::size_t i, std::size_t o, std::size_t) { po[o] += px[i]; });
  }
  NodePtr nx = x.node();
  return make_node(std::move(out), {x}, [nx, plan](Node& self) {
    if (!nx->requires_grad) return;
    const double* g = self.grad.data();
    double* gx = nx->grad_ref().data();
    for_bcast(plan, [&](std::size_t i, std::size_t o, std::size_t) { gx[i] += g[o]; });
  });
}

Var mean(const Var& x, const std::vector<int>& axes, bool keepdims) {
  check_defined(x, "mean");
  const std::vector<bool> red = reduced_mask(x.shape().size(), axes, "mean");
  std::size_t cnt = 1;
  for (std::size_t d = 0; d < red.size(); ++d)
    if (red[d]) cnt *= x.shape()[d];
  if (cnt == 0) throw std::invalid_argument("mean: reducing over zero elements");
  return scale(sum(x, axes, keepdims), 1.0 / static_cast<double>(cnt));
}

Var sum_all(const Var& x) {
  return sum(x, {}, false);
}

Var mean_all(const Var& x) {
  return mean(x, {}, false);
}

std::pair<Var, Var> joint_stats(const Var& x, const std::vector<int>& axes) {
  Var mu = mean(x, axes, true);
  Var d = sub(x, mu);
  Var var = mean(square(d), axes, true);
  Var sigma = vsqrt(add_scalar(var, kEpsVar));
  return {mu, sigma};
}

// ---- rearrangement ----

Var reshape(const Var& x, Shape new_shape) {
  check_defined(x, "reshape");
  if (shape_numel(new_shape) != x.numel())
    throw std::invalid_argument("reshape: count mismatch " + shape_str(x.shape()) + " -> " +
                                shape_str(new_shape));
  Tensor out(std::move(new_shape), x.val().vec());
  NodePtr nx = x.node();
  return make_node(std::move(out), {x}, [nx](Node& self) {
    if (!nx->requires_grad) return;
    const double* g = self.grad.data();
    double* gx = nx->grad_ref().data();
    const std::size_t n = nx->value.numel();
    for (std::size_t i = 0; i < n; ++i) gx[i] += g[i];
  });
}

Var permute(const Var& x, const std::vector<int>& order) {
  check_defined(x, "permute");
  const Shape& s = x.shape();
  const std::size_t nd = s.size();
  if (order.size() != nd)
    throw std::invalid_argument("permute: order has " + std::to_string(order.size()) +
                                " axes for shape " + shape_str(s));
  std::vector<std::size_t> perm(nd);
  std::vector<bool> used(nd, false);
  for (std::size_t d = 0; d < nd; ++d) {
    perm[d] = normalize_axis(order[d], nd);
    if (used[perm[d]]) throw std::invalid_argument("permute: duplicate axis in order");
    used[perm[d]] = true;
  }
  Shape oshape(nd);
  for (std::size_t d = 0; d < nd; ++d) oshape[d] = s[perm[d]];
  const std::vector<std::size_t> istr = row_major_strides(s);
  BcastPlan plan;
  plan.out = oshape;
  plan.sa.resize(nd);
  plan.sb.assign(nd, 0);
  for (std::size_t d = 0; d < nd; ++d) plan.sa[d] = istr[perm[d]];
  auto idx = std::make_shared<std::vector<std::size_t>>(x.numel());
  for_bcast(plan, [&](std::size_t io, std::size_t ia, std::size_t) { (*idx)[io] = ia; });
  return gather(x, std::move(oshape), std::move(idx));
}

Var gather(const Var& x, Shape out_shape, std::shared_ptr<const std::vector<std::size_t>> idx) {
  check_defined(x, "gather");
  if (!idx || idx->size() != shape_numel(out_shape))
    throw std::invalid_argument("gather: index count does not match output shape " +
                                shape_str(out_shape));
  const std::size_t xn = x.numel();
  Tensor out(std::move(out_shape));
  {
    const double* px = x.val().data();
    double* po = out.data();
    const auto& ix = *idx;
    for (std::size_t i = 0; i < ix.size(); ++i) {
      if (ix[i] >= xn) throw std::out_of_range("gather: index beyond input size");
      po[i] = px[ix[i]];
    }
  }
  NodePtr nx = x.node();
  return make_node(std::move(out), {x}, [nx, idx](Node& self) {
    if (!nx->requires_grad) return;
    const double* g = self.grad.data();
    double* gx = nx->grad_ref().data();
    const auto& ix = *idx;
    for (std::size_t i = 0; i < ix.size(); ++i) gx[ix[i]] += g[i];
  });
}

Var concat(const std::vector<Var>& parts, int axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  for (const Var& p : parts) check_defined(p, "concat");
  const Shape& s0 = parts[0].shape();
  const std::size_t nd = s0.size();
  if (nd == 0) throw std::invalid_argument("concat: 0-d inputs");
  const std::size_t d = normalize_axis(axis, nd);
  std::size_t total = 0;
  for (const Var& p : parts) {
    const Shape& sp = p.shape();
    if (sp.size() != nd)
      throw std::invalid_argument("concat: rank mismatch " + shape_str(s0) + " vs " +
                                  shape_str(sp));
    for (std::size_t i = 0; i < nd; ++i)
      if (i != d && sp[i] != s0[i])
        throw std::invalid_argument("concat: shape mismatch " + shape_str(s0) + " vs " +
                                    shape_str(sp));
    total += sp[d];
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < d; ++i) outer *= s0[i];
  for (std::size_t i = d + 1; i < nd; ++i) inner *= s0[i];
  Shape oshape = s0;
  oshape[d] = total;
  Tensor out(oshape);
  std::vector<std::size_t> col(parts.size()), len(parts.size());
  {
    std::size_t c = 0;
    for (std::size_t pi = 0; pi < parts.size(); ++pi) {
      col[pi] = c;
      len[pi] = parts[pi].shape()[d];
      c += len[pi];
    }
  }
  {
    double* po = out.data();
    for (std::size_t pi = 0; pi < parts.size(); ++pi) {
      const double* pp = parts[pi].val().data();
      const std::size_t block = len[pi] * inner;
      for (std::size_t o = 0; o < outer; ++o)
        std::copy(pp + o * block, pp + (o + 1) * block,
                  po + o * total * inner + col[pi] * inner);
    }
  }
  std::vector<NodePtr> nodes;
  nodes.reserve(parts.size());
  for (const Var& p : parts) nodes.push_back(p.node());
  return make_node(std::move(out), parts,
                   [nodes, col, len, outer, inner, total](Node& self) {
                     const double* g = self.grad.data();
                     for (std::size_t pi = 0; pi < nodes.size(); ++pi) {
                       if (!nodes[pi]->requires_grad) continue;
                       double* gp = nodes[pi]->grad_ref().data();
                       const std::size_t block = len[pi] * inner;
                       for (std::size_t o = 0; o < outer; ++o) {
                         const double* src = g + o * total * inner + col[pi] * inner;
                         double* dst = gp + o * block;
                         for (std::size_t e = 0; e < block; ++e) dst[e] += src[e];
                       }
                     }
                   });
}

// ---- spatial ----

Var conv2d(const Var& x, const Var& w, const Var& b, std::size_t stride, std::size_t pad) {
  check_defined(x, "conv2d");
  check_defined(w, "conv2d");
  check_defined(b, "conv2d");
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  if (xs.size() != 3 || ws.size() != 4)
    throw std::invalid_argument("conv2d: want input [C,H,W] and weight [Co,Ci,k,k], got " +
                                shape_str(xs) + " and " + shape_str(ws));
  const std::size_t Ci = xs[0], H = xs[1], W = xs[2];
  const std::size_t Co = ws[0], k = ws[2];
  if (ws[1] != Ci)
    throw std::invalid_argument("conv2d: channel mismatch, input " + shape_str(xs) +
                                " vs weight " + shape_str(ws));
  if (ws[3] != k) throw std::invalid_argument("conv2d: non-square kernel " + shape_str(ws));
  if (b.shape().size() != 1 || b.shape()[0] != Co)
    throw std::invalid_argument("conv2d: bias shape " + shape_str(b.shape()) + " for " +
                                std::to_string(Co) + " filters");
  if (stride == 0) throw std::invalid_argument("conv2d: stride must be >= 1");
  if (H + 2 * pad < k || W + 2 * pad < k)
    throw std::invalid_argument("conv2d: kernel " + std::to_string(k) +
                                " larger than padded input " + shape_str(xs));
  const std::size_t Ho = (H + 2 * pad - k) / stride + 1;
  const std::size_t Wo = (W + 2 * pad - k) / stride + 1;
  Tensor out({Co, Ho, Wo});
  {
    const double* px = x.val().data();
    const double* pw = w.val().data();
    const double* pb = b.val().data();
    double* po = out.data();
    // Tap-major, channel-minor accumulation. With one-hot inputs the add
    // order is then label-independent, so relabeled forwards stay
    // bit-identical; keep this order fixed.
    for (std::size_t co = 0; co < Co; ++co) {
      const double bias = pb[co];
      for (std::size_t oy = 0; oy < Ho; ++oy)
        for (std::size_t ox = 0; ox < Wo; ++ox) {
          double acc = bias;
          for (std::size_t ky = 0; ky < k; ++ky) {
            const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
            if (iy < 0 || iy >= static_cast<long>(H)) continue;
            for (std::size_t kx = 0; kx < k; ++kx) {
              const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
              if (ix < 0 || ix >= static_cast<long>(W)) continue;
              const double* xrow = px + iy * W + ix;
              const double* wrow = pw + ((co * Ci) * k + ky) * k + kx;
              for (std::size_t ci = 0; ci < Ci; ++ci)
                acc += xrow[ci * H * W] * wrow[ci * k * k];
            }
          }
          po[(co * Ho + oy) * Wo + ox] = acc;
        }
    }
  }
  NodePtr nx = x.node(), nw = w.node(), nb = b.node();
  return make_node(std::move(out), {x, w, b},
                   [nx, nw, nb, Ci, H, W, Co, k, Ho, Wo, stride, pad](Node& self) {
                     const double* g = self.grad.data();
                     const double* px = nx->value.data();
                     const double* pw = nw->value.data();
                     double* gx = nx->requires_grad ? nx->grad_ref().data() : nullptr;
                     double* gw = nw->requires_grad ? nw->grad_ref().data() : nullptr;
                     double* gb = nb->requires_grad ? nb->grad_ref().data() : nullptr;
                     for (std::size_t co = 0; co < Co; ++co)
                       for (std::size_t oy = 0; oy < Ho; ++oy)
                         for (std::size_t ox = 0; ox < Wo; ++ox) {
                           const double go = g[(co * Ho + oy) * Wo + ox];
                           if (gb) gb[co] += go;
                           if (!gx && !gw) continue;
                           for (std::size_t ky = 0; ky < k; ++ky) {
                             const long iy =
                                 static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
                             if (iy < 0 || iy >= static_cast<long>(H)) continue;
                             for (std::size_t kx = 0; kx < k; ++kx) {
                               const long ix =
                                   static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
                               if (ix < 0 || ix >= static_cast<long>(W)) continue;
                               for (std::size_t ci = 0; ci < Ci; ++ci) {
                                 const std::size_t xi = (ci * H + iy) * W + ix;
                                 const std::size_t wi = ((co * Ci + ci) * k + ky) * k + kx;
                                 if (gx) gx[xi] += pw[wi] * go;
                                 if (gw) gw[wi] += px[xi] * go;
                               }
                             }
                           }
                         }
                   });
}

Var detach(const Var& x) {
  check_defined(x, "detach");
  return Var::constant(x.val());
}

}  // namespace depthgen
