#pragma once

#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "depthgen/tensor.hpp"

namespace depthgen {

// Variance floor added inside every std-deviation square root.
inline constexpr double kEpsVar = 1e-5;
// tanh-approximation constant sqrt(2/pi) used by gelu.
inline constexpr double kGeluC = 0.7978845608028654;
// Additive logit for masked attention pairs.
inline constexpr double kMaskLogit = -1e9;

struct Node;
using NodePtr = std::shared_ptr<Node>;

/// One recorded op (or leaf) in the computation DAG. `backprop` reads
/// this node's grad and accumulates into its inputs' grads.
struct Node {
  Tensor value;
  Tensor grad;  // empty until backward touches this node
  bool requires_grad = false;
  std::vector<NodePtr> inputs;
  std::function<void(Node&)> backprop;

  Tensor& grad_ref();  // materializes zeros of value's shape on first use
};

/// Lightweight handle to a graph node. Copying a Var shares the node.
class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);

  static Var constant(Tensor value) { return Var(std::move(value), false); }
  static Var leaf(Tensor value) { return Var(std::move(value), true); }

  bool defined() const { return node_ != nullptr; }
  const Tensor& val() const { return node_->value; }
  Tensor& mutable_val() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t numel() const { return node_->value.numel(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }

  /// Gradient of the last backward pass; zeros if never reached.
  const Tensor& grad() const;
  void clear_grad();

  NodePtr node() const { return node_; }

  static Var wrap_node(NodePtr n);

 private:
  NodePtr node_;
};

/// While a NoGradGuard is alive, ops record no graph (forward values only).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

bool grad_enabled();

/// Reverse-mode sweep from a scalar loss. Each reachable node is visited
/// exactly once; leaf grads accumulate into Node::grad.
void backward(const Var& loss);

// ---- elementwise / broadcast ----
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div_v(const Var& a, const Var& b);
Var vexp(const Var& x);
Var vlog(const Var& x);
Var vsqrt(const Var& x);
Var vtanh(const Var& x);
Var relu(const Var& x);
Var gelu(const Var& x);
Var scale(const Var& x, double c);
Var add_scalar(const Var& x, double c);
Var max0_shift(const Var& x, double c);  // max(0, x + c)

// composites
Var vabs(const Var& x);                       // relu(x) + relu(-x)
Var sigmoid(const Var& x);                    // 0.5*(1 + tanh(x/2))
Var leaky_relu(const Var& x, double slope);   // relu(x) - slope*relu(-x)
Var square(const Var& x);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator*(const Var& a, double c) { return scale(a, c); }
inline Var operator*(double c, const Var& a) { return scale(a, c); }

// ---- contractions / reductions ----
Var matmul(const Var& a, const Var& b);
Var softmax(const Var& x, int axis);
Var sum(const Var& x, const std::vector<int>& axes, bool keepdims);
Var mean(const Var& x, const std::vector<int>& axes, bool keepdims);
Var sum_all(const Var& x);   // 0-d
Var mean_all(const Var& x);  // 0-d

/// (mu, sigma) over `axes`, keepdims, sigma = sqrt(mean((x-mu)^2) + kEpsVar).
std::pair<Var, Var> joint_stats(const Var& x, const std::vector<int>& axes);

// ---- rearrangement ----
Var reshape(const Var& x, Shape new_shape);
Var permute(const Var& x, const std::vector<int>& order);
/// out[i] = x[idx[i]]; indices may repeat (backward scatter-adds).
Var gather(const Var& x, Shape out_shape, std::shared_ptr<const std::vector<std::size_t>> idx);
Var concat(const std::vector<Var>& parts, int axis);

// ---- spatial ----
/// x [Ci,H,W], w [Co,Ci,k,k], b [Co]. Cross-correlation; output spatial
/// dims floor((H + 2*pad - k)/stride) + 1.
Var conv2d(const Var& x, const Var& w, const Var& b, std::size_t stride, std::size_t pad);

/// New leaf sharing x's value, cut off from x's graph.
Var detach(const Var& x);

}  // namespace depthgen
