#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <vector>

#include "depthgen/gradcheck.hpp"
#include "depthgen/params.hpp"

using namespace depthgen;

namespace {

Tensor rand_tensor(const Shape& s, Rng& rng, double a = -1.0, double b = 1.0) {
  return init_uniform(s, a, b, rng);
}

/// FD-checks loss = sum(build(x) * w) for a fixed random weighting w,
/// which exercises every output entry with a distinct upstream grad.
double fd_op(const Shape& xshape, const std::function<Var(const Var&)>& build, double lo,
             double hi, std::uint64_t seed) {
  Rng rng(seed);
  ParamStore ps;
  Var x = ps.add("x", init_uniform(xshape, lo, hi, rng));
  Var first = build(x);
  Var w = Var::constant(rand_tensor(first.shape(), rng));
  auto fn = [&]() { return sum_all(mul(build(ps.get("x")), w)); };
  return grad_check(fn, ps, 1e-5);
}

}  // namespace

TEST_CASE("tensor: construction and shape bookkeeping") {
  Tensor z = Tensor::zeros({2, 2});
  for (std::size_t i = 0; i < 4; ++i) CHECK(z[i] == 0.0);

  Tensor c = Tensor::full({3}, 1.0);
  CHECK(c.numel() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(c[i] == 1.0);

  Tensor s = Tensor::scalar(7.5);
  CHECK(s.ndim() == 0);
  CHECK(s.numel() == 1);
  CHECK(s.item() == 7.5);

  CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0}), std::invalid_argument);
  CHECK(shape_str({2, 3, 4}) == "[2,3,4]");
}

TEST_CASE("rng: identical seed gives identical stream") {
  Rng a(7), b(7);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng u1(7), u2(7);
  Tensor t1 = init_uniform({4}, 0.0, 1.0, u1);
  Tensor t2 = init_uniform({4}, 0.0, 1.0, u2);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(t1[i] == t2[i]);
    CHECK(t1[i] >= 0.0);
    CHECK(t1[i] < 1.0);
  }
  Rng c(8);
  CHECK(init_uniform({4}, 0.0, 1.0, c)[0] != t1[0]);
}

TEST_CASE("rng: truncated normal stays inside two sigma") {
  Rng rng(11);
  for (int i = 0; i < 5000; ++i) {
    const double v = rng.truncated_normal(0.5);
    CHECK(std::abs(v) <= 2.0 * 0.5);
  }
}

TEST_CASE("matmul: identity, hand value, loop oracle") {
  Var I = Var::constant(Tensor({2, 2}, {1, 0, 0, 1}));
  Var A = Var::constant(Tensor({2, 2}, {1, 2, 3, 4}));
  Tensor r = matmul(I, A).val();
  for (std::size_t i = 0; i < 4; ++i) CHECK(r[i] == A.val()[i]);

  Var row = Var::constant(Tensor({1, 2}, {1, 2}));
  Var col = Var::constant(Tensor({2, 1}, {3, 4}));
  CHECK(matmul(row, col).val().item() == 11.0);

  Rng rng(3);
  Tensor a = rand_tensor({3, 4}, rng), b = rand_tensor({4, 2}, rng);
  Tensor got = matmul(Var::constant(a), Var::constant(b)).val();
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < 4; ++p) acc += a[i * 4 + p] * b[p * 2 + j];
      CHECK(std::abs(got[i * 2 + j] - acc) < 1e-12);
    }

  CHECK_THROWS_AS(matmul(Var::constant(Tensor::zeros({2, 3})),
                         Var::constant(Tensor::zeros({2, 3}))),
                  std::invalid_argument);
}

TEST_CASE("matmul: batch broadcasting") {
  Rng rng(5);
  Tensor a = rand_tensor({4, 2, 3}, rng);  // 4 batched matrices
  Tensor b = rand_tensor({3, 5}, rng);     // shared right operand
  Tensor got = matmul(Var::constant(a), Var::constant(b)).val();
  CHECK(shape_eq(got.shape(), {4, 2, 5}));
  for (std::size_t bi = 0; bi < 4; ++bi)
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 5; ++j) {
        double acc = 0.0;
        for (std::size_t p = 0; p < 3; ++p) acc += a[bi * 6 + i * 3 + p] * b[p * 5 + j];
        CHECK(std::abs(got[bi * 10 + i * 5 + j] - acc) < 1e-12);
      }
}

TEST_CASE("softmax: closed forms and row sums") {
  Tensor r = softmax(Var::constant(Tensor({2}, {0.0, std::log(3.0)})), 0).val();
  CHECK(std::abs(r[0] - 0.25) < 1e-12);
  CHECK(std::abs(r[1] - 0.75) < 1e-12);

  Tensor u = softmax(Var::constant(Tensor({3}, {4.2, 4.2, 4.2})), 0).val();
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(u[i] - 1.0 / 3.0) < 1e-12);

  // shift invariance survives huge magnitudes
  Tensor s = softmax(Var::constant(Tensor({2}, {1000.0, 1001.0})), 0).val();
  const double e = std::exp(1.0);
  CHECK(std::abs(s[0] - 1.0 / (1.0 + e)) < 1e-12);
  CHECK(std::abs(s[1] - e / (1.0 + e)) < 1e-12);

  Rng rng(9);
  Tensor mid = rand_tensor({5, 7}, rng, -20.0, 20.0);
  Tensor ym = softmax(Var::constant(mid), 1).val();
  for (std::size_t i = 0; i < ym.numel(); ++i) {
    CHECK(ym[i] > 0.0);
    CHECK(ym[i] <= 1.0);
  }

  // huge magnitudes: the small entries underflow but rows still sum to 1
  Tensor big = rand_tensor({5, 7}, rng, -1e6, 1e6);
  Tensor y = softmax(Var::constant(big), 1).val();
  for (std::size_t i = 0; i < 5; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < 7; ++j) {
      sum += y[i * 7 + j];
      CHECK(y[i * 7 + j] >= 0.0);
      CHECK(y[i * 7 + j] <= 1.0);
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
}

TEST_CASE("joint_stats: hand values and loop oracle") {
  auto [mu, sg] = joint_stats(Var::constant(Tensor({2}, {1.0, 3.0})), {0});
  CHECK(std::abs(mu.val().item() - 2.0) < 1e-15);
  CHECK(std::abs(sg.val().item() - std::sqrt(1.0 + 1e-5)) < 1e-15);

  auto [mc, sc] = joint_stats(Var::constant(Tensor::full({3, 3}, 4.0)), {0, 1});
  CHECK(mc.val().item() == 4.0);
  CHECK(std::abs(sc.val().item() - std::sqrt(1e-5)) < 1e-15);

  Rng rng(13);
  Tensor x = rand_tensor({4, 6}, rng);
  auto [m, s] = joint_stats(Var::constant(x), {0, 1});
  double acc = 0.0;
  for (std::size_t i = 0; i < 24; ++i) acc += x[i];
  const double mean_ref = acc / 24.0;
  double var = 0.0;
  for (std::size_t i = 0; i < 24; ++i) var += (x[i] - mean_ref) * (x[i] - mean_ref);
  var /= 24.0;
  CHECK(std::abs(m.val().item() - mean_ref) < 1e-12);
  CHECK(std::abs(s.val().item() - std::sqrt(var + 1e-5)) < 1e-12);
  CHECK(shape_eq(m.val().shape(), {1, 1}));  // keepdims for later broadcasting
}

TEST_CASE("elementwise: hand values and domain errors") {
  Tensor m = mul(Var::constant(Tensor({3}, {1, 2, 3})), Var::constant(Tensor({3}, {4, 5, 6})))
                 .val();
  CHECK(m[0] == 4.0);
  CHECK(m[1] == 10.0);
  CHECK(m[2] == 18.0);

  Tensor r = relu(Var::constant(Tensor({3}, {-1, 0, 2}))).val();
  CHECK(r[0] == 0.0);
  CHECK(r[1] == 0.0);
  CHECK(r[2] == 2.0);

  CHECK(gelu(Var::constant(Tensor::scalar(0.0))).val().item() == 0.0);

  CHECK_THROWS_AS(div_v(Var::constant(Tensor::scalar(1.0)), Var::constant(Tensor::scalar(0.0))),
                  std::domain_error);
  CHECK_THROWS_AS(vlog(Var::constant(Tensor::scalar(0.0))), std::domain_error);
  CHECK_THROWS_AS(vlog(Var::constant(Tensor::scalar(-2.0))), std::domain_error);
}

TEST_CASE("elementwise: trailing-axis broadcast, and rejection beyond it") {
  // [2,3] + [3] stretches the row
  Tensor a({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor b({3}, {10, 20, 30});
  Tensor s = add(Var::constant(a), Var::constant(b)).val();
  CHECK(s[0] == 11.0);
  CHECK(s[5] == 36.0);

  // [2,1] * [2,3] stretches the column
  Tensor c({2, 1}, {2, 3});
  Tensor p = mul(Var::constant(c), Var::constant(a)).val();
  CHECK(p[0] == 2.0);
  CHECK(p[3] == 12.0);
  CHECK(p[5] == 18.0);

  CHECK_THROWS_AS(add(Var::constant(Tensor::zeros({2, 3})), Var::constant(Tensor::zeros({2, 2}))),
                  std::invalid_argument);
}

TEST_CASE("reshape and permute: row-major semantics") {
  Tensor v({4}, {1, 2, 3, 4});
  Tensor r = reshape(Var::constant(v), {2, 2}).val();
  CHECK(r.at({0, 0}) == 1.0);
  CHECK(r.at({0, 1}) == 2.0);
  CHECK(r.at({1, 0}) == 3.0);
  CHECK(r.at({1, 1}) == 4.0);
  CHECK_THROWS_AS(reshape(Var::constant(v), {3, 2}), std::invalid_argument);

  Tensor m({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor t = permute(Var::constant(m), {1, 0}).val();
  CHECK(shape_eq(t.shape(), {3, 2}));
  CHECK(t.at({0, 0}) == 1.0);
  CHECK(t.at({0, 1}) == 4.0);
  CHECK(t.at({2, 1}) == 6.0);

  // permute then inverse-permute is the identity
  Rng rng(17);
  Tensor x = rand_tensor({2, 3, 4}, rng);
  Tensor back = permute(permute(Var::constant(x), {2, 0, 1}), {1, 2, 0}).val();
  for (std::size_t i = 0; i < x.numel(); ++i) CHECK(back[i] == x[i]);
  CHECK_THROWS_AS(permute(Var::constant(x), {0, 0, 1}), std::invalid_argument);
}

TEST_CASE("concat: values and shape checks") {
  Tensor a({2, 2}, {1, 2, 3, 4});
  Tensor b({1, 2}, {5, 6});
  Tensor c0 = concat({Var::constant(a), Var::constant(b)}, 0).val();
  CHECK(shape_eq(c0.shape(), {3, 2}));
  CHECK(c0[4] == 5.0);
  Tensor c1 = concat({Var::constant(a), Var::constant(Tensor({2, 1}, {7, 8}))}, 1).val();
  CHECK(shape_eq(c1.shape(), {2, 3}));
  CHECK(c1.at({0, 2}) == 7.0);
  CHECK(c1.at({1, 2}) == 8.0);
  CHECK_THROWS_AS(concat({Var::constant(a), Var::constant(Tensor::zeros({2, 3}))}, 0),
                  std::invalid_argument);
}

TEST_CASE("conv2d: hand value and geometry") {
  // 1-channel 3x3 input, 1 filter of 3x3 all-ones, bias 0.5: the centered
  // output is the input sum plus bias.
  Tensor x({1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  Tensor w = Tensor::full({1, 1, 3, 3}, 1.0);
  Tensor b({1}, {0.5});
  Tensor y = conv2d(Var::constant(x), Var::constant(w), Var::constant(b), 1, 1).val();
  CHECK(shape_eq(y.shape(), {1, 3, 3}));
  CHECK(y.at({0, 1, 1}) == 45.5);
  // corner sees the 2x2 neighborhood only
  CHECK(y.at({0, 0, 0}) == 1.0 + 2.0 + 4.0 + 5.0 + 0.5);

  // stride-2 4x4 with even kernel
  Tensor x2 = Tensor::full({1, 4, 4}, 1.0);
  Tensor w2 = Tensor::full({1, 1, 2, 2}, 1.0);
  Tensor y2 = conv2d(Var::constant(x2), Var::constant(w2), Var::constant(Tensor::zeros({1})), 2,
                     0)
                  .val();
  CHECK(shape_eq(y2.shape(), {1, 2, 2}));
  for (std::size_t i = 0; i < 4; ++i) CHECK(y2[i] == 4.0);

  CHECK_THROWS_AS(conv2d(Var::constant(Tensor::zeros({2, 3, 3})),
                         Var::constant(Tensor::zeros({1, 3, 3, 3})),
                         Var::constant(Tensor::zeros({1})), 1, 1),
                  std::invalid_argument);
}

TEST_CASE("backward: closed-form gradients") {
  // loss = sum x^2 -> grad 2x
  ParamStore ps;
  Var x = ps.add("x", Tensor({2}, {1.0, 2.0}));
  Var loss = sum_all(square(x));
  backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(x.grad()[1] == doctest::Approx(4.0).epsilon(1e-12));

  // sum of softmax is constant 1 -> zero gradient
  ParamStore ps2;
  Var y = ps2.add("y", Tensor({3}, {0.3, -1.2, 2.0}));
  backward(sum_all(softmax(y, 0)));
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(y.grad()[i]) < 1e-12);

  CHECK_THROWS_AS(backward(Var::constant(Tensor::zeros({2}))), std::invalid_argument);
}

TEST_CASE("backward: grads accumulate across uses and backward calls") {
  ParamStore ps;
  Var x = ps.add("x", Tensor::scalar(3.0));
  Var l = add(x, x);  // dl/dx = 2
  backward(l);
  CHECK(x.grad().item() == 2.0);
  backward(l);  // second sweep adds another 2
  CHECK(x.grad().item() == 4.0);
  ps.zero_grad();
  CHECK(x.grad().item() == 0.0);
}

TEST_CASE("backward: finite differences across the op set") {
  CHECK(fd_op({2, 3}, [](const Var& x) { return vexp(x); }, -1, 1, 101) < 1e-6);
  CHECK(fd_op({2, 3}, [](const Var& x) { return vlog(x); }, 0.5, 2.0, 102) < 1e-6);
  CHECK(fd_op({2, 3}, [](const Var& x) { return vsqrt(x); }, 0.5, 2.0, 103) < 1e-6);
  CHECK(fd_op({2, 3}, [](const Var& x) { return vtanh(x); }, -2, 2, 104) < 1e-6);
  CHECK(fd_op({2, 3}, [](const Var& x) { return relu(x); }, 0.2, 1.0, 105) < 1e-6);
  CHECK(fd_op({2, 3}, [](const Var& x) { return gelu(x); }, -2, 2, 106) < 1e-6);
  CHECK(fd_op({2, 3}, [](const Var& x) { return sigmoid(x); }, -2, 2, 107) < 1e-6);
  CHECK(fd_op({2, 3}, [](const Var& x) { return leaky_relu(x, 0.2); }, 0.2, 1.0, 108) < 1e-6);
  CHECK(fd_op({2, 3}, [](const Var& x) { return vabs(x); }, 0.2, 1.0, 109) < 1e-6);
  CHECK(fd_op({2, 3}, [](const Var& x) { return scale(x, -1.7); }, -1, 1, 110) < 1e-6);
  CHECK(fd_op({2, 3}, [](const Var& x) { return add_scalar(x, 0.3); }, -1, 1, 111) < 1e-6);
  CHECK(fd_op({2, 3}, [](const Var& x) { return max0_shift(x, 0.9); }, 0.2, 1.0, 112) < 1e-6);
  CHECK(fd_op({2, 3}, [](const Var& x) { return softmax(x, 1); }, -2, 2, 113) < 1e-6);
  CHECK(fd_op({2, 3}, [](const Var& x) { return sum(x, {0}, false); }, -1, 1, 114) < 1e-6);
  CHECK(fd_op({2, 3}, [](const Var& x) { return mean(x, {1}, true); }, -1, 1, 115) < 1e-6);
  CHECK(fd_op({2, 3}, [](const Var& x) { return reshape(x, {3, 2}); }, -1, 1, 116) < 1e-6);
  CHECK(fd_op({2, 3}, [](const Var& x) { return permute(x, {1, 0}); }, -1, 1, 117) < 1e-6);
  CHECK(fd_op({2, 3},
              [](const Var& x) {
                auto [m, s] = joint_stats(x, {0, 1});
                return add(m, s);
              },
              -1, 1, 118) < 1e-6);
  CHECK(fd_op({2, 3}, [](const Var& x) { return concat({x, scale(x, 2.0)}, 1); }, -1, 1,
              119) < 1e-6);
  CHECK(fd_op({2, 3}, [](const Var& x) { return div_v(Var::constant(Tensor::ones({2, 3})), x); },
              0.5, 1.5, 120) < 1e-6);

  // binary ops with two independent params
  {
    Rng rng(121);
    ParamStore ps;
    ps.add("a", rand_tensor({2, 3}, rng));
    ps.add("b", rand_tensor({3}, rng, 0.5, 1.5));
    Var w = Var::constant(rand_tensor({2, 3}, rng));
    auto fn = [&]() {
      Var a = ps.get("a"), b = ps.get("b");
      Var mix = add(mul(a, b), div_v(a, b));
      return sum_all(mul(mix, w));
    };
    CHECK(grad_check(fn, ps, 1e-5) < 1e-6);
  }
  // matmul with batch broadcast
  {
    Rng rng(122);
    ParamStore ps;
    ps.add("a", rand_tensor({2, 3, 4}, rng));
    ps.add("b", rand_tensor({4, 2}, rng));
    Var w = Var::constant(rand_tensor({2, 3, 2}, rng));
    auto fn = [&]() { return sum_all(mul(matmul(ps.get("a"), ps.get("b")), w)); };
    CHECK(grad_check(fn, ps, 1e-5) < 1e-6);
  }
  // conv2d including stride and padding
  {
    Rng rng(123);
    ParamStore ps;
    ps.add("x", rand_tensor({2, 5, 5}, rng));
    ps.add("w", rand_tensor({3, 2, 3, 3}, rng));
    ps.add("b", rand_tensor({3}, rng));
    Var w = Var::constant(rand_tensor({3, 4, 4}, rng));
    auto fn = [&]() {
      return sum_all(mul(conv2d(ps.get("x"), ps.get("w"), ps.get("b"), 2, 2), w));
    };
    CHECK(grad_check(fn, ps, 1e-5) < 1e-6);
  }
  // gather with repeated indices (scatter-add path)
  {
    Rng rng(124);
    ParamStore ps;
    ps.add("x", rand_tensor({4}, rng));
    auto idx = std::make_shared<std::vector<std::size_t>>(std::vector<std::size_t>{0, 2, 2, 3, 1, 0});
    Var w = Var::constant(rand_tensor({6}, rng));
    auto fn = [&]() { return sum_all(mul(gather(ps.get("x"), {6}, idx), w)); };
    CHECK(grad_check(fn, ps, 1e-5) < 1e-6);
  }
}

TEST_CASE("backward: reshape/permute round-trips leave gradients intact") {
  Rng rng(19);
  ParamStore ps;
  Var x = ps.add("x", rand_tensor({2, 3, 4}, rng));
  Var w = Var::constant(rand_tensor({2, 3, 4}, rng));

  backward(sum_all(mul(x, w)));
  Tensor direct = x.grad();
  ps.zero_grad();
  Var round = permute(permute(reshape(reshape(x, {6, 4}), {2, 3, 4}), {2, 0, 1}), {1, 2, 0});
  backward(sum_all(mul(round, w)));
  for (std::size_t i = 0; i < direct.numel(); ++i) CHECK(x.grad()[i] == direct[i]);
}

TEST_CASE("no-grad guard: probes record nothing") {
  ParamStore ps;
  Var x = ps.add("x", Tensor::scalar(2.0));
  {
    NoGradGuard ng;
    CHECK_FALSE(grad_enabled());
    Var y = square(x);
    CHECK_FALSE(y.requires_grad());
    backward(y);  // harmless: nothing reachable
  }
  CHECK(grad_enabled());
  CHECK(x.grad().item() == 0.0);
}

TEST_CASE("grad_check: quadratic toy is near machine precision") {
  ParamStore ps;
  ps.add("x", Tensor({3}, {0.5, -1.0, 2.0}));
  auto fn = [&]() {
    Var x = ps.get("x");
    return sum_all(square(x));
  };
  CHECK(grad_check(fn, ps, 1e-5) < 1e-9);
}

TEST_CASE("determinism: one pipeline, two runs, identical bits") {
  auto run = [](std::uint64_t seed) {
    Rng rng(seed);
    ParamStore ps;
    Var a = ps.add("a", init_normal({3, 3}, 0.0, 0.5, rng));
    Var b = ps.add("b", init_trunc_normal({3, 3}, 0.3, rng));
    Var y = softmax(matmul(gelu(a), vtanh(b)), 1);
    backward(sum_all(mul(y, y)));
    std::vector<double> out;
    for (std::size_t i = 0; i < 9; ++i) out.push_back(y.val()[i]);
    for (std::size_t i = 0; i < 9; ++i) out.push_back(a.grad()[i]);
    return out;
  };
  auto r1 = run(42), r2 = run(42);
  for (std::size_t i = 0; i < r1.size(); ++i) CHECK(r1[i] == r2[i]);
}

TEST_CASE("param store: names, counting, strict checkpoint round-trip") {
  Rng rng(23);
  ParamStore ps;
  ps.add("m.w", rand_tensor({2, 3}, rng));
  ps.add("m.b", rand_tensor({3}, rng));
  ps.add("a.scalar", Tensor::scalar(-0.75));
  CHECK(ps.scalar_count() == 10);
  CHECK_THROWS_AS(ps.add("m.w", Tensor::zeros({1})), std::invalid_argument);
  CHECK_THROWS_AS(ps.get("missing"), std::invalid_argument);

  const std::string path = "ckpt_roundtrip.bin";
  ps.save(path);

  // same names, different values: load must restore bit-identical data
  Rng rng2(99);
  ParamStore ps2;
  ps2.add("m.w", rand_tensor({2, 3}, rng2));
  ps2.add("m.b", rand_tensor({3}, rng2));
  ps2.add("a.scalar", Tensor::scalar(4.0));
  ps2.load(path);
  for (const auto& [name, v] : ps.items()) {
    const Tensor& got = ps2.get(name).val();
    for (std::size_t i = 0; i < v.numel(); ++i) CHECK(got[i] == v.val()[i]);
  }

  // a store with an extra param must notice the file lacks it
  ParamStore ps3;
  ps3.add("m.w", Tensor::zeros({2, 3}));
  ps3.add("m.b", Tensor::zeros({3}));
  ps3.add("a.scalar", Tensor::scalar(0.0));
  ps3.add("extra", Tensor::zeros({1}));
  CHECK_THROWS_AS(ps3.load(path), std::runtime_error);

  // shape disagreement is rejected
  ParamStore ps4;
  ps4.add("m.w", Tensor::zeros({3, 2}));
  ps4.add("m.b", Tensor::zeros({3}));
  ps4.add("a.scalar", Tensor::scalar(0.0));
  CHECK_THROWS_AS(ps4.load(path), std::runtime_error);

  // wrong magic is rejected
  {
    std::FILE* f = std::fopen("ckpt_badmagic.bin", "wb");
    std::fwrite("NOPE", 1, 4, f);
    std::fclose(f);
  }
  ParamStore ps5;
  ps5.add("m.w", Tensor::zeros({2, 3}));
  CHECK_THROWS_AS(ps5.load("ckpt_badmagic.bin"), std::runtime_error);

  std::remove(path.c_str());
  std::remove("ckpt_badmagic.bin");
}
