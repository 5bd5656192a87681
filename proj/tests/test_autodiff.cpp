#include <doctest.h>

#include <cmath>
#include <vector>

#include "fd_check.hpp"
#include "replab/autodiff.hpp"
#include "replab/rng.hpp"

using namespace replab;
using replab::testutil::fd_max_rel_err;
using replab::testutil::random_mat;
using Md = Mat<double>;

TEST_SUITE_BEGIN("autodiff");

namespace {

// one scalar-valued graph exercising most elementwise ops
int mixed_graph(Tape<double>& t, int a, int b) {
  int x = t.mul(t.tanh_(a), t.softplus(b));
  int y = t.add(t.relu(t.sub(a, b)), t.exp_(t.scale(b, 0.3)));
  int z = t.add(x, t.abs_(y));
  int w = t.div_elem(z, t.affine(t.mul(z, z), 1.0, 2.0));
  int lse = t.logsumexp_rows(w);
  return t.mean_all(t.add(t.sqrt_(t.mul(lse, lse), 1e-10), lse));
}

}  // namespace

TEST_CASE("elementwise composite matches central differences") {
  Rng rng(11);
  Md a0 = random_mat(3, 4, rng), b0 = random_mat(3, 4, rng);
  Tape<double> t;
  int a = t.leaf(a0), b = t.leaf(b0);
  int last = mixed_graph(t, a, b);
  t.backward(last);
  auto f = [](const std::vector<Md>& xs) {
    Tape<double> tt;
    int aa = tt.leaf(xs[0]), bb = tt.leaf(xs[1]);
    return tt.val(mixed_graph(tt, aa, bb))(0, 0);
  };
  CHECK(t.val(last)(0, 0) == doctest::Approx(f({a0, b0})).epsilon(1e-14));
  double err = fd_max_rel_err(f, {a0, b0}, {t.grad(a), t.grad(b)});
  CHECK(err < 1e-6);
}

TEST_CASE("matmul family and reductions match central differences") {
  Rng rng(12);
  Md a0 = random_mat(3, 5, rng), b0 = random_mat(3, 4, rng),
     v0 = random_mat(5, 1, rng);
  auto build = [](Tape<double>& t, int a, int b, int v) {
    int m = t.matmul_tn(a, b);          // 5x4
    int s = t.add_colvec(m, v);         // bias over columns
    int r = t.rowwise_sum(t.min_elem(s, t.scale(s, 0.5)));
    int c = t.colwise_sum(t.mul(m, m));
    int d = t.diag_as_col(m);
    return t.add(t.add(t.mean_all(r), t.mean_all(c)), t.mean_all(d));
  };
  Tape<double> t;
  int a = t.leaf(a0), b = t.leaf(b0), v = t.leaf(v0);
  int loss = build(t, a, b, v);
  t.backward(loss);
  auto f = [&](const std::vector<Md>& xs) {
    Tape<double> tt;
    int aa = tt.leaf(xs[0]), bb = tt.leaf(xs[1]), vv = tt.leaf(xs[2]);
    return tt.val(build(tt, aa, bb, vv))(0, 0);
  };
  double err = fd_max_rel_err(f, {a0, b0, v0}, {t.grad(a), t.grad(b), t.grad(v)});
  CHECK(err < 1e-6);
}

TEST_CASE("slice/vcat/gather/scalar-node ops match central differences") {
  Rng rng(13);
  Md a0 = random_mat(4, 3, rng), b0 = random_mat(2, 3, rng),
     s0 = random_mat(1, 1, rng);
  std::vector<int> idx = {2, 0, 0, 1};
  auto build = [&idx](Tape<double>& t, int a, int b, int s) {
    int v = t.vcat(a, b);                      // 6x3
    int top = t.slice_rows(v, 1, 3);           // 3x3
    int g = t.gather_cols(top, idx);           // 3x4
    int sc = t.mul_scalar_node(g, t.exp_(s));  // scalar node use
    return t.mean_all(t.mul(sc, sc));
  };
  Tape<double> t;
  int a = t.leaf(a0), b = t.leaf(b0), s = t.leaf(s0);
  t.backward(build(t, a, b, s));
  auto f = [&](const std::vector<Md>& xs) {
    Tape<double> tt;
    int aa = tt.leaf(xs[0]), bb = tt.leaf(xs[1]), ss = tt.leaf(xs[2]);
    return tt.val(build(tt, aa, bb, ss))(0, 0);
  };
  double err =
      fd_max_rel_err(f, {a0, b0, s0}, {t.grad(a), t.grad(b), t.grad(s)});
  CHECK(err < 1e-6);
}

TEST_CASE("stopgrad blocks and constants never accumulate") {
  Md x0(2, 2);
  x0 << 1, 2, 3, 4;
  Tape<double> t;
  int x = t.leaf(x0);
  int c = t.constant(x0);
  int y = t.add(t.mul(t.stopgrad(x), x), c);
  int loss = t.sum_all(y);
  t.backward(loss);
  // d/dx [sg(x)*x + c] = sg(x) = x0
  CHECK(t.grad(x) == x0);
  CHECK_FALSE(t.has_grad(c));
}

TEST_CASE("logsumexp_rows equals naive form and is shift stable") {
  Rng rng(14);
  Md a0 = random_mat(4, 6, rng, -3, 3);
  Tape<double> t;
  int l = t.logsumexp_rows(t.constant(a0));
  for (int i = 0; i < 4; ++i) {
    double naive = std::log(a0.row(i).array().exp().sum());
    CHECK(t.val(l)(i, 0) == doctest::Approx(naive).epsilon(1e-12));
  }
  Md big = a0.array() + 500.0;  // overflows naive exp
  Tape<double> t2;
  int l2 = t2.logsumexp_rows(t2.constant(big));
  for (int i = 0; i < 4; ++i)
    CHECK(t2.val(l2)(i, 0) == doctest::Approx(t.val(l)(i, 0) + 500.0));
}

namespace {

// direct convolution oracle
Md naive_conv(const Md& x, const Md& w, const Md& b, const ConvGeom& g) {
  int oh = g.h_out(), ow = g.w_out();
  Md out(static_cast<Eigen::Index>(g.out_size()), x.cols());
  for (int bb = 0; bb < x.cols(); ++bb)
    for (int f = 0; f < g.c_out; ++f)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          double acc = b(f, 0);
          for (int c = 0; c < g.c_in; ++c)
            for (int ky = 0; ky < g.kh; ++ky)
              for (int kx = 0; kx < g.kw; ++kx)
                acc += w(f, (c * g.kh + ky) * g.kw + kx) *
                       x((c * g.h_in + oy * g.sh + ky) * g.w_in + ox * g.sw + kx,
                         bb);
          out((f * oh + oy) * ow + ox, bb) = acc;
        }
  return out;
}

}  // namespace

TEST_CASE("conv2d value matches the direct oracle") {
  Rng rng(15);
  ConvGeom g{2, 6, 7, 3, 3, 2, 2, 1};
  Md x0 = random_mat(g.in_size(), 2, rng);
  Md w0 = random_mat(g.c_out, g.patch(), rng);
  Md b0 = random_mat(g.c_out, 1, rng);
  Tape<double> t;
  int y = t.conv2d(t.constant(x0), t.constant(w0), t.constant(b0), g);
  Md expect = naive_conv(x0, w0, b0, g);
  CHECK((t.val(y) - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("conv2d gradients match central differences") {
  Rng rng(16);
  ConvGeom g{2, 5, 5, 2, 3, 3, 2, 2};
  Md x0 = random_mat(g.in_size(), 3, rng);
  Md w0 = random_mat(g.c_out, g.patch(), rng);
  Md b0 = random_mat(g.c_out, 1, rng);
  auto build = [&g](Tape<double>& t, int x, int w, int b) {
    int y = t.conv2d(x, w, b, g);
    return t.mean_all(t.mul(y, y));
  };
  Tape<double> t;
  int x = t.leaf(x0), w = t.leaf(w0), b = t.leaf(b0);
  t.backward(build(t, x, w, b));
  auto f = [&](const std::vector<Md>& xs) {
    Tape<double> tt;
    int xx = tt.leaf(xs[0]), ww = tt.leaf(xs[1]), bb = tt.leaf(xs[2]);
    return tt.val(build(tt, xx, ww, bb))(0, 0);
  };
  double err =
      fd_max_rel_err(f, {x0, w0, b0}, {t.grad(x), t.grad(w), t.grad(b)});
  CHECK(err < 1e-6);
}

TEST_CASE("conv2d_transpose is the linear adjoint of conv2d") {
  Rng rng(17);
  DeconvGeom d{3, 4, 4, 2, 3, 3, 2, 2};
  ConvGeom g{2, d.h_out(), d.w_out(), 3, 3, 3, 2, 2};
  Md w0 = random_mat(d.c_in, d.patch(), rng);
  Md zero_b_up = Md::Zero(d.c_out, 1);
  Md zero_b_dn = Md::Zero(g.c_out, 1);
  // <conv(y), x> == <y, conv_T(x)> for all x, y when biases are zero
  Md x0 = random_mat(d.in_size(), 1, rng);
  Md y0 = random_mat(d.out_size(), 1, rng);
  Tape<double> t;
  int up = t.conv2d_transpose(t.constant(x0), t.constant(w0),
                              t.constant(zero_b_up), d);
  int dn = t.conv2d(t.constant(y0), t.constant(w0), t.constant(zero_b_dn), g);
  double lhs = (t.val(up).transpose() * y0)(0, 0);
  double rhs = (t.val(dn).transpose() * x0)(0, 0);
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("conv2d_transpose gradients match central differences") {
  Rng rng(18);
  DeconvGeom d{2, 3, 3, 2, 3, 3, 2, 2};
  Md x0 = random_mat(d.in_size(), 2, rng);
  Md w0 = random_mat(d.c_in, d.patch(), rng);
  Md b0 = random_mat(d.c_out, 1, rng);
  auto build = [&d](Tape<double>& t, int x, int w, int b) {
    int y = t.conv2d_transpose(x, w, b, d);
    return t.mean_all(t.mul(y, t.tanh_(y)));
  };
  Tape<double> t;
  int x = t.leaf(x0), w = t.leaf(w0), b = t.leaf(b0);
  t.backward(build(t, x, w, b));
  auto f = [&](const std::vector<Md>& xs) {
    Tape<double> tt;
    int xx = tt.leaf(xs[0]), ww = tt.leaf(xs[1]), bb = tt.leaf(xs[2]);
    return tt.val(build(tt, xx, ww, bb))(0, 0);
  };
  double err =
      fd_max_rel_err(f, {x0, w0, b0}, {t.grad(x), t.grad(w), t.grad(b)});
  CHECK(err < 1e-6);
}

TEST_CASE("gradient accumulates over reused nodes") {
  Md x0(1, 1);
  x0 << 3.0;
  Tape<double> t;
  int x = t.leaf(x0);
  int y = t.mul(x, x);  // x^2, reuses x twice
  t.backward(t.sum_all(y));
  CHECK(t.grad(x)(0, 0) == doctest::Approx(6.0));
}

TEST_SUITE_END();
