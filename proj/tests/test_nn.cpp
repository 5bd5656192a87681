#include <doctest.h>

#include <vector>

#include "fd_check.hpp"
#include "replab/nn.hpp"

using namespace replab;
using replab::testutil::fd_max_rel_err;
using replab::testutil::random_mat;
using Md = Mat<double>;

TEST_SUITE_BEGIN("nn");

TEST_CASE("mlp end-to-end gradients match central differences") {
  Rng rng(21);
  Mlp<double> mlp;
  mlp.init("mlp", 3, 8, 2, 3, rng);
  Md x0 = random_mat(3, 4, rng);
  Md y0 = random_mat(2, 4, rng);
  auto params = collect_params<double>(mlp);

  Tape<double> t;
  Binding<double> bind;
  int out = mlp.fwd(t, bind, t.constant(x0), true);
  int diff = t.sub(out, t.constant(y0));
  int loss = t.mean_all(t.mul(diff, diff));
  t.backward(loss);
  auto grads = bind.grads(t, params);

  std::vector<Md> x0s;
  for (auto* p : params) x0s.push_back(p->v);
  auto f = [&](const std::vector<Md>& xs) {
    Mlp<double> m2 = mlp;
    auto p2 = collect_params<double>(m2);
    for (size_t i = 0; i < p2.size(); ++i) p2[i]->v = xs[i];
    Tape<double> tt;
    Binding<double> b2;
    int o = m2.fwd(tt, b2, tt.constant(x0), false);
    int d = tt.sub(o, tt.constant(y0));
    return tt.val(tt.mean_all(tt.mul(d, d)))(0, 0);
  };
  CHECK(fd_max_rel_err(f, x0s, grads) < 1e-6);
}

TEST_CASE("encoder conv chain shape arithmetic") {
  Rng rng(22);
  EncoderSpec desk;  // 64x64x9, filters 8, kernels 4/3/3/3, strides 4/2/1/1
  Encoder<double> enc;
  enc.init("enc", desk, rng);
  CHECK(enc.flat_dim == 8 * 3 * 3);  // 64 -> 16 -> 7 -> 5 -> 3
  CHECK(enc.out_dim() == 16);
  Md x = random_mat(desk.in_h * desk.in_w * desk.in_c, 2, rng, 0, 1);
  Md z = enc.apply(x);
  CHECK(z.rows() == 16);
  CHECK(z.cols() == 2);

  EncoderSpec paper;
  paper.in_h = paper.in_w = 84;
  paper.in_c = 9;
  paper.filters = 32;
  paper.latent = 50;
  paper.kernels = {3, 3, 3, 3};
  paper.strides = {2, 1, 1, 1};
  Encoder<double> enc2;
  enc2.init("enc2", paper, rng);
  CHECK(enc2.flat_dim == 32 * 35 * 35);  // 84 -> 41 -> 39 -> 37 -> 35
  CHECK(enc2.out_dim() == 50);
}

TEST_CASE("encoder is deterministic and zero head gives zero latent") {
  Rng rng(23);
  EncoderSpec s;
  s.in_h = s.in_w = 44;  // minimal size for the default chain
  Encoder<double> enc;
  enc.init("enc", s, rng);
  Md x = random_mat(s.in_h * s.in_w * s.in_c, 3, rng, 0, 1);
  CHECK(enc.apply(x) == enc.apply(x));
  enc.head.w.v.setZero();
  enc.head.b.v.setZero();
  CHECK(enc.apply(x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("encoder gradients match central differences on a small chain") {
  Rng rng(24);
  EncoderSpec s;
  s.in_h = s.in_w = 12;
  s.in_c = 2;
  s.filters = 2;
  s.latent = 3;
  s.kernels = {3, 3};
  s.strides = {2, 1};
  Encoder<double> enc;
  enc.init("enc", s, rng);
  Md x0 = random_mat(s.in_h * s.in_w * s.in_c, 2, rng, 0, 1);
  auto params = collect_params<double>(enc);

  Tape<double> t;
  Binding<double> bind;
  int z = enc.fwd(t, bind, t.constant(x0), true);
  int loss = t.mean_all(t.mul(z, z));
  t.backward(loss);
  auto grads = bind.grads(t, params);

  std::vector<Md> x0s;
  for (auto* p : params) x0s.push_back(p->v);
  auto f = [&](const std::vector<Md>& xs) {
    Encoder<double> e2 = enc;
    auto p2 = collect_params<double>(e2);
    for (size_t i = 0; i < p2.size(); ++i) p2[i]->v = xs[i];
    Md zz = e2.apply(x0);
    return zz.array().square().mean();
  };
  CHECK(fd_max_rel_err(f, x0s, grads) < 1e-6);
}

TEST_CASE("decoder deconv chain reaches the configured output size") {
  Rng rng(25);
  DecoderSpec desk;  // 5 -> 7 -> 15 -> 31 -> 64
  Decoder<double> dec;
  dec.init("dec", desk, rng);
  Md z = random_mat(desk.latent, 2, rng);
  Tape<double> t;
  Binding<double> bind;
  int y = dec.fwd(t, bind, t.constant(z), false);
  CHECK(t.val(y).rows() == 64 * 64 * 9);

  DecoderSpec paper;
  paper.latent = 50;
  paper.filters = 32;
  paper.out_h = paper.out_w = 84;
  paper.out_c = 9;
  paper.seed_h = paper.seed_w = 35;
  paper.kernels = {3, 3, 3, 4};
  paper.strides = {1, 1, 1, 2};  // 35 -> 37 -> 39 -> 41 -> 84
  Decoder<double> dec2;
  dec2.init("dec2", paper, rng);
  CHECK(dec2.deconvs.back().geom.h_out() == 84);

  DecoderSpec bad = desk;
  bad.out_h = 65;
  Decoder<double> dec3;
  CHECK_THROWS_AS(dec3.init("dec3", bad, rng), ValidationError);
}

TEST_CASE("adam single step matches hand arithmetic") {
  Param<double> p{"p", Md::Constant(1, 1, 1.0)};
  Adam<double> opt({&p}, 0.1);
  Md g = Md::Constant(1, 1, 0.5);
  opt.step({g});
  // m=0.05, v=2.5e-4, mhat=0.5, vhat=0.25 -> p = 1 - 0.1*0.5/(0.5+1e-8)
  CHECK(p.v(0, 0) == doctest::Approx(1.0 - 0.1 * 0.5 / (0.5 + 1e-8))
                         .epsilon(1e-12));
  opt.step({g});
  CHECK(opt.steps() == 2);
  CHECK(p.v(0, 0) < 0.9);  // keeps moving toward the gradient direction
}

TEST_CASE("ema_update endpoints and composition") {
  Param<double> t1{"t", Md::Zero(2, 2)}, o1{"o", Md::Constant(2, 2, 1.0)};
  ema_update<double>({&t1}, {&o1}, 0.0);
  CHECK(t1.v.isZero());
  ema_update<double>({&t1}, {&o1}, 1.0);
  CHECK(t1.v == o1.v);

  Param<double> t2{"t", Md::Zero(1, 1)}, o2{"o", Md::Constant(1, 1, 1.0)};
  ema_update<double>({&t2}, {&o2}, 0.005);
  CHECK(t2.v(0, 0) == doctest::Approx(0.005));

  // two applications equal the closed form t(1-tau)^2 + o(1-(1-tau)^2)
  double tau = 0.25, tv = 0.3, ov = -0.7;
  Param<double> t3{"t", Md::Constant(1, 1, tv)}, o3{"o", Md::Constant(1, 1, ov)};
  ema_update<double>({&t3}, {&o3}, tau);
  ema_update<double>({&t3}, {&o3}, tau);
  double c = (1 - tau) * (1 - tau);
  CHECK(t3.v(0, 0) == doctest::Approx(tv * c + ov * (1 - c)).epsilon(1e-12));

  Param<double> bad{"b", Md::Zero(3, 1)};
  CHECK_THROWS_AS(ema_update<double>({&bad}, {&o3}, 0.5), ValidationError);
}

TEST_CASE("binding returns zero grads for untouched params") {
  Rng rng(26);
  AffineLayer<double> used, unused;
  used.init("u", 2, 2, rng);
  unused.init("n", 2, 2, rng);
  Tape<double> t;
  Binding<double> bind;
  Md x0 = random_mat(2, 3, rng);
  int y = used.fwd(t, bind, t.constant(x0), true);
  t.backward(t.mean_all(y));
  auto params = collect_params<double>(used, unused);
  auto gs = bind.grads(t, params);
  CHECK(gs[0].cwiseAbs().sum() > 0);
  CHECK(gs[2].isZero());
  CHECK(gs[3].isZero());
}

TEST_SUITE_END();
