#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "replab/autodiff.hpp"
#include "replab/rng.hpp"

namespace replab {

template <typename T>
struct Param {
  std::string name;
  Mat<T> v;
};

// Records which parameters were placed on a tape so their gradients can be
// collected after backward().
template <typename T>
struct Binding {
  std::vector<std::pair<Param<T>*, int>> entries;

  int use(Tape<T>& t, Param<T>& p, bool trainable) {
    int id = trainable ? t.leaf(p.v) : t.constant(p.v);
    if (trainable) entries.push_back({&p, id});
    return id;
  }

  // Gradient per param in `order`; zero matrix if the param was absent or
  // untouched by the loss.
  std::vector<Mat<T>> grads(const Tape<T>& t,
                            const std::vector<Param<T>*>& order) const {
    std::vector<Mat<T>> gs;
    gs.reserve(order.size());
    for (Param<T>* p : order) {
      Mat<T> g = Mat<T>::Zero(p->v.rows(), p->v.cols());
      for (const auto& [q, id] : entries) {
        if (q == p && t.has_grad(id)) g += t.grad(id);
      }
      gs.push_back(std::move(g));
    }
    return gs;
  }
};

template <typename T>
class Adam {
 public:
  Adam() = default;
  Adam(std::vector<Param<T>*> params, T lr, T beta1 = T(0.9),
       T beta2 = T(0.999), T eps = T(1e-8))
      : params_(std::move(params)), lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (auto* p : params_) {
      m_.push_back(Mat<T>::Zero(p->v.rows(), p->v.cols()));
      v_.push_back(Mat<T>::Zero(p->v.rows(), p->v.cols()));
    }
  }

  const std::vector<Param<T>*>& params() const { return params_; }
  int64_t steps() const { return t_; }

  void step(const std::vector<Mat<T>>& grads) {
    if (grads.size() != params_.size())
      throw ValidationError("adam: gradient count mismatch");
    ++t_;
    T c1 = T(1) - std::pow(b1_, static_cast<T>(t_));
    T c2 = T(1) - std::pow(b2_, static_cast<T>(t_));
    for (size_t i = 0; i < params_.size(); ++i) {
      m_[i] = b1_ * m_[i] + (T(1) - b1_) * grads[i];
      v_[i] = (b2_ * v_[i].array() + (T(1) - b2_) * grads[i].array().square())
                  .matrix();
      auto mhat = m_[i].array() / c1;
      auto vhat = v_[i].array() / c2;
      params_[i]->v.array() -= lr_ * mhat / (vhat.sqrt() + eps_);
    }
  }

  // checkpoint payload: pairs of (m, v) in parameter order plus step count
  std::vector<Mat<T>>& moments1() { return m_; }
  std::vector<Mat<T>>& moments2() { return v_; }
  void set_steps(int64_t t) { t_ = t; }
  T lr() const { return lr_; }

 private:
  std::vector<Param<T>*> params_;
  T lr_ = T(1e-3), b1_ = T(0.9), b2_ = T(0.999), eps_ = T(1e-8);
  int64_t t_ = 0;
  std::vector<Mat<T>> m_, v_;
};

template <typename T>
void ema_update(std::vector<Param<T>*> target,
                const std::vector<Param<T>*>& online, T tau) {
  if (target.size() != online.size())
    throw ValidationError("ema_update: parameter count mismatch");
  for (size_t i = 0; i < target.size(); ++i) {
    if (target[i]->v.rows() != online[i]->v.rows() ||
        target[i]->v.cols() != online[i]->v.cols())
      throw ValidationError("ema_update: shape mismatch at " +
                            target[i]->name);
    target[i]->v = (T(1) - tau) * target[i]->v + tau * online[i]->v;
  }
}

template <typename T>
void copy_params(std::vector<Param<T>*> target,
                 const std::vector<Param<T>*>& online) {
  ema_update(target, online, T(1));
}

inline double uniform_init_bound(int fan_in) {
  return 1.0 / std::sqrt(static_cast<double>(fan_in));
}

template <typename T>
void init_uniform(Mat<T>& m, Rng& rng, double bound) {
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      m(i, j) = static_cast<T>(rng.uniform(-bound, bound));
}

template <typename T>
struct AffineLayer {
  Param<T> w, b;

  void init(const std::string& name, int in, int out, Rng& rng) {
    w.name = name + "/w";
    b.name = name + "/b";
    w.v.resize(out, in);
    b.v = Mat<T>::Zero(out, 1);
    double k = uniform_init_bound(in);
    init_uniform(w.v, rng, k);
    init_uniform(b.v, rng, k);
  }

  int fwd(Tape<T>& t, Binding<T>& bind, int x, bool trainable) {
    int wi = bind.use(t, w, trainable);
    int bi = bind.use(t, b, trainable);
    return t.add_colvec(t.matmul(wi, x), bi);
  }

  void collect(std::vector<Param<T>*>& out) {
    out.push_back(&w);
    out.push_back(&b);
  }
};

// n_layers affine maps with ReLU between them (n_layers - 1 hidden layers).
template <typename T>
struct Mlp {
  std::vector<AffineLayer<T>> layers;

  void init(const std::string& name, int in, int hidden, int out, int n_layers,
            Rng& rng) {
    if (n_layers < 1) throw ValidationError("mlp: need at least one layer");
    layers.resize(n_layers);
    for (int i = 0; i < n_layers; ++i) {
      int li = i == 0 ? in : hidden;
      int lo = i == n_layers - 1 ? out : hidden;
      layers[i].init(name + "/l" + std::to_string(i), li, lo, rng);
    }
  }

  int fwd(Tape<T>& t, Binding<T>& bind, int x, bool trainable) {
    int h = x;
    for (size_t i = 0; i < layers.size(); ++i) {
      h = layers[i].fwd(t, bind, h, trainable);
      if (i + 1 < layers.size()) h = t.relu(h);
    }
    return h;
  }

  void collect(std::vector<Param<T>*>& out) {
    for (auto& l : layers) l.collect(out);
  }
};

template <typename T>
struct ConvLayer {
  Param<T> w, b;
  ConvGeom geom;

  void init(const std::string& name, const ConvGeom& g, Rng& rng) {
    geom = g;
    w.name = name + "/w";
    b.name = name + "/b";
    w.v.resize(g.c_out, g.patch());
    b.v = Mat<T>::Zero(g.c_out, 1);
    double k = uniform_init_bound(g.patch());
    init_uniform(w.v, rng, k);
    init_uniform(b.v, rng, k);
  }

  int fwd(Tape<T>& t, Binding<T>& bind, int x, bool trainable) {
    int wi = bind.use(t, w, trainable);
    int bi = bind.use(t, b, trainable);
    return t.conv2d(x, wi, bi, geom);
  }

  void collect(std::vector<Param<T>*>& out) {
    out.push_back(&w);
    out.push_back(&b);
  }
};

template <typename T>
struct DeconvLayer {
  Param<T> w, b;
  DeconvGeom geom;

  void init(const std::string& name, const DeconvGeom& g, Rng& rng) {
    geom = g;
    w.name = name + "/w";
    b.name = name + "/b";
    w.v.resize(g.c_in, g.patch());
    b.v = Mat<T>::Zero(g.c_out, 1);
    double k = uniform_init_bound(g.c_in * g.kh * g.kw);
    init_uniform(w.v, rng, k);
    init_uniform(b.v, rng, k);
  }

  int fwd(Tape<T>& t, Binding<T>& bind, int x, bool trainable) {
    int wi = bind.use(t, w, trainable);
    int bi = bind.use(t, b, trainable);
    return t.conv2d_transpose(x, wi, bi, geom);
  }

  void collect(std::vector<Param<T>*>& out) {
    out.push_back(&w);
    out.push_back(&b);
  }
};

struct EncoderSpec {
  int in_h = 64;
  int in_w = 64;
  int in_c = 9;  // stack * 3
  int filters = 8;
  int latent = 16;
  // kernel/stride per conv layer
  std::vector<int> kernels = {4, 3, 3, 3};
  std::vector<int> strides = {4, 2, 1, 1};
};

// Conv stack + final affine map to the latent vector. Input pixels are
// expected in [0,1].
template <typename T>
struct Encoder {
  std::vector<ConvLayer<T>> convs;
  AffineLayer<T> head;
  EncoderSpec spec;
  int flat_dim = 0;

  void init(const std::string& name, const EncoderSpec& s, Rng& rng) {
    spec = s;
    if (s.kernels.size() != s.strides.size())
      throw ValidationError("encoder: kernel/stride count mismatch");
    convs.resize(s.kernels.size());
    int h = s.in_h, w = s.in_w, c = s.in_c;
    for (size_t i = 0; i < convs.size(); ++i) {
      ConvGeom g{c, h, w, s.filters, s.kernels[i], s.kernels[i],
                 s.strides[i], s.strides[i]};
      if (g.h_out() < 1 || g.w_out() < 1)
        throw ValidationError("encoder: conv output collapsed to zero");
      convs[i].init(name + "/conv" + std::to_string(i), g, rng);
      h = g.h_out();
      w = g.w_out();
      c = s.filters;
    }
    flat_dim = c * h * w;
    head.init(name + "/latent", flat_dim, s.latent, rng);
  }

  int fwd(Tape<T>& t, Binding<T>& bind, int x, bool trainable) {
    int h = x;
    for (auto& cl : convs) h = t.relu(cl.fwd(t, bind, h, trainable));
    return head.fwd(t, bind, h, trainable);
  }

  // value-only forward on a throwaway tape
  Mat<T> apply(const Mat<T>& x) {
    Tape<T> t;
    Binding<T> bind;
    return t.val(fwd(t, bind, t.constant(x), false));
  }

  void collect(std::vector<Param<T>*>& out) {
    for (auto& cl : convs) cl.collect(out);
    head.collect(out);
  }

  int out_dim() const { return spec.latent; }
};

struct DecoderSpec {
  int latent = 16;
  int filters = 8;
  int out_h = 64;
  int out_w = 64;
  int out_c = 9;
  int seed_h = 5;
  int seed_w = 5;
  std::vector<int> kernels = {3, 3, 3, 4};
  std::vector<int> strides = {1, 2, 2, 2};
};

template <typename T>
struct Decoder {
  AffineLayer<T> head;
  std::vector<DeconvLayer<T>> deconvs;
  DecoderSpec spec;

  void init(const std::string& name, const DecoderSpec& s, Rng& rng) {
    spec = s;
    head.init(name + "/seed", s.latent, s.filters * s.seed_h * s.seed_w, rng);
    deconvs.resize(s.kernels.size());
    int h = s.seed_h, w = s.seed_w;
    for (size_t i = 0; i < deconvs.size(); ++i) {
      bool last = i + 1 == deconvs.size();
      DeconvGeom g{s.filters, h, w, last ? s.out_c : s.filters,
                   s.kernels[i], s.kernels[i], s.strides[i], s.strides[i]};
      deconvs[i].init(name + "/deconv" + std::to_string(i), g, rng);
      h = g.h_out();
      w = g.w_out();
    }
    if (h != s.out_h || w != s.out_w)
      throw ValidationError("decoder: deconv chain does not reach output size");
  }

  int fwd(Tape<T>& t, Binding<T>& bind, int z, bool trainable) {
    int h = t.relu(head.fwd(t, bind, z, trainable));
    for (size_t i = 0; i < deconvs.size(); ++i) {
      h = deconvs[i].fwd(t, bind, h, trainable);
      if (i + 1 < deconvs.size()) h = t.relu(h);
    }
    return h;
  }

  void collect(std::vector<Param<T>*>& out) {
    head.collect(out);
    for (auto& d : deconvs) d.collect(out);
  }
};

template <typename T>
std::vector<Param<T>*> collect_params(auto&... modules) {
  std::vector<Param<T>*> out;
  (modules.collect(out), ...);
  return out;
}

}  // namespace replab
