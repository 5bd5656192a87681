#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <memory>
#include <vector>

#include "replab/common.hpp"

namespace replab {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

struct ConvGeom {
  int c_in = 0, h_in = 0, w_in = 0;
  int c_out = 0, kh = 0, kw = 0, sh = 1, sw = 1;
  int h_out() const { return (h_in - kh) / sh + 1; }
  int w_out() const { return (w_in - kw) / sw + 1; }
  int patch() const { return c_in * kh * kw; }
  int in_size() const { return c_in * h_in * w_in; }
  int out_size() const { return c_out * h_out() * w_out(); }
};

// Transposed convolution: output spatial size (h_in-1)*sh + kh.
struct DeconvGeom {
  int c_in = 0, h_in = 0, w_in = 0;
  int c_out = 0, kh = 0, kw = 0, sh = 1, sw = 1;
  int h_out() const { return (h_in - 1) * sh + kh; }
  int w_out() const { return (w_in - 1) * sw + kw; }
  int patch() const { return c_out * kh * kw; }
  int in_size() const { return c_in * h_in * w_in; }
  int out_size() const { return c_out * h_out() * w_out(); }
};

// Images are flattened column vectors, index (c*H + y)*W + x; batch =
// matrix columns. im2col lays the B samples' patch matrices side by side.
template <typename T>
Mat<T> im2col(const Mat<T>& x, const ConvGeom& g) {
  const int oh = g.h_out(), ow = g.w_out(), p = oh * ow;
  const int B = static_cast<int>(x.cols());
  Mat<T> col(g.patch(), static_cast<Eigen::Index>(p) * B);
  for (int b = 0; b < B; ++b) {
    const T* src = x.data() + static_cast<size_t>(b) * x.rows();
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        T* dst = col.data() +
                 (static_cast<size_t>(b) * p + static_cast<size_t>(oy) * ow + ox) *
                     col.rows();
        for (int c = 0; c < g.c_in; ++c) {
          for (int ky = 0; ky < g.kh; ++ky) {
            const T* row =
                src + (static_cast<size_t>(c) * g.h_in + oy * g.sh + ky) * g.w_in +
                ox * g.sw;
            for (int kx = 0; kx < g.kw; ++kx) *dst++ = row[kx];
          }
        }
      }
    }
  }
  return col;
}

template <typename T>
void col2im_add(Mat<T>& x, const Mat<T>& col, const ConvGeom& g) {
  const int oh = g.h_out(), ow = g.w_out(), p = oh * ow;
  const int B = static_cast<int>(x.cols());
  for (int b = 0; b < B; ++b) {
    T* dst0 = x.data() + static_cast<size_t>(b) * x.rows();
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        const T* src = col.data() +
                       (static_cast<size_t>(b) * p +
                        static_cast<size_t>(oy) * ow + ox) *
                           col.rows();
        for (int c = 0; c < g.c_in; ++c) {
          for (int ky = 0; ky < g.kh; ++ky) {
            T* row = dst0 +
                     (static_cast<size_t>(c) * g.h_in + oy * g.sh + ky) * g.w_in +
                     ox * g.sw;
            for (int kx = 0; kx < g.kw; ++kx) row[kx] += *src++;
          }
        }
      }
    }
  }
}

// Reverse-mode tape. Build ops forward, call backward(loss) once; gradients
// of leaf nodes are then available via grad(). Constants never receive
// gradients, which doubles as the stop-gradient mechanism.
template <typename T>
class Tape {
 public:
  using M = Mat<T>;
  using Arr = Eigen::Array<T, Eigen::Dynamic, Eigen::Dynamic>;

  int constant(M v) { return push(std::move(v), false, nullptr); }
  int leaf(M v) { return push(std::move(v), true, nullptr); }

  const M& val(int id) const { return nodes_[id].val; }
  const M& grad(int id) const { return nodes_[id].grad; }
  bool has_grad(int id) const { return nodes_[id].grad.size() != 0; }
  size_t size() const { return nodes_.size(); }

  int add(int a, int b) {
    check_same(a, b, "add");
    return push(val(a) + val(b), needs(a) || needs(b),
                [a, b](Tape& t, const M& g) {
                  t.accum(a, g);
                  t.accum(b, g);
                });
  }

  int sub(int a, int b) {
    check_same(a, b, "sub");
    return push(val(a) - val(b), needs(a) || needs(b),
                [a, b](Tape& t, const M& g) {
                  t.accum(a, g);
                  t.accum(b, -g);
                });
  }

  int mul(int a, int b) {
    check_same(a, b, "mul");
    return push(val(a).cwiseProduct(val(b)), needs(a) || needs(b),
                [a, b](Tape& t, const M& g) {
                  t.accum(a, g.cwiseProduct(t.val(b)));
                  t.accum(b, g.cwiseProduct(t.val(a)));
                });
  }

  int div_elem(int a, int b) {
    check_same(a, b, "div_elem");
    return push(val(a).cwiseQuotient(val(b)), needs(a) || needs(b),
                [a, b](Tape& t, const M& g) {
                  t.accum(a, g.cwiseQuotient(t.val(b)));
                  if (t.needs(b)) {
                    M gb = -g.cwiseProduct(t.val(a))
                                .cwiseQuotient(t.val(b).cwiseProduct(t.val(b)));
                    t.accum(b, gb);
                  }
                });
  }

  // alpha * a + beta, elementwise
  int affine(int a, T alpha, T beta) {
    return push((val(a).array() * alpha + beta).matrix(), needs(a),
                [a, alpha](Tape& t, const M& g) { t.accum(a, g * alpha); });
  }

  int scale(int a, T alpha) { return affine(a, alpha, T(0)); }

  // a * s where s is a 1x1 node
  int mul_scalar_node(int a, int s) {
    if (val(s).size() != 1) throw ValidationError("mul_scalar_node: s not 1x1");
    return push(val(a) * val(s)(0, 0), needs(a) || needs(s),
                [a, s](Tape& t, const M& g) {
                  t.accum(a, g * t.val(s)(0, 0));
                  if (t.needs(s)) {
                    M gs(1, 1);
                    gs(0, 0) = g.cwiseProduct(t.val(a)).sum();
                    t.accum(s, gs);
                  }
                });
  }

  int matmul(int a, int b) {
    if (val(a).cols() != val(b).rows())
      throw ValidationError("matmul: inner dims mismatch");
    return push(val(a) * val(b), needs(a) || needs(b),
                [a, b](Tape& t, const M& g) {
                  if (t.needs(a)) t.accum(a, g * t.val(b).transpose());
                  if (t.needs(b)) t.accum(b, t.val(a).transpose() * g);
                });
  }

  // a^T * b
  int matmul_tn(int a, int b) {
    if (val(a).rows() != val(b).rows())
      throw ValidationError("matmul_tn: inner dims mismatch");
    return push(val(a).transpose() * val(b), needs(a) || needs(b),
                [a, b](Tape& t, const M& g) {
                  if (t.needs(a)) t.accum(a, t.val(b) * g.transpose());
                  if (t.needs(b)) t.accum(b, t.val(a) * g);
                });
  }

  // broadcast-add a column vector across all columns
  int add_colvec(int a, int v) {
    if (val(v).cols() != 1 || val(v).rows() != val(a).rows())
      throw ValidationError("add_colvec: shape mismatch");
    return push(val(a).colwise() + Eigen::VectorX<T>(val(v).col(0)),
                needs(a) || needs(v), [a, v](Tape& t, const M& g) {
                  t.accum(a, g);
                  if (t.needs(v)) t.accum(v, g.rowwise().sum());
                });
  }

  int relu(int a) {
    return push(val(a).cwiseMax(T(0)), needs(a),
                [a](Tape& t, const M& g) {
                  if (!t.needs(a)) return;
                  M m = (t.val(a).array() > T(0))
                            .select(g.array(), Arr::Zero(g.rows(), g.cols()))
                            .matrix();
                  t.accum(a, m);
                });
  }

  int tanh_(int a) {
    int id = push(val(a).array().tanh().matrix(), needs(a), nullptr);
    nodes_[id].back = [a, id](Tape& t, const M& g) {
      const M& y = t.val(id);
      t.accum(a, (g.array() * (T(1) - y.array().square())).matrix());
    };
    return id;
  }

  int exp_(int a) {
    int id = push(val(a).array().exp().matrix(), needs(a), nullptr);
    nodes_[id].back = [a, id](Tape& t, const M& g) {
      t.accum(a, g.cwiseProduct(t.val(id)));
    };
    return id;
  }

  int log_(int a) {
    return push(val(a).array().log().matrix(), needs(a),
                [a](Tape& t, const M& g) {
                  t.accum(a, g.cwiseQuotient(t.val(a)));
                });
  }

  // numerically stable log(1 + e^x)
  int softplus(int a) {
    Arr x = val(a).array();
    M v = (x.max(T(0)) + ((-x.abs()).exp() + T(1)).log()).matrix();
    return push(std::move(v), needs(a), [a](Tape& t, const M& g) {
      if (!t.needs(a)) return;
      Arr x2 = t.val(a).array();
      Arr sig = T(1) / (T(1) + (-x2).exp());
      t.accum(a, (g.array() * sig).matrix());
    });
  }

  // sqrt(a + eps); callers pass eps > 0 when a can touch zero
  int sqrt_(int a, T eps = T(0)) {
    int id = push((val(a).array() + eps).sqrt().matrix(), needs(a), nullptr);
    nodes_[id].back = [a, id](Tape& t, const M& g) {
      t.accum(a, (g.array() / (T(2) * t.val(id).array())).matrix());
    };
    return id;
  }

  int abs_(int a) {
    return push(val(a).cwiseAbs(), needs(a), [a](Tape& t, const M& g) {
      if (!t.needs(a)) return;
      Arr s = t.val(a).array().sign();
      t.accum(a, (g.array() * s).matrix());
    });
  }

  int min_elem(int a, int b) {
    check_same(a, b, "min_elem");
    return push(val(a).cwiseMin(val(b)), needs(a) || needs(b),
                [a, b](Tape& t, const M& g) {
                  Arr take_a =
                      (t.val(a).array() <= t.val(b).array()).template cast<T>();
                  t.accum(a, (g.array() * take_a).matrix());
                  t.accum(b, (g.array() * (T(1) - take_a)).matrix());
                });
  }

  int sum_all(int a) {
    M v(1, 1);
    v(0, 0) = val(a).sum();
    return push(std::move(v), needs(a), [a](Tape& t, const M& g) {
      if (!t.needs(a)) return;
      t.accum(a, M::Constant(t.val(a).rows(), t.val(a).cols(), g(0, 0)));
    });
  }

  int mean_all(int a) {
    return scale(sum_all(a), T(1) / static_cast<T>(val(a).size()));
  }

  int colwise_sum(int a) {
    return push(val(a).colwise().sum(), needs(a),
                [a](Tape& t, const M& g) {
                  if (!t.needs(a)) return;
                  M ga = g.colwise().replicate(t.val(a).rows());
                  t.accum(a, ga);
                });
  }

  int rowwise_sum(int a) {
    return push(val(a).rowwise().sum(), needs(a),
                [a](Tape& t, const M& g) {
                  if (!t.needs(a)) return;
                  t.accum(a, g.rowwise().replicate(t.val(a).cols()));
                });
  }

  int logsumexp_rows(int a) {
    const M& x = val(a);
    M v(x.rows(), 1);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      T m = x.row(i).maxCoeff();
      v(i, 0) = m + std::log((x.row(i).array() - m).exp().sum());
    }
    int id = push(std::move(v), needs(a), nullptr);
    nodes_[id].back = [a, id](Tape& t, const M& g) {
      if (!t.needs(a)) return;
      const M& x2 = t.val(a);
      const M& l = t.val(id);
      M ga(x2.rows(), x2.cols());
      for (Eigen::Index i = 0; i < x2.rows(); ++i)
        ga.row(i) = g(i, 0) * (x2.row(i).array() - l(i, 0)).exp().matrix();
      t.accum(a, ga);
    };
    return id;
  }

  int diag_as_col(int a) {
    Eigen::Index k = std::min(val(a).rows(), val(a).cols());
    M v(k, 1);
    for (Eigen::Index i = 0; i < k; ++i) v(i, 0) = val(a)(i, i);
    return push(std::move(v), needs(a), [a, k](Tape& t, const M& g) {
      if (!t.needs(a)) return;
      M ga = M::Zero(t.val(a).rows(), t.val(a).cols());
      for (Eigen::Index i = 0; i < k; ++i) ga(i, i) = g(i, 0);
      t.accum(a, ga);
    });
  }

  int slice_rows(int a, int r0, int nrows) {
    if (r0 < 0 || r0 + nrows > val(a).rows())
      throw ValidationError("slice_rows out of range");
    return push(val(a).middleRows(r0, nrows), needs(a),
                [a, r0, nrows](Tape& t, const M& g) {
                  if (!t.needs(a)) return;
                  M ga = M::Zero(t.val(a).rows(), t.val(a).cols());
                  ga.middleRows(r0, nrows) = g;
                  t.accum(a, ga);
                });
  }

  int vcat(int a, int b) {
    if (val(a).cols() != val(b).cols())
      throw ValidationError("vcat: column mismatch");
    M v(val(a).rows() + val(b).rows(), val(a).cols());
    v << val(a), val(b);
    Eigen::Index ra = val(a).rows();
    return push(std::move(v), needs(a) || needs(b),
                [a, b, ra](Tape& t, const M& g) {
                  t.accum(a, g.topRows(ra));
                  t.accum(b, g.bottomRows(g.rows() - ra));
                });
  }

  int gather_cols(int a, std::vector<int> idx) {
    M v(val(a).rows(), static_cast<Eigen::Index>(idx.size()));
    for (size_t j = 0; j < idx.size(); ++j) v.col(j) = val(a).col(idx[j]);
    auto ip = std::make_shared<std::vector<int>>(std::move(idx));
    return push(std::move(v), needs(a), [a, ip](Tape& t, const M& g) {
      if (!t.needs(a)) return;
      M ga = M::Zero(t.val(a).rows(), t.val(a).cols());
      for (size_t j = 0; j < ip->size(); ++j) ga.col((*ip)[j]) += g.col(j);
      t.accum(a, ga);
    });
  }

  int stopgrad(int a) { return push(val(a), false, nullptr); }

  int conv2d(int x, int w, int b, const ConvGeom& g) {
    if (val(x).rows() != g.in_size())
      throw ValidationError("conv2d: input shape mismatch");
    if (val(w).rows() != g.c_out || val(w).cols() != g.patch())
      throw ValidationError("conv2d: weight shape mismatch");
    const int B = static_cast<int>(val(x).cols());
    const int p = g.h_out() * g.w_out();
    auto col = std::make_shared<M>(im2col(val(x), g));
    M y = val(w) * (*col);  // c_out x (p*B)
    y.colwise() += Eigen::VectorX<T>(val(b).col(0));
    M out(static_cast<Eigen::Index>(g.out_size()), B);
    for (int bb = 0; bb < B; ++bb)
      for (int f = 0; f < g.c_out; ++f)
        for (int q = 0; q < p; ++q)
          out(static_cast<Eigen::Index>(f) * p + q, bb) =
              y(f, static_cast<Eigen::Index>(bb) * p + q);
    bool need = needs(x) || needs(w) || needs(b);
    return push(std::move(out), need,
                [x, w, b, g, col, B, p](Tape& t, const M& gr) {
                  M gy(g.c_out, static_cast<Eigen::Index>(p) * B);
                  for (int bb = 0; bb < B; ++bb)
                    for (int f = 0; f < g.c_out; ++f)
                      for (int q = 0; q < p; ++q)
                        gy(f, static_cast<Eigen::Index>(bb) * p + q) =
                            gr(static_cast<Eigen::Index>(f) * p + q, bb);
                  if (t.needs(w)) t.accum(w, gy * col->transpose());
                  if (t.needs(b)) t.accum(b, gy.rowwise().sum());
                  if (t.needs(x)) {
                    M gcol = t.val(w).transpose() * gy;
                    M gx = M::Zero(t.val(x).rows(), t.val(x).cols());
                    col2im_add(gx, gcol, g);
                    t.accum(x, gx);
                  }
                });
  }

  int conv2d_transpose(int x, int w, int b, const DeconvGeom& d) {
    if (val(x).rows() != d.in_size())
      throw ValidationError("conv2d_transpose: input shape mismatch");
    if (val(w).rows() != d.c_in || val(w).cols() != d.patch())
      throw ValidationError("conv2d_transpose: weight shape mismatch");
    const int B = static_cast<int>(val(x).cols());
    const int p = d.h_in * d.w_in;
    // scatter geometry: a forward conv over the *output* grid
    ConvGeom cg{d.c_out, d.h_out(), d.w_out(), d.c_in, d.kh, d.kw, d.sh, d.sw};
    M xm(d.c_in, static_cast<Eigen::Index>(p) * B);
    for (int bb = 0; bb < B; ++bb)
      for (int c = 0; c < d.c_in; ++c)
        for (int q = 0; q < p; ++q)
          xm(c, static_cast<Eigen::Index>(bb) * p + q) =
              val(x)(static_cast<Eigen::Index>(c) * p + q, bb);
    M col = val(w).transpose() * xm;  // (c_out*kh*kw) x (p*B)
    M out = M::Zero(static_cast<Eigen::Index>(d.out_size()), B);
    col2im_add(out, col, cg);
    for (int bb = 0; bb < B; ++bb)
      for (int c = 0; c < d.c_out; ++c)
        out.col(bb).segment(static_cast<Eigen::Index>(c) * d.h_out() * d.w_out(),
                            d.h_out() * d.w_out())
            .array() += val(b)(c, 0);
    bool need = needs(x) || needs(w) || needs(b);
    return push(std::move(out), need,
                [x, w, b, d, cg, B, p](Tape& t, const M& gr) {
                  M gcol = im2col(gr, cg);  // (c_out*kh*kw) x (p*B)
                  if (t.needs(b)) {
                    M gb(d.c_out, 1);
                    const int ps = d.h_out() * d.w_out();
                    for (int c = 0; c < d.c_out; ++c) {
                      T s = T(0);
                      for (int bb = 0; bb < B; ++bb)
                        s += gr.col(bb)
                                 .segment(static_cast<Eigen::Index>(c) * ps, ps)
                                 .sum();
                      gb(c, 0) = s;
                    }
                    t.accum(b, gb);
                  }
                  M xm2(d.c_in, static_cast<Eigen::Index>(p) * B);
                  if (t.needs(w)) {
                    for (int bb = 0; bb < B; ++bb)
                      for (int c = 0; c < d.c_in; ++c)
                        for (int q = 0; q < p; ++q)
                          xm2(c, static_cast<Eigen::Index>(bb) * p + q) =
                              t.val(x)(static_cast<Eigen::Index>(c) * p + q, bb);
                    t.accum(w, xm2 * gcol.transpose());
                  }
                  if (t.needs(x)) {
                    M gxm = t.val(w) * gcol;  // c_in x (p*B)
                    M gx(t.val(x).rows(), t.val(x).cols());
                    for (int bb = 0; bb < B; ++bb)
                      for (int c = 0; c < d.c_in; ++c)
                        for (int q = 0; q < p; ++q)
                          gx(static_cast<Eigen::Index>(c) * p + q, bb) =
                              gxm(c, static_cast<Eigen::Index>(bb) * p + q);
                    t.accum(x, gx);
                  }
                });
  }

  void backward(int root) {
    if (val(root).size() != 1)
      throw ValidationError("backward: root must be scalar");
    ensure_grad(root)(0, 0) = T(1);
    for (int i = root; i >= 0; --i) {
      Node& n = nodes_[i];
      if (!n.needs || !n.back || n.grad.size() == 0) continue;
      n.back(*this, n.grad);
    }
  }

  bool needs(int id) const { return nodes_[id].needs; }

  void accum(int id, const M& g) {
    if (!nodes_[id].needs) return;
    ensure_grad(id) += g;
  }

 private:
  struct Node {
    M val;
    M grad;
    bool needs = false;
    std::function<void(Tape&, const M&)> back;
  };

  std::vector<Node> nodes_;

  M& ensure_grad(int id) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0) n.grad = M::Zero(n.val.rows(), n.val.cols());
    return n.grad;
  }

  void check_same(int a, int b, const char* op) const {
    if (val(a).rows() != val(b).rows() || val(a).cols() != val(b).cols())
      throw ValidationError(std::string(op) + ": shape mismatch");
  }

  int push(M v, bool need, std::function<void(Tape&, const M&)> back) {
    nodes_.push_back(Node{std::move(v), M(), need, std::move(back)});
    return static_cast<int>(nodes_.size()) - 1;
  }
};

}  // namespace replab
