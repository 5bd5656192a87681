#pragma once

#include <functional>
#include <vector>

#include "replab/autodiff.hpp"
#include "replab/rng.hpp"

namespace replab::testutil {

using Md = Mat<double>;

// Central-difference check: `f` evaluates the scalar loss at the given leaf
// values. `analytic` holds the tape gradients at `x0`, one per leaf. Returns
// the worst per-tensor relative error (per-tensor max |a-fd| over the
// tensor's gradient magnitude). The scale floor absorbs difference roundoff
// (about eps*|f|/h) on tensors the loss barely touches.
inline double fd_max_rel_err(
    const std::function<double(const std::vector<Md>&)>& f,
    std::vector<Md> x0, const std::vector<Md>& analytic) {
  double worst = 0.0;
  for (size_t k = 0; k < x0.size(); ++k) {
    double scale = 1e-6;
    double abs_err = 0.0;
    for (Eigen::Index j = 0; j < x0[k].cols(); ++j) {
      for (Eigen::Index i = 0; i < x0[k].rows(); ++i) {
        double orig = x0[k](i, j);
        double h = 1e-5 * std::max(1.0, std::abs(orig));
        x0[k](i, j) = orig + h;
        double fp = f(x0);
        x0[k](i, j) = orig - h;
        double fm = f(x0);
        x0[k](i, j) = orig;
        double fd = (fp - fm) / (2 * h);
        double an = analytic[k](i, j);
        abs_err = std::max(abs_err, std::abs(an - fd));
        scale = std::max({scale, std::abs(an), std::abs(fd)});
      }
    }
    worst = std::max(worst, abs_err / scale);
  }
  return worst;
}

inline Md random_mat(Eigen::Index r, Eigen::Index c, Rng& rng, double lo = -1,
                     double hi = 1) {
  Md m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = rng.uniform(lo, hi);
  return m;
}

}  // namespace replab::testutil
