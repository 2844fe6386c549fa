#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

namespace mebn {

struct SimplexResult {
  Eigen::VectorXd x;
  double value = std::numeric_limits<double>::infinity();
  int evaluations = 0;
  bool converged = false;
};

// Nelder-Mead simplex minimizer with the standard coefficients
// (reflection 1, expansion 2, contraction 1/2, shrink 1/2). Stops when the
// spread of function values across the simplex falls below
// rel_tol * (1 + |best|), or when max_evals is exhausted.
template <class F>
SimplexResult nelder_mead(F&& f, const Eigen::VectorXd& start, double step, int max_evals,
                          double rel_tol) {
  const auto d = start.size();
  std::vector<Eigen::VectorXd> pts(static_cast<std::size_t>(d + 1), start);
  std::vector<double> val(pts.size());
  int evals = 0;
  auto eval = [&](const Eigen::VectorXd& x) {
    ++evals;
    double v = f(x);
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
  };
  for (Eigen::Index i = 0; i < d; ++i) pts[static_cast<std::size_t>(i + 1)](i) += step;
  for (std::size_t i = 0; i < pts.size(); ++i) val[i] = eval(pts[i]);

  std::vector<std::size_t> idx(pts.size());
  bool converged = false;
  while (true) {
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return val[a] < val[b]; });
    const double best = val[idx.front()], worst = val[idx.back()];
    if (std::isfinite(worst) && worst - best <= rel_tol * (1.0 + std::abs(best))) {
      converged = true;
      break;
    }
    if (evals >= max_evals) break;

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(d);
    for (std::size_t k = 0; k + 1 < idx.size(); ++k) centroid += pts[idx[k]];
    centroid /= static_cast<double>(d);
    const auto w = idx.back();
    const double second = val[idx[idx.size() - 2]];

    Eigen::VectorXd xr = centroid + (centroid - pts[w]);
    double fr = eval(xr);
    if (fr < best) {
      Eigen::VectorXd xe = centroid + 2.0 * (centroid - pts[w]);
      double fe = eval(xe);
      if (fe < fr) {
        pts[w] = xe;
        val[w] = fe;
      } else {
        pts[w] = xr;
        val[w] = fr;
      }
      continue;
    }
    if (fr < second) {
      pts[w] = xr;
      val[w] = fr;
      continue;
    }
    const bool outside = fr < val[w];
    Eigen::VectorXd xc = outside ? Eigen::VectorXd(centroid + 0.5 * (xr - centroid))
                                 : Eigen::VectorXd(centroid + 0.5 * (pts[w] - centroid));
    double fc = eval(xc);
    if (fc < (outside ? fr : val[w])) {
      pts[w] = xc;
      val[w] = fc;
      continue;
    }
    const auto b = idx.front();
    for (std::size_t k = 1; k < idx.size(); ++k) {
      auto i = idx[k];
      pts[i] = pts[b] + 0.5 * (pts[i] - pts[b]);
      val[i] = eval(pts[i]);
    }
  }
  const auto b = static_cast<std::size_t>(std::min_element(val.begin(), val.end()) - val.begin());
  return {pts[b], val[b], evals, converged};
}

}  // namespace mebn
