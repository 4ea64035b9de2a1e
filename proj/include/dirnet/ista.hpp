#pragma once

// Proximal-gradient (ISTA) reference solver. Used only to cross-check the
// coordinate-descent path; deliberately shares no code with it beyond the
// problem container.

#include <cmath>
#include <cstddef>
#include <vector>

#include "dirnet/lasso.hpp"
#include "dirnet/matrix.hpp"

namespace dirnet {

// Largest eigenvalue of D^T D via power iteration.
inline double lipschitz_estimate(const DenseMatrix& dict,
                                 std::size_t iters = 200) {
  const std::size_t p = dict.cols();
  std::vector<double> v(p, 1.0 / std::sqrt(static_cast<double>(p)));
  double lam = 0.0;
  for (std::size_t it = 0; it < iters; ++it) {
    std::vector<double> dv = matvec(dict, v);
    std::vector<double> w = matvec_t(dict, dv);
    double nw = norm2(w);
    if (nw == 0.0) return 0.0;
    lam = nw;
    for (std::size_t j = 0; j < p; ++j) v[j] = w[j] / nw;
  }
  return lam;
}

// Iterates z <- shrink(z - (1/L) D^T (D z - y), lam w / L) until the
// objective change per iteration falls below tol.
inline std::vector<double> ista_oracle(const LassoProblem& p, double tol,
                                       std::size_t max_iters = 500000) {
  if (tol <= 0.0) throw DomainError("ista_oracle: tol must be positive");
  const std::size_t m = p.num_coords();
  std::vector<double> z(m, 0.0);
  const double lip = lipschitz_estimate(p.dict);
  if (lip == 0.0) return z;  // zero dictionary: zero is optimal
  const double step = 1.0 / lip;

  auto objective = [&](const std::vector<double>& code) {
    std::vector<double> r = p.target;
    for (std::size_t j = 0; j < m; ++j)
      if (code[j] != 0.0)
        for (std::size_t i = 0; i < p.dim(); ++i)
          r[i] -= p.dict(i, j) * code[j];
    double pen = 0.0;
    for (std::size_t j = 0; j < m; ++j)
      pen += p.weight(j) * std::fabs(code[j]);
    return 0.5 * norm2_sq(r) + p.lam * pen;
  };

  double prev = objective(z);
  for (std::size_t it = 0; it < max_iters; ++it) {
    std::vector<double> dz = matvec(p.dict, z);
    for (std::size_t i = 0; i < p.dim(); ++i) dz[i] -= p.target[i];
    std::vector<double> grad = matvec_t(p.dict, dz);
    for (std::size_t j = 0; j < m; ++j) {
      const double u = z[j] - step * grad[j];
      const double t = step * p.lam * p.weight(j);
      z[j] = (u > t) ? u - t : (u < -t) ? u + t : 0.0;
    }
    const double cur = objective(z);
    if (std::fabs(prev - cur) < tol) break;
    prev = cur;
  }
  return z;
}

}  // namespace dirnet
