#pragma once

// Cyclic coordinate-descent solvers for the (optionally weighted) LASSO
//   min_z 1/2 ||target - dict z||^2 + lam * sum_j w_j |z_j|.
// Columns of dict may have norm slightly below one; the update uses the
// general rule z_j <- s_{lam w_j}(d_j^T r + ||d_j||^2 z_j) / ||d_j||^2.

#include <cmath>
#include <cstddef>
#include <vector>

#include "dirnet/error.hpp"
#include "dirnet/matrix.hpp"

namespace dirnet {

struct LassoProblem {
  DenseMatrix dict;            // n x p, columns are regressors
  std::vector<double> target;  // length n
  double lam = 0.0;
  std::vector<double> weights;  // empty => unweighted; else length p, > 0

  std::size_t dim() const { return dict.rows(); }
  std::size_t num_coords() const { return dict.cols(); }

  double weight(std::size_t j) const {
    return weights.empty() ? 1.0 : weights[j];
  }

  void validate() const {
    if (target.size() != dict.rows())
      throw ShapeError("LassoProblem: target length != dict rows");
    if (lam < 0.0) throw DomainError("LassoProblem: negative lambda");
    if (!weights.empty() && weights.size() != dict.cols())
      throw ShapeError("LassoProblem: weights length != dict cols");
    for (double w : weights)
      if (!(w > 0.0) || !std::isfinite(w))
        throw DomainError("LassoProblem: weights must be positive finite");
    for (std::size_t j = 0; j < dict.cols(); ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < dict.rows(); ++i) s += dict(i, j) * dict(i, j);
      if (s > 1.0 + 2e-9 + 1e-12)
        throw DomainError("LassoProblem: column norm exceeds 1");
    }
  }
};

struct CdState {
  std::vector<double> code;      // length p
  std::vector<double> residual;  // target - dict * code
  std::size_t steps_done = 0;

  static CdState zero(const LassoProblem& p) {
    CdState s;
    s.code.assign(p.num_coords(), 0.0);
    s.residual = p.target;
    return s;
  }
};

inline double lasso_objective(const LassoProblem& p,
                              const std::vector<double>& code) {
  std::vector<double> r = p.target;
  for (std::size_t j = 0; j < p.num_coords(); ++j) {
    if (code[j] == 0.0) continue;
    for (std::size_t i = 0; i < p.dim(); ++i) r[i] -= p.dict(i, j) * code[j];
  }
  double pen = 0.0;
  for (std::size_t j = 0; j < p.num_coords(); ++j)
    pen += p.weight(j) * std::fabs(code[j]);
  return 0.5 * norm2_sq(r) + p.lam * pen;
}

namespace detail {
inline std::vector<double> column_sq_norms(const DenseMatrix& d) {
  std::vector<double> s(d.cols(), 0.0);
  for (std::size_t i = 0; i < d.rows(); ++i)
    for (std::size_t j = 0; j < d.cols(); ++j) s[j] += d(i, j) * d(i, j);
  return s;
}
}  // namespace detail

// One call = num_steps full cycles over the coordinates in ascending order.
// Returns the updated state and the largest coordinate change seen in the
// final cycle (via *last_max_change when non-null).
inline CdState cd_steps(const LassoProblem& p, CdState state,
                        std::size_t num_steps,
                        double* last_max_change = nullptr) {
  if (state.code.size() != p.num_coords() ||
      state.residual.size() != p.dim())
    throw ShapeError("cd_steps: state dimensions do not match problem");
  const std::vector<double> colsq = detail::column_sq_norms(p.dict);
  const std::size_t n = p.dim(), m = p.num_coords();
  double max_change = 0.0;
  for (std::size_t step = 0; step < num_steps; ++step) {
    max_change = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      if (colsq[j] == 0.0) continue;  // all-zero regressor stays at zero
      double g = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        g += p.dict(i, j) * state.residual[i];
      const double b = g + colsq[j] * state.code[j];
      const double z_new = soft_threshold(b, p.lam * p.weight(j)) / colsq[j];
      const double delta = state.code[j] - z_new;
      if (delta != 0.0) {
        for (std::size_t i = 0; i < n; ++i)
          state.residual[i] += p.dict(i, j) * delta;
        state.code[j] = z_new;
      }
      max_change = std::max(max_change, std::fabs(delta));
    }
    ++state.steps_done;
  }
  if (last_max_change) *last_max_change = max_change;
  return state;
}

struct LassoSolution {
  std::vector<double> code;
  bool converged = false;
  std::size_t cycles = 0;
};

// Cycles coordinate descent from the given state until the max coordinate
// change in a cycle drops below tol.
inline LassoSolution solve_lasso_from(const LassoProblem& p, CdState state,
                                      double tol, std::size_t max_cycles) {
  if (tol <= 0.0) throw DomainError("solve_lasso: tol must be positive");
  LassoSolution out;
  for (std::size_t c = 0; c < max_cycles; ++c) {
    double change = 0.0;
    state = cd_steps(p, std::move(state), 1, &change);
    ++out.cycles;
    if (change < tol) {
      out.converged = true;
      break;
    }
  }
  out.code = std::move(state.code);
  return out;
}

// Zero initialization always; warm starting goes through solve_lasso_from.
inline LassoSolution solve_lasso(const LassoProblem& p, double tol = 1e-7,
                                 std::size_t max_cycles = 10000) {
  return solve_lasso_from(p, CdState::zero(p), tol, max_cycles);
}

// Largest violation of the LASSO subgradient optimality conditions:
//   |d_j^T r| <= lam w_j           where z_j = 0
//   d_j^T r == lam w_j sign(z_j)   where z_j != 0
inline double kkt_residual(const LassoProblem& p,
                           const std::vector<double>& code) {
  std::vector<double> r = p.target;
  for (std::size_t j = 0; j < p.num_coords(); ++j)
    if (code[j] != 0.0)
      for (std::size_t i = 0; i < p.dim(); ++i) r[i] -= p.dict(i, j) * code[j];
  double worst = 0.0;
  for (std::size_t j = 0; j < p.num_coords(); ++j) {
    double g = 0.0;
    for (std::size_t i = 0; i < p.dim(); ++i) g += p.dict(i, j) * r[i];
    const double lw = p.lam * p.weight(j);
    double viol;
    if (code[j] == 0.0)
      viol = std::max(0.0, std::fabs(g) - lw);
    else
      viol = std::fabs(g - lw * (code[j] > 0.0 ? 1.0 : -1.0));
    worst = std::max(worst, viol);
  }
  return worst;
}

}  // namespace dirnet
