#pragma once

// Adaptively weighted sparsification: alternating optimization of the code
// matrix Z (weighted LASSO per column) and the per-row weight vector theta
// (closed-form simplex solution), driven by a staged budget-shrinking
// schedule that strengthens the l1 penalty stage by stage.

#include <cmath>
#include <cstddef>
#include <vector>

#include "dirnet/dictionary.hpp"
#include "dirnet/error.hpp"
#include "dirnet/lasso.hpp"
#include "dirnet/linalg.hpp"
#include "dirnet/matrix.hpp"
#include "dirnet/rng.hpp"

namespace dirnet {

// Effective penalty multiplier for a row whose theta is exactly zero: large
// enough to force the row to zero at the next solve, finite to keep the
// objective arithmetic clean.
inline constexpr double kForcedZeroWeight = 1e18;

struct ThetaState {
  std::vector<double> theta;  // length = code rows, non-negative
  double budget = 0.0;        // sum(theta) after every update
  double gamma = 0.4;
  std::size_t stage = 0;
};

struct ShrinkSchedule {
  double theta0 = 1e7;
  double shrink_factor = 0.4;
  std::size_t max_stages = 25;
  double target_nnz_frac = 0.15;
  double inner_tol = 1e-6;  // relative to the budget
  std::size_t inner_max_iters = 30;
  double lasso_tol = 1e-8;
  std::size_t lasso_max_cycles = 2000;

  void validate() const {
    if (!(theta0 > 0.0)) throw ConfigError("ShrinkSchedule: theta0 > 0");
    if (!(shrink_factor > 0.0 && shrink_factor < 1.0))
      throw ConfigError("ShrinkSchedule: shrink_factor in (0,1)");
    if (!(target_nnz_frac > 0.0 && target_nnz_frac <= 1.0))
      throw ConfigError("ShrinkSchedule: target_nnz_frac in (0,1]");
    if (max_stages < 1) throw ConfigError("ShrinkSchedule: max_stages >= 1");
  }
};

// theta_i proportional to c_i^(1/(1+gamma)), renormalized so the budget is
// met exactly. All-zero usage degenerates to the uniform split.
inline std::vector<double> theta_closed_form(const std::vector<double>& c,
                                             double gamma, double budget) {
  if (!(gamma > 0.0)) throw DomainError("theta_closed_form: gamma > 0");
  if (!(budget > 0.0)) throw DomainError("theta_closed_form: budget > 0");
  const std::size_t n = c.size();
  std::vector<double> theta(n, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (c[i] < 0.0) throw DomainError("theta_closed_form: negative usage");
    theta[i] = std::pow(c[i], 1.0 / (1.0 + gamma));
    total += theta[i];
  }
  if (total == 0.0) {
    for (double& t : theta) t = budget / static_cast<double>(n);
    return theta;
  }
  for (double& t : theta) t = t / total * budget;
  return theta;
}

inline std::vector<double> theta_to_weights(const std::vector<double>& theta,
                                            double gamma) {
  std::vector<double> w(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i)
    w[i] = theta[i] > 0.0 ? std::pow(theta[i], -gamma) : kForcedZeroWeight;
  return w;
}

inline DenseMatrix live_atom_matrix(const Dictionary& dict) {
  const std::size_t p = dict.live_count();
  DenseMatrix d(dict.atom_len(), p);
  std::size_t c = 0;
  for (std::size_t k = 0; k < dict.num_atoms(); ++k)
    if (dict.live[k]) d.set_col(c++, dict.atoms.col(k));
  return d;
}

struct AlternateResult {
  CsrMatrix z;
  ThetaState state;
  // joint objective 1/2||T-DZ||^2 + lam2 * sum_i w_i c_i, recorded after
  // every full (Z, theta) iteration
  std::vector<double> iter_objectives;
  std::size_t iterations = 0;
};

// Alternates weighted-LASSO column solves and the closed-form theta update
// until the largest theta change per iteration is below inner_tol * budget.
// warm (optional) seeds the first Z solve. With freeze_zeros, coordinates
// that are zero in the warm start are excluded from the solve entirely, so
// the support can only shrink relative to the warm start; this is what makes
// the staged schedule's nnz fraction non-increasing (coordinates released by
// a strengthened penalty would otherwise re-enter to absorb the residual of
// correlated atoms).
inline AlternateResult alternate_stage(const Dictionary& dict,
                                       const DenseMatrix& target,
                                       ThetaState state, double lam2,
                                       const ShrinkSchedule& sched,
                                       const CsrMatrix* warm = nullptr,
                                       bool freeze_zeros = false) {
  if (!(state.budget > 0.0)) throw DomainError("alternate_stage: budget > 0");
  const DenseMatrix d = live_atom_matrix(dict);
  if (target.rows() != d.rows())
    throw ShapeError("alternate_stage: target rows != atom length");
  const std::size_t p = d.cols(), m = target.cols();
  if (state.theta.size() != p)
    throw ShapeError("alternate_stage: theta length != live atom count");

  DenseMatrix z(p, m);
  if (warm) {
    if (warm->rows != p || warm->cols != m)
      throw ShapeError("alternate_stage: warm start shape mismatch");
    z = to_dense(*warm);
  }

  // Per-column allowed coordinate sets and the matching atom submatrices.
  // Without freezing every coordinate is allowed and the submatrix is d.
  std::vector<std::vector<std::size_t>> support;
  std::vector<DenseMatrix> sub;
  const bool masked = freeze_zeros && warm != nullptr;
  if (masked) {
    support.resize(m);
    sub.reserve(m);
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t i = 0; i < p; ++i)
        if (z(i, j) != 0.0) support[j].push_back(i);
      DenseMatrix ds(d.rows(), std::max<std::size_t>(support[j].size(), 1));
      for (std::size_t k = 0; k < support[j].size(); ++k)
        ds.set_col(k, d.col(support[j][k]));
      sub.push_back(std::move(ds));
    }
  }

  AlternateResult out;
  out.state = std::move(state);
  for (std::size_t it = 0; it < sched.inner_max_iters; ++it) {
    const std::vector<double> w =
        theta_to_weights(out.state.theta, out.state.gamma);
    for (std::size_t j = 0; j < m; ++j) {
      if (masked) {
        const std::vector<std::size_t>& idx = support[j];
        if (idx.empty()) continue;  // column already fully zero, stays zero
        std::vector<double> ws(idx.size());
        for (std::size_t k = 0; k < idx.size(); ++k) ws[k] = w[idx[k]];
        LassoProblem prob{sub[j], target.col(j), lam2, ws};
        CdState st;
        st.code.resize(idx.size());
        for (std::size_t k = 0; k < idx.size(); ++k) st.code[k] = z(idx[k], j);
        st.residual = prob.target;
        for (std::size_t k = 0; k < idx.size(); ++k)
          if (st.code[k] != 0.0)
            for (std::size_t r = 0; r < d.rows(); ++r)
              st.residual[r] -= sub[j](r, k) * st.code[k];
        LassoSolution sol = solve_lasso_from(prob, std::move(st),
                                             sched.lasso_tol,
                                             sched.lasso_max_cycles);
        for (std::size_t k = 0; k < idx.size(); ++k)
          z(idx[k], j) = sol.code[k];
        continue;
      }
      LassoProblem prob{d, target.col(j), lam2, w};
      CdState st;
      st.code = z.col(j);
      st.residual = prob.target;
      for (std::size_t i = 0; i < p; ++i)
        if (st.code[i] != 0.0)
          for (std::size_t r = 0; r < d.rows(); ++r)
            st.residual[r] -= d(r, i) * st.code[i];
      LassoSolution sol = solve_lasso_from(prob, std::move(st), sched.lasso_tol,
                                           sched.lasso_max_cycles);
      z.set_col(j, sol.code);
    }

    std::vector<double> c(p, 0.0);  // row l1 norms
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j < m; ++j) c[i] += std::fabs(z(i, j));

    std::vector<double> theta_new =
        theta_closed_form(c, out.state.gamma, out.state.budget);
    double max_change = 0.0;
    for (std::size_t i = 0; i < p; ++i)
      max_change =
          std::max(max_change, std::fabs(theta_new[i] - out.state.theta[i]));
    out.state.theta = std::move(theta_new);
    ++out.iterations;

    // joint objective at the new theta's weights
    const std::vector<double> w2 =
        theta_to_weights(out.state.theta, out.state.gamma);
    DenseMatrix rec = matmul(d, z);
    double q = 0.0;
    for (std::size_t i = 0; i < rec.size(); ++i) {
      const double diff = target.data()[i] - rec.data()[i];
      q += diff * diff;
    }
    double pen = 0.0;
    for (std::size_t i = 0; i < p; ++i) pen += w2[i] * c[i];
    out.iter_objectives.push_back(0.5 * q + lam2 * pen);

    if (max_change <= sched.inner_tol * out.state.budget) break;
  }
  out.z = to_csr(z, 0.0);
  return out;
}

struct StageRecord {
  double budget = 0.0;
  double nnz_frac = 0.0;
  double objective = 0.0;
};

struct ScheduleResult {
  CsrMatrix z;
  ThetaState state;
  std::vector<StageRecord> stage_log;
  bool reached = false;
};

// Stage 0 starts from a uniform theta with a seeded +-1% perturbation; every
// later stage shrinks the budget geometrically, warm-starts Z and theta, and
// freezes coordinates that the previous stage drove to zero, so the nnz
// fraction is non-increasing across stages.
inline ScheduleResult run_schedule(const Dictionary& dict,
                                   const DenseMatrix& target,
                                   const ShrinkSchedule& sched, double lam2,
                                   double gamma, std::uint64_t seed) {
  sched.validate();
  const std::size_t p = dict.live_count();
  const std::size_t m = target.cols();

  Rng rng(seed);
  ThetaState state;
  state.gamma = gamma;
  state.budget = sched.theta0;
  state.theta.resize(p);
  double total = 0.0;
  for (std::size_t i = 0; i < p; ++i) {
    state.theta[i] = 1.0 + 0.01 * uniform(rng, -1.0, 1.0);
    total += state.theta[i];
  }
  for (double& t : state.theta) t = t / total * sched.theta0;

  ScheduleResult out;
  CsrMatrix warm;
  bool have_warm = false;
  for (std::size_t stage = 0; stage < sched.max_stages; ++stage) {
    state.stage = stage;
    AlternateResult alt = alternate_stage(
        dict, target, std::move(state), lam2, sched,
        have_warm ? &warm : nullptr, /*freeze_zeros=*/have_warm);
    state = std::move(alt.state);
    warm = std::move(alt.z);
    have_warm = true;

    const double frac =
        static_cast<double>(warm.nnz()) / static_cast<double>(p * m);
    out.stage_log.push_back(StageRecord{
        state.budget, frac,
        alt.iter_objectives.empty() ? 0.0 : alt.iter_objectives.back()});
    if (frac <= sched.target_nnz_frac) {
      out.reached = true;
      break;
    }
    state.budget *= sched.shrink_factor;
    for (double& t : state.theta) t *= sched.shrink_factor;
  }
  out.z = std::move(warm);
  out.state = std::move(state);
  return out;
}

// Fixed-weight (non-alternating) adaptive mode: weights from the ridge-backed
// least-squares solution's row l1 norms, |c_i|^(-gamma).
inline std::vector<double> ols_weights(const Dictionary& dict,
                                       const DenseMatrix& target,
                                       double gamma) {
  const DenseMatrix d = live_atom_matrix(dict);
  if (target.rows() != d.rows())
    throw ShapeError("ols_weights: target rows != atom length");
  const DenseMatrix dt = transpose(d);
  const DenseMatrix gram = matmul(dt, d);
  const DenseMatrix rhs = matmul(dt, target);
  const DenseMatrix z_ols = spd_solve(gram, rhs);
  std::vector<double> w(d.cols(), 1.0);
  if (gamma == 0.0) return w;  // plain LASSO
  for (std::size_t i = 0; i < d.cols(); ++i) {
    double c = 0.0;
    for (std::size_t j = 0; j < target.cols(); ++j) c += std::fabs(z_ols(i, j));
    w[i] = c > 0.0 ? std::pow(c, -gamma) : kForcedZeroWeight;
  }
  return w;
}

struct Lambda2Choice {
  double lambda2 = 0.0;
  ScheduleResult result;
};

// Decade grid search: smallest reconstruction error among runs landing in the
// nnz band, ties toward larger lambda2; if nothing lands in the band, the run
// closest to it wins.
inline Lambda2Choice select_lambda2(const Dictionary& dict,
                                    const DenseMatrix& target,
                                    const ShrinkSchedule& sched, double gamma,
                                    const std::vector<double>& grid,
                                    double band_lo, double band_hi,
                                    std::uint64_t seed) {
  if (grid.empty()) throw ConfigError("select_lambda2: empty grid");
  const DenseMatrix d = live_atom_matrix(dict);
  const double tnorm = std::sqrt(frob_norm_sq(target));

  Lambda2Choice best;
  bool best_in_band = false;
  double best_err = 0.0, best_dist = 0.0;
  bool have_best = false;
  for (double lam2 : grid) {
    ScheduleResult res = run_schedule(dict, target, sched, lam2, gamma, seed);
    DenseMatrix rec = matmul(d, to_dense(res.z));
    double err_sq = 0.0;
    for (std::size_t i = 0; i < rec.size(); ++i) {
      const double diff = target.data()[i] - rec.data()[i];
      err_sq += diff * diff;
    }
    const double err = tnorm > 0.0 ? std::sqrt(err_sq) / tnorm : 0.0;
    const double frac = res.stage_log.empty() ? 1.0
                                              : res.stage_log.back().nnz_frac;
    const bool in_band = frac >= band_lo && frac <= band_hi;
    const double dist = in_band ? 0.0
                                : std::min(std::fabs(frac - band_lo),
                                           std::fabs(frac - band_hi));
    bool take = false;
    if (!have_best)
      take = true;
    else if (in_band && !best_in_band)
      take = true;
    else if (in_band == best_in_band)
      take = in_band ? (err <= best_err) : (dist <= best_dist);
    if (take) {
      best.lambda2 = lam2;
      best.result = std::move(res);
      best_in_band = in_band;
      best_err = err;
      best_dist = dist;
      have_best = true;
    }
  }
  return best;
}

}  // namespace dirnet
