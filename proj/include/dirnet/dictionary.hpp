#pragma once

// Dynamically adaptive dictionary learning with shift operators: sparse-code
// updates by coordinate descent over shifted atoms, block-coordinate atom
// updates, and usage-energy pruning that determines the live atom count.

#include <cmath>
#include <cstddef>
#include <vector>

#include "dirnet/error.hpp"
#include "dirnet/lasso.hpp"
#include "dirnet/matrix.hpp"
#include "dirnet/rng.hpp"
#include "dirnet/shift.hpp"

namespace dirnet {

struct Dictionary {
  DenseMatrix atoms;               // n x p, columns are atoms
  std::vector<std::uint8_t> live;  // per-atom flag

  std::size_t atom_len() const { return atoms.rows(); }
  std::size_t num_atoms() const { return atoms.cols(); }

  std::size_t live_count() const {
    std::size_t c = 0;
    for (auto f : live) c += f ? 1 : 0;
    return c;
  }

  void validate() const {
    if (live.size() != atoms.cols())
      throw IntegrityError("Dictionary: live flag count != atom count");
    if (live_count() == 0) throw IntegrityError("Dictionary: no live atoms");
    for (std::size_t k = 0; k < atoms.cols(); ++k) {
      if (!live[k]) continue;
      double s = 0.0;
      for (std::size_t i = 0; i < atoms.rows(); ++i)
        s += atoms(i, k) * atoms(i, k);
      if (std::fabs(std::sqrt(s) - 1.0) > 1e-9)
        throw IntegrityError("Dictionary: live atom not unit norm");
    }
  }
};

// Sparse code where every stored coefficient carries its own shift.
struct ShiftedCode {
  CsrMatrix coeffs;             // p x m
  std::vector<ShiftOp> shifts;  // aligned with coeffs nonzeros

  void validate() const {
    coeffs.validate();
    if (shifts.size() != coeffs.nnz())
      throw IntegrityError("ShiftedCode: shift table size != nnz");
  }
};

namespace detail {

// Dense working layout used inside the learning loop.
struct CodeWork {
  std::size_t p = 0, m = 0;
  std::vector<double> z;  // p*m, row-major
  std::vector<int> off;   // per (atom, column) offset
  ShiftMode mode = ShiftMode::circular;

  double& zat(std::size_t i, std::size_t j) { return z[i * m + j]; }
  double zat(std::size_t i, std::size_t j) const { return z[i * m + j]; }
  int& oat(std::size_t i, std::size_t j) { return off[i * m + j]; }
  int oat(std::size_t i, std::size_t j) const { return off[i * m + j]; }

  static CodeWork from(const ShiftedCode& sc) {
    CodeWork w;
    w.p = sc.coeffs.rows;
    w.m = sc.coeffs.cols;
    w.z.assign(w.p * w.m, 0.0);
    w.off.assign(w.p * w.m, 0);
    for (std::size_t r = 0; r < w.p; ++r)
      for (std::size_t k = sc.coeffs.row_ptr[r]; k < sc.coeffs.row_ptr[r + 1];
           ++k) {
        w.zat(r, sc.coeffs.col_idx[k]) = sc.coeffs.vals[k];
        w.oat(r, sc.coeffs.col_idx[k]) = sc.shifts[k].offset;
        w.mode = sc.shifts[k].mode;
      }
    return w;
  }

  ShiftedCode pack() const {
    ShiftedCode sc;
    sc.coeffs.rows = p;
    sc.coeffs.cols = m;
    sc.coeffs.row_ptr.assign(p + 1, 0);
    for (std::size_t i = 0; i < p; ++i) {
      for (std::size_t j = 0; j < m; ++j)
        if (zat(i, j) != 0.0) {
          sc.coeffs.col_idx.push_back(static_cast<std::uint32_t>(j));
          sc.coeffs.vals.push_back(zat(i, j));
          sc.shifts.push_back(ShiftOp{oat(i, j), mode});
        }
      sc.coeffs.row_ptr[i + 1] = sc.coeffs.vals.size();
    }
    return sc;
  }
};

// shifted[i][k] = k-th shift of atom i; norms_sq alongside.
struct ShiftedAtomCache {
  std::vector<ShiftOp> ops;
  std::vector<std::vector<std::vector<double>>> shifted;
  std::vector<std::vector<double>> norm_sq;

  ShiftedAtomCache(const Dictionary& dict, const ShiftSet& set) {
    ops = set.ops();
    shifted.resize(dict.num_atoms());
    norm_sq.resize(dict.num_atoms());
    for (std::size_t i = 0; i < dict.num_atoms(); ++i) {
      if (!dict.live[i]) continue;
      std::vector<double> atom = dict.atoms.col(i);
      shifted[i].reserve(ops.size());
      for (const ShiftOp& op : ops) {
        shifted[i].push_back(op.apply(atom));
        norm_sq[i].push_back(norm2_sq(shifted[i].back()));
      }
    }
  }

  std::size_t op_index(int offset) const {
    for (std::size_t k = 0; k < ops.size(); ++k)
      if (ops[k].offset == offset) return k;
    throw IntegrityError("shift offset outside configured shift set");
  }
};

}  // namespace detail

inline ShiftedCode zero_code(std::size_t p, std::size_t m,
                             ShiftMode mode = ShiftMode::circular) {
  ShiftedCode sc;
  sc.coeffs.rows = p;
  sc.coeffs.cols = m;
  sc.coeffs.row_ptr.assign(p + 1, 0);
  (void)mode;
  return sc;
}

// column j of the result = sum_i z_ij * delta_ij(d_i), live atoms only.
inline DenseMatrix reconstruct(const Dictionary& dict,
                               const ShiftedCode& code) {
  code.validate();
  if (code.coeffs.rows != dict.num_atoms())
    throw ShapeError("reconstruct: code rows != atom count");
  DenseMatrix out(dict.atom_len(), code.coeffs.cols);
  for (std::size_t i = 0; i < code.coeffs.rows; ++i) {
    if (!dict.live[i]) continue;
    std::vector<double> atom = dict.atoms.col(i);
    for (std::size_t k = code.coeffs.row_ptr[i];
         k < code.coeffs.row_ptr[i + 1]; ++k) {
      const std::size_t j = code.coeffs.col_idx[k];
      const std::vector<double> a = code.shifts[k].apply(atom);
      for (std::size_t r = 0; r < out.rows(); ++r)
        out(r, j) += code.coeffs.vals[k] * a[r];
    }
  }
  return out;
}

inline double dict_objective(const Dictionary& dict, const ShiftedCode& code,
                             const DenseMatrix& targets, double lam) {
  DenseMatrix rec = reconstruct(dict, code);
  double q = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double d = targets.data()[i] - rec.data()[i];
    q += d * d;
  }
  double pen = 0.0;
  for (double v : code.coeffs.vals) pen += std::fabs(v);
  return 0.5 * q + lam * pen;
}

// Per column: greedy re-selection of each atom's shift against the
// atom-excluded residual (jointly with the 1-D optimal coefficient, so the
// pass never increases the objective), then cd_cycles of plain coordinate
// descent with the shifts frozen.
inline ShiftedCode assign_shifts_and_code(const Dictionary& dict,
                                          const DenseMatrix& targets,
                                          const ShiftSet& shift_set,
                                          double lam, std::size_t cd_cycles,
                                          const ShiftedCode& code) {
  if (cd_cycles < 1) throw ConfigError("assign_shifts_and_code: cd_cycles >= 1");
  if (targets.rows() != dict.atom_len())
    throw ShapeError("assign_shifts_and_code: target rows != atom length");
  shift_set.check(dict.atom_len());

  detail::CodeWork w = detail::CodeWork::from(code);
  if (w.p != dict.num_atoms() || w.m != targets.cols())
    throw ShapeError("assign_shifts_and_code: code shape mismatch");
  w.mode = shift_set.mode;
  detail::ShiftedAtomCache cache(dict, shift_set);

  const std::size_t n = dict.atom_len();
  for (std::size_t j = 0; j < w.m; ++j) {
    std::vector<double> r = targets.col(j);
    for (std::size_t i = 0; i < w.p; ++i) {
      if (!dict.live[i]) {
        w.zat(i, j) = 0.0;
        continue;
      }
      const double zij = w.zat(i, j);
      if (zij != 0.0) {
        const std::vector<double>& a =
            cache.shifted[i][cache.op_index(w.oat(i, j))];
        for (std::size_t rr = 0; rr < n; ++rr) r[rr] -= zij * a[rr];
      }
    }

    // (a) joint (shift, coefficient) refresh, one atom at a time
    for (std::size_t i = 0; i < w.p; ++i) {
      if (!dict.live[i]) continue;
      const double z_old = w.zat(i, j);
      const std::size_t k_old = cache.op_index(w.oat(i, j));
      // residual excluding atom i
      std::vector<double> r_ex = r;
      if (z_old != 0.0) axpy(z_old, cache.shifted[i][k_old], r_ex);

      std::size_t k_best = k_old;
      double corr_best = 0.0;
      for (std::size_t k = 0; k < cache.ops.size(); ++k) {
        const double corr = dot(cache.shifted[i][k], r_ex);
        if (std::fabs(corr) > std::fabs(corr_best)) {
          corr_best = corr;
          k_best = k;
        }
      }
      auto partial_obj = [&](std::size_t k, double z) {
        // 1-D objective minus the constant 1/2||r_ex||^2
        const double corr = dot(cache.shifted[i][k], r_ex);
        return -z * corr + 0.5 * z * z * cache.norm_sq[i][k] +
               lam * std::fabs(z);
      };
      double z_best = 0.0;
      if (cache.norm_sq[i][k_best] > 0.0)
        z_best = soft_threshold(corr_best, lam) / cache.norm_sq[i][k_best];
      // keep the previous (shift, coefficient) pair if it is not improved on
      if (partial_obj(k_old, z_old) < partial_obj(k_best, z_best)) {
        k_best = k_old;
        z_best = z_old;
      }
      w.zat(i, j) = z_best;
      w.oat(i, j) = cache.ops[k_best].offset;
      if (z_best != 0.0) axpy(-z_best, cache.shifted[i][k_best], r_ex);
      r = std::move(r_ex);
    }

    // (b) coordinate descent with shifts frozen
    for (std::size_t cycle = 0; cycle < cd_cycles; ++cycle) {
      for (std::size_t i = 0; i < w.p; ++i) {
        if (!dict.live[i]) continue;
        const std::size_t k = cache.op_index(w.oat(i, j));
        const double nsq = cache.norm_sq[i][k];
        if (nsq == 0.0) continue;
        const std::vector<double>& a = cache.shifted[i][k];
        const double b = dot(a, r) + nsq * w.zat(i, j);
        const double z_new = soft_threshold(b, lam) / nsq;
        const double delta = w.zat(i, j) - z_new;
        if (delta != 0.0) {
          axpy(delta, a, r);
          w.zat(i, j) = z_new;
        }
      }
    }
  }
  return w.pack();
}

// One block-coordinate pass over all live atoms in index order. Circular
// shifts admit the exact sphere-constrained minimizer (normalized correlation
// sum); zero-padded shifts use the adjoint plus the diagonal rescale, then
// normalize. Codes are not touched, so the l1 term is unaffected.
inline Dictionary update_atoms(const Dictionary& dict, const ShiftedCode& code,
                               const DenseMatrix& targets) {
  code.validate();
  if (code.coeffs.rows != dict.num_atoms() ||
      targets.rows() != dict.atom_len() ||
      targets.cols() != code.coeffs.cols)
    throw ShapeError("update_atoms: inconsistent dimensions");

  detail::CodeWork w = detail::CodeWork::from(code);
  const std::size_t n = dict.atom_len(), m = w.m;
  Dictionary out = dict;

  // residual matrix R = targets - reconstruction, updated in place
  DenseMatrix rec = reconstruct(out, code);
  DenseMatrix resid(n, m);
  for (std::size_t i = 0; i < resid.size(); ++i)
    resid.data()[i] = targets.data()[i] - rec.data()[i];

  for (std::size_t k = 0; k < out.num_atoms(); ++k) {
    if (!out.live[k]) continue;
    double usage = 0.0;
    for (std::size_t j = 0; j < m; ++j) usage += w.zat(k, j) * w.zat(k, j);
    if (usage == 0.0) continue;  // unused atom: left for pruning

    const std::vector<double> d_old = out.atoms.col(k);
    std::vector<double> acc(n, 0.0);
    std::vector<double> diag(n, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
      const double z = w.zat(k, j);
      if (z == 0.0) continue;
      const ShiftOp op{w.oat(k, j), w.mode};
      std::vector<double> rho = resid.col(j);
      axpy(z, op.apply(d_old), rho);  // add back atom k's own contribution
      const std::vector<double> back = op.adjoint(rho);
      axpy(z, back, acc);
      for (std::size_t i = 0; i < n; ++i)
        if (op.survives(i, n)) diag[i] += z * z;
    }

    std::vector<double> d_new(n);
    if (w.mode == ShiftMode::circular) {
      d_new = acc;  // scale is irrelevant before normalization
    } else {
      for (std::size_t i = 0; i < n; ++i)
        d_new[i] = diag[i] > 0.0 ? acc[i] / diag[i] : d_old[i];
    }
    const double nrm = norm2(d_new);
    if (nrm == 0.0) continue;
    for (double& v : d_new) v /= nrm;

    // keep the residual matrix consistent with the replaced atom
    for (std::size_t j = 0; j < m; ++j) {
      const double z = w.zat(k, j);
      if (z == 0.0) continue;
      const ShiftOp op{w.oat(k, j), w.mode};
      const std::vector<double> a_old = op.apply(d_old);
      const std::vector<double> a_new = op.apply(d_new);
      for (std::size_t i = 0; i < n; ++i)
        resid(i, j) += z * (a_old[i] - a_new[i]);
    }
    out.atoms.set_col(k, d_new);
  }
  return out;
}

// Variant used when the code travels with the dictionary: the atom is
// replaced by the normalized unconstrained minimizer and the code row is
// rescaled by its norm (z <- z * ||d~||), so the reconstruction equals the
// least-squares optimum. A per-atom guard keeps the previous (atom, row)
// pair whenever the combined objective (including the l1 term, which the
// rescale can inflate) would increase, so descent is guaranteed.
inline Dictionary update_atoms_compensated(const Dictionary& dict,
                                           ShiftedCode* code,
                                           const DenseMatrix& targets,
                                           double lam) {
  code->validate();
  if (code->coeffs.rows != dict.num_atoms() ||
      targets.rows() != dict.atom_len() ||
      targets.cols() != code->coeffs.cols)
    throw ShapeError("update_atoms_compensated: inconsistent dimensions");

  detail::CodeWork w = detail::CodeWork::from(*code);
  const std::size_t n = dict.atom_len(), m = w.m;
  Dictionary out = dict;

  DenseMatrix rec = reconstruct(out, *code);
  DenseMatrix resid(n, m);
  for (std::size_t i = 0; i < resid.size(); ++i)
    resid.data()[i] = targets.data()[i] - rec.data()[i];

  for (std::size_t k = 0; k < out.num_atoms(); ++k) {
    if (!out.live[k]) continue;
    double usage = 0.0, row_l1 = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      usage += w.zat(k, j) * w.zat(k, j);
      row_l1 += std::fabs(w.zat(k, j));
    }
    if (usage == 0.0) continue;

    const std::vector<double> d_old = out.atoms.col(k);
    std::vector<double> acc(n, 0.0);
    std::vector<double> diag(n, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
      const double z = w.zat(k, j);
      if (z == 0.0) continue;
      const ShiftOp op{w.oat(k, j), w.mode};
      std::vector<double> rho = resid.col(j);
      axpy(z, op.apply(d_old), rho);
      axpy(z, op.adjoint(rho), acc);
      for (std::size_t i = 0; i < n; ++i)
        if (op.survives(i, n)) diag[i] += z * z;
    }

    // unconstrained least-squares minimizer (phi rescale)
    std::vector<double> d_tilde(n);
    for (std::size_t i = 0; i < n; ++i)
      d_tilde[i] = diag[i] > 0.0 ? acc[i] / diag[i] : d_old[i];
    const double nrm = norm2(d_tilde);
    if (nrm == 0.0) continue;
    std::vector<double> d_new = d_tilde;
    for (double& v : d_new) v /= nrm;

    // objective change if accepted: compare per-column residuals with the
    // compensated product z*nrm * op(d_new) == z * op(d_tilde)
    double delta = lam * (nrm - 1.0) * row_l1;
    std::vector<std::vector<double>> new_cols(m);
    for (std::size_t j = 0; j < m; ++j) {
      const double z = w.zat(k, j);
      if (z == 0.0) continue;
      const ShiftOp op{w.oat(k, j), w.mode};
      std::vector<double> r_new = resid.col(j);
      axpy(z, op.apply(d_old), r_new);
      axpy(-z, op.apply(d_tilde), r_new);
      delta += 0.5 * (norm2_sq(r_new) - norm2_sq(resid.col(j)));
      new_cols[j] = std::move(r_new);
    }
    if (delta > 0.0) continue;  // keep the old pair: descent guard

    for (std::size_t j = 0; j < m; ++j) {
      if (w.zat(k, j) == 0.0) continue;
      for (std::size_t i = 0; i < n; ++i) resid(i, j) = new_cols[j][i];
      w.zat(k, j) *= nrm;
    }
    out.atoms.set_col(k, d_new);
  }
  *code = w.pack();
  return out;
}

// Usage energy of each code row; used by pruning and reported by tests.
inline std::vector<double> atom_energies(const ShiftedCode& code) {
  std::vector<double> e(code.coeffs.rows, 0.0);
  for (std::size_t r = 0; r < code.coeffs.rows; ++r)
    for (std::size_t k = code.coeffs.row_ptr[r]; k < code.coeffs.row_ptr[r + 1];
         ++k)
      e[r] += code.coeffs.vals[k] * code.coeffs.vals[k];
  return e;
}

// Drops atoms whose usage energy falls below energy_floor times the maximum;
// the max-energy atom always survives. Returns compacted dictionary and code.
inline std::pair<Dictionary, ShiftedCode> prune_atoms(const Dictionary& dict,
                                                      const ShiftedCode& code,
                                                      double energy_floor) {
  if (energy_floor < 0.0 || energy_floor >= 1.0)
    throw ConfigError("prune_atoms: energy_floor must be in [0,1)");
  const std::vector<double> energy = atom_energies(code);
  double max_e = 0.0;
  std::size_t arg_max = 0;
  for (std::size_t k = 0; k < energy.size(); ++k)
    if (dict.live[k] && energy[k] >= max_e) {
      max_e = energy[k];
      arg_max = k;
    }

  std::vector<std::size_t> keep;
  for (std::size_t k = 0; k < dict.num_atoms(); ++k) {
    if (!dict.live[k]) continue;
    if (k == arg_max || !(energy[k] < energy_floor * max_e)) keep.push_back(k);
  }

  Dictionary nd;
  nd.atoms = DenseMatrix(dict.atom_len(), keep.size());
  nd.live.assign(keep.size(), 1);
  for (std::size_t c = 0; c < keep.size(); ++c)
    nd.atoms.set_col(c, dict.atoms.col(keep[c]));

  ShiftedCode nc;
  nc.coeffs.rows = keep.size();
  nc.coeffs.cols = code.coeffs.cols;
  nc.coeffs.row_ptr.assign(keep.size() + 1, 0);
  for (std::size_t c = 0; c < keep.size(); ++c) {
    const std::size_t r = keep[c];
    for (std::size_t k = code.coeffs.row_ptr[r]; k < code.coeffs.row_ptr[r + 1];
         ++k) {
      nc.coeffs.col_idx.push_back(code.coeffs.col_idx[k]);
      nc.coeffs.vals.push_back(code.coeffs.vals[k]);
      nc.shifts.push_back(code.shifts[k]);
    }
    nc.coeffs.row_ptr[c + 1] = nc.coeffs.vals.size();
  }
  return {std::move(nd), std::move(nc)};
}

struct LearnResult {
  Dictionary dict;
  ShiftedCode code;
  std::vector<double> objective_per_epoch;
};

// Alternating minimization: atoms initialized from randomly selected target
// columns, codes from zero, one code pass plus one atom pass per epoch,
// pruning once after the final epoch.
inline LearnResult learn(const DenseMatrix& targets, std::size_t initial_p,
                         const ShiftSet& shift_set, double lam,
                         std::size_t epochs, double energy_floor,
                         std::uint64_t seed, std::size_t cd_cycles = 3,
                         bool compensate = false) {
  if (initial_p < 1 || initial_p > targets.cols())
    throw ConfigError("learn: initial_p must be in [1, cols(targets)]");
  if (epochs < 1) throw ConfigError("learn: epochs >= 1");
  shift_set.check(targets.rows());

  Rng rng(seed);
  const std::vector<std::size_t> picks =
      sample_indices(rng, targets.cols(), initial_p);
  Dictionary dict;
  dict.atoms = DenseMatrix(targets.rows(), initial_p);
  dict.live.assign(initial_p, 1);
  for (std::size_t c = 0; c < initial_p; ++c) {
    std::vector<double> col = targets.col(picks[c]);
    double nrm = norm2(col);
    if (nrm == 0.0) {  // degenerate sample: fall back to a random direction
      for (double& v : col) v = gaussian(rng);
      nrm = norm2(col);
    }
    for (double& v : col) v /= nrm;
    dict.atoms.set_col(c, col);
  }

  LearnResult out;
  out.code = zero_code(initial_p, targets.cols(), shift_set.mode);
  out.dict = std::move(dict);
  for (std::size_t e = 0; e < epochs; ++e) {
    out.code = assign_shifts_and_code(out.dict, targets, shift_set, lam,
                                      cd_cycles, out.code);
    if (compensate)
      out.dict = update_atoms_compensated(out.dict, &out.code, targets, lam);
    else
      out.dict = update_atoms(out.dict, out.code, targets);
    out.objective_per_epoch.push_back(
        dict_objective(out.dict, out.code, targets, lam));
  }
  auto pruned = prune_atoms(out.dict, out.code, energy_floor);
  out.dict = std::move(pruned.first);
  out.code = std::move(pruned.second);
  return out;
}

}  // namespace dirnet
