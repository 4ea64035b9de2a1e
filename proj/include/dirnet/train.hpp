#pragma once

// Desk-scale trainer: truncated BPTT with cross-entropy loss and an
// adaptive-moment optimizer, for both the dense baseline and the masked
// factorized parameterization (gradients reach only the stored nonzeros of
// the code matrices, so fine-tuning preserves every sparsity pattern).

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "dirnet/compress.hpp"
#include "dirnet/error.hpp"
#include "dirnet/matrix.hpp"
#include "dirnet/rng.hpp"
#include "dirnet/rnn.hpp"

namespace dirnet {

struct TrainConfig {
  double lr = 0.002;
  std::size_t epochs = 10;
  std::size_t batch = 8;
  std::size_t bptt_len = 32;
  std::uint64_t seed = 42;
  double grad_clip = 5.0;

  void validate() const {
    if (lr < 0.0 || epochs < 1 || batch < 1 || bptt_len < 1 ||
        !(grad_clip > 0.0))
      throw ConfigError("TrainConfig: all fields must be positive");
  }
};

struct ArchSpec {
  CellKind kind = CellKind::lstm;
  std::vector<std::size_t> widths;
};

struct TrainLogEntry {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

// -- flattened parameter access ------------------------------------------------

struct ParamView {
  double* data = nullptr;
  std::size_t size = 0;
};

inline std::vector<ParamView> collect_params(NetworkModel& m) {
  std::vector<ParamView> out;
  for (auto& l : m.layers) {
    out.push_back({l.w_h.data().data(), l.w_h.size()});
    out.push_back({l.w_x.data().data(), l.w_x.size()});
    out.push_back({l.bias.data(), l.bias.size()});
  }
  out.push_back({m.embed.data().data(), m.embed.size()});
  out.push_back({m.out_proj.data().data(), m.out_proj.size()});
  return out;
}

inline std::vector<ParamView> collect_params(CompressedModel& m,
                                             bool freeze_dict) {
  std::vector<ParamView> out;
  for (auto& l : m.layers) {
    if (!freeze_dict) {
      out.push_back({l.dict.atoms.data().data(), l.dict.atoms.size()});
      if (!l.shared_d)
        out.push_back({l.dict_x.atoms.data().data(), l.dict_x.atoms.size()});
    }
    out.push_back({l.z_h.vals.data(), l.z_h.vals.size()});
    out.push_back({l.z_x.vals.data(), l.z_x.vals.size()});
    out.push_back({l.bias.data(), l.bias.size()});
  }
  out.push_back({m.embed.data().data(), m.embed.size()});
  out.push_back({m.out_proj.data().data(), m.out_proj.size()});
  return out;
}

struct AdamOptimizer {
  double lr = 0.002;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t t = 0;
  std::vector<double> m, v;

  void step(const std::vector<ParamView>& params,
            const std::vector<ParamView>& grads, double grad_clip) {
    std::size_t total = 0;
    for (const auto& p : params) total += p.size;
    if (m.size() != total) {
      m.assign(total, 0.0);
      v.assign(total, 0.0);
    }
    double gsq = 0.0;
    for (const auto& g : grads)
      for (std::size_t i = 0; i < g.size; ++i) gsq += g.data[i] * g.data[i];
    const double gnorm = std::sqrt(gsq);
    const double scale = gnorm > grad_clip ? grad_clip / gnorm : 1.0;

    ++t;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    std::size_t off = 0;
    for (std::size_t k = 0; k < params.size(); ++k) {
      for (std::size_t i = 0; i < params[k].size; ++i) {
        const double g = grads[k].data[i] * scale;
        m[off] = beta1 * m[off] + (1.0 - beta1) * g;
        v[off] = beta2 * v[off] + (1.0 - beta2) * g * g;
        params[k].data[i] -=
            lr * (m[off] / bc1) / (std::sqrt(v[off] / bc2) + eps);
        ++off;
      }
    }
  }
};

// -- shared cell backward math ---------------------------------------------------

namespace detail {

// Backprop through h = tanh(pre).
inline std::vector<double> rnn_pre_grad(const std::vector<double>& h,
                                        const std::vector<double>& dh) {
  std::vector<double> dpre(h.size());
  for (std::size_t i = 0; i < h.size(); ++i)
    dpre[i] = dh[i] * (1.0 - h[i] * h[i]);
  return dpre;
}

struct LstmStepCache {
  std::vector<double> gates;   // activated (i, o, f, g), length 4N
  std::vector<double> c;       // new cell
  std::vector<double> tanh_c;  // tanh(c)
};

inline void lstm_forward_cached(const std::vector<double>& pre,
                                const std::vector<double>& c_prev,
                                LstmStepCache* cache,
                                std::vector<double>* h_out) {
  const std::size_t n = c_prev.size();
  cache->gates.resize(4 * n);
  cache->c.resize(n);
  cache->tanh_c.resize(n);
  h_out->resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double i = sigmoid(pre[k]);
    const double o = sigmoid(pre[n + k]);
    const double f = sigmoid(pre[2 * n + k]);
    const double g = std::tanh(pre[3 * n + k]);
    cache->gates[k] = i;
    cache->gates[n + k] = o;
    cache->gates[2 * n + k] = f;
    cache->gates[3 * n + k] = g;
    const double c = f * c_prev[k] + i * g;
    cache->c[k] = c;
    cache->tanh_c[k] = std::tanh(c);
    (*h_out)[k] = o * cache->tanh_c[k];
  }
}

// Returns dpre; dc_carry is consumed and replaced by dc_prev.
inline std::vector<double> lstm_pre_grad(const LstmStepCache& cache,
                                         const std::vector<double>& c_prev,
                                         const std::vector<double>& dh,
                                         std::vector<double>* dc_carry) {
  const std::size_t n = c_prev.size();
  std::vector<double> dpre(4 * n);
  for (std::size_t k = 0; k < n; ++k) {
    const double i = cache.gates[k];
    const double o = cache.gates[n + k];
    const double f = cache.gates[2 * n + k];
    const double g = cache.gates[3 * n + k];
    const double tc = cache.tanh_c[k];
    const double dc = (*dc_carry)[k] + dh[k] * o * (1.0 - tc * tc);
    const double d_o = dh[k] * tc;
    const double d_i = dc * g;
    const double d_f = dc * c_prev[k];
    const double d_g = dc * i;
    dpre[k] = d_i * i * (1.0 - i);
    dpre[n + k] = d_o * o * (1.0 - o);
    dpre[2 * n + k] = d_f * f * (1.0 - f);
    dpre[3 * n + k] = d_g * (1.0 - g * g);
    (*dc_carry)[k] = dc * f;
  }
  return dpre;
}

// softmax cross-entropy: returns loss, writes dlogits (softmax - onehot).
inline double softmax_xent(const std::vector<double>& logits, int target,
                           std::vector<double>* dlogits) {
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double sum = 0.0;
  dlogits->resize(logits.size());
  for (std::size_t k = 0; k < logits.size(); ++k) {
    (*dlogits)[k] = std::exp(logits[k] - mx);
    sum += (*dlogits)[k];
  }
  for (double& v : *dlogits) v /= sum;
  const double loss =
      -(logits[static_cast<std::size_t>(target)] - mx - std::log(sum));
  (*dlogits)[static_cast<std::size_t>(target)] -= 1.0;
  return loss;
}

}  // namespace detail

// -- dense BPTT window -------------------------------------------------------------

struct DenseGrads {
  std::vector<DenseMatrix> d_w_h, d_w_x;
  std::vector<std::vector<double>> d_bias;
  DenseMatrix d_embed, d_out_proj;

  static DenseGrads zeros_like(const NetworkModel& m) {
    DenseGrads g;
    for (const auto& l : m.layers) {
      g.d_w_h.emplace_back(l.w_h.rows(), l.w_h.cols());
      g.d_w_x.emplace_back(l.w_x.rows(), l.w_x.cols());
      g.d_bias.emplace_back(l.bias.size(), 0.0);
    }
    g.d_embed = DenseMatrix(m.embed.rows(), m.embed.cols());
    g.d_out_proj = DenseMatrix(m.out_proj.rows(), m.out_proj.cols());
    return g;
  }

  std::vector<ParamView> views() {
    std::vector<ParamView> out;
    for (std::size_t l = 0; l < d_w_h.size(); ++l) {
      out.push_back({d_w_h[l].data().data(), d_w_h[l].size()});
      out.push_back({d_w_x[l].data().data(), d_w_x[l].size()});
      out.push_back({d_bias[l].data(), d_bias[l].size()});
    }
    out.push_back({d_embed.data().data(), d_embed.size()});
    out.push_back({d_out_proj.data().data(), d_out_proj.size()});
    return out;
  }
};

// One truncated-BPTT window: inputs tokens[0..T-1], targets tokens[1..T]
// (tokens has length T+1). Gradients are accumulated into *grads scaled by
// `weight / T`; *state carries values (not gradients) across windows.
inline double dense_window(const NetworkModel& model,
                           const std::vector<int>& tokens, CellState* state,
                           DenseGrads* grads, double weight = 1.0) {
  const std::size_t T = tokens.size() - 1;
  const std::size_t L = model.layers.size();
  const bool lstm = model.kind == CellKind::lstm;

  std::vector<std::vector<std::vector<double>>> h(T), x_in(T);
  std::vector<std::vector<detail::LstmStepCache>> lc(T);
  std::vector<std::vector<double>> h0 = state->h, c0 = state->c;
  std::vector<std::vector<std::vector<double>>> c_prev_t(T);

  double loss = 0.0;
  std::vector<std::vector<double>> dlogits(T);
  for (std::size_t t = 0; t < T; ++t) {
    h[t].resize(L);
    x_in[t].resize(L);
    lc[t].resize(L);
    c_prev_t[t].resize(L);
    std::vector<double> x(model.embed.cols());
    for (std::size_t j = 0; j < x.size(); ++j)
      x[j] = model.embed(static_cast<std::size_t>(tokens[t]), j);
    for (std::size_t l = 0; l < L; ++l) {
      x_in[t][l] = x;
      const std::vector<double>& hp = t == 0 ? h0[l] : h[t - 1][l];
      const std::vector<double> pre = layer_preact(model.layers[l], hp, x);
      if (lstm) {
        const std::vector<double>& cp = t == 0 ? c0[l] : c_prev_t[t][l];
        // c_prev for this step was stored when the previous step ran
        const std::vector<double>& cprev =
            t == 0 ? c0[l] : lc[t - 1][l].c;
        c_prev_t[t][l] = cprev;
        detail::lstm_forward_cached(pre, cprev, &lc[t][l], &h[t][l]);
        (void)cp;
      } else {
        h[t][l] = rnn_cell_from_pre(pre);
      }
      x = h[t][l];
    }
    const std::vector<double> logits = matvec_t(model.out_proj, x);
    loss += detail::softmax_xent(logits, tokens[t + 1], &dlogits[t]);
  }
  loss /= static_cast<double>(T);

  if (grads) {
    const double w = weight / static_cast<double>(T);
    std::vector<std::vector<double>> dh_carry(L), dc_carry(L);
    for (std::size_t l = 0; l < L; ++l) {
      dh_carry[l].assign(model.layers[l].width(), 0.0);
      dc_carry[l].assign(model.layers[l].width(), 0.0);
    }
    for (std::size_t t = T; t-- > 0;) {
      std::vector<std::vector<double>> dh(L);
      for (std::size_t l = 0; l < L; ++l) dh[l] = dh_carry[l];
      // output projection feeds the top layer
      for (std::size_t r = 0; r < model.out_proj.rows(); ++r) {
        double acc = 0.0;
        for (std::size_t cidx = 0; cidx < model.out_proj.cols(); ++cidx) {
          acc += model.out_proj(r, cidx) * dlogits[t][cidx] * w;
          grads->d_out_proj(r, cidx) += h[t][L - 1][r] * dlogits[t][cidx] * w;
        }
        dh[L - 1][r] += acc;
      }
      for (std::size_t l = L; l-- > 0;) {
        const LayerWeights& lay = model.layers[l];
        std::vector<double> dpre;
        if (lstm) {
          dpre = detail::lstm_pre_grad(lc[t][l], c_prev_t[t][l], dh[l],
                                       &dc_carry[l]);
        } else {
          dpre = detail::rnn_pre_grad(h[t][l], dh[l]);
        }
        const std::vector<double>& hp = t == 0 ? h0[l] : h[t - 1][l];
        for (std::size_t r = 0; r < lay.gate_rows(); ++r) {
          const double d = dpre[r];
          if (d == 0.0) continue;
          grads->d_bias[l][r] += d;
          for (std::size_t cdx = 0; cdx < lay.width(); ++cdx)
            grads->d_w_h[l](r, cdx) += d * hp[cdx];
          for (std::size_t cdx = 0; cdx < lay.in_width(); ++cdx)
            grads->d_w_x[l](r, cdx) += d * x_in[t][l][cdx];
        }
        dh_carry[l] = matvec_t(lay.w_h, dpre);
        const std::vector<double> dx = matvec_t(lay.w_x, dpre);
        if (l > 0) {
          for (std::size_t k = 0; k < dx.size(); ++k) dh[l - 1][k] += dx[k];
        } else {
          for (std::size_t k = 0; k < dx.size(); ++k)
            grads->d_embed(static_cast<std::size_t>(tokens[t]), k) += dx[k];
        }
      }
    }
  }

  state->h = h[T - 1];
  if (lstm)
    for (std::size_t l = 0; l < L; ++l) state->c[l] = lc[T - 1][l].c;
  return loss;
}

// -- compressed BPTT window -----------------------------------------------------------

struct CompressedGrads {
  std::vector<DenseMatrix> d_dict, d_dict_x;
  std::vector<std::vector<double>> d_z_h, d_z_x, d_bias;
  DenseMatrix d_embed, d_out_proj;

  static CompressedGrads zeros_like(const CompressedModel& m) {
    CompressedGrads g;
    for (const auto& l : m.layers) {
      g.d_dict.emplace_back(l.dict.atoms.rows(), l.dict.atoms.cols());
      g.d_dict_x.emplace_back(
          l.shared_d ? DenseMatrix(1, 1)
                     : DenseMatrix(l.dict_x.atoms.rows(), l.dict_x.atoms.cols()));
      g.d_z_h.emplace_back(l.z_h.nnz(), 0.0);
      g.d_z_x.emplace_back(l.z_x.nnz(), 0.0);
      g.d_bias.emplace_back(l.bias.size(), 0.0);
    }
    g.d_embed = DenseMatrix(m.embed.rows(), m.embed.cols());
    g.d_out_proj = DenseMatrix(m.out_proj.rows(), m.out_proj.cols());
    return g;
  }

  std::vector<ParamView> views(const CompressedModel& m, bool freeze_dict) {
    std::vector<ParamView> out;
    for (std::size_t l = 0; l < d_dict.size(); ++l) {
      if (!freeze_dict) {
        out.push_back({d_dict[l].data().data(), d_dict[l].size()});
        if (!m.layers[l].shared_d)
          out.push_back({d_dict_x[l].data().data(), d_dict_x[l].size()});
      }
      out.push_back({d_z_h[l].data(), d_z_h[l].size()});
      out.push_back({d_z_x[l].data(), d_z_x[l].size()});
      out.push_back({d_bias[l].data(), d_bias[l].size()});
    }
    out.push_back({d_embed.data().data(), d_embed.size()});
    out.push_back({d_out_proj.data().data(), d_out_proj.size()});
    return out;
  }
};

inline double compressed_window(const CompressedModel& model,
                                const std::vector<ShiftGroups>& sgs,
                                const std::vector<int>& tokens,
                                CellState* state, CompressedGrads* grads,
                                double weight = 1.0) {
  const std::size_t T = tokens.size() - 1;
  const std::size_t L = model.layers.size();
  const bool lstm = model.kind == CellKind::lstm;

  std::vector<std::vector<std::vector<double>>> h(T), x_in(T), u_x(T),
      s_grp(T), c_prev_t(T);
  std::vector<std::vector<detail::LstmStepCache>> lc(T);
  std::vector<std::vector<double>> h0 = state->h, c0 = state->c;

  double loss = 0.0;
  std::vector<std::vector<double>> dlogits(T);
  for (std::size_t t = 0; t < T; ++t) {
    h[t].resize(L);
    x_in[t].resize(L);
    u_x[t].resize(L);
    s_grp[t].resize(L);
    c_prev_t[t].resize(L);
    lc[t].resize(L);
    std::vector<double> x(model.embed.cols());
    for (std::size_t j = 0; j < x.size(); ++j)
      x[j] = model.embed(static_cast<std::size_t>(tokens[t]), j);
    for (std::size_t l = 0; l < L; ++l) {
      const CompressedLayer& cl = model.layers[l];
      x_in[t][l] = x;
      const std::vector<double>& hp = t == 0 ? h0[l] : h[t - 1][l];

      std::vector<double> u = csr_matvec(cl.z_x, x);
      std::vector<double> pre = matvec(cl.x_dict().atoms, u);
      u_x[t][l] = std::move(u);
      std::vector<double>& s = s_grp[t][l];
      s.assign(sgs[l].groups.size(), 0.0);
      for (std::size_t q = 0; q < sgs[l].groups.size(); ++q) {
        double acc = 0.0;
        for (const auto& [col, vi] : sgs[l].groups[q].entries)
          acc += cl.z_h.vals[vi] * hp[col];
        s[q] = acc;
        if (acc != 0.0) axpy(acc, sgs[l].groups[q].shifted_atom, pre);
      }
      for (std::size_t r = 0; r < pre.size(); ++r) pre[r] += cl.bias[r];

      if (lstm) {
        const std::vector<double>& cprev = t == 0 ? c0[l] : lc[t - 1][l].c;
        c_prev_t[t][l] = cprev;
        detail::lstm_forward_cached(pre, cprev, &lc[t][l], &h[t][l]);
      } else {
        h[t][l] = rnn_cell_from_pre(pre);
      }
      x = h[t][l];
    }
    const std::vector<double> logits = matvec_t(model.out_proj, x);
    loss += detail::softmax_xent(logits, tokens[t + 1], &dlogits[t]);
  }
  loss /= static_cast<double>(T);

  if (grads) {
    const double w = weight / static_cast<double>(T);
    std::vector<std::vector<double>> dh_carry(L), dc_carry(L);
    for (std::size_t l = 0; l < L; ++l) {
      dh_carry[l].assign(model.layers[l].width(), 0.0);
      dc_carry[l].assign(model.layers[l].width(), 0.0);
    }
    for (std::size_t t = T; t-- > 0;) {
      std::vector<std::vector<double>> dh(L);
      for (std::size_t l = 0; l < L; ++l) dh[l] = dh_carry[l];
      for (std::size_t r = 0; r < model.out_proj.rows(); ++r) {
        double acc = 0.0;
        for (std::size_t cidx = 0; cidx < model.out_proj.cols(); ++cidx) {
          acc += model.out_proj(r, cidx) * dlogits[t][cidx] * w;
          grads->d_out_proj(r, cidx) += h[t][L - 1][r] * dlogits[t][cidx] * w;
        }
        dh[L - 1][r] += acc;
      }
      for (std::size_t l = L; l-- > 0;) {
        const CompressedLayer& cl = model.layers[l];
        std::vector<double> dpre;
        if (lstm) {
          dpre = detail::lstm_pre_grad(lc[t][l], c_prev_t[t][l], dh[l],
                                       &dc_carry[l]);
        } else {
          dpre = detail::rnn_pre_grad(h[t][l], dh[l]);
        }
        for (std::size_t r = 0; r < dpre.size(); ++r)
          grads->d_bias[l][r] += dpre[r];

        // x path: pre += D (z_x x)
        const DenseMatrix& dxm = cl.x_dict().atoms;
        DenseMatrix& ddxm = cl.shared_d ? grads->d_dict[l] : grads->d_dict_x[l];
        for (std::size_t r = 0; r < dxm.rows(); ++r)
          for (std::size_t q = 0; q < dxm.cols(); ++q)
            ddxm(r, q) += dpre[r] * u_x[t][l][q];
        const std::vector<double> du = matvec_t(dxm, dpre);
        std::vector<double> dx(cl.in_width(), 0.0);
        for (std::size_t r = 0; r < cl.z_x.rows; ++r)
          for (std::size_t k = cl.z_x.row_ptr[r]; k < cl.z_x.row_ptr[r + 1];
               ++k) {
            grads->d_z_x[l][k] += du[r] * x_in[t][l][cl.z_x.col_idx[k]];
            dx[cl.z_x.col_idx[k]] += du[r] * cl.z_x.vals[k];
          }

        // h path: pre += sum_groups s_q * shifted_atom_q
        const std::vector<double>& hp = t == 0 ? h0[l] : h[t - 1][l];
        std::vector<double> dhp(cl.width(), 0.0);
        for (std::size_t q = 0; q < sgs[l].groups.size(); ++q) {
          const auto& grp = sgs[l].groups[q];
          const double ds = dot(grp.shifted_atom, dpre);
          for (const auto& [col, vi] : grp.entries) {
            grads->d_z_h[l][vi] += ds * hp[col];
            dhp[col] += ds * cl.z_h.vals[vi];
          }
          if (s_grp[t][l][q] != 0.0) {
            // gradient to the unshifted atom via the adjoint shift
            const std::vector<double> back = sgs[l].adjoint_of(q, dpre);
            const std::size_t atom = sgs[l].group_atom(q);
            for (std::size_t r = 0; r < back.size(); ++r)
              grads->d_dict[l](r, atom) += s_grp[t][l][q] * back[r];
          }
        }
        dh_carry[l] = std::move(dhp);
        if (l > 0) {
          for (std::size_t k = 0; k < dx.size(); ++k) dh[l - 1][k] += dx[k];
        } else {
          for (std::size_t k = 0; k < dx.size(); ++k)
            grads->d_embed(static_cast<std::size_t>(tokens[t]), k) += dx[k];
        }
      }
    }
  }

  state->h = h[T - 1];
  if (lstm)
    for (std::size_t l = 0; l < L; ++l) state->c[l] = lc[T - 1][l].c;
  return loss;
}

// -- model initialization and the training loops -------------------------------------

inline NetworkModel init_model(const ArchSpec& arch, const Vocab& vocab,
                               std::uint64_t seed) {
  if (arch.widths.empty()) throw ConfigError("init_model: no layer widths");
  Rng rng(seed);
  NetworkModel m;
  m.kind = arch.kind;
  m.vocab = vocab;
  const std::size_t g = gate_multiple(arch.kind);
  for (std::size_t l = 0; l < arch.widths.size(); ++l) {
    const std::size_t n = arch.widths[l];
    const std::size_t n_in = l == 0 ? arch.widths[0] : arch.widths[l - 1];
    LayerWeights lw;
    lw.kind = arch.kind;
    lw.w_h = DenseMatrix(g * n, n);
    lw.w_x = DenseMatrix(g * n, n_in);
    lw.bias.assign(g * n, 0.0);
    const double r_h = 1.0 / std::sqrt(static_cast<double>(n));
    const double r_x = 1.0 / std::sqrt(static_cast<double>(n_in));
    for (double& v : lw.w_h.data()) v = uniform(rng, -r_h, r_h);
    for (double& v : lw.w_x.data()) v = uniform(rng, -r_x, r_x);
    if (arch.kind == CellKind::lstm)
      for (std::size_t k = 0; k < n; ++k) lw.bias[2 * n + k] = 1.0;  // forget
    m.layers.push_back(std::move(lw));
  }
  m.embed = DenseMatrix(vocab.size(), arch.widths.front());
  m.out_proj = DenseMatrix(arch.widths.back(), vocab.size());
  const double r_e = 1.0 / std::sqrt(static_cast<double>(arch.widths.front()));
  for (double& v : m.embed.data()) v = uniform(rng, -r_e, r_e);
  const double r_o = 1.0 / std::sqrt(static_cast<double>(arch.widths.back()));
  for (double& v : m.out_proj.data()) v = uniform(rng, -r_o, r_o);
  return m;
}

namespace detail {

// Contiguous per-stream segments for batched truncated BPTT.
struct BatchPlan {
  std::vector<std::size_t> starts;
  std::size_t seg_len = 0;
  std::size_t windows = 0;

  static BatchPlan make(std::size_t train_len, std::size_t batch,
                        std::size_t bptt_len) {
    BatchPlan p;
    p.seg_len = train_len / batch;
    if (p.seg_len < bptt_len + 1)
      throw ConfigError("training: corpus too small for batch/bptt settings");
    for (std::size_t b = 0; b < batch; ++b) p.starts.push_back(b * p.seg_len);
    p.windows = (p.seg_len - 1) / bptt_len;
    return p;
  }
};

}  // namespace detail

struct TrainResult {
  NetworkModel model;
  std::vector<TrainLogEntry> log;
};

inline TrainResult train_baseline(const std::string& corpus,
                                  const ArchSpec& arch,
                                  const TrainConfig& cfg) {
  cfg.validate();
  if (corpus.size() < 10 * cfg.bptt_len)
    throw ConfigError("train_baseline: corpus shorter than 10 * bptt_len");

  const Vocab vocab = Vocab::from_corpus(corpus);
  const std::vector<int> tokens = vocab.encode(corpus);
  const std::size_t val_len = std::max<std::size_t>(tokens.size() / 10, 2);
  const std::size_t train_len = tokens.size() - val_len;
  const std::string val_slice = corpus.substr(train_len);

  TrainResult out;
  out.model = init_model(arch, vocab, cfg.seed);
  AdamOptimizer opt;
  opt.lr = cfg.lr;

  const auto plan = detail::BatchPlan::make(train_len, cfg.batch, cfg.bptt_len);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<CellState> states(cfg.batch, CellState::zero(out.model));
    double epoch_loss = 0.0;
    std::size_t seen = 0;
    for (std::size_t wdx = 0; wdx < plan.windows; ++wdx) {
      DenseGrads grads = DenseGrads::zeros_like(out.model);
      for (std::size_t b = 0; b < cfg.batch; ++b) {
        const std::size_t pos = plan.starts[b] + wdx * cfg.bptt_len;
        const std::vector<int> window(tokens.begin() + pos,
                                      tokens.begin() + pos + cfg.bptt_len + 1);
        epoch_loss += dense_window(out.model, window, &states[b], &grads,
                                   1.0 / static_cast<double>(cfg.batch));
        ++seen;
      }
      auto params = collect_params(out.model);
      opt.step(params, grads.views(), cfg.grad_clip);
    }
    const double val =
        evaluate(out.model, val_slice).cross_entropy;
    out.log.push_back(TrainLogEntry{
        epoch, seen ? epoch_loss / static_cast<double>(seen) : 0.0, val});
  }
  return out;
}

// Renormalizes dictionary columns to unit norm and scales the matching code
// rows by the old norm, keeping every product (and the zero patterns) intact.
inline void renormalize_with_compensation(CompressedLayer* cl) {
  auto compensate = [](Dictionary& dict, CsrMatrix* z_a, CsrMatrix* z_b) {
    for (std::size_t k = 0; k < dict.num_atoms(); ++k) {
      double nsq = 0.0;
      for (std::size_t r = 0; r < dict.atom_len(); ++r)
        nsq += dict.atoms(r, k) * dict.atoms(r, k);
      const double nrm = std::sqrt(nsq);
      if (nrm == 0.0) continue;
      for (std::size_t r = 0; r < dict.atom_len(); ++r)
        dict.atoms(r, k) /= nrm;
      if (z_a)
        for (std::size_t e = z_a->row_ptr[k]; e < z_a->row_ptr[k + 1]; ++e)
          z_a->vals[e] *= nrm;
      if (z_b)
        for (std::size_t e = z_b->row_ptr[k]; e < z_b->row_ptr[k + 1]; ++e)
          z_b->vals[e] *= nrm;
    }
  };
  if (cl->shared_d) {
    compensate(cl->dict, &cl->z_h, &cl->z_x);
  } else {
    compensate(cl->dict, &cl->z_h, nullptr);
    compensate(cl->dict_x, &cl->z_x, nullptr);
  }
}

struct FinetuneResult {
  CompressedModel model;
  std::vector<TrainLogEntry> log;
};

inline FinetuneResult finetune_masked(const CompressedModel& cmodel,
                                      const std::string& corpus,
                                      const TrainConfig& cfg,
                                      bool freeze_dict = false) {
  cfg.validate();
  if (corpus.size() < 10 * cfg.bptt_len)
    throw ConfigError("finetune_masked: corpus shorter than 10 * bptt_len");

  FinetuneResult out;
  out.model = cmodel;
  const std::vector<int> tokens = out.model.vocab.encode(corpus);
  const std::size_t val_len = std::max<std::size_t>(tokens.size() / 10, 2);
  const std::size_t train_len = tokens.size() - val_len;
  const std::string val_slice = corpus.substr(train_len);

  // sparsity patterns must survive every step
  std::vector<std::vector<std::uint32_t>> pattern_h, pattern_x;
  for (const auto& l : out.model.layers) {
    pattern_h.push_back(l.z_h.col_idx);
    pattern_x.push_back(l.z_x.col_idx);
  }

  AdamOptimizer opt;
  opt.lr = cfg.lr;
  const auto plan = detail::BatchPlan::make(train_len, cfg.batch, cfg.bptt_len);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<CellState> states(cfg.batch, CellState::zero(out.model));
    double epoch_loss = 0.0;
    std::size_t seen = 0;
    std::vector<ShiftGroups> sgs;
    for (const auto& l : out.model.layers) sgs.push_back(ShiftGroups::build(l));
    for (std::size_t wdx = 0; wdx < plan.windows; ++wdx) {
      CompressedGrads grads = CompressedGrads::zeros_like(out.model);
      for (std::size_t b = 0; b < cfg.batch; ++b) {
        const std::size_t pos = plan.starts[b] + wdx * cfg.bptt_len;
        const std::vector<int> window(tokens.begin() + pos,
                                      tokens.begin() + pos + cfg.bptt_len + 1);
        epoch_loss +=
            compressed_window(out.model, sgs, window, &states[b], &grads,
                              1.0 / static_cast<double>(cfg.batch));
        ++seen;
      }
      auto params = collect_params(out.model, freeze_dict);
      opt.step(params, grads.views(out.model, freeze_dict), cfg.grad_clip);
      for (std::size_t l = 0; l < out.model.layers.size(); ++l) {
        renormalize_with_compensation(&out.model.layers[l]);
        if (out.model.layers[l].z_h.col_idx != pattern_h[l] ||
            out.model.layers[l].z_x.col_idx != pattern_x[l])
          throw IntegrityError("finetune_masked: sparsity pattern changed");
      }
      // shifted-atom caches depend on the dictionary values
      if (!freeze_dict) {
        sgs.clear();
        for (const auto& l : out.model.layers)
          sgs.push_back(ShiftGroups::build(l));
      }
    }
    const double val = evaluate(out.model, val_slice).cross_entropy;
    out.log.push_back(TrainLogEntry{
        epoch, seen ? epoch_loss / static_cast<double>(seen) : 0.0, val});
  }
  return out;
}

}  // namespace dirnet
