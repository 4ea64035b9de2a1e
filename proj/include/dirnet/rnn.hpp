#pragma once

// Dense and factorized forward passes for stacked vanilla-RNN / LSTM
// character models, plus perplexity evaluation. The factorized path never
// materializes D*Z: codes are applied to the activation vector first.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "dirnet/error.hpp"
#include "dirnet/layer.hpp"
#include "dirnet/matrix.hpp"

namespace dirnet {

struct Vocab {
  std::vector<std::uint8_t> symbols;  // sorted unique bytes
  std::array<int, 256> index{};

  static Vocab from_corpus(const std::string& corpus) {
    std::array<bool, 256> seen{};
    for (unsigned char c : corpus) seen[c] = true;
    Vocab v;
    v.index.fill(-1);
    for (int b = 0; b < 256; ++b)
      if (seen[b]) {
        v.index[b] = static_cast<int>(v.symbols.size());
        v.symbols.push_back(static_cast<std::uint8_t>(b));
      }
    return v;
  }

  std::size_t size() const { return symbols.size(); }

  std::vector<int> encode(const std::string& text) const {
    std::vector<int> out;
    out.reserve(text.size());
    for (unsigned char c : text) {
      if (index[c] < 0)
        throw DomainError("Vocab: byte " + std::to_string(int(c)) +
                          " not in vocabulary");
      out.push_back(index[c]);
    }
    return out;
  }
};

struct NetworkModel {
  std::vector<LayerWeights> layers;
  DenseMatrix embed;     // vocab x N0 lookup
  DenseMatrix out_proj;  // N_last x vocab
  Vocab vocab;
  CellKind kind = CellKind::vanilla_rnn;

  void validate() const {
    if (layers.empty()) throw ShapeError("NetworkModel: no layers");
    for (const auto& l : layers) l.validate();
    if (embed.cols() != layers.front().in_width())
      throw ShapeError("NetworkModel: embed width != first layer input");
    for (std::size_t l = 1; l < layers.size(); ++l)
      if (layers[l].in_width() != layers[l - 1].width())
        throw ShapeError("NetworkModel: layer widths incompatible");
    if (out_proj.rows() != layers.back().width())
      throw ShapeError("NetworkModel: out_proj rows != last layer width");
    if (embed.rows() != vocab.size() || out_proj.cols() != vocab.size())
      throw ShapeError("NetworkModel: vocab size mismatch");
  }
};

struct CompressedModel {
  std::vector<CompressedLayer> layers;
  DenseMatrix embed;
  DenseMatrix out_proj;
  Vocab vocab;
  CellKind kind = CellKind::vanilla_rnn;
};

struct CellState {
  std::vector<std::vector<double>> h;
  std::vector<std::vector<double>> c;  // LSTM only

  template <class Model>
  static CellState zero(const Model& m) {
    CellState s;
    for (const auto& l : m.layers) {
      s.h.emplace_back(l.width(), 0.0);
      s.c.emplace_back(l.width(), 0.0);
    }
    return s;
  }
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// -- gate math shared by dense and factorized paths --------------------------

inline std::vector<double> rnn_cell_from_pre(const std::vector<double>& pre) {
  std::vector<double> h(pre.size());
  for (std::size_t i = 0; i < pre.size(); ++i) h[i] = std::tanh(pre[i]);
  return h;
}

// pre is the stacked (i, o, f, g) pre-activation of length 4N.
inline void lstm_cell_from_pre(const std::vector<double>& pre,
                               const std::vector<double>& c_prev,
                               std::vector<double>* h_out,
                               std::vector<double>* c_out) {
  const std::size_t n = c_prev.size();
  h_out->resize(n);
  c_out->resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double i = sigmoid(pre[k]);
    const double o = sigmoid(pre[n + k]);
    const double f = sigmoid(pre[2 * n + k]);
    const double g = std::tanh(pre[3 * n + k]);
    const double c = f * c_prev[k] + i * g;
    (*c_out)[k] = c;
    (*h_out)[k] = o * std::tanh(c);
  }
}

// -- dense steps --------------------------------------------------------------

inline std::vector<double> layer_preact(const LayerWeights& l,
                                        const std::vector<double>& h_prev,
                                        const std::vector<double>& x_in) {
  std::vector<double> pre = matvec(l.w_x, x_in);
  const std::vector<double> rec = matvec(l.w_h, h_prev);
  for (std::size_t i = 0; i < pre.size(); ++i) pre[i] += rec[i] + l.bias[i];
  return pre;
}

inline std::vector<double> rnn_step(const LayerWeights& l,
                                    const std::vector<double>& h_prev,
                                    const std::vector<double>& x_in) {
  return rnn_cell_from_pre(layer_preact(l, h_prev, x_in));
}

inline void lstm_step(const LayerWeights& l, const std::vector<double>& h_prev,
                      const std::vector<double>& c_prev,
                      const std::vector<double>& x_in,
                      std::vector<double>* h_out, std::vector<double>* c_out) {
  lstm_cell_from_pre(layer_preact(l, h_prev, x_in), c_prev, h_out, c_out);
}

// -- factorized layer application ---------------------------------------------

// Nonzeros of z_h grouped by (atom, shift) with the shifted atom cached, so
// W_h * v costs O(nnz + groups * n) instead of a dense product.
struct ShiftGroups {
  struct Group {
    std::vector<double> shifted_atom;
    std::vector<std::pair<std::uint32_t, std::size_t>> entries;  // (col, val idx)
    std::size_t atom = 0;
    ShiftOp op;
  };
  std::vector<Group> groups;

  std::size_t group_atom(std::size_t q) const { return groups[q].atom; }

  // Pulls a pre-activation gradient back through the group's shift.
  std::vector<double> adjoint_of(std::size_t q,
                                 const std::vector<double>& g) const {
    return groups[q].op.adjoint(g);
  }

  static ShiftGroups build(const CompressedLayer& cl) {
    ShiftGroups sg;
    // collect distinct (atom, offset) keys in deterministic row order
    std::vector<std::pair<std::size_t, ShiftOp>> keys;
    std::vector<std::size_t> entry_group(cl.z_h.nnz());
    for (std::size_t r = 0; r < cl.z_h.rows; ++r) {
      for (std::size_t k = cl.z_h.row_ptr[r]; k < cl.z_h.row_ptr[r + 1]; ++k) {
        const ShiftOp op = cl.shifts_h[k];
        std::size_t g = keys.size();
        for (std::size_t q = 0; q < keys.size(); ++q)
          if (keys[q].first == r && keys[q].second == op) {
            g = q;
            break;
          }
        if (g == keys.size()) keys.emplace_back(r, op);
        entry_group[k] = g;
      }
    }
    sg.groups.resize(keys.size());
    for (std::size_t q = 0; q < keys.size(); ++q) {
      sg.groups[q].atom = keys[q].first;
      sg.groups[q].op = keys[q].second;
      sg.groups[q].shifted_atom =
          keys[q].second.apply(cl.dict.atoms.col(keys[q].first));
    }
    for (std::size_t r = 0; r < cl.z_h.rows; ++r)
      for (std::size_t k = cl.z_h.row_ptr[r]; k < cl.z_h.row_ptr[r + 1]; ++k)
        sg.groups[entry_group[k]].entries.emplace_back(cl.z_h.col_idx[k], k);
    return sg;
  }

  std::vector<double> apply(const CompressedLayer& cl,
                            const std::vector<double>& v) const {
    std::vector<double> y(cl.gate_rows(), 0.0);
    for (const Group& g : groups) {
      double s = 0.0;
      for (const auto& [col, vi] : g.entries) s += cl.z_h.vals[vi] * v[col];
      if (s != 0.0) axpy(s, g.shifted_atom, y);
    }
    return y;
  }
};

inline std::vector<double> compressed_preact(const CompressedLayer& cl,
                                             const ShiftGroups& sg,
                                             const std::vector<double>& h_prev,
                                             const std::vector<double>& x_in) {
  // codes first, then the dictionary: two skinny products
  std::vector<double> u = csr_matvec(cl.z_x, x_in);
  std::vector<double> pre = matvec(cl.x_dict().atoms, u);
  const std::vector<double> rec = sg.apply(cl, h_prev);
  for (std::size_t i = 0; i < pre.size(); ++i) pre[i] += rec[i] + cl.bias[i];
  return pre;
}

// -- full forward passes -------------------------------------------------------

inline std::vector<std::vector<double>> forward_dense(
    const NetworkModel& model, const std::vector<int>& tokens) {
  std::vector<std::vector<double>> logits;
  CellState st = CellState::zero(model);
  for (int tok : tokens) {
    if (tok < 0 || static_cast<std::size_t>(tok) >= model.vocab.size())
      throw DomainError("forward_dense: token out of range");
    std::vector<double> x(model.embed.cols());
    for (std::size_t j = 0; j < x.size(); ++j)
      x[j] = model.embed(static_cast<std::size_t>(tok), j);
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
      if (model.kind == CellKind::lstm) {
        std::vector<double> h, c;
        lstm_step(model.layers[l], st.h[l], st.c[l], x, &h, &c);
        st.h[l] = std::move(h);
        st.c[l] = std::move(c);
      } else {
        st.h[l] = rnn_step(model.layers[l], st.h[l], x);
      }
      x = st.h[l];
    }
    logits.push_back(matvec_t(model.out_proj, x));
  }
  return logits;
}

inline std::vector<std::vector<double>> forward_compressed(
    const CompressedModel& model, const std::vector<int>& tokens) {
  std::vector<ShiftGroups> sgs;
  sgs.reserve(model.layers.size());
  for (const auto& l : model.layers) sgs.push_back(ShiftGroups::build(l));

  std::vector<std::vector<double>> logits;
  CellState st = CellState::zero(model);
  for (int tok : tokens) {
    if (tok < 0 || static_cast<std::size_t>(tok) >= model.vocab.size())
      throw DomainError("forward_compressed: token out of range");
    std::vector<double> x(model.embed.cols());
    for (std::size_t j = 0; j < x.size(); ++j)
      x[j] = model.embed(static_cast<std::size_t>(tok), j);
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
      const std::vector<double> pre =
          compressed_preact(model.layers[l], sgs[l], st.h[l], x);
      if (model.kind == CellKind::lstm) {
        std::vector<double> h, c;
        lstm_cell_from_pre(pre, st.c[l], &h, &c);
        st.h[l] = std::move(h);
        st.c[l] = std::move(c);
      } else {
        st.h[l] = rnn_cell_from_pre(pre);
      }
      x = st.h[l];
    }
    logits.push_back(matvec_t(model.out_proj, x));
  }
  return logits;
}

// -- evaluation ----------------------------------------------------------------

struct EvalMetrics {
  double cross_entropy = 0.0;  // mean nats per predicted token
  double perplexity = 0.0;
  double bits_per_char = 0.0;
};

inline double log_softmax_pick(const std::vector<double>& logits, int target) {
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - mx);
  return logits[static_cast<std::size_t>(target)] - mx - std::log(sum);
}

template <class Model, class ForwardFn>
inline EvalMetrics evaluate_with(const Model& model, ForwardFn&& forward,
                                 const std::string& corpus) {
  const std::vector<int> tokens = model.vocab.encode(corpus);
  if (tokens.size() < 2)
    throw DomainError("evaluate: corpus must contain at least two characters");
  const auto logits = forward(model, tokens);
  double nll = 0.0;
  for (std::size_t t = 0; t + 1 < tokens.size(); ++t)
    nll -= log_softmax_pick(logits[t], tokens[t + 1]);
  EvalMetrics m;
  m.cross_entropy = nll / static_cast<double>(tokens.size() - 1);
  m.perplexity = std::exp(m.cross_entropy);
  m.bits_per_char = m.cross_entropy / std::log(2.0);
  return m;
}

inline EvalMetrics evaluate(const NetworkModel& model,
                            const std::string& corpus) {
  return evaluate_with(model,
                       [](const NetworkModel& m, const std::vector<int>& t) {
                         return forward_dense(m, t);
                       },
                       corpus);
}

inline EvalMetrics evaluate(const CompressedModel& model,
                            const std::string& corpus) {
  return evaluate_with(model,
                       [](const CompressedModel& m, const std::vector<int>& t) {
                         return forward_compressed(m, t);
                       },
                       corpus);
}

}  // namespace dirnet
