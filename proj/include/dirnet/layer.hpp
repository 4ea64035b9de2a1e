#pragma once

// Layer weight containers shared by the runtime and the compressor. LSTM
// gate matrices are stored vertically stacked in (i, o, f, g) order.

#include <cstddef>
#include <vector>

#include "dirnet/dictionary.hpp"
#include "dirnet/error.hpp"
#include "dirnet/matrix.hpp"
#include "dirnet/shift.hpp"

namespace dirnet {

enum class CellKind : std::uint8_t { vanilla_rnn = 0, lstm = 1 };

inline std::size_t gate_multiple(CellKind kind) {
  return kind == CellKind::lstm ? 4 : 1;
}

struct LayerWeights {
  DenseMatrix w_h;  // recurrent, (g*N) x N with g = 1 or 4
  DenseMatrix w_x;  // inter-layer, (g*N) x N_in
  std::vector<double> bias;
  CellKind kind = CellKind::vanilla_rnn;

  std::size_t width() const { return w_h.cols(); }
  std::size_t in_width() const { return w_x.cols(); }
  std::size_t gate_rows() const { return w_h.rows(); }

  void validate() const {
    const std::size_t rows = gate_multiple(kind) * width();
    if (w_h.rows() != rows)
      throw ShapeError("LayerWeights: w_h rows inconsistent with kind");
    if (w_x.rows() != rows)
      throw ShapeError("LayerWeights: w_x rows != w_h rows");
    if (bias.size() != rows)
      throw ShapeError("LayerWeights: bias length != gate rows");
  }
};

// Stacks per-gate blocks vertically in (i, o, f, g) order.
inline DenseMatrix stack_gates(const std::vector<DenseMatrix>& gates) {
  if (gates.size() != 4) throw ShapeError("stack_gates: expected 4 blocks");
  const std::size_t n = gates[0].rows(), c = gates[0].cols();
  DenseMatrix out(4 * n, c);
  for (std::size_t g = 0; g < 4; ++g) {
    if (gates[g].rows() != n || gates[g].cols() != c)
      throw ShapeError("stack_gates: block shape mismatch");
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < c; ++j) out(g * n + i, j) = gates[g](i, j);
  }
  return out;
}

inline std::vector<DenseMatrix> unstack_gates(const DenseMatrix& stacked) {
  if (stacked.rows() % 4 != 0)
    throw ShapeError("unstack_gates: rows not a multiple of 4");
  const std::size_t n = stacked.rows() / 4, c = stacked.cols();
  std::vector<DenseMatrix> gates(4, DenseMatrix(n, c));
  for (std::size_t g = 0; g < 4; ++g)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < c; ++j) gates[g](i, j) = stacked(g * n + i, j);
  return gates;
}

// Factorized replacement for one layer: w_h ~ sum of shifted atoms weighted
// by z_h, w_x ~ dict * z_x (dict_x instead when the shared-dictionary
// requirement could not be met).
struct CompressedLayer {
  Dictionary dict;
  CsrMatrix z_h;
  std::vector<ShiftOp> shifts_h;  // aligned with z_h nonzeros
  CsrMatrix z_x;
  std::vector<double> bias;
  CellKind kind = CellKind::vanilla_rnn;
  bool shared_d = true;
  Dictionary dict_x;  // only populated when !shared_d
  double recon_err_h = 0.0;
  double recon_err_x = 0.0;

  std::size_t width() const { return z_h.cols; }
  std::size_t in_width() const { return z_x.cols; }
  std::size_t gate_rows() const { return dict.atom_len(); }
  std::size_t live_p() const { return dict.num_atoms(); }

  const Dictionary& x_dict() const { return shared_d ? dict : dict_x; }

  ShiftedCode shifted_code_h() const {
    ShiftedCode sc;
    sc.coeffs = z_h;
    sc.shifts = shifts_h;
    return sc;
  }
};

}  // namespace dirnet
