#pragma once

// Shift operators on atom vectors. Circular shifts are orthogonal (adjoint
// equals inverse); zero-padded shifts drop boundary samples, so the adjoint
// is used wherever the inverse would be, together with a diagonal rescale.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "dirnet/error.hpp"

namespace dirnet {

enum class ShiftMode : std::uint8_t { circular = 0, zero_padded = 1 };

struct ShiftOp {
  int offset = 0;
  ShiftMode mode = ShiftMode::circular;

  // y[i] = x[i - offset], wrapped or zero-filled.
  std::vector<double> apply(const std::vector<double>& x) const {
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(x.size());
    std::vector<double> y(x.size(), 0.0);
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      std::ptrdiff_t src = i - offset;
      if (mode == ShiftMode::circular) {
        src = ((src % n) + n) % n;
        y[i] = x[src];
      } else if (src >= 0 && src < n) {
        y[i] = x[src];
      }
    }
    return y;
  }

  // <apply(x), y> == <x, adjoint(y)> for both modes.
  std::vector<double> adjoint(const std::vector<double>& y) const {
    ShiftOp back{-offset, mode};
    return back.apply(y);
  }

  // Coordinate i of the atom contributes to the output iff survives(i);
  // always true for circular shifts. diag(delta^T delta) as an indicator.
  bool survives(std::size_t i, std::size_t n) const {
    if (mode == ShiftMode::circular) return true;
    const std::ptrdiff_t dst = static_cast<std::ptrdiff_t>(i) + offset;
    return dst >= 0 && dst < static_cast<std::ptrdiff_t>(n);
  }

  bool operator==(const ShiftOp& o) const {
    return offset == o.offset && mode == o.mode;
  }
};

struct ShiftSet {
  int max_offset = 0;
  ShiftMode mode = ShiftMode::circular;

  static ShiftSet identity_only() { return ShiftSet{0, ShiftMode::circular}; }

  std::size_t size() const {
    return static_cast<std::size_t>(2 * max_offset + 1);
  }

  std::vector<ShiftOp> ops() const {
    std::vector<ShiftOp> out;
    out.reserve(size());
    for (int o = -max_offset; o <= max_offset; ++o)
      out.push_back(ShiftOp{o, mode});
    return out;
  }

  // Offsets must stay small relative to the atom length.
  void check(std::size_t atom_len) const {
    if (max_offset < 0) throw ConfigError("ShiftSet: negative max_offset");
    if (static_cast<std::size_t>(max_offset) * 4 > atom_len)
      throw ConfigError("ShiftSet: max_offset exceeds length/4");
  }
};

}  // namespace dirnet
