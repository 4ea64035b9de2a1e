#pragma once

// Bit-exact binary containers for dense models ("DNW1") and factorized
// compressed models ("DNC1"). Everything is little-endian fixed-width with a
// trailing CRC32 over all preceding bytes, so save/load round-trips are
// byte-identical across platforms.

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "dirnet/error.hpp"
#include "dirnet/matrix.hpp"
#include "dirnet/rnn.hpp"

namespace dirnet {

inline std::uint32_t crc32(const std::uint8_t* data, std::size_t len,
                           std::uint32_t seed = 0) {
  static const std::array<std::uint32_t, 256> table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k)
        c = (c & 1u) ? 0xEDB88320u ^ (c >> 1) : (c >> 1);
      t[i] = c;
    }
    return t;
  }();
  std::uint32_t c = seed ^ 0xFFFFFFFFu;
  for (std::size_t i = 0; i < len; ++i)
    c = table[(c ^ data[i]) & 0xFFu] ^ (c >> 8);
  return c ^ 0xFFFFFFFFu;
}

namespace detail {

struct ByteWriter {
  std::vector<std::uint8_t> buf;

  void u8(std::uint8_t v) { buf.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back((v >> (8 * i)) & 0xFFu);
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i)
      buf.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFFu));
  }
  void i16(std::int16_t v) {
    const auto u = static_cast<std::uint16_t>(v);
    buf.push_back(u & 0xFFu);
    buf.push_back((u >> 8) & 0xFFu);
  }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    u64(bits);
  }
  void bytes(const void* p, std::size_t n) {
    const auto* s = static_cast<const std::uint8_t*>(p);
    buf.insert(buf.end(), s, s + n);
  }
  void matrix(const DenseMatrix& m) {
    u32(static_cast<std::uint32_t>(m.rows()));
    u32(static_cast<std::uint32_t>(m.cols()));
    for (double v : m.data()) f64(v);
  }
  void vec(const std::vector<double>& v) {
    u32(static_cast<std::uint32_t>(v.size()));
    for (double x : v) f64(x);
  }
  void seal_and_write(const std::string& path) {
    u32(crc32(buf.data(), buf.size()));
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError("write failed: " + path);
  }
};

struct ByteReader {
  const std::vector<std::uint8_t>& buf;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > buf.size()) throw FormatError("truncated file");
  }
  std::uint8_t u8() {
    need(1);
    return buf[pos++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(buf[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(buf[pos + i]) << (8 * i);
    pos += 8;
    return v;
  }
  std::int16_t i16() {
    need(2);
    std::uint16_t v = std::uint16_t(buf[pos]) | (std::uint16_t(buf[pos + 1]) << 8);
    pos += 2;
    return static_cast<std::int16_t>(v);
  }
  double f64() {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  DenseMatrix matrix() {
    const std::size_t r = u32(), c = u32();
    if (r == 0 || c == 0) throw FormatError("empty matrix block");
    DenseMatrix m(r, c);
    for (double& v : m.data()) v = f64();
    return m;
  }
  std::vector<double> vec() {
    const std::size_t n = u32();
    std::vector<double> v(n);
    for (double& x : v) x = f64();
    return v;
  }
};

inline std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
  return buf;
}

inline void check_crc(const std::vector<std::uint8_t>& buf) {
  if (buf.size() < 8) throw FormatError("file too short");
  const std::size_t body = buf.size() - 4;
  std::uint32_t stored = 0;
  for (int i = 0; i < 4; ++i) stored |= std::uint32_t(buf[body + i]) << (8 * i);
  if (crc32(buf.data(), body) != stored)
    throw FormatError("CRC mismatch: file corrupted");
}

inline void write_vocab(ByteWriter& w, const Vocab& v) {
  w.u32(static_cast<std::uint32_t>(v.symbols.size()));
  for (std::uint8_t b : v.symbols) w.u8(b);
}

inline Vocab read_vocab(ByteReader& r) {
  const std::size_t n = r.u32();
  Vocab v;
  v.index.fill(-1);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t b = r.u8();
    v.index[b] = static_cast<int>(v.symbols.size());
    v.symbols.push_back(b);
  }
  return v;
}

inline void write_csr(ByteWriter& w, const CsrMatrix& m) {
  w.u32(static_cast<std::uint32_t>(m.rows));
  w.u32(static_cast<std::uint32_t>(m.cols));
  w.u64(m.nnz());
  for (std::size_t p : m.row_ptr) w.u64(p);
  for (std::uint32_t c : m.col_idx) w.u32(c);
  for (double v : m.vals) w.f64(v);
}

inline CsrMatrix read_csr(ByteReader& r) {
  CsrMatrix m;
  m.rows = r.u32();
  m.cols = r.u32();
  const std::uint64_t nnz = r.u64();
  m.row_ptr.resize(m.rows + 1);
  for (std::size_t& p : m.row_ptr) p = static_cast<std::size_t>(r.u64());
  m.col_idx.resize(nnz);
  for (std::uint32_t& c : m.col_idx) c = r.u32();
  m.vals.resize(nnz);
  for (double& v : m.vals) v = r.f64();
  try {
    m.validate();
  } catch (const std::exception& e) {
    throw FormatError(std::string("bad CSR block: ") + e.what());
  }
  return m;
}

}  // namespace detail

// -- dense model container ("DNW1") -------------------------------------------

inline std::vector<std::uint8_t> serialize_model(const NetworkModel& m) {
  m.validate();
  detail::ByteWriter w;
  w.bytes("DNW1", 4);
  w.u32(1);  // format version
  w.u8(static_cast<std::uint8_t>(m.kind));
  w.u32(static_cast<std::uint32_t>(m.layers.size()));
  for (const auto& l : m.layers) {
    w.u32(static_cast<std::uint32_t>(l.width()));
    w.u32(static_cast<std::uint32_t>(l.w_h.rows()));
    w.u32(static_cast<std::uint32_t>(l.w_x.rows()));
  }
  for (const auto& l : m.layers) {
    for (double v : l.w_h.data()) w.f64(v);
    for (double v : l.w_x.data()) w.f64(v);
    for (double v : l.bias) w.f64(v);
  }
  w.matrix(m.embed);
  w.matrix(m.out_proj);
  detail::write_vocab(w, m.vocab);
  return std::move(w.buf);
}

inline void save_model(const NetworkModel& m, const std::string& path) {
  detail::ByteWriter w;
  w.buf = serialize_model(m);
  w.seal_and_write(path);
}

inline NetworkModel deserialize_model(const std::vector<std::uint8_t>& buf) {
  detail::ByteReader r{buf};
  char magic[5] = {};
  for (int i = 0; i < 4; ++i) magic[i] = static_cast<char>(r.u8());
  if (std::string(magic) != "DNW1") throw FormatError("not a model file");
  if (r.u32() != 1) throw FormatError("unsupported model format version");
  NetworkModel m;
  m.kind = static_cast<CellKind>(r.u8());
  if (m.kind != CellKind::vanilla_rnn && m.kind != CellKind::lstm)
    throw FormatError("unknown cell kind");
  const std::size_t nl = r.u32();
  if (nl == 0) throw FormatError("model has no layers");
  struct Hdr {
    std::size_t n, rows_h, rows_x;
  };
  std::vector<Hdr> hdrs(nl);
  for (auto& h : hdrs) {
    h.n = r.u32();
    h.rows_h = r.u32();
    h.rows_x = r.u32();
  }
  for (std::size_t l = 0; l < nl; ++l) {
    const std::size_t n_in = l == 0 ? hdrs[0].n : hdrs[l - 1].n;
    LayerWeights lw;
    lw.kind = m.kind;
    lw.w_h = DenseMatrix(hdrs[l].rows_h, hdrs[l].n);
    lw.w_x = DenseMatrix(hdrs[l].rows_x, n_in);
    for (double& v : lw.w_h.data()) v = r.f64();
    for (double& v : lw.w_x.data()) v = r.f64();
    lw.bias.resize(hdrs[l].rows_h);
    for (double& v : lw.bias) v = r.f64();
    m.layers.push_back(std::move(lw));
  }
  m.embed = r.matrix();
  m.out_proj = r.matrix();
  m.vocab = detail::read_vocab(r);
  if (r.pos != buf.size())
    throw FormatError("trailing bytes in model payload");
  try {
    m.validate();
  } catch (const std::exception& e) {
    throw FormatError(std::string("inconsistent model file: ") + e.what());
  }
  return m;
}

inline NetworkModel load_model(const std::string& path) {
  std::vector<std::uint8_t> buf = detail::read_file(path);
  detail::check_crc(buf);
  buf.resize(buf.size() - 4);
  return deserialize_model(buf);
}

// -- compressed model container ("DNC1") ---------------------------------------

inline std::vector<std::uint8_t> serialize_compressed(
    const CompressedModel& m) {
  detail::ByteWriter w;
  w.bytes("DNC1", 4);
  w.u32(1);
  w.u8(static_cast<std::uint8_t>(m.kind));
  w.u32(static_cast<std::uint32_t>(m.layers.size()));
  for (const auto& l : m.layers) {
    w.u32(static_cast<std::uint32_t>(l.width()));
    w.u32(static_cast<std::uint32_t>(l.gate_rows()));
    w.u32(static_cast<std::uint32_t>(l.in_width()));
  }
  for (const auto& l : m.layers) {
    w.u8(l.shared_d ? 1 : 0);
    w.u32(static_cast<std::uint32_t>(l.dict.num_atoms()));  // pruned atom count
    w.matrix(l.dict.atoms);
    if (!l.shared_d) w.matrix(l.dict_x.atoms);
    detail::write_csr(w, l.z_h);
    // shift table: one row per stored nonzero of Z_h, in storage order
    w.u64(l.z_h.nnz());
    std::size_t e = 0;
    for (std::size_t row = 0; row < l.z_h.rows; ++row)
      for (std::size_t k = l.z_h.row_ptr[row]; k < l.z_h.row_ptr[row + 1];
           ++k, ++e) {
        w.u32(static_cast<std::uint32_t>(row));
        w.u32(l.z_h.col_idx[k]);
        w.i16(static_cast<std::int16_t>(l.shifts_h[k].offset));
        w.u8(static_cast<std::uint8_t>(l.shifts_h[k].mode));
      }
    detail::write_csr(w, l.z_x);
    w.vec(l.bias);
  }
  w.matrix(m.embed);
  w.matrix(m.out_proj);
  detail::write_vocab(w, m.vocab);
  return std::move(w.buf);
}

inline void save_compressed(const CompressedModel& m, const std::string& path) {
  detail::ByteWriter w;
  w.buf = serialize_compressed(m);
  w.seal_and_write(path);
}

inline CompressedModel deserialize_compressed(
    const std::vector<std::uint8_t>& buf) {
  detail::ByteReader r{buf};
  char magic[5] = {};
  for (int i = 0; i < 4; ++i) magic[i] = static_cast<char>(r.u8());
  if (std::string(magic) != "DNC1")
    throw FormatError("not a compressed-model file");
  if (r.u32() != 1) throw FormatError("unsupported compressed format version");
  CompressedModel m;
  m.kind = static_cast<CellKind>(r.u8());
  if (m.kind != CellKind::vanilla_rnn && m.kind != CellKind::lstm)
    throw FormatError("unknown cell kind");
  const std::size_t nl = r.u32();
  if (nl == 0) throw FormatError("compressed model has no layers");
  for (std::size_t l = 0; l < 3 * nl; ++l) r.u32();  // per-layer headers
  for (std::size_t l = 0; l < nl; ++l) {
    CompressedLayer cl;
    cl.kind = m.kind;
    cl.shared_d = r.u8() != 0;
    const std::size_t pruned_p = r.u32();
    cl.dict.atoms = r.matrix();
    cl.dict.live.assign(cl.dict.num_atoms(), true);
    if (cl.dict.num_atoms() != pruned_p)
      throw FormatError("atom count disagrees with header");
    if (!cl.shared_d) {
      cl.dict_x.atoms = r.matrix();
      cl.dict_x.live.assign(cl.dict_x.num_atoms(), true);
    }
    cl.z_h = detail::read_csr(r);
    const std::uint64_t nshift = r.u64();
    if (nshift != cl.z_h.nnz())
      throw FormatError("shift table size != Z_h nonzero count");
    cl.shifts_h.resize(nshift);
    std::size_t e = 0;
    for (std::size_t row = 0; row < cl.z_h.rows; ++row)
      for (std::size_t k = cl.z_h.row_ptr[row]; k < cl.z_h.row_ptr[row + 1];
           ++k, ++e) {
        if (r.u32() != row || r.u32() != cl.z_h.col_idx[k])
          throw FormatError("shift table out of sync with Z_h");
        ShiftOp op;
        op.offset = r.i16();
        const std::uint8_t mode = r.u8();
        if (mode > 1) throw FormatError("bad shift mode");
        op.mode = static_cast<ShiftMode>(mode);
        cl.shifts_h[k] = op;
      }
    cl.z_x = detail::read_csr(r);
    cl.bias = r.vec();
    if (cl.z_h.rows != cl.dict.num_atoms() ||
        cl.z_x.rows != cl.x_dict().num_atoms() ||
        cl.bias.size() != cl.dict.atom_len())
      throw FormatError("inconsistent compressed layer shapes");
    m.layers.push_back(std::move(cl));
  }
  m.embed = r.matrix();
  m.out_proj = r.matrix();
  m.vocab = detail::read_vocab(r);
  if (r.pos != buf.size())
    throw FormatError("trailing bytes in compressed payload");
  return m;
}

inline CompressedModel load_compressed(const std::string& path) {
  std::vector<std::uint8_t> buf = detail::read_file(path);
  detail::check_crc(buf);
  buf.resize(buf.size() - 4);
  return deserialize_compressed(buf);
}

}  // namespace dirnet
