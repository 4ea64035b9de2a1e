#pragma once

// Flat `key = value` run configuration. Unknown keys are rejected so that a
// typo cannot silently fall back to a default.

#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "dirnet/error.hpp"
#include "dirnet/shift.hpp"

namespace dirnet {

struct RunConfig {
  std::uint64_t seed = 42;

  // dictionary learning
  std::size_t initial_p = 0;  // 0 = number of target columns
  double lambda1 = 0.1;
  std::size_t epochs_dict = 10;
  std::size_t cd_cycles = 3;
  double energy_floor = 1e-4;
  int max_offset = 2;
  ShiftMode shift_mode = ShiftMode::circular;

  // adaptive sparsification
  std::vector<double> lambda2_grid = {1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3};
  double gamma = 0.4;
  double shrink_factor = 0.4;
  double theta0 = 1e7;
  std::size_t max_stages = 25;
  double target_nnz_frac = 0.15;
  double band_lo = 0.10;
  double band_hi = 0.20;
  double inner_tol = 1e-6;
  std::size_t inner_max_iters = 30;
  double lasso_tol = 1e-8;
  std::size_t lasso_max_cycles = 2000;
  double index_bits_ratio = 0.5;  // u32 index per f64 value

  // trainer
  double lr = 0.002;
  std::size_t train_epochs = 10;
  std::size_t batch = 8;
  std::size_t bptt_len = 32;
  double grad_clip = 5.0;
  double finetune_lr = 0.0;  // 0 = 0.1 * lr
  std::size_t finetune_epochs = 2;
  bool freeze_dict = false;

  void set(const std::string& key, const std::string& value);
  std::string dump() const;
  static RunConfig parse(const std::string& text);
};

namespace detail {
inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config: bad numeric value for '" + key + "': " + v);
  }
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    unsigned long long u = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return u;
  } catch (const std::exception&) {
    throw ConfigError("config: bad integer value for '" + key + "': " + v);
  }
}
}  // namespace detail

inline void RunConfig::set(const std::string& key, const std::string& value) {
  using detail::parse_double;
  using detail::parse_uint;
  if (key == "seed") seed = parse_uint(key, value);
  else if (key == "initial_p") initial_p = parse_uint(key, value);
  else if (key == "lambda1") lambda1 = parse_double(key, value);
  else if (key == "epochs_dict") epochs_dict = parse_uint(key, value);
  else if (key == "cd_cycles") cd_cycles = parse_uint(key, value);
  else if (key == "energy_floor") energy_floor = parse_double(key, value);
  else if (key == "max_offset") max_offset = static_cast<int>(parse_uint(key, value));
  else if (key == "shift_mode") {
    if (value == "circular") shift_mode = ShiftMode::circular;
    else if (value == "zero_padded") shift_mode = ShiftMode::zero_padded;
    else throw ConfigError("config: shift_mode must be circular|zero_padded");
  } else if (key == "lambda2_grid") {
    lambda2_grid.clear();
    std::stringstream ss(value);
    std::string tok;
    while (std::getline(ss, tok, ','))
      lambda2_grid.push_back(parse_double(key, detail::trim(tok)));
    if (lambda2_grid.empty()) throw ConfigError("config: empty lambda2_grid");
  } else if (key == "gamma") gamma = parse_double(key, value);
  else if (key == "shrink_factor") shrink_factor = parse_double(key, value);
  else if (key == "theta0") theta0 = parse_double(key, value);
  else if (key == "max_stages") max_stages = parse_uint(key, value);
  else if (key == "target_nnz_frac") target_nnz_frac = parse_double(key, value);
  else if (key == "band_lo") band_lo = parse_double(key, value);
  else if (key == "band_hi") band_hi = parse_double(key, value);
  else if (key == "inner_tol") inner_tol = parse_double(key, value);
  else if (key == "inner_max_iters") inner_max_iters = parse_uint(key, value);
  else if (key == "lasso_tol") lasso_tol = parse_double(key, value);
  else if (key == "lasso_max_cycles") lasso_max_cycles = parse_uint(key, value);
  else if (key == "index_bits_ratio") index_bits_ratio = parse_double(key, value);
  else if (key == "lr") lr = parse_double(key, value);
  else if (key == "train_epochs") train_epochs = parse_uint(key, value);
  else if (key == "batch") batch = parse_uint(key, value);
  else if (key == "bptt_len") bptt_len = parse_uint(key, value);
  else if (key == "grad_clip") grad_clip = parse_double(key, value);
  else if (key == "finetune_lr") finetune_lr = parse_double(key, value);
  else if (key == "finetune_epochs") finetune_epochs = parse_uint(key, value);
  else if (key == "freeze_dict") {
    if (value == "true" || value == "1") freeze_dict = true;
    else if (value == "false" || value == "0") freeze_dict = false;
    else throw ConfigError("config: freeze_dict must be true|false");
  } else {
    throw ConfigError("config: unknown key '" + key + "'");
  }
}

inline RunConfig RunConfig::parse(const std::string& text) {
  RunConfig cfg;
  std::stringstream ss(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: missing '=' on line " + std::to_string(lineno));
    cfg.set(detail::trim(line.substr(0, eq)),
            detail::trim(line.substr(eq + 1)));
  }
  return cfg;
}

inline std::string RunConfig::dump() const {
  std::ostringstream os;
  os.precision(17);
  os << "seed = " << seed << "\n";
  os << "initial_p = " << initial_p << "\n";
  os << "lambda1 = " << lambda1 << "\n";
  os << "epochs_dict = " << epochs_dict << "\n";
  os << "cd_cycles = " << cd_cycles << "\n";
  os << "energy_floor = " << energy_floor << "\n";
  os << "max_offset = " << max_offset << "\n";
  os << "shift_mode = "
     << (shift_mode == ShiftMode::circular ? "circular" : "zero_padded")
     << "\n";
  os << "lambda2_grid = ";
  for (std::size_t i = 0; i < lambda2_grid.size(); ++i)
    os << (i ? "," : "") << lambda2_grid[i];
  os << "\n";
  os << "gamma = " << gamma << "\n";
  os << "shrink_factor = " << shrink_factor << "\n";
  os << "theta0 = " << theta0 << "\n";
  os << "max_stages = " << max_stages << "\n";
  os << "target_nnz_frac = " << target_nnz_frac << "\n";
  os << "band_lo = " << band_lo << "\n";
  os << "band_hi = " << band_hi << "\n";
  os << "inner_tol = " << inner_tol << "\n";
  os << "inner_max_iters = " << inner_max_iters << "\n";
  os << "lasso_tol = " << lasso_tol << "\n";
  os << "lasso_max_cycles = " << lasso_max_cycles << "\n";
  os << "index_bits_ratio = " << index_bits_ratio << "\n";
  os << "lr = " << lr << "\n";
  os << "train_epochs = " << train_epochs << "\n";
  os << "batch = " << batch << "\n";
  os << "bptt_len = " << bptt_len << "\n";
  os << "grad_clip = " << grad_clip << "\n";
  os << "finetune_lr = " << finetune_lr << "\n";
  os << "finetune_epochs = " << finetune_epochs << "\n";
  os << "freeze_dict = " << (freeze_dict ? "true" : "false") << "\n";
  return os.str();
}

}  // namespace dirnet
