// Command-line frontend: train a character-level baseline, compress it into
// a shared-dictionary factorized model, fine-tune with masked gradients, and
// evaluate or inspect either artifact.

#include <cstdlib>
#include <exception>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dirnet/compress.hpp"
#include "dirnet/config.hpp"
#include "dirnet/error.hpp"
#include "dirnet/io.hpp"
#include "dirnet/rnn.hpp"
#include "dirnet/train.hpp"

namespace {

using nlohmann::json;

constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;
constexpr int kExitFormat = 3;
constexpr int kExitNumeric = 4;

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw dirnet::IoError("cannot open for reading: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw dirnet::IoError("cannot open for writing: " + path);
  out << text;
  if (!out) throw dirnet::IoError("write failed: " + path);
}

dirnet::RunConfig load_config(const std::string& path, long long seed_flag) {
  dirnet::RunConfig cfg;
  if (!path.empty()) cfg = dirnet::RunConfig::parse(read_text_file(path));
  if (seed_flag >= 0) cfg.seed = static_cast<std::uint64_t>(seed_flag);
  return cfg;
}

dirnet::TrainConfig trainer_config(const dirnet::RunConfig& cfg,
                                   bool finetune) {
  dirnet::TrainConfig t;
  t.lr = finetune ? (cfg.finetune_lr > 0.0 ? cfg.finetune_lr : 0.1 * cfg.lr)
                  : cfg.lr;
  t.epochs = finetune ? cfg.finetune_epochs : cfg.train_epochs;
  t.batch = cfg.batch;
  t.bptt_len = cfg.bptt_len;
  t.seed = cfg.seed;
  t.grad_clip = cfg.grad_clip;
  return t;
}

std::vector<std::size_t> parse_widths(const std::string& arch) {
  std::vector<std::size_t> widths;
  std::stringstream ss(arch);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    const long v = std::stol(tok);
    if (v < 1) throw dirnet::ConfigError("layer width must be >= 1");
    widths.push_back(static_cast<std::size_t>(v));
  }
  if (widths.empty()) throw dirnet::ConfigError("empty --arch");
  return widths;
}

json report_json(const dirnet::CompressionReport& rep) {
  json j;
  j["report_version"] = 1;
  j["total_dense_params"] = rep.total_dense_params;
  j["total_factorized_params"] = rep.total_factorized_params;
  j["total_nnz"] = rep.total_nnz;
  j["total_rate_dense"] = rep.total_rate_dense;
  j["layers"] = json::array();
  for (const auto& l : rep.layers) {
    json lj;
    lj["n"] = l.n;
    lj["p"] = l.p;
    lj["nnz_h"] = l.nnz_h;
    lj["nnz_x"] = l.nnz_x;
    lj["rate_dense"] = l.rate_dense;
    lj["rate_nnz"] = l.rate_nnz;
    lj["recon_err_h"] = l.recon_err_h;
    lj["recon_err_x"] = l.recon_err_x;
    lj["shared_d"] = l.shared_d;
    lj["lambda2"] = l.lambda2;
    lj["nnz_target_reached"] = l.nnz_target_reached;
    j["layers"].push_back(lj);
  }
  return j;
}

std::string log_lines(const std::vector<dirnet::TrainLogEntry>& log) {
  std::string out;
  for (const auto& e : log) {
    json j;
    j["epoch"] = e.epoch;
    j["train_loss"] = e.train_loss;
    j["val_loss"] = e.val_loss;
    out += j.dump();
    out += '\n';
  }
  return out;
}

// Distinguishes the two containers by magic so eval/stats accept either.
bool is_compressed_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw dirnet::IoError("cannot open for reading: " + path);
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4) throw dirnet::FormatError("file too short: " + path);
  const std::string m(magic, 4);
  if (m == "DNC1") return true;
  if (m == "DNW1") return false;
  throw dirnet::FormatError("unrecognized magic in " + path);
}

int run(int argc, char** argv) {
  CLI::App app{"dirnet: shared-dictionary recurrent-network compression"};
  app.require_subcommand(1);

  std::string config_path, out_path, corpus_path, model_path, arch = "64,64";
  long long seed_flag = -1;
  bool json_out = false;
  std::string cell = "lstm";

  app.add_option("--config", config_path, "run configuration file");
  app.add_option("--seed", seed_flag, "override the config seed");
  app.add_flag("--json", json_out, "machine-readable stdout");

  auto* c_train = app.add_subcommand("train", "train a dense baseline");
  c_train->add_option("corpus", corpus_path, "corpus file")->required();
  c_train->add_option("--arch", arch, "comma-separated layer widths");
  c_train->add_option("--cell", cell, "lstm or rnn");
  c_train->add_option("--out", out_path, "output model path")->required();

  auto* c_compress = app.add_subcommand("compress", "factorize a dense model");
  c_compress->add_option("model", model_path, "dense model file")->required();
  c_compress->add_option("--out", out_path, "output path")->required();

  auto* c_finetune =
      app.add_subcommand("finetune", "masked fine-tuning of a compressed model");
  c_finetune->add_option("cmodel", model_path, "compressed model")->required();
  c_finetune->add_option("corpus", corpus_path, "corpus file")->required();
  c_finetune->add_option("--out", out_path, "output path")->required();

  auto* c_eval = app.add_subcommand("eval", "evaluate either model kind");
  c_eval->add_option("model", model_path, "model or compressed model")
      ->required();
  c_eval->add_option("corpus", corpus_path, "corpus file")->required();

  auto* c_stats = app.add_subcommand("stats", "summarize a model file");
  c_stats->add_option("model", model_path, "model or compressed model")
      ->required();

  bool dump_defaults = false;
  auto* c_config = app.add_subcommand("config", "configuration helpers");
  c_config->add_flag("--dump-defaults", dump_defaults,
                     "print every key with its default value");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  const dirnet::RunConfig cfg = load_config(config_path, seed_flag);

  if (c_config->parsed()) {
    if (!dump_defaults) {
      std::cerr << "config: nothing to do (try --dump-defaults)\n";
      return kExitUsage;
    }
    std::cout << dirnet::RunConfig().dump();
    return 0;
  }

  if (c_train->parsed()) {
    const std::string corpus = read_text_file(corpus_path);
    dirnet::ArchSpec spec;
    spec.widths = parse_widths(arch);
    if (cell == "lstm")
      spec.kind = dirnet::CellKind::lstm;
    else if (cell == "rnn")
      spec.kind = dirnet::CellKind::vanilla_rnn;
    else
      throw dirnet::ConfigError("--cell must be lstm or rnn");
    dirnet::TrainResult res =
        dirnet::train_baseline(corpus, spec, trainer_config(cfg, false));
    dirnet::save_model(res.model, out_path);
    write_text_file(out_path + ".log.jsonl", log_lines(res.log));
    if (json_out) {
      json j;
      j["report_version"] = 1;
      j["model"] = out_path;
      j["epochs"] = res.log.size();
      j["final_val_loss"] = res.log.empty() ? 0.0 : res.log.back().val_loss;
      std::cout << j.dump() << '\n';
    } else {
      std::cout << "wrote " << out_path << " (" << res.log.size()
                << " epochs)\n";
    }
    return 0;
  }

  if (c_compress->parsed()) {
    const dirnet::NetworkModel model = dirnet::load_model(model_path);
    auto [cmodel, report] = dirnet::compress_network(model, cfg);
    dirnet::save_compressed(cmodel, out_path);
    const json j = report_json(report);
    write_text_file(out_path + ".report.json", j.dump(2) + "\n");
    if (json_out)
      std::cout << j.dump() << '\n';
    else
      std::cout << "wrote " << out_path << " (dense rate "
                << report.total_rate_dense << "x)\n";
    return 0;
  }

  if (c_finetune->parsed()) {
    const dirnet::CompressedModel cmodel = dirnet::load_compressed(model_path);
    const std::string corpus = read_text_file(corpus_path);
    const dirnet::TrainConfig tc = trainer_config(cfg, true);
    dirnet::FinetuneResult res;
    if (tc.epochs == 0) {
      res.model = cmodel;  // zero epochs: pass the payload through untouched
    } else {
      res = dirnet::finetune_masked(cmodel, corpus, tc, cfg.freeze_dict);
    }
    dirnet::save_compressed(res.model, out_path);
    write_text_file(out_path + ".log.jsonl", log_lines(res.log));
    if (json_out) {
      json j;
      j["report_version"] = 1;
      j["model"] = out_path;
      j["epochs"] = res.log.size();
      j["final_val_loss"] = res.log.empty() ? 0.0 : res.log.back().val_loss;
      std::cout << j.dump() << '\n';
    } else {
      std::cout << "wrote " << out_path << '\n';
    }
    return 0;
  }

  if (c_eval->parsed()) {
    const std::string corpus = read_text_file(corpus_path);
    dirnet::EvalMetrics m{};
    std::size_t dense_equiv = 0, nnz = 0;
    if (is_compressed_file(model_path)) {
      const dirnet::CompressedModel cm = dirnet::load_compressed(model_path);
      m = dirnet::evaluate(cm, corpus);
      std::vector<std::size_t> widths;
      for (const auto& l : cm.layers) widths.push_back(l.width());
      dense_equiv = dirnet::dense_param_count(cm.kind, widths);
      for (const auto& l : cm.layers) nnz += l.z_h.nnz() + l.z_x.nnz();
    } else {
      const dirnet::NetworkModel dm = dirnet::load_model(model_path);
      m = dirnet::evaluate(dm, corpus);
      std::vector<std::size_t> widths;
      for (const auto& l : dm.layers) widths.push_back(l.width());
      dense_equiv = dirnet::dense_param_count(dm.kind, widths);
      for (const auto& l : dm.layers) nnz += l.w_h.size() + l.w_x.size();
    }
    json j;
    j["report_version"] = 1;
    j["cross_entropy"] = m.cross_entropy;
    j["perplexity"] = m.perplexity;
    j["bits_per_char"] = m.bits_per_char;
    j["params_dense_equivalent"] = dense_equiv;
    j["nnz"] = nnz;
    std::cout << j.dump() << '\n';
    return 0;
  }

  if (c_stats->parsed()) {
    if (is_compressed_file(model_path)) {
      const dirnet::CompressedModel cm = dirnet::load_compressed(model_path);
      std::vector<std::size_t> widths, ps;
      for (const auto& l : cm.layers) {
        widths.push_back(l.width());
        ps.push_back(l.live_p());
      }
      std::cout << "compressed model: " << cm.layers.size() << " layers, "
                << (cm.kind == dirnet::CellKind::lstm ? "lstm" : "rnn")
                << ", vocab " << cm.vocab.size() << "\n";
      std::cout << "layer widths:";
      for (std::size_t w : widths) std::cout << ' ' << w;
      std::cout << "\nper-layer p:";
      for (std::size_t p : ps) std::cout << ' ' << p;
      std::cout << "\ndense-equivalent params: "
                << dirnet::dense_param_count(cm.kind, widths)
                << "\nfactorized params: "
                << dirnet::factorized_param_count(cm.kind, widths, ps) << '\n';
      std::size_t nnz = 0;
      for (const auto& l : cm.layers) nnz += l.z_h.nnz() + l.z_x.nnz();
      std::cout << "code nonzeros: " << nnz << '\n';
    } else {
      const dirnet::NetworkModel dm = dirnet::load_model(model_path);
      std::vector<std::size_t> widths;
      for (const auto& l : dm.layers) widths.push_back(l.width());
      std::cout << "dense model: " << dm.layers.size() << " layers, "
                << (dm.kind == dirnet::CellKind::lstm ? "lstm" : "rnn")
                << ", vocab " << dm.vocab.size() << "\n";
      std::cout << "layer widths:";
      for (std::size_t w : widths) std::cout << ' ' << w;
      std::cout << "\nparams: " << dirnet::dense_param_count(dm.kind, widths)
                << '\n';
    }
    return 0;
  }

  std::cerr << "no command given\n";
  return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
  // DIRNET_THREADS caps intra-run parallelism; every kernel here is
  // single-threaded, so any positive value is accepted and ignored.
  if (const char* t = std::getenv("DIRNET_THREADS")) {
    const long v = std::atol(t);
    if (v < 1) {
      std::cerr << "DIRNET_THREADS must be >= 1\n";
      return kExitUsage;
    }
  }
  try {
    return run(argc, argv);
  } catch (const dirnet::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const dirnet::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const dirnet::FormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFormat;
  } catch (const dirnet::IntegrityError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFormat;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumeric;
  }
}
