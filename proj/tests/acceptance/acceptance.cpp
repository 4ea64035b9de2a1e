// Acceptance harness: one self-contained check per release criterion, each
// printing a single PASS/FAIL line with its pinned tolerance and runtime.
// Exit code is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "dirnet/adaptive.hpp"
#include "dirnet/compress.hpp"
#include "dirnet/config.hpp"
#include "dirnet/io.hpp"
#include "dirnet/ista.hpp"
#include "dirnet/lasso.hpp"
#include "dirnet/rng.hpp"
#include "dirnet/rnn.hpp"
#include "dirnet/shift.hpp"
#include "dirnet/train.hpp"

using namespace dirnet;

namespace {

// ---------------------------------------------------------------------------
// shared helpers
// ---------------------------------------------------------------------------

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

DenseMatrix random_matrix(Rng& rng, std::size_t r, std::size_t c) {
  DenseMatrix m(r, c);
  for (double& v : m.data()) v = gaussian(rng);
  return m;
}

DenseMatrix random_atoms(Rng& rng, std::size_t n, std::size_t p) {
  DenseMatrix d = random_matrix(rng, n, p);
  for (std::size_t k = 0; k < p; ++k) {
    std::vector<double> col = d.col(k);
    const double nrm = norm2(col);
    for (double& v : col) v /= nrm;
    d.set_col(k, col);
  }
  return d;
}

Dictionary random_unit_dict(Rng& rng, std::size_t n, std::size_t p) {
  Dictionary d;
  d.atoms = random_atoms(rng, n, p);
  d.live.assign(p, 1);
  return d;
}

// One strong sign-random nonzero per column; balanced placement cycles the
// rows so every atom is genuinely used by the planted product.
DenseMatrix planted_code(Rng& rng, std::size_t p, std::size_t m,
                         bool balanced) {
  DenseMatrix z(p, m);
  for (std::size_t j = 0; j < m; ++j) {
    const std::size_t i = balanced ? j % p : rng() % p;
    const double sgn = (rng() % 2 == 0) ? 1.0 : -1.0;
    z(i, j) = sgn * (3.0 + std::fabs(gaussian(rng)));
  }
  return z;
}

std::string load_corpus() {
  const char* env = std::getenv("DIRNET_CORPUS");
  const std::string path = env ? env : "data/corpus.txt";
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    std::fprintf(stderr, "cannot open corpus at %s\n", path.c_str());
    std::exit(2);
  }
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

// Independent oracle for the budgeted penalty-weight subproblem: minimize
// sum_i c_i theta_i^(-gamma) over {theta >= 0, sum theta = budget} by
// projected gradient descent with adaptive step.
std::vector<double> simplex_pg_oracle(const std::vector<double>& c,
                                      double gamma, double budget,
                                      int iters = 200000) {
  const std::size_t n = c.size();
  std::vector<double> theta(n, budget / static_cast<double>(n));
  double step = budget * 1e-3;
  auto objective = [&](const std::vector<double>& t) {
    double f = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (c[i] == 0.0) continue;
      if (t[i] <= 0.0) return 1e300;
      f += c[i] * std::pow(t[i], -gamma);
    }
    return f;
  };
  double f = objective(theta);
  for (int it = 0; it < iters; ++it) {
    std::vector<double> g(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      if (c[i] > 0.0 && theta[i] > 0.0)
        g[i] = -gamma * c[i] * std::pow(theta[i], -gamma - 1.0);
    double mean = 0.0;
    for (double v : g) mean += v;
    mean /= static_cast<double>(n);
    std::vector<double> cand(n);
    bool ok = true;
    for (std::size_t i = 0; i < n; ++i) {
      cand[i] = theta[i] - step * (g[i] - mean);
      if (cand[i] < 0.0) ok = false;
    }
    if (ok) {
      const double fc = objective(cand);
      if (fc <= f) {
        theta = std::move(cand);
        f = fc;
        step *= 1.05;
        continue;
      }
    }
    step *= 0.5;
    if (step < budget * 1e-16) break;
  }
  return theta;
}

double central_diff(double* x, const std::function<double()>& fn,
                    double step = 1e-5) {
  const double keep = *x;
  *x = keep + step;
  const double up = fn();
  *x = keep - step;
  const double down = fn();
  *x = keep;
  return (up - down) / (2.0 * step);
}

// worst relative error between analytic and finite-difference gradients
double grad_check(const std::vector<ParamView>& params,
                  const std::vector<ParamView>& analytic,
                  const std::function<double()>& loss) {
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k)
    for (std::size_t i = 0; i < params[k].size; ++i) {
      const double num = central_diff(&params[k].data[i], loss);
      const double ana = analytic[k].data[i];
      const double scale = std::max(std::fabs(num), std::fabs(ana));
      if (scale < 1e-7) continue;
      worst = std::max(worst, std::fabs(num - ana) / scale);
    }
  return worst;
}

// ---------------------------------------------------------------------------
// criteria
// ---------------------------------------------------------------------------

// 1. coordinate descent vs proximal-gradient oracle on 100 random instances
bool crit_solver_oracle(std::string* detail) {
  Rng rng(101);
  const double lams[3] = {0.01, 0.1, 1.0};
  double worst_obj = 0.0, worst_kkt = 0.0;
  for (int t = 0; t < 100; ++t) {
    LassoProblem p;
    const std::size_t n = 2 + rng() % 7;  // <= 8
    const std::size_t m = 2 + rng() % 5;  // <= 6
    p.dict = random_atoms(rng, n, m);
    p.target = std::vector<double>(n);
    for (double& v : p.target) v = gaussian(rng);
    p.lam = lams[t % 3];
    p.weights.assign(m, 1.0);

    const LassoSolution cd = solve_lasso(p, 1e-12, 20000);
    const std::vector<double> ref = ista_oracle(p, 1e-13);
    const double f_cd = lasso_objective(p, cd.code);
    const double f_ref = lasso_objective(p, ref);
    worst_obj = std::max(
        worst_obj, std::fabs(f_cd - f_ref) / std::max(1.0, std::fabs(f_ref)));
    worst_kkt = std::max(worst_kkt, kkt_residual(p, cd.code));
  }
  char buf[128];
  std::snprintf(buf, sizeof buf, "worst obj gap %.2e, worst kkt %.2e",
                worst_obj, worst_kkt);
  *detail = buf;
  return worst_obj <= 1e-6 && worst_kkt <= 1e-6;
}

// 2. closed-form budget split vs projected-gradient simplex oracle
bool crit_theta_optimality(std::string* detail) {
  Rng rng(102);
  const double gammas[4] = {0.25, 0.4, 1.0, 2.0};
  double worst_obj = 0.0, worst_budget = 0.0;
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 2 + rng() % 9;  // <= 10
    std::vector<double> c(n);
    for (double& v : c) v = std::fabs(gaussian(rng)) + 0.05;
    const double gamma = gammas[t % 4];
    const double budget = 1.0 + std::fabs(gaussian(rng)) * 10.0;

    const std::vector<double> th = theta_closed_form(c, gamma, budget);
    const std::vector<double> pg = simplex_pg_oracle(c, gamma, budget);
    auto obj = [&](const std::vector<double>& v) {
      double f = 0.0;
      for (std::size_t i = 0; i < n; ++i) f += c[i] * std::pow(v[i], -gamma);
      return f;
    };
    const double f_cf = obj(th), f_pg = obj(pg);
    worst_obj = std::max(worst_obj,
                         std::fabs(f_cf - f_pg) / std::max(1.0, f_pg));
    double s = 0.0;
    for (double v : th) s += v;
    worst_budget = std::max(worst_budget, std::fabs(s - budget));
  }
  char buf[128];
  std::snprintf(buf, sizeof buf, "worst obj gap %.2e, worst budget gap %.2e",
                worst_obj, worst_budget);
  *detail = buf;
  return worst_obj <= 1e-8 && worst_budget <= 1e-9;
}

// 3. shift algebra, exhaustive over lengths and offsets
bool crit_shift_algebra(std::string* detail) {
  double worst_adj = 0.0, worst_inv = 0.0;
  for (std::size_t n = 1; n <= 16; ++n) {
    for (int off = -3; off <= 3; ++off) {
      for (ShiftMode mode : {ShiftMode::circular, ShiftMode::zero_padded}) {
        const ShiftOp op{off, mode};
        // adjoint identity on every basis pair
        for (std::size_t i = 0; i < n; ++i) {
          std::vector<double> ei(n, 0.0);
          ei[i] = 1.0;
          const std::vector<double> fwd = op.apply(ei);
          for (std::size_t j = 0; j < n; ++j) {
            std::vector<double> ej(n, 0.0);
            ej[j] = 1.0;
            const double lhs = fwd[j];             // <op(ei), ej>
            const double adj = op.adjoint(ej)[i];  // <ei, adjoint(ej)>
            worst_adj = std::max(worst_adj, std::fabs(lhs - adj));
          }
        }
        // circular shifts invert exactly: adjoint(apply(x)) == x
        if (mode == ShiftMode::circular) {
          std::vector<double> x(n);
          for (std::size_t i = 0; i < n; ++i)
            x[i] = static_cast<double>(i) + 0.25;
          const std::vector<double> rt = op.adjoint(op.apply(x));
          for (std::size_t i = 0; i < n; ++i)
            worst_inv = std::max(worst_inv, std::fabs(rt[i] - x[i]));
        }
      }
    }
  }
  char buf[128];
  std::snprintf(buf, sizeof buf,
                "worst adjoint gap %.2e, worst circular round trip %.2e",
                worst_adj, worst_inv);
  *detail = buf;
  return worst_adj == 0.0 && worst_inv == 0.0;
}

// 4. monotone descent of both alternating objectives
bool crit_monotone_descent(std::string* detail) {
  int dict_violations = 0, alt_violations = 0;
  for (int t = 0; t < 20; ++t) {
    Rng rng(400 + t);
    DenseMatrix target = random_matrix(rng, 16, 12);
    const LearnResult lr = learn(target, 8, ShiftSet{2, ShiftMode::circular},
                                 0.1, 15, 1e-4, 400 + t, 3,
                                 /*compensate=*/true);
    for (std::size_t e = 1; e < lr.objective_per_epoch.size(); ++e)
      if (lr.objective_per_epoch[e] > lr.objective_per_epoch[e - 1] + 1e-10)
        ++dict_violations;

    Dictionary d = random_unit_dict(rng, 10, 6);
    DenseMatrix t2 = random_matrix(rng, 10, 8);
    ShrinkSchedule sched;
    sched.inner_max_iters = 40;
    sched.inner_tol = 1e-14;
    ThetaState st;
    st.budget = 10.0;
    st.gamma = 0.4;
    st.theta.assign(6, 10.0 / 6.0);
    const AlternateResult res = alternate_stage(d, t2, st, 0.1, sched);
    for (std::size_t i = 1; i < res.iter_objectives.size(); ++i)
      if (res.iter_objectives[i] > res.iter_objectives[i - 1] + 1e-10)
        ++alt_violations;
  }
  char buf[128];
  std::snprintf(buf, sizeof buf,
                "dictionary violations %d, alternation violations %d",
                dict_violations, alt_violations);
  *detail = buf;
  return dict_violations == 0 && alt_violations == 0;
}

// 5. planted factorization recovered across seeds
bool crit_planted_recovery(std::string* detail) {
  int ok = 0;
  const int seeds = 20;
  for (int t = 0; t < seeds; ++t) {
    Rng rng(700 + t);
    const std::size_t n = 32, pstar = 8;
    const DenseMatrix dstar = random_atoms(rng, n, pstar);
    const DenseMatrix zh = planted_code(rng, pstar, n, /*balanced=*/true);
    const DenseMatrix zx = planted_code(rng, pstar, n, /*balanced=*/false);

    LayerWeights layer;
    layer.kind = CellKind::vanilla_rnn;
    layer.w_h = matmul(dstar, zh);
    layer.w_x = matmul(dstar, zx);
    layer.bias.assign(n, 0.0);

    RunConfig cfg;
    cfg.initial_p = 0;  // start from one atom per column
    cfg.max_offset = 0;
    cfg.epochs_dict = 80;
    cfg.cd_cycles = 5;
    cfg.lambda1 = 0.1;
    cfg.energy_floor = 1e-2;
    cfg.shrink_factor = 0.7;
    cfg.max_stages = 60;
    cfg.target_nnz_frac = 0.15;

    const CompressLayerResult r = compress_layer(layer, cfg, 900 + t);
    const std::size_t p = r.layer.live_p();
    if (p >= 6 && p <= 10 && r.layer.recon_err_h < 0.05 &&
        r.layer.recon_err_x < 0.05)
      ++ok;
  }
  char buf[128];
  std::snprintf(buf, sizeof buf, "%d/%d seeds recovered (need >= 18)", ok,
                seeds);
  *detail = buf;
  return ok >= 18;
}

// 6. compression-rate accounting reproduces the published formula values
bool crit_rate_accounting(std::string* detail) {
  const auto [r650, rn650] =
      compression_rate(650, 650, 65, 650 * 65, 650 * 65, 0.5);
  (void)rn650;
  const auto [r4, rn4] = compression_rate(4, 4, 2, 4 * 2, 4 * 2, 0.5);
  (void)rn4;
  const std::vector<std::size_t> widths(5, 500);
  const std::vector<std::size_t> ps = {25, 35, 45, 50, 55};
  const std::size_t fact =
      factorized_param_count(CellKind::lstm, widths, ps);
  const bool ok650 = std::fabs(r650 - 6.67) <= 0.05;
  const bool ok4 = r4 == 4.0 / 3.0;
  const bool okfact = std::fabs(static_cast<double>(fact) - 1.3e6) <= 0.13e6;
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "rate(650,650,65)=%.4f, rate(4,4,2)=%.6f, stacked params %zu",
                r650, r4, fact);
  *detail = buf;
  return ok650 && ok4 && okfact;
}

// 7. lossless corner end to end: factorized forward matches dense
bool crit_lossless_corner(std::string* detail) {
  const Vocab vocab = Vocab::from_corpus("abcdefgh");
  NetworkModel model =
      init_model(ArchSpec{CellKind::vanilla_rnn, {8}}, vocab, 41);

  RunConfig cfg;
  cfg.initial_p = 8;
  cfg.lambda1 = 1e-8;
  cfg.lambda2_grid = {1e-8};
  cfg.max_offset = 0;
  cfg.energy_floor = 0.0;
  cfg.target_nnz_frac = 1.0;
  cfg.epochs_dict = 30;
  cfg.cd_cycles = 300;
  cfg.lasso_tol = 1e-12;
  const CompressNetworkResult r = compress_network(model, cfg);

  Rng rng(42);
  double worst = 0.0;
  for (int s = 0; s < 100; ++s) {
    std::vector<int> seq(12);
    for (int& t : seq) t = static_cast<int>(rng() % vocab.size());
    const auto dense = forward_dense(model, seq);
    const auto comp = forward_compressed(r.model, seq);
    for (std::size_t t = 0; t < seq.size(); ++t)
      for (std::size_t k = 0; k < vocab.size(); ++k)
        worst = std::max(worst, std::fabs(dense[t][k] - comp[t][k]));
  }
  const std::string text = "abcdefghhgfedcbaabcdefgh";
  const double pd = evaluate(model, text).perplexity;
  const double pc = evaluate(r.model, text).perplexity;
  const double prel = std::fabs(pd - pc) / pd;
  char buf[128];
  std::snprintf(buf, sizeof buf, "max logit gap %.2e, ppl rel gap %.2e",
                worst, prel);
  *detail = buf;
  return worst < 1e-6 && prel < 1e-6;
}

// 8. analytic gradients vs central finite differences
bool crit_gradients(std::string* detail) {
  const Vocab vocab = Vocab::from_corpus("abcde");
  const std::vector<int> tokens = {0, 2, 1, 4, 3, 0};  // 5 steps
  double worst = 0.0;

  for (CellKind kind : {CellKind::vanilla_rnn, CellKind::lstm}) {
    NetworkModel model = init_model(ArchSpec{kind, {8}}, vocab, 33);
    Rng rng(34);
    for (auto& l : model.layers)
      for (double& b : l.bias) b = 0.3 * gaussian(rng);
    CellState st = CellState::zero(model);
    DenseGrads grads = DenseGrads::zeros_like(model);
    dense_window(model, tokens, &st, &grads);
    auto loss = [&]() {
      CellState fresh = CellState::zero(model);
      return dense_window(model, tokens, &fresh, nullptr);
    };
    worst = std::max(worst,
                     grad_check(collect_params(model), grads.views(), loss));
  }

  // masked compressed parameterization from an actual compression run
  {
    NetworkModel model = init_model(ArchSpec{CellKind::lstm, {8}}, vocab, 36);
    RunConfig cfg;
    cfg.initial_p = 4;
    cfg.epochs_dict = 3;
    cfg.lambda2_grid = {0.1};
    cfg.target_nnz_frac = 0.3;
    cfg.max_offset = 2;
    CompressedModel cm = compress_network(model, cfg).model;
    std::vector<ShiftGroups> sgs;
    for (const auto& l : cm.layers) sgs.push_back(ShiftGroups::build(l));
    CellState st = CellState::zero(cm);
    CompressedGrads grads = CompressedGrads::zeros_like(cm);
    compressed_window(cm, sgs, tokens, &st, &grads);
    auto loss = [&]() {
      std::vector<ShiftGroups> fresh_sgs;
      for (const auto& l : cm.layers)
        fresh_sgs.push_back(ShiftGroups::build(l));
      CellState fresh = CellState::zero(cm);
      return compressed_window(cm, fresh_sgs, tokens, &fresh, nullptr);
    };
    worst = std::max(
        worst, grad_check(collect_params(cm, false), grads.views(cm, false),
                          loss));
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "worst relative error %.2e", worst);
  *detail = buf;
  return worst < 1e-4;
}

// 9. staged schedule lands in the 10-20%% occupancy band
bool crit_band_controller(std::string* detail) {
  Rng rng(408);
  int in_band = 0;
  const int runs = 20;
  for (int t = 0; t < runs; ++t) {
    Dictionary d = random_unit_dict(rng, 16, 16);
    DenseMatrix zstar(16, 16);
    for (double& v : zstar.data())
      v = uniform(rng, 0.0, 1.0) < 0.15 ? uniform(rng, 0.5, 2.0) : 0.0;
    const DenseMatrix target = matmul(live_atom_matrix(d), zstar);

    ShrinkSchedule sched;  // defaults: theta0 = 1e7, shrink 0.4, 25 stages
    const ScheduleResult res =
        run_schedule(d, target, sched, 0.1, 0.4, 900 + t);
    const double frac = res.stage_log.back().nnz_frac;
    if (res.reached && frac >= 0.10 && frac <= 0.20 &&
        res.stage_log.size() <= 25)
      ++in_band;
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "%d/%d in [0.10, 0.20] (need >= 18)",
                in_band, runs);
  *detail = buf;
  return in_band >= 18;
}

// 10. end-to-end story: train, compress >= 3x, masked fine-tune, quality holds
bool crit_end_to_end(std::string* detail) {
  const std::string full = load_corpus();
  const std::string corpus = full.substr(0, 30000);
  const std::string val = corpus.substr(corpus.size() - 3000);

  TrainConfig tc;
  tc.epochs = 5;
  tc.batch = 8;
  tc.bptt_len = 32;
  tc.seed = 1;
  const TrainResult base =
      train_baseline(corpus, ArchSpec{CellKind::lstm, {64, 64}}, tc);
  const double base_bpc = evaluate(base.model, val).bits_per_char;

  int ok = 0, rate_ok = 0;
  const int seeds = 20;
  double worst_ratio = 0.0;
  for (int t = 0; t < seeds; ++t) {
    RunConfig cc;
    cc.seed = 1000 + static_cast<std::uint64_t>(t);
    cc.initial_p = 24;  // 64-unit LSTM factors at ~3.6x dense rate
    cc.epochs_dict = 8;
    cc.lambda2_grid = {0.1};
    cc.target_nnz_frac = 0.2;
    cc.max_offset = 2;
    const CompressNetworkResult comp = compress_network(base.model, cc);
    if (comp.report.total_rate_dense >= 3.0) ++rate_ok;

    std::vector<std::vector<std::uint32_t>> pat_h, pat_x;
    for (const auto& l : comp.model.layers) {
      pat_h.push_back(l.z_h.col_idx);
      pat_x.push_back(l.z_x.col_idx);
    }

    TrainConfig ft = tc;
    ft.seed = cc.seed;
    ft.lr = 0.0005;
    ft.epochs = 2;
    const FinetuneResult tuned = finetune_masked(comp.model, corpus, ft);

    bool patterns_ok = true;
    for (std::size_t l = 0; l < tuned.model.layers.size(); ++l)
      if (tuned.model.layers[l].z_h.col_idx != pat_h[l] ||
          tuned.model.layers[l].z_x.col_idx != pat_x[l])
        patterns_ok = false;

    const double bpc = evaluate(tuned.model, val).bits_per_char;
    const double ratio = bpc / base_bpc;
    worst_ratio = std::max(worst_ratio, ratio);
    if (patterns_ok && comp.report.total_rate_dense >= 3.0 && ratio <= 1.10)
      ++ok;
  }
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "baseline %.3f bpc, %d/%d within 10%% (worst ratio %.3f), "
                "rate >= 3x in %d/%d",
                base_bpc, ok, seeds, worst_ratio, rate_ok, seeds);
  *detail = buf;
  return ok >= 16;
}

// 11. determinism, round trips, corruption detection
bool crit_determinism(std::string* detail) {
  const Vocab vocab = Vocab::from_corpus("abcdefgh");
  bool ok = true;

  // identical seeds -> byte-identical dense payloads
  NetworkModel m1 = init_model(ArchSpec{CellKind::lstm, {6, 6}}, vocab, 5);
  NetworkModel m2 = init_model(ArchSpec{CellKind::lstm, {6, 6}}, vocab, 5);
  ok = ok && serialize_model(m1) == serialize_model(m2);

  // identical seeds -> byte-identical compressed payloads
  RunConfig cc;
  cc.seed = 5;
  cc.initial_p = 4;
  cc.epochs_dict = 3;
  cc.lambda2_grid = {0.1};
  cc.target_nnz_frac = 0.25;
  const auto c1 = serialize_compressed(compress_network(m1, cc).model);
  const auto c2 = serialize_compressed(compress_network(m2, cc).model);
  ok = ok && c1 == c2;

  // save -> load -> save byte identical, both containers
  const auto b1 = serialize_model(m1);
  ok = ok && serialize_model(deserialize_model(b1)) == b1;
  ok = ok && serialize_compressed(deserialize_compressed(c1)) == c1;

  // every single-byte corruption past the magic is detected
  int detected = 0, tries = 0;
  for (std::size_t pos = 4; pos < b1.size(); pos += 7) {
    auto bad = b1;
    bad[pos] ^= 0x3c;
    ++tries;
    try {
      (void)deserialize_model(bad);
    } catch (const FormatError&) {
      ++detected;
    }
  }
  for (std::size_t pos = 4; pos < c1.size(); pos += 11) {
    auto bad = c1;
    bad[pos] ^= 0x3c;
    ++tries;
    try {
      (void)deserialize_compressed(bad);
    } catch (const FormatError&) {
      ++detected;
    }
  }
  ok = ok && detected == tries;
  char buf[96];
  std::snprintf(buf, sizeof buf, "corruptions detected %d/%d", detected,
                tries);
  *detail = buf;
  return ok;
}

struct Criterion {
  const char* name;
  double budget_s;  // 0 = no runtime budget
  bool (*fn)(std::string*);
};

}  // namespace

int main() {
  const Criterion criteria[] = {
      {"solver oracle equivalence (obj 1e-6, kkt 1e-6)", 5.0,
       crit_solver_oracle},
      {"budget-split optimality vs simplex oracle (1e-8)", 5.0,
       crit_theta_optimality},
      {"shift algebra exhaustive (exact)", 1.0, crit_shift_algebra},
      {"monotone descent of both objectives (tol 1e-10)", 0.0,
       crit_monotone_descent},
      {"planted-model recovery (err < 0.05, p in [6,10], >= 18/20)", 30.0,
       crit_planted_recovery},
      {"compression-rate accounting (6.67+-0.05, 4/3, 1.3M+-10%)", 0.0,
       crit_rate_accounting},
      {"lossless corner end-to-end (1e-6)", 30.0, crit_lossless_corner},
      {"gradient checks, dense and masked (rel err < 1e-4)", 10.0,
       crit_gradients},
      {"sparsity-band controller ([0.10,0.20], <= 25 stages, >= 18/20)", 0.0,
       crit_band_controller},
      {"toy end-to-end compression story (>= 3x, bpc within 10%, >= 16/20)",
       900.0, crit_end_to_end},
      {"determinism, round trip, corruption detection", 0.0,
       crit_determinism},
  };

  int failures = 0;
  int idx = 0;
  for (const Criterion& c : criteria) {
    ++idx;
    const auto t0 = Clock::now();
    std::string detail;
    bool pass = false;
    try {
      pass = c.fn(&detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double secs = seconds_since(t0);
    if (c.budget_s > 0.0 && secs > c.budget_s) {
      pass = false;
      detail += " [over budget]";
    }
    std::printf("[%2d] %s: %s (%.1f s%s; %s)\n", idx, c.name,
                pass ? "PASS" : "FAIL", secs,
                c.budget_s > 0.0
                    ? (" / budget " + std::to_string((int)c.budget_s) + " s")
                          .c_str()
                    : "",
                detail.c_str());
    if (!pass) ++failures;
  }
  std::printf("%d/%d criteria passed\n",
              static_cast<int>(std::size(criteria)) - failures,
              static_cast<int>(std::size(criteria)));
  return failures;
}
