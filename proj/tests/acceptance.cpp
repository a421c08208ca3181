// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure.
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fedmm/algorithms.hpp"
#include "fedmm/config.hpp"
#include "fedmm/federation.hpp"
#include "fedmm/metrics.hpp"
#include "fedmm/theory.hpp"

using namespace fedmm;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

double total_dist(const TraceRecord& r) { return r.dist_x_sq.value() + r.dist_y_sq.value(); }

// ---------------------------------------------------------------------------

struct ConvergenceCheck {
  bool reached = false;
  bool monotone = false;
  double ratio = 0.0;
  double seconds = 0.0;
};

ConvergenceCheck check_convergence(const Problem& p, const HyperParams& hp) {
  const RunTrace tr = run(p, hp);
  ConvergenceCheck c;
  c.ratio = total_dist(tr.records.back()) / total_dist(tr.initial);
  c.reached = c.ratio <= 1e-4;
  c.seconds = tr.wall_seconds;
  std::vector<double> sync;
  for (const auto& r : tr.records) {
    if (r.is_sync) sync.push_back(total_dist(r));
  }
  c.monotone = true;
  for (std::size_t j = sync.size() / 10 + 1; j < sync.size(); ++j) {
    if (sync[j] > 1.5 * sync[j - 1]) c.monotone = false;
  }
  return c;
}

Outcome criterion1() {
  Outcome out{true, ""};
  for (const char* preset : {"synthetic-s1", "synthetic-s10"}) {
    const RunConfig cfg = parse_config(preset_text(preset));
    const auto problem = cfg.problem.build();
    for (Variant v : {Variant::FGDA, Variant::AdaFGDA_Adam}) {
      bool ok = false;
      std::string note;
      for (double step : {0.01, 0.05, 0.1}) {
        HyperParams hp = cfg.single(v, 1).hp;
        hp.gamma = hp.lambda = step;
        ConvergenceCheck c;
        try {
          c = check_convergence(*problem, hp);
        } catch (const std::runtime_error&) {
          continue;  // diverged at this step size
        }
        if (c.reached && c.monotone && c.seconds < 60.0) {
          ok = true;
          note = "step " + fmt(step) + " ratio " + fmt(c.ratio) + " in " + fmt(c.seconds) + "s";
          break;
        }
      }
      out.pass = out.pass && ok;
      out.detail += std::string(preset) + "/" + to_string(v) + ": " + (ok ? note : "no step size") + "; ";
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

Outcome criterion2() {
  const auto syn = make_synthetic({.K = 10, .dim = 20, .noise_sigma = 0.1, .n_items = 100});
  const auto auc = make_auc({.K = 4, .dim = 10, .n_per_client = 100, .pos_ratio = 0.1});
  bool all = true;
  std::string detail;
  for (const Problem* p : {static_cast<const Problem*>(syn.get()), static_cast<const Problem*>(auc.get())}) {
    HyperParams fgda;
    fgda.gamma = fgda.lambda = 0.05;
    fgda.T = 400;
    fgda.seed = 9;

    HyperParams ada = fgda;
    ada.variant = Variant::AdaFGDA_Adam;
    ada.zero_accumulators = true;
    ada.rho = 1.0;
    const bool a = to_csv(run(*p, fgda)) == to_csv(run(*p, ada));

    HyperParams unit = fgda;
    unit.eta_const = 1.0;
    unit.momentum_const = 1.0;
    HyperParams local = fgda;
    local.variant = Variant::LocalSGDA;
    const std::string local_csv = to_csv(run(*p, local));
    const bool b = to_csv(run(*p, unit)) == local_csv;

    HyperParams heavy = local;
    heavy.beta_m = 0.0;
    const bool c = to_csv(baseline_momentum_local_sgda(*p, heavy)) == local_csv;

    all = all && a && b && c;
    detail += to_string(p->kind()) + ": a=" + (a ? "eq" : "NE") + " b=" + (b ? "eq" : "NE") +
              " c=" + (c ? "eq" : "NE") + "; ";
  }
  return {all, detail};
}

// ---------------------------------------------------------------------------

Outcome criterion3() {
  std::mt19937_64 rng(2024);
  int good = 0;
  std::string first_bad;
  for (int i = 0; i < 50; ++i) {
    const std::size_t K = 1 + rng() % 8;
    HyperParams hp;
    hp.q = 1 + rng() % 30;
    hp.T = 1 + rng() % 300;
    hp.seed = i;
    const auto p = make_synthetic({.K = K, .dim = 3, .noise_sigma = 0.1, .n_items = 40});
    const RunTrace tr = run(*p, hp);
    const SfoLedger ledger = expected_sfo(hp.T, hp.q);
    const std::uint64_t sfo_formula = 2 * hp.q + 2 * (hp.T - hp.T / hp.q);
    const bool ok = tr.counters.sfo_per_client == sfo_formula && ledger.exact == sfo_formula &&
                    tr.counters.comm_rounds == hp.T / hp.q &&
                    tr.counters.sfo_per_client <= 2 * hp.q + 2 * hp.T;
    if (ok) {
      ++good;
    } else if (first_bad.empty()) {
      first_bad = " first mismatch T=" + std::to_string(hp.T) + " q=" + std::to_string(hp.q);
    }
  }
  return {good == 50, std::to_string(good) + "/50 exact" + first_bad};
}

// ---------------------------------------------------------------------------

Outcome criterion4() {
  std::vector<ProblemPtr> problems{
      make_synthetic({.K = 6, .dim = 5, .noise_sigma = 0.2, .n_items = 30}),
      make_auc({.K = 4, .dim = 6, .n_per_client = 60, .pos_ratio = 0.1}),
      make_robust({.K = 5, .dim = 6, .n_per_client = 40})};
  std::size_t checked = 0, bad = 0;
  for (const auto& p : problems) {
    for (Variant v : {Variant::FGDA, Variant::AdaFGDA_Adam, Variant::AdaFGDA_AdaBelief,
                      Variant::LocalSGDA, Variant::MomentumLocalSGDA}) {
      HyperParams hp;
      hp.variant = v;
      hp.gamma = hp.lambda = 0.05;
      hp.q = 7;
      hp.T = 210;
      hp.rho = 0.1;
      for (const TraceRecord& r : run(*p, hp).records) {
        if (!r.is_sync) continue;
        ++checked;
        if (r.consensus_x != 0.0 || r.consensus_y != 0.0) ++bad;
      }
    }
  }
  return {bad == 0 && checked > 0,
          std::to_string(checked) + " sync records, " + std::to_string(bad) + " nonzero"};
}

// ---------------------------------------------------------------------------

Outcome criterion5() {
  const auto syn = make_synthetic({.K = 10, .dim = 20, .noise_sigma = 0.1, .n_items = 50});
  const auto auc = make_auc({.K = 5, .dim = 10, .n_per_client = 60, .pos_ratio = 0.1});
  const auto rob = make_robust({.K = 5, .dim = 10, .n_per_client = 40});
  std::ostringstream d;
  bool ok = true;

  const double pl_syn = probe_pl(*syn, 1000, 1);
  const double pl_auc = probe_pl(*auc, 1000, 2);
  ok = ok && pl_syn >= -1e-9 && pl_auc >= -1e-9;
  d << "pl slack " << fmt(pl_syn) << "/" << fmt(pl_auc);

  for (const Problem* p : {static_cast<const Problem*>(syn.get()), static_cast<const Problem*>(auc.get())}) {
    const LipschitzReport lr = probe_lipschitz(*p, 1000, 3);
    ok = ok && lr.ok();
    d << "; lipschitz " << to_string(p->kind()) << " " << fmt(lr.max_ystar_ratio) << "<=" << fmt(lr.kappa)
      << ", " << fmt(lr.max_gradF_ratio) << "<=" << fmt(lr.L);
  }

  double worst_grad = 0.0, worst_unbiased = 0.0;
  std::mt19937_64 rng(4);
  for (const Problem* p : {static_cast<const Problem*>(syn.get()), static_cast<const Problem*>(auc.get()),
                           static_cast<const Problem*>(rob.get())}) {
    for (int i = 0; i < 100; ++i) {
      const SaddlePoint z = random_point(*p, rng);
      worst_grad = std::max(worst_grad, grad_check(*p, i % p->num_clients(), z.x, z.y));
    }
    worst_unbiased = std::max(worst_unbiased, probe_unbiased(*p, 10, 5));
  }
  ok = ok && worst_grad < 1e-5 && worst_unbiased <= 1e-10;
  d << "; gradcheck " << fmt(worst_grad) << "; unbiased " << fmt(worst_unbiased);
  return {ok, d.str()};
}

// ---------------------------------------------------------------------------

Outcome criterion6() {
  const RunConfig cfg = parse_config(preset_text("synthetic-theorem1"));
  const auto problem = cfg.problem.build();
  const ConstantSet c = estimate_constants(*problem, 10, 7).with_margin(0.1);
  const std::size_t K = cfg.problem.K();
  const bool preset_ok = validate_theorem1(cfg.hp, c, K).satisfied();

  struct Crafted {
    std::string name;
    std::function<void(HyperParams&)> edit;
  };
  const std::vector<Crafted> crafted{
      {"m_lower", [](HyperParams& hp) { hp.eta_m = 1e6; }},
      {"n_positive", [](HyperParams& hp) { hp.eta_n = 0.0; }},
      {"c_sq_upper", [](HyperParams& hp) { hp.c1 = 12.0; }},
      {"c1_lower", [](HyperParams& hp) { hp.c1 = 0.1; }},
      {"c2_lower", [](HyperParams& hp) { hp.c2 = 4.0; }},
      {"tau_upper", [](HyperParams& hp) { hp.gamma = 0.01; }},
      {"gamma_upper", [](HyperParams& hp) { hp.rho_u = 1e-3; }},
      {"lambda_upper", [](HyperParams& hp) { hp.gamma = hp.lambda = 0.5; }},
      {"rho_range", [](HyperParams& hp) { hp.rho = 1.2; }},
      {"rho_u_range", [](HyperParams& hp) { hp.rho_u = 3.0; }},
  };
  int caught = 0;
  std::string missed;
  for (const Crafted& t : crafted) {
    HyperParams hp = cfg.hp;
    t.edit(hp);
    const ConstraintReport r = validate_theorem1(hp, c, K);
    if (!r.find(t.name).satisfied) {
      ++caught;
    } else {
      missed += " " + t.name;
    }
  }
  return {preset_ok && caught == 10,
          std::string("preset ") + (preset_ok ? "satisfies all 10" : "VIOLATES") + "; crafted " +
              std::to_string(caught) + "/10 reported by name" + missed};
}

// ---------------------------------------------------------------------------

Outcome criterion7() {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> kind(0, 5);
  std::normal_distribution<double> n(0, 1);
  std::uniform_real_distribution<double> u(0, 1);
  double lowest_margin = std::numeric_limits<double>::infinity();
  std::size_t calls = 0;
  bool ok = true;
  for (AdaptiveMode mode : {AdaptiveMode::AdamStyle, AdaptiveMode::AdaBeliefStyle}) {
    for (int block = 0; block < 1000; ++block) {
      const double rho = std::pow(10.0, -6.0 * u(rng));
      const double varrho = 0.01 + 0.98 * u(rng);
      AdaptiveAccumulator acc(mode, 5, 3, rho, varrho);
      for (int i = 0; i < 500; ++i) {
        Vector w(5), v(3);
        for (auto* vec : {&w, &v}) {
          for (double& x : *vec) {
            switch (kind(rng)) {
              case 0: x = 0.0; break;
              case 1: x = 1e150 * n(rng); break;
              case 2: x = 1e-200 * n(rng); break;
              case 3: x = std::ldexp(n(rng), -1070); break;
              default: x = n(rng);
            }
          }
        }
        const std::optional<double> tied =
            (i % 2) ? std::optional<double>(u(rng)) : std::nullopt;
        const AdaptiveMatrices m = generate_matrices(acc, w, v, tied);
        ++calls;
        const double low = std::min(m.A.min_entry(), m.B.min_entry());
        if (low < rho) ok = false;
        lowest_margin = std::min(lowest_margin, low / rho);
      }
    }
  }
  return {ok && calls >= 1000000,
          std::to_string(calls) + " calls, min entry / rho = " + fmt(lowest_margin)};
}

// ---------------------------------------------------------------------------

double final_auc(const RunTrace& tr) { return tr.records.back().auc.value(); }

Outcome criterion8() {
  const RunConfig cfg = parse_config(preset_text("auc-imbalanced"));
  int passing = 0;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    ProblemConfig pc = cfg.problem;
    pc.auc.seed = 100 + seed;
    const auto problem = pc.build();
    const double fgda = final_auc(run(*problem, cfg.single(Variant::FGDA, seed).hp));
    const double ada = final_auc(run(*problem, cfg.single(Variant::AdaFGDA_Adam, seed).hp));
    const double local = final_auc(run(*problem, cfg.single(Variant::LocalSGDA, seed).hp));
    const bool ok = fgda >= 0.9 && ada >= 0.9 && local <= ada + 0.02;
    passing += ok;
    detail += "seed " + std::to_string(seed) + ": fgda " + fmt(fgda) + " ada " + fmt(ada) +
              " local " + fmt(local) + (ok ? " ok; " : " FAIL; ");
  }
  return {passing >= 2, std::to_string(passing) + "/3 seeds; " + detail};
}

// ---------------------------------------------------------------------------

Outcome criterion9() {
  bool all = true;
  std::string detail;
  std::uint64_t comm6 = 0, comm12 = 0;
  for (const char* preset : {"robust-q6", "robust-q12"}) {
    const RunConfig cfg = parse_config(preset_text(preset));
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      ProblemConfig pc = cfg.problem;
      pc.robust.seed = 200 + seed;
      const auto robust = make_robust(pc.robust);
      RobustOptions erm_opts = pc.robust;
      erm_opts.radius = 1e-9;
      const auto erm = make_robust(erm_opts);

      const HyperParams hp = cfg.single(Variant::FGDA, seed).hp;
      const RunTrace tr_robust = run(*robust, hp);
      const RunTrace tr_erm = run(*erm, hp);
      const double acc_robust = worst_case_accuracy(*robust, tr_robust.final_iterate.x);
      const double acc_erm = worst_case_accuracy(*robust, tr_erm.final_iterate.x);
      const bool ok = acc_robust > acc_erm && tr_robust.counters.sfo_per_client ==
                                                   tr_erm.counters.sfo_per_client;
      all = all && ok;
      (hp.q == 6 ? comm6 : comm12) = tr_robust.counters.comm_rounds;
      detail += std::string(preset) + "/" + std::to_string(seed) + " " + fmt(acc_robust) + " vs " +
                fmt(acc_erm) + (ok ? "; " : " FAIL; ");
    }
  }
  const bool comm_ok = comm6 + 1 >= 2 * comm12 && comm6 <= 2 * comm12 + 1;
  detail += "comm " + std::to_string(comm6) + " vs " + std::to_string(comm12);
  return {all && comm_ok, detail};
}

// ---------------------------------------------------------------------------

double mean_sq_est_err_y(const RunTrace& tr) {
  double s = 0.0;
  for (const auto& r : tr.records) s += r.est_err_y * r.est_err_y;
  return s / static_cast<double>(tr.records.size());
}

Outcome criterion10() {
  RunConfig cfg = parse_config(preset_text("synthetic-s1"));
  apply_override(cfg, "problem.noise_sigma", "0.1");
  int wins = 0;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    ProblemConfig pc = cfg.problem;
    pc.synthetic.seed = 42 + seed;
    const auto problem = pc.build();
    HyperParams storm = cfg.single(Variant::FGDA, seed).hp;
    storm.gamma = storm.lambda = 0.05;
    storm.c1 = storm.c2 = 1.0;
    HyperParams plain = storm;
    plain.momentum_const = 1.0;
    const double e_storm = mean_sq_est_err_y(run(*problem, storm));
    const double e_plain = mean_sq_est_err_y(run(*problem, plain));
    wins += e_storm < e_plain;
    detail += "seed " + std::to_string(seed) + ": " + fmt(e_storm) + " vs " + fmt(e_plain) + "; ";
  }
  return {wins == 3, std::to_string(wins) + "/3; " + detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"synthetic convergence", criterion1},
      {"reduction equivalences", criterion2},
      {"ledger exactness", criterion3},
      {"sync consensus invariant", criterion4},
      {"assumption probes", criterion5},
      {"constraint validator", criterion6},
      {"adaptive matrix floor", criterion7},
      {"auc experiment", criterion8},
      {"robust experiment", criterion9},
      {"estimator quality", criterion10},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("criterion %2zu %-26s %s  %s\n", i + 1, criteria[i].first.c_str(),
                o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures,
              criteria.size());
  return failures == 0 ? 0 : 1;
}
