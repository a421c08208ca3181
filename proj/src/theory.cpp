#include "fedmm/theory.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <random>
#include <sstream>
#include <stdexcept>

#include "fedmm/text.hpp"

namespace fedmm {

ConstantSet ConstantSet::with_margin(double margin) const {
  ConstantSet out = *this;
  auto inflate = [margin](double& v, Provenance p) {
    if (p == Provenance::Estimated) v *= 1.0 + margin;
  };
  inflate(out.L_f, L_f_provenance);
  inflate(out.sigma, sigma_provenance);
  inflate(out.delta_x, delta_x_provenance);
  inflate(out.delta_y, delta_y_provenance);
  // mu is a lower-bound quantity: shrink it instead.
  if (mu_provenance == Provenance::Estimated) out.mu /= 1.0 + margin;
  return out;
}

std::string ConstantSet::to_text() const {
  std::ostringstream out;
  auto line = [&](const char* name, double v, Provenance p) {
    out << name << '=' << format_double(v) << " (" << to_string(p) << ")\n";
  };
  line("L_f", L_f, L_f_provenance);
  line("mu", mu, mu_provenance);
  line("sigma", sigma, sigma_provenance);
  line("delta_x", delta_x, delta_x_provenance);
  line("delta_y", delta_y, delta_y_provenance);
  if (mu > 0.0) {
    out << "kappa=" << format_double(kappa()) << '\n' << "L=" << format_double(L()) << '\n';
  }
  return out.str();
}

bool ConstraintReport::satisfied() const {
  return std::all_of(constraints.begin(), constraints.end(),
                     [](const ConstraintRecord& c) { return c.satisfied; });
}

const ConstraintRecord& ConstraintReport::find(const std::string& name) const {
  for (const auto& c : constraints) {
    if (c.name == name) return c;
  }
  throw std::out_of_range("no constraint named '" + name + "'");
}

std::vector<std::string> ConstraintReport::violated() const {
  std::vector<std::string> out;
  for (const auto& c : constraints) {
    if (!c.satisfied) out.push_back(c.name);
  }
  return out;
}

std::string ConstraintReport::to_text() const {
  std::ostringstream out;
  out << "constraint system: " << system << '\n';
  std::size_t width = 0;
  for (const auto& c : constraints) width = std::max(width, c.name.size());
  for (const auto& c : constraints) {
    out << "  " << std::left << std::setw(static_cast<int>(width)) << c.name << "  "
        << (c.satisfied ? "ok  " : "FAIL") << "  " << std::setw(24) << format_double(c.lhs)
        << ' ' << std::setw(2) << c.relation << ' ' << format_double(c.rhs) << '\n';
  }
  for (const auto& [name, value] : info) {
    out << "  (info) " << name << " = " << format_double(value) << '\n';
  }
  out << "overall: " << (satisfied() ? "satisfied" : "violated") << '\n';
  return out.str();
}

std::string ConstraintReport::to_key_values() const {
  std::ostringstream out;
  for (const auto& c : constraints) {
    out << c.name << '=' << (c.satisfied ? "satisfied" : "violated") << '|'
        << format_double(c.lhs) << '|' << format_double(c.rhs) << '\n';
  }
  return out.str();
}

namespace {

ConstraintRecord at_least(std::string name, double lhs, double rhs) {
  return {std::move(name), ">=", lhs, rhs, lhs >= rhs};
}

ConstraintRecord at_most(std::string name, double lhs, double rhs) {
  return {std::move(name), "<=", lhs, rhs, lhs <= rhs};
}

ConstraintReport validate_system(std::string system, const HyperParams& hp, const ConstantSet& c,
                                 std::size_t K, double rho, double rho_u,
                                 const std::optional<GapInputs>& gap) {
  if (!(c.L_f > 0.0) || !(c.mu > 0.0)) {
    throw std::invalid_argument("constraint validation needs positive L_f and mu");
  }
  const double Kd = static_cast<double>(K);
  const double n = hp.eta_n;
  const double m = hp.eta_m;
  const double q = static_cast<double>(hp.q);
  const double gamma = hp.gamma;
  const double lambda = hp.lambda;
  const double Lf = c.L_f;
  const double mu = c.mu;
  const double L = c.L();
  const double rho_l = rho;
  const double m13 = std::cbrt(m);
  const double sqrt2 = std::sqrt(2.0);

  const double Lambda = 1.0 / 16.0 + Lf * Lf * rho_u / (4.0 * mu * mu) +
                        16.0 * lambda * lambda * Lf * Lf / (Kd * rho * rho);
  const double tau = lambda / gamma;

  ConstraintReport report;
  report.system = std::move(system);
  auto& out = report.constraints;

  const double comm_term = 12.0 * sqrt2 * n * lambda * q * Lf;
  out.push_back(at_least("m_lower", m,
                         std::max({2.0, n * n * n, std::pow(hp.c1 * n, 3) * Kd,
                                   std::pow(hp.c2 * n, 3) * Kd,
                                   Kd * std::pow(comm_term, 3) / std::pow(rho, 3)})));
  out.push_back({"n_positive", ">", n, 0.0, n > 0.0});
  out.push_back(at_most("c_sq_upper", hp.c1 * hp.c1 + hp.c2 * hp.c2,
                        std::pow(12.0, 4) * std::pow(lambda, 4) * q * q * Lf * Lf /
                            std::pow(rho, 4)));
  const double warm = 2.0 / (3.0 * n * n * n * Kd);
  out.push_back(at_least("c1_lower", hp.c1, warm + 9.0 * rho_u * Lf * Lf / (2.0 * mu * mu * rho)));
  out.push_back(at_least("c2_lower", hp.c2, warm + 4.5));
  out.push_back(at_most("tau_upper", tau,
                        std::min(std::sqrt(5.0 * Kd) / (4.0 * std::sqrt(2.0 * Lambda)), 1.0)));
  out.push_back(at_most("gamma_upper", gamma,
                        std::min({m13 * rho / (4.0 * L * n),
                                  lambda * mu / (16.0 * rho_u * L),
                                  rho_l * mu / (16.0 * rho_u * Lf * Lf),
                                  2.0 * lambda * mu * mu * rho / (27.0 * Lf * Lf * rho_u),
                                  std::sqrt(Kd) * rho / (8.0 * std::sqrt(3.0) * Lf)})));
  out.push_back(at_most("lambda_upper", lambda,
                        std::min(m13 / (4.0 * Lf * n * rho_u),
                                 3.0 * std::sqrt(5.0 * Kd) / (32.0 * sqrt2 * mu))));
  out.push_back({"rho_range", "in (0,1]", rho, 1.0, rho > 0.0 && rho <= 1.0});
  out.push_back({"rho_u_range", "in (0,r]", rho_u, 135.0 / (64.0 * rho * rho),
                 rho_u > 0.0 && rho_u <= 135.0 / (64.0 * rho * rho)});

  report.info.emplace_back("tau", tau);
  report.info.emplace_back("Lambda", Lambda);
  report.info.emplace_back("kappa", c.kappa());
  report.info.emplace_back("L", L);
  report.info.emplace_back("eta_0", n * std::cbrt(Kd) / m13);
  if (gap) {
    const double s2 = c.sigma * c.sigma;
    const double c1s = hp.c1 * hp.c1;
    const double c2s = hp.c2 * hp.c2;
    const double Delta = c2s * s2 + c1s * s2 + 3.0 * c2s * c.delta_x * c.delta_x +
                         3.0 * c1s * c.delta_y * c.delta_y;
    const double G =
        4.0 * (gap->F_start - gap->F_star) / (rho * gamma * n) +
        36.0 * rho_u * Lf * Lf / (rho * lambda * mu * mu * n) * (gap->F_start - gap->f_start) +
        8.0 * m13 * s2 / (q * std::pow(Kd, 4.0 / 3.0) * n * n * rho) +
        8.0 * Kd * n * n *
            ((c1s + c2s) * s2 / (rho * rho * Kd) + Lambda * Delta / (15.0 * Kd * lambda * lambda * Lf * Lf)) *
            std::log(m + static_cast<double>(hp.T));
    report.info.emplace_back("Delta", Delta);
    report.info.emplace_back("G", G);
  }
  return report;
}

}  // namespace

ConstraintReport validate_theorem1(const HyperParams& hp, const ConstantSet& c, std::size_t K,
                                   const std::optional<GapInputs>& gap) {
  return validate_system("theorem1", hp, c, K, hp.rho, hp.rho_u, gap);
}

ConstraintReport validate_theorem2(const HyperParams& hp, const ConstantSet& c, std::size_t K,
                                   const std::optional<GapInputs>& gap) {
  return validate_system("theorem2", hp, c, K, 1.0, 1.0, gap);
}

SaddlePoint random_point(const Problem& problem, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> normal(0.0, scale);
  SaddlePoint p{Vector(problem.dim_x()), Vector(problem.dim_y())};
  for (double& v : p.x) v = normal(rng);
  for (double& v : p.y) v = normal(rng);
  p.y = problem.project_y(p.y);
  return p;
}

double probe_pl(const Problem& problem, std::size_t n_points, std::uint64_t seed,
                std::optional<double> mu_override) {
  if (!problem.inner_argmax(Vector(problem.dim_x()))) {
    throw std::invalid_argument("probe_pl: " + to_string(problem.kind()) +
                                " has no closed-form inner maximum");
  }
  const double mu = mu_override.value_or(problem.constants().mu);
  std::mt19937_64 rng(seed);
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n_points; ++i) {
    const SaddlePoint p = random_point(problem, rng);
    const Vector y_star = *problem.inner_argmax(p.x);
    const double gap = problem.global_value(p.x, y_star) - problem.global_value(p.x, p.y);
    const double slack = norm_sq(problem.global_grad(p.x, p.y).gy) - 2.0 * mu * gap;
    worst = std::min(worst, slack);
  }
  return worst;
}

LipschitzReport probe_lipschitz(const Problem& problem, std::size_t n_pairs, std::uint64_t seed) {
  const Vector origin(problem.dim_x());
  if (!problem.inner_argmax(origin) || !problem.grad_F(origin)) {
    throw std::invalid_argument("probe_lipschitz: " + to_string(problem.kind()) +
                                " has no closed-form y*(x) and grad F");
  }
  const ProblemConstants pc = problem.constants();
  LipschitzReport report;
  report.kappa = pc.L_f / pc.mu;
  report.L = pc.L_f * (1.0 + pc.L_f / pc.mu);
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < n_pairs; ++i) {
    const Vector x1 = random_point(problem, rng).x;
    const Vector x2 = random_point(problem, rng).x;
    const double dx = std::sqrt(dist_sq(x1, x2));
    if (dx == 0.0) continue;
    const double ry = std::sqrt(dist_sq(*problem.inner_argmax(x1), *problem.inner_argmax(x2))) / dx;
    const double rg = std::sqrt(dist_sq(*problem.grad_F(x1), *problem.grad_F(x2))) / dx;
    report.max_ystar_ratio = std::max(report.max_ystar_ratio, ry);
    report.max_gradF_ratio = std::max(report.max_gradF_ratio, rg);
  }
  return report;
}

double grad_check(const Problem& problem, std::size_t k, const Vector& x, const Vector& y,
                  double h) {
  if (!(h > 1e-8 && h < 1e-3)) throw std::invalid_argument("grad_check: h must lie in (1e-8, 1e-3)");
  const GradPair g = problem.grad_full(k, x, y);
  double worst = 0.0;
  auto compare = [&](double fd, double an) {
    const double scale = std::max({1.0, std::abs(fd), std::abs(an)});
    worst = std::max(worst, std::abs(fd - an) / scale);
  };
  for (std::size_t i = 0; i < x.size(); ++i) {
    Vector xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    compare((problem.value(k, xp, y) - problem.value(k, xm, y)) / (2.0 * h), g.gx[i]);
  }
  for (std::size_t i = 0; i < y.size(); ++i) {
    Vector yp = y, ym = y;
    yp[i] += h;
    ym[i] -= h;
    compare((problem.value(k, x, yp) - problem.value(k, x, ym)) / (2.0 * h), g.gy[i]);
  }
  return worst;
}

double probe_unbiased(const Problem& problem, std::size_t n_points, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (std::size_t p = 0; p < n_points; ++p) {
    const SaddlePoint z = random_point(problem, rng);
    for (std::size_t k = 0; k < problem.num_clients(); ++k) {
      const std::size_t n = problem.num_items(k);
      GradPair mean{Vector(problem.dim_x()), Vector(problem.dim_y())};
      for (std::size_t i = 0; i < n; ++i) {
        const GradPair g = problem.grad_stoch(k, z.x, z.y, SampleRef{k, i});
        mean.gx += g.gx;
        mean.gy += g.gy;
      }
      mean.gx *= 1.0 / static_cast<double>(n);
      mean.gy *= 1.0 / static_cast<double>(n);
      const GradPair full = problem.grad_full(k, z.x, z.y);
      worst = std::max(worst, std::sqrt(dist_sq(mean.gx, full.gx) + dist_sq(mean.gy, full.gy)));
    }
  }
  return worst;
}

ConstantSet estimate_constants(const Problem& problem, std::size_t n_samples, std::uint64_t seed) {
  const ProblemConstants pc = problem.constants();
  ConstantSet c;
  c.L_f = pc.L_f;
  c.L_f_provenance = pc.L_f_provenance;
  c.mu = pc.mu;
  c.mu_provenance = pc.mu_provenance;
  c.sigma_provenance = Provenance::Estimated;
  c.delta_x_provenance = Provenance::Estimated;
  c.delta_y_provenance = Provenance::Estimated;

  std::mt19937_64 rng(seed);
  const std::size_t K = problem.num_clients();
  double sigma_sq = 0.0;
  double lf_est = 0.0;
  for (std::size_t s = 0; s < n_samples; ++s) {
    const SaddlePoint z = random_point(problem, rng);
    std::vector<GradPair> full;
    for (std::size_t k = 0; k < K; ++k) {
      full.push_back(problem.grad_full(k, z.x, z.y));
      const std::size_t n = problem.num_items(k);
      double var = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const GradPair g = problem.grad_stoch(k, z.x, z.y, SampleRef{k, i});
        var += dist_sq(g.gx, full.back().gx) + dist_sq(g.gy, full.back().gy);
      }
      sigma_sq = std::max(sigma_sq, var / static_cast<double>(n));
    }
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t j = k + 1; j < K; ++j) {
        c.delta_x = std::max(c.delta_x, std::sqrt(dist_sq(full[k].gx, full[j].gx)));
        c.delta_y = std::max(c.delta_y, std::sqrt(dist_sq(full[k].gy, full[j].gy)));
      }
    }
    if (pc.L_f_provenance != Provenance::Analytic) {
      // Blockwise difference quotients of one sampled item's gradient.
      const std::size_t k = std::uniform_int_distribution<std::size_t>(0, K - 1)(rng);
      const SampleRef xi{k, std::uniform_int_distribution<std::size_t>(0, problem.num_items(k) - 1)(rng)};
      const SaddlePoint d = random_point(problem, rng, 1e-3);
      const GradPair g0 = problem.grad_stoch(k, z.x, z.y, xi);
      const GradPair gx = problem.grad_stoch(k, z.x + d.x, z.y, xi);
      const GradPair gy = problem.grad_stoch(k, z.x, z.y + d.y, xi);
      const double nx = norm(d.x);
      const double ny = norm(d.y);
      lf_est = std::max({lf_est, std::sqrt(dist_sq(gx.gx, g0.gx)) / nx,
                         std::sqrt(dist_sq(gx.gy, g0.gy)) / nx,
                         std::sqrt(dist_sq(gy.gx, g0.gx)) / ny,
                         std::sqrt(dist_sq(gy.gy, g0.gy)) / ny});
    }
  }
  c.sigma = std::sqrt(sigma_sq);
  if (pc.L_f_provenance != Provenance::Analytic) {
    c.L_f = lf_est;
    c.L_f_provenance = Provenance::Estimated;
  }
  return c;
}

}  // namespace fedmm
