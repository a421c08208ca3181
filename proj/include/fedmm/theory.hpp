#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fedmm/problems.hpp"
#include "fedmm/state.hpp"

namespace fedmm {

/// Problem constants used by the hyperparameter conditions.
struct ConstantSet {
  double L_f = 0.0;
  double mu = 0.0;
  double sigma = 0.0;
  double delta_x = 0.0;
  double delta_y = 0.0;
  Provenance L_f_provenance = Provenance::Unavailable;
  Provenance mu_provenance = Provenance::Unavailable;
  Provenance sigma_provenance = Provenance::Unavailable;
  Provenance delta_x_provenance = Provenance::Unavailable;
  Provenance delta_y_provenance = Provenance::Unavailable;

  double kappa() const { return L_f / mu; }
  double L() const { return L_f * (1.0 + L_f / mu); }

  /// Estimated fields inflated by (1 + margin); analytic fields unchanged.
  ConstantSet with_margin(double margin = 0.1) const;

  std::string to_text() const;
};

struct ConstraintRecord {
  std::string name;
  std::string relation;  // how lhs must compare to rhs
  double lhs = 0.0;
  double rhs = 0.0;
  bool satisfied = false;
};

struct ConstraintReport {
  std::string system;  // "theorem1" / "theorem2"
  std::vector<ConstraintRecord> constraints;
  /// Informational values (Lambda, tau, G, ...); never part of `satisfied`.
  std::vector<std::pair<std::string, double>> info;

  bool satisfied() const;
  const ConstraintRecord& find(const std::string& name) const;
  std::vector<std::string> violated() const;

  /// Aligned human-readable table.
  std::string to_text() const;
  /// One `name=satisfied|lhs|rhs` line per constraint.
  std::string to_key_values() const;
};

/// Inputs for the informational G value. Optional; omitted G is not shown.
struct GapInputs {
  double F_start = 0.0;     // F(x_bar_1)
  double F_star = 0.0;      // inf_x F(x)
  double f_start = 0.0;     // f(x_bar_1, y_bar_1)
};

/// Every hyperparameter condition of the adaptive method's convergence
/// result, one named record each (10 in total). rho and rho_u come from hp.
ConstraintReport validate_theorem1(const HyperParams& hp, const ConstantSet& c, std::size_t K,
                                   const std::optional<GapInputs>& gap = std::nullopt);

/// The same system at rho = rho_u = 1 (identity preconditioners).
ConstraintReport validate_theorem2(const HyperParams& hp, const ConstantSet& c, std::size_t K,
                                   const std::optional<GapInputs>& gap = std::nullopt);

/// Minimum over sampled (x, y') of |grad_y f(x, y')|^2 - 2 mu (max_y f(x, y)
/// - f(x, y')). Throws std::invalid_argument without a closed-form inner max.
double probe_pl(const Problem& problem, std::size_t n_points, std::uint64_t seed,
                std::optional<double> mu_override = std::nullopt);

struct LipschitzReport {
  double max_ystar_ratio = 0.0;  // |y*(x1) - y*(x2)| / |x1 - x2|
  double max_gradF_ratio = 0.0;  // |grad F(x1) - grad F(x2)| / |x1 - x2|
  double kappa = 0.0;
  double L = 0.0;
  bool ok() const { return max_ystar_ratio <= kappa && max_gradF_ratio <= L; }
};

/// Throws std::invalid_argument without closed-form y*(x) and grad F.
LipschitzReport probe_lipschitz(const Problem& problem, std::size_t n_pairs, std::uint64_t seed);

/// Central finite differences of f^k against grad_full in both blocks.
/// Per coordinate error |fd - g| / max(1, |fd|, |g|); returns the maximum.
double grad_check(const Problem& problem, std::size_t k, const Vector& x, const Vector& y,
                  double h = 1e-5);

/// Largest |mean_i grad_stoch(i) - grad_full| over sampled points and all
/// clients (finite-population unbiasedness).
double probe_unbiased(const Problem& problem, std::size_t n_points, std::uint64_t seed);

/// Analytic L_f and mu where the problem has them; sigma, delta_x, delta_y
/// (and L_f otherwise) as maxima over n_samples random points.
ConstantSet estimate_constants(const Problem& problem, std::size_t n_samples, std::uint64_t seed);

/// A random evaluation point: standard normal x, y projected onto the
/// feasible set.
SaddlePoint random_point(const Problem& problem, std::mt19937_64& rng, double scale = 1.0);

}  // namespace fedmm
