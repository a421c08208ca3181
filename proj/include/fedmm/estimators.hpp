#pragma once

#include <optional>
#include <string>
#include <utility>

#include "fedmm/core.hpp"

namespace fedmm {

/// Recursive momentum estimate g_new + (1 - momentum)(prev_est - g_old).
/// momentum == 1 returns g_new unchanged. Throws std::invalid_argument for
/// momentum outside (0, 1] or mismatched sizes.
Vector storm_update(const Vector& g_new, const Vector& g_old, const Vector& prev_est,
                    double momentum);

enum class AdaptiveMode { Identity, AdamStyle, AdaBeliefStyle };

std::string to_string(AdaptiveMode mode);

/// Server-side second-moment state behind the adaptive matrices A_t, B_t.
struct AdaptiveAccumulator {
  AdaptiveAccumulator(AdaptiveMode mode, std::size_t dim_x, std::size_t dim_y, double rho,
                      double varrho);

  AdaptiveMode mode;
  double rho;     // diagonal floor
  double varrho;  // decay of the moving average
  Vector a;       // x-side accumulator, coordinatewise >= 0
  Vector b;       // y-side accumulator, coordinatewise >= 0
  /// (w_bar, v_bar) at the previous generation; AdaBelief reference.
  std::optional<std::pair<Vector, Vector>> last_sync_grads;
  /// Keeps a and b at zero (diagnostic; with rho = 1 this yields identity
  /// matrices through the adaptive code path).
  bool frozen = false;
};

struct AdaptiveMatrices {
  DiagMatrix A;
  DiagMatrix B;
};

/// a <- varrho a + (1 - varrho) w_bar^2, A = diag(sqrt(a) + rho); same for b, B.
/// varrho_t overrides the accumulator's constant decay for this call.
AdaptiveMatrices adam_matrix_update(AdaptiveAccumulator& acc, const Vector& w_bar,
                                    const Vector& v_bar,
                                    std::optional<double> varrho_t = std::nullopt);

/// As adam_matrix_update, with the squared innovation (w_bar - w_bar_prev)^2.
/// The first call uses a zero reference. Stores (w_bar, v_bar) as the next
/// reference.
AdaptiveMatrices adabelief_matrix_update(AdaptiveAccumulator& acc, const Vector& w_bar,
                                         const Vector& v_bar,
                                         std::optional<double> varrho_t = std::nullopt);

/// Dispatches on acc.mode; Identity returns identity matrices.
AdaptiveMatrices generate_matrices(AdaptiveAccumulator& acc, const Vector& w_bar,
                                   const Vector& v_bar,
                                   std::optional<double> varrho_t = std::nullopt);

struct MomentumPair {
  double alpha = 1.0;  // y-side estimator weight
  double beta = 1.0;   // x-side estimator weight
};

/// (min(1, c1 eta^2), min(1, c2 eta^2)).
MomentumPair momentum_schedule(double c1, double c2, double eta_t);

}  // namespace fedmm
