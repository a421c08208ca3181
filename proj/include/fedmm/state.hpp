#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>

#include "fedmm/core.hpp"
#include "fedmm/estimators.hpp"

namespace fedmm {

enum class Variant { FGDA, AdaFGDA_Adam, AdaFGDA_AdaBelief, LocalSGDA, MomentumLocalSGDA };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& name);
AdaptiveMode adaptive_mode(Variant v);

struct HyperParams {
  Variant variant = Variant::FGDA;
  double gamma = 0.1;    // x step size
  double lambda = 0.1;   // y step size
  double eta_n = 1.0;    // eta_t = n K^{1/3} / (m + t)^{1/3}
  double eta_m = 10.0;
  double c1 = 1.0;       // alpha_{t+1} = c1 eta_t^2 (y-side estimator)
  double c2 = 1.0;       // beta_{t+1} = c2 eta_t^2 (x-side estimator)
  std::uint64_t q = 20;  // sync period
  std::uint64_t T = 4000;
  double rho = 0.01;     // adaptive-matrix floor
  double rho_u = 1.0;    // declared upper bound on B_t (validator input)
  double varrho = 0.9;   // accumulator decay
  bool tie_varrho = false;  // use varrho_t = 1 - beta_{t+1}
  double beta_m = 0.9;   // heavy-ball weight, MomentumLocalSGDA only
  std::optional<double> eta_const;       // overrides the eta schedule
  std::optional<double> momentum_const;  // overrides alpha and beta
  bool zero_accumulators = false;
  std::uint64_t seed = 1;
  std::size_t workers = 1;
  /// Heavy metrics cadence: 0 means at sync steps (and the last step).
  std::uint64_t heavy_every = 0;

  /// Throws std::invalid_argument naming the first violated range.
  void validate() const;
};

/// One client's local iterate, estimators and private random stream.
struct ClientState {
  std::size_t index = 0;
  Vector x, y;    // iterates
  Vector w, v;    // x-side and y-side gradient estimators
  Vector mw, mv;  // heavy-ball buffers (MomentumLocalSGDA)
  std::mt19937_64 rng;
};

struct ServerState {
  Vector x_bar, y_bar;
  Vector w_bar, v_bar;
  Vector mw_bar, mv_bar;
  AdaptiveAccumulator acc;
  AdaptiveMatrices mats;
};

}  // namespace fedmm
