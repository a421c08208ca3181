#pragma once

#include <cstdint>
#include <vector>

#include "fedmm/core.hpp"
#include "fedmm/estimators.hpp"
#include "fedmm/metrics.hpp"
#include "fedmm/problems.hpp"
#include "fedmm/state.hpp"

namespace fedmm {

/// n K^{1/3} / (m + t)^{1/3}.
double eta_schedule(double n, std::size_t K, double m, std::uint64_t t);

/// eta_t, alpha_{t+1} and beta_{t+1} after variant overrides are applied.
struct StepWeights {
  double eta = 1.0;
  MomentumPair momentum;
};

StepWeights step_weights(const HyperParams& hp, std::size_t K, std::uint64_t t);

struct Federation {
  std::vector<ClientState> clients;
  ServerState server;
  Counters counters;
};

/// Every client starts at the problem's (x_1, y_1) and averages q stochastic
/// gradients drawn without replacement; A_1, B_1 are generated from the
/// averaged estimates. Throws std::invalid_argument when q exceeds a
/// client's dataset.
Federation init_round(const Problem& problem, const HyperParams& hp);

/// Asynchronous step of one client: preconditioned interpolated ascent in y
/// and descent in x, then a STORM refresh of (w, v) on one fresh sample
/// evaluated at both the new and the previous iterate. Throws
/// std::logic_error at a sync index.
ClientState local_step(const Problem& problem, const HyperParams& hp, std::uint64_t t,
                       const ClientState& client, const AdaptiveMatrices& mats);

/// Averages all client state, regenerates the adaptive matrices, takes the
/// server step and broadcasts (x, y, w, v) to every client. Throws
/// std::logic_error at a non-sync index.
void sync_step(const Problem& problem, const HyperParams& hp, std::uint64_t t,
               Federation& fed);

/// Runs init_round then t = 1..T, syncing when t mod q == 0. Throws
/// std::runtime_error if an iterate becomes non-finite.
RunTrace run(const Problem& problem, const HyperParams& hp);

/// Local SGDA with heavy-ball buffers m <- beta_m m + g on both sides.
RunTrace baseline_momentum_local_sgda(const Problem& problem, const HyperParams& hp);

}  // namespace fedmm
