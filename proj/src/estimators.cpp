#include "fedmm/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fedmm {

Vector storm_update(const Vector& g_new, const Vector& g_old, const Vector& prev_est,
                    double momentum) {
  if (!(momentum > 0.0 && momentum <= 1.0)) {
    throw std::invalid_argument("storm_update: momentum must lie in (0, 1]");
  }
  require_same_size(g_new, g_old, "storm_update");
  require_same_size(g_new, prev_est, "storm_update");
  if (momentum == 1.0) return g_new;
  const double keep = 1.0 - momentum;
  Vector out(g_new.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = g_new[i] + keep * (prev_est[i] - g_old[i]);
  }
  return out;
}

std::string to_string(AdaptiveMode mode) {
  switch (mode) {
    case AdaptiveMode::Identity: return "identity";
    case AdaptiveMode::AdamStyle: return "adam";
    case AdaptiveMode::AdaBeliefStyle: return "adabelief";
  }
  return "unknown";
}

AdaptiveAccumulator::AdaptiveAccumulator(AdaptiveMode mode_, std::size_t dim_x,
                                         std::size_t dim_y, double rho_, double varrho_)
    : mode(mode_), rho(rho_), varrho(varrho_), a(dim_x), b(dim_y) {
  if (!(rho_ >= 0.0)) throw std::invalid_argument("AdaptiveAccumulator: rho must be >= 0");
  if (!(varrho_ >= 0.0 && varrho_ < 1.0)) {
    throw std::invalid_argument("AdaptiveAccumulator: varrho must lie in [0, 1)");
  }
}

namespace {

void accumulate(Vector& acc, const Vector& signal, double decay) {
  require_same_size(acc, signal, "accumulator update");
  for (std::size_t i = 0; i < acc.size(); ++i) {
    acc[i] = decay * acc[i] + (1.0 - decay) * signal[i] * signal[i];
  }
}

DiagMatrix from_accumulator(const Vector& acc, double rho) {
  Vector diag(acc.size());
  for (std::size_t i = 0; i < acc.size(); ++i) diag[i] = std::sqrt(acc[i]) + rho;
  return DiagMatrix(std::move(diag));
}

double resolve_decay(const AdaptiveAccumulator& acc, std::optional<double> varrho_t) {
  const double decay = varrho_t.value_or(acc.varrho);
  if (!(decay >= 0.0 && decay < 1.0)) {
    throw std::invalid_argument("adaptive matrix update: varrho must lie in [0, 1)");
  }
  return decay;
}

AdaptiveMatrices finish(const AdaptiveAccumulator& acc) {
  return AdaptiveMatrices{from_accumulator(acc.a, acc.rho), from_accumulator(acc.b, acc.rho)};
}

}  // namespace

AdaptiveMatrices adam_matrix_update(AdaptiveAccumulator& acc, const Vector& w_bar,
                                    const Vector& v_bar, std::optional<double> varrho_t) {
  const double decay = resolve_decay(acc, varrho_t);
  if (!acc.frozen) {
    accumulate(acc.a, w_bar, decay);
    accumulate(acc.b, v_bar, decay);
  }
  acc.last_sync_grads = std::make_pair(w_bar, v_bar);
  return finish(acc);
}

AdaptiveMatrices adabelief_matrix_update(AdaptiveAccumulator& acc, const Vector& w_bar,
                                         const Vector& v_bar, std::optional<double> varrho_t) {
  const double decay = resolve_decay(acc, varrho_t);
  if (!acc.frozen) {
    if (acc.last_sync_grads) {
      accumulate(acc.a, w_bar - acc.last_sync_grads->first, decay);
      accumulate(acc.b, v_bar - acc.last_sync_grads->second, decay);
    } else {
      accumulate(acc.a, w_bar, decay);
      accumulate(acc.b, v_bar, decay);
    }
  }
  acc.last_sync_grads = std::make_pair(w_bar, v_bar);
  return finish(acc);
}

AdaptiveMatrices generate_matrices(AdaptiveAccumulator& acc, const Vector& w_bar,
                                   const Vector& v_bar, std::optional<double> varrho_t) {
  switch (acc.mode) {
    case AdaptiveMode::Identity:
      acc.last_sync_grads = std::make_pair(w_bar, v_bar);
      return AdaptiveMatrices{DiagMatrix::identity(w_bar.size()),
                              DiagMatrix::identity(v_bar.size())};
    case AdaptiveMode::AdamStyle: return adam_matrix_update(acc, w_bar, v_bar, varrho_t);
    case AdaptiveMode::AdaBeliefStyle:
      return adabelief_matrix_update(acc, w_bar, v_bar, varrho_t);
  }
  throw std::logic_error("generate_matrices: unknown mode");
}

MomentumPair momentum_schedule(double c1, double c2, double eta_t) {
  const double e2 = eta_t * eta_t;
  return MomentumPair{std::min(1.0, c1 * e2), std::min(1.0, c2 * e2)};
}

}  // namespace fedmm
