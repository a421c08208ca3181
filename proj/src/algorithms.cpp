#include "fedmm/algorithms.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace fedmm {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::FGDA: return "fgda";
    case Variant::AdaFGDA_Adam: return "adafgda-adam";
    case Variant::AdaFGDA_AdaBelief: return "adafgda-adabelief";
    case Variant::LocalSGDA: return "local-sgda";
    case Variant::MomentumLocalSGDA: return "momentum-local-sgda";
  }
  return "unknown";
}

Variant variant_from_string(const std::string& name) {
  for (Variant v : {Variant::FGDA, Variant::AdaFGDA_Adam, Variant::AdaFGDA_AdaBelief,
                    Variant::LocalSGDA, Variant::MomentumLocalSGDA}) {
    if (to_string(v) == name) return v;
  }
  if (name == "adafgda") return Variant::AdaFGDA_Adam;
  throw std::invalid_argument("unknown variant '" + name + "'");
}

AdaptiveMode adaptive_mode(Variant v) {
  switch (v) {
    case Variant::AdaFGDA_Adam: return AdaptiveMode::AdamStyle;
    case Variant::AdaFGDA_AdaBelief: return AdaptiveMode::AdaBeliefStyle;
    default: return AdaptiveMode::Identity;
  }
}

void HyperParams::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("hyperparameter " + what); };
  if (!(gamma > 0.0)) fail("gamma must be > 0");
  if (!(lambda > 0.0)) fail("lambda must be > 0");
  if (!(eta_n > 0.0)) fail("n must be > 0");
  if (!(eta_m >= 2.0)) fail("m must be >= 2");
  if (!(c1 > 0.0)) fail("c1 must be > 0");
  if (!(c2 > 0.0)) fail("c2 must be > 0");
  if (q < 1) fail("q must be >= 1");
  if (T < 1) fail("T must be >= 1");
  if (!(rho > 0.0 && rho <= 1.0)) fail("rho must lie in (0, 1]");
  if (!(rho_u > 0.0)) fail("rho_u must be > 0");
  if (!(varrho > 0.0 && varrho < 1.0)) fail("varrho must lie in (0, 1)");
  if (!(beta_m >= 0.0 && beta_m < 1.0)) fail("beta_m must lie in [0, 1)");
  if (eta_const && !(*eta_const > 0.0)) fail("eta_const must be > 0");
  if (momentum_const && !(*momentum_const > 0.0 && *momentum_const <= 1.0)) {
    fail("momentum_const must lie in (0, 1]");
  }
  if (workers < 1) fail("workers must be >= 1");
}

double eta_schedule(double n, std::size_t K, double m, std::uint64_t t) {
  return n * std::cbrt(static_cast<double>(K)) / std::cbrt(m + static_cast<double>(t));
}

StepWeights step_weights(const HyperParams& hp, std::size_t K, std::uint64_t t) {
  if (hp.variant == Variant::LocalSGDA || hp.variant == Variant::MomentumLocalSGDA) {
    return StepWeights{1.0, MomentumPair{1.0, 1.0}};
  }
  StepWeights sw;
  sw.eta = hp.eta_const.value_or(eta_schedule(hp.eta_n, K, hp.eta_m, t));
  sw.momentum = hp.momentum_const ? MomentumPair{*hp.momentum_const, *hp.momentum_const}
                                  : momentum_schedule(hp.c1, hp.c2, sw.eta);
  return sw;
}

namespace {

std::optional<double> varrho_for(const HyperParams& hp, const StepWeights& sw) {
  if (!hp.tie_varrho) return std::nullopt;
  return 1.0 - sw.momentum.beta;
}

std::mt19937_64 client_stream(std::uint64_t seed, std::size_t k) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(k), 0x5eedU};
  return std::mt19937_64(seq);
}

bool uses_heavy_ball(const HyperParams& hp) { return hp.variant == Variant::MomentumLocalSGDA; }

// Heavy-ball direction m <- beta_m m + g; the estimator itself otherwise.
const Vector& direction(const HyperParams& hp, Vector& buffer, const Vector& estimate) {
  if (!uses_heavy_ball(hp)) return estimate;
  if (hp.beta_m == 0.0) {
    buffer = estimate;
  } else {
    buffer = axpy(estimate, hp.beta_m, buffer);
  }
  return buffer;
}

void require_finite(const Vector& v, std::uint64_t t, const char* what) {
  if (!v.all_finite()) {
    throw std::runtime_error(std::string("non-finite ") + what + " at step " + std::to_string(t));
  }
}

}  // namespace

Federation init_round(const Problem& problem, const HyperParams& hp) {
  hp.validate();
  const std::size_t K = problem.num_clients();
  const SaddlePoint start = problem.initial_point();

  Federation fed{
      .clients = {},
      .server = ServerState{
          .x_bar = start.x,
          .y_bar = start.y,
          .w_bar = {},
          .v_bar = {},
          .mw_bar = Vector(problem.dim_x()),
          .mv_bar = Vector(problem.dim_y()),
          .acc = AdaptiveAccumulator(adaptive_mode(hp.variant), problem.dim_x(),
                                     problem.dim_y(), hp.rho, hp.varrho),
          .mats = {DiagMatrix::identity(problem.dim_x()), DiagMatrix::identity(problem.dim_y())},
      },
      .counters = {},
  };
  fed.server.acc.frozen = hp.zero_accumulators;

  for (std::size_t k = 0; k < K; ++k) {
    ClientState c;
    c.index = k;
    c.x = start.x;
    c.y = start.y;
    c.mw = Vector(problem.dim_x());
    c.mv = Vector(problem.dim_y());
    c.rng = client_stream(hp.seed, k);

    const std::size_t n = problem.num_items(k);
    if (hp.q > n) {
      throw std::invalid_argument("init_round: q = " + std::to_string(hp.q) +
                                  " exceeds client " + std::to_string(k) + "'s " +
                                  std::to_string(n) + " items");
    }
    // Partial Fisher-Yates: the first q entries are a uniform draw without
    // replacement.
    std::vector<std::size_t> items(n);
    std::iota(items.begin(), items.end(), std::size_t{0});
    for (std::size_t j = 0; j < hp.q; ++j) {
      std::uniform_int_distribution<std::size_t> pick(j, n - 1);
      std::swap(items[j], items[pick(c.rng)]);
    }
    Vector w(problem.dim_x());
    Vector v(problem.dim_y());
    for (std::size_t j = 0; j < hp.q; ++j) {
      const GradPair g = problem.grad_stoch(k, c.x, c.y, SampleRef{k, items[j]});
      w += g.gx;
      v += g.gy;
    }
    const double inv_q = 1.0 / static_cast<double>(hp.q);
    w *= inv_q;
    v *= inv_q;
    c.w = std::move(w);
    c.v = std::move(v);
    fed.clients.push_back(std::move(c));
  }
  fed.counters.sfo_per_client += 2 * hp.q;

  std::vector<Vector> ws, vs;
  for (const ClientState& c : fed.clients) {
    ws.push_back(c.w);
    vs.push_back(c.v);
  }
  fed.server.w_bar = vec_mean(ws);
  fed.server.v_bar = vec_mean(vs);
  fed.server.mats = generate_matrices(fed.server.acc, fed.server.w_bar, fed.server.v_bar,
                                      varrho_for(hp, step_weights(hp, K, 0)));
  return fed;
}

ClientState local_step(const Problem& problem, const HyperParams& hp, std::uint64_t t,
                       const ClientState& client, const AdaptiveMatrices& mats) {
  if (t % hp.q == 0) {
    throw std::logic_error("local_step called at sync index " + std::to_string(t));
  }
  const StepWeights sw = step_weights(hp, problem.num_clients(), t);
  ClientState next = client;

  const Vector& dir_y = direction(hp, next.mv, client.v);
  const Vector y_hat = axpy(client.y, hp.lambda, precondition(mats.B, dir_y));
  next.y = problem.project_y(axpy(client.y, sw.eta, y_hat - client.y));

  const Vector& dir_x = direction(hp, next.mw, client.w);
  const Vector x_hat = axpy(client.x, -hp.gamma, precondition(mats.A, dir_x));
  next.x = axpy(client.x, sw.eta, x_hat - client.x);

  const std::size_t n = problem.num_items(client.index);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  const SampleRef xi{client.index, pick(next.rng)};
  const GradPair g_new = problem.grad_stoch(client.index, next.x, next.y, xi);
  const GradPair g_old = problem.grad_stoch(client.index, client.x, client.y, xi);
  next.v = storm_update(g_new.gy, g_old.gy, client.v, sw.momentum.alpha);
  next.w = storm_update(g_new.gx, g_old.gx, client.w, sw.momentum.beta);
  return next;
}

void sync_step(const Problem& problem, const HyperParams& hp, std::uint64_t t,
               Federation& fed) {
  if (t % hp.q != 0) {
    throw std::logic_error("sync_step called at non-sync index " + std::to_string(t));
  }
  const StepWeights sw = step_weights(hp, problem.num_clients(), t);
  ServerState& s = fed.server;

  std::vector<Vector> xs, ys, ws, vs, mws, mvs;
  for (const ClientState& c : fed.clients) {
    xs.push_back(c.x);
    ys.push_back(c.y);
    ws.push_back(c.w);
    vs.push_back(c.v);
    mws.push_back(c.mw);
    mvs.push_back(c.mv);
  }
  s.v_bar = vec_mean(vs);
  s.w_bar = vec_mean(ws);
  s.y_bar = vec_mean(ys);
  s.x_bar = vec_mean(xs);
  s.mw_bar = vec_mean(mws);
  s.mv_bar = vec_mean(mvs);

  s.mats = generate_matrices(s.acc, s.w_bar, s.v_bar, varrho_for(hp, sw));

  const Vector& dir_y = direction(hp, s.mv_bar, s.v_bar);
  const Vector y_hat = axpy(s.y_bar, hp.lambda, precondition(s.mats.B, dir_y));
  const Vector y_next = problem.project_y(axpy(s.y_bar, sw.eta, y_hat - s.y_bar));

  const Vector& dir_x = direction(hp, s.mw_bar, s.w_bar);
  const Vector x_hat = axpy(s.x_bar, -hp.gamma, precondition(s.mats.A, dir_x));
  const Vector x_next = axpy(s.x_bar, sw.eta, x_hat - s.x_bar);

  s.x_bar = x_next;
  s.y_bar = y_next;
  for (ClientState& c : fed.clients) {
    c.x = x_next;
    c.y = y_next;
    c.w = s.w_bar;
    c.v = s.v_bar;
    c.mw = s.mw_bar;
    c.mv = s.mv_bar;
  }
  fed.counters.comm_rounds += 1;
}

namespace {

void parallel_local_steps(const Problem& problem, const HyperParams& hp, std::uint64_t t,
                          Federation& fed) {
  auto& clients = fed.clients;
  const AdaptiveMatrices& mats = fed.server.mats;
  const std::size_t workers = std::min(hp.workers, clients.size());
  auto work = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t k = lo; k < hi; ++k) clients[k] = local_step(problem, hp, t, clients[k], mats);
  };
  if (workers <= 1) {
    work(0, clients.size());
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < workers; ++i) {
      const std::size_t lo = i * clients.size() / workers;
      const std::size_t hi = (i + 1) * clients.size() / workers;
      pool.emplace_back([&, i, lo, hi] {
        try {
          work(lo, hi);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

bool heavy_at(const HyperParams& hp, std::uint64_t t) {
  if (t == hp.T) return true;
  if (hp.heavy_every == 0) return t % hp.q == 0;
  return t % hp.heavy_every == 0;
}

}  // namespace

RunTrace run(const Problem& problem, const HyperParams& hp) {
  const auto started = std::chrono::steady_clock::now();
  Federation fed = init_round(problem, hp);
  const std::optional<SaddlePoint> saddle = problem.saddle_point();

  RunTrace trace;
  trace.config = hp;
  trace.problem_descriptor = problem.describe();
  trace.records.reserve(hp.T);
  trace.initial = record_step(problem, 0, false, fed.clients, fed.counters, true, saddle);
  trace.grad_norm_approximate = !problem.grad_F(fed.server.x_bar).has_value();

  std::mt19937_64 output_rng(hp.seed ^ 0xa5a5a5a5a5a5a5a5ULL);
  trace.final_sampled_index = std::uniform_int_distribution<std::uint64_t>(1, hp.T)(output_rng);

  for (std::uint64_t t = 1; t <= hp.T; ++t) {
    if (t == trace.final_sampled_index) {
      std::vector<Vector> xs, ys;
      for (const ClientState& c : fed.clients) {
        xs.push_back(c.x);
        ys.push_back(c.y);
      }
      trace.sampled_iterate = {vec_mean(xs), vec_mean(ys)};
    }
    const bool is_sync = t % hp.q == 0;
    if (is_sync) {
      sync_step(problem, hp, t, fed);
    } else {
      parallel_local_steps(problem, hp, t, fed);
      fed.counters.sfo_per_client += 2;
      fed.counters.local_steps += 1;
    }
    for (const ClientState& c : fed.clients) {
      require_finite(c.x, t, "x");
      require_finite(c.y, t, "y");
      require_finite(c.w, t, "w");
      require_finite(c.v, t, "v");
    }
    trace.records.push_back(
        record_step(problem, t, is_sync, fed.clients, fed.counters, heavy_at(hp, t), saddle));
  }

  std::vector<Vector> xs, ys;
  for (const ClientState& c : fed.clients) {
    xs.push_back(c.x);
    ys.push_back(c.y);
  }
  trace.final_iterate = {vec_mean(xs), vec_mean(ys)};
  trace.counters = fed.counters;
  trace.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return trace;
}

RunTrace baseline_momentum_local_sgda(const Problem& problem, const HyperParams& hp) {
  HyperParams baseline = hp;
  baseline.variant = Variant::MomentumLocalSGDA;
  return run(problem, baseline);
}

}  // namespace fedmm
