#include <cmath>
#include <random>

#include "doctest.h"
#include "fedmm/problems.hpp"
#include "oracles.hpp"

using namespace fedmm;

namespace {

Vector random_vector(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Vector v(n);
  for (double& x : v) x = d(rng);
  return v;
}

// Max pairwise client disagreement of the full partial gradients.
std::pair<double, double> heterogeneity(const Problem& p, std::uint64_t seed, int points) {
  std::mt19937_64 rng(seed);
  double dx = 0, dy = 0;
  for (int n = 0; n < points; ++n) {
    const Vector x = random_vector(p.dim_x(), rng);
    const Vector y = random_vector(p.dim_y(), rng);
    for (std::size_t k = 0; k < p.num_clients(); ++k) {
      for (std::size_t j = 0; j < p.num_clients(); ++j) {
        const GradPair a = p.grad_full(k, x, y);
        const GradPair b = p.grad_full(j, x, y);
        dx = std::max(dx, std::sqrt(dist_sq(a.gx, b.gx)));
        dy = std::max(dy, std::sqrt(dist_sq(a.gy, b.gy)));
      }
    }
  }
  return {dx, dy};
}

// Every client is a copy of client 0 of the wrapped problem.
class IdenticalClients final : public Problem {
 public:
  IdenticalClients(ProblemPtr inner, std::size_t K) : inner_(std::move(inner)), K_(K) {}
  ProblemKind kind() const override { return inner_->kind(); }
  std::size_t num_clients() const override { return K_; }
  std::size_t dim_x() const override { return inner_->dim_x(); }
  std::size_t dim_y() const override { return inner_->dim_y(); }
  std::size_t num_items(std::size_t) const override { return inner_->num_items(0); }
  GradPair grad_stoch(std::size_t, const Vector& x, const Vector& y, SampleRef xi) const override {
    return inner_->grad_stoch(0, x, y, SampleRef{0, xi.item});
  }
  GradPair grad_full(std::size_t, const Vector& x, const Vector& y) const override {
    return inner_->grad_full(0, x, y);
  }
  double value(std::size_t, const Vector& x, const Vector& y) const override {
    return inner_->value(0, x, y);
  }
  ProblemConstants constants() const override { return inner_->constants(); }
  SaddlePoint initial_point() const override { return inner_->initial_point(); }
  std::string describe() const override { return "identical\n"; }

 private:
  ProblemPtr inner_;
  std::size_t K_;
};

}  // namespace

TEST_CASE("synthetic b_k sum to zero") {
  const auto p = make_synthetic({.K = 10, .dim = 20, .s = 1, .tau = 10, .seed = 42});
  Vector sum(20);
  for (const Vector& b : p->b()) sum += b;
  for (double v : sum) CHECK(std::abs(v) < 1e-12);
  for (double t : p->t()) CHECK((t >= 0.0 && t < 0.1));
  CHECK(p->dim_x() == 20);
  CHECK(p->dim_y() == 20);
}

TEST_CASE("synthetic heterogeneity grows with s in the y block") {
  const auto p1 = make_synthetic({.K = 10, .dim = 20, .s = 1, .tau = 10, .seed = 42});
  const auto p10 = make_synthetic({.K = 10, .dim = 20, .s = 10, .tau = 10, .seed = 42});
  const auto [dx1, dy1] = heterogeneity(*p1, 9, 5);
  const auto [dx10, dy10] = heterogeneity(*p10, 9, 5);
  CHECK(dy10 > dy1);
  // grad_x f^k = tau x - t_k y does not involve b_k, and t_k is drawn
  // identically for both s, so the x-block disagreement is unchanged.
  CHECK(dx10 == doctest::Approx(dx1).epsilon(1e-12));
  CHECK(dx1 > 0.0);
}

TEST_CASE("synthetic with one client has no heterogeneity") {
  const auto p = make_synthetic({.K = 1, .dim = 5, .s = 3, .tau = 10, .seed = 1});
  for (double v : p->b()[0]) CHECK(v == 0.0);
  const auto [dx, dy] = heterogeneity(*p, 2, 3);
  CHECK(dx == 0.0);
  CHECK(dy == 0.0);
}

TEST_CASE("synthetic saddle point is the origin, confirmed by an independent solve") {
  const auto p = make_synthetic({.K = 10, .dim = 4, .s = 1, .tau = 10, .seed = 42});
  const auto saddle = p->saddle_point();
  REQUIRE(saddle.has_value());
  for (double v : saddle->x) CHECK(v == 0.0);
  for (double v : saddle->y) CHECK(v == 0.0);

  // Stationary point of the averaged quadratic from finite differences of
  // the objective written out from its definition.
  const std::size_t d = 4;
  auto f = [&](const Vector& z) {
    Vector x(d), y(d);
    for (std::size_t i = 0; i < d; ++i) {
      x[i] = z[i];
      y[i] = z[d + i];
    }
    return oracle::synthetic_global(*p, x, y);
  };
  const auto z = oracle::quadratic_stationary(f, 2 * d);
  for (double v : z) CHECK(std::abs(v) < 1e-6);
}

TEST_CASE("synthetic saddle matches a grid brute force of the gradient norm") {
  const auto p = make_synthetic({.K = 3, .dim = 1, .s = 1, .tau = 10, .seed = 8, .center_b = false});
  double best = 1e300, bx = 0, by = 0;
  for (int i = -400; i <= 400; ++i) {
    for (int j = -400; j <= 400; ++j) {
      const Vector x{i * 0.005}, y{j * 0.005};
      auto fx = [&](const Vector& xv) { return oracle::synthetic_global(*p, xv, y); };
      auto fy = [&](const Vector& yv) { return oracle::synthetic_global(*p, x, yv); };
      const double g = std::hypot(oracle::fd_gradient(fx, x, 1e-4)[0], oracle::fd_gradient(fy, y, 1e-4)[0]);
      if (g < best) {
        best = g;
        bx = x[0];
        by = y[0];
      }
    }
  }
  const auto saddle = p->saddle_point();
  CHECK(std::abs(saddle->x[0] - bx) <= 0.005);
  CHECK(std::abs(saddle->y[0] - by) <= 0.005);
}

TEST_CASE("uncentered synthetic saddle solves the stationarity conditions") {
  const auto p = make_synthetic({.K = 6, .dim = 7, .s = 2, .tau = 10, .seed = 5, .center_b = false});
  const auto saddle = p->saddle_point();
  REQUIRE(saddle.has_value());
  const GradPair g = p->global_grad(saddle->x, saddle->y);
  CHECK(norm(g.gy) < 1e-10);
  CHECK(norm(g.gx) < 1e-10);
  CHECK(norm(p->mean_b()) > 0.1);
  const Vector expect_y = axpy(p->mean_b(), -p->mean_t(), saddle->x);
  CHECK(dist_sq(expect_y, saddle->y) < 1e-24);
}

TEST_CASE("saddle point is unavailable without a closed form") {
  CHECK_FALSE(make_auc({})->saddle_point().has_value());
  CHECK_FALSE(make_robust({})->saddle_point().has_value());
}

TEST_CASE("synthetic gradients follow the expanded objective") {
  const auto p = make_synthetic({.K = 4, .dim = 6, .s = 1, .tau = 10, .seed = 3});
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t k = trial % 4;
    const Vector x = random_vector(6, rng), y = random_vector(6, rng);
    const GradPair g = p->grad_full(k, x, y);
    for (std::size_t i = 0; i < 6; ++i) {
      CHECK(g.gx[i] == doctest::Approx(10 * x[i] - p->t()[k] * y[i]));
      CHECK(g.gy[i] == doctest::Approx(-y[i] + p->b()[k][i] - p->t()[k] * x[i]));
    }
    auto fx = [&](const Vector& v) { return oracle::synthetic_value(*p, k, v, y); };
    auto fy = [&](const Vector& v) { return oracle::synthetic_value(*p, k, x, v); };
    CHECK(oracle::rel_err(oracle::fd_gradient(fx, x, 1e-5), g.gx) < 1e-7);
    CHECK(oracle::rel_err(oracle::fd_gradient(fy, y, 1e-5), g.gy) < 1e-7);
    CHECK(p->value(k, x, y) == doctest::Approx(oracle::synthetic_value(*p, k, x, y)).epsilon(1e-12));
  }
}

TEST_CASE("synthetic global gradient vanishes at the saddle") {
  const auto p = make_synthetic({.K = 10, .dim = 20, .s = 1, .tau = 10, .seed = 42});
  const GradPair g = p->global_grad(Vector(20), Vector(20));
  CHECK(norm(g.gx) < 1e-12);
  CHECK(norm(g.gy) < 1e-12);
}

TEST_CASE("noise-free stochastic oracle equals the full gradient") {
  const auto p = make_synthetic({.K = 3, .dim = 5, .s = 1, .tau = 10, .seed = 1});
  std::mt19937_64 rng(2);
  const Vector x = random_vector(5, rng), y = random_vector(5, rng);
  for (std::size_t i = 0; i < p->num_items(1); ++i) {
    const GradPair s = p->grad_stoch(1, x, y, SampleRef{1, i});
    const GradPair f = p->grad_full(1, x, y);
    CHECK(s.gx == f.gx);
    CHECK(s.gy == f.gy);
  }
}

TEST_CASE("stochastic oracles are unbiased over each client's dataset") {
  std::vector<ProblemPtr> problems{
      make_synthetic({.K = 4, .dim = 5, .s = 1, .tau = 10, .seed = 1, .noise_sigma = 0.5}),
      make_auc({.K = 4, .dim = 6, .n_per_client = 50, .pos_ratio = 0.1, .seed = 2}),
      make_robust({.K = 4, .dim = 5, .n_per_client = 40, .seed = 3}),
  };
  std::mt19937_64 rng(7);
  for (const auto& p : problems) {
    for (int trial = 0; trial < 5; ++trial) {
      const Vector x = random_vector(p->dim_x(), rng);
      const Vector y = p->project_y(random_vector(p->dim_y(), rng));
      for (std::size_t k = 0; k < p->num_clients(); ++k) {
        Vector mx(p->dim_x()), my(p->dim_y());
        const std::size_t n = p->num_items(k);
        for (std::size_t i = 0; i < n; ++i) {
          const GradPair g = p->grad_stoch(k, x, y, SampleRef{k, i});
          mx += g.gx;
          my += g.gy;
        }
        mx *= 1.0 / n;
        my *= 1.0 / n;
        const GradPair full = p->grad_full(k, x, y);
        CHECK(std::sqrt(dist_sq(mx, full.gx)) < 1e-10);
        CHECK(std::sqrt(dist_sq(my, full.gy)) < 1e-10);
      }
    }
  }
}

TEST_CASE("out-of-range samples and clients are rejected") {
  const auto p = make_synthetic({.K = 2, .dim = 3});
  const Vector z(3);
  CHECK_THROWS_AS(p->grad_full(2, z, z), std::out_of_range);
  CHECK_THROWS_AS(p->grad_stoch(0, z, z, SampleRef{0, 100}), std::out_of_range);
  CHECK_THROWS_AS(p->grad_stoch(0, z, z, SampleRef{1, 0}), std::invalid_argument);
}

TEST_CASE("identical clients give the global gradient") {
  const auto inner = make_auc({.K = 3, .dim = 4, .n_per_client = 30, .pos_ratio = 0.2, .seed = 9});
  const IdenticalClients p(inner, 5);
  std::mt19937_64 rng(1);
  const Vector x = random_vector(p.dim_x(), rng), y = random_vector(1, rng);
  const GradPair global = p.global_grad(x, y);
  for (std::size_t k = 0; k < 5; ++k) {
    const GradPair g = p.grad_full(k, x, y);
    CHECK(std::sqrt(dist_sq(g.gx, global.gx)) < 1e-14);
    CHECK(std::sqrt(dist_sq(g.gy, global.gy)) < 1e-14);
  }
}

TEST_CASE("global gradient is the mean of client gradients") {
  const auto p = make_robust({.K = 5, .dim = 4, .n_per_client = 20, .seed = 6});
  std::mt19937_64 rng(3);
  const Vector x = random_vector(4, rng), y = p->project_y(random_vector(4, rng));
  Vector mx(4), my(4);
  for (std::size_t k = 0; k < 5; ++k) {
    const GradPair g = p->grad_full(k, x, y);
    mx += g.gx;
    my += g.gy;
  }
  mx *= 0.2;
  my *= 0.2;
  const GradPair g = p->global_grad(x, y);
  CHECK(std::sqrt(dist_sq(mx, g.gx)) < 1e-14);
  CHECK(std::sqrt(dist_sq(my, g.gy)) < 1e-14);
  auto F = [&](const Vector& v) { return p->global_value(v, y); };
  CHECK(oracle::rel_err(oracle::fd_gradient(F, x, 1e-6), g.gx) < 1e-6);
}

TEST_CASE("auc per-sample gradient at the origin has its closed form") {
  const auto p = make_auc({.K = 2, .dim = 5, .n_per_client = 40, .pos_ratio = 0.05, .seed = 4});
  const double pr = 0.05;
  const Vector x(7);
  const LabeledSet& data = p->client_data(0);
  for (std::size_t i = 0; i < data.labels.size(); ++i) {
    const Vector& z = data.features[i];
    const int label = data.labels[i];
    const GradPair g = p->item_grad(z, label, x, 0.0);
    // At w = 0, a = b = 0, alpha = 0 only the linear term in h survives.
    const double coef = label > 0 ? -2.0 * (1 - pr) : 2.0 * pr;
    for (std::size_t j = 0; j < 5; ++j) CHECK(g.gx[j] == doctest::Approx(coef * z[j]));
    CHECK(g.gx[5] == 0.0);
    CHECK(g.gx[6] == 0.0);
    CHECK(g.gy[0] == 0.0);

    auto fx = [&](const Vector& v) { return p->item_value(z, label, v, 0.0); };
    auto fa = [&](const Vector& a) { return p->item_value(z, label, x, a[0]); };
    CHECK(oracle::rel_err(oracle::fd_gradient(fx, x, 1e-6), g.gx) < 1e-5);
    CHECK(oracle::rel_err(oracle::fd_gradient(fa, Vector{0.0}, 1e-6), g.gy) < 1e-5);
  }
}

TEST_CASE("auc curvature constant") {
  CHECK(make_auc({.pos_ratio = 0.05})->constants().mu == doctest::Approx(0.095));
  CHECK(make_auc({.pos_ratio = 0.5})->constants().mu == doctest::Approx(0.5));
  CHECK_THROWS_AS(make_auc({.pos_ratio = 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(make_auc({.pos_ratio = 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(make_auc({.pos_ratio = -0.2}), std::invalid_argument);
}

TEST_CASE("auc inner maximum matches a one-dimensional brute force") {
  const auto p = make_auc({.K = 1, .dim = 3, .n_per_client = 30, .pos_ratio = 0.3, .seed = 2});
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const Vector x = random_vector(5, rng);
    const double closed = (*p->inner_argmax(x))[0];
    double best = -1e300, arg = 0;
    for (int i = -200000; i <= 200000; ++i) {
      const double a = closed + i * 1e-5;
      const double v = p->global_value(x, Vector{a});
      if (v > best) {
        best = v;
        arg = a;
      }
    }
    CHECK(std::abs(arg - closed) <= 1e-5);
  }
}

TEST_CASE("auc partition keeps each client to its own groups") {
  const auto p = make_auc({.K = 4, .dim = 6, .n_per_client = 50, .pos_ratio = 0.1, .seed = 3});
  std::size_t total = 0;
  for (std::size_t k = 0; k < 4; ++k) {
    const LabeledSet& d = p->client_data(k);
    total += d.labels.size();
    int pos = 0;
    for (int l : d.labels) pos += l > 0;
    CHECK(pos > 0);
    CHECK(pos < static_cast<int>(d.labels.size()));
  }
  CHECK(total == 200);
}

TEST_CASE("robust gradient at zero perturbation is the logistic gradient") {
  const auto p = make_robust({.K = 2, .dim = 4, .n_per_client = 30, .seed = 5, .l2 = 0.0});
  std::mt19937_64 rng(1);
  const Vector w = random_vector(4, rng);
  const Vector zero(4);
  const LabeledSet& d = p->client_data(1);
  auto loss = [&](const Vector& v) { return oracle::logistic_loss(d.features, d.labels, v, zero); };
  const GradPair g = p->grad_full(1, w, zero);
  CHECK(oracle::rel_err(oracle::fd_gradient(loss, w, 1e-6), g.gx) < 1e-6);
  CHECK(p->value(1, w, zero) == doctest::Approx(loss(w)).epsilon(1e-12));
}

TEST_CASE("robust perturbation gradient is checked by finite differences") {
  const auto p = make_robust({.K = 3, .dim = 5, .n_per_client = 25, .seed = 8});
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const Vector w = random_vector(5, rng);
    const Vector r = p->project_y(random_vector(5, rng, 0.3));
    const LabeledSet& d = p->client_data(trial % 3);
    auto loss = [&](const Vector& v) { return oracle::logistic_loss(d.features, d.labels, w, v); };
    const GradPair g = p->grad_full(trial % 3, w, r);
    CHECK(oracle::rel_err(oracle::fd_gradient(loss, r, 1e-6), g.gy) < 1e-5);
    // Direction of the perturbation gradient is w.
    CHECK(std::abs(std::abs(dot(g.gy, w)) - norm(g.gy) * norm(w)) < 1e-9 * (1 + norm(w)));
  }
}

TEST_CASE("project_y examples") {
  const YConstraint none{};
  const YConstraint ball{1.0};
  CHECK(project_y(none, Vector{3, 4}) == Vector{3, 4});
  const Vector out = project_y(ball, Vector{3, 4});
  CHECK(out[0] == doctest::Approx(0.6));
  CHECK(out[1] == doctest::Approx(0.8));
  CHECK(project_y(ball, Vector{0.3, 0.4}) == Vector{0.3, 0.4});
  const Vector on_sphere = project_y(ball, Vector{3, 4});
  CHECK(project_y(ball, on_sphere) == on_sphere);
  const auto robust = make_robust({.dim = 2});
  CHECK(norm(robust->project_y(Vector{30, -40})) == doctest::Approx(1.0));
}

TEST_CASE("strong concavity gives the PL inequality on sampled points") {
  std::vector<ProblemPtr> problems{make_synthetic({.K = 10, .dim = 20}),
                                   make_auc({.K = 5, .dim = 8, .n_per_client = 60, .pos_ratio = 0.05})};
  std::mt19937_64 rng(13);
  for (const auto& p : problems) {
    const double mu = p->constants().mu;
    for (int trial = 0; trial < 200; ++trial) {
      const Vector x = random_vector(p->dim_x(), rng);
      const Vector y = random_vector(p->dim_y(), rng, 3.0);
      const Vector ys = *p->inner_argmax(x);
      const double gap = p->global_value(x, ys) - p->global_value(x, y);
      CHECK(gap >= -1e-9);
      CHECK(norm_sq(p->global_grad(x, y).gy) >= 2 * mu * gap - 1e-9);
    }
  }
}

TEST_CASE("an exact ascent step from the inner maximizer does not move") {
  const auto p = make_synthetic({.K = 10, .dim = 20});
  std::mt19937_64 rng(3);
  const Vector x = random_vector(20, rng);
  const Vector ys = *p->inner_argmax(x);
  const Vector next = axpy(ys, 0.5, p->global_grad(x, ys).gy);
  CHECK(std::sqrt(dist_sq(next, ys)) < 1e-14);
}

TEST_CASE("describe records the generation parameters") {
  const auto p = make_synthetic({.K = 3, .dim = 4, .s = 2.5, .tau = 7, .seed = 99});
  const std::string d = p->describe();
  CHECK(d.find("problem=synthetic") != std::string::npos);
  CHECK(d.find("K=3") != std::string::npos);
  CHECK(d.find("s=2.5") != std::string::npos);
  CHECK(d.find("seed=99") != std::string::npos);
  CHECK(make_auc({})->describe().find("pos_ratio=0.05") != std::string::npos);
  CHECK(make_robust({})->describe().find("radius=1") != std::string::npos);
}

TEST_CASE("construction is reproducible from the seed") {
  const auto a = make_auc({.seed = 17});
  const auto b = make_auc({.seed = 17});
  CHECK(a->client_data(3).features == b->client_data(3).features);
  const auto r1 = make_robust({.seed = 4});
  const auto r2 = make_robust({.seed = 4});
  CHECK(r1->test_set().features == r2->test_set().features);
}

TEST_CASE("invalid problem options are rejected") {
  CHECK_THROWS_AS(make_synthetic({.K = 0}), std::invalid_argument);
  CHECK_THROWS_AS(make_synthetic({.s = 0}), std::invalid_argument);
  CHECK_THROWS_AS(make_synthetic({.tau = -1}), std::invalid_argument);
  CHECK_THROWS_AS(make_robust({.radius = 0}), std::invalid_argument);
}
