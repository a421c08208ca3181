#include "fedmm/problems.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

#include "fedmm/text.hpp"

namespace fedmm {

std::string to_string(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::Synthetic: return "synthetic";
    case ProblemKind::Auc: return "auc";
    case ProblemKind::Robust: return "robust";
  }
  return "unknown";
}

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::Analytic: return "analytic";
    case Provenance::Estimated: return "estimated";
    case Provenance::Unavailable: return "unavailable";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Problem helpers

void Problem::check_client(std::size_t k) const {
  if (k >= num_clients()) {
    throw std::out_of_range("client index " + std::to_string(k) + " out of range [0, " +
                            std::to_string(num_clients()) + ")");
  }
}

void Problem::check_sample(std::size_t k, SampleRef xi) const {
  check_client(k);
  if (xi.client != k) {
    throw std::invalid_argument("sample belongs to client " + std::to_string(xi.client) +
                                ", not " + std::to_string(k));
  }
  if (xi.item >= num_items(k)) {
    throw std::out_of_range("item index " + std::to_string(xi.item) +
                            " out of range for client " + std::to_string(k));
  }
}

GradPair Problem::global_grad(const Vector& x, const Vector& y) const {
  GradPair acc{Vector(dim_x()), Vector(dim_y())};
  for (std::size_t k = 0; k < num_clients(); ++k) {
    const GradPair g = grad_full(k, x, y);
    acc.gx += g.gx;
    acc.gy += g.gy;
  }
  const double inv = 1.0 / static_cast<double>(num_clients());
  acc.gx *= inv;
  acc.gy *= inv;
  return acc;
}

double Problem::global_value(const Vector& x, const Vector& y) const {
  double acc = 0.0;
  for (std::size_t k = 0; k < num_clients(); ++k) acc += value(k, x, y);
  return acc / static_cast<double>(num_clients());
}

Vector Problem::project_y(const Vector& y) const { return fedmm::project_y(y_constraint(), y); }

Vector project_y(const YConstraint& constraint, const Vector& y) {
  if (!constraint.ball_radius) return y;
  const double r = *constraint.ball_radius;
  const double n = norm(y);
  if (n <= r) return y;
  return (r / n) * y;
}

namespace {

Vector normal_vector(std::size_t n, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Vector v(n);
  for (double& c : v) c = stddev * dist(rng);
  return v;
}

// Numerically stable log(1 + exp(z)).
double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

template <typename ItemGrad>
GradPair average_items(std::size_t n, std::size_t dx, std::size_t dy, ItemGrad&& item) {
  GradPair acc{Vector(dx), Vector(dy)};
  for (std::size_t i = 0; i < n; ++i) {
    const GradPair g = item(i);
    acc.gx += g.gx;
    acc.gy += g.gy;
  }
  const double inv = 1.0 / static_cast<double>(n);
  acc.gx *= inv;
  acc.gy *= inv;
  return acc;
}

}  // namespace

// ---------------------------------------------------------------------------
// Synthetic

SyntheticProblem::SyntheticProblem(const SyntheticOptions& options) : options_(options) {
  if (options.K < 1) throw std::invalid_argument("synthetic: K must be >= 1");
  if (options.dim < 1) throw std::invalid_argument("synthetic: dim must be >= 1");
  if (!(options.s > 0.0)) throw std::invalid_argument("synthetic: s must be > 0");
  if (!(options.tau > 0.0)) throw std::invalid_argument("synthetic: tau must be > 0");
  if (options.noise_sigma < 0.0) throw std::invalid_argument("synthetic: noise_sigma must be >= 0");
  if (options.n_items < 1) throw std::invalid_argument("synthetic: n_items must be >= 1");

  const std::size_t K = options.K;
  const std::size_t d = options.dim;
  std::mt19937_64 rng(options.seed);

  // Draw order is fixed: b', t, initial point, noise. Changing s or the
  // noise level therefore leaves the other draws untouched.
  std::vector<Vector> b_raw;
  b_raw.reserve(K);
  for (std::size_t k = 0; k < K; ++k) b_raw.push_back(normal_vector(d, options.s, rng));

  std::uniform_real_distribution<double> unif(0.0, 0.1);
  t_.resize(K);
  for (double& t : t_) t = unif(rng);

  initial_.x = normal_vector(d, 1.0, rng);
  initial_.y = normal_vector(d, 1.0, rng);

  if (options.center_b) {
    const Vector mean_raw = vec_mean(b_raw);
    for (const Vector& b : b_raw) b_.push_back(b - mean_raw);
  } else {
    b_ = b_raw;
  }
  mean_b_ = vec_mean(b_);
  if (options.center_b) mean_b_ = Vector(d, 0.0);

  double sum_t = 0.0;
  for (double t : t_) sum_t += t;
  mean_t_ = sum_t / static_cast<double>(K);

  noise_.resize(K);
  for (std::size_t k = 0; k < K; ++k) {
    auto& table = noise_[k];
    table.reserve(options.n_items);
    for (std::size_t i = 0; i < options.n_items; ++i) {
      if (options.noise_sigma > 0.0) {
        Vector nx = normal_vector(d, options.noise_sigma, rng);
        Vector ny = normal_vector(d, options.noise_sigma, rng);
        table.push_back({std::move(nx), std::move(ny)});
      } else {
        table.push_back({Vector(d), Vector(d)});
      }
    }
    // Center so the finite-population mean of the noise vanishes.
    if (options.noise_sigma > 0.0) {
      Vector mx(d), my(d);
      for (const auto& g : table) {
        mx += g.gx;
        my += g.gy;
      }
      mx *= 1.0 / static_cast<double>(table.size());
      my *= 1.0 / static_cast<double>(table.size());
      for (auto& g : table) {
        g.gx -= mx;
        g.gy -= my;
      }
    }
  }
}

std::size_t SyntheticProblem::num_items(std::size_t k) const {
  check_client(k);
  return options_.n_items;
}

GradPair SyntheticProblem::grad_full(std::size_t k, const Vector& x, const Vector& y) const {
  check_client(k);
  require_same_size(x, initial_.x, "synthetic grad x");
  require_same_size(y, initial_.y, "synthetic grad y");
  const double tk = t_[k];
  const std::size_t d = options_.dim;
  GradPair g{Vector(d), Vector(d)};
  for (std::size_t i = 0; i < d; ++i) {
    g.gx[i] = options_.tau * x[i] - tk * y[i];
    g.gy[i] = -y[i] + b_[k][i] - tk * x[i];
  }
  return g;
}

GradPair SyntheticProblem::grad_stoch(std::size_t k, const Vector& x, const Vector& y,
                                      SampleRef xi) const {
  check_sample(k, xi);
  GradPair g = grad_full(k, x, y);
  if (options_.noise_sigma > 0.0) {
    const GradPair& n = noise_[k][xi.item];
    g.gx += n.gx;
    g.gy += n.gy;
  }
  return g;
}

double SyntheticProblem::value(std::size_t k, const Vector& x, const Vector& y) const {
  check_client(k);
  return 0.5 * options_.tau * norm_sq(x) -
         (0.5 * norm_sq(y) - dot(b_[k], y) + t_[k] * dot(y, x));
}

ProblemConstants SyntheticProblem::constants() const {
  const double t_max = *std::max_element(t_.begin(), t_.end());
  return ProblemConstants{
      .L_f = std::max({options_.tau, 1.0, t_max}),
      .L_f_provenance = Provenance::Analytic,
      .mu = 1.0,
      .mu_provenance = Provenance::Analytic,
  };
}

std::optional<Vector> SyntheticProblem::inner_argmax(const Vector& x) const {
  // grad_y f = -y + mean(b) - mean(t) x = 0
  return axpy(mean_b_, -mean_t_, x);
}

std::optional<SaddlePoint> SyntheticProblem::saddle_point() const {
  // grad F(x) = (tau + mean_t^2) x - mean_t mean_b = 0
  const Vector x = (mean_t_ / (options_.tau + mean_t_ * mean_t_)) * mean_b_;
  Vector y = axpy(mean_b_, -mean_t_, x);
  return SaddlePoint{x, std::move(y)};
}

std::optional<Vector> SyntheticProblem::grad_F(const Vector& x) const {
  const double curvature = options_.tau + mean_t_ * mean_t_;
  return axpy(curvature * x, -mean_t_, mean_b_);
}

std::string SyntheticProblem::describe() const {
  std::ostringstream out;
  out << "problem=synthetic\n"
      << "K=" << options_.K << '\n'
      << "dim=" << options_.dim << '\n'
      << "s=" << format_double(options_.s) << '\n'
      << "tau=" << format_double(options_.tau) << '\n'
      << "seed=" << options_.seed << '\n'
      << "noise_sigma=" << format_double(options_.noise_sigma) << '\n'
      << "n_items=" << options_.n_items << '\n'
      << "center_b=" << (options_.center_b ? "true" : "false") << '\n';
  return out.str();
}

std::shared_ptr<const SyntheticProblem> make_synthetic(const SyntheticOptions& options) {
  return std::make_shared<const SyntheticProblem>(options);
}

// ---------------------------------------------------------------------------
// AUC

AucProblem::AucProblem(const AucOptions& options) : options_(options) {
  if (!(options.pos_ratio > 0.0 && options.pos_ratio < 1.0)) {
    throw std::invalid_argument("auc: pos_ratio must lie in (0, 1)");
  }
  if (options.K < 1 || options.dim < 1 || options.n_per_client < 1) {
    throw std::invalid_argument("auc: K, dim and n_per_client must be >= 1");
  }
  if (options.n_test < 2) throw std::invalid_argument("auc: n_test must be >= 2");

  const std::size_t K = options.K;
  const std::size_t d = options.dim;
  std::mt19937_64 rng(options.seed);

  Vector direction = normal_vector(d, 1.0, rng);
  direction *= 1.0 / norm(direction);

  // Cluster g < K is positive, g >= K negative. Offsets are orthogonal to the
  // hidden direction so every cluster sits at +/- margin from the boundary.
  std::vector<Vector> centers;
  for (std::size_t g = 0; g < 2 * K; ++g) {
    Vector offset = normal_vector(d, options.spread / std::sqrt(static_cast<double>(d)), rng);
    offset = axpy(offset, -dot(offset, direction), direction);
    const double side = g < K ? 1.0 : -1.0;
    centers.push_back(axpy(offset, side * options.margin, direction));
  }

  auto draw = [&](std::size_t group) {
    return centers[group] +
           normal_vector(d, options.cluster_noise / std::sqrt(static_cast<double>(d)), rng);
  };
  auto n_positive = [&](std::size_t n) {
    const auto pos = static_cast<std::size_t>(std::llround(options.pos_ratio * static_cast<double>(n)));
    return std::clamp<std::size_t>(pos, 1, n - 1);
  };

  const std::size_t n_total = K * options.n_per_client;
  if (n_total < 2) throw std::invalid_argument("auc: need at least two training items");
  const std::size_t n_pos = n_positive(n_total);
  std::vector<Vector> features;
  std::vector<int> labels;
  std::vector<int> groups;
  for (std::size_t i = 0; i < n_total; ++i) {
    const bool positive = i < n_pos;
    const std::size_t j = positive ? i : i - n_pos;
    const std::size_t group = positive ? j % K : K + j % K;
    features.push_back(draw(group));
    labels.push_back(positive ? 1 : -1);
    groups.push_back(static_cast<int>(group));
  }

  plan_ = partition(n_total, groups, K, options.scheme, options.seed ^ 0x9e3779b97f4a7c15ULL,
                    options.dirichlet_beta);
  clients_.resize(K);
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t item : plan_.assignment[k]) {
      clients_[k].features.push_back(features[item]);
      clients_[k].labels.push_back(labels[item]);
    }
  }

  const std::size_t test_pos = n_positive(options.n_test);
  std::uniform_int_distribution<std::size_t> pick(0, K - 1);
  for (std::size_t i = 0; i < options.n_test; ++i) {
    const bool positive = i < test_pos;
    const std::size_t group = positive ? pick(rng) : K + pick(rng);
    test_.features.push_back(draw(group));
    test_.labels.push_back(positive ? 1 : -1);
  }

  // Frobenius norm of the per-item Hessian in (w, a, b, alpha) bounds every
  // blockwise Lipschitz constant of the partial gradients.
  const double p = options.pos_ratio;
  for (std::size_t i = 0; i < n_total; ++i) {
    const double z2 = norm_sq(features[i]);
    const double frob_sq =
        labels[i] > 0
            ? 4.0 * (1 - p) * (1 - p) * (z2 * z2 + 4.0 * z2 + 1.0) + 4.0 * p * p * (1 - p) * (1 - p)
            : 4.0 * p * p * (z2 * z2 + 4.0 * z2 + 1.0) + 4.0 * p * p * (1 - p) * (1 - p);
    feature_bound_sq_ = std::max(feature_bound_sq_, frob_sq);
  }
}

std::size_t AucProblem::num_items(std::size_t k) const {
  check_client(k);
  return clients_[k].labels.size();
}

Vector AucProblem::scorer(const Vector& x) const {
  if (x.size() != dim_x()) throw std::invalid_argument("auc: x has wrong dimension");
  return Vector(std::vector<double>(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(options_.dim)));
}

double AucProblem::item_value(const Vector& z, int label, const Vector& x, double alpha) const {
  const std::size_t d = options_.dim;
  const double p = options_.pos_ratio;
  double h = 0.0;
  for (std::size_t i = 0; i < d; ++i) h += x[i] * z[i];
  const double a = x[d];
  const double b = x[d + 1];
  const double reg = -p * (1 - p) * alpha * alpha;
  if (label > 0) return (1 - p) * (h - a) * (h - a) - 2.0 * (1 + alpha) * (1 - p) * h + reg;
  return p * (h - b) * (h - b) + 2.0 * (1 + alpha) * p * h + reg;
}

GradPair AucProblem::item_grad(const Vector& z, int label, const Vector& x, double alpha) const {
  const std::size_t d = options_.dim;
  const double p = options_.pos_ratio;
  double h = 0.0;
  for (std::size_t i = 0; i < d; ++i) h += x[i] * z[i];
  const double a = x[d];
  const double b = x[d + 1];
  GradPair g{Vector(d + 2), Vector(1)};
  double dh = 0.0;
  if (label > 0) {
    dh = 2.0 * (1 - p) * (h - a) - 2.0 * (1 + alpha) * (1 - p);
    g.gx[d] = -2.0 * (1 - p) * (h - a);
    g.gy[0] = -2.0 * (1 - p) * h - 2.0 * p * (1 - p) * alpha;
  } else {
    dh = 2.0 * p * (h - b) + 2.0 * (1 + alpha) * p;
    g.gx[d + 1] = -2.0 * p * (h - b);
    g.gy[0] = 2.0 * p * h - 2.0 * p * (1 - p) * alpha;
  }
  for (std::size_t i = 0; i < d; ++i) g.gx[i] = dh * z[i];
  return g;
}

GradPair AucProblem::grad_stoch(std::size_t k, const Vector& x, const Vector& y,
                                SampleRef xi) const {
  check_sample(k, xi);
  if (x.size() != dim_x() || y.size() != 1) throw std::invalid_argument("auc: bad dimensions");
  const LabeledSet& data = clients_[k];
  return item_grad(data.features[xi.item], data.labels[xi.item], x, y[0]);
}

GradPair AucProblem::grad_full(std::size_t k, const Vector& x, const Vector& y) const {
  check_client(k);
  if (x.size() != dim_x() || y.size() != 1) throw std::invalid_argument("auc: bad dimensions");
  const LabeledSet& data = clients_[k];
  return average_items(data.labels.size(), dim_x(), 1, [&](std::size_t i) {
    return item_grad(data.features[i], data.labels[i], x, y[0]);
  });
}

double AucProblem::value(std::size_t k, const Vector& x, const Vector& y) const {
  check_client(k);
  const LabeledSet& data = clients_[k];
  double acc = 0.0;
  for (std::size_t i = 0; i < data.labels.size(); ++i) {
    acc += item_value(data.features[i], data.labels[i], x, y[0]);
  }
  return acc / static_cast<double>(data.labels.size());
}

ProblemConstants AucProblem::constants() const {
  const double p = options_.pos_ratio;
  return ProblemConstants{
      .L_f = std::sqrt(feature_bound_sq_),
      .L_f_provenance = Provenance::Analytic,
      .mu = 2.0 * p * (1 - p),
      .mu_provenance = Provenance::Analytic,
  };
}

std::optional<Vector> AucProblem::inner_argmax(const Vector& x) const {
  // f is -p(1-p) alpha^2 + c(x) alpha + const, with c(x) = d/dalpha f at 0.
  const double p = options_.pos_ratio;
  const double slope = global_grad(x, Vector{0.0}).gy[0];
  return Vector{slope / (2.0 * p * (1 - p))};
}

std::optional<Vector> AucProblem::grad_F(const Vector& x) const {
  return global_grad(x, *inner_argmax(x)).gx;
}

SaddlePoint AucProblem::initial_point() const { return {Vector(dim_x()), Vector(1)}; }

std::string AucProblem::describe() const {
  std::ostringstream out;
  out << "problem=auc\n"
      << "K=" << options_.K << '\n'
      << "dim=" << options_.dim << '\n'
      << "n_per_client=" << options_.n_per_client << '\n'
      << "pos_ratio=" << format_double(options_.pos_ratio) << '\n'
      << "seed=" << options_.seed << '\n'
      << "partition=" << to_string(options_.scheme) << '\n'
      << "dirichlet_beta=" << format_double(options_.dirichlet_beta) << '\n'
      << "n_test=" << options_.n_test << '\n'
      << "margin=" << format_double(options_.margin) << '\n'
      << "spread=" << format_double(options_.spread) << '\n'
      << "cluster_noise=" << format_double(options_.cluster_noise) << '\n';
  return out.str();
}

std::shared_ptr<const AucProblem> make_auc(const AucOptions& options) {
  return std::make_shared<const AucProblem>(options);
}

// ---------------------------------------------------------------------------
// Robust logistic regression

namespace {

constexpr double kBrittleMean = 0.5;
constexpr double kBrittleNoise = 0.05;
constexpr double kRobustMean = 1.5;
constexpr double kRobustNoise = 1.0;

LabeledSet draw_robust_set(std::size_t n, std::size_t dim, std::mt19937_64& rng) {
  LabeledSet set;
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = coin(rng) ? 1 : -1;
    Vector z(dim);
    z[0] = label * kBrittleMean + kBrittleNoise * normal(rng);
    if (dim > 1) z[1] = label * kRobustMean + kRobustNoise * normal(rng);
    for (std::size_t j = 2; j < dim; ++j) z[j] = normal(rng);
    set.features.push_back(std::move(z));
    set.labels.push_back(label);
  }
  return set;
}

}  // namespace

RobustProblem::RobustProblem(const RobustOptions& options) : options_(options) {
  if (options.K < 1 || options.dim < 1 || options.n_per_client < 1) {
    throw std::invalid_argument("robust: K, dim and n_per_client must be >= 1");
  }
  if (!(options.radius > 0.0)) throw std::invalid_argument("robust: radius must be > 0");
  if (options.l2 < 0.0) throw std::invalid_argument("robust: l2 must be >= 0");
  std::mt19937_64 rng(options.seed);
  for (std::size_t k = 0; k < options.K; ++k) {
    clients_.push_back(draw_robust_set(options.n_per_client, options.dim, rng));
  }
  test_ = draw_robust_set(options.n_test, options.dim, rng);
}

std::size_t RobustProblem::num_items(std::size_t k) const {
  check_client(k);
  return clients_[k].labels.size();
}

double RobustProblem::item_value(const Vector& z, int label, const Vector& w,
                                 const Vector& rho) const {
  const double score = dot(w, z) + dot(w, rho);
  return softplus(-label * score) + 0.5 * options_.l2 * norm_sq(w);
}

GradPair RobustProblem::item_grad(const Vector& z, int label, const Vector& w,
                                  const Vector& rho) const {
  const double score = dot(w, z) + dot(w, rho);
  // d/ds log(1 + exp(-y s)) = -y sigmoid(-y s)
  const double dloss = -label * sigmoid(-label * score);
  GradPair g{Vector(w.size()), Vector(w.size())};
  for (std::size_t i = 0; i < w.size(); ++i) {
    g.gx[i] = dloss * (z[i] + rho[i]) + options_.l2 * w[i];
    g.gy[i] = dloss * w[i];
  }
  return g;
}

GradPair RobustProblem::grad_stoch(std::size_t k, const Vector& x, const Vector& y,
                                   SampleRef xi) const {
  check_sample(k, xi);
  require_same_size(x, y, "robust grad");
  const LabeledSet& data = clients_[k];
  return item_grad(data.features[xi.item], data.labels[xi.item], x, y);
}

GradPair RobustProblem::grad_full(std::size_t k, const Vector& x, const Vector& y) const {
  check_client(k);
  require_same_size(x, y, "robust grad");
  if (x.size() != options_.dim) throw std::invalid_argument("robust: bad dimensions");
  const LabeledSet& data = clients_[k];
  return average_items(data.labels.size(), options_.dim, options_.dim, [&](std::size_t i) {
    return item_grad(data.features[i], data.labels[i], x, y);
  });
}

double RobustProblem::value(std::size_t k, const Vector& x, const Vector& y) const {
  check_client(k);
  const LabeledSet& data = clients_[k];
  double acc = 0.0;
  for (std::size_t i = 0; i < data.labels.size(); ++i) {
    acc += item_value(data.features[i], data.labels[i], x, y);
  }
  return acc / static_cast<double>(data.labels.size());
}

ProblemConstants RobustProblem::constants() const {
  // Curvature grows with |w|; no global constants exist.
  return ProblemConstants{};
}

SaddlePoint RobustProblem::initial_point() const {
  return {Vector(options_.dim), Vector(options_.dim)};
}

std::string RobustProblem::describe() const {
  std::ostringstream out;
  out << "problem=robust\n"
      << "K=" << options_.K << '\n'
      << "dim=" << options_.dim << '\n'
      << "n_per_client=" << options_.n_per_client << '\n'
      << "seed=" << options_.seed << '\n'
      << "radius=" << format_double(options_.radius) << '\n'
      << "l2=" << format_double(options_.l2) << '\n'
      << "n_test=" << options_.n_test << '\n';
  return out.str();
}

std::shared_ptr<const RobustProblem> make_robust(const RobustOptions& options) {
  return std::make_shared<const RobustProblem>(options);
}

}  // namespace fedmm
