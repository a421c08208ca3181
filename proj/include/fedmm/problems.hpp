#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fedmm/core.hpp"
#include "fedmm/federation.hpp"

namespace fedmm {

enum class ProblemKind { Synthetic, Auc, Robust };

std::string to_string(ProblemKind kind);

/// Realization of xi^k: one item of client k's finite dataset.
struct SampleRef {
  std::size_t client = 0;
  std::size_t item = 0;
};

struct GradPair {
  Vector gx;
  Vector gy;
};

struct SaddlePoint {
  Vector x;
  Vector y;
};

/// Feasible set for the max variable. No radius means unconstrained.
struct YConstraint {
  std::optional<double> ball_radius;
};

enum class Provenance { Analytic, Estimated, Unavailable };

std::string to_string(Provenance p);

struct ProblemConstants {
  double L_f = 0.0;
  Provenance L_f_provenance = Provenance::Unavailable;
  double mu = 0.0;
  Provenance mu_provenance = Provenance::Unavailable;
};

/// A K-client minimax problem min_x max_y (1/K) sum_k f^k(x, y) where each
/// f^k is the average of a per-item loss over client k's finite dataset.
///
/// Instances are immutable after construction and every oracle is a pure
/// function, so one instance can be read from many threads.
class Problem {
 public:
  virtual ~Problem() = default;

  virtual ProblemKind kind() const = 0;
  virtual std::size_t num_clients() const = 0;
  virtual std::size_t dim_x() const = 0;
  virtual std::size_t dim_y() const = 0;
  virtual std::size_t num_items(std::size_t k) const = 0;

  /// Partial gradients of client k's loss on a single item.
  virtual GradPair grad_stoch(std::size_t k, const Vector& x, const Vector& y,
                              SampleRef xi) const = 0;
  /// Exact partial gradients of f^k (the dataset average).
  virtual GradPair grad_full(std::size_t k, const Vector& x, const Vector& y) const = 0;
  /// f^k(x, y).
  virtual double value(std::size_t k, const Vector& x, const Vector& y) const = 0;

  virtual YConstraint y_constraint() const { return {}; }
  virtual ProblemConstants constants() const = 0;

  /// y*(x) = argmax_y f(x, y) when it has a closed form.
  virtual std::optional<Vector> inner_argmax(const Vector& /*x*/) const { return std::nullopt; }
  /// Stationary point of the averaged objective when it has a closed form.
  virtual std::optional<SaddlePoint> saddle_point() const { return std::nullopt; }
  /// grad F(x) for F(x) = max_y f(x, y), when closed form.
  virtual std::optional<Vector> grad_F(const Vector& /*x*/) const { return std::nullopt; }

  /// Common starting point (x_1, y_1) shared by all clients.
  virtual SaddlePoint initial_point() const = 0;

  /// key=value lines recording every generation parameter.
  virtual std::string describe() const = 0;

  // Non-virtual helpers over the averaged objective.
  GradPair global_grad(const Vector& x, const Vector& y) const;
  double global_value(const Vector& x, const Vector& y) const;
  Vector project_y(const Vector& y) const;
  void check_client(std::size_t k) const;
  void check_sample(std::size_t k, SampleRef xi) const;
};

using ProblemPtr = std::shared_ptr<const Problem>;

/// Euclidean projection onto the ball of the given radius (identity when
/// unconstrained).
Vector project_y(const YConstraint& constraint, const Vector& y);

// ---------------------------------------------------------------------------
// Synthetic quadratic game:
//   f^k(x, y) = (tau/2)|x|^2 - [ (1/2)|y|^2 - b_k^T y + y^T (t_k I) x ]
// with b'_k ~ N(0, s^2 I), t_k ~ U(0, 0.1), b_k = b'_k - mean_j b'_j.
// The stochastic oracle adds a pre-drawn, per-client centered Gaussian noise
// realization to the exact gradient.

struct SyntheticOptions {
  std::size_t K = 10;
  std::size_t dim = 20;
  double s = 1.0;
  double tau = 10.0;
  std::uint64_t seed = 42;
  double noise_sigma = 0.0;
  std::size_t n_items = 100;
  bool center_b = true;  // false only for tests of the general saddle formula
};

class SyntheticProblem final : public Problem {
 public:
  explicit SyntheticProblem(const SyntheticOptions& options);

  ProblemKind kind() const override { return ProblemKind::Synthetic; }
  std::size_t num_clients() const override { return options_.K; }
  std::size_t dim_x() const override { return options_.dim; }
  std::size_t dim_y() const override { return options_.dim; }
  std::size_t num_items(std::size_t k) const override;

  GradPair grad_stoch(std::size_t k, const Vector& x, const Vector& y,
                      SampleRef xi) const override;
  GradPair grad_full(std::size_t k, const Vector& x, const Vector& y) const override;
  double value(std::size_t k, const Vector& x, const Vector& y) const override;

  ProblemConstants constants() const override;
  std::optional<Vector> inner_argmax(const Vector& x) const override;
  std::optional<SaddlePoint> saddle_point() const override;
  std::optional<Vector> grad_F(const Vector& x) const override;
  SaddlePoint initial_point() const override { return initial_; }
  std::string describe() const override;

  const SyntheticOptions& options() const { return options_; }
  const std::vector<Vector>& b() const { return b_; }
  const std::vector<double>& t() const { return t_; }
  double mean_t() const { return mean_t_; }
  const Vector& mean_b() const { return mean_b_; }

 private:
  SyntheticOptions options_;
  std::vector<Vector> b_;
  std::vector<double> t_;
  double mean_t_ = 0.0;
  Vector mean_b_;
  // noise_[k][i] = (noise in x-gradient, noise in y-gradient)
  std::vector<std::vector<GradPair>> noise_;
  SaddlePoint initial_;
};

std::shared_ptr<const SyntheticProblem> make_synthetic(const SyntheticOptions& options);

// ---------------------------------------------------------------------------
// Imbalanced AUC maximization with the square-loss minimax surrogate and a
// linear scorer h(w; z) = w . z. Min variable x = (w, a, b), max variable
// y = (alpha). With p the positive ratio, per item
//   y=+1: (1-p)(h-a)^2 - 2(1+alpha)(1-p) h - p(1-p) alpha^2
//   y=-1: p(h-b)^2     + 2(1+alpha) p h     - p(1-p) alpha^2
// Data: 2K Gaussian clusters (K positive, K negative) at +/- margin along a
// hidden direction; cluster ids are the partition groups. Feature norms stay
// near sqrt(margin^2 + spread^2 + cluster_noise^2) whatever the dimension.

struct AucOptions {
  std::size_t K = 10;
  std::size_t dim = 20;
  std::size_t n_per_client = 200;
  double pos_ratio = 0.05;
  std::uint64_t seed = 42;
  PartitionScheme scheme = PartitionScheme::ByGroup;
  double dirichlet_beta = 1.0;
  std::size_t n_test = 2000;
  double margin = 0.5;         // distance of cluster means from the boundary
  double spread = 1.0;         // rms norm of cluster offsets along the boundary
  double cluster_noise = 1.0;  // rms norm of within-cluster noise
};

struct LabeledSet {
  std::vector<Vector> features;
  std::vector<int> labels;  // +1 / -1
};

class AucProblem final : public Problem {
 public:
  explicit AucProblem(const AucOptions& options);

  ProblemKind kind() const override { return ProblemKind::Auc; }
  std::size_t num_clients() const override { return options_.K; }
  std::size_t dim_x() const override { return options_.dim + 2; }
  std::size_t dim_y() const override { return 1; }
  std::size_t num_items(std::size_t k) const override;

  GradPair grad_stoch(std::size_t k, const Vector& x, const Vector& y,
                      SampleRef xi) const override;
  GradPair grad_full(std::size_t k, const Vector& x, const Vector& y) const override;
  double value(std::size_t k, const Vector& x, const Vector& y) const override;

  ProblemConstants constants() const override;
  std::optional<Vector> inner_argmax(const Vector& x) const override;
  std::optional<Vector> grad_F(const Vector& x) const override;
  SaddlePoint initial_point() const override;
  std::string describe() const override;

  const AucOptions& options() const { return options_; }
  double pos_ratio() const { return options_.pos_ratio; }
  const LabeledSet& client_data(std::size_t k) const { return clients_.at(k); }
  const LabeledSet& test_set() const { return test_; }
  const PartitionPlan& plan() const { return plan_; }

  /// Per-item loss and gradient, exposed for tests.
  double item_value(const Vector& z, int label, const Vector& x, double alpha) const;
  GradPair item_grad(const Vector& z, int label, const Vector& x, double alpha) const;

  /// Scorer weights w from the min variable x = (w, a, b).
  Vector scorer(const Vector& x) const;

 private:
  AucOptions options_;
  std::vector<LabeledSet> clients_;
  LabeledSet test_;
  PartitionPlan plan_;
  double feature_bound_sq_ = 0.0;
};

std::shared_ptr<const AucProblem> make_auc(const AucOptions& options);

// ---------------------------------------------------------------------------
// Robust logistic regression against a shared input perturbation:
//   min_w max_{|rho| <= r} (1/K) sum_k mean_i log(1 + exp(-y_i w.(z_i + rho)))
//                          + (l2/2)|w|^2
// Data: feature 0 separates the classes with a small margin and little noise,
// feature 1 with a large margin and more noise, the rest is noise.

struct RobustOptions {
  std::size_t K = 10;
  std::size_t dim = 10;
  std::size_t n_per_client = 100;
  std::uint64_t seed = 42;
  double radius = 1.0;
  double l2 = 1e-3;
  std::size_t n_test = 2000;
};

class RobustProblem final : public Problem {
 public:
  explicit RobustProblem(const RobustOptions& options);

  ProblemKind kind() const override { return ProblemKind::Robust; }
  std::size_t num_clients() const override { return options_.K; }
  std::size_t dim_x() const override { return options_.dim; }
  std::size_t dim_y() const override { return options_.dim; }
  std::size_t num_items(std::size_t k) const override;

  GradPair grad_stoch(std::size_t k, const Vector& x, const Vector& y,
                      SampleRef xi) const override;
  GradPair grad_full(std::size_t k, const Vector& x, const Vector& y) const override;
  double value(std::size_t k, const Vector& x, const Vector& y) const override;

  YConstraint y_constraint() const override { return {options_.radius}; }
  ProblemConstants constants() const override;
  SaddlePoint initial_point() const override;
  std::string describe() const override;

  const RobustOptions& options() const { return options_; }
  const LabeledSet& client_data(std::size_t k) const { return clients_.at(k); }
  const LabeledSet& test_set() const { return test_; }

  double item_value(const Vector& z, int label, const Vector& w, const Vector& rho) const;
  GradPair item_grad(const Vector& z, int label, const Vector& w, const Vector& rho) const;

 private:
  RobustOptions options_;
  std::vector<LabeledSet> clients_;
  LabeledSet test_;
};

std::shared_ptr<const RobustProblem> make_robust(const RobustOptions& options);

}  // namespace fedmm
