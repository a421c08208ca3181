#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedmm/core.hpp"
#include "fedmm/problems.hpp"
#include "fedmm/state.hpp"

namespace fedmm {

/// Metrics of the averaged state after step t (t = 0 is the starting point).
struct TraceRecord {
  std::uint64_t t = 0;
  bool is_sync = false;
  std::optional<double> dist_x_sq;
  std::optional<double> dist_y_sq;
  std::optional<double> grad_norm_F;
  double est_err_x = 0.0;  // |w_bar - mean_k grad_x f^k(x^k, y^k)|
  double est_err_y = 0.0;  // |v_bar - mean_k grad_y f^k(x^k, y^k)|
  double consensus_x = 0.0;  // max_k |x^k - x_bar|
  double consensus_y = 0.0;  // max_k |y^k - y_bar|; kept in memory only
  double objective = 0.0;    // f(x_bar, y_bar)
  std::optional<double> auc;
  std::uint64_t sfo = 0;
  std::uint64_t comm = 0;
};

struct RunTrace {
  std::vector<TraceRecord> records;  // t = 1..T
  TraceRecord initial;               // t = 0
  HyperParams config;
  std::string problem_descriptor;
  std::uint64_t final_sampled_index = 0;  // uniform over 1..T
  SaddlePoint sampled_iterate;            // (x_bar_t, y_bar_t) at that index
  SaddlePoint final_iterate;
  Counters counters;
  bool grad_norm_approximate = false;
  double wall_seconds = 0.0;
};

struct GradNormF {
  double value = 0.0;
  bool approximate = false;
};

/// |grad F(x_bar)| for F(x) = max_y f(x, y). Closed form when the problem
/// provides one; otherwise the inner max is approximated by ascent_steps
/// projected exact-gradient ascent steps from y = 0.
GradNormF grad_norm_F(const Problem& problem, const Vector& x_bar,
                      std::size_t ascent_steps = 200);

/// Projected gradient ascent on y -> f(x, y) from y0, step 4 / |x|^2 (the
/// inverse curvature bound of the logistic loss along x).
Vector approx_inner_max(const Problem& problem, const Vector& x, Vector y0, std::size_t steps);

/// Pairwise AUC of the scores: fraction of (positive, negative) pairs ranked
/// correctly, ties counted as 1/2.
double auc_from_scores(std::span<const double> scores, std::span<const int> labels);

/// AUC of the linear scorer w on the held-out set. Throws
/// std::invalid_argument for non-AUC problems.
double auc_score(const Problem& problem, const Vector& w);

/// Accuracy of sign(w . (z + shift)) on the robust problem's held-out set.
double perturbed_accuracy(const RobustProblem& problem, const Vector& w, const Vector& shift);

/// Lowest held-out accuracy over shared perturbations in the radius-r
/// ball. Exact: the shift only enters through w . shift.
double worst_case_accuracy(const RobustProblem& problem, const Vector& w);

/// Metrics for the current client states. Heavy metrics (grad_norm_F on
/// problems without a closed form, AUC) only when heavy is set.
TraceRecord record_step(const Problem& problem, std::uint64_t t, bool is_sync,
                        std::span<const ClientState> clients, const Counters& counters,
                        bool heavy, const std::optional<SaddlePoint>& saddle);

inline constexpr const char* kCsvHeader =
    "t,is_sync,dist_x_sq,dist_y_sq,grad_norm_F,est_err_x,est_err_y,consensus_x,objective,auc,"
    "sfo,comm";

std::string to_csv(const RunTrace& trace);
/// Throws std::runtime_error when the file cannot be written.
void emit_csv(const RunTrace& trace, const std::string& path);
/// Parses CSV text produced by to_csv. consensus_y is not part of the
/// format and reads back as 0.
std::vector<TraceRecord> parse_csv(const std::string& text);
std::vector<TraceRecord> read_csv(const std::string& path);

}  // namespace fedmm
