#include "fedmm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "fedmm/text.hpp"

namespace fedmm {

Vector approx_inner_max(const Problem& problem, const Vector& x, Vector y, std::size_t steps) {
  const double step = 4.0 / std::max(norm_sq(x), 1e-12);
  y = problem.project_y(y);
  for (std::size_t i = 0; i < steps; ++i) {
    const GradPair g = problem.global_grad(x, y);
    y = problem.project_y(axpy(y, step, g.gy));
  }
  return y;
}

GradNormF grad_norm_F(const Problem& problem, const Vector& x_bar, std::size_t ascent_steps) {
  if (auto g = problem.grad_F(x_bar)) return {norm(*g), false};
  const Vector y_star = approx_inner_max(problem, x_bar, Vector(problem.dim_y()), ascent_steps);
  return {norm(problem.global_grad(x_bar, y_star).gx), true};
}

double auc_from_scores(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("auc: size mismatch");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Mann-Whitney statistic with mid-ranks for ties.
  double rank_sum_pos = 0.0;
  std::size_t n_pos = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);  // ranks i+1..j
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] > 0) {
        rank_sum_pos += mid_rank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = scores.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw std::invalid_argument("auc: need both classes");
  const double np = static_cast<double>(n_pos);
  return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

double auc_score(const Problem& problem, const Vector& w) {
  const auto* auc = dynamic_cast<const AucProblem*>(&problem);
  if (auc == nullptr) throw std::invalid_argument("auc_score: not an AUC problem");
  const LabeledSet& test = auc->test_set();
  std::vector<double> scores;
  scores.reserve(test.features.size());
  for (const Vector& z : test.features) scores.push_back(dot(w, z));
  return auc_from_scores(scores, test.labels);
}

double perturbed_accuracy(const RobustProblem& problem, const Vector& w, const Vector& shift) {
  const LabeledSet& test = problem.test_set();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.features.size(); ++i) {
    const double score = dot(w, test.features[i]) + dot(w, shift);
    if (test.labels[i] * score > 0.0) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.features.size());
}

double worst_case_accuracy(const RobustProblem& problem, const Vector& w) {
  // Accuracy only sees the shift through s = w . shift, which ranges over
  // [-r|w|, r|w|]. It is piecewise constant in s and lowest at an endpoint
  // or at a breakpoint s = -w.z_i, where item i scores exactly zero.
  const LabeledSet& test = problem.test_set();
  const double reach = problem.options().radius * norm(w);
  std::vector<double> pos, neg;
  for (std::size_t i = 0; i < test.features.size(); ++i) {
    (test.labels[i] > 0 ? pos : neg).push_back(dot(w, test.features[i]));
  }
  std::sort(pos.begin(), pos.end());
  std::sort(neg.begin(), neg.end());
  auto correct_at = [&](double s) {
    // positives need m + s > 0, negatives m + s < 0
    const auto p = pos.end() - std::upper_bound(pos.begin(), pos.end(), -s);
    const auto n = std::lower_bound(neg.begin(), neg.end(), -s) - neg.begin();
    return static_cast<std::size_t>(p + n);
  };
  std::size_t fewest = std::min(correct_at(-reach), correct_at(reach));
  for (const auto* margins : {&pos, &neg}) {
    for (double m : *margins) {
      if (std::abs(m) <= reach) fewest = std::min(fewest, correct_at(-m));
    }
  }
  return static_cast<double>(fewest) / static_cast<double>(test.features.size());
}

TraceRecord record_step(const Problem& problem, std::uint64_t t, bool is_sync,
                        std::span<const ClientState> clients, const Counters& counters,
                        bool heavy, const std::optional<SaddlePoint>& saddle) {
  std::vector<Vector> xs, ys, ws, vs;
  for (const ClientState& c : clients) {
    xs.push_back(c.x);
    ys.push_back(c.y);
    ws.push_back(c.w);
    vs.push_back(c.v);
  }
  const Vector x_bar = vec_mean(xs);
  const Vector y_bar = vec_mean(ys);
  const Vector w_bar = vec_mean(ws);
  const Vector v_bar = vec_mean(vs);

  TraceRecord r;
  r.t = t;
  r.is_sync = is_sync;
  if (saddle) {
    r.dist_x_sq = dist_sq(x_bar, saddle->x);
    r.dist_y_sq = dist_sq(y_bar, saddle->y);
  }
  if (auto g = problem.grad_F(x_bar)) {
    r.grad_norm_F = norm(*g);
  } else if (heavy) {
    r.grad_norm_F = grad_norm_F(problem, x_bar).value;
  }

  Vector gx_mean(problem.dim_x());
  Vector gy_mean(problem.dim_y());
  for (const ClientState& c : clients) {
    const GradPair g = problem.grad_full(c.index, c.x, c.y);
    gx_mean += g.gx;
    gy_mean += g.gy;
  }
  const double inv = 1.0 / static_cast<double>(clients.size());
  gx_mean *= inv;
  gy_mean *= inv;
  r.est_err_x = std::sqrt(dist_sq(w_bar, gx_mean));
  r.est_err_y = std::sqrt(dist_sq(v_bar, gy_mean));

  for (const ClientState& c : clients) {
    r.consensus_x = std::max(r.consensus_x, std::sqrt(dist_sq(c.x, x_bar)));
    r.consensus_y = std::max(r.consensus_y, std::sqrt(dist_sq(c.y, y_bar)));
  }
  r.objective = problem.global_value(x_bar, y_bar);
  if (heavy && problem.kind() == ProblemKind::Auc) {
    const auto& auc = dynamic_cast<const AucProblem&>(problem);
    r.auc = auc_score(problem, auc.scorer(x_bar));
  }
  r.sfo = counters.sfo_per_client;
  r.comm = counters.comm_rounds;
  return r;
}

namespace {

std::string cell(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

std::optional<double> optional_cell(const std::string& s, std::size_t line) {
  if (trim(s).empty()) return std::nullopt;
  auto v = parse_double(s);
  if (!v) throw std::runtime_error("csv line " + std::to_string(line) + ": bad number '" + s + "'");
  return v;
}

double required_cell(const std::string& s, std::size_t line) {
  auto v = optional_cell(s, line);
  if (!v) throw std::runtime_error("csv line " + std::to_string(line) + ": empty required cell");
  return *v;
}

std::uint64_t count_cell(const std::string& s, std::size_t line) {
  auto v = parse_int(s);
  if (!v || *v < 0) {
    throw std::runtime_error("csv line " + std::to_string(line) + ": bad integer '" + s + "'");
  }
  return static_cast<std::uint64_t>(*v);
}

}  // namespace

std::string to_csv(const RunTrace& trace) {
  std::ostringstream out;
  out << kCsvHeader << '\n';
  for (const TraceRecord& r : trace.records) {
    out << r.t << ',' << (r.is_sync ? 1 : 0) << ',' << cell(r.dist_x_sq) << ','
        << cell(r.dist_y_sq) << ',' << cell(r.grad_norm_F) << ',' << format_double(r.est_err_x)
        << ',' << format_double(r.est_err_y) << ',' << format_double(r.consensus_x) << ','
        << format_double(r.objective) << ',' << cell(r.auc) << ',' << r.sfo << ',' << r.comm
        << '\n';
  }
  return out.str();
}

void emit_csv(const RunTrace& trace, const std::string& path) {
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw std::runtime_error("cannot open '" + path + "' for writing");
  file << to_csv(trace);
  if (!file.flush()) throw std::runtime_error("failed writing '" + path + "'");
}

std::vector<TraceRecord> parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || trim(line) != kCsvHeader) {
    throw std::runtime_error("csv: missing or unexpected header");
  }
  std::vector<TraceRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != 12) {
      throw std::runtime_error("csv line " + std::to_string(line_no) + ": expected 12 cells");
    }
    TraceRecord r;
    r.t = count_cell(cells[0], line_no);
    r.is_sync = count_cell(cells[1], line_no) != 0;
    r.dist_x_sq = optional_cell(cells[2], line_no);
    r.dist_y_sq = optional_cell(cells[3], line_no);
    r.grad_norm_F = optional_cell(cells[4], line_no);
    r.est_err_x = required_cell(cells[5], line_no);
    r.est_err_y = required_cell(cells[6], line_no);
    r.consensus_x = required_cell(cells[7], line_no);
    r.objective = required_cell(cells[8], line_no);
    r.auc = optional_cell(cells[9], line_no);
    r.sfo = count_cell(cells[10], line_no);
    r.comm = count_cell(cells[11], line_no);
    records.push_back(r);
  }
  return records;
}

std::vector<TraceRecord> read_csv(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << file.rdbuf();
  return parse_csv(buf.str());
}

}  // namespace fedmm
