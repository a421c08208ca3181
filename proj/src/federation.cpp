#include "fedmm/federation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace fedmm {

std::string to_string(PartitionScheme scheme) {
  switch (scheme) {
    case PartitionScheme::IID: return "iid";
    case PartitionScheme::ByGroup: return "bygroup";
    case PartitionScheme::Dirichlet: return "dirichlet";
  }
  return "unknown";
}

PartitionScheme partition_scheme_from_string(const std::string& name) {
  if (name == "iid") return PartitionScheme::IID;
  if (name == "bygroup") return PartitionScheme::ByGroup;
  if (name == "dirichlet") return PartitionScheme::Dirichlet;
  throw std::invalid_argument("unknown partition scheme '" + name + "'");
}

std::string PartitionPlan::to_text() const {
  std::ostringstream out;
  out << "scheme: " << to_string(scheme);
  if (scheme == PartitionScheme::Dirichlet) out << " beta=" << dirichlet_beta;
  out << '\n';
  for (std::size_t k = 0; k < assignment.size(); ++k) {
    out << "client " << k << ':';
    for (std::size_t item : assignment[k]) out << ' ' << item;
    out << '\n';
  }
  return out.str();
}

namespace {

std::vector<std::vector<std::size_t>> split_iid(std::size_t n_items, std::size_t K,
                                                std::mt19937_64& rng) {
  std::vector<std::size_t> order(n_items);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> out(K);
  for (std::size_t k = 0; k < K; ++k) {
    const std::size_t lo = k * n_items / K;
    const std::size_t hi = (k + 1) * n_items / K;
    out[k].assign(order.begin() + static_cast<std::ptrdiff_t>(lo),
                  order.begin() + static_cast<std::ptrdiff_t>(hi));
  }
  return out;
}

std::map<int, std::vector<std::size_t>> group_items(const std::vector<int>& labels) {
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(i);
  return groups;
}

std::vector<std::vector<std::size_t>> split_by_group(const std::vector<int>& labels,
                                                     std::size_t K) {
  const auto groups = group_items(labels);
  if (groups.size() < K) {
    throw std::invalid_argument("partition: ByGroup needs at least K groups (" +
                                std::to_string(groups.size()) + " < " +
                                std::to_string(K) + ")");
  }
  std::vector<std::vector<std::size_t>> out(K);
  std::size_t g = 0;
  for (const auto& [label, items] : groups) {
    auto& dst = out[g % K];
    dst.insert(dst.end(), items.begin(), items.end());
    ++g;
  }
  return out;
}

std::vector<std::vector<std::size_t>> split_dirichlet(const std::vector<int>& labels,
                                                      std::size_t K, double beta,
                                                      std::mt19937_64& rng) {
  std::vector<std::vector<std::size_t>> out(K);
  std::gamma_distribution<double> gamma(beta, 1.0);
  for (auto [label, items] : group_items(labels)) {
    std::shuffle(items.begin(), items.end(), rng);
    std::vector<double> weights(K);
    double total = 0.0;
    for (double& w : weights) {
      w = gamma(rng);
      total += w;
    }
    // Degenerate draws (all zero at tiny beta) fall back to one client.
    if (!(total > 0.0)) {
      std::fill(weights.begin(), weights.end(), 0.0);
      weights[std::uniform_int_distribution<std::size_t>(0, K - 1)(rng)] = 1.0;
      total = 1.0;
    }
    const double n = static_cast<double>(items.size());
    double cum = 0.0;
    std::size_t lo = 0;
    for (std::size_t k = 0; k < K; ++k) {
      cum += weights[k] / total;
      const std::size_t hi =
          (k + 1 == K) ? items.size()
                       : std::min(items.size(), static_cast<std::size_t>(std::llround(cum * n)));
      for (std::size_t i = lo; i < std::max(lo, hi); ++i) out[k].push_back(items[i]);
      lo = std::max(lo, hi);
    }
  }
  // Every client must own an item: move one from the currently largest.
  for (std::size_t k = 0; k < K; ++k) {
    if (!out[k].empty()) continue;
    auto largest = std::max_element(out.begin(), out.end(), [](const auto& a, const auto& b) {
      return a.size() < b.size();
    });
    out[k].push_back(largest->back());
    largest->pop_back();
  }
  return out;
}

}  // namespace

PartitionPlan partition(std::size_t n_items, const std::vector<int>& labels, std::size_t K,
                        PartitionScheme scheme, std::uint64_t seed, double dirichlet_beta) {
  if (K == 0) throw std::invalid_argument("partition: K must be >= 1");
  if (K > n_items) {
    throw std::invalid_argument("partition: more clients (" + std::to_string(K) +
                                ") than items (" + std::to_string(n_items) + ")");
  }
  if (labels.size() != n_items) {
    throw std::invalid_argument("partition: labels size does not match n_items");
  }
  if (scheme == PartitionScheme::Dirichlet && !(dirichlet_beta > 0.0)) {
    throw std::invalid_argument("partition: Dirichlet beta must be > 0");
  }

  std::mt19937_64 rng(seed);
  PartitionPlan plan;
  plan.scheme = scheme;
  plan.dirichlet_beta = scheme == PartitionScheme::Dirichlet ? dirichlet_beta : 0.0;
  switch (scheme) {
    case PartitionScheme::IID: plan.assignment = split_iid(n_items, K, rng); break;
    case PartitionScheme::ByGroup: plan.assignment = split_by_group(labels, K); break;
    case PartitionScheme::Dirichlet:
      plan.assignment = split_dirichlet(labels, K, dirichlet_beta, rng);
      break;
  }
  for (auto& items : plan.assignment) std::sort(items.begin(), items.end());
  return plan;
}

std::uint64_t expected_comm_rounds(std::uint64_t T, std::uint64_t q) {
  if (T == 0 || q == 0) throw std::invalid_argument("expected_comm_rounds: T, q must be >= 1");
  return T / q;
}

SfoLedger expected_sfo(std::uint64_t T, std::uint64_t q) {
  const std::uint64_t syncs = expected_comm_rounds(T, q);
  return SfoLedger{.exact = 2 * q + 2 * (T - syncs), .upper_bound = 2 * q + 2 * T};
}

}  // namespace fedmm
