#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace fedmm {

enum class PartitionScheme { IID, ByGroup, Dirichlet };

std::string to_string(PartitionScheme scheme);
PartitionScheme partition_scheme_from_string(const std::string& name);

/// Assignment of dataset items to clients. Disjoint, covering, and every
/// client owns at least one item.
struct PartitionPlan {
  PartitionScheme scheme = PartitionScheme::IID;
  double dirichlet_beta = 0.0;
  std::vector<std::vector<std::size_t>> assignment;

  std::size_t num_clients() const { return assignment.size(); }

  /// One line per client: "client <k>: i0 i1 ...".
  std::string to_text() const;
};

/// Splits items 0..n_items-1 across K clients.
///
/// IID shuffles and deals contiguous chunks. ByGroup treats each distinct
/// label as a group; groups are sorted and dealt round-robin, so client k
/// receives groups k, k+K, ... . Dirichlet draws, for each label, client
/// proportions from Dirichlet(beta, ..., beta) and splits that label's items
/// accordingly; empty clients then take one item from the largest client.
///
/// Throws std::invalid_argument if K == 0, K > n_items, labels.size() !=
/// n_items, ByGroup has fewer groups than clients, or beta <= 0.
PartitionPlan partition(std::size_t n_items, const std::vector<int>& labels,
                        std::size_t K, PartitionScheme scheme,
                        std::uint64_t seed, double dirichlet_beta = 1.0);

/// floor(T / q).
std::uint64_t expected_comm_rounds(std::uint64_t T, std::uint64_t q);

struct SfoLedger {
  std::uint64_t exact = 0;         // 2q + 2(T - floor(T/q))
  std::uint64_t upper_bound = 0;  // 2q + 2T
};

/// Per-client stochastic-gradient count of a full run: 2q at
/// initialization plus 2 per asynchronous step.
SfoLedger expected_sfo(std::uint64_t T, std::uint64_t q);

}  // namespace fedmm
