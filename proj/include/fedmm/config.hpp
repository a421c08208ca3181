#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedmm/problems.hpp"
#include "fedmm/state.hpp"

namespace fedmm {

/// Problem block. Only the options struct matching `name` is active; keys
/// that belong to another problem are rejected by the parser.
struct ProblemConfig {
  ProblemKind kind = ProblemKind::Synthetic;
  SyntheticOptions synthetic;
  AucOptions auc;
  RobustOptions robust;

  std::size_t K() const;
  ProblemPtr build() const;
};

struct OutputConfig {
  std::string dir = "out";
  std::string prefix = "run";
  std::vector<std::uint64_t> seeds{1};
  std::uint64_t heavy_every = 0;  // 0: heavy metrics at sync steps only
};

struct RunConfig {
  ProblemConfig problem;
  HyperParams hp;                 // hp.variant mirrors variants.front()
  std::vector<Variant> variants{Variant::FGDA};
  OutputConfig output;

  /// Canonical text form; parse_config(render()) reproduces this config.
  std::string render() const;
  /// The config of a single (variant, seed) run, as recorded next to its CSV.
  RunConfig single(Variant variant, std::uint64_t seed) const;
  /// fnv1a64 of render().
  std::uint64_t hash() const;

  friend bool operator==(const RunConfig& a, const RunConfig& b) { return a.render() == b.render(); }
};

/// Config grammar error. The message starts with "line N:" when a line is known.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sections [problem], [algorithm], [output]; `key = value` lines; `#`
/// starts a comment. Unknown or duplicate keys, bad values and keys of a
/// different problem throw ConfigError.
RunConfig parse_config(const std::string& text);

/// Applies one `section.key = value` assignment to an already parsed config.
void apply_override(RunConfig& config, const std::string& dotted_key, const std::string& value);

std::vector<std::string> preset_names();
/// Throws ConfigError for an unknown preset.
std::string preset_text(const std::string& name);

/// Key listing with defaults, for --help.
std::string config_reference();

}  // namespace fedmm
