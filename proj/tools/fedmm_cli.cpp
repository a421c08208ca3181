#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fedmm/algorithms.hpp"
#include "fedmm/config.hpp"
#include "fedmm/metrics.hpp"
#include "fedmm/text.hpp"
#include "fedmm/theory.hpp"

using namespace fedmm;

namespace {

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kUsage = 2;

struct Source {
  std::string preset;
  std::string config_path;
  std::string out_dir;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// "--section.key value" and "--section.key=value" pairs left over by CLI11.
void apply_overrides(RunConfig& config, const std::vector<std::string>& extras) {
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& arg = extras[i];
    if (arg.rfind("--", 0) != 0 || arg.find('.') == std::string::npos) {
      throw ConfigError("unexpected argument '" + arg + "'");
    }
    std::string key = arg.substr(2);
    std::string value;
    if (auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key = key.substr(0, eq);
    } else {
      if (i + 1 >= extras.size()) throw ConfigError("override '" + arg + "' needs a value");
      value = extras[++i];
    }
    apply_override(config, key, value);
  }
}

RunConfig load(const Source& src, const std::vector<std::string>& extras) {
  if (!src.preset.empty() && !src.config_path.empty()) {
    throw ConfigError("--preset and --config are mutually exclusive");
  }
  std::string text = "[problem]\nname = synthetic\n";
  if (!src.preset.empty()) text = preset_text(src.preset);
  if (!src.config_path.empty()) text = read_file(src.config_path);
  RunConfig config = parse_config(text);
  apply_overrides(config, extras);
  if (!src.out_dir.empty()) config.output.dir = src.out_dir;
  return config;
}

std::optional<ConstantSet> validator_constants(const Problem& problem) {
  const ProblemConstants pc = problem.constants();
  if (pc.mu_provenance == Provenance::Unavailable || !(pc.mu > 0.0)) return std::nullopt;
  return estimate_constants(problem, 10, 7).with_margin(0.1);
}

std::optional<GapInputs> gap_inputs(const Problem& problem) {
  auto saddle = problem.saddle_point();
  const SaddlePoint start = problem.initial_point();
  auto y_star = problem.inner_argmax(start.x);
  if (!saddle || !y_star) return std::nullopt;
  return GapInputs{problem.global_value(start.x, *y_star),
                   problem.global_value(saddle->x, saddle->y),
                   problem.global_value(start.x, start.y)};
}

bool uses_identity(Variant v) { return adaptive_mode(v) == AdaptiveMode::Identity; }

ConstraintReport validate_for(const HyperParams& hp, const ConstantSet& c, std::size_t K,
                              const std::string& system, const std::optional<GapInputs>& gap) {
  const bool second = system == "theorem2" || (system == "auto" && uses_identity(hp.variant));
  return second ? validate_theorem2(hp, c, K, gap) : validate_theorem1(hp, c, K, gap);
}

// ---------------------------------------------------------------------------
// Final-value statistics

using Metrics = std::vector<std::pair<std::string, double>>;

Metrics final_metrics(const Problem& problem, const RunTrace& trace) {
  Metrics m;
  const TraceRecord& last = trace.records.back();
  if (last.dist_x_sq && last.dist_y_sq) {
    const double d0 = *trace.initial.dist_x_sq + *trace.initial.dist_y_sq;
    m.emplace_back("dist_sq", *last.dist_x_sq + *last.dist_y_sq);
    m.emplace_back("dist_ratio", (*last.dist_x_sq + *last.dist_y_sq) / d0);
  }
  if (last.grad_norm_F) m.emplace_back("grad_norm_F", *last.grad_norm_F);
  m.emplace_back("objective", last.objective);
  m.emplace_back("est_err_y", last.est_err_y);
  if (last.auc) m.emplace_back("auc", *last.auc);
  if (const auto* robust = dynamic_cast<const RobustProblem*>(&problem)) {
    const Vector& w = trace.final_iterate.x;
    m.emplace_back("clean_acc", perturbed_accuracy(*robust, w, Vector(w.size())));
    m.emplace_back("worst_acc", worst_case_accuracy(*robust, w));
  }
  m.emplace_back("sfo", static_cast<double>(trace.counters.sfo_per_client));
  m.emplace_back("comm", static_cast<double>(trace.counters.comm_rounds));
  m.emplace_back("wall_s", trace.wall_seconds);
  return m;
}

struct Stat {
  double mean = 0.0;
  double stddev = 0.0;
};

Stat stat(const std::vector<double>& xs) {
  Stat s;
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double acc = 0.0;
    for (double x : xs) acc += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(acc / static_cast<double>(xs.size() - 1));
  }
  return s;
}

std::string short_num(double v) {
  std::ostringstream out;
  out << std::setprecision(6) << v;
  return out.str();
}

struct VariantResult {
  Variant variant;
  std::vector<std::uint64_t> seeds;
  std::vector<Metrics> per_seed;
};

std::string summary_text(const RunConfig& config, const std::vector<VariantResult>& results,
                         bool with_seeds) {
  std::ostringstream out;
  out << "# config-hash = " << hex64(config.hash()) << '\n';
  out << "# problem = " << to_string(config.problem.kind) << ", K = " << config.problem.K()
      << ", T = " << config.hp.T << ", q = " << config.hp.q << '\n';
  for (const VariantResult& r : results) {
    out << "\n[" << to_string(r.variant) << "]\n";
    if (with_seeds) {
      for (std::size_t i = 0; i < r.seeds.size(); ++i) {
        out << "seed " << r.seeds[i] << ':';
        for (const auto& [name, value] : r.per_seed[i]) out << ' ' << name << '=' << short_num(value);
        out << '\n';
      }
    }
    for (std::size_t j = 0; j < r.per_seed.front().size(); ++j) {
      std::vector<double> xs;
      for (const Metrics& m : r.per_seed) xs.push_back(m[j].second);
      const Stat s = stat(xs);
      out << std::left << std::setw(12) << r.per_seed.front()[j].first << " mean=" << std::setw(14)
          << short_num(s.mean) << " stddev=" << short_num(s.stddev) << '\n';
    }
  }
  return out.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << text) || !out.flush()) {
    throw std::runtime_error("cannot write '" + path.string() + "'");
  }
}

void warn_constraints(const Problem& problem, const HyperParams& hp) {
  auto c = validator_constants(problem);
  if (!c) return;
  const ConstraintReport report = validate_for(hp, *c, problem.num_clients(), "auto", std::nullopt);
  if (report.satisfied()) return;
  std::cerr << "warning: " << to_string(hp.variant) << ": " << report.system
            << " conditions not satisfied (";
  const auto names = report.violated();
  for (std::size_t i = 0; i < names.size(); ++i) std::cerr << (i ? ", " : "") << names[i];
  std::cerr << "); running anyway\n";
}

std::vector<VariantResult> execute(const RunConfig& config, const Problem& problem, bool write_csv) {
  std::vector<VariantResult> results;
  const std::filesystem::path dir(config.output.dir);
  if (write_csv) std::filesystem::create_directories(dir);
  for (Variant v : config.variants) {
    VariantResult r{v, {}, {}};
    warn_constraints(problem, config.single(v, config.output.seeds.front()).hp);
    for (std::uint64_t seed : config.output.seeds) {
      const RunConfig one = config.single(v, seed);
      const RunTrace trace = run(problem, one.hp);
      if (write_csv) {
        const std::string stem =
            config.output.prefix + "_" + to_string(v) + "_seed" + std::to_string(seed);
        emit_csv(trace, (dir / (stem + ".csv")).string());
        write_text(dir / (stem + ".csv.config"),
                   "# config-hash = " + hex64(one.hash()) + "\n" + one.render());
        std::cout << "wrote " << (dir / (stem + ".csv")).string() << '\n';
      }
      r.seeds.push_back(seed);
      r.per_seed.push_back(final_metrics(problem, trace));
    }
    results.push_back(std::move(r));
  }
  return results;
}

int command_run(const RunConfig& config) {
  const ProblemPtr problem = config.problem.build();
  const auto results = execute(config, *problem, true);
  const std::string text = summary_text(config, results, true);
  const auto path = std::filesystem::path(config.output.dir) / (config.output.prefix + "_summary.txt");
  write_text(path, text);
  std::cout << text << "wrote " << path.string() << '\n';
  return kOk;
}

int command_bench(const RunConfig& config) {
  const ProblemPtr problem = config.problem.build();
  const auto results = execute(config, *problem, false);
  const std::string text = summary_text(config, results, false);
  std::filesystem::create_directories(config.output.dir);
  const auto path = std::filesystem::path(config.output.dir) / (config.output.prefix + "_bench.txt");
  write_text(path, text);
  std::cout << text << "wrote " << path.string() << '\n';
  return kOk;
}

int command_validate(const RunConfig& config, const std::string& system) {
  const ProblemPtr problem = config.problem.build();
  auto c = validator_constants(*problem);
  if (!c) {
    std::cerr << "error: problem '" << to_string(config.problem.kind)
              << "' has no strong-concavity constant mu; the conditions cannot be evaluated\n";
    return kFailed;
  }
  std::cout << c->to_text();
  const auto gap = gap_inputs(*problem);
  bool all = true;
  for (Variant v : config.variants) {
    HyperParams hp = config.hp;
    hp.variant = v;
    const ConstraintReport report = validate_for(hp, *c, problem->num_clients(), system, gap);
    std::cout << "\nvariant " << to_string(v) << '\n' << report.to_text();
    if (!report.satisfied()) {
      all = false;
      std::cout << "violated:";
      for (const auto& name : report.violated()) std::cout << ' ' << name;
      std::cout << '\n';
    }
  }
  return all ? kOk : kFailed;
}

int command_probe(const RunConfig& config, const std::string& checks_arg) {
  const ProblemPtr problem = config.problem.build();
  const Problem& p = *problem;
  const std::uint64_t seed = config.output.seeds.front();
  bool all = true;
  auto report = [&](const std::string& name, bool ok, const std::string& detail) {
    std::cout << std::left << std::setw(10) << name << (ok ? " pass  " : " FAIL  ") << detail << '\n';
    all = all && ok;
  };
  auto skip = [&](const std::string& name, const std::string& why) {
    std::cerr << "warning: skipping " << name << ": " << why << '\n';
  };
  for (const std::string& raw : split(checks_arg, ',')) {
    const std::string check(trim(raw));
    if (check == "pl") {
      if (!p.inner_argmax(Vector(p.dim_x()))) {
        skip(check, "no closed-form inner maximum for " + to_string(p.kind()));
        continue;
      }
      const double slack = probe_pl(p, 1000, seed);
      report(check, slack >= -1e-9, "worst slack " + format_double(slack));
    } else if (check == "lipschitz") {
      if (!p.inner_argmax(Vector(p.dim_x())) || !p.grad_F(Vector(p.dim_x()))) {
        skip(check, "no closed-form y*(x) and grad F for " + to_string(p.kind()));
        continue;
      }
      const LipschitzReport r = probe_lipschitz(p, 1000, seed);
      report(check, r.ok(),
             "y* ratio " + format_double(r.max_ystar_ratio) + " <= kappa " + format_double(r.kappa) +
                 ", grad F ratio " + format_double(r.max_gradF_ratio) + " <= L " + format_double(r.L));
    } else if (check == "gradcheck") {
      std::mt19937_64 rng(seed);
      double worst = 0.0;
      for (std::size_t i = 0; i < 100; ++i) {
        const SaddlePoint z = random_point(p, rng);
        worst = std::max(worst, grad_check(p, i % p.num_clients(), z.x, z.y));
      }
      report(check, worst < 1e-5, "max relative error " + format_double(worst));
    } else if (check == "unbiased") {
      const double err = probe_unbiased(p, 10, seed);
      report(check, err <= 1e-10, "max deviation " + format_double(err));
    } else if (check == "constants") {
      const ConstantSet c = estimate_constants(p, 20, seed);
      std::cout << c.to_text();
      report(check, std::isfinite(c.sigma) && std::isfinite(c.delta_x) && std::isfinite(c.delta_y),
             "estimates finite");
    } else {
      throw ConfigError("unknown check '" + check +
                        "' (expected pl, lipschitz, gradcheck, unbiased, constants)");
    }
  }
  return all ? kOk : kFailed;
}

void add_source(CLI::App* cmd, Source& src) {
  cmd->add_option("--preset", src.preset, "Start from a named preset");
  cmd->add_option("--config", src.config_path, "Start from a config file");
  cmd->add_option("--out", src.out_dir, "Output directory (overrides output.dir)");
  cmd->allow_extras();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated minimax optimization simulator"};
  app.footer("\nOverride any config key with --section.key VALUE, e.g. --algorithm.gamma 0.05\n\n" +
             config_reference());
  app.require_subcommand(1);

  Source src;
  std::string system = "auto";
  std::string checks = "pl,lipschitz,gradcheck,unbiased,constants";

  auto* run_cmd = app.add_subcommand("run", "Run every configured variant and seed, write CSVs and a summary");
  add_source(run_cmd, src);
  auto* validate_cmd = app.add_subcommand("validate", "Check the step-size conditions of the convergence result");
  add_source(validate_cmd, src);
  validate_cmd->add_option("--system", system, "theorem1, theorem2 or auto (by variant)")
      ->check(CLI::IsMember({"auto", "theorem1", "theorem2"}));
  auto* probe_cmd = app.add_subcommand("probe", "Numeric checks of the problem assumptions");
  add_source(probe_cmd, src);
  probe_cmd->add_option("--checks", checks, "Comma list of pl, lipschitz, gradcheck, unbiased, constants");
  auto* bench_cmd = app.add_subcommand("bench", "Compare variants; one merged summary table");
  add_source(bench_cmd, src);
  std::string show;
  auto* presets_cmd = app.add_subcommand("presets", "List presets or print one");
  presets_cmd->add_option("--show", show, "Print the named preset");

  CLI11_PARSE(app, argc, argv);

  try {
    if (presets_cmd->parsed()) {
      if (!show.empty()) {
        std::cout << parse_config(preset_text(show)).render();
      } else {
        for (const auto& name : preset_names()) std::cout << name << '\n';
      }
      return kOk;
    }
    CLI::App* cmd = app.get_subcommands().front();
    const RunConfig config = load(src, cmd->remaining());
    if (cmd == run_cmd) return command_run(config);
    if (cmd == validate_cmd) return command_validate(config, system);
    if (cmd == probe_cmd) return command_probe(config, checks);
    if (cmd == bench_cmd) return command_bench(config);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailed;
  }
  return kUsage;
}
