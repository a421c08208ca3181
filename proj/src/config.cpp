#include "fedmm/config.hpp"

#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "fedmm/text.hpp"

namespace fedmm {

namespace {

[[noreturn]] void fail(std::size_t line, const std::string& what) {
  if (line == 0) throw ConfigError(what);
  throw ConfigError("line " + std::to_string(line) + ": " + what);
}

double as_real(const std::string& key, const std::string& value, std::size_t line) {
  auto v = parse_double(value);
  if (!v) fail(line, "key '" + key + "' expects a real number, got '" + value + "'");
  return *v;
}

std::uint64_t as_count(const std::string& key, const std::string& value, std::size_t line) {
  auto v = parse_int(value);
  if (!v || *v < 0) fail(line, "key '" + key + "' expects a nonnegative integer, got '" + value + "'");
  return static_cast<std::uint64_t>(*v);
}

bool as_bool(const std::string& key, const std::string& value, std::size_t line) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  fail(line, "key '" + key + "' expects true or false, got '" + value + "'");
}

ProblemKind kind_from_string(const std::string& name, std::size_t line) {
  for (ProblemKind k : {ProblemKind::Synthetic, ProblemKind::Auc, ProblemKind::Robust}) {
    if (to_string(k) == name) return k;
  }
  fail(line, "unknown problem '" + name + "' (expected synthetic, auc or robust)");
}

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += ',';
    out += parts[i];
  }
  return out;
}

using Setter = std::function<void(RunConfig&, const std::string&, std::size_t)>;

struct KeyTable {
  std::map<std::string, Setter> common;
  std::map<ProblemKind, std::map<std::string, Setter>> problem;
  std::map<std::string, Setter> algorithm;
  std::map<std::string, Setter> output;
};

// Setters for the three problem option structs that share a field name.
template <class Field>
Setter shared(Field SyntheticOptions::*fs, Field AucOptions::*fa, Field RobustOptions::*fr,
              const char* key, bool count) {
  return [=](RunConfig& c, const std::string& v, std::size_t line) {
    const Field value = count ? static_cast<Field>(as_count(key, v, line))
                              : static_cast<Field>(as_real(key, v, line));
    switch (c.problem.kind) {
      case ProblemKind::Synthetic: c.problem.synthetic.*fs = value; break;
      case ProblemKind::Auc: c.problem.auc.*fa = value; break;
      case ProblemKind::Robust: c.problem.robust.*fr = value; break;
    }
  };
}

template <class Opt, class Field>
Setter real_field(Opt ProblemConfig::*block, Field Opt::*field, const char* key) {
  return [=](RunConfig& c, const std::string& v, std::size_t line) {
    (c.problem.*block).*field = as_real(key, v, line);
  };
}

template <class Opt, class Field>
Setter count_field(Opt ProblemConfig::*block, Field Opt::*field, const char* key) {
  return [=](RunConfig& c, const std::string& v, std::size_t line) {
    (c.problem.*block).*field = static_cast<Field>(as_count(key, v, line));
  };
}

const KeyTable& keys() {
  static const KeyTable table = [] {
    KeyTable t;
    t.common["K"] = shared(&SyntheticOptions::K, &AucOptions::K, &RobustOptions::K, "K", true);
    t.common["dim"] = shared(&SyntheticOptions::dim, &AucOptions::dim, &RobustOptions::dim, "dim", true);
    t.common["seed"] =
        shared(&SyntheticOptions::seed, &AucOptions::seed, &RobustOptions::seed, "seed", true);

    auto& syn = t.problem[ProblemKind::Synthetic];
    syn["s"] = real_field(&ProblemConfig::synthetic, &SyntheticOptions::s, "s");
    syn["tau"] = real_field(&ProblemConfig::synthetic, &SyntheticOptions::tau, "tau");
    syn["noise_sigma"] =
        real_field(&ProblemConfig::synthetic, &SyntheticOptions::noise_sigma, "noise_sigma");
    syn["n_items"] = count_field(&ProblemConfig::synthetic, &SyntheticOptions::n_items, "n_items");

    auto& auc = t.problem[ProblemKind::Auc];
    auc["n_per_client"] = count_field(&ProblemConfig::auc, &AucOptions::n_per_client, "n_per_client");
    auc["pos_ratio"] = real_field(&ProblemConfig::auc, &AucOptions::pos_ratio, "pos_ratio");
    auc["partition"] = [](RunConfig& c, const std::string& v, std::size_t line) {
      try {
        c.problem.auc.scheme = partition_scheme_from_string(v);
      } catch (const std::invalid_argument& e) {
        fail(line, e.what());
      }
    };
    auc["dirichlet_beta"] = real_field(&ProblemConfig::auc, &AucOptions::dirichlet_beta, "dirichlet_beta");
    auc["n_test"] = count_field(&ProblemConfig::auc, &AucOptions::n_test, "n_test");
    auc["margin"] = real_field(&ProblemConfig::auc, &AucOptions::margin, "margin");
    auc["spread"] = real_field(&ProblemConfig::auc, &AucOptions::spread, "spread");
    auc["cluster_noise"] = real_field(&ProblemConfig::auc, &AucOptions::cluster_noise, "cluster_noise");

    auto& rob = t.problem[ProblemKind::Robust];
    rob["n_per_client"] =
        count_field(&ProblemConfig::robust, &RobustOptions::n_per_client, "n_per_client");
    rob["radius"] = real_field(&ProblemConfig::robust, &RobustOptions::radius, "radius");
    rob["l2"] = real_field(&ProblemConfig::robust, &RobustOptions::l2, "l2");
    rob["n_test"] = count_field(&ProblemConfig::robust, &RobustOptions::n_test, "n_test");

    auto real_hp = [](double HyperParams::*f, const char* key) -> Setter {
      return [=](RunConfig& c, const std::string& v, std::size_t line) {
        c.hp.*f = as_real(key, v, line);
      };
    };
    auto count_hp = [](std::uint64_t HyperParams::*f, const char* key) -> Setter {
      return [=](RunConfig& c, const std::string& v, std::size_t line) {
        c.hp.*f = as_count(key, v, line);
      };
    };
    auto bool_hp = [](bool HyperParams::*f, const char* key) -> Setter {
      return [=](RunConfig& c, const std::string& v, std::size_t line) {
        c.hp.*f = as_bool(key, v, line);
      };
    };
    auto opt_hp = [](std::optional<double> HyperParams::*f, const char* key) -> Setter {
      return [=](RunConfig& c, const std::string& v, std::size_t line) {
        if (v == "none") {
          (c.hp.*f).reset();
        } else {
          c.hp.*f = as_real(key, v, line);
        }
      };
    };
    auto& alg = t.algorithm;
    alg["variant"] = [](RunConfig& c, const std::string& v, std::size_t line) {
      std::vector<Variant> out;
      for (const std::string& part : split(v, ',')) {
        try {
          out.push_back(variant_from_string(std::string(trim(part))));
        } catch (const std::invalid_argument& e) {
          fail(line, e.what());
        }
      }
      if (out.empty()) fail(line, "variant list is empty");
      c.variants = out;
      c.hp.variant = out.front();
    };
    alg["gamma"] = real_hp(&HyperParams::gamma, "gamma");
    alg["lambda"] = real_hp(&HyperParams::lambda, "lambda");
    alg["n"] = real_hp(&HyperParams::eta_n, "n");
    alg["m"] = real_hp(&HyperParams::eta_m, "m");
    alg["c1"] = real_hp(&HyperParams::c1, "c1");
    alg["c2"] = real_hp(&HyperParams::c2, "c2");
    alg["q"] = count_hp(&HyperParams::q, "q");
    alg["T"] = count_hp(&HyperParams::T, "T");
    alg["rho"] = real_hp(&HyperParams::rho, "rho");
    alg["rho_u"] = real_hp(&HyperParams::rho_u, "rho_u");
    alg["varrho"] = real_hp(&HyperParams::varrho, "varrho");
    alg["tie_varrho"] = bool_hp(&HyperParams::tie_varrho, "tie_varrho");
    alg["beta_m"] = real_hp(&HyperParams::beta_m, "beta_m");
    alg["eta_const"] = opt_hp(&HyperParams::eta_const, "eta_const");
    alg["momentum_const"] = opt_hp(&HyperParams::momentum_const, "momentum_const");
    alg["zero_accumulators"] = bool_hp(&HyperParams::zero_accumulators, "zero_accumulators");
    alg["workers"] = [](RunConfig& c, const std::string& v, std::size_t line) {
      c.hp.workers = static_cast<std::size_t>(as_count("workers", v, line));
    };

    auto& out = t.output;
    out["dir"] = [](RunConfig& c, const std::string& v, std::size_t line) {
      if (v.empty()) fail(line, "dir must not be empty");
      c.output.dir = v;
    };
    out["prefix"] = [](RunConfig& c, const std::string& v, std::size_t line) {
      if (v.empty() || v.find_first_of("/\\ ") != std::string::npos) {
        fail(line, "prefix must be a nonempty file stem without spaces or slashes");
      }
      c.output.prefix = v;
    };
    out["seeds"] = [](RunConfig& c, const std::string& v, std::size_t line) {
      std::vector<std::uint64_t> seeds;
      for (const std::string& part : split(v, ',')) {
        seeds.push_back(as_count("seeds", std::string(trim(part)), line));
      }
      if (seeds.empty()) fail(line, "seeds list is empty");
      c.output.seeds = seeds;
    };
    out["heavy_every"] = [](RunConfig& c, const std::string& v, std::size_t line) {
      c.output.heavy_every = as_count("heavy_every", v, line);
      c.hp.heavy_every = c.output.heavy_every;
    };
    return t;
  }();
  return table;
}

void set_problem_key(RunConfig& c, const std::string& key, const std::string& value,
                     std::size_t line) {
  const KeyTable& t = keys();
  if (auto it = t.common.find(key); it != t.common.end()) {
    it->second(c, value, line);
    return;
  }
  const auto& own = t.problem.at(c.problem.kind);
  if (auto it = own.find(key); it != own.end()) {
    it->second(c, value, line);
    return;
  }
  for (const auto& [kind, table] : t.problem) {
    if (table.count(key)) {
      fail(line, "key '" + key + "' does not apply to problem '" + to_string(c.problem.kind) + "'");
    }
  }
  fail(line, "unknown key '" + key + "' in [problem]");
}

void set_key(RunConfig& c, const std::string& section, const std::string& key,
             const std::string& value, std::size_t line) {
  const KeyTable& t = keys();
  const std::map<std::string, Setter>* table = nullptr;
  if (section == "problem") {
    if (key == "name") {
      c.problem.kind = kind_from_string(value, line);
      return;
    }
    set_problem_key(c, key, value, line);
    return;
  }
  if (section == "algorithm") table = &t.algorithm;
  if (section == "output") table = &t.output;
  if (table == nullptr) fail(line, "unknown section [" + section + "]");
  auto it = table->find(key);
  if (it == table->end()) fail(line, "unknown key '" + key + "' in [" + section + "]");
  it->second(c, value, line);
}

void check_ranges(const RunConfig& c) {
  try {
    c.hp.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (c.problem.K() < 1) throw ConfigError("problem K must be >= 1");
}

}  // namespace

std::size_t ProblemConfig::K() const {
  switch (kind) {
    case ProblemKind::Synthetic: return synthetic.K;
    case ProblemKind::Auc: return auc.K;
    case ProblemKind::Robust: return robust.K;
  }
  return 0;
}

ProblemPtr ProblemConfig::build() const {
  switch (kind) {
    case ProblemKind::Synthetic: return make_synthetic(synthetic);
    case ProblemKind::Auc: return make_auc(auc);
    case ProblemKind::Robust: return make_robust(robust);
  }
  throw std::logic_error("unreachable problem kind");
}

std::string RunConfig::render() const {
  std::ostringstream out;
  auto real = [](double v) { return format_double(v); };
  out << "[problem]\n" << "name = " << to_string(problem.kind) << '\n';
  switch (problem.kind) {
    case ProblemKind::Synthetic: {
      const auto& o = problem.synthetic;
      out << "K = " << o.K << "\ndim = " << o.dim << "\nseed = " << o.seed << "\ns = " << real(o.s)
          << "\ntau = " << real(o.tau) << "\nnoise_sigma = " << real(o.noise_sigma)
          << "\nn_items = " << o.n_items << '\n';
      break;
    }
    case ProblemKind::Auc: {
      const auto& o = problem.auc;
      out << "K = " << o.K << "\ndim = " << o.dim << "\nseed = " << o.seed
          << "\nn_per_client = " << o.n_per_client << "\npos_ratio = " << real(o.pos_ratio)
          << "\npartition = " << to_string(o.scheme) << "\ndirichlet_beta = " << real(o.dirichlet_beta)
          << "\nn_test = " << o.n_test << "\nmargin = " << real(o.margin)
          << "\nspread = " << real(o.spread) << "\ncluster_noise = " << real(o.cluster_noise) << '\n';
      break;
    }
    case ProblemKind::Robust: {
      const auto& o = problem.robust;
      out << "K = " << o.K << "\ndim = " << o.dim << "\nseed = " << o.seed
          << "\nn_per_client = " << o.n_per_client << "\nradius = " << real(o.radius)
          << "\nl2 = " << real(o.l2) << "\nn_test = " << o.n_test << '\n';
      break;
    }
  }
  std::vector<std::string> names;
  for (Variant v : variants) names.push_back(to_string(v));
  auto optional = [&](const std::optional<double>& v) { return v ? real(*v) : std::string("none"); };
  out << "\n[algorithm]\n"
      << "variant = " << join(names) << "\ngamma = " << real(hp.gamma)
      << "\nlambda = " << real(hp.lambda) << "\nn = " << real(hp.eta_n) << "\nm = " << real(hp.eta_m)
      << "\nc1 = " << real(hp.c1) << "\nc2 = " << real(hp.c2) << "\nq = " << hp.q << "\nT = " << hp.T
      << "\nrho = " << real(hp.rho) << "\nrho_u = " << real(hp.rho_u)
      << "\nvarrho = " << real(hp.varrho) << "\ntie_varrho = " << (hp.tie_varrho ? "true" : "false")
      << "\nbeta_m = " << real(hp.beta_m) << "\neta_const = " << optional(hp.eta_const)
      << "\nmomentum_const = " << optional(hp.momentum_const)
      << "\nzero_accumulators = " << (hp.zero_accumulators ? "true" : "false")
      << "\nworkers = " << hp.workers << '\n';
  std::vector<std::string> seeds;
  for (auto s : output.seeds) seeds.push_back(std::to_string(s));
  out << "\n[output]\n"
      << "dir = " << output.dir << "\nprefix = " << output.prefix << "\nseeds = " << join(seeds)
      << "\nheavy_every = " << output.heavy_every << '\n';
  return out.str();
}

RunConfig RunConfig::single(Variant variant, std::uint64_t seed) const {
  RunConfig out = *this;
  out.variants = {variant};
  out.hp.variant = variant;
  out.hp.seed = seed;
  out.output.seeds = {seed};
  return out;
}

std::uint64_t RunConfig::hash() const { return fnv1a64(render()); }

RunConfig parse_config(const std::string& text) {
  struct Entry {
    std::string section, key, value;
    std::size_t line;
  };
  std::vector<Entry> entries;
  std::set<std::pair<std::string, std::string>> seen;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(line_no, "malformed section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (section != "problem" && section != "algorithm" && section != "output") {
        fail(line_no, "unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail(line_no, "expected 'key = value'");
    if (section.empty()) fail(line_no, "key outside of any section");
    std::string key(trim(line.substr(0, eq)));
    std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) fail(line_no, "empty key");
    if (value.empty()) fail(line_no, "empty value for key '" + key + "'");
    if (!seen.emplace(section, key).second) {
      fail(line_no, "duplicate key '" + key + "' in [" + section + "]");
    }
    entries.push_back({section, key, value, line_no});
  }

  RunConfig config;
  // The problem name decides which problem keys are valid, so it goes first.
  for (const Entry& e : entries) {
    if (e.section == "problem" && e.key == "name") set_key(config, e.section, e.key, e.value, e.line);
  }
  for (const Entry& e : entries) {
    if (e.section == "problem" && e.key == "name") continue;
    set_key(config, e.section, e.key, e.value, e.line);
  }
  check_ranges(config);
  return config;
}

void apply_override(RunConfig& config, const std::string& dotted_key, const std::string& value) {
  const auto dot = dotted_key.find('.');
  if (dot == std::string::npos) {
    throw ConfigError("override '" + dotted_key + "' must look like section.key");
  }
  set_key(config, dotted_key.substr(0, dot), dotted_key.substr(dot + 1), std::string(trim(value)), 0);
  check_ranges(config);
}

namespace {

const std::map<std::string, std::string>& presets() {
  // 200 epochs at one epoch per q = 20 local steps gives T = 4000.
  static const std::map<std::string, std::string> table{
      {"synthetic-s1",
       "[problem]\nname = synthetic\nK = 10\ndim = 20\ns = 1\ntau = 10\n\n"
       "[algorithm]\nvariant = fgda,adafgda-adam\ngamma = 0.01\nlambda = 0.01\nq = 20\nT = 4000\n\n"
       "[output]\nprefix = synthetic-s1\nseeds = 1,2,3\n"},
      {"synthetic-s10",
       "[problem]\nname = synthetic\nK = 10\ndim = 20\ns = 10\ntau = 10\n\n"
       "[algorithm]\nvariant = fgda,adafgda-adam\ngamma = 0.01\nlambda = 0.01\nq = 20\nT = 4000\n\n"
       "[output]\nprefix = synthetic-s10\nseeds = 1,2,3\n"},
      // Solved against the synthetic instance's analytic constants
      // (L_f = 10, mu = 1, K = 10). Satisfies every listed condition; the
      // small eta it implies makes it slow, so it exists for validation.
      {"synthetic-theorem1",
       "[problem]\nname = synthetic\nK = 10\ndim = 20\ns = 1\ntau = 10\n\n"
       "[algorithm]\nvariant = adafgda-adam\ngamma = 0.02\nlambda = 0.02\nn = 1\nm = 3200000\n"
       "c1 = 1\nc2 = 5\nq = 20\nT = 4000\nrho = 1\nrho_u = 0.0005\n\n"
       "[output]\nprefix = synthetic-theorem1\nseeds = 1\n"},
      {"auc-imbalanced",
       "[problem]\nname = auc\nK = 10\ndim = 20\nn_per_client = 200\npos_ratio = 0.05\n"
       "partition = bygroup\n\n"
       "[algorithm]\nvariant = local-sgda,momentum-local-sgda,fgda,adafgda-adam\n"
       "gamma = 0.1\nlambda = 0.1\nq = 20\nT = 2000\nrho = 0.1\n\n"
       "[output]\nprefix = auc-imbalanced\nseeds = 1,2,3\n"},
      {"robust-q6",
       "[problem]\nname = robust\nK = 10\ndim = 10\nn_per_client = 100\nradius = 1\n\n"
       "[algorithm]\nvariant = fgda\ngamma = 0.1\nlambda = 0.1\nq = 6\nT = 1200\nrho = 0.1\n\n"
       "[output]\nprefix = robust-q6\nseeds = 1,2,3\n"},
      {"robust-q12",
       "[problem]\nname = robust\nK = 10\ndim = 10\nn_per_client = 100\nradius = 1\n\n"
       "[algorithm]\nvariant = fgda\ngamma = 0.1\nlambda = 0.1\nq = 12\nT = 1200\nrho = 0.1\n\n"
       "[output]\nprefix = robust-q12\nseeds = 1,2,3\n"},
  };
  return table;
}

}  // namespace

std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (const auto& [name, text] : presets()) out.push_back(name);
  return out;
}

std::string preset_text(const std::string& name) {
  auto it = presets().find(name);
  if (it == presets().end()) {
    std::string known;
    for (const auto& n : preset_names()) known += " " + n;
    throw ConfigError("unknown preset '" + name + "'; known:" + known);
  }
  return it->second;
}

std::string config_reference() {
  RunConfig defaults;
  std::ostringstream out;
  out << "Config keys and defaults (K and dim are artifact defaults; tau = 10,\n"
         "gamma = lambda = 0.1 and q = 20 follow the reference experiments):\n\n"
      << defaults.render()
      << "\nauc keys: n_per_client pos_ratio partition dirichlet_beta n_test margin spread "
         "cluster_noise\n"
         "robust keys: n_per_client radius l2 n_test\n"
         "variant accepts a comma list of: fgda adafgda-adam adafgda-adabelief local-sgda "
         "momentum-local-sgda\n";
  return out.str();
}

}  // namespace fedmm
