#pragma once

// JSON-configured experiments: validation, dispatch and file emission.
//
// A run writes its data tables, summary.json ({tool_version, rng_version,
// config_echo, results}), config.json (the effective configuration with all
// defaults filled in) and metadata.json (wall-clock information). Only
// metadata.json changes between two runs of the same configuration.

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "qrem/annealer.hpp"
#include "qrem/errors.hpp"
#include "qrem/gap_analysis.hpp"
#include "qrem/instanton.hpp"
#include "qrem/io.hpp"
#include "qrem/parallel.hpp"
#include "qrem/rem.hpp"
#include "qrem/rng.hpp"
#include "qrem/stats.hpp"

namespace qrem {

inline constexpr const char* kToolVersion = "1.0.0";

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"spectrum", "gap", "scaling", "anneal", "phase-diagram", "instanton"};
  return names;
}

// ---------------------------------------------------------------------------
// Configuration reading. Every accessor records the value it settled on in
// the effective configuration, so defaults end up written out explicitly.

class ConfigSource {
 public:
  ConfigSource(std::string text, std::string name) : text_(std::move(text)), name_(std::move(name)) {}

  const std::string& text() const { return text_; }
  const std::string& name() const { return name_; }

  // Line of the last key along `path`, found by scanning for the quoted keys
  // in order. Returns 0 when the key is absent from the text.
  int line_of(const std::vector<std::string>& path) const {
    std::size_t pos = 0;
    for (const std::string& key : path) {
      const std::string quoted = "\"" + key + "\"";
      std::size_t found = std::string::npos;
      for (std::size_t p = text_.find(quoted, pos); p != std::string::npos; p = text_.find(quoted, p + 1)) {
        std::size_t q = p + quoted.size();
        while (q < text_.size() && std::isspace(static_cast<unsigned char>(text_[q]))) ++q;
        if (q < text_.size() && text_[q] == ':') {
          found = p;
          break;
        }
      }
      if (found == std::string::npos) return 0;
      pos = found + quoted.size();
    }
    if (path.empty()) return 1;
    const std::size_t at = pos == 0 ? 0 : pos - 1;
    return 1 + static_cast<int>(std::count(text_.begin(), text_.begin() + static_cast<std::ptrdiff_t>(at), '\n'));
  }

 private:
  std::string text_;
  std::string name_;
};

class Section {
 public:
  Section(const Json& json, const ConfigSource& source, std::vector<std::string> path, Json& effective)
      : json_(json), source_(source), path_(std::move(path)), effective_(effective) {
    if (!json_.is_object()) fail_here("expected an object");
  }

  [[noreturn]] void fail(const std::string& key, const std::string& message) const {
    std::vector<std::string> p = path_;
    if (!key.empty()) p.push_back(key);
    int line = source_.line_of(p);
    if (line == 0) line = source_.line_of(path_);
    std::string where;
    for (const std::string& part : p) where += (where.empty() ? "" : ".") + part;
    throw ConfigError(source_.name() + ":" + std::to_string(line) + ": " + (where.empty() ? "" : where + ": ") +
                          message,
                      line);
  }

  [[noreturn]] void fail_here(const std::string& message) const { fail("", message); }

  bool has(const std::string& key) const {
    seen_.insert(key);
    return json_.contains(key) && !json_.at(key).is_null();
  }

  const Json& raw(const std::string& key) const {
    seen_.insert(key);
    if (!json_.contains(key)) fail(key, "is required");
    return json_.at(key);
  }

  double number(const std::string& key, std::optional<double> fallback = std::nullopt) {
    double v = 0.0;
    if (has(key)) {
      v = as_number(json_.at(key), key);
    } else if (fallback) {
      v = *fallback;
    } else {
      fail(key, "is required");
    }
    effective_[key] = v;
    return v;
  }

  std::int64_t integer(const std::string& key, std::optional<std::int64_t> fallback = std::nullopt) {
    std::int64_t v = 0;
    if (has(key)) {
      v = as_integer(json_.at(key), key);
    } else if (fallback) {
      v = *fallback;
    } else {
      fail(key, "is required");
    }
    effective_[key] = v;
    return v;
  }

  std::uint64_t unsigned_integer(const std::string& key, std::optional<std::uint64_t> fallback = std::nullopt) {
    std::uint64_t v = 0;
    if (has(key)) {
      const Json& j = json_.at(key);
      if (!j.is_number_unsigned()) fail(key, "must be a non-negative integer");
      v = j.get<std::uint64_t>();
    } else if (fallback) {
      v = *fallback;
    } else {
      fail(key, "is required");
    }
    effective_[key] = v;
    return v;
  }

  bool flag(const std::string& key, bool fallback) {
    bool v = fallback;
    if (has(key)) {
      if (!json_.at(key).is_boolean()) fail(key, "must be true or false");
      v = json_.at(key).get<bool>();
    }
    effective_[key] = v;
    return v;
  }

  std::string choice(const std::string& key, const std::string& fallback, const std::vector<std::string>& allowed) {
    std::string v = fallback;
    if (has(key)) {
      if (!json_.at(key).is_string()) fail(key, "must be a string");
      v = json_.at(key).get<std::string>();
    }
    if (std::find(allowed.begin(), allowed.end(), v) == allowed.end()) {
      std::string list;
      for (const std::string& a : allowed) list += (list.empty() ? "" : ", ") + a;
      fail(key, "must be one of {" + list + "}, got \"" + v + "\"");
    }
    effective_[key] = v;
    return v;
  }

  std::vector<double> numbers(const std::string& key) {
    const Json& j = raw(key);
    if (!j.is_array() || j.empty()) fail(key, "must be a non-empty array of numbers");
    std::vector<double> out;
    for (const Json& x : j) out.push_back(as_number(x, key));
    effective_[key] = out;
    return out;
  }

  std::vector<std::int64_t> integers(const std::string& key) {
    const Json& j = raw(key);
    if (!j.is_array() || j.empty()) fail(key, "must be a non-empty array of integers");
    std::vector<std::int64_t> out;
    for (const Json& x : j) out.push_back(as_integer(x, key));
    effective_[key] = out;
    return out;
  }

  // Either an explicit array or {"start", "stop", "points", "spacing"}.
  std::vector<double> grid(const std::string& key) {
    const Json& j = raw(key);
    if (j.is_array()) return numbers(key);
    if (!j.is_object()) fail(key, "must be an array or a {start, stop, points} object");
    Section g = child(key);
    const double start = g.number("start");
    const double stop = g.number("stop");
    const std::int64_t points = g.integer("points");
    const std::string spacing = g.choice("spacing", "linear", {"linear", "log"});
    g.finish();
    if (points < 1) g.fail("points", "must be >= 1");
    if (points > 1 && !(stop > start)) g.fail("stop", "must exceed start");
    if (spacing == "log" && !(start > 0.0)) g.fail("start", "must be positive for log spacing");
    std::vector<double> out;
    for (std::int64_t i = 0; i < points; ++i) {
      const double s = points == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(points - 1);
      out.push_back(spacing == "log" ? start * std::pow(stop / start, s) : start + (stop - start) * s);
    }
    if (points > 1) out.back() = stop;
    return out;
  }

  Section child(const std::string& key) {
    const Json& j = raw(key);
    if (!j.is_object()) fail(key, "must be an object");
    if (!effective_.contains(key) || !effective_[key].is_object()) effective_[key] = Json::object();
    return Section(j, source_, extend(key), effective_[key]);
  }

  // Rejects keys nobody asked for; catches misspelt options.
  void finish() const {
    for (const auto& [key, value] : json_.items()) {
      if (!seen_.count(key)) fail(key, "unknown key");
    }
  }

  const std::vector<std::string>& path() const { return path_; }
  Json& effective() { return effective_; }
  const ConfigSource& source() const { return source_; }

 private:
  std::vector<std::string> extend(const std::string& key) const {
    std::vector<std::string> p = path_;
    p.push_back(key);
    return p;
  }

  double as_number(const Json& j, const std::string& key) const {
    if (!j.is_number()) fail(key, "must be a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) fail(key, "must be finite");
    return v;
  }

  std::int64_t as_integer(const Json& j, const std::string& key) const {
    if (!j.is_number_integer()) fail(key, "must be an integer");
    return j.get<std::int64_t>();
  }

  const Json& json_;
  const ConfigSource& source_;
  std::vector<std::string> path_;
  Json& effective_;
  mutable std::set<std::string> seen_;
};

// ---------------------------------------------------------------------------
// Parsed experiment descriptions.

// An instance is {"n", "sample"} (seed derived from master_seed), {"n", "seed"}
// or {"energies": [...]}.
struct InstanceSpec {
  int n = 0;
  std::uint64_t sample = 0;
  std::uint64_t seed = 0;
  std::vector<double> energies;

  bool crafted() const { return !energies.empty(); }
  RemInstance build() const { return crafted() ? RemInstance::from_energies(energies) : sample_instance(n, seed); }
};

struct SpectrumConfig {
  InstanceSpec instance;
  std::vector<double> gammas;
  std::size_t k = 4;
  SpectrumOptions options;
};

struct GapConfig {
  std::vector<InstanceSpec> instances;
  GapSearchOptions search;
};

struct ScalingConfig {
  std::vector<int> ns;
  std::size_t samples = 50;
  GapSearchOptions search;
};

struct AnnealConfig {
  std::vector<InstanceSpec> instances;
  Schedule schedule;
  std::vector<double> taus;
  double dt_rule = kDefaultDtRule;
  InitialState initial = InitialState::kGround;
  std::uint64_t checkpoint_every = 0;
};

struct PhaseConfig {
  std::vector<double> temperatures;
  double tol = 1e-10;
};

struct InstantonConfig {
  double beta = 10.0;
  double j = 1.0;
  double gamma = 0.5;
  std::vector<double> thetas;
  std::vector<int> ks;
  std::vector<int> ns;
};

struct ExperimentConfig {
  std::string command;
  std::filesystem::path out = "qrem-out";
  int threads = 1;
  std::uint64_t master_seed = 1;
  SpectrumConfig spectrum;
  GapConfig gap;
  ScalingConfig scaling;
  AnnealConfig anneal;
  PhaseConfig phase;
  InstantonConfig instanton;
  Json effective;  // every field, defaults included
};

// Command-line values that take precedence over the file.
struct ConfigOverrides {
  std::optional<std::string> command;
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

namespace detail {

inline int spins(Section& s, const std::string& key) {
  const std::int64_t n = s.integer(key);
  if (n < 1 || n > kMaxSpins) s.fail(key, "must lie in [1, " + std::to_string(kMaxSpins) + "]");
  return static_cast<int>(n);
}

inline InstanceSpec read_instance(Section s, std::uint64_t master_seed) {
  InstanceSpec spec;
  if (s.has("energies")) {
    if (s.has("n") || s.has("seed") || s.has("sample")) s.fail("energies", "cannot be combined with n, seed or sample");
    spec.energies = s.numbers("energies");
    const std::size_t dim = spec.energies.size();
    if (dim < 2 || (dim & (dim - 1)) != 0) s.fail("energies", "length must be a power of two >= 2");
    while ((std::size_t{1} << spec.n) < dim) ++spec.n;
    if (spec.n > kMaxSpins) s.fail("energies", "too many levels");
  } else {
    spec.n = spins(s, "n");
    if (s.has("seed")) {
      if (s.has("sample")) s.fail("seed", "give either seed or sample, not both");
      spec.seed = s.unsigned_integer("seed");
    } else {
      spec.sample = s.unsigned_integer("sample", 0);
      spec.seed = derive_sample_seed(master_seed, spec.n, spec.sample);
    }
  }
  s.finish();
  return spec;
}

// "instances": [...] or the shorthand {"n", "samples"}.
inline std::vector<InstanceSpec> read_instances(Section& s, std::uint64_t master_seed) {
  std::vector<InstanceSpec> out;
  if (s.has("instances")) {
    if (s.has("n") || s.has("samples")) s.fail("instances", "cannot be combined with n/samples");
    const Json& list = s.raw("instances");
    if (!list.is_array() || list.empty()) s.fail("instances", "must be a non-empty array");
    Json effective = Json::array();
    for (std::size_t i = 0; i < list.size(); ++i) {
      Json entry = Json::object();
      std::vector<std::string> path = s.path();
      path.push_back("instances");
      if (!list[i].is_object()) s.fail("instances", "entry " + std::to_string(i) + " must be an object");
      out.push_back(read_instance(Section(list[i], s.source(), path, entry), master_seed));
      effective.push_back(entry);
    }
    s.effective()["instances"] = effective;
  } else {
    const int n = spins(s, "n");
    const std::int64_t samples = s.integer("samples", 1);
    if (samples < 1) s.fail("samples", "must be >= 1");
    for (std::int64_t i = 0; i < samples; ++i) {
      InstanceSpec spec;
      spec.n = n;
      spec.sample = static_cast<std::uint64_t>(i);
      spec.seed = derive_sample_seed(master_seed, n, spec.sample);
      out.push_back(spec);
    }
  }
  return out;
}

inline GapSearchOptions read_search(Section& s) {
  GapSearchOptions o;
  if (s.has("bracket")) {
    const std::vector<double> b = s.numbers("bracket");
    if (b.size() != 2 || !(b[0] > 0.0 && b[0] < b[1])) s.fail("bracket", "must be [lo, hi] with 0 < lo < hi");
    o.bracket = std::make_pair(b[0], b[1]);
  } else {
    s.effective()["bracket"] = nullptr;  // [0.6, 1.4] * |E0|/n per instance
  }
  o.tol_gamma = s.number("tol_gamma", o.tol_gamma);
  if (!(o.tol_gamma > 0.0)) s.fail("tol_gamma", "must be positive");
  o.tol_eig = s.number("tol_eig", o.tol_eig);
  if (!(o.tol_eig > 0.0)) s.fail("tol_eig", "must be positive");
  o.grid_points = static_cast<int>(s.integer("grid_points", o.grid_points));
  if (o.grid_points < 3) s.fail("grid_points", "must be >= 3");
  return o;
}

inline void require_ascending(Section& s, const std::string& key, const std::vector<double>& v, bool strict,
                              double min_value, bool min_inclusive) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    const bool ok = min_inclusive ? v[i] >= min_value : v[i] > min_value;
    if (!ok) {
      s.fail(key, "entry " + std::to_string(i) + " must be " + (min_inclusive ? ">= " : "> ") +
                      format_number(min_value));
    }
    if (i > 0 && (strict ? !(v[i] > v[i - 1]) : !(v[i] >= v[i - 1]))) {
      s.fail(key, std::string("must be ") + (strict ? "strictly " : "") + "ascending");
    }
  }
}

}  // namespace detail

inline ExperimentConfig parse_config(const std::string& text, const std::string& source_name,
                                     const ConfigOverrides& overrides = {}) {
  const ConfigSource source(text, source_name);
  Json root;
  try {
    root = text.find_first_not_of(" \t\r\n") == std::string::npos ? Json::object() : Json::parse(text);
  } catch (const Json::parse_error& e) {
    const std::size_t end = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    const int line = 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(end), '\n'));
    throw ConfigError(source_name + ":" + std::to_string(line) + ": " + e.what(), line);
  }
  ExperimentConfig cfg;
  cfg.effective = Json::object();
  Section top(root, source, {}, cfg.effective);

  std::string command;
  if (top.has("command")) {
    command = top.choice("command", "", command_names());
    if (overrides.command && *overrides.command != command) {
      top.fail("command", "is \"" + command + "\" but the command line asked for \"" + *overrides.command + "\"");
    }
  } else if (overrides.command) {
    command = *overrides.command;
    cfg.effective["command"] = command;
  } else {
    top.fail_here("no command given");
  }
  cfg.command = command;

  if (overrides.out) {
    top.has("out");
    cfg.out = *overrides.out;
  } else if (top.has("out")) {
    const Json& o = top.raw("out");
    if (!o.is_string() || o.get<std::string>().empty()) top.fail("out", "must be a non-empty string");
    cfg.out = o.get<std::string>();
  }
  cfg.effective["out"] = cfg.out.string();

  if (overrides.threads) {
    top.has("threads");
    cfg.threads = *overrides.threads;
    cfg.effective["threads"] = cfg.threads;
  } else {
    cfg.threads = static_cast<int>(top.integer("threads", default_threads()));
  }
  if (cfg.threads < 1) top.fail("threads", "must be >= 1");

  if (overrides.seed) {
    top.has("master_seed");
    cfg.master_seed = *overrides.seed;
    cfg.effective["master_seed"] = cfg.master_seed;
  } else {
    cfg.master_seed = top.unsigned_integer("master_seed", 1);
  }

  if (command == "spectrum") {
    SpectrumConfig& c = cfg.spectrum;
    c.instance = detail::read_instance(top.child("instance"), cfg.master_seed);
    c.gammas = top.grid("gammas");
    detail::require_ascending(top, "gammas", c.gammas, true, 0.0, true);
    const std::int64_t k = top.integer("k", 4);
    if (k < 2) top.fail("k", "must be >= 2");
    if (static_cast<std::size_t>(k) > basis_size(c.instance.n)) top.fail("k", "exceeds the number of basis states");
    c.k = static_cast<std::size_t>(k);
    c.options.tol = top.number("tol", c.options.tol);
    if (!(c.options.tol > 0.0)) top.fail("tol", "must be positive");
    c.options.warm_start = top.flag("warm_start", true);
  } else if (command == "gap") {
    cfg.gap.instances = detail::read_instances(top, cfg.master_seed);
    cfg.gap.search = detail::read_search(top);
    if (cfg.gap.search.bracket) {
      for (const InstanceSpec& spec : cfg.gap.instances) {
        if (!spec.crafted()) continue;
        const double e0 = *std::min_element(spec.energies.begin(), spec.energies.end());
        if (!(e0 < 0.0)) top.fail("instances", "crafted instances need a negative ground energy");
      }
    }
  } else if (command == "scaling") {
    ScalingConfig& c = cfg.scaling;
    for (std::int64_t n : top.integers("ns")) {
      if (n < 1 || n > kMaxSpins) top.fail("ns", "sizes must lie in [1, " + std::to_string(kMaxSpins) + "]");
      c.ns.push_back(static_cast<int>(n));
    }
    const std::int64_t samples = top.integer("samples", 50);
    if (samples < 10) top.fail("samples", "must be >= 10");
    c.samples = static_cast<std::size_t>(samples);
    c.search = detail::read_search(top);
  } else if (command == "anneal") {
    AnnealConfig& c = cfg.anneal;
    c.instances = detail::read_instances(top, cfg.master_seed);
    const bool has_schedule = top.has("schedule");
    Json empty = Json::object();
    Section sched = has_schedule ? top.child("schedule") : Section(empty, source, {"schedule"}, cfg.effective["schedule"]);
    c.schedule.gamma_start = sched.number("gamma_start", 2.0);
    if (!(c.schedule.gamma_start > 0.0)) sched.fail("gamma_start", "must be positive");
    c.schedule.gamma_end = sched.number("gamma_end", 0.0);
    if (!(c.schedule.gamma_end >= 0.0)) sched.fail("gamma_end", "must be >= 0");
    if (c.schedule.gamma_end > c.schedule.gamma_start) sched.fail("gamma_end", "must not exceed gamma_start");
    sched.choice("shape", "linear", {"linear"});
    sched.finish();
    c.taus = top.grid("taus");
    detail::require_ascending(top, "taus", c.taus, false, 0.0, false);
    c.dt_rule = top.number("dt_rule", kDefaultDtRule);
    if (!(c.dt_rule > 0.0 && c.dt_rule <= kMaxStepNorm)) top.fail("dt_rule", "must lie in (0, 0.1]");
    c.initial = top.choice("initial", "ground", {"ground", "uniform"}) == "ground" ? InitialState::kGround
                                                                                   : InitialState::kUniform;
    c.checkpoint_every = top.unsigned_integer("checkpoint_every", 0);
  } else if (command == "phase-diagram") {
    PhaseConfig& c = cfg.phase;
    if (top.has("temperatures")) {
      c.temperatures = top.grid("temperatures");
    } else {
      c.temperatures = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3, 1.4, 1.5};
      cfg.effective["temperatures"] = c.temperatures;
    }
    detail::require_ascending(top, "temperatures", c.temperatures, true, 0.0, true);
    c.tol = top.number("tol", 1e-10);
    if (!(c.tol > 0.0)) top.fail("tol", "must be positive");
  } else if (command == "instanton") {
    InstantonConfig& c = cfg.instanton;
    c.beta = top.number("beta", 10.0);
    if (!(c.beta > 0.0)) top.fail("beta", "must be positive");
    c.j = top.number("j", 1.0);
    if (!(c.j > 0.0)) top.fail("j", "must be positive");
    c.gamma = top.number("gamma", 0.5);
    if (!(c.gamma > 0.0)) top.fail("gamma", "must be positive");
    if (top.has("thetas")) {
      c.thetas = top.grid("thetas");
    } else {
      for (int i = 0; i <= 10; ++i) c.thetas.push_back(i / 10.0);
      cfg.effective["thetas"] = c.thetas;
    }
    for (double t : c.thetas) {
      if (!(t >= 0.0 && t <= 1.0)) top.fail("thetas", "entries must lie in [0, 1]");
    }
    if (top.has("ks")) {
      for (std::int64_t k : top.integers("ks")) {
        if (k < 0 || k % 2 != 0) top.fail("ks", "jump counts must be even and >= 0");
        c.ks.push_back(static_cast<int>(k));
      }
    } else {
      c.ks = {0, 2, 4};
      cfg.effective["ks"] = c.ks;
    }
    if (top.has("ns")) {
      for (std::int64_t n : top.integers("ns")) {
        if (n < 1) top.fail("ns", "sizes must be >= 1");
        c.ns.push_back(static_cast<int>(n));
      }
    } else {
      c.ns = {10, 12, 14, 16, 18, 20};
      cfg.effective["ns"] = c.ns;
    }
  }
  top.finish();
  return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path, const ConfigOverrides& overrides = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config " + path.string(), 0);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string(), overrides);
}

// ---------------------------------------------------------------------------
// Execution.

struct RunReport {
  bool ok = true;  // every computation converged
  Json results = Json::object();
  std::vector<std::string> problems;
  std::vector<std::filesystem::path> files;
};

namespace detail {

inline Json summary_json(const Summary& s) {
  Json j;
  j["median"] = s.median;
  j["mean"] = s.mean;
  j["geometric_mean"] = s.geometric_mean;
  j["q1"] = s.q1;
  j["q3"] = s.q3;
  return j;
}

inline Json number_or_null(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

inline void run_spectrum(const ExperimentConfig& cfg, RunReport& rep) {
  const SpectrumConfig& c = cfg.spectrum;
  const RemInstance inst = c.instance.build();
  const SpectrumCurve curve = spectrum_vs_field(inst, c.gammas, c.k, c.options);
  const auto path = cfg.out / "spectrum.csv";
  CsvWriter csv(path, {"gamma", "level_index", "energy", "residual"});
  for (std::size_t p = 0; p < curve.gammas.size(); ++p) {
    for (std::size_t i = 0; i < curve.k(); ++i) csv.row(curve.gammas[p], i, curve.levels[i][p], curve.residuals[i][p]);
  }
  csv.close();
  rep.files.push_back(path);
  double worst = 0.0;
  for (const auto& r : curve.residuals) {
    for (double x : r) worst = std::max(worst, x);
  }
  rep.results["instance"] = instance_header(inst);
  rep.results["ground_energy"] = inst.ground_energy();
  rep.results["points"] = curve.gammas.size();
  rep.results["levels"] = curve.k();
  rep.results["max_residual"] = worst;
  rep.results["matvecs"] = curve.iterations;
  rep.results["converged"] = curve.all_converged();
  if (!curve.all_converged()) {
    rep.ok = false;
    rep.problems.push_back("eigensolver did not reach tol at some field values");
  }
}

inline void run_gap(const ExperimentConfig& cfg, RunReport& rep) {
  const GapConfig& c = cfg.gap;
  std::vector<GapRecord> records(c.instances.size());
  std::vector<char> computed(records.size(), 0);
  parallel_for(records.size(), cfg.threads, [&](std::size_t i) {
    const InstanceSpec& spec = c.instances[i];
    GapRecord& rec = records[i];
    rec.n = spec.n;
    rec.sample = i;
    rec.seed = spec.seed;
    try {
      const RemInstance inst = spec.build();
      rec.e0 = inst.ground_energy();
      const GapResult g = minimal_gap(inst, c.search);
      rec.gamma_star = g.gamma_star;
      rec.delta_min = g.delta_min;
      rec.non_unimodal = g.non_unimodal;
      rec.ok = g.converged;
      if (!g.converged) rec.error = "eigensolver did not converge";
      computed[i] = 1;
    } catch (const Error& e) {
      rec.error = e.what();
    }
  });
  const auto path = cfg.out / "gap.csv";
  CsvWriter csv(path, {"n", "sample", "seed", "e0", "gamma_star", "delta_min"});
  std::vector<double> deltas;
  std::vector<double> gammas;
  Json items = Json::array();
  for (std::size_t i = 0; i < records.size(); ++i) {
    const GapRecord& rec = records[i];
    Json item;
    item["n"] = rec.n;
    item["sample"] = rec.sample;
    item["seed"] = rec.seed;
    item["ok"] = rec.ok;
    if (computed[i]) {
      csv.row(rec.n, rec.sample, rec.seed, rec.e0, rec.gamma_star, rec.delta_min);
      const GapPrediction pred = minimal_gap_prediction(rec.e0, rec.n);
      item["predicted_gamma_star"] = pred.gamma_star;
      item["predicted_delta_min"] = pred.delta_min;
      item["non_unimodal"] = rec.non_unimodal;
    }
    if (rec.ok) {
      deltas.push_back(rec.delta_min);
      gammas.push_back(rec.gamma_star);
    } else {
      rep.ok = false;
      rep.problems.push_back("instance " + std::to_string(rec.sample) + ": " + rec.error);
      item["error"] = rec.error;
    }
    items.push_back(item);
  }
  csv.close();
  rep.files.push_back(path);
  rep.results["instances"] = items;
  if (!deltas.empty()) {
    rep.results["delta_min"] = summary_json(summarize(deltas));
    rep.results["gamma_star"] = summary_json(summarize(gammas));
  }
}

inline void run_scaling(const ExperimentConfig& cfg, RunReport& rep) {
  const ScalingConfig& c = cfg.scaling;
  EnsembleOptions opts;
  opts.search = c.search;
  opts.threads = cfg.threads;
  const ScalingResult res = gap_scaling_ensemble(c.ns, c.samples, cfg.master_seed, opts);
  const auto path = cfg.out / "scaling.csv";
  CsvWriter csv(path, {"n", "sample", "seed", "e0", "gamma_star", "delta_min"});
  for (const GapRecord& rec : res.records) {
    if (rec.ok) csv.row(rec.n, rec.sample, rec.seed, rec.e0, rec.gamma_star, rec.delta_min);
  }
  csv.close();
  rep.files.push_back(path);

  Json sizes = Json::array();
  for (const SizeStats& st : res.stats) {
    Json s;
    s["n"] = st.n;
    s["count"] = st.count;
    s["excluded"] = st.excluded;
    if (st.count > 0) {
      s["delta_min"] = summary_json(st.delta_min);
      s["gamma_star"] = summary_json(st.gamma_star);
    }
    std::size_t non_unimodal = 0;
    for (const GapRecord& rec : res.records) non_unimodal += rec.n == st.n && rec.non_unimodal;
    s["non_unimodal"] = non_unimodal;
    sizes.push_back(s);
  }
  Json fit;
  fit["quantity"] = "log2(median delta_min) vs n";
  fit["points"] = res.fit.points;
  fit["slope"] = number_or_null(res.fit.slope);
  fit["intercept"] = number_or_null(res.fit.intercept);
  fit["slope_stderr"] = number_or_null(res.fit.slope_stderr);
  fit["confidence"] = res.fit.confidence;
  fit["slope_ci"] = {number_or_null(res.fit.slope_ci_low), number_or_null(res.fit.slope_ci_high)};
  fit["slope_natural_log"] = number_or_null(res.fit.slope * kLn2);
  fit["reference_slope"] = -0.5;
  rep.results["sizes"] = sizes;
  rep.results["fit"] = fit;
  rep.results["excluded"] = res.excluded;
  for (const GapRecord& rec : res.records) {
    if (!rec.ok) {
      rep.ok = false;
      rep.problems.push_back("n=" + std::to_string(rec.n) + " sample " + std::to_string(rec.sample) + ": " +
                             rec.error);
    }
  }
}

inline std::string checkpoint_name(std::size_t instance, std::size_t tau) {
  return "checkpoints_" + std::to_string(instance) + "_" + std::to_string(tau) + ".csv";
}

inline void run_anneal(const ExperimentConfig& cfg, RunReport& rep) {
  const AnnealConfig& c = cfg.anneal;
  struct Outcome {
    std::vector<AnnealResult> runs;
    std::string error;
  };
  std::vector<Outcome> outcomes(c.instances.size());
  EvolveOptions evolve_opts;
  evolve_opts.initial = c.initial;
  evolve_opts.checkpoint_every = c.checkpoint_every;
  parallel_for(outcomes.size(), cfg.threads, [&](std::size_t i) {
    try {
      const RemInstance inst = c.instances[i].build();
      outcomes[i].runs = success_vs_tau(inst, c.taus, c.schedule, c.dt_rule, evolve_opts);
    } catch (const Error& e) {
      outcomes[i].error = e.what();
    }
  });

  const auto path = cfg.out / "anneal.csv";
  CsvWriter csv(path, {"n", "seed", "tau", "dt", "fidelity", "norm_drift"});
  Json items = Json::array();
  double worst_drift = 0.0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const InstanceSpec& spec = c.instances[i];
    Json item;
    item["n"] = spec.n;
    item["seed"] = spec.seed;
    if (!outcomes[i].error.empty()) {
      rep.ok = false;
      rep.problems.push_back("instance " + std::to_string(i) + ": " + outcomes[i].error);
      item["error"] = outcomes[i].error;
      items.push_back(item);
      continue;
    }
    std::vector<std::string> warnings;
    for (std::size_t t = 0; t < outcomes[i].runs.size(); ++t) {
      const AnnealResult& r = outcomes[i].runs[t];
      csv.row(spec.n, spec.seed, r.schedule.tau, r.dt, r.fidelity, r.norm_drift);
      worst_drift = std::max(worst_drift, r.max_norm_drift);
      for (const std::string& w : r.warnings) {
        if (std::find(warnings.begin(), warnings.end(), w) == warnings.end()) warnings.push_back(w);
      }
      if (c.checkpoint_every > 0) {
        const auto cp = cfg.out / checkpoint_name(i, t);
        CsvWriter cw(cp, {"t", "gamma", "fidelity"});
        for (const Checkpoint& k : r.checkpoints) cw.row(k.t, k.gamma, k.fidelity);
        cw.close();
        rep.files.push_back(cp);
      }
    }
    if (!outcomes[i].runs.empty()) item["initial_fidelity"] = outcomes[i].runs.front().initial_fidelity;
    item["warnings"] = warnings;
    items.push_back(item);
  }
  csv.close();
  rep.files.insert(rep.files.begin(), path);

  // Median fidelity over instances at each tau.
  Json curve = Json::array();
  for (std::size_t t = 0; t < c.taus.size(); ++t) {
    std::vector<double> f;
    for (const Outcome& o : outcomes) {
      if (o.error.empty()) f.push_back(o.runs[t].fidelity);
    }
    Json point;
    point["tau"] = c.taus[t];
    point["median_fidelity"] = f.empty() ? Json(nullptr) : Json(median(f));
    curve.push_back(point);
  }
  rep.results["instances"] = items;
  rep.results["median_fidelity"] = curve;
  rep.results["max_norm_drift"] = worst_drift;
}

inline void run_phase(const ExperimentConfig& cfg, RunReport& rep) {
  const PhaseConfig& c = cfg.phase;
  const auto path = cfg.out / "phase.csv";
  CsvWriter csv(path, {"T", "gamma_c"});
  Json frozen = Json::array();
  for (double t : c.temperatures) {
    const PhasePoint p = phase_boundary(t, c.tol);
    csv.row(p.temperature, p.gamma_c);
    frozen.push_back(p.frozen);
  }
  csv.close();
  rep.files.push_back(path);
  rep.results["critical_temperature"] = critical_temperature();
  rep.results["gamma_c_zero_temperature"] = kSqrtLn2;
  rep.results["frozen"] = frozen;
}

inline void run_instanton(const ExperimentConfig& cfg, RunReport& rep) {
  const InstantonConfig& c = cfg.instanton;
  const auto action_path = cfg.out / "instanton.csv";
  CsvWriter csv(action_path, {"theta", "k", "action"});
  for (double theta : c.thetas) {
    for (int k : c.ks) csv.row(theta, k, instanton_action({theta, c.beta, c.j, c.gamma, k, 1}));
  }
  csv.close();
  const auto surface_path = cfg.out / "surface.csv";
  CsvWriter surf(surface_path, {"n", "g", "gap_scale"});
  for (int n : c.ns) {
    const SurfaceCost s = surface_cost_gap(n);
    surf.row(n, s.g, s.gap_scale);
  }
  surf.close();
  rep.files.push_back(action_path);
  rep.files.push_back(surface_path);

  const BalancedTheta b = balanced_theta_action(c.beta, c.j, c.gamma);
  rep.results["balanced_theta"] = b.theta;
  rep.results["balanced_action"] = b.action;
  rep.results["degenerate"] = b.degenerate;
  rep.results["coexistence_gamma"] = kSqrtLn2 * c.j / 2.0;
  rep.results["jump_cost"] = std::log(kSpinBasisOverlap);
  rep.results["gap_exponent_per_spin"] = std::log(kSpinBasisOverlap);
  Json ms = Json::array();
  for (double theta : c.thetas) ms.push_back(theta > 0.0 ? Json(static_m(theta, c.beta, c.j)) : Json(nullptr));
  rep.results["static_m"] = ms;
}

inline std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace detail

// Runs the experiment and writes every output file under cfg.out. Module
// errors propagate as exceptions; non-convergence is reported in `ok`.
inline RunReport run(const ExperimentConfig& cfg) {
  std::filesystem::create_directories(cfg.out);
  const std::string started = detail::utc_now();
  const auto clock_start = std::chrono::steady_clock::now();

  RunReport rep;
  if (cfg.command == "spectrum") {
    detail::run_spectrum(cfg, rep);
  } else if (cfg.command == "gap") {
    detail::run_gap(cfg, rep);
  } else if (cfg.command == "scaling") {
    detail::run_scaling(cfg, rep);
  } else if (cfg.command == "anneal") {
    detail::run_anneal(cfg, rep);
  } else if (cfg.command == "phase-diagram") {
    detail::run_phase(cfg, rep);
  } else if (cfg.command == "instanton") {
    detail::run_instanton(cfg, rep);
  } else {
    throw ConfigError("unknown command " + cfg.command, 0);
  }

  Json summary;
  summary["tool_version"] = kToolVersion;
  summary["rng_version"] = kRngVersion;
  summary["config_echo"] = cfg.effective;
  summary["results"] = rep.results;
  summary["converged"] = rep.ok;
  summary["problems"] = rep.problems;
  write_json(cfg.out / "summary.json", summary);
  write_json(cfg.out / "config.json", cfg.effective);

  Json meta;
  meta["started"] = started;
  meta["finished"] = detail::utc_now();
  meta["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_start).count();
  write_json(cfg.out / "metadata.json", meta);

  rep.files.push_back(cfg.out / "summary.json");
  rep.files.push_back(cfg.out / "config.json");
  rep.files.push_back(cfg.out / "metadata.json");
  return rep;
}

}  // namespace qrem
