// Experiment driver: every subcommand resolves a full configuration (flags
// over config file over environment), runs deterministically for a given
// (config, seed) pair regardless of --threads, and writes one artifact file
// whose header comments carry the resolved config.

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include <nlohmann/json.hpp>

#include "hyperdrift/avalanche.hpp"
#include "hyperdrift/cocycle.hpp"
#include "hyperdrift/continuity.hpp"
#include "hyperdrift/drift.hpp"
#include "hyperdrift/geometry.hpp"
#include "hyperdrift/hitting.hpp"
#include "hyperdrift/io.hpp"
#include "hyperdrift/markov.hpp"
#include "hyperdrift/models.hpp"
#include "hyperdrift/parallel.hpp"
#include "hyperdrift/rng.hpp"
#include "hyperdrift/sampling.hpp"
#include "hyperdrift/transfer.hpp"

namespace hd = hyperdrift;
namespace fg = hyperdrift::fg;
namespace io = hyperdrift::io;
using nlohmann::ordered_json;

namespace {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string subcommand;
  std::optional<std::string> config;
  std::optional<std::string> model;
  std::optional<int> rank;
  std::optional<double> b;
  std::optional<std::string> preset;
  std::optional<std::string> system;
  std::optional<std::string> chain;
  std::optional<int> n;
  std::optional<std::string> n_grid;
  std::optional<int> samples;
  std::optional<std::string> eps;
  std::optional<double> alpha;
  std::optional<double> gap;
  std::optional<double> angle;
  std::optional<std::uint64_t> seed;
  std::optional<int> net_depth;
  std::optional<std::string> out;
  std::optional<std::string> format;
  std::optional<int> threads;
};

// ---------------------------------------------------------------------------
// Config resolution: flag > config file > (for the seed) environment.

ordered_json load_config(const std::optional<std::string>& path) {
  if (!path) return ordered_json::object();
  std::ifstream in(*path);
  if (!in) throw ConfigError("cannot open config file: " + *path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t first = text.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return ordered_json::object();
  ordered_json parsed = ordered_json::parse(text, nullptr, false);
  if (parsed.is_discarded()) throw ConfigError("config file is not valid JSON: " + *path);
  if (!parsed.is_object()) throw ConfigError("config file must hold a JSON object: " + *path);
  return parsed;
}

template <class T>
std::optional<T> config_value(const ordered_json& cfg, const char* key) {
  auto it = cfg.find(key);
  if (it == cfg.end() || it->is_null()) return std::nullopt;
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("config field has the wrong type: ") + key);
  }
}

template <class T>
T require(const std::optional<T>& flag, const ordered_json& cfg, const char* key) {
  if (flag) return *flag;
  if (auto v = config_value<T>(cfg, key)) return *v;
  throw ConfigError(std::string("missing field: ") + key);
}

template <class T>
T fallback(const std::optional<T>& flag, const ordered_json& cfg, const char* key, T def) {
  if (flag) return *flag;
  if (auto v = config_value<T>(cfg, key)) return *v;
  return def;
}

std::uint64_t resolve_seed(const Options& opts, const ordered_json& cfg) {
  if (opts.seed) return *opts.seed;
  if (auto v = config_value<std::uint64_t>(cfg, "seed")) return *v;
  if (const char* env = std::getenv("HYPERDRIFT_SEED")) {
    std::uint64_t value = 0;
    auto [end, ec] = std::from_chars(env, env + std::strlen(env), value);
    if (ec != std::errc() || *end != '\0') {
      throw ConfigError("HYPERDRIFT_SEED is not an unsigned integer");
    }
    return value;
  }
  throw ConfigError("missing field: seed");
}

std::vector<int> parse_int_list(const std::string& text, const char* what) {
  std::vector<int> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stoi(item));
  }
  if (out.empty()) throw ConfigError(std::string("empty list for field: ") + what);
  return out;
}

std::vector<double> parse_double_list(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stod(item));
  }
  if (out.empty()) throw ConfigError(std::string("empty list for field: ") + what);
  return out;
}

std::vector<int> list_field_int(const std::optional<std::string>& flag, const ordered_json& cfg,
                                const char* key, std::vector<int> def) {
  if (flag) return parse_int_list(*flag, key);
  auto it = cfg.find(key);
  if (it != cfg.end() && !it->is_null()) {
    if (it->is_array()) return it->get<std::vector<int>>();
    return parse_int_list(it->get<std::string>(), key);
  }
  return def;
}

std::vector<double> list_field_double(const std::optional<std::string>& flag,
                                      const ordered_json& cfg, const char* key,
                                      std::vector<double> def) {
  if (flag) return parse_double_list(*flag, key);
  auto it = cfg.find(key);
  if (it != cfg.end() && !it->is_null()) {
    if (it->is_array()) return it->get<std::vector<double>>();
    return parse_double_list(it->get<std::string>(), key);
  }
  return def;
}

// ---------------------------------------------------------------------------
// Cocycle sources: a named preset or a system file.

struct SourceSpec {
  std::string name;        // "preset:f2-srw" or "system:<path>"
  std::string model;       // "tree" or "h2"
  int rank = 2;            // tree only
  bool iid = false;        // f2-srw, const-diag and sl2-pingpong are iid
  hd::MarkovKernel kernel;
  std::vector<std::string> tokens;  // m*m step tokens, row-major
};

SourceSpec preset_source(const std::string& name) {
  SourceSpec src;
  src.name = "preset:" + name;
  if (name == "f2-srw") {
    src.model = "tree";
    src.iid = true;
    std::vector<std::string> steps{"a", "a-", "b", "b-"};
    src.kernel = hd::make_kernel(std::vector<std::vector<double>>(
        4, std::vector<double>(4, 0.25)));
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) src.tokens.push_back(steps[static_cast<std::size_t>(j)]);
    }
  } else if (name == "two-state-ab") {
    src.model = "tree";
    src.kernel = hd::make_kernel({{0.5, 0.5}, {0.5, 0.5}});
    src.tokens = {"a", "b", "b", "a"};
  } else if (name == "const-diag") {
    src.model = "h2";
    src.iid = true;
    src.kernel = hd::make_kernel({{1.0}});
    src.tokens = {io::serialize_matrix({std::numbers::sqrt2, 0.0, 0.0, 1.0 / std::numbers::sqrt2})};
  } else if (name == "sl2-pingpong") {
    src.model = "h2";
    src.iid = true;
    src.kernel = hd::make_kernel({{0.5, 0.5}, {0.5, 0.5}});
    std::vector<std::string> steps{io::serialize_matrix({1.0, 2.0, 0.0, 1.0}),
                                   io::serialize_matrix({1.0, 0.0, 2.0, 1.0})};
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) src.tokens.push_back(steps[static_cast<std::size_t>(j)]);
    }
  } else {
    throw ConfigError("unknown preset: " + name +
                      " (expected f2-srw, const-diag, sl2-pingpong or two-state-ab)");
  }
  return src;
}

SourceSpec system_source(const std::string& path) {
  io::SystemFile file;
  try {
    file = io::load_system(path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  SourceSpec src;
  src.name = "system:" + path;
  src.model = file.rank > 0 ? "tree" : "h2";
  src.rank = file.rank > 0 ? file.rank : 2;
  src.kernel = std::move(file.kernel);
  src.tokens = std::move(file.isometries);
  return src;
}

// ---------------------------------------------------------------------------
// The resolved run plan. Model-specific table parsing happens inside the
// per-model runner.

struct Plan {
  std::string subcommand;
  std::string model;
  int rank = 2;
  double b = 2.0;
  std::optional<SourceSpec> source;
  std::optional<std::string> chain_file;
  std::vector<int> n_grid;
  std::vector<double> eps;
  int n = 0;
  int samples = 0;
  double alpha = 0.5;
  std::optional<double> gap;
  std::optional<double> angle;
  std::optional<double> center;
  int resamples = 200;
  int net_depth = 0;
  std::uint64_t seed = 0;
  int threads = 1;
  std::string out;
  bool as_json = false;
  ordered_json echo;
};

bool needs_cocycle(const std::string& sub) {
  return sub == "drift" || sub == "ldt" || sub == "hitting" || sub == "continuity" ||
         sub == "markov";
}

Plan resolve(const Options& opts) {
  ordered_json cfg = load_config(opts.config);
  Plan plan;
  plan.subcommand = opts.subcommand;

  plan.seed = resolve_seed(opts, cfg);
  plan.out = require(opts.out, cfg, "out");
  std::string format = fallback(opts.format, cfg, "format", std::string("csv"));
  if (format != "csv" && format != "json") {
    throw ConfigError("format must be csv or json, got: " + format);
  }
  plan.as_json = format == "json";
  plan.threads = hd::resolve_threads(fallback(opts.threads, cfg, "threads", 0));

  // Cocycle source before the model so presets can pin the model.
  std::optional<std::string> preset = opts.preset;
  if (!preset) preset = config_value<std::string>(cfg, "preset");
  std::optional<std::string> system = opts.system;
  if (!system) system = config_value<std::string>(cfg, "system");
  if (preset && system) throw ConfigError("give either a preset or a system file, not both");
  if (preset) plan.source = preset_source(*preset);
  if (system) plan.source = system_source(*system);
  if (needs_cocycle(plan.subcommand) && !plan.source) {
    throw ConfigError("missing field: preset (or system)");
  }

  std::optional<std::string> model = opts.model;
  if (!model) model = config_value<std::string>(cfg, "model");
  if (plan.source) {
    if (model && *model != plan.source->model) {
      throw ConfigError("model " + *model + " conflicts with " + plan.source->name);
    }
    plan.model = plan.source->model;
    plan.rank = plan.source->rank;
  } else if (plan.subcommand == "ap-sl2") {
    plan.model = "h2";
  } else {
    plan.model = model.value_or(plan.subcommand == "geom-selftest" ? "both" : "tree");
    plan.rank = fallback(opts.rank, cfg, "rank", 2);
  }
  if (plan.model != "tree" && plan.model != "h2" &&
      !(plan.model == "both" && plan.subcommand == "geom-selftest")) {
    throw ConfigError("model must be tree or h2, got: " + plan.model);
  }
  if (plan.rank < 2) throw ConfigError("tree rank must be at least 2");

  std::optional<double> b = opts.b;
  if (!b) b = config_value<double>(cfg, "b");
  if (plan.model == "h2" || plan.model == "both") {
    if (b && std::abs(*b - std::numbers::e) > 1e-9) {
      throw ConfigError("model/b mismatch: h2 fixes b = e");
    }
  }
  plan.b = (plan.model == "tree") ? b.value_or(2.0) : std::numbers::e;
  if (plan.model == "tree" && !(plan.b > 1.0)) {
    throw ConfigError("tree visual parameter b must exceed 1");
  }

  const std::string& sub = plan.subcommand;
  if (sub == "drift") {
    plan.n_grid = list_field_int(opts.n_grid, cfg, "n_grid", {});
    if (plan.n_grid.empty() && (opts.n || cfg.contains("n"))) {
      plan.n_grid = {require(opts.n, cfg, "n")};
    }
    if (plan.n_grid.empty()) plan.n_grid = {250, 500, 1000, 2000};
    plan.samples = fallback(opts.samples, cfg, "samples", 1000);
  } else if (sub == "ldt") {
    plan.n_grid = list_field_int(opts.n_grid, cfg, "n_grid", {100, 200, 400, 800});
    if (opts.n || cfg.contains("n")) plan.n_grid = {require(opts.n, cfg, "n")};
    plan.eps = list_field_double(opts.eps, cfg, "eps", {0.1});
    plan.samples = fallback(opts.samples, cfg, "samples", 1000);
    if (auto c = config_value<double>(cfg, "center")) plan.center = *c;
  } else if (sub == "hitting") {
    plan.n_grid = list_field_int(opts.n_grid, cfg, "n_grid", {50, 100, 200, 400});
    if (opts.n || cfg.contains("n")) plan.n_grid = {require(opts.n, cfg, "n")};
  } else if (sub == "continuity") {
    plan.eps = list_field_double(opts.eps, cfg, "eps", {1e-1, 1e-2, 1e-3});
    plan.n = fallback(opts.n, cfg, "n", 40);
    plan.samples = fallback(opts.samples, cfg, "samples", 200);
    plan.resamples = fallback(std::optional<int>{}, cfg, "resamples", 200);
  } else if (sub == "markov") {
    plan.n = fallback(opts.n, cfg, "n", 8);
    plan.samples = fallback(opts.samples, cfg, "samples", 500);
    plan.alpha = fallback(opts.alpha, cfg, "alpha", 0.5);
  } else if (sub == "ap-check") {
    plan.samples = fallback(opts.samples, cfg, "samples", 100);
    plan.chain_file = opts.chain;
    if (!plan.chain_file) plan.chain_file = config_value<std::string>(cfg, "chain");
    if (opts.gap) plan.gap = *opts.gap;
    else if (auto g = config_value<double>(cfg, "gap")) plan.gap = *g;
    if (opts.angle) plan.angle = *opts.angle;
    else if (auto a = config_value<double>(cfg, "angle")) plan.angle = *a;
    if (plan.chain_file) {
      if (!plan.gap) throw ConfigError("missing field: gap");
      if (!plan.angle) throw ConfigError("missing field: angle");
    }
  } else if (sub == "ap-sl2") {
    plan.samples = fallback(opts.samples, cfg, "samples", 100);
  } else if (sub == "geom-selftest") {
    plan.samples = fallback(opts.samples, cfg, "samples", 10000);
  }
  if (sub == "continuity" || sub == "markov") {
    plan.net_depth = fallback(opts.net_depth, cfg, "net_depth", plan.model == "tree" ? 3 : 16);
  }

  // Resolved-config echo: everything needed to re-run except --threads and
  // --out, which must not affect the artifact bytes.
  ordered_json& echo = plan.echo;
  echo["subcommand"] = sub;
  echo["model"] = plan.model;
  if (plan.model == "tree") {
    echo["rank"] = plan.rank;
    echo["b"] = plan.b;
  }
  if (plan.source) {
    const std::string& name = plan.source->name;
    if (name.rfind("preset:", 0) == 0) {
      echo["preset"] = name.substr(7);
    } else {
      echo["system"] = name.substr(7);
    }
  }
  if (plan.chain_file) {
    echo["chain"] = *plan.chain_file;
  }
  if (!plan.n_grid.empty()) echo["n_grid"] = plan.n_grid;
  if (plan.n > 0) echo["n"] = plan.n;
  if (plan.samples > 0) echo["samples"] = plan.samples;
  if (!plan.eps.empty()) echo["eps"] = plan.eps;
  if (sub == "markov") echo["alpha"] = plan.alpha;
  if (plan.gap) echo["gap"] = *plan.gap;
  if (plan.angle) echo["angle"] = *plan.angle;
  if (plan.center) echo["center"] = *plan.center;
  if (sub == "continuity") echo["resamples"] = plan.resamples;
  if (plan.net_depth > 0) echo["net_depth"] = plan.net_depth;
  echo["seed"] = plan.seed;
  echo["format"] = format;
  return plan;
}

std::vector<std::string> header_lines(const Plan& plan) {
  return {"hyperdrift " + plan.subcommand + " schema=1", "config: " + plan.echo.dump()};
}

std::string fmt(double v) { return io::format_double(v); }
std::string fmt(int v) { return std::to_string(v); }

// ---------------------------------------------------------------------------
// Model plumbing.

template <class S>
struct ModelTraits;

template <>
struct ModelTraits<hd::CayleyTree> {
  static hd::CayleyTree space(const Plan& plan) { return hd::CayleyTree{plan.rank}; }
  static hd::GeometryContext<hd::CayleyTree> context(const Plan& plan) {
    return hd::make_context(space(plan), plan.b);
  }
  static fg::Word parse_step(const std::string& token, const Plan& plan) {
    return fg::parse_word(token, plan.rank);
  }
  static std::string print_boundary(const fg::End& xi) { return fg::to_string(xi); }
};

template <>
struct ModelTraits<hd::UpperHalfPlane> {
  static hd::UpperHalfPlane space(const Plan&) { return hd::UpperHalfPlane{}; }
  static hd::GeometryContext<hd::UpperHalfPlane> context(const Plan&) {
    return hd::make_context(hd::UpperHalfPlane{});
  }
  static hd::h2::Matrix parse_step(const std::string& token, const Plan&) {
    return io::parse_matrix(token);
  }
  static std::string print_boundary(const hd::h2::Boundary& xi) {
    return xi.infinite ? "inf" : io::format_double(xi.xi);
  }
};

template <class S>
std::vector<typename S::Isometry> parse_table(const Plan& plan) {
  std::vector<typename S::Isometry> table;
  table.reserve(plan.source->tokens.size());
  for (const auto& token : plan.source->tokens) {
    table.push_back(ModelTraits<S>::parse_step(token, plan));
  }
  return table;
}

template <class S>
hd::Cocycle<S> build_cocycle(const Plan& plan) {
  const SourceSpec& src = *plan.source;
  auto table = parse_table<S>(plan);
  auto space = ModelTraits<S>::space(plan);
  int m = src.kernel.size();
  if (src.iid) {
    // Identical kernel rows: take the steps from the first table row.
    std::vector<typename S::Isometry> steps(table.begin(), table.begin() + m);
    return hd::make_iid_cocycle(std::move(space), std::move(steps), src.kernel.rows[0]);
  }
  auto pi = hd::stationary_measure(src.kernel);
  return hd::make_markov_cocycle(std::move(space), src.kernel, pi.weights, std::move(table));
}

// ---------------------------------------------------------------------------
// Subcommand runners. Each fills an OutputTable; the caller writes it.

template <class S>
void run_drift(const Plan& plan, io::OutputTable& table) {
  auto c = build_cocycle<S>(plan);
  table.columns = {"n", "samples", "drift", "std_error"};
  if (plan.n_grid.size() >= 3) {
    auto fit = hd::drift_extrapolate(c, plan.n_grid, plan.samples, plan.seed, plan.threads);
    for (const auto& row : fit.grid) {
      table.rows.push_back({fmt(row.n), fmt(row.samples), fmt(row.mean), fmt(row.std_error)});
    }
    table.header.push_back("fit: drift=" + fmt(fit.drift) + " slope=" + fmt(fit.slope) +
                           " residual=" + fmt(fit.residual) +
                           (fit.degenerate ? " degenerate=true" : ""));
  } else {
    for (std::size_t j = 0; j < plan.n_grid.size(); ++j) {
      auto est = hd::finite_scale_drift(c, plan.n_grid[j], plan.samples, plan.seed, plan.threads,
                                        static_cast<std::uint64_t>(j) *
                                            static_cast<std::uint64_t>(plan.samples));
      table.rows.push_back({fmt(est.n), fmt(est.samples), fmt(est.mean), fmt(est.std_error)});
    }
  }
}

template <class S>
void run_ldt(const Plan& plan, io::OutputTable& table) {
  auto c = build_cocycle<S>(plan);
  table.columns = {"n", "epsilon", "samples", "center", "tail_prob", "rate"};
  for (int n : plan.n_grid) {
    for (double eps : plan.eps) {
      auto rep = hd::ld_tail(c, plan.b, n, eps, plan.samples, plan.seed, plan.threads, plan.center);
      table.rows.push_back({fmt(rep.n), fmt(rep.epsilon), fmt(rep.samples), fmt(rep.center),
                            fmt(rep.tail_prob), fmt(rep.rate)});
    }
  }
}

template <class S>
void run_hitting(const Plan& plan, io::OutputTable& table) {
  auto ctx = ModelTraits<S>::context(plan);
  auto c = build_cocycle<S>(plan);
  table.columns = {"n", "boundary_point", "gromov_half", "gromov_full", "cauchy_gap"};
  for (int n : plan.n_grid) {
    auto est = hd::hitting_point(ctx, c, n, plan.seed);
    table.rows.push_back({fmt(est.n), ModelTraits<S>::print_boundary(est.boundary_point),
                          fmt(est.gromov_growth[0].product), fmt(est.gromov_growth[1].product),
                          fmt(est.cauchy_gap)});
  }
}

template <class S>
void run_continuity(const Plan& plan, io::OutputTable& table) {
  auto ctx = ModelTraits<S>::context(plan);
  auto c = build_cocycle<S>(plan);
  auto net = hd::bordification_net(ctx, plan.net_depth);
  auto report = hd::continuity_experiment(ctx, c, plan.eps, plan.n, plan.samples, plan.seed,
                                          plan.threads, net);
  table.columns = {"scale", "dinf_proxy", "drift_diff", "max_abs_diff", "bound_constant",
                   "prop_bound"};
  for (const auto& row : report.rows) {
    table.rows.push_back({fmt(row.scale), fmt(row.dinf_proxy), fmt(row.drift_diff),
                          fmt(row.max_abs_diff), fmt(row.bound_constant), fmt(row.prop_bound)});
  }
  try {
    double slope = hd::fit_loglog_slope(report);
    auto ci = hd::bootstrap_slope(report, plan.resamples, plan.seed);
    table.header.push_back("slope: value=" + fmt(slope) + " ci_lo=" + fmt(ci.lo) +
                           " ci_hi=" + fmt(ci.hi) + " resamples=" + fmt(ci.resamples_used));
  } catch (const std::exception& e) {
    table.header.push_back(std::string("slope: degenerate (") + e.what() + ")");
  }
}

template <class S>
void run_markov(const Plan& plan, io::OutputTable& table) {
  auto ctx = ModelTraits<S>::context(plan);
  auto sys = hd::make_observed_system(ctx, plan.source->kernel, parse_table<S>(plan),
                                      plan.net_depth);
  std::string pi = "stationary:";
  for (double w : sys.mu.weights) pi += " " + fmt(w);
  table.header.push_back(pi + " residual=" + fmt(sys.mu.residual));

  int m = sys.states();
  std::vector<double> indicator(static_cast<std::size_t>(m), 0.0);
  indicator[0] = 1.0;
  try {
    auto mixing = hd::strong_mixing_diagnostic(sys.kernel, indicator, std::max(plan.n, 2));
    table.header.push_back("mixing: c=" + fmt(mixing.c) + " sigma=" + fmt(mixing.sigma));
  } catch (const std::exception& e) {
    table.header.push_back(std::string("mixing: skipped (") + e.what() + ")");
  }

  auto verdict = hd::irreducibility_heuristic(sys);
  std::string name = verdict.verdict == hd::Reducibility::irreducible_evidence
                         ? "irreducible-evidence"
                         : (verdict.verdict == hd::Reducibility::reducible_witness
                                ? "reducible-witness"
                                : "inconclusive");
  std::string witness;
  for (int cell : verdict.witness) witness += (witness.empty() ? "" : ";") + fmt(cell);
  table.header.push_back("irreducibility: " + name + " resolution=" + fmt(verdict.resolution) +
                         " refined=" + fmt(verdict.refined_resolution) +
                         " candidates=" + fmt(verdict.candidates_checked) +
                         (witness.empty() ? "" : " witness=" + witness));

  table.columns = {"n", "alpha", "samples", "k_hat", "std_error"};
  for (int n = 1; n <= plan.n; ++n) {
    auto est = hd::avg_holder_const(sys, n, plan.alpha, plan.samples, plan.seed);
    table.rows.push_back(
        {fmt(n), fmt(plan.alpha), fmt(plan.samples), fmt(est.value), fmt(est.std_error)});
  }
}

void append_ap_row(io::OutputTable& table, const std::string& id, const hd::ApReport& rep) {
  double min_gap = rep.gap_slacks.empty() ? 0.0 : *std::min_element(rep.gap_slacks.begin(),
                                                                    rep.gap_slacks.end());
  double min_angle = rep.angle_slacks.empty() ? 0.0 : *std::min_element(rep.angle_slacks.begin(),
                                                                        rep.angle_slacks.end());
  auto opt = [](const std::optional<double>& v) { return v ? io::format_double(*v) : ""; };
  table.rows.push_back({id, fmt(rep.n), fmt(rep.gap), fmt(rep.angle), fmt(rep.compat_slack),
                        fmt(min_gap), fmt(min_angle), rep.satisfied ? "true" : "false",
                        opt(rep.endpoint_angle_margin), opt(rep.displacement_margin),
                        opt(rep.sum_identity_margin)});
}

template <class S>
void run_ap_check(const Plan& plan, io::OutputTable& table) {
  auto ctx = ModelTraits<S>::context(plan);
  table.columns = {"chain",          "n",         "gap",           "angle",
                   "p_slack",        "gap_slack", "angle_slack",   "satisfied",
                   "endpoint_margin", "displacement_margin", "sum_margin"};
  if (plan.chain_file) {
    std::ifstream in(*plan.chain_file);
    if (!in) throw std::runtime_error("cannot open chain file: " + *plan.chain_file);
    std::vector<typename S::Isometry> steps;
    std::string line;
    while (std::getline(in, line)) {
      while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
      if (!line.empty()) steps.push_back(ModelTraits<S>::parse_step(line, plan));
    }
    auto rep = hd::check_avalanche_chain<S>(ctx, steps, *plan.gap, *plan.angle);
    append_ap_row(table, "file", rep);
    return;
  }
  hd::CounterRng rng(plan.seed, 0);
  for (int i = 0; i < plan.samples; ++i) {
    if constexpr (std::is_same_v<S, hd::CayleyTree>) {
      auto chain = hd::sampling::random_tree_chain(rng, plan.rank, 2, 29);
      auto rep = hd::check_avalanche_chain<S>(ctx, chain.steps, chain.gap, chain.angle);
      append_ap_row(table, "random-" + std::to_string(i), rep);
    } else {
      auto chain = hd::sampling::random_matrix_chain(rng, 2, 29, 1.2, 2.0);
      auto rep = hd::check_avalanche_chain<S>(ctx, chain.matrices, std::log(chain.mu),
                                              -std::log(chain.nu));
      append_ap_row(table, "random-" + std::to_string(i), rep);
    }
  }
}

double report_disagreement(const hd::ApReport& a, const hd::ApReport& b) {
  double worst = std::abs(a.compat_slack - b.compat_slack);
  for (std::size_t i = 0; i < a.gap_slacks.size(); ++i) {
    worst = std::max(worst, std::abs(a.gap_slacks[i] - b.gap_slacks[i]));
  }
  for (std::size_t i = 0; i < a.angle_slacks.size(); ++i) {
    worst = std::max(worst, std::abs(a.angle_slacks[i] - b.angle_slacks[i]));
  }
  auto diff = [&](const std::optional<double>& x, const std::optional<double>& y) {
    if (x.has_value() != y.has_value()) return std::numeric_limits<double>::infinity();
    return x ? std::abs(*x - *y) : 0.0;
  };
  worst = std::max(worst, diff(a.endpoint_angle_margin, b.endpoint_angle_margin));
  worst = std::max(worst, diff(a.displacement_margin, b.displacement_margin));
  worst = std::max(worst, diff(a.sum_identity_margin, b.sum_identity_margin));
  return worst;
}

void run_ap_sl2(const Plan& plan, io::OutputTable& table) {
  auto ctx = hd::make_context(hd::UpperHalfPlane{});
  table.columns = {"idx", "n", "mu", "nu", "satisfied", "form_disagreement", "norm_residual"};
  hd::CounterRng rng(plan.seed, 0);
  for (int i = 0; i < plan.samples; ++i) {
    // Short chains keep raw orbit coordinates well conditioned, so the
    // matrix form and the point-chain form can be compared tightly.
    auto chain = hd::sampling::random_matrix_chain(rng, 2, 4, 1.2, 1.5);
    auto matrix_form = hd::ap_matrix_form(chain.matrices, chain.mu, chain.nu);

    std::vector<hd::h2::Point> points{ctx.basepoint};
    hd::h2::Matrix prod{};
    double norm_residual = 0.0;
    for (const auto& g : chain.matrices) {
      prod = hd::h2::mul(prod, g);
      points.push_back(hd::h2::act(prod, ctx.basepoint));
      norm_residual = std::max(
          norm_residual, std::abs(ctx.space.distance(hd::h2::act(g, ctx.basepoint), ctx.basepoint) -
                                  std::log(hd::h2::op_norm_sq(g))));
    }
    auto point_form = hd::check_avalanche<hd::UpperHalfPlane>(ctx, points, std::log(chain.mu),
                                                              -std::log(chain.nu));
    table.rows.push_back({fmt(i), fmt(matrix_form.n), fmt(chain.mu), fmt(chain.nu),
                          matrix_form.satisfied ? "true" : "false",
                          fmt(report_disagreement(matrix_form, point_form)), fmt(norm_residual)});
  }
}

// ---------------------------------------------------------------------------
// geom-selftest: property sweeps over both models.

struct SuiteResult {
  std::string suite;
  std::string model;
  int trials = 0;
  double max_violation = 0.0;
  double tol = 0.0;
  bool pass() const { return max_violation <= tol; }
};

template <class S, class PointGen, class BoundaryGen, class IsomGen>
std::vector<SuiteResult> selftest_model(const hd::GeometryContext<S>& ctx, const char* model,
                                        int trials, std::uint64_t seed, double tol,
                                        PointGen&& point, BoundaryGen&& boundary, IsomGen&& isom) {
  hd::CounterRng rng(seed, 0);
  std::vector<SuiteResult> out;

  SuiteResult four{"four-point", model, trials, 0.0, tol};
  for (int i = 0; i < trials; ++i) {
    double slack =
        hd::four_point_slack(ctx, point(rng), point(rng), point(rng), point(rng));
    four.max_violation = std::max(four.max_violation, -slack);
  }
  out.push_back(four);

  SuiteResult triangle{"gauge-triangle", model, trials, 0.0, tol};
  SuiteResult bounded{"visual-bound", model, trials, 0.0, 0.0};
  for (int i = 0; i < trials; ++i) {
    auto xi = hd::at_boundary<S>(boundary(rng));
    auto eta = hd::at_boundary<S>(boundary(rng));
    auto zeta = hd::at_boundary<S>(boundary(rng));
    double lhs = hd::visual_gauge(ctx, xi, zeta);
    double rhs = hd::visual_gauge(ctx, xi, eta) + hd::visual_gauge(ctx, eta, zeta);
    triangle.max_violation = std::max(triangle.max_violation, lhs - rhs);
    bounded.max_violation =
        std::max(bounded.max_violation, hd::visual_metric(ctx, xi, eta) - 1.0);
    bounded.max_violation =
        std::max(bounded.max_violation,
                 hd::visual_metric(ctx, hd::interior<S>(point(rng)), eta) - 1.0);
  }
  out.push_back(triangle);
  out.push_back(bounded);

  SuiteResult conformal{"conformal-ratio", model, trials, 0.0,
                        std::is_same_v<S, hd::CayleyTree> ? 0.0 : 1e-9};
  for (int i = 0; i < trials; ++i) {
    auto xi = boundary(rng);
    auto eta = boundary(rng);
    if (ctx.space.boundary_equal(xi, eta)) continue;
    conformal.max_violation =
        std::max(conformal.max_violation, hd::conformal_ratio_residual(ctx, isom(rng), xi, eta));
  }
  out.push_back(conformal);

  SuiteResult horo{"horofunction-zero", model, trials, 0.0,
                   std::is_same_v<S, hd::CayleyTree> ? 0.0 : 1e-12};
  for (int i = 0; i < trials; ++i) {
    horo.max_violation = std::max(
        horo.max_violation, std::abs(hd::horofunction_eval(ctx, boundary(rng), ctx.basepoint)));
  }
  out.push_back(horo);
  return out;
}

int run_selftest(const Plan& plan, io::OutputTable& table) {
  table.columns = {"suite", "model", "trials", "max_violation", "tol", "pass"};
  std::vector<SuiteResult> results;
  if (plan.model == "tree" || plan.model == "both") {
    auto ctx = hd::make_context(hd::CayleyTree{plan.rank}, plan.b);
    int rank = plan.rank;
    auto res = selftest_model<hd::CayleyTree>(
        ctx, "tree", plan.samples, plan.seed, 0.0,
        [rank](hd::CounterRng& rng) {
          return hd::sampling::random_word(rng, rank, rng.next_below(13));
        },
        [rank](hd::CounterRng& rng) {
          return hd::sampling::random_end(rng, rank, 1 + rng.next_below(10));
        },
        [rank](hd::CounterRng& rng) {
          return hd::sampling::random_word(rng, rank, 1 + rng.next_below(8));
        });
    results.insert(results.end(), res.begin(), res.end());
  }
  if (plan.model == "h2" || plan.model == "both") {
    auto ctx = hd::make_context(hd::UpperHalfPlane{});
    auto res = selftest_model<hd::UpperHalfPlane>(
        ctx, "h2", plan.samples, plan.seed, 1e-9,
        [](hd::CounterRng& rng) { return hd::sampling::random_plane_point(rng); },
        [](hd::CounterRng& rng) { return hd::sampling::random_plane_boundary(rng); },
        [](hd::CounterRng& rng) { return hd::sampling::random_sl2(rng, 1.5); });
    results.insert(results.end(), res.begin(), res.end());
  }
  int failures = 0;
  for (const auto& r : results) {
    if (!r.pass()) ++failures;
    table.rows.push_back({r.suite, r.model, fmt(r.trials), fmt(r.max_violation), fmt(r.tol),
                          r.pass() ? "true" : "false"});
  }
  return failures == 0 ? 0 : 1;
}

int run(const Plan& plan) {
  io::OutputTable table;
  table.header = header_lines(plan);
  int code = 0;
  auto dispatch = [&](auto tag) {
    using S = decltype(tag);
    if (plan.subcommand == "drift") run_drift<S>(plan, table);
    else if (plan.subcommand == "ldt") run_ldt<S>(plan, table);
    else if (plan.subcommand == "hitting") run_hitting<S>(plan, table);
    else if (plan.subcommand == "continuity") run_continuity<S>(plan, table);
    else if (plan.subcommand == "markov") run_markov<S>(plan, table);
    else if (plan.subcommand == "ap-check") run_ap_check<S>(plan, table);
  };
  if (plan.subcommand == "ap-sl2") {
    run_ap_sl2(plan, table);
  } else if (plan.subcommand == "geom-selftest") {
    code = run_selftest(plan, table);
  } else if (plan.model == "tree") {
    dispatch(hd::CayleyTree{});
  } else {
    dispatch(hd::UpperHalfPlane{});
  }
  io::write_table(plan.out, table, plan.as_json);
  return code;
}

void add_common(CLI::App* sub, Options& opts) {
  sub->add_option("--config", opts.config, "JSON config file; flags override its fields");
  sub->add_option("--seed", opts.seed, "RNG seed (or config/HYPERDRIFT_SEED)");
  sub->add_option("--out", opts.out, "output artifact path");
  sub->add_option("--format", opts.format, "csv or json");
  sub->add_option("--threads", opts.threads, "worker threads (default: hardware)");
}

void add_model(CLI::App* sub, Options& opts) {
  sub->add_option("--model", opts.model, "tree or h2");
  sub->add_option("--rank", opts.rank, "free-group rank (tree)");
  sub->add_option("--b", opts.b, "visual parameter (tree only; h2 fixes e)");
}

void add_source(CLI::App* sub, Options& opts) {
  sub->add_option("--preset", opts.preset, "f2-srw, const-diag, sl2-pingpong or two-state-ab");
  sub->add_option("--system", opts.system, "system file with kernel and step table");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hyperbolic cocycle experiments"};
  app.require_subcommand(1);
  Options opts;

  auto* drift = app.add_subcommand("drift", "finite-scale drift over a horizon grid");
  add_common(drift, opts);
  add_model(drift, opts);
  add_source(drift, opts);
  drift->add_option("--n", opts.n, "single horizon");
  drift->add_option("--n-grid", opts.n_grid, "comma-separated horizons");
  drift->add_option("--samples", opts.samples, "Monte Carlo samples per horizon");

  auto* ldt = app.add_subcommand("ldt", "large-deviation tail table over n x epsilon");
  add_common(ldt, opts);
  add_model(ldt, opts);
  add_source(ldt, opts);
  ldt->add_option("--n", opts.n, "single horizon");
  ldt->add_option("--n-grid", opts.n_grid, "comma-separated horizons");
  ldt->add_option("--eps", opts.eps, "comma-separated tail widths");
  ldt->add_option("--samples", opts.samples, "Monte Carlo samples per cell");

  auto* hitting = app.add_subcommand("hitting", "boundary hitting point and Cauchy gaps");
  add_common(hitting, opts);
  add_model(hitting, opts);
  add_source(hitting, opts);
  hitting->add_option("--n", opts.n, "single horizon");
  hitting->add_option("--n-grid", opts.n_grid, "comma-separated horizons");

  auto* continuity = app.add_subcommand("continuity", "perturbation response and Holder slope");
  add_common(continuity, opts);
  add_model(continuity, opts);
  add_source(continuity, opts);
  continuity->add_option("--eps", opts.eps, "comma-separated perturbation scales");
  continuity->add_option("--n", opts.n, "horizon");
  continuity->add_option("--samples", opts.samples, "coupled samples per scale");
  continuity->add_option("--net-depth", opts.net_depth, "boundary net resolution");

  auto* markov = app.add_subcommand("markov", "stationary measure, mixing and Holder series");
  add_common(markov, opts);
  add_model(markov, opts);
  add_source(markov, opts);
  markov->add_option("--n", opts.n, "largest horizon in the series");
  markov->add_option("--samples", opts.samples, "samples per horizon");
  markov->add_option("--alpha", opts.alpha, "Holder exponent");
  markov->add_option("--net-depth", opts.net_depth, "boundary net resolution");

  auto* ap = app.add_subcommand("ap-check", "avalanche hypothesis/conclusion reports");
  add_common(ap, opts);
  add_model(ap, opts);
  ap->add_option("--samples", opts.samples, "random chains to draw");
  ap->add_option("--chain", opts.chain, "file with one step per line");
  ap->add_option("--gap", opts.gap, "gap bound for a file chain");
  ap->add_option("--angle", opts.angle, "angle bound for a file chain");

  auto* sl2 = app.add_subcommand("ap-sl2", "matrix form vs point form agreement");
  add_common(sl2, opts);
  sl2->add_option("--samples", opts.samples, "random instances to draw");

  auto* selftest = app.add_subcommand("geom-selftest", "geometry property sweeps");
  add_common(selftest, opts);
  add_model(selftest, opts);
  selftest->add_option("--samples", opts.samples, "trials per suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  opts.subcommand = app.get_subcommands().front()->get_name();
  try {
    return run(resolve(opts));
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
