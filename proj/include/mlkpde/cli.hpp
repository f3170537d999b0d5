#pragma once

// Command-line front end. Every subcommand resolves a RunConfig from
// defaults, an optional JSON file (--config) and flags, in that order, and
// echoes the resolved config into <out>/<name>.meta.json.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mlkpde/approximation.hpp"
#include "mlkpde/diagnostics.hpp"
#include "mlkpde/parallel.hpp"
#include "mlkpde/report.hpp"
#include "mlkpde/serialization.hpp"

namespace mlkpde {

struct RunConfig {
  std::string preset = "easy";
  std::optional<double> C;
  std::optional<double> theta;
  std::size_t s = 16;
  int alpha = 1;
  double lambda = 0.6;
  std::size_t n_max = 0;  // 0: smallest size the command needs
  std::string zfile;
  std::string out = "out";
  int threads = 0;
  bool snap_to_divisors = true;

  std::vector<int> m_list{2, 3, 4, 5};
  int m_ref = 6;
  std::size_t n_quad = 256;

  std::vector<std::size_t> s_list{4, 8, 16};
  std::size_t s_ref = 32;
  int m = 5;

  std::vector<std::size_t> n_list{16, 32, 64, 128, 256, 512, 1024};
  int m_star = 5;
  std::size_t R = 10;

  int m0 = 3;
  std::size_t L = 3;
  std::vector<std::size_t> level_n_list{16, 32, 64, 128, 256};

  std::vector<std::pair<int, std::size_t>> pairings;  // (m, N); empty: preset default
  std::vector<std::pair<int, std::size_t>> levels;    // (m_l, N_l) for build-ml

  double epsilon = 0.0;
  double h0 = 0.125;
  double beta = 2.0;
  double mu = 1.0;
  double d = 2.0;

  std::string model = "out/ml.bin";
  std::vector<double> x{0.5, 0.5};
  std::vector<double> y;
  std::string y_file;
};

inline void to_json(nlohmann::json& j, const RunConfig& c) {
  j = nlohmann::json{{"preset", c.preset},
                     {"C", c.C ? nlohmann::json(*c.C) : nlohmann::json(nullptr)},
                     {"theta", c.theta ? nlohmann::json(*c.theta) : nlohmann::json(nullptr)},
                     {"s", c.s},
                     {"alpha", c.alpha},
                     {"lambda", c.lambda},
                     {"n_max", c.n_max},
                     {"zfile", c.zfile},
                     {"out", c.out},
                     {"threads", c.threads},
                     {"snap_to_divisors", c.snap_to_divisors},
                     {"m_list", c.m_list},
                     {"m_ref", c.m_ref},
                     {"n_quad", c.n_quad},
                     {"s_list", c.s_list},
                     {"s_ref", c.s_ref},
                     {"m", c.m},
                     {"n_list", c.n_list},
                     {"m_star", c.m_star},
                     {"R", c.R},
                     {"m0", c.m0},
                     {"L", c.L},
                     {"level_n_list", c.level_n_list},
                     {"pairings", c.pairings},
                     {"levels", c.levels},
                     {"epsilon", c.epsilon},
                     {"h0", c.h0},
                     {"beta", c.beta},
                     {"mu", c.mu},
                     {"d", c.d},
                     {"model", c.model},
                     {"x", c.x},
                     {"y", c.y},
                     {"y_file", c.y_file}};
}

/// Reads known fields; unknown keys (e.g. "fits" in a metadata echo) are ignored.
inline void from_json(const nlohmann::json& j, RunConfig& c) {
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key) && !j.at(key).is_null()) j.at(key).get_to(field);
  };
  get("preset", c.preset);
  if (j.contains("C")) c.C = j.at("C").is_null() ? std::nullopt : std::optional<double>(j.at("C").get<double>());
  if (j.contains("theta"))
    c.theta = j.at("theta").is_null() ? std::nullopt : std::optional<double>(j.at("theta").get<double>());
  get("s", c.s);
  get("alpha", c.alpha);
  get("lambda", c.lambda);
  get("n_max", c.n_max);
  get("zfile", c.zfile);
  get("out", c.out);
  get("threads", c.threads);
  get("snap_to_divisors", c.snap_to_divisors);
  get("m_list", c.m_list);
  get("m_ref", c.m_ref);
  get("n_quad", c.n_quad);
  get("s_list", c.s_list);
  get("s_ref", c.s_ref);
  get("m", c.m);
  get("n_list", c.n_list);
  get("m_star", c.m_star);
  get("R", c.R);
  get("m0", c.m0);
  get("L", c.L);
  get("level_n_list", c.level_n_list);
  get("pairings", c.pairings);
  get("levels", c.levels);
  get("epsilon", c.epsilon);
  get("h0", c.h0);
  get("beta", c.beta);
  get("mu", c.mu);
  get("d", c.d);
  get("model", c.model);
  get("x", c.x);
  get("y", c.y);
  get("y_file", c.y_file);
}

namespace detail {

inline std::vector<std::pair<int, std::size_t>> parse_pairs(const std::vector<std::string>& items) {
  std::vector<std::pair<int, std::size_t>> out;
  for (const auto& item : items) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw ParameterError("expected m:N, got '" + item + "'");
    try {
      out.emplace_back(std::stoi(item.substr(0, colon)), static_cast<std::size_t>(std::stoull(item.substr(colon + 1))));
    } catch (const std::logic_error&) {
      throw ParameterError("expected m:N, got '" + item + "'");
    }
  }
  return out;
}

inline std::optional<std::string> find_config_path(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc) return std::string(argv[i + 1]);
    if (arg.rfind("--config=", 0) == 0) return arg.substr(9);
  }
  return std::nullopt;
}

inline CoefficientModel model_for(const RunConfig& c, std::size_t s) {
  const auto preset = preset_by_name(c.preset);
  return {s, c.C.value_or(preset.scale), c.theta.value_or(preset.theta)};
}

inline Problem problem_for(const RunConfig& c, std::size_t s, std::size_t needed_n) {
  std::optional<EmbeddedLattice> lattice;
  if (!c.zfile.empty()) lattice = read_generating_vector(c.zfile);
  std::size_t n_max = c.n_max == 0 ? std::max<std::size_t>(needed_n, 4) : c.n_max;
  if (lattice) n_max = lattice->n_max();
  if (n_max < needed_n) throw ParameterError("n_max is smaller than the largest point count requested");
  return make_problem(c.preset, model_for(c, s), n_max, c.alpha, c.lambda, lattice);
}

inline std::string stem(const RunConfig& c, const std::string& name) {
  std::filesystem::create_directories(c.out);
  return (std::filesystem::path(c.out) / (name + "_" + c.preset)).string();
}

inline std::string fits_summary(const StudyResult& r) {
  std::ostringstream out;
  bool first = true;
  for (const auto& [k, v] : r.fits) {
    if (k.rfind("decay_", 0) == 0 || k.find("intercept") != std::string::npos) continue;
    out << (first ? "" : " ") << k << "=" << format_double(v);
    first = false;
  }
  return out.str();
}

inline std::vector<Pairing> pairings_for(const RunConfig& c) {
  if (c.pairings.empty()) return default_pairings(c.preset);
  std::vector<Pairing> out;
  for (const auto& [m, n] : c.pairings) out.push_back({m, n});
  return out;
}

}  // namespace detail

/// Runs one subcommand; returns 0 on success, 2 on configuration errors,
/// 1 on numerical failures.
inline int run_cli(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  RunConfig config;
  try {
    if (const auto path = detail::find_config_path(argc, argv)) {
      std::ifstream in(*path);
      if (!in) throw ParameterError("cannot open config file " + *path);
      config = nlohmann::json::parse(in).get<RunConfig>();
    }
  } catch (const std::exception& e) {
    err << "configuration error: " << e.what() << '\n';
    return 2;
  }

  CLI::App app{"Lattice-based single- and multilevel kernel approximation for parametric elliptic PDEs"};
  app.require_subcommand(1);
  std::string config_path;
  double c_flag = 0.0, theta_flag = 0.0;
  std::vector<std::string> pairing_items, level_items;
  app.add_option("--config", config_path, "JSON run configuration (flags override its values)");
  auto* preset_opt = app.add_option("--preset", config.preset, "easy | hard")->check(CLI::IsMember({"easy", "hard"}));
  (void)preset_opt;
  auto* c_opt = app.add_option("--C", c_flag, "coefficient scaling C (overrides preset)");
  auto* theta_opt = app.add_option("--theta", theta_flag, "coefficient decay theta (overrides preset)");
  app.add_option("--s", config.s, "truncation dimension");
  app.add_option("--alpha", config.alpha, "kernel smoothness (1..3)");
  app.add_option("--lambda", config.lambda, "weight parameter lambda");
  app.add_option("--n-max", config.n_max, "lattice size (power of two)");
  app.add_option("--zfile", config.zfile, "generating vector file (N_max, s, z_1..z_s)");
  app.add_option("--out", config.out, "output directory");
  app.add_option("--threads", config.threads, "worker threads (fallback: MLKPDE_THREADS)");
  app.add_option("--snap-to-divisors", config.snap_to_divisors, "round planned N_l up to powers of two");
  app.fallthrough();

  auto* cbc = app.add_subcommand("cbc", "construct a lattice generating vector");
  auto* weights = app.add_subcommand("weights", "print serendipitous product weights");
  auto* fe = app.add_subcommand("fe-study", "FE error vs mesh width");
  fe->add_option("--m-list", config.m_list);
  fe->add_option("--m-ref", config.m_ref);
  fe->add_option("--n-quad", config.n_quad);
  auto* trunc = app.add_subcommand("trunc-study", "dimension truncation error");
  trunc->add_option("--s-list", config.s_list);
  trunc->add_option("--s-ref", config.s_ref);
  trunc->add_option("--m", config.m);
  trunc->add_option("--n-quad", config.n_quad);
  auto* sl = app.add_subcommand("sl-study", "single-level interpolation error vs N");
  sl->add_option("--n-list", config.n_list);
  sl->add_option("--m-star", config.m_star);
  sl->add_option("--R", config.R);
  auto* level = app.add_subcommand("level-study", "interpolation error of level differences");
  level->add_option("--m0", config.m0);
  level->add_option("--L", config.L);
  level->add_option("--n-list", config.level_n_list);
  level->add_option("--R", config.R);
  auto* cost = app.add_subcommand("cost-study", "single-level vs multilevel cost against error");
  cost->add_option("--pairings", pairing_items, "m:N entries ascending in m");
  cost->add_option("--R", config.R);
  cost->add_option("--m-ref", config.m_ref);
  auto* build = app.add_subcommand("build-ml", "build and save a multilevel approximation");
  build->add_option("--levels", level_items, "m:N per level, level 0 first");
  build->add_option("--epsilon", config.epsilon, "plan levels for this target instead of --levels");
  build->add_option("--h0", config.h0);
  build->add_option("--beta", config.beta);
  build->add_option("--mu", config.mu);
  build->add_option("--d", config.d);
  build->add_option("--model", config.model, "output file");
  auto* eval = app.add_subcommand("evaluate", "evaluate a saved approximation at (x*, y*)");
  eval->add_option("--model", config.model);
  eval->add_option("--x", config.x)->expected(2);
  eval->add_option("--y", config.y);
  eval->add_option("--y-file", config.y_file);
  auto* plan = app.add_subcommand("plan", "level planning for a target error");
  plan->add_option("--epsilon", config.epsilon)->required();
  plan->add_option("--h0", config.h0);
  plan->add_option("--beta", config.beta);
  plan->add_option("--mu", config.mu);
  plan->add_option("--d", config.d);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    err << app.help();
    return 2;
  }
  if (c_opt->count()) config.C = c_flag;
  if (theta_opt->count()) config.theta = theta_flag;
  if (!pairing_items.empty()) {
    try {
      config.pairings = detail::parse_pairs(pairing_items);
    } catch (const ParameterError& e) {
      err << "configuration error: " << e.what() << '\n';
      return 2;
    }
  }
  if (!level_items.empty()) {
    try {
      config.levels = detail::parse_pairs(level_items);
    } catch (const ParameterError& e) {
      err << "configuration error: " << e.what() << '\n';
      return 2;
    }
  }
  int threads = config.threads;
  if (threads <= 0)
    if (const char* env = std::getenv("MLKPDE_THREADS")) threads = std::atoi(env);
  set_thread_count(threads);

  const nlohmann::json echo = config;
  try {
    if (cbc->parsed()) {
      const auto model = detail::model_for(config, config.s);
      const std::size_t n_max = config.n_max == 0 ? 1024 : config.n_max;
      const auto gamma = serendipitous_weights({config.lambda, bbar_sequence(model), config.alpha}, config.s);
      const auto lattice = cbc_construct(n_max, config.s, gamma, config.alpha);
      std::filesystem::create_directories(config.out);
      const auto path = (std::filesystem::path(config.out) /
                         ("lattice_" + config.preset + "_N" + std::to_string(n_max) + "_s" + std::to_string(config.s) +
                          ".txt"))
                            .string();
      write_generating_vector(lattice, path);
      write_text(detail::stem(config, "cbc") + ".meta.json", echo.dump(2) + "\n");
      out << path << '\n';
    } else if (weights->parsed()) {
      const auto model = detail::model_for(config, config.s);
      const auto gamma = serendipitous_weights({config.lambda, bbar_sequence(model), config.alpha}, config.s);
      for (std::size_t j = 0; j < gamma.size(); ++j) out << (j ? " " : "") << format_double(gamma[j]);
      out << '\n';
    } else if (fe->parsed()) {
      const auto problem = detail::problem_for(config, config.s, config.n_quad);
      const auto r = fe_error_study(problem, config.m_list, config.m_ref, config.n_quad);
      const auto path = detail::stem(config, "fe");
      write_study(r, path, echo);
      out << path << ".csv " << detail::fits_summary(r) << '\n';
    } else if (trunc->parsed()) {
      const auto problem = detail::problem_for(config, config.s_ref, config.n_quad);
      const auto r = truncation_study(problem, config.s_list, config.m, config.n_quad);
      const auto path = detail::stem(config, "truncation");
      write_study(r, path, echo);
      out << path << ".csv " << detail::fits_summary(r) << '\n';
    } else if (sl->parsed()) {
      if (config.n_list.empty()) throw ParameterError("empty N list");
      const auto problem =
          detail::problem_for(config, config.s, *std::max_element(config.n_list.begin(), config.n_list.end()));
      const auto r = sl_error_study(problem, config.n_list, config.m_star, config.R);
      const auto path = detail::stem(config, "sl");
      write_study(r, path, echo);
      out << path << ".csv " << detail::fits_summary(r) << '\n';
    } else if (level->parsed()) {
      if (config.level_n_list.empty()) throw ParameterError("empty N list");
      const auto problem = detail::problem_for(
          config, config.s, *std::max_element(config.level_n_list.begin(), config.level_n_list.end()));
      const auto r = level_difference_study(problem, config.m0, config.L, config.level_n_list, config.R);
      const auto path = detail::stem(config, "level");
      write_study(r, path, echo);
      out << path << ".csv " << detail::fits_summary(r) << '\n';
    } else if (cost->parsed()) {
      const auto pairings = detail::pairings_for(config);
      std::size_t needed = 0;
      for (const auto& p : pairings) needed = std::max(needed, p.n);
      const auto problem = detail::problem_for(config, config.s, needed);
      const auto r = cost_comparison_study(problem, pairings, config.R, config.m_ref);
      const auto path = detail::stem(config, "cost");
      write_study(r, path, echo);
      out << path << ".csv " << detail::fits_summary(r) << '\n';
    } else if (build->parsed()) {
      std::vector<LevelSpec> specs;
      if (!config.levels.empty()) {
        for (const auto& [m, n] : config.levels) specs.push_back({n, m});
      } else if (config.epsilon > 0.0) {
        const auto p = plan_levels(config.epsilon, config.h0, config.beta, config.mu, config.d, config.snap_to_divisors);
        const int m0 = static_cast<int>(std::lround(-std::log2(config.h0)));
        if (std::abs(std::exp2(-m0) - config.h0) > 1e-12) throw ParameterError("build-ml: h0 must be a power of 1/2");
        for (std::size_t l = 0; l < p.n.size(); ++l) specs.push_back({p.n[l], m0 + static_cast<int>(l)});
      } else {
        throw ParameterError("build-ml needs --levels or --epsilon");
      }
      const auto problem = detail::problem_for(config, config.s, specs.front().n);
      MLBuildReport report;
      const auto ml = build_multilevel(problem.lattice, specs, problem.kernel, problem.model, &report);
      const auto parent = std::filesystem::path(config.model).parent_path();
      if (!parent.empty()) std::filesystem::create_directories(parent);
      save_approximation(ml, config.model);
      nlohmann::json meta = echo;
      meta["cpu_seconds"] = {{"kernel_column", report.costs.kernel_column},
                             {"coefficient_eval", report.costs.coefficient_eval},
                             {"fe_solve", report.costs.fe_solve},
                             {"fft_solve", report.costs.fft_solve}};
      meta["fe_solves_per_level"] = report.fe_solves;
      write_text(config.model + ".meta.json", meta.dump(2) + "\n");
      out << config.model << '\n';
    } else if (eval->parsed()) {
      const auto ml = load_approximation(config.model);
      std::vector<double> y = config.y;
      if (!config.y_file.empty()) {
        std::ifstream in(config.y_file);
        if (!in) throw ParameterError("cannot open " + config.y_file);
        y.clear();
        for (double v; in >> v;) y.push_back(v);
      }
      if (config.x.size() != 2) throw ParameterError("--x needs two coordinates");
      if (y.size() != ml.kernel.dims())
        throw ParameterError("y* has " + std::to_string(y.size()) + " components, model expects " +
                             std::to_string(ml.kernel.dims()));
      out << format_double(evaluate(ml, config.x[0], config.x[1], y)) << '\n';
    } else if (plan->parsed()) {
      const auto p = plan_levels(config.epsilon, config.h0, config.beta, config.mu, config.d, config.snap_to_divisors);
      out << "L=" << p.max_level << " N=";
      for (std::size_t l = 0; l < p.n.size(); ++l) out << (l ? "," : "") << p.n[l];
      out << '\n';
    }
  } catch (const ParameterError& e) {
    err << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return 1;
  } catch (const nlohmann::json::exception& e) {
    err << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "configuration error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace mlkpde
