#pragma once

// Command-line front end. run() is the whole program minus process setup so
// that tests can drive it with argument vectors and string streams.
//
// Exit codes: 0 success, 1 verification violation, 2 usage error, 3 any
// other failure (including I/O).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pinchflow/pinchflow.hpp"

namespace pinchflow::cli {

inline constexpr const char* kVersion = "1.0.0";

enum ExitCode : int { kSuccess = 0, kViolation = 1, kUsage = 2, kFailure = 3 };

/// "kind:key=value,key=value" split into the kind and an ordered key map.
struct SpecString {
  std::string kind;
  std::map<std::string, std::string> values;
};

inline SpecString parse_spec_string(const std::string& text) {
  SpecString out;
  const auto colon = text.find(':');
  out.kind = text.substr(0, colon);
  if (out.kind.empty()) throw Error(ErrorCode::BadSpec, "missing kind in '" + text + "'");
  if (colon == std::string::npos) return out;
  std::stringstream rest(text.substr(colon + 1));
  std::string item;
  while (std::getline(rest, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw Error(ErrorCode::BadSpec, "expected key=value, got '" + item + "'");
    if (!out.values.emplace(item.substr(0, eq), item.substr(eq + 1)).second)
      throw Error(ErrorCode::BadSpec, "duplicate key '" + item.substr(0, eq) + "'");
  }
  return out;
}

namespace detail {

inline double to_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double x = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return x;
  } catch (const std::exception&) {
    throw Error(ErrorCode::BadSpec, "'" + key + "' is not a number: '" + value + "'");
  }
}

inline int to_int(const std::string& key, const std::string& value) {
  const double x = to_double(key, value);
  if (x != std::floor(x) || std::abs(x) > 1e9) throw Error(ErrorCode::BadSpec, "'" + key + "' must be an integer");
  return static_cast<int>(x);
}

inline void check_keys(const SpecString& s, const std::vector<std::string>& allowed) {
  for (const auto& [key, value] : s.values)
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw Error(ErrorCode::BadSpec, "unknown key '" + key + "' for " + s.kind);
}

inline std::string get(const SpecString& s, const std::string& key, const std::string& fallback) {
  const auto it = s.values.find(key);
  return it == s.values.end() ? fallback : it->second;
}

}  // namespace detail

/// sphere:n=5,k=1,r0=1 | cylinder:n=8,k=1,m=1,r0=1 | product:p=1,q=7,k=2,a0=10,b0=1
inline ExactSpec parse_exact_spec(const std::string& text) {
  using detail::get;
  const auto s = parse_spec_string(text);
  ExactSpec spec;
  if (s.kind == "sphere") {
    detail::check_keys(s, {"n", "k", "r0"});
    spec.kind = ExactKind::Sphere;
    spec.dims = {detail::to_int("n", get(s, "n", "5")), detail::to_int("k", get(s, "k", "1"))};
    spec.r0 = detail::to_double("r0", get(s, "r0", "1"));
  } else if (s.kind == "cylinder") {
    detail::check_keys(s, {"n", "k", "m", "r0"});
    spec.kind = ExactKind::Cylinder;
    spec.dims = {detail::to_int("n", get(s, "n", "8")), detail::to_int("k", get(s, "k", "1"))};
    spec.m = detail::to_int("m", get(s, "m", "1"));
    spec.r0 = detail::to_double("r0", get(s, "r0", "1"));
  } else if (s.kind == "product") {
    detail::check_keys(s, {"n", "k", "p", "q", "a0", "b0"});
    spec.kind = ExactKind::Product;
    spec.p = detail::to_int("p", get(s, "p", "1"));
    spec.q = detail::to_int("q", get(s, "q", "7"));
    spec.dims = {detail::to_int("n", get(s, "n", std::to_string(spec.p + spec.q))),
                 detail::to_int("k", get(s, "k", "2"))};
    spec.a0 = detail::to_double("a0", get(s, "a0", "10"));
    spec.b0 = detail::to_double("b0", get(s, "b0", "1"));
  } else {
    throw Error(ErrorCode::BadSpec, "unknown model '" + s.kind + "' (sphere, cylinder, product)");
  }
  validate(spec);
  return spec;
}

/// torus:r1=1,r2=2,N=64,k=2 | revtorus:R=3,r=1,N=64,k=1
inline GridImmersion parse_grid_spec(const std::string& text) {
  using detail::get;
  const auto s = parse_spec_string(text);
  if (s.kind == "torus") {
    detail::check_keys(s, {"r1", "r2", "N", "k"});
    return build_torus(detail::to_double("r1", get(s, "r1", "1")), detail::to_double("r2", get(s, "r2", "2")),
                       detail::to_int("N", get(s, "N", "64")), detail::to_int("k", get(s, "k", "2")));
  }
  if (s.kind == "revtorus") {
    detail::check_keys(s, {"R", "r", "N", "k"});
    return build_revolution_torus(detail::to_double("R", get(s, "R", "3")), detail::to_double("r", get(s, "r", "1")),
                                  detail::to_int("N", get(s, "N", "64")), detail::to_int("k", get(s, "k", "1")));
  }
  throw Error(ErrorCode::BadSpec, "unknown grid '" + s.kind + "' (torus, revtorus)");
}

/// "a:b:step" (inclusive of b up to rounding) or "geometric:count" (approaching
/// the singular time T).
inline std::vector<double> parse_time_grid(const std::string& text, double T) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ':')) parts.push_back(part);
  if (parts.size() == 2 && parts[0] == "geometric") {
    const int count = detail::to_int("count", parts[1]);
    if (count < 2) throw Error(ErrorCode::UsageError, "geometric time grid needs at least 2 samples");
    return geometric_times(T, static_cast<std::size_t>(count));
  }
  if (parts.size() != 3) throw Error(ErrorCode::UsageError, "time grid must be a:b:step or geometric:count");
  const double a = detail::to_double("start", parts[0]);
  const double b = detail::to_double("stop", parts[1]);
  const double step = detail::to_double("step", parts[2]);
  if (!(step > 0.0) || !(b >= a)) throw Error(ErrorCode::UsageError, "time grid needs step > 0 and stop >= start");
  const auto count = static_cast<std::size_t>(std::floor((b - a) / step * (1.0 + 1e-12) + 1e-9)) + 1;
  std::vector<double> times;
  for (std::size_t i = 0; i < count; ++i) times.push_back(a + static_cast<double>(i) * step);
  return times;
}

/// Comma-separated times or a:b:step.
inline std::vector<double> parse_schedule(const std::string& text) {
  if (std::count(text.begin(), text.end(), ':') == 2) return parse_time_grid(text, 0.0);
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(detail::to_double("schedule", item));
  return out;
}

/// key = value lines; '#' starts a comment. Keys are long flag names without
/// the leading dashes.
inline std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read config file '" + path + "'");
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  int number = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::UsageError, path + ":" + std::to_string(number) + ": expected key=value");
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

inline std::string timestamp_line(const std::string& command) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << "# pinchflow " << kVersion << ' ' << command << " generated " << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

namespace detail {

/// Pinching parameters shared by several commands. Unset values get defaults
/// that are admissible for the dimension in use.
struct ParamOptions {
  std::optional<double> c, a, eps0, eps, Lambda, sigma, eta, Lmax;

  void add(CLI::App* app) {
    app->add_option("--c", c, "pinching constant c");
    app->add_option("--a", a, "pinching offset a");
    app->add_option("--eps0", eps0, "epsilon_0");
    app->add_option("--eps", eps, "epsilon in f");
    app->add_option("--Lambda", Lambda, "Lambda in f");
    app->add_option("--sigma", sigma, "sigma in f_sigma");
    app->add_option("--eta", eta, "eta in the codimension ratio");
    app->add_option("--Lmax", Lmax, "L_max");
  }

  PinchingParams resolve(int n) const {
    PinchingParams p;
    if (eps0) p.eps0 = *eps0;
    else if (p.eps0 >= 1.0 / (3.0 * n)) p.eps0 = 1.0 / (6.0 * n);
    if (c) p.c = *c;
    else if (!(p.c > 1.0 / n && p.c <= 4.0 / (3.0 * n) - p.eps0)) p.c = 0.5 * (1.0 / n + 4.0 / (3.0 * n) - p.eps0);
    if (a) p.a = *a;
    if (eps) p.eps = *eps;
    if (Lambda) p.Lambda = *Lambda;
    if (sigma) p.sigma = *sigma;
    if (eta) p.eta = *eta;
    if (Lmax) p.Lmax = *Lmax;
    validate(p, n);
    return p;
  }
};

inline nlohmann::json params_json(const PinchingParams& p) {
  return {{"c", p.c},         {"a", p.a},         {"eps0", p.eps0}, {"eps", p.eps},
          {"Lambda", p.Lambda}, {"sigma", p.sigma}, {"eta", p.eta},   {"Lmax", p.Lmax}};
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create directory '" + path.parent_path().string() + "'");
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
  return out;
}

inline void make_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    throw Error(ErrorCode::IoError, "cannot create directory '" + dir.string() + "'");
}

inline void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw Error(ErrorCode::IoError, "write to '" + path.string() + "' failed");
}

/// Rows of a CSV with a single header line; '#' lines are skipped.
inline std::map<std::string, std::vector<double>> read_columns(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read '" + path.string() + "'");
  std::vector<std::string> names;
  std::map<std::string, std::vector<double>> cols;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (names.empty()) {
      names = fields;
      continue;
    }
    for (std::size_t i = 0; i < names.size() && i < fields.size(); ++i)
      cols[names[i]].push_back(fields[i].empty() ? std::nan("") : std::stod(fields[i]));
  }
  return cols;
}

inline std::string format_index(std::size_t i) {
  std::ostringstream os;
  os << std::setw(4) << std::setfill('0') << i;
  return os.str();
}

inline void print_classification(std::ostream& os, const TypeClassification& c) {
  os << "verdict=" << to_string(c.verdict) << " T_est=" << csv::format(c.T_est)
     << " C=" << (c.C ? csv::format(*c.C) : std::string("none")) << " drift=" << csv::format(c.drift)
     << " growth=" << csv::format(c.growth) << " final_series=" << csv::format(c.series.back()) << '\n';
}

}  // namespace detail

/// Runs one command. `args` excludes the program name.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Pinching estimates and mean curvature flow experiments", "pinchflow"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  bool no_timestamp = false;
  std::string config_path;
  auto add_common = [&](CLI::App* sub) {
    sub->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    sub->add_flag("--no-timestamp", no_timestamp, "omit the timestamped header line and timings");
    sub->add_option("--config", config_path, "key=value file; command-line flags take precedence");
  };

  // verify
  auto* verify = app.add_subcommand("verify", "check a pointwise inequality or identity on seeded samples");
  add_common(verify);
  std::string property = "all";
  int vn = 5, vk = 2;
  std::uint64_t samples = 1000, seed = 1;
  std::optional<double> tol;
  double scale_lo = 0.5, scale_hi = 50.0;
  std::string verify_out;
  detail::ParamOptions vparams;
  verify->add_option("--property", property, "property id or 'all'");
  verify->add_option("--n", vn, "dimension n");
  verify->add_option("--k", vk, "codimension k");
  verify->add_option("--samples", samples, "number of samples (per n for coefficient_signs)");
  verify->add_option("--seed", seed, "sampler seed");
  verify->add_option("--tol", tol, "violation tolerance on the normalised margin");
  verify->add_option("--scale-lo", scale_lo, "lower end of the |H| sampling range");
  verify->add_option("--scale-hi", scale_hi, "upper end of the |H| sampling range");
  verify->add_option("--out", verify_out, "JSON report file (default: standard output)");
  vparams.add(verify);

  // exact
  auto* exact = app.add_subcommand("exact", "sample a shrinking model solution");
  add_common(exact);
  std::string exact_spec = "sphere:n=5,k=1,r0=1", method = "closed_form", t_grid = "geometric:200", exact_out;
  double exact_dt = 1e-5;
  bool classify = false;
  detail::ParamOptions eparams;
  exact->add_option("--spec", exact_spec, "model spec, e.g. sphere:n=5,k=1,r0=1");
  exact->add_option("--method", method, "closed_form or rk4")->check(CLI::IsMember({"closed_form", "rk4"}));
  exact->add_option("--dt", exact_dt, "RK4 step bound");
  exact->add_option("--t-grid", t_grid, "a:b:step or geometric:count");
  exact->add_option("--out", exact_out, "CSV file (default: standard output)");
  exact->add_flag("--classify", classify, "print the singularity type verdict");
  eparams.add(exact);

  // evolve and rescale share the grid controls
  std::string grid_spec = "torus:r1=1,r2=2,N=64,k=2";
  GridControls controls;
  auto add_grid = [&](CLI::App* sub) {
    sub->add_option("--grid", grid_spec, "initial surface, e.g. torus:r1=1,r2=2,N=64,k=2");
    sub->add_option("--cfl", controls.cfl, "time step factor");
    sub->add_option("--t-end", controls.t_end, "final time");
    sub->add_option("--stop-maxA2", controls.stop_maxA2, "stop once max |A|^2 exceeds this");
    sub->add_option("--order", controls.order, "finite difference order (2, 4 or 6)");
    sub->add_option("--snapshot-every", controls.snapshot_every, "snapshot time cadence (0: off)");
    sub->add_option("--snapshot-growth", controls.snapshot_growth, "snapshot when max |A|^2 grows by this factor");
  };
  auto* evolve = app.add_subcommand("evolve", "run mean curvature flow on a periodic grid");
  add_common(evolve);
  add_grid(evolve);
  std::string evolve_out;
  bool integrals = false;
  double p_exp = 2.0, k_level = 0.0;
  detail::ParamOptions gparams;
  evolve->add_option("--out", evolve_out, "output directory")->required();
  evolve->add_flag("--integrals", integrals, "write f_sigma integrals per snapshot");
  evolve->add_option("--p", p_exp, "exponent p of the L^p integral");
  evolve->add_option("--k-level", k_level, "truncation level k");
  gparams.add(evolve);

  auto* rescale = app.add_subcommand("rescale", "build the blow-up rescaling sequence");
  add_common(rescale);
  add_grid(rescale);
  std::string rescale_in, rescale_out, schedule_text;
  rescale->add_option("--in", rescale_in, "directory written by evolve (otherwise --grid is evolved)");
  rescale->add_option("--schedule", schedule_text, "times t~_j: comma list or a:b:step")->required();
  rescale->add_option("--out", rescale_out, "output directory")->required();

  auto* report = app.add_subcommand("report", "summarise a verify report or an evolve directory");
  add_common(report);
  std::string report_in, report_out;
  report->add_option("--in", report_in, "verify JSON report or evolve directory")->required();
  report->add_option("--out", report_out, "text file (default: standard output)");

  // splice config entries in front of the command-line flags
  std::vector<std::string> argv = args;
  try {
    for (std::size_t i = 0; i < argv.size(); ++i) {
      std::string path;
      if (argv[i] == "--config" && i + 1 < argv.size()) path = argv[i + 1];
      else if (argv[i].rfind("--config=", 0) == 0) path = argv[i].substr(9);
      if (path.empty()) continue;
      std::size_t command_at = 0;
      while (command_at < argv.size() && argv[command_at].rfind("-", 0) == 0) ++command_at;
      if (command_at == argv.size()) break;
      CLI::App* sub = app.get_subcommand_no_throw(argv[command_at]);
      if (!sub) break;
      std::vector<std::string> injected;
      for (const auto& [key, value] : read_config_file(path)) {
        if (key == "config") throw Error(ErrorCode::UsageError, "config files cannot include other config files");
        const CLI::Option* opt = sub->get_option_no_throw("--" + key);
        if (!opt) throw Error(ErrorCode::UsageError, "unknown config key '" + key + "'");
        if (opt->get_expected_max() == 0) {
          if (value == "true" || value == "1") injected.push_back("--" + key);
          else if (value != "false" && value != "0")
            throw Error(ErrorCode::UsageError, "config key '" + key + "' expects true or false");
        } else {
          injected.push_back("--" + key + "=" + value);
        }
      }
      argv.insert(argv.begin() + static_cast<std::ptrdiff_t>(command_at) + 1, injected.begin(), injected.end());
      break;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::IoError ? kFailure : kUsage;
  }

  try {
    std::vector<std::string> reversed(argv.rbegin(), argv.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    if (verify->parsed()) {
      SampleSpec spec;
      spec.dims = {vn, vk};
      spec.count = samples;
      spec.seed = seed;
      spec.scale_lo = scale_lo;
      spec.scale_hi = scale_hi;
      spec.params = vparams.resolve(vn);
      std::vector<std::string> ids;
      if (property == "all")
        for (auto id : kPropertyIds) ids.emplace_back(id);
      else
        ids.push_back(property);
      std::vector<VerificationReport> reports;
      for (const auto& id : ids) reports.push_back(verify_property(id, spec, tol));
      auto doc = report_document(reports, !no_timestamp);
      if (!no_timestamp) doc["generated"] = timestamp_line("verify").substr(2);
      bool all_passed = true;
      for (const auto& r : reports) {
        all_passed = all_passed && r.passed();
        err << r.property_id << ": " << (r.passed() ? "pass" : "FAIL") << " samples=" << r.samples
            << " worst_margin=" << csv::format(r.worst_margin) << " violations=" << r.violation_count << '\n';
      }
      if (verify_out.empty()) {
        out << doc.dump(2) << '\n';
      } else {
        auto file = detail::open_output(verify_out);
        file << doc.dump(2) << '\n';
        detail::finish(file, verify_out);
      }
      return all_passed ? kSuccess : kViolation;
    }

    if (exact->parsed()) {
      const ExactSpec spec = parse_exact_spec(exact_spec);
      const PinchingParams params = eparams.resolve(spec.dims.n);
      const auto times = parse_time_grid(t_grid, singular_time(spec));
      const auto traj = evolve_exact(spec, times, method == "rk4" ? ExactMethod::RK4 : ExactMethod::ClosedForm,
                                     exact_dt);
      const auto diag = flow_diagnostics(traj, params);
      auto emit = [&](std::ostream& os) {
        if (!no_timestamp) os << timestamp_line("exact") << '\n';
        write_csv(os, spec, diag);
      };
      if (exact_out.empty()) {
        emit(out);
      } else {
        auto file = detail::open_output(exact_out);
        emit(file);
        detail::finish(file, exact_out);
      }
      if (classify) detail::print_classification(exact_out.empty() ? err : out, classify_type(history(traj)));
      return kSuccess;
    }

    if (evolve->parsed()) {
      const GridImmersion grid = parse_grid_spec(grid_spec);
      const std::filesystem::path dir(evolve_out);
      detail::make_directory(dir / "snapshots");
      std::optional<PinchingParams> params;
      if (integrals) params = gparams.resolve(2);
      const auto traj = evolve_grid(grid, controls);

      auto diag_file = detail::open_output(dir / "diagnostics.csv");
      if (!no_timestamp) diag_file << timestamp_line("evolve") << '\n';
      write_diagnostics_csv(diag_file, traj);
      detail::finish(diag_file, dir / "diagnostics.csv");

      for (std::size_t s = 0; s < traj.snapshots.size(); ++s) {
        const auto path = dir / "snapshots" / ("snapshot_" + detail::format_index(s) + ".csv");
        auto file = detail::open_output(path);
        write_snapshot_csv(file, traj.snapshots[s].grid);
        detail::finish(file, path);
      }

      if (params) {
        const auto path = dir / "integrals.csv";
        auto file = detail::open_output(path);
        if (!no_timestamp) file << timestamp_line("evolve") << '\n';
        csv::write_row(file, {"t", "Lp", "supp_measure", "undefined_points", "max_f_sigma", "poincare_lhs",
                              "poincare_rhs1", "poincare_rhs2", "poincare_rhs3", "fitted_C", "A_k"});
        double acc = 0.0, prev_t = 0.0, prev_m = 0.0;
        for (std::size_t s = 0; s < traj.snapshots.size(); ++s) {
          const auto& snap = traj.snapshots[s];
          const auto d = integral_diagnostics(geometry(snap.grid, controls.order), *params, p_exp, k_level);
          if (s > 0) acc += 0.5 * (d.supp_measure + prev_m) * (snap.grid.t - prev_t);
          prev_t = snap.grid.t;
          prev_m = d.supp_measure;
          csv::write_row(file, {csv::format(snap.grid.t), csv::format(d.Lp), csv::format(d.supp_measure),
                                std::to_string(d.undefined_points), csv::format(d.max_f_sigma),
                                csv::format(d.poincare_lhs), csv::format(d.poincare_rhs_terms[0]),
                                csv::format(d.poincare_rhs_terms[1]), csv::format(d.poincare_rhs_terms[2]),
                                csv::format(d.fitted_C), csv::format(acc)});
        }
        detail::finish(file, path);
      }

      const auto summary_path = dir / "summary.txt";
      auto summary = detail::open_output(summary_path);
      summary << "stop=" << to_string(traj.stop) << " steps=" << traj.records.size() - 1
              << " t_final=" << csv::format(traj.final_state.t) << " snapshots=" << traj.snapshots.size() << '\n';
      if (traj.stop == StopReason::CurvatureThreshold && traj.records.size() >= kMinClassifySamples)
        detail::print_classification(summary, classify_type(history(traj)));
      detail::finish(summary, summary_path);
      return kSuccess;
    }

    if (rescale->parsed()) {
      const auto schedule = parse_schedule(schedule_text);
      GridTrajectory traj;
      if (!rescale_in.empty()) {
        const auto snap_dir = std::filesystem::path(rescale_in) / "snapshots";
        if (!std::filesystem::is_directory(snap_dir))
          throw Error(ErrorCode::IoError, "no snapshots directory in '" + rescale_in + "'");
        std::vector<std::filesystem::path> files;
        for (const auto& entry : std::filesystem::directory_iterator(snap_dir))
          if (entry.path().extension() == ".csv") files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        traj.order = controls.order;
        for (const auto& path : files) {
          std::ifstream in(path);
          if (!in) throw Error(ErrorCode::IoError, "cannot read '" + path.string() + "'");
          auto grid = read_snapshot_csv(in);
          const auto field = flow_field(grid, controls.order);
          traj.snapshots.push_back({std::move(grid), field.H2, field.max_A2});
        }
        if (traj.snapshots.empty()) throw Error(ErrorCode::IoError, "no snapshots in '" + snap_dir.string() + "'");
      } else {
        traj = evolve_grid(parse_grid_spec(grid_spec), controls);
      }
      const auto seq = rescale_sequence(traj, schedule);
      const std::filesystem::path dir(rescale_out);
      detail::make_directory(dir);
      auto index_file = detail::open_output(dir / "rescale.csv");
      if (!no_timestamp) index_file << timestamp_line("rescale") << '\n';
      csv::write_row(index_file, {"j", "t_tilde", "t_j", "point", "L", "center_H", "window_lo", "window_hi"});
      for (const auto& r : seq) {
        csv::write_row(index_file, {std::to_string(r.j), csv::format(r.t_tilde), csv::format(r.t_j),
                                    std::to_string(r.point), csv::format(r.L), csv::format(r.center_H),
                                    csv::format(r.window_lo), csv::format(r.window_hi)});
        const auto path = dir / ("rescaled_" + detail::format_index(r.j) + ".csv");
        auto file = detail::open_output(path);
        write_rescale_csv(file, r);
        detail::finish(file, path);
      }
      detail::finish(index_file, dir / "rescale.csv");
      return kSuccess;
    }

    if (report->parsed()) {
      std::ostringstream text;
      int status = kSuccess;
      const std::filesystem::path in(report_in);
      if (std::filesystem::is_directory(in)) {
        const auto cols = detail::read_columns(in / "diagnostics.csv");
        if (!cols.count("t") || !cols.count("max_A2"))
          throw Error(ErrorCode::InvalidData, "diagnostics.csv lacks t or max_A2");
        CurvatureHistory h{cols.at("t"), cols.at("max_A2")};
        text << "samples=" << h.t.size() << " t_final=" << csv::format(h.t.back())
             << " max_A2_final=" << csv::format(h.max_A2.back()) << '\n';
        detail::print_classification(text, classify_type(h));
      } else {
        std::ifstream file(in);
        if (!file) throw Error(ErrorCode::IoError, "cannot read '" + report_in + "'");
        nlohmann::json doc;
        try {
          doc = nlohmann::json::parse(file);
        } catch (const nlohmann::json::exception& e) {
          throw Error(ErrorCode::InvalidData, std::string("not a JSON report: ") + e.what());
        }
        if (!doc.contains("reports")) throw Error(ErrorCode::InvalidData, "not a verification report");
        text << std::left << std::setw(26) << "property" << std::setw(8) << "result" << std::setw(12) << "samples"
             << std::setw(26) << "worst_margin" << "violations\n";
        for (const auto& r : doc["reports"]) {
          const bool passed = r.at("passed").get<bool>();
          if (!passed) status = kViolation;
          text << std::setw(26) << r.at("property_id").get<std::string>() << std::setw(8)
               << (passed ? "pass" : "FAIL") << std::setw(12) << r.at("samples").get<std::uint64_t>()
               << std::setw(26) << csv::format(r.at("worst_margin").get<double>())
               << r.at("violation_count").get<std::uint64_t>() << '\n';
        }
      }
      if (report_out.empty()) {
        out << text.str();
      } else {
        auto file = detail::open_output(report_out);
        file << text.str();
        detail::finish(file, report_out);
      }
      return status;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    switch (e.code()) {
      case ErrorCode::UsageError:
      case ErrorCode::BadSpec:
      case ErrorCode::InvalidParams:
      case ErrorCode::UnknownProperty:
      case ErrorCode::BadResolution:
      case ErrorCode::DimensionTooSmall:
      case ErrorCode::EmptySchedule: return kUsage;
      default: return kFailure;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kUsage;
}

}  // namespace pinchflow::cli
