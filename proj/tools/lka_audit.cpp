// Copyright 2026 The lka-audit Authors.
// SPDX-License-Identifier: Apache-2.0
//
// lka_audit: command-line front end.
//
// Exit codes: 0 success, 1 input or configuration error, 2 audit violations.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "lka/design_rules.hpp"
#include "lka/deviation_model.hpp"
#include "lka/failure_diagnosis.hpp"
#include "lka/io/json.hpp"
#include "lka/lateral_dynamics.hpp"
#include "lka/readiness/forest.hpp"
#include "lka/readiness/synthetic.hpp"
#include "lka/readiness/table.hpp"
#include "lka/report.hpp"
#include "lka/svg.hpp"
#include "lka/telemetry.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kDefaultSeed = 20240917;

// A flag value plus whether the user actually passed it.
template <class T>
struct Flag {
  T value{};
  CLI::Option* opt = nullptr;
  bool given() const { return opt != nullptr && opt->count() > 0; }
};

struct Common {
  Flag<std::string> config;
  Flag<std::string> out;
  Flag<std::uint64_t> seed;
  Flag<std::vector<std::string>> formats;
};

void add_common(CLI::App* sub, Common& c) {
  c.config.opt = sub->add_option("--config", c.config.value, "JSON config file (fallback: $LKA_AUDIT_CONFIG)");
  c.out.opt = sub->add_option("--out", c.out.value, "output directory");
  c.seed.opt = sub->add_option("--seed", c.seed.value, "random seed");
  c.formats.opt = sub->add_option("--format", c.formats.value, "output formats to write (default: all)")
                      ->check(CLI::IsMember({"json", "csv", "svg", "md"}))
                      ->delimiter(',');
}

// Resolved settings for one subcommand: flag, then the subcommand's config
// section, then the config's top level, then the built-in default.
class Settings {
 public:
  Settings(const Common& common, const std::string& section) : common_(common) {
    std::string path = common.config.value;
    if (!common.config.given()) {
      if (const char* env = std::getenv("LKA_AUDIT_CONFIG"); env && *env) path = env;
    }
    if (!path.empty()) {
      root_ = lka::io::read_json_file(path);
      if (!root_.is_object()) throw lka::ParseError("config '" + path + "' must be a JSON object");
      base_ = fs::path(path).parent_path();
      if (root_.contains(section)) section_ = root_.at(section);
    }
  }

  template <class T>
  T get(const Flag<T>& flag, const char* key, T fallback) const {
    if (flag.given()) return flag.value;
    return lookup(key, std::move(fallback));
  }

  // Config paths are relative to the config file; flag paths to the cwd.
  std::string path(const Flag<std::string>& flag, const char* key) const {
    if (flag.given()) return flag.value;
    const auto p = lookup<std::string>(key, "");
    return resolve(p);
  }

  std::vector<std::string> paths(const Flag<std::vector<std::string>>& flag, const char* key) const {
    if (flag.given()) return flag.value;
    auto v = lookup<std::vector<std::string>>(key, {});
    for (auto& p : v) p = resolve(p);
    return v;
  }

  fs::path out() const { return get(common_.out, "out", std::string("out")); }
  std::uint64_t seed() const { return get(common_.seed, "seed", kDefaultSeed); }

  bool wants(const std::string& format) const {
    const auto f = get(common_.formats, "formats", std::vector<std::string>{});
    return f.empty() || std::find(f.begin(), f.end(), format) != f.end();
  }

  const json& section() const { return section_; }

 private:
  template <class T>
  T lookup(const char* key, T fallback) const {
    for (const json* j : {&section_, &root_}) {
      if (j->is_object() && j->contains(key)) {
        try {
          return j->at(key).get<T>();
        } catch (const json::exception&) {
          throw lka::ParseError(std::string("config key '") + key + "' has the wrong type");
        }
      }
    }
    return fallback;
  }

  std::string resolve(const std::string& p) const {
    if (p.empty() || fs::path(p).is_absolute() || base_.empty()) return p;
    return (base_ / p).string();
  }

  const Common& common_;
  json root_ = json::object();
  json section_ = json::object();
  fs::path base_;
};

void write(const fs::path& dir, const std::string& name, const std::string& content) {
  lka::report::atomic_write(dir / name, content);
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

lka::VehicleCapability capability_or(const std::string& path, lka::VehicleCapability fallback) {
  return path.empty() ? fallback : lka::io::load_capability(path);
}

std::vector<lka::TelemetryLog> load_logs(const std::vector<std::string>& paths) {
  if (paths.empty()) throw lka::ParseError("no telemetry log given (--log)");
  std::vector<lka::TelemetryLog> logs;
  for (const auto& p : paths) {
    try {
      logs.push_back(lka::load_log(p));
    } catch (const lka::ParseError& e) {
      throw lka::ParseError(p + ": " + e.what());
    }
  }
  return logs;
}

// ---------------------------------------------------------------------------

struct AuditArgs {
  Flag<std::string> geometry, capability;
  Flag<double> speed, roll_budget, merge_gap;
};

int cmd_audit(const Common& common, const AuditArgs& a) {
  const Settings s(common, "audit");
  const auto geometry = s.path(a.geometry, "geometry");
  const auto cap_path = s.path(a.capability, "capability");
  if (geometry.empty()) throw lka::ParseError("audit: no geometry file given (--geometry)");
  if (cap_path.empty()) throw lka::ParseError("audit: no capability file given (--capability)");
  const auto profile = lka::load_profile(geometry);
  const auto cap = lka::io::load_capability(cap_path);

  lka::AuditOptions opts;
  opts.roll_budget = s.get(a.roll_budget, "roll_budget", opts.roll_budget);
  opts.merge_gap = s.get(a.merge_gap, "merge_gap", opts.merge_gap);
  const double speed = s.get(a.speed, "speed", 0.0);
  const auto mode = speed > 0.0 ? lka::SpeedMode::constant(speed) : lka::SpeedMode::posted();
  const auto report = lka::audit_profile(cap, profile, mode, opts);

  const auto out = s.out();
  if (s.wants("json")) write(out, "audit.json", dump(lka::io::to_json(report)));
  if (s.wants("md")) write(out, "audit.md", lka::report::audit_markdown(report, cap, opts));
  if (s.wants("csv")) {
    std::ostringstream csv;
    csv << "rule,severity,x_start_m,x_end_m,required,actual,unit\n";
    for (const auto& f : report.findings)
      csv << lka::to_string(f.rule) << ',' << lka::to_string(f.severity) << ',' << fmt("%.6g", f.x_start) << ','
          << fmt("%.6g", f.x_end) << ',' << fmt("%.9g", f.required_value) << ',' << fmt("%.9g", f.actual_value)
          << ',' << f.unit << '\n';
    write(out, "audit.csv", csv.str());
  }
  std::cout << report.profile_name << ": " << report.violations() << " violation(s), "
            << report.findings.size() - report.violations() << " advisory finding(s)\n";
  return report.violations() > 0 ? 2 : 0;
}

// ---------------------------------------------------------------------------

struct AnalyzeArgs {
  Flag<std::vector<std::string>> logs;
  Flag<std::string> capability;
  Flag<double> deviation_threshold, critical_threshold, min_gap;
};

lka::SegmentOptions segment_options(const Settings& s, const AnalyzeArgs& a) {
  lka::SegmentOptions o;
  o.deviation_threshold = s.get(a.deviation_threshold, "deviation_threshold", o.deviation_threshold);
  o.critical_threshold = s.get(a.critical_threshold, "critical_threshold", o.critical_threshold);
  o.min_gap = s.get(a.min_gap, "min_gap", o.min_gap);
  return o;
}

void write_scatter(const Settings& s, const fs::path& out, const std::string& stem,
                   const std::vector<lka::CurvaturePoint>& points, const std::optional<lka::LinearFit>& fit) {
  if (s.wants("csv")) {
    std::ostringstream csv;
    csv << "kappa_inv_m,deviation_m\n";
    for (const auto& p : points) csv << fmt("%.9g", p.kappa) << ',' << fmt("%.9g", p.deviation) << '\n';
    write(out, stem + ".csv", csv.str());
  }
  if (s.wants("svg"))
    write(out, stem + ".svg",
          lka::svg::scatter_with_fit(points, fit,
                                     {"Lane deviation at curve apex", "curvature [1/m]", "lane deviation [m]"}));
}

int cmd_analyze(const Common& common, const AnalyzeArgs& a) {
  const Settings s(common, "analyze");
  const auto log_paths = s.paths(a.logs, "logs");
  const auto logs = load_logs(log_paths);
  const auto cap = capability_or(s.path(a.capability, "capability"), lka::VehicleCapability{});
  const auto seg = segment_options(s, a);

  json episodes_doc = json::array();
  json failures = json::array();
  std::vector<std::pair<lka::FailureLabel, lka::FactorSet>> labeled;
  std::vector<lka::CurvaturePoint> scatter;
  std::size_t next_id = 0;
  for (std::size_t li = 0; li < logs.size(); ++li) {
    const auto& log = logs[li];
    const auto episodes = lka::segment_episodes(log, seg);
    json list = json::array();
    for (const auto& e : episodes) {
      const std::size_t id = next_id++;
      auto je = lka::io::to_json(e);
      je["episode_id"] = id;
      list.push_back(je);
      if (e.kind == lka::EpisodeKind::normal) continue;
      const auto label = lka::diagnose(e, log, cap);
      std::vector<lka::TelemetryRecord> window(log.begin() + static_cast<std::ptrdiff_t>(e.first),
                                               log.begin() + static_cast<std::ptrdiff_t>(e.last));
      auto factors = lka::context_factors(window);
      auto jd = lka::io::diagnosis_json(id, label);
      jd["log"] = log_paths[li];
      jd["kind"] = lka::to_string(e.kind);
      jd["factors"] = std::vector<std::string>(factors.begin(), factors.end());
      failures.push_back(std::move(jd));
      labeled.emplace_back(label, std::move(factors));
    }
    episodes_doc.push_back({{"log", log_paths[li]}, {"episodes", std::move(list)}});
    try {
      const auto pts = lka::apex_dataset(log);
      scatter.insert(scatter.end(), pts.begin(), pts.end());
    } catch (const lka::DomainError&) {
      // No curves in this log; it contributes no scatter points.
    }
  }

  std::optional<lka::LinearFit> fit;
  std::vector<std::string> warnings;
  if (scatter.size() >= 2) {
    try {
      fit = lka::fit_linear(scatter);
    } catch (const lka::DomainError& e) {
      warnings.push_back(e.what());
    }
  } else {
    warnings.push_back("too few apex samples for a deviation fit");
  }
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';

  const auto tally = lka::tally_factors(labeled);
  const auto out = s.out();
  if (s.wants("json")) {
    write(out, "episodes.json", dump(episodes_doc));
    write(out, "diagnoses.json", dump({{"failures", failures}}));
    write(out, "tally.json", dump(lka::io::to_json(tally)));
    json fit_doc = {{"fit", fit ? lka::io::to_json(*fit) : json(nullptr)},
                    {"reference", lka::io::to_json(lka::kFieldFit)},
                    {"warnings", warnings}};
    write(out, "deviation_fit.json", dump(fit_doc));
  }
  if (s.wants("csv")) write(out, "tally.csv", lka::io::tally_csv(tally));
  write_scatter(s, out, "deviation_scatter", scatter, fit);

  std::cout << logs.size() << " log(s), " << next_id << " episode(s), " << failures.size() << " failure(s)\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct CurateArgs {
  AnalyzeArgs analyze;
  Flag<double> ratio;
};

int cmd_curate(const Common& common, const CurateArgs& a) {
  const Settings s(common, "curate");
  const auto log_paths = s.paths(a.analyze.logs, "logs");
  const auto logs = load_logs(log_paths);
  const double ratio = s.get(a.ratio, "normal_ratio", 1.0);
  const auto result = lka::curate_logs(logs, ratio, s.seed(), segment_options(s, a.analyze));
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';

  auto entry = [&](const lka::CuratedEpisode& c) {
    auto j = lka::io::to_json(c.episode);
    j["log"] = log_paths[c.log_index];
    return j;
  };
  json failures = json::array(), normals = json::array();
  for (const auto& c : result.failures) failures.push_back(entry(c));
  for (const auto& c : result.normals) normals.push_back(entry(c));

  const auto out = s.out();
  if (s.wants("json"))
    write(out, "curated.json",
          dump({{"seed", s.seed()},
                {"normal_ratio", ratio},
                {"failures", failures},
                {"normals", normals},
                {"warnings", result.warnings}}));
  if (s.wants("csv")) {
    std::ostringstream csv;
    csv << "set,log,kind,t_start_s,t_end_s,peak_deviation_m,critical\n";
    auto row = [&](const char* set, const lka::CuratedEpisode& c) {
      csv << set << ',' << log_paths[c.log_index] << ',' << lka::to_string(c.episode.kind) << ','
          << fmt("%.6g", c.episode.t_start) << ',' << fmt("%.6g", c.episode.t_end) << ','
          << fmt("%.6g", c.episode.peak_deviation) << ',' << (c.episode.critical ? 1 : 0) << '\n';
    };
    for (const auto& c : result.failures) row("failure", c);
    for (const auto& c : result.normals) row("normal", c);
    write(out, "curated.csv", csv.str());
  }
  std::cout << result.failures.size() << " failure episode(s), " << result.normals.size()
            << " sampled normal episode(s)\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct FitArgs {
  Flag<std::vector<std::string>> logs;
  Flag<std::string> scatter;
};

int cmd_fit(const Common& common, const FitArgs& a) {
  const Settings s(common, "fit");
  const auto scatter_path = s.path(a.scatter, "scatter");
  std::vector<lka::CurvaturePoint> points;
  if (!scatter_path.empty()) {
    const auto table = lka::csv::Table::read_file(scatter_path);
    table.require({"kappa_inv_m", "deviation_m"});
    for (std::size_t i = 0; i < table.size(); ++i) {
      const auto row = table.row(i);
      points.push_back({row.number_at("kappa_inv_m"), row.number_at("deviation_m")});
    }
  } else {
    for (const auto& log : load_logs(s.paths(a.logs, "logs"))) {
      const auto pts = lka::apex_dataset(log);
      points.insert(points.end(), pts.begin(), pts.end());
    }
  }
  const auto fit = lka::fit_linear(points);
  const auto out = s.out();
  if (s.wants("json"))
    write(out, "fit.json", dump({{"fit", lka::io::to_json(fit)}, {"reference", lka::io::to_json(lka::kFieldFit)}}));
  write_scatter(s, out, "fit", points, fit);
  std::cout << "deviation = " << fmt("%.6g", fit.slope) << " * kappa + " << fmt("%.6g", fit.intercept)
            << ", R^2 = " << fmt("%.4f", fit.r_squared) << ", n = " << fit.n << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  Flag<std::string> capability;
  Flag<std::vector<double>> kappas;
  Flag<double> speed, kp, kd, dt;
};

int cmd_simulate(const Common& common, const SimulateArgs& a) {
  const Settings s(common, "simulate");
  const auto cap = capability_or(s.path(a.capability, "capability"), lka::sweep_capability());
  lka::SweepSpec spec;
  spec.kappas = s.get(a.kappas, "kappas", spec.kappas);
  spec.speed = s.get(a.speed, "speed", spec.speed);
  const auto& sec = s.section();
  if (sec.contains("shape")) {
    const auto& sh = sec.at("shape");
    spec.shape.lead_in = sh.value("lead_in", spec.shape.lead_in);
    spec.shape.transition = sh.value("transition", spec.shape.transition);
    spec.shape.arc = sh.value("arc", spec.shape.arc);
    spec.shape.run_out = sh.value("run_out", spec.shape.run_out);
    spec.dx = sh.value("dx", spec.dx);
  }
  const auto gains = lka::ControllerGains::per_unit(cap, s.get(a.kp, "kp", 2.0), s.get(a.kd, "kd", 1.5));
  lka::SimOptions opts;
  opts.dt = s.get(a.dt, "dt", opts.dt);

  const auto sweep = lka::run_sweep(cap, spec, gains, opts);
  std::vector<lka::CurvaturePoint> stable;
  std::vector<std::string> warnings;
  json points = json::array();
  for (std::size_t i = 0; i < sweep.size(); ++i) {
    const auto& p = sweep[i];
    if (p.result.diverged)
      warnings.push_back("kappa " + fmt("%.6g", p.kappa) + ": simulation diverged");
    else
      stable.push_back({p.kappa, p.result.steady_state_deviation});
    points.push_back({{"kappa_inv_m", p.kappa},
                      {"steady_state_deviation_m", p.result.steady_state_deviation},
                      {"max_abs_offset_m", p.max_abs_offset},
                      {"saturated_fraction", p.result.saturated_fraction},
                      {"diverged", p.result.diverged}});
  }
  std::optional<lka::LinearFit> fit;
  try {
    if (stable.size() >= 2) fit = lka::fit_linear(stable);
    else warnings.push_back("fewer than 2 stable sweep points; no fit");
  } catch (const lka::DomainError& e) {
    warnings.push_back(e.what());
  }
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';

  const auto out = s.out();
  if (s.wants("json"))
    write(out, "sweep.json",
          dump({{"capability", lka::io::to_json(cap)},
                {"speed_mps", spec.speed},
                {"gains", {{"kp", gains.kp}, {"kd", gains.kd}}},
                {"dt_s", opts.dt},
                {"points", points},
                {"fit", fit ? lka::io::to_json(*fit) : json(nullptr)},
                {"warnings", warnings}}));
  if (s.wants("csv")) {
    std::ostringstream csv;
    csv << "kappa_inv_m,steady_state_deviation_m,max_abs_offset_m,saturated_fraction,diverged\n";
    for (const auto& p : sweep)
      csv << fmt("%.9g", p.kappa) << ',' << fmt("%.9g", p.result.steady_state_deviation) << ','
          << fmt("%.9g", p.max_abs_offset) << ',' << fmt("%.6f", p.result.saturated_fraction) << ','
          << (p.result.diverged ? 1 : 0) << '\n';
    write(out, "sweep.csv", csv.str());
    for (std::size_t i = 0; i < sweep.size(); ++i) {
      std::ostringstream trace;
      lka::write_trace_csv(trace, sweep[i].result);
      char name[32];
      std::snprintf(name, sizeof name, "trace_%02zu.csv", i);
      write(out, name, trace.str());
    }
  }
  if (s.wants("svg"))
    write(out, "sweep.svg",
          lka::svg::scatter_with_fit(stable, fit,
                                     {"Simulated apex offset", "curvature [1/m]", "steady-state offset [m]"}));
  if (fit)
    std::cout << "sweep fit: slope " << fmt("%.6g", fit->slope) << ", intercept " << fmt("%.6g", fit->intercept)
              << ", R^2 " << fmt("%.4f", fit->r_squared) << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  Flag<std::string> data, generator;
  Flag<std::size_t> n, test_n, trees, max_depth, min_leaf, mtry;
  Flag<double> test_fraction;
};

std::string dependence_csv(const lka::readiness::ReadinessModel& model,
                           const std::vector<lka::readiness::FeatureVector>& background) {
  using namespace lka::readiness;
  std::ostringstream csv;
  csv << "feature,value,p_normal,p_deviation,p_disengagement\n";
  std::vector<double> kappa_grid, speed_grid;
  for (int i = 0; i <= 60; ++i) kappa_grid.push_back(0.00025 * i);
  for (int i = 0; i <= 56; ++i) speed_grid.push_back(10.0 + 0.5 * i);
  for (const auto& [feature, grid] : {std::pair{Feature::kappa, kappa_grid}, std::pair{Feature::speed, speed_grid}})
    for (const auto& pt : partial_dependence(model, feature, grid, background))
      csv << kFeatureNames[static_cast<std::size_t>(feature)] << ',' << fmt("%.6g", pt.value) << ','
          << fmt("%.6f", pt.probabilities[0]) << ',' << fmt("%.6f", pt.probabilities[1]) << ','
          << fmt("%.6f", pt.probabilities[2]) << '\n';
  return csv.str();
}

int cmd_train(const Common& common, const TrainArgs& a) {
  using namespace lka::readiness;
  const Settings s(common, "train");
  lka::Rng master(s.seed());
  const std::uint64_t data_seed = master.next();
  const std::uint64_t forest_seed = master.next();

  Dataset train_set, test_set;
  FeatureSchema schema;
  std::optional<GeneratorConfig> generator;
  const auto data_path = s.path(a.data, "data");
  if (!data_path.empty()) {
    std::ifstream in(data_path);
    if (!in) throw lka::ParseError("cannot open '" + data_path + "'");
    auto all = to_dataset(parse_feature_table(in, schema, true));
    const double frac = s.get(a.test_fraction, "test_fraction", 0.3);
    if (!(frac > 0.0 && frac < 1.0)) throw lka::ParseError("test_fraction must be in (0, 1)");
    lka::Rng rng(data_seed);
    for (std::size_t i = all.size(); i > 1; --i) std::swap(all[i - 1], all[rng.index(i)]);
    const auto n_test = std::max<std::size_t>(1, static_cast<std::size_t>(frac * static_cast<double>(all.size())));
    test_set.assign(all.end() - static_cast<std::ptrdiff_t>(n_test), all.end());
    train_set.assign(all.begin(), all.end() - static_cast<std::ptrdiff_t>(n_test));
  } else {
    const auto gen_path = s.path(a.generator, "generator");
    generator = gen_path.empty() ? GeneratorConfig{} : lka::io::generator_config_from_json(lka::io::read_json_file(gen_path));
    schema = generator->schema();
    const auto n = s.get(a.n, "n", std::size_t{5000});
    const auto n_test = s.get(a.test_n, "test_n", std::size_t{2000});
    if (n == 0 || n_test == 0) throw lka::ParseError("n and test_n must be positive");
    auto all = generate_synthetic(n + n_test, data_seed, *generator);
    train_set.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n));
    test_set.assign(all.begin() + static_cast<std::ptrdiff_t>(n), all.end());
  }

  ForestParams params;
  params.n_trees = s.get(a.trees, "n_trees", params.n_trees);
  params.max_depth = s.get(a.max_depth, "max_depth", params.max_depth);
  params.min_leaf = s.get(a.min_leaf, "min_leaf", params.min_leaf);
  params.feature_subsample = s.get(a.mtry, "feature_subsample", params.feature_subsample);
  params.seed = forest_seed;
  const auto model = train(train_set, params, schema);
  const auto metrics = evaluate(model, test_set);
  const auto importance = variable_importance(model);

  std::vector<FeatureVector> background;
  for (std::size_t i = 0; i < std::min<std::size_t>(500, test_set.size()); ++i) background.push_back(test_set[i].features);

  const auto out = s.out();
  if (s.wants("json")) {
    write(out, "model.json", lka::io::to_json(model).dump() + "\n");
    write(out, "metrics.json", dump(lka::io::to_json(metrics)));
    write(out, "importance.json", dump(lka::io::to_json(importance)));
    if (generator) write(out, "generator.json", dump(lka::io::to_json(*generator)));
  }
  if (s.wants("csv")) {
    write(out, "confusion.csv", lka::io::confusion_csv(metrics));
    write(out, "partial_dependence.csv", dependence_csv(model, background));
  }
  std::cout << "trained " << model.trees.size() << " trees on " << train_set.size() << " rows; held-out accuracy "
            << fmt("%.4f", metrics.accuracy) << " on " << test_set.size() << " rows\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct PredictArgs {
  Flag<std::string> model, features;
};

int cmd_predict(const Common& common, const PredictArgs& a) {
  using namespace lka::readiness;
  const Settings s(common, "predict");
  const auto model_path = s.path(a.model, "model");
  const auto features_path = s.path(a.features, "features");
  if (model_path.empty()) throw lka::ParseError("predict: no model file given (--model)");
  if (features_path.empty()) throw lka::ParseError("predict: no feature file given (--features)");
  const auto model = lka::io::model_from_json(lka::io::read_json_file(model_path));
  std::ifstream in(features_path);
  if (!in) throw lka::ParseError("cannot open '" + features_path + "'");
  const auto table = parse_feature_table(in, model.schema, false);

  std::ostringstream csv;
  csv << "row,outcome,p_normal,p_deviation,p_disengagement\n";
  json rows = json::array();
  std::array<std::size_t, kClassCount> counts{};
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto p = predict(model, table.rows[i]);
    ++counts[static_cast<std::size_t>(p.outcome)];
    csv << i + 1 << ',' << to_string(p.outcome) << ',' << fmt("%.6f", p.probabilities[0]) << ','
        << fmt("%.6f", p.probabilities[1]) << ',' << fmt("%.6f", p.probabilities[2]) << '\n';
    rows.push_back({{"row", i + 1}, {"outcome", to_string(p.outcome)}, {"probabilities", p.probabilities}});
  }
  const auto out = s.out();
  if (s.wants("csv")) write(out, "predictions.csv", csv.str());
  if (s.wants("json")) write(out, "predictions.json", dump(rows));
  std::cout << table.rows.size() << " row(s): " << counts[0] << " normal, " << counts[1] << " deviation, "
            << counts[2] << " disengagement\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct ReportArgs {
  Flag<std::string> geometry, capability;
  Flag<std::vector<std::string>> logs;
  Flag<double> speed;
};

int cmd_report(const Common& common, const ReportArgs& a) {
  const Settings s(common, "report");
  const auto cap_path = s.path(a.capability, "capability");
  if (cap_path.empty()) throw lka::ParseError("report: no capability file given (--capability)");
  const auto cap = lka::io::load_capability(cap_path);
  const auto geometry = s.path(a.geometry, "geometry");
  const auto log_paths = s.paths(a.logs, "logs");
  const double speed = s.get(a.speed, "speed", 0.0);

  std::ostringstream md;
  md << "# LKA readiness report\n\n";
  if (!geometry.empty()) {
    const auto profile = lka::load_profile(geometry);
    const auto mode = speed > 0.0 ? lka::SpeedMode::constant(speed) : lka::SpeedMode::posted();
    md << lka::report::audit_markdown(lka::audit_profile(cap, profile, mode), cap) << '\n';
  } else {
    md << "## Rules\n\n" << lka::report::rule_text(cap, speed > 0.0 ? speed : 25.0) << '\n';
  }
  if (!log_paths.empty()) {
    const auto logs = load_logs(log_paths);
    md << "# Telemetry\n\n| Log | Episode | Kind | Start [s] | End [s] | Peak [m] | Category |\n";
    md << "|---|---:|---|---:|---:|---:|---|\n";
    for (std::size_t li = 0; li < logs.size(); ++li) {
      const auto episodes = lka::segment_episodes(logs[li]);
      for (std::size_t k = 0; k < episodes.size(); ++k) {
        const auto& e = episodes[k];
        if (e.kind == lka::EpisodeKind::normal) continue;
        md << "| " << log_paths[li] << " | " << k << " | " << lka::to_string(e.kind) << " | "
           << fmt("%.2f", e.t_start) << " | " << fmt("%.2f", e.t_end) << " | " << fmt("%.3f", e.peak_deviation)
           << " | " << lka::to_string(lka::diagnose(e, logs[li], cap).category) << " |\n";
      }
    }
  }
  write(s.out(), "report.md", md.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lane-keeping-assist road audit and telemetry analysis"};
  app.require_subcommand(1);

  // One set of common flags per subcommand; each binds its own options.
  std::map<std::string, Common> common;
  AuditArgs audit;
  auto* sub = app.add_subcommand("audit", "check road geometry against a vehicle's LKA capability");
  add_common(sub, common[sub->get_name()]);
  audit.geometry.opt = sub->add_option("--geometry", audit.geometry.value, "geometry CSV");
  audit.capability.opt = sub->add_option("--capability", audit.capability.value, "capability JSON");
  audit.speed.opt = sub->add_option("--speed", audit.speed.value, "fixed design speed [m/s] (default: posted)");
  audit.roll_budget.opt = sub->add_option("--roll-budget", audit.roll_budget.value, "superelevation share of dT/dt");
  audit.merge_gap.opt = sub->add_option("--merge-gap", audit.merge_gap.value, "finding merge distance [m]");

  AnalyzeArgs analyze;
  sub = app.add_subcommand("analyze", "segment, diagnose and tally telemetry failures");
  add_common(sub, common[sub->get_name()]);
  analyze.logs.opt = sub->add_option("--log", analyze.logs.value, "telemetry CSV (repeatable)");
  analyze.capability.opt = sub->add_option("--capability", analyze.capability.value, "capability JSON");
  analyze.deviation_threshold.opt = sub->add_option("--deviation-threshold", analyze.deviation_threshold.value);
  analyze.critical_threshold.opt = sub->add_option("--critical-threshold", analyze.critical_threshold.value);
  analyze.min_gap.opt = sub->add_option("--min-gap", analyze.min_gap.value, "episode merge gap [s]");

  CurateArgs curate;
  sub = app.add_subcommand("curate", "collect failure episodes and a seeded sample of normal ones");
  add_common(sub, common[sub->get_name()]);
  curate.analyze.logs.opt = sub->add_option("--log", curate.analyze.logs.value, "telemetry CSV (repeatable)");
  curate.ratio.opt = sub->add_option("--ratio", curate.ratio.value, "normal episodes per failure episode");

  FitArgs fit;
  sub = app.add_subcommand("fit", "refit deviation against apex curvature");
  add_common(sub, common[sub->get_name()]);
  fit.logs.opt = sub->add_option("--log", fit.logs.value, "telemetry CSV (repeatable)");
  fit.scatter.opt = sub->add_option("--scatter", fit.scatter.value, "kappa_inv_m,deviation_m CSV");

  SimulateArgs simulate;
  sub = app.add_subcommand("simulate", "closed-loop curvature sweep");
  add_common(sub, common[sub->get_name()]);
  simulate.capability.opt = sub->add_option("--capability", simulate.capability.value, "capability JSON");
  simulate.kappas.opt = sub->add_option("--kappa", simulate.kappas.value, "sweep curvature [1/m] (repeatable)")
                            ->delimiter(',');
  simulate.speed.opt = sub->add_option("--speed", simulate.speed.value, "speed [m/s]");
  simulate.kp.opt = sub->add_option("--kp", simulate.kp.value, "proportional gain per unit K_a");
  simulate.kd.opt = sub->add_option("--kd", simulate.kd.value, "derivative gain per unit K_a");
  simulate.dt.opt = sub->add_option("--dt", simulate.dt.value, "time step [s]");

  TrainArgs trn;
  sub = app.add_subcommand("train", "train the roadway readiness forest");
  add_common(sub, common[sub->get_name()]);
  trn.data.opt = sub->add_option("--data", trn.data.value, "labeled feature CSV (default: synthetic)");
  trn.generator.opt = sub->add_option("--generator", trn.generator.value, "generator config JSON");
  trn.n.opt = sub->add_option("--n", trn.n.value, "synthetic training rows");
  trn.test_n.opt = sub->add_option("--test-n", trn.test_n.value, "synthetic held-out rows");
  trn.test_fraction.opt = sub->add_option("--test-fraction", trn.test_fraction.value, "held-out share of --data");
  trn.trees.opt = sub->add_option("--trees", trn.trees.value, "number of trees");
  trn.max_depth.opt = sub->add_option("--max-depth", trn.max_depth.value);
  trn.min_leaf.opt = sub->add_option("--min-leaf", trn.min_leaf.value);
  trn.mtry.opt = sub->add_option("--feature-subsample", trn.mtry.value, "features tried per split (0: sqrt)");

  PredictArgs pred;
  sub = app.add_subcommand("predict", "classify feature rows with a trained model");
  add_common(sub, common[sub->get_name()]);
  pred.model.opt = sub->add_option("--model", pred.model.value, "model JSON");
  pred.features.opt = sub->add_option("--features", pred.features.value, "feature CSV");

  ReportArgs rep;
  sub = app.add_subcommand("report", "markdown report for infrastructure engineers");
  add_common(sub, common[sub->get_name()]);
  rep.geometry.opt = sub->add_option("--geometry", rep.geometry.value, "geometry CSV");
  rep.capability.opt = sub->add_option("--capability", rep.capability.value, "capability JSON");
  rep.logs.opt = sub->add_option("--log", rep.logs.value, "telemetry CSV (repeatable)");
  rep.speed.opt = sub->add_option("--speed", rep.speed.value, "fixed design speed [m/s]");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (app.got_subcommand("audit")) return cmd_audit(common["audit"], audit);
    if (app.got_subcommand("analyze")) return cmd_analyze(common["analyze"], analyze);
    if (app.got_subcommand("curate")) return cmd_curate(common["curate"], curate);
    if (app.got_subcommand("fit")) return cmd_fit(common["fit"], fit);
    if (app.got_subcommand("simulate")) return cmd_simulate(common["simulate"], simulate);
    if (app.got_subcommand("train")) return cmd_train(common["train"], trn);
    if (app.got_subcommand("predict")) return cmd_predict(common["predict"], pred);
    if (app.got_subcommand("report")) return cmd_report(common["report"], rep);
  } catch (const lka::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
