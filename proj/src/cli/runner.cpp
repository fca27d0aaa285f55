#include "dynrisk/cli/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>

#include <json.hpp>

#include "dynrisk/bsde.hpp"
#include "dynrisk/cli/config.hpp"
#include "dynrisk/cli/svg_plot.hpp"
#include "dynrisk/contribution.hpp"
#include "dynrisk/measures.hpp"
#include "dynrisk/monte_carlo.hpp"

namespace dynrisk::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr double kIdentityTol = 1e-9;
constexpr double kExactTol = 1e-12;

struct Context {
  const ExperimentConfig& cfg;
  ScenarioTree tree;
  AssetModel model;
  Policy policy;
  RiskEnvelope envelope;
  TerminalPayoff payoff;
  fs::path out;
  std::uint64_t seed;
  int trials;
  std::vector<std::string>& files;
};

struct TaskResult {
  bool passed = true;
  json summary = json::object();
};

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(Context& ctx, const std::string& name, const std::string& header)
      : path_(ctx.out / name), out_(path_, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot write " + path_.string());
    out_ << header << '\n';
    ctx.files.push_back(name);
  }
  template <class... T>
  void row(const T&... cells) {
    bool first = true;
    ((out_ << (first ? "" : ",") << cell(cells), first = false), ...);
    out_ << '\n';
  }
  ~CsvWriter() { out_.flush(); }

 private:
  static std::string cell(double v) { return fmt17(v); }
  static std::string cell(int v) { return std::to_string(v); }
  static std::string cell(std::size_t v) { return std::to_string(v); }
  fs::path path_;
  std::ofstream out_;
};

void write_json(Context& ctx, const std::string& name, const json& doc) {
  std::ofstream out(ctx.out / name, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + (ctx.out / name).string());
  out << doc.dump(2) << '\n';
  ctx.files.push_back(name);
}

void plot(Context& ctx, const std::string& name, const std::vector<Series>& series,
          const std::string& title) {
  emit_plot(series, (ctx.out / name).string(), title);
  ctx.files.push_back(name);
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double level_mean(const std::vector<double>& v) {
  // Nodes at one level are equally likely; pairwise reduction keeps this exact.
  return cond_expectation(v, static_cast<int>(std::log2(static_cast<double>(v.size()))), 0)[0];
}

TaskResult measure_task(Context& ctx, bool coherent_table, bool plot_paths) {
  const int n = ctx.tree.steps();
  std::optional<CsvWriter> cw;
  if (coherent_table) cw.emplace(ctx, "measures.csv", "level,node,value");
  CsvWriter dw(ctx, "deviations.csv", "level,node,value");
  double roundtrip = 0.0;
  double min_dev = INFINITY;
  Series cpath{"E[C_t]", {}}, dpath{"E[D_t]", {}};
  json c0, d0;
  for (int t = 0; t <= n; ++t) {
    const auto c = coherent(ctx.tree, ctx.payoff, ctx.envelope, t);
    const auto d = deviation_from_coherent(ctx.tree, ctx.payoff, c);
    const auto d2 = deviation_from_coherent(ctx.tree, ctx.payoff,
                                            coherent_from_deviation(ctx.tree, ctx.payoff, d));
    for (std::size_t j = 0; j < d.values.size(); ++j) {
      roundtrip = std::max(roundtrip, std::abs(d2.values[j] - d.values[j]));
      min_dev = std::min(min_dev, d.values[j]);
      if (cw) cw->row(t, j, c.values[j]);
      dw.row(t, j, d.values[j]);
    }
    cpath.points.emplace_back(ctx.tree.time(t), level_mean(c.values));
    dpath.points.emplace_back(ctx.tree.time(t), level_mean(d.values));
    if (t == ctx.cfg.level) {
      c0 = c.values;
      d0 = d.values;
    }
  }
  if (plot_paths) plot(ctx, "measure_mean_path.svg", {cpath, dpath}, "Mean conditional measures");
  TaskResult r;
  r.summary = {{"envelope", ctx.envelope.describe()},
               {"payoff", ctx.cfg.payoff},
               {"level", ctx.cfg.level},
               {"coherent_at_level", c0},
               {"deviation_at_level", d0},
               {"roundtrip_residual", roundtrip},
               {"min_deviation", min_dev}};
  r.passed = roundtrip <= kExactTol && min_dev >= -kExactTol;
  return r;
}

bool deterministic_drift_exposure(const ScenarioTree& tree, const ContributionReport& rep) {
  for (int k = 0; k < tree.steps(); ++k)
    for (std::size_t j = 1; j < ScenarioTree::width(k); ++j)
      for (std::size_t i = 0; i < rep.assets; ++i)
        if (rep.shares(k, j, i) * rep.drift(k, j, i) != rep.shares(k, 0, i) * rep.drift(k, 0, i))
          return false;
  return true;
}

TaskResult contrib_task(Context& ctx) {
  const int level = ctx.cfg.level;
  const int n = ctx.tree.steps();
  const auto rep = marginal_and_total_contributions(ctx.tree, ctx.model, ctx.policy, ctx.cfg.x0,
                                                    ctx.envelope, level);
  {
    CsvWriter w(ctx, "contrib.csv", "level,node,asset,u,mC,mD,mD_alt,c,delta");
    for (int k = level; k < n; ++k)
      for (std::size_t j = 0; j < ScenarioTree::width(k); ++j)
        for (std::size_t i = 0; i < rep.assets; ++i)
          w.row(k, j, i, rep.shares(k, j, i), rep.marginal_coherent(k, j, i),
                rep.marginal_deviation(k, j, i), rep.marginal_deviation_alt(k, j, i),
                rep.contribution_deviation(k, j, i), rep.discrepancy(k, j, i));
  }
  const bool kernel = ctx.envelope.kind() != RiskEnvelope::Kind::cvar;
  const bool det_drift = deterministic_drift_exposure(ctx.tree, rep);
  const int t2 = std::min(level + 1, n);
  const auto tc = contribution_time_consistency(ctx.tree, ctx.model, ctx.policy, ctx.cfg.x0,
                                                ctx.envelope, level, t2);
  double correspondence = tc.correspondence_residual;

  TaskResult r;
  r.summary = {{"envelope", ctx.envelope.describe()},
               {"level", level},
               {"coherent_value", rep.coherent_value},
               {"deviation_value", rep.deviation_value},
               {"coherent_aggregation_residual", rep.max_coherent_residual()},
               {"deviation_aggregation_residual", rep.max_deviation_residual()},
               {"discrepancy_conditional_mean", rep.max_discrepancy_mean()},
               {"deterministic_drift_exposure", det_drift},
               {"correspondence_residual", correspondence},
               {"time_consistency",
                {{"t1", tc.t1},
                 {"t2", tc.t2},
                 {"time_consistent_family", tc.time_consistent_family},
                 {"kernel_residual", tc.kernel_residual},
                 {"marginal_residual", tc.marginal_residual},
                 {"normalized_marginal_residual", tc.normalized_residual}}}};
  r.passed = rep.max_coherent_residual() <= kIdentityTol &&
             rep.max_deviation_residual() <= kIdentityTol && correspondence <= kExactTol;
  if (det_drift) r.passed = r.passed && rep.max_discrepancy_mean() <= kIdentityTol;
  if (kernel) r.passed = r.passed && tc.kernel_residual == 0.0 && tc.normalized_residual <= kIdentityTol;

  if (kernel) {
    const auto z = z_identity_check(ctx.tree, ctx.model, ctx.policy, ctx.cfg.x0, ctx.envelope, level);
    const bool asserted = ctx.cfg.constant_market();
    r.summary["z_identity"] = {{"asserted_nodewise", asserted},
                               {"residual", z.max_residual()},
                               {"residual_ell_form", max_abs(z.residual_ell)},
                               {"z_formula_residual", z.max_z_formula_residual()},
                               {"aggregate_residual", max_abs(z.aggregate_residual)},
                               {"aggregate_residual_alt", max_abs(z.aggregate_residual_alt)},
                               {"max_path_residual", z.max_path_residual},
                               {"max_drift_term", z.max_drift_term}};
    r.passed = r.passed && max_abs(z.aggregate_residual) <= kIdentityTol;
    if (asserted)
      r.passed = r.passed && z.max_residual() <= kIdentityTol && z.max_z_formula_residual() <= kIdentityTol;
  }
  return r;
}

json axiom_json(const AxiomReport& a) {
  json axioms = json::array();
  for (const auto& s : a.axioms)
    axioms.push_back({{"axiom", s.axiom},
                      {"applicable", s.applicable},
                      {"violations", s.violations},
                      {"max_residual", s.max_residual}});
  return {{"family", a.family},
          {"seed", a.seed},
          {"trials", a.trials},
          {"steps", a.steps},
          {"tolerance", a.tolerance},
          {"axioms", axioms},
          {"violations", a.total_violations()}};
}

std::string a1_name(A1Status s) {
  switch (s) {
    case A1Status::certified: return "certified";
    case A1Status::sampled_pass: return "sampled_pass";
    case A1Status::sampled_violation: return "sampled_violation";
    case A1Status::not_probed: break;
  }
  return "not_probed";
}

TaskResult axioms_task(Context& ctx) {
  const auto c = axiom_suite(MeasureFamily::coherent(ctx.envelope), ctx.tree, ctx.seed, ctx.trials);
  const auto d = axiom_suite(MeasureFamily::deviation(ctx.envelope), ctx.tree, ctx.seed, ctx.trials);
  const auto v = envelope_validate(ctx.envelope, ctx.tree, 8, ctx.seed);
  json doc = {{"families", {axiom_json(c), axiom_json(d)}},
              {"a1", {{"status", a1_name(v.a1)}, {"worst_excess", v.a1_worst_excess}}}};
  write_json(ctx, "axioms.json", doc);
  TaskResult r;
  r.summary = {{"coherent_violations", c.total_violations()},
               {"deviation_violations", d.total_violations()},
               {"trials", ctx.trials},
               {"a1", a1_name(v.a1)}};
  r.passed = c.total_violations() == 0 && d.total_violations() == 0;
  return r;
}

TaskResult consistency_task(Context& ctx) {
  auto pairs = ctx.cfg.pairs;
  if (pairs.empty())
    for (int s = 0; s <= ctx.tree.steps(); ++s)
      for (int t = s; t <= ctx.tree.steps(); ++t) pairs.emplace_back(s, t);
  const bool consistent_family = ctx.envelope.kind() != RiskEnvelope::Kind::cvar;
  json rows = json::array();
  double max_c = 0.0, max_d = 0.0;
  for (const auto& [s, t] : pairs) {
    const auto res = time_consistency_check(ctx.tree, ctx.envelope, ctx.payoff, s, t);
    max_c = std::max(max_c, res.max_coherent());
    max_d = std::max(max_d, res.max_deviation());
    rows.push_back({{"s", s}, {"t", t}, {"coherent", res.max_coherent()}, {"deviation", res.max_deviation()}});
  }
  json doc = {{"envelope", ctx.envelope.describe()},
              {"time_consistent_family", consistent_family},
              {"payoff", ctx.cfg.payoff},
              {"pairs", rows},
              {"max_coherent_residual", max_c},
              {"max_deviation_residual", max_d}};
  write_json(ctx, "consistency.json", doc);
  TaskResult r;
  r.summary = {{"time_consistent_family", consistent_family},
               {"pairs", pairs.size()},
               {"max_coherent_residual", max_c},
               {"max_deviation_residual", max_d}};
  // Residuals of families that are not time-consistent are reported only.
  r.passed = !consistent_family || (max_c <= kIdentityTol && max_d <= kIdentityTol);
  return r;
}

TaskResult bsde_mc_task(Context& ctx) {
  if (ctx.envelope.kind() == RiskEnvelope::Kind::cvar)
    throw ConfigError("envelope.type", "bsde-mc needs a kernel envelope");
  const auto& cfg = ctx.cfg;
  PathTerminalRule terminal;
  if (cfg.payoff == "brownian") {
    terminal = [](std::span<const double> b) { return -b.back(); };
  } else {
    if (!cfg.constant_market())
      throw ConfigError("options.payoff", "bsde-mc with wealth payoff needs constant coefficients and policy");
    double drift = 0.0, vol = 0.0;
    for (std::size_t i = 0; i < cfg.assets.size(); ++i) {
      drift += cfg.policy.front()[i] * cfg.assets[i].drift.front();
      vol += cfg.policy.front()[i] * cfg.assets[i].diffusion.front();
    }
    const double x0 = cfg.x0, horizon = cfg.horizon;
    terminal = [=](std::span<const double> b) { return -(x0 + drift * horizon + vol * b.back()); };
  }
  const auto ens = simulate_paths(ctx.seed, cfg.mc.steps, cfg.mc.paths, cfg.horizon);
  const auto sol = solve_mc(ens, terminal, ctx.envelope.driver(), RegressionBasis::polynomial(cfg.mc.degree));
  // Constant exposure makes the tree value exact for any depth.
  const double reference = coherent(ctx.tree, ctx.payoff, ctx.envelope, 0).values[0];
  const double err = std::abs(sol.y0 - reference);
  const bool within_se = err <= 3.0 * sol.standard_error;
  const bool within_pct = err <= 0.01 * std::abs(reference);
  json doc = {{"envelope", ctx.envelope.describe()},
              {"payoff", cfg.payoff},
              {"seed", ctx.seed},
              {"steps", cfg.mc.steps},
              {"paths", cfg.mc.paths},
              {"degree", cfg.mc.degree},
              {"batches", sol.batches},
              {"y0", sol.y0},
              {"standard_error", sol.standard_error},
              {"tree_reference", reference},
              {"abs_error", err},
              {"within_3_se", within_se},
              {"within_1_percent", within_pct}};
  write_json(ctx, "bsde_mc.json", doc);
  TaskResult r;
  r.summary = doc;
  r.passed = within_se && (within_pct || reference == 0.0);
  return r;
}

TaskResult example_kappa_task(Context& ctx) {
  if (ctx.cfg.envelope.type != "kappa")
    throw ConfigError("envelope.type", "example-kappa needs a kappa envelope");
  const double kappa = ctx.cfg.envelope.kappa;
  const auto& tree = ctx.tree;
  const int n = tree.steps();
  const double horizon = tree.horizon();
  const auto env = RiskEnvelope::kappa(kappa);
  const auto model = AssetModel::constant({0.0}, {1.0}, {0.0});
  const auto policy = Policy::constant(tree, {1.0});
  const auto b = brownian(tree);
  const auto bl = b.level(n);
  const TerminalPayoff x(tree, std::vector<double>(bl.begin(), bl.end()));
  const double expected = kappa * horizon;

  const double c0 = coherent(tree, x, env, 0).values[0];
  const double d0 = deviation(tree, x, env, 0).values[0];
  std::vector<double> neg(bl.begin(), bl.end());
  for (double& v : neg) v = -v;
  const auto sol = solve_tree(tree, TerminalPayoff(tree, neg), env.driver());
  double z_res = 0.0, y_res = 0.0;
  for (int k = 0; k <= n; ++k)
    for (std::size_t j = 0; j < ScenarioTree::width(k); ++j) {
      if (k < n) z_res = std::max(z_res, std::abs(sol.integrand(k, j) + 1.0));
      y_res = std::max(y_res, std::abs(sol.value(k, j) - (-b(k, j) + kappa * (horizon - tree.time(k)))));
    }

  const auto rep = marginal_and_total_contributions(tree, model, policy, 0.0, env, 0);
  double md_res = 0.0, delta = 0.0;
  for (int k = 0; k < n; ++k)
    for (std::size_t j = 0; j < ScenarioTree::width(k); ++j) {
      md_res = std::max(md_res, std::abs(rep.marginal_deviation(k, j) - kappa * rep.face.density.values(k, j)));
      delta = std::max(delta, std::abs(rep.discrepancy(k, j)));
    }
  double z_identity = 0.0, z_formula = 0.0;
  for (int t = 0; t < n; ++t) {
    const auto z = z_identity_check(tree, model, policy, 0.0, env, t);
    z_identity = std::max(z_identity, z.max_residual());
    z_formula = std::max(z_formula, z.max_z_formula_residual());
  }
  double c3 = 0.0, d3 = 0.0;
  for (int s = 0; s <= n; ++s)
    for (int t = s; t <= n; ++t) {
      const auto tc = time_consistency_check(tree, env, x, s, t);
      c3 = std::max(c3, tc.max_coherent());
      d3 = std::max(d3, tc.max_deviation());
    }
  const auto mtc = contribution_time_consistency(tree, model, policy, 0.0, env, 0, std::min(1, n));
  const auto weights = recorder_weights_from_kernels(tree, env.kernels(), &rep.face.kernel);
  const double recorder = volatility_recorder(tree, x, weights, 0)[0];

  Series dpath{"E[D_t]", {}}, closed{"kappa (T - t)", {}};
  for (int t = 0; t <= n; ++t) {
    dpath.points.emplace_back(tree.time(t), level_mean(deviation(tree, x, env, t).values));
    closed.points.emplace_back(tree.time(t), kappa * (horizon - tree.time(t)));
  }
  plot(ctx, "dt_mean_path.svg", {dpath, closed}, "Deviation mean path, kappa-ignorance");

  const double scale = std::max(1.0, expected);
  json doc = {{"kappa", kappa},
              {"horizon", horizon},
              {"steps", n},
              {"closed_form", expected},
              {"C0", c0},
              {"D0", d0},
              {"C0_error", std::abs(c0 - expected)},
              {"D0_error", std::abs(d0 - expected)},
              {"Z_residual", z_res},
              {"Y_closed_form_residual", y_res},
              {"aggregate_D0", rep.deviation_aggregate[0]},
              {"coherent_aggregation_residual", rep.max_coherent_residual()},
              {"deviation_aggregation_residual", rep.max_deviation_residual()},
              {"marginal_kappa_density_residual", md_res},
              {"discrepancy_max", delta},
              {"z_identity_residual", z_identity},
              {"z_formula_residual", z_formula},
              {"c3t_residual", c3},
              {"d3t_residual", d3},
              {"marginal_kernel_residual", mtc.kernel_residual},
              {"marginal_normalized_residual", mtc.normalized_residual},
              {"recorder_value", recorder},
              {"recorder_residual", std::abs(recorder - expected)}};
  write_json(ctx, "example_kappa.json", doc);
  TaskResult r;
  r.summary = doc;
  r.passed = std::abs(c0 - expected) <= kExactTol * scale && std::abs(d0 - expected) <= kExactTol * scale;
  for (const char* key : {"Z_residual", "Y_closed_form_residual", "coherent_aggregation_residual",
                          "deviation_aggregation_residual", "marginal_kappa_density_residual",
                          "discrepancy_max", "z_identity_residual", "z_formula_residual",
                          "c3t_residual", "d3t_residual", "marginal_normalized_residual",
                          "recorder_residual"})
    r.passed = r.passed && doc[key].get<double>() <= kIdentityTol;
  r.passed = r.passed && mtc.kernel_residual == 0.0;
  return r;
}

TaskResult stddev_task(Context& ctx) {
  const auto& s = ctx.cfg.stddev;
  if (!s.present) throw ConfigError("options.stddev", "missing weights and covariance");
  const auto d = static_cast<Eigen::Index>(s.weights.size());
  Eigen::VectorXd w(d);
  Eigen::MatrixXd cov(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    w(i) = s.weights[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < d; ++j)
      cov(i, j) = s.covariance[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  std::optional<StaticPortfolio> port;
  try {
    port.emplace(w, cov);
  } catch (const std::domain_error& e) {
    throw ConfigError(std::string(e.what()).find("weights") != std::string::npos
                          ? "options.stddev.weights"
                          : "options.stddev.covariance",
                      e.what());
  }
  const auto res = static_stddev_contribution(*port);
  {
    CsvWriter out(ctx, "stddev.csv", "asset,weight,marginal,contribution");
    for (Eigen::Index i = 0; i < d; ++i)
      out.row(static_cast<std::size_t>(i), w(i), res.marginals(i), res.contributions(i));
  }
  const double euler = std::abs(res.contributions.sum() - res.total) / res.total;
  TaskResult r;
  r.summary = {{"total", res.total}, {"euler_residual", euler}};
  r.passed = euler <= kExactTol;
  return r;
}

TaskResult run_task(Context& ctx, const std::string& name) {
  if (name == "measure") return measure_task(ctx, true, true);
  if (name == "deviation") return measure_task(ctx, false, false);
  if (name == "contrib") return contrib_task(ctx);
  if (name == "axioms") return axioms_task(ctx);
  if (name == "consistency") return consistency_task(ctx);
  if (name == "bsde-mc") return bsde_mc_task(ctx);
  if (name == "example-kappa") return example_kappa_task(ctx);
  if (name == "stddev") return stddev_task(ctx);
  throw ConfigError("<command>", "unknown command '" + name + "'");
}

struct Failure {
  int code;
  json record;
};

Failure classify(const std::exception& e) {
  if (const auto* c = dynamic_cast<const ConfigError*>(&e))
    return {kExitSchema, {{"kind", "schema"}, {"field", c->field()}, {"message", c->message()}}};
  if (dynamic_cast<const CapacityError*>(&e))
    return {kExitCapacity, {{"kind", "capacity"}, {"field", nullptr}, {"message", e.what()}}};
  if (dynamic_cast<const EnvelopeError*>(&e))
    return {kExitSchema, {{"kind", "schema"}, {"field", "envelope"}, {"message", e.what()}}};
  return {kExitResidual, {{"kind", "runtime"}, {"field", nullptr}, {"message", e.what()}}};
}

std::string status_name(int code) {
  switch (code) {
    case kExitOk: return "ok";
    case kExitResidual: return "failure";
    case kExitSchema: return "schema_error";
    case kExitCapacity: return "capacity_error";
  }
  return "error";
}

}  // namespace

int run(const RunOptions& options, std::ostream& log) {
  using clock = std::chrono::steady_clock;
  json report = {{"command", options.command}, {"tasks", json::array()}, {"error", nullptr}};
  json timings = json::object();
  std::vector<std::string> files;
  std::optional<fs::path> out_dir;
  if (options.out) out_dir = fs::path(*options.out);
  int code = kExitOk;

  try {
    if (options.command != "run" &&
        std::find(kTaskNames.begin(), kTaskNames.end(), options.command) == kTaskNames.end())
      throw ConfigError("<command>", "unknown command '" + options.command + "'");
    json doc;
    {
      std::ifstream in(options.config_path);
      if (!in) throw ConfigError("<file>", "cannot open config '" + options.config_path + "'");
      try {
        doc = json::parse(in);
      } catch (const json::parse_error& e) {
        throw ConfigError("<file>", std::string("malformed JSON: ") + e.what());
      }
    }
    if (!out_dir && doc.is_object() && doc.contains("output_dir") && doc["output_dir"].is_string() &&
        !doc["output_dir"].get<std::string>().empty())
      out_dir = fs::path(doc["output_dir"].get<std::string>());
    report["config"] = doc;
    const auto cfg = parse_config(doc);
    if (!out_dir) out_dir = fs::path(cfg.output_dir);
    fs::create_directories(*out_dir);

    const auto tree = cfg.tree();
    const auto model = cfg.model();
    auto policy = cfg.make_policy(tree);
    const auto payoff = cfg.payoff == "brownian"
                            ? [&] {
                                const auto b = brownian(tree);
                                const auto l = b.level(tree.steps());
                                return TerminalPayoff(tree, std::vector<double>(l.begin(), l.end()));
                              }()
                            : wealth(tree, model, policy, cfg.x0).terminal_payoff(tree);
    Context ctx{cfg,
                tree,
                model,
                std::move(policy),
                cfg.risk_envelope(),
                payoff,
                *out_dir,
                options.seed.value_or(cfg.seed),
                options.trials.value_or(cfg.trials),
                files};
    report["seed"] = ctx.seed;
    report["trials"] = ctx.trials;
    require_valid(ctx.envelope, tree);

    std::vector<std::string> tasks =
        options.command == "run" ? cfg.tasks : std::vector<std::string>{options.command};
    if (tasks.empty()) throw ConfigError("tasks", "no tasks to run");
    for (const auto& name : tasks) {
      json entry = {{"name", name}};
      const auto start = clock::now();
      try {
        auto res = run_task(ctx, name);
        entry["status"] = res.passed ? "passed" : "failed";
        entry["summary"] = std::move(res.summary);
        if (!res.passed) code = std::max(code, static_cast<int>(kExitResidual));
        log << "task " << name << ": " << entry["status"].get<std::string>() << '\n';
      } catch (const std::exception& e) {
        entry["status"] = "error";
        report["tasks"].push_back(entry);
        throw;
      }
      timings[name] = std::chrono::duration<double>(clock::now() - start).count();
      report["tasks"].push_back(std::move(entry));
    }
  } catch (const std::exception& e) {
    auto f = classify(e);
    code = f.code;
    report["error"] = std::move(f.record);
    log << "error: " << e.what() << '\n';
  }

  report["status"] = status_name(code);
  report["exit_code"] = code;
  if (options.timings) report["timings"] = timings;
  if (out_dir) {
    std::error_code ec;
    fs::create_directories(*out_dir, ec);
    files.push_back("report.json");
    report["files"] = files;
    std::ofstream out(*out_dir / "report.json", std::ios::binary);
    if (out) {
      out << report.dump(2) << '\n';
    } else {
      log << "error: cannot write report.json to " << out_dir->string() << '\n';
      if (code == kExitOk) code = kExitResidual;
    }
  }
  return code;
}

}  // namespace dynrisk::cli
