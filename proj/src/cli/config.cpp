#include "dynrisk/cli/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>

namespace dynrisk::cli {

using nlohmann::json;

namespace {

std::string join(const std::string& a, const std::string& b) { return a.empty() ? b : a + "." + b; }

void check_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(path.empty() ? "<root>" : path, "expected an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      throw ConfigError(join(path, key), "unknown key");
  }
}

const json& require(const json& obj, const std::string& path, const char* key) {
  if (!obj.contains(key)) throw ConfigError(join(path, key), "missing required key");
  return obj.at(key);
}

double number(const json& v, const std::string& path) {
  if (!v.is_number()) throw ConfigError(path, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ConfigError(path, "must be finite");
  return x;
}

long long integer(const json& v, const std::string& path) {
  if (!v.is_number_integer()) throw ConfigError(path, "expected an integer");
  return v.get<long long>();
}

std::vector<double> number_list(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) throw ConfigError(path, "expected a non-empty array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i)
    out.push_back(number(v[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

// A number, or an array with one entry per step.
std::vector<double> coefficient(const json& v, const std::string& path, int steps) {
  if (v.is_number()) return {number(v, path)};
  auto out = number_list(v, path);
  if (out.size() != static_cast<std::size_t>(steps))
    throw ConfigError(path, "per-level table needs " + std::to_string(steps) + " entries, got " +
                                std::to_string(out.size()));
  return out;
}

void parse_envelope(const json& e, ExperimentConfig& c) {
  const std::string p = "envelope";
  if (!e.is_object()) throw ConfigError(p, "expected an object");
  const auto& type = require(e, p, "type");
  if (!type.is_string()) throw ConfigError("envelope.type", "expected a string");
  c.envelope.type = type.get<std::string>();
  if (c.envelope.type == "kappa") {
    check_keys(e, p, {"type", "kappa"});
    c.envelope.kappa = number(require(e, p, "kappa"), "envelope.kappa");
    if (c.envelope.kappa < 0.0) throw ConfigError("envelope.kappa", "must be >= 0");
  } else if (c.envelope.type == "interval") {
    check_keys(e, p, {"type", "lo", "hi"});
    c.envelope.lo = number(require(e, p, "lo"), "envelope.lo");
    c.envelope.hi = number(require(e, p, "hi"), "envelope.hi");
    if (c.envelope.lo > 0.0) throw ConfigError("envelope.lo", "must be <= 0 so the reference density is admissible");
    if (c.envelope.hi < 0.0) throw ConfigError("envelope.hi", "must be >= 0 so the reference density is admissible");
  } else if (c.envelope.type == "cvar") {
    check_keys(e, p, {"type", "lambda"});
    c.envelope.lambda = number(require(e, p, "lambda"), "envelope.lambda");
    if (!(c.envelope.lambda > 0.0 && c.envelope.lambda <= 1.0))
      throw ConfigError("envelope.lambda", "must lie in (0, 1]");
  } else if (c.envelope.type == "reference") {
    check_keys(e, p, {"type"});
  } else {
    throw ConfigError("envelope.type", "expected one of kappa, interval, cvar, reference");
  }
  // Density positivity on this tree.
  const double sqrt_dt = std::sqrt(c.horizon / c.steps);
  const auto check_step = [&](double phi, const char* field) {
    if (!(std::abs(phi) * sqrt_dt < 1.0))
      throw ConfigError(field, "kernel step |phi| sqrt(dt) must be < 1 on this tree");
  };
  if (c.envelope.type == "kappa") check_step(c.envelope.kappa, "envelope.kappa");
  if (c.envelope.type == "interval") {
    check_step(c.envelope.lo, "envelope.lo");
    check_step(c.envelope.hi, "envelope.hi");
  }
}

void parse_options(const json& o, ExperimentConfig& c) {
  const std::string p = "options";
  check_keys(o, p, {"level", "trials", "payoff", "pairs", "mc", "stddev"});
  if (o.contains("level")) {
    const auto v = integer(o["level"], "options.level");
    if (v < 0 || v > c.steps) throw ConfigError("options.level", "must lie in 0..tree.steps");
    c.level = static_cast<int>(v);
  }
  if (o.contains("trials")) {
    const auto v = integer(o["trials"], "options.trials");
    if (v < 1 || v > 1'000'000) throw ConfigError("options.trials", "must lie in 1..1000000");
    c.trials = static_cast<int>(v);
  }
  if (o.contains("payoff")) {
    if (!o["payoff"].is_string()) throw ConfigError("options.payoff", "expected a string");
    c.payoff = o["payoff"].get<std::string>();
    if (c.payoff != "wealth" && c.payoff != "brownian")
      throw ConfigError("options.payoff", "expected wealth or brownian");
  }
  if (o.contains("pairs")) {
    const auto& arr = o["pairs"];
    if (!arr.is_array() || arr.empty()) throw ConfigError("options.pairs", "expected a non-empty array of [s, t]");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string f = "options.pairs[" + std::to_string(i) + "]";
      if (!arr[i].is_array() || arr[i].size() != 2) throw ConfigError(f, "expected [s, t]");
      const auto s = integer(arr[i][0], f);
      const auto t = integer(arr[i][1], f);
      if (s < 0 || s > t || t > c.steps) throw ConfigError(f, "need 0 <= s <= t <= tree.steps");
      c.pairs.emplace_back(static_cast<int>(s), static_cast<int>(t));
    }
  }
  if (o.contains("mc")) {
    const auto& m = o["mc"];
    check_keys(m, "options.mc", {"steps", "paths", "degree"});
    if (m.contains("steps")) {
      const auto v = integer(m["steps"], "options.mc.steps");
      if (v < 1 || v > 10'000) throw ConfigError("options.mc.steps", "must lie in 1..10000");
      c.mc.steps = static_cast<int>(v);
    }
    if (m.contains("paths")) {
      const auto v = integer(m["paths"], "options.mc.paths");
      if (v < 2) throw ConfigError("options.mc.paths", "must be >= 2");
      c.mc.paths = static_cast<std::size_t>(v);
    }
    if (m.contains("degree")) {
      const auto v = integer(m["degree"], "options.mc.degree");
      if (v < 0 || v > 8) throw ConfigError("options.mc.degree", "must lie in 0..8");
      c.mc.degree = static_cast<int>(v);
    }
  }
  if (o.contains("stddev")) {
    const auto& s = o["stddev"];
    check_keys(s, "options.stddev", {"weights", "covariance"});
    c.stddev.present = true;
    c.stddev.weights = number_list(require(s, "options.stddev", "weights"), "options.stddev.weights");
    const auto& cov = require(s, "options.stddev", "covariance");
    const std::size_t d = c.stddev.weights.size();
    if (!cov.is_array() || cov.size() != d)
      throw ConfigError("options.stddev.covariance", "expected " + std::to_string(d) + " rows");
    for (std::size_t i = 0; i < d; ++i) {
      const std::string f = "options.stddev.covariance[" + std::to_string(i) + "]";
      auto row = number_list(cov[i], f);
      if (row.size() != d) throw ConfigError(f, "expected " + std::to_string(d) + " entries");
      c.stddev.covariance.push_back(std::move(row));
    }
  }
}

}  // namespace

ExperimentConfig parse_config(const json& doc) {
  ExperimentConfig c;
  check_keys(doc, "", {"tree", "model", "policy", "envelope", "tasks", "seed", "output_dir", "options"});
  c.raw = doc;

  const auto& t = require(doc, "", "tree");
  check_keys(t, "tree", {"steps", "horizon"});
  const auto steps = integer(require(t, "tree", "steps"), "tree.steps");
  if (steps < 1) throw ConfigError("tree.steps", "must be >= 1");
  if (steps > kMaxTreeSteps)
    throw CapacityError("tree.steps = " + std::to_string(steps) + " exceeds the supported depth " +
                        std::to_string(kMaxTreeSteps));
  c.steps = static_cast<int>(steps);
  c.horizon = number(require(t, "tree", "horizon"), "tree.horizon");
  if (!(c.horizon > 0.0)) throw ConfigError("tree.horizon", "must be > 0");

  const auto& m = require(doc, "", "model");
  check_keys(m, "model", {"assets"});
  const auto& assets = require(m, "model", "assets");
  if (!assets.is_array() || assets.empty()) throw ConfigError("model.assets", "expected a non-empty array");
  for (std::size_t i = 0; i < assets.size(); ++i) {
    const std::string p = "model.assets[" + std::to_string(i) + "]";
    check_keys(assets[i], p, {"drift", "diffusion", "s0"});
    AssetSpec a;
    a.drift = coefficient(require(assets[i], p, "drift"), p + ".drift", c.steps);
    a.diffusion = coefficient(require(assets[i], p, "diffusion"), p + ".diffusion", c.steps);
    a.s0 = assets[i].contains("s0") ? number(assets[i]["s0"], p + ".s0") : 0.0;
    c.assets.push_back(std::move(a));
  }
  const std::size_t d = c.assets.size();

  const auto& pol = require(doc, "", "policy");
  check_keys(pol, "policy", {"constant", "table", "x0"});
  if (pol.contains("constant") == pol.contains("table"))
    throw ConfigError("policy", "give exactly one of constant or table");
  if (pol.contains("constant")) {
    c.policy_constant = true;
    c.policy.push_back(number_list(pol["constant"], "policy.constant"));
    if (c.policy.front().size() != d)
      throw ConfigError("policy.constant", "expected " + std::to_string(d) + " shares");
  } else {
    c.policy_constant = false;
    const auto& tab = pol["table"];
    if (!tab.is_array() || tab.size() != static_cast<std::size_t>(c.steps))
      throw ConfigError("policy.table", "expected " + std::to_string(c.steps) + " rows");
    for (std::size_t k = 0; k < tab.size(); ++k) {
      const std::string f = "policy.table[" + std::to_string(k) + "]";
      auto row = number_list(tab[k], f);
      if (row.size() != d) throw ConfigError(f, "expected " + std::to_string(d) + " shares");
      c.policy.push_back(std::move(row));
    }
  }
  c.x0 = pol.contains("x0") ? number(pol["x0"], "policy.x0") : 0.0;

  parse_envelope(require(doc, "", "envelope"), c);

  if (doc.contains("tasks")) {
    const auto& tasks = doc["tasks"];
    if (!tasks.is_array()) throw ConfigError("tasks", "expected an array of task names");
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      const std::string f = "tasks[" + std::to_string(i) + "]";
      if (!tasks[i].is_string()) throw ConfigError(f, "expected a string");
      const auto name = tasks[i].get<std::string>();
      if (std::find(kTaskNames.begin(), kTaskNames.end(), name) == kTaskNames.end())
        throw ConfigError(f, "unknown task '" + name + "'");
      c.tasks.push_back(name);
    }
  }
  if (doc.contains("seed")) {
    const auto& s = doc["seed"];
    if (!s.is_number_unsigned()) throw ConfigError("seed", "expected a non-negative integer");
    c.seed = s.get<std::uint64_t>();
  }
  if (doc.contains("output_dir")) {
    if (!doc["output_dir"].is_string() || doc["output_dir"].get<std::string>().empty())
      throw ConfigError("output_dir", "expected a non-empty string");
    c.output_dir = doc["output_dir"].get<std::string>();
  }
  if (doc.contains("options")) parse_options(doc["options"], c);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open config '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("<file>", std::string("malformed JSON: ") + e.what());
  }
  return parse_config(doc);
}

ScenarioTree ExperimentConfig::tree() const { return build_tree(steps, horizon); }

AssetModel ExperimentConfig::model() const {
  const std::size_t d = assets.size();
  std::vector<double> s0;
  for (const auto& a : assets) s0.push_back(a.s0);
  const bool constant = std::all_of(assets.begin(), assets.end(), [](const AssetSpec& a) {
    return a.drift.size() == 1 && a.diffusion.size() == 1;
  });
  if (constant) {
    std::vector<double> b, s;
    for (const auto& a : assets) {
      b.push_back(a.drift.front());
      s.push_back(a.diffusion.front());
    }
    return AssetModel::constant(std::move(b), std::move(s), std::move(s0));
  }
  std::vector<std::vector<double>> b(static_cast<std::size_t>(steps), std::vector<double>(d));
  auto s = b;
  for (std::size_t k = 0; k < b.size(); ++k)
    for (std::size_t i = 0; i < d; ++i) {
      const auto& a = assets[i];
      b[k][i] = a.drift.size() == 1 ? a.drift.front() : a.drift[k];
      s[k][i] = a.diffusion.size() == 1 ? a.diffusion.front() : a.diffusion[k];
    }
  return AssetModel::per_level(std::move(b), std::move(s), std::move(s0));
}

Policy ExperimentConfig::make_policy(const ScenarioTree& tree) const {
  return policy_constant ? Policy::constant(tree, policy.front()) : Policy::per_level(tree, policy);
}

RiskEnvelope ExperimentConfig::risk_envelope() const {
  if (envelope.type == "kappa") return RiskEnvelope::kappa(envelope.kappa);
  if (envelope.type == "interval")
    return RiskEnvelope::interval(envelope.lo, envelope.hi);
  if (envelope.type == "cvar") return RiskEnvelope::cvar(envelope.lambda);
  return RiskEnvelope::reference_only();
}

bool ExperimentConfig::constant_market() const {
  return policy_constant && std::all_of(assets.begin(), assets.end(), [](const AssetSpec& a) {
           return a.drift.size() == 1 && a.diffusion.size() == 1;
         });
}

}  // namespace dynrisk::cli
