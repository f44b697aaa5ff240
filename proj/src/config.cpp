#include "mpamp/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <limits>

#include "mpamp/errors.hpp"

namespace mpamp {

using nlohmann::json;

namespace {

void only_keys(const json& j, std::string_view where, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw InvalidArgument(std::string(where) + " must be an object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw InvalidArgument("unknown key '" + key + "' in " + std::string(where));
  }
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("bad value for '") + key + "': " + e.what());
  }
}

double rate_from_json(const json& v) {
  if (v.is_string() && v.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
  if (!v.is_number()) throw InvalidArgument("rates must be numbers or \"inf\"");
  return v.get<double>();
}

json rate_to_json(double r) { return std::isinf(r) ? json("inf") : json(r); }

Prior parse_prior(const json& j) {
  only_keys(j, "system.prior", {"kind", "rho", "weights", "means", "variances"});
  std::string kind = "bernoulli_gaussian";
  read(j, "kind", kind);
  if (kind == "bernoulli_gaussian") {
    double rho = 0.1;
    read(j, "rho", rho);
    return Prior::bernoulli_gaussian(rho);
  }
  if (kind == "gaussian_mixture") {
    std::vector<double> w, m, v;
    read(j, "weights", w);
    read(j, "means", m);
    read(j, "variances", v);
    return Prior::gaussian_mixture(w, m, v);
  }
  throw InvalidArgument("unknown prior kind '" + kind + "'");
}

json prior_to_json(const Prior& p) {
  if (p.kind() == PriorKind::bernoulli_gaussian) return {{"kind", "bernoulli_gaussian"}, {"rho", p.rho()}};
  json w = json::array(), m = json::array(), v = json::array();
  for (const auto& c : p.components()) {
    w.push_back(c.weight);
    m.push_back(c.mean);
    v.push_back(c.variance);
  }
  return {{"kind", "gaussian_mixture"}, {"weights", w}, {"means", m}, {"variances", v}};
}

Reconstruction reconstruction_from_string(const std::string& s) {
  if (s == "centroid") return Reconstruction::centroid;
  if (s == "midpoint") return Reconstruction::midpoint;
  throw InvalidArgument("unknown reconstruction '" + s + "'");
}

std::vector<double> default_b_grid() {
  std::vector<double> out;
  for (int k = 0; k <= 16; ++k) out.push_back(std::pow(10.0, -2.0 + 0.25 * k));
  return out;
}

}  // namespace

double TargetSetting::resolve(double mmse) const {
  if (delta.has_value() == delta_db.has_value()) throw InvalidArgument("target needs exactly one of delta, delta_db");
  return delta ? *delta : emse_from_db(*delta_db, mmse);
}

double CostSetting::resolve() const {
  if (b.has_value() == platform.has_value()) throw InvalidArgument("cost needs exactly one of b, platform");
  return b ? *b : platform_b(*platform).b;
}

RunConfig RunConfig::defaults() {
  RunConfig c;
  c.target.delta_db = 0.5;
  c.cost.b = 2.0;
  c.pareto.b_grid = default_b_grid();
  c.pareto.mse_multiples = {2, 3, 4, 5, 6};
  c.pareto.ladder_db = {5, 2, 1, 0.5, 0.2, 0.1};
  return c;
}

void RunConfig::validate() const {
  system.validate();
  const double d = target.resolve(1.0);
  if (!(d > 0)) throw InvalidArgument("target must be positive");
  if (!(cost.resolve() >= 0)) throw InvalidArgument("b must be nonnegative");
  if (!(grid.dsigma_db > 0) || !(grid.dr > 0) || grid.r_max < grid.dr) throw InvalidArgument("bad dp resolution");
  if (solve.t_max < 1 || solve.patience < 1) throw InvalidArgument("t_max and patience must be >= 1");
  for (double r : schedule.rates)
    if (!(r >= 0)) throw InvalidArgument("schedule rates must be nonnegative");
  if (simulate.N == 0 || simulate.trials == 0) throw InvalidArgument("simulate.N and trials must be positive");
  for (double g : simulate.gammas)
    if (!(g >= 0)) throw InvalidArgument("bin sizes must be nonnegative");
  for (double b : pareto.b_grid)
    if (!(b >= 0)) throw InvalidArgument("pareto.b_grid entries must be nonnegative");
  for (double m : pareto.mse_multiples)
    if (!(m > 1)) throw InvalidArgument("pareto.mse_multiples must exceed 1");
}

RunConfig parse_config(const json& j) {
  RunConfig c = RunConfig::defaults();
  only_keys(j, "config",
            {"seed", "system", "rd", "dp", "target", "cost", "schedule", "simulate", "pareto", "independence"});
  read(j, "seed", c.seed);
  if (j.contains("system")) {
    const auto& s = j["system"];
    only_keys(s, "system", {"prior", "kappa", "sigma_z2", "P"});
    if (s.contains("prior")) c.system.prior = parse_prior(s["prior"]);
    read(s, "kappa", c.system.kappa);
    read(s, "sigma_z2", c.system.sigma_z2);
    read(s, "P", c.system.P);
  }
  if (j.contains("rd")) {
    const auto& r = j["rd"];
    only_keys(r, "rd", {"kind", "bin_constraint", "reconstruction", "max_rate", "anchor_db", "ba_points"});
    if (r.contains("kind")) c.rd.kind = rd_kind_from_string(r["kind"].get<std::string>());
    read(r, "bin_constraint", c.rd.bin_constraint);
    if (r.contains("reconstruction")) c.rd.reconstruction = reconstruction_from_string(r["reconstruction"]);
    read(r, "max_rate", c.rd.max_rate);
    read(r, "anchor_db", c.rd.anchor_db);
    read(r, "ba_points", c.rd.ba_points);
  }
  if (j.contains("dp")) {
    const auto& d = j["dp"];
    only_keys(d, "dp", {"dsigma_db", "dr", "r_max", "t_max", "patience", "lookup"});
    read(d, "dsigma_db", c.grid.dsigma_db);
    read(d, "dr", c.grid.dr);
    read(d, "r_max", c.grid.r_max);
    read(d, "t_max", c.solve.t_max);
    read(d, "patience", c.solve.patience);
    if (d.contains("lookup")) {
      const auto s = d["lookup"].get<std::string>();
      if (s == "linear") c.solve.lookup = Lookup::linear;
      else if (s == "nearest") c.solve.lookup = Lookup::nearest;
      else throw InvalidArgument("unknown lookup '" + s + "'");
    }
  }
  if (j.contains("target")) {
    const auto& t = j["target"];
    only_keys(t, "target", {"delta", "delta_db"});
    c.target = {};
    if (t.contains("delta")) c.target.delta = t["delta"].get<double>();
    if (t.contains("delta_db")) c.target.delta_db = t["delta_db"].get<double>();
  }
  if (j.contains("cost")) {
    const auto& k = j["cost"];
    only_keys(k, "cost", {"b", "platform"});
    c.cost = {};
    if (k.contains("b")) c.cost.b = k["b"].get<double>();
    if (k.contains("platform")) {
      const auto& p = k["platform"];
      only_keys(p, "cost.platform", {"name", "N", "M", "P", "b"});
      PlatformCost pc;
      if (p.contains("name")) pc.platform = platform_from_string(p["name"].get<std::string>());
      read(p, "N", pc.N);
      read(p, "M", pc.M);
      read(p, "P", pc.P);
      read(p, "b", pc.custom_b);
      c.cost.platform = pc;
    }
  }
  if (j.contains("schedule")) {
    const auto& s = j["schedule"];
    only_keys(s, "schedule", {"rates", "lossless_iterations"});
    if (s.contains("rates")) {
      if (!s["rates"].is_array()) throw InvalidArgument("schedule.rates must be an array");
      for (const auto& v : s["rates"]) c.schedule.rates.push_back(rate_from_json(v));
    }
    read(s, "lossless_iterations", c.schedule.lossless_iterations);
  }
  if (j.contains("simulate")) {
    const auto& s = j["simulate"];
    only_keys(s, "simulate", {"N", "trials", "T", "gammas", "onsager_scale", "dump_messages"});
    read(s, "N", c.simulate.N);
    read(s, "trials", c.simulate.trials);
    read(s, "T", c.simulate.T);
    read(s, "gammas", c.simulate.gammas);
    read(s, "onsager_scale", c.simulate.onsager_scale);
    read(s, "dump_messages", c.simulate.dump_messages);
  }
  if (j.contains("pareto")) {
    const auto& p = j["pareto"];
    only_keys(p, "pareto", {"b_grid", "mse_multiples", "ladder_db"});
    read(p, "b_grid", c.pareto.b_grid);
    read(p, "mse_multiples", c.pareto.mse_multiples);
    read(p, "ladder_db", c.pareto.ladder_db);
  }
  if (j.contains("independence")) {
    const auto& g = j["independence"];
    only_keys(g, "independence", {"gammas", "sigmas", "trials", "N", "P", "calibration_cells"});
    read(g, "gammas", c.independence.gammas);
    read(g, "sigmas", c.independence.sigmas);
    read(g, "trials", c.independence.trials);
    read(g, "N", c.independence.N);
    read(g, "P", c.independence.P);
    read(g, "calibration_cells", c.calibration_cells);
  }
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InvalidArgument("config '" + path + "': " + e.what());
  }
  return parse_config(j);
}

json to_json(const RunConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["system"] = {{"prior", prior_to_json(c.system.prior)},
                 {"kappa", c.system.kappa},
                 {"sigma_z2", c.system.sigma_z2},
                 {"P", c.system.P}};
  j["rd"] = {{"kind", std::string(to_string(c.rd.kind))},
             {"bin_constraint", c.rd.bin_constraint},
             {"reconstruction", c.rd.reconstruction == Reconstruction::centroid ? "centroid" : "midpoint"},
             {"max_rate", c.rd.max_rate},
             {"anchor_db", c.rd.anchor_db},
             {"ba_points", c.rd.ba_points}};
  j["dp"] = {{"dsigma_db", c.grid.dsigma_db},
             {"dr", c.grid.dr},
             {"r_max", c.grid.r_max},
             {"t_max", c.solve.t_max},
             {"patience", c.solve.patience},
             {"lookup", c.solve.lookup == Lookup::linear ? "linear" : "nearest"}};
  j["target"] = json::object();
  if (c.target.delta) j["target"]["delta"] = *c.target.delta;
  if (c.target.delta_db) j["target"]["delta_db"] = *c.target.delta_db;
  j["cost"] = json::object();
  if (c.cost.b) j["cost"]["b"] = *c.cost.b;
  if (c.cost.platform) {
    const auto& p = *c.cost.platform;
    j["cost"]["platform"] = {{"name", std::string(to_string(p.platform))}, {"N", p.N}, {"M", p.M}, {"P", p.P}};
    if (p.platform == Platform::custom) j["cost"]["platform"]["b"] = p.custom_b;
  }
  json rates = json::array();
  for (double r : c.schedule.rates) rates.push_back(rate_to_json(r));
  j["schedule"] = {{"rates", rates}, {"lossless_iterations", c.schedule.lossless_iterations}};
  j["simulate"] = {{"N", c.simulate.N},
                   {"trials", c.simulate.trials},
                   {"T", c.simulate.T},
                   {"gammas", c.simulate.gammas},
                   {"onsager_scale", c.simulate.onsager_scale},
                   {"dump_messages", c.simulate.dump_messages}};
  j["pareto"] = {{"b_grid", c.pareto.b_grid},
                 {"mse_multiples", c.pareto.mse_multiples},
                 {"ladder_db", c.pareto.ladder_db}};
  j["independence"] = {{"gammas", c.independence.gammas},
                       {"sigmas", c.independence.sigmas},
                       {"trials", c.independence.trials},
                       {"N", c.independence.N},
                       {"P", c.independence.P},
                       {"calibration_cells", c.calibration_cells}};
  return j;
}

std::string canonical_dump(const RunConfig& config) { return to_json(config).dump(2) + "\n"; }

std::string config_hash(const RunConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : canonical_dump(config)) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace mpamp
