// Command-line driver: se, dp, simulate, pareto and indep subcommands.
#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include "mpamp/config.hpp"
#include "mpamp/csv.hpp"
#include "mpamp/errors.hpp"
#include "mpamp/independence.hpp"
#include "mpamp/rate_scheduler.hpp"
#include "mpamp/simulator.hpp"
#include "mpamp/state_evolution.hpp"
#include "mpamp/tradeoff.hpp"

namespace fs = std::filesystem;
using namespace mpamp;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kUsage = 1, kInfeasible = 2, kNumerical = 3 };

struct Context {
  RunConfig config;
  std::string hash;
  fs::path out;
  Parallelism par;
};

std::ofstream open_out(const Context& ctx, const std::string& name) {
  fs::create_directories(ctx.out);
  std::ofstream os(ctx.out / name);
  if (!os) throw Error("cannot write " + (ctx.out / name).string());
  return os;
}

std::ofstream open_csv(const Context& ctx, const std::string& name) {
  auto os = open_out(ctx, name);
  csv::header(os, ctx.hash, ctx.config.seed);
  return os;
}

void write_json(const Context& ctx, const std::string& name, const json& j) {
  open_out(ctx, name) << j.dump(2) << '\n';
}

json trajectory_json(const Trajectory& tr) {
  json out = json::array();
  for (const auto& s : tr.states)
    out.push_back({{"t", s.t},
                   {"rate", std::isinf(s.rate) ? json("inf") : json(s.rate)},
                   {"distortion", s.distortion},
                   {"sigma2", s.sigma2},
                   {"mse", s.mse},
                   {"emse_db", emse_db(s.emse, tr.mmse)}});
  return out;
}

std::unique_ptr<RdFamily> build_family(const Context& ctx, const StateEvolution& se, double sigma2_hi) {
  std::cerr << "building " << to_string(ctx.config.rd.kind) << " rate-distortion family\n";
  return std::make_unique<RdFamily>(ctx.config.system.prior, ctx.config.system.P, se.fixed_point().sigma_inf2,
                                    sigma2_hi, ctx.config.rd, ctx.par);
}

int run_se(const Context& ctx) {
  const auto& cfg = ctx.config;
  StateEvolution se(cfg.system);
  Trajectory tr;
  const bool lossless = cfg.schedule.rates.empty() ||
                        std::all_of(cfg.schedule.rates.begin(), cfg.schedule.rates.end(),
                                    [](double r) { return std::isinf(r) || r == 0.0; });
  if (lossless) {
    std::vector<double> d;
    if (cfg.schedule.rates.empty()) {
      d.assign(cfg.schedule.lossless_iterations, 0.0);
      tr = run_distortions(se, d);
    } else {
      // Only skips and lossless steps: no curve needed.
      tr.mmse = se.mmse();
      tr.initial_mse = cfg.system.prior.second_moment();
      tr.initial_sigma2 = se.initial_sigma2();
      double sigma2 = se.initial_sigma2();
      for (std::size_t t = 0; t < cfg.schedule.rates.size(); ++t) {
        const double r = cfg.schedule.rates[t];
        SEState s{t + 1, r, 0.0, sigma2, 0.0, 0.0};
        s.mse = r == 0.0 ? (t == 0 ? tr.initial_mse : tr.states.back().mse) : se.mse(sigma2);
        s.emse = s.mse - tr.mmse;
        if (r != 0.0) sigma2 = se.step(sigma2);
        tr.states.push_back(s);
      }
    }
  } else {
    auto rd = build_family(ctx, se, se.initial_sigma2());
    tr = run_schedule(se, cfg.schedule.rates, *rd);
  }
  auto os = open_csv(ctx, "se_trajectory.csv");
  tr.write_csv(os);
  std::cout << "T=" << tr.states.size() << " final_mse=" << tr.final_mse()
            << " emse_db=" << emse_db(tr.final_emse(), tr.mmse) << '\n';
  return kOk;
}

int run_dp(const Context& ctx) {
  const auto& cfg = ctx.config;
  StateEvolution se(cfg.system);
  const double delta = cfg.target.resolve(se.mmse());
  const double b = cfg.cost.resolve();
  auto grid = DpGrid::for_target(se, cfg.grid, delta);
  auto rd = build_family(ctx, se, grid.sigma2(0));
  Transitions tr(se, *rd, std::move(grid), ctx.par);
  const auto sol = solve(tr, b, delta, cfg.solve);
  const auto& s = sol.schedule;
  json rates = json::array();
  for (double r : s.rates) rates.push_back(r);
  write_json(ctx, "schedule.json",
             {{"config", to_json(cfg)},
              {"config_hash", ctx.hash},
              {"b", b},
              {"delta", delta},
              {"rates", rates},
              {"r_agg", s.r_agg()},
              {"t", s.T()},
              {"cost", s.cost()},
              {"trajectory", trajectory_json(s.trajectory)}});
  auto os = open_csv(ctx, "dp_trajectory.csv");
  s.trajectory.write_csv(os);
  std::cout << "b=" << b << " T=" << s.T() << " R_agg=" << s.r_agg() << " cost=" << s.cost()
            << " final_mse=" << s.trajectory.final_mse() << '\n';
  return kOk;
}

int run_simulate(const Context& ctx) {
  const auto& cfg = ctx.config;
  StateEvolution se(cfg.system);
  std::vector<double> gammas = cfg.simulate.gammas;
  if (gammas.empty()) gammas = random_admissible_bins(se, cfg.simulate.T, cfg.seed);
  SimulationOptions opts;
  opts.N = cfg.simulate.N;
  opts.onsager_scale = cfg.simulate.onsager_scale;
  const auto ens = run_ensemble(se, gammas, cfg.simulate.trials, cfg.seed, opts, ctx.par);
  {
    auto os = open_csv(ctx, "ensemble.csv");
    ens.write_csv(os);
  }
  if (cfg.simulate.dump_messages) {
    auto os = open_csv(ctx, "messages.csv");
    os << "t,node,gamma,bins\n";
    SimulationOptions dump = opts;
    dump.message_sink = [&](const NodeMessage& m) {
      std::string bins;
      for (std::size_t i = 0; i < m.bins.size(); ++i) {
        if (i) bins += ' ';
        bins += std::to_string(m.bins[i]);
      }
      os << m.t << ',' << m.node << ',' << m.gamma << ',' << csv::quote(bins) << '\n';
    };
    run_trial(cfg.system, gammas, derive_seed(cfg.seed, {0}), dump);
  }
  if (!ens.stderr_defined) std::cerr << "warning: one trial, standard errors undefined\n";
  const auto check = residual_variance_check(ens);
  std::cout << "trials=" << ens.trials << " max_gap_db=" << ens.max_abs_gap_db()
            << " residual_flags=" << check.flagged.size() << '\n';
  return kOk;
}

int run_pareto(const Context& ctx) {
  const auto& cfg = ctx.config;
  StateEvolution se(cfg.system);
  const double mmse = se.mmse();
  std::vector<double> deltas;
  for (double m : cfg.pareto.mse_multiples) deltas.push_back((m - 1.0) * mmse);
  double smallest = *std::min_element(deltas.begin(), deltas.end());
  for (double db : cfg.pareto.ladder_db) smallest = std::min(smallest, emse_from_db(db, mmse));
  auto grid = DpGrid::for_target(se, cfg.grid, smallest);
  auto rd = build_family(ctx, se, grid.sigma2(0));
  Transitions tr(se, *rd, std::move(grid), ctx.par);

  const auto cells = sweep(tr, cfg.pareto.b_grid, deltas, cfg.solve, ctx.par);
  {
    auto os = open_csv(ctx, "sweep.csv");
    os << "b,delta_db,status,T,R_agg,mse\n";
    os.precision(10);
    for (const auto& c : cells) {
      os << c.b << ',' << emse_db(c.delta, mmse) << ',';
      if (c.point) {
        os << "ok," << c.point->T << ',' << c.point->r_agg << ',' << c.point->mse << '\n';
      } else {
        std::cerr << "skipped infeasible cell b=" << c.b << " delta=" << c.delta << ": " << c.error << '\n';
        os << csv::quote("infeasible: " + c.error) << ",,,\n";
      }
    }
  }
  const auto points = collect_points(cells);
  const auto front = pareto_filter(points);
  {
    auto os = open_csv(ctx, "pareto.csv");
    write_pareto_csv(os, front, mmse);
  }
  json jp = json::array();
  for (const auto& p : front)
    jp.push_back({{"T", p.T}, {"r_agg", p.r_agg}, {"mse", p.mse}, {"b", p.b}, {"delta", p.delta}, {"rates", p.rates}});

  json report = {{"config_hash", ctx.hash}, {"mmse", mmse}, {"points", points.size()}, {"pareto", front.size()}};
  try {
    const auto cv = convexity_check(points, mmse);
    auto slice = [](const ConvexityReport& r) {
      return json{{"slices", r.slices}, {"triples", r.triples}, {"worst_violation", r.worst_violation},
                  {"worst_slice", r.worst_slice}};
    };
    report["convexity"] = {{"fixed_T", slice(cv.fixed_T)}, {"fixed_target", slice(cv.fixed_target)}};
  } catch (const InvalidArgument& e) {
    std::cerr << "convexity check skipped: " << e.what() << '\n';
  }
  if (!cfg.pareto.ladder_db.empty()) {
    const auto cr = corner_points(tr, cfg.cost.resolve(), cfg.pareto.ladder_db);
    report["corners"] = {{"empty_at_signal_power", cr.empty_at_signal_power},
                         {"ladder_db", cr.ladder_db},
                         {"ladder_T", cr.ladder_T},
                         {"ladder_r_agg", cr.ladder_r_agg},
                         {"T_nondecreasing", cr.T_nondecreasing},
                         {"r_agg_increasing", cr.r_agg_increasing},
                         {"centralized_T", cr.centralized_T},
                         {"expensive_compute_T", cr.expensive_compute_T}};
  }
  write_json(ctx, "pareto.json", {{"config", to_json(cfg)}, {"config_hash", ctx.hash}, {"points", jp}});
  write_json(ctx, "pareto_report.json", report);
  std::cout << "cells=" << cells.size() << " feasible=" << points.size() << " pareto=" << front.size() << '\n';
  return kOk;
}

int run_indep(const Context& ctx) {
  const auto& cfg = ctx.config;
  const auto grid = rejection_grid(cfg.system.prior, cfg.independence, cfg.seed, ctx.par);
  {
    auto os = open_csv(ctx, "independence.csv");
    grid.write_csv(os);
  }
  const auto cal = calibrate(cfg.calibration_cells, cfg.independence.trials, cfg.independence.N, cfg.seed, ctx.par);
  double worst = 0.0;
  for (const auto& c : grid.cells)
    if (c.admissible()) worst = std::max({worst, c.reject_wn, c.reject_wnx});
  write_json(ctx, "independence.json",
             {{"config_hash", ctx.hash},
              {"calibration_tests", cal.tests},
              {"calibration_rejection", cal.mean_rejection},
              {"worst_admissible_rejection", worst}});
  std::cout << "cells=" << grid.cells.size() << " worst_admissible=" << worst
            << " calibration=" << cal.mean_rejection << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rate allocation and trade-off analysis for multi-processor AMP"};
  app.require_subcommand(0, 1);
  std::string config_path, out_dir = "out";
  int jobs = 1;
  std::optional<std::uint64_t> seed;
  bool print_config = false;
  app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "override the configured seed");
  app.add_flag("--print-config", print_config, "print the effective configuration and exit");
  auto* se = app.add_subcommand("se", "state evolution for a schedule");
  auto* dp = app.add_subcommand("dp", "optimal coding-rate schedule");
  auto* sim = app.add_subcommand("simulate", "Monte Carlo MP-AMP ensemble");
  auto* pareto = app.add_subcommand("pareto", "Pareto sweep over b and the target");
  auto* indep = app.add_subcommand("indep", "quantization-error independence grid");
  app.fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    Context ctx;
    ctx.config = config_path.empty() ? RunConfig::defaults() : load_config(config_path);
    if (seed) ctx.config.seed = *seed;
    ctx.hash = config_hash(ctx.config);
    ctx.out = out_dir;
    ctx.par.jobs = jobs;
    if (print_config) {
      std::cout << canonical_dump(ctx.config);
      return kOk;
    }
    if (*se) return run_se(ctx);
    if (*dp) return run_dp(ctx);
    if (*sim) return run_simulate(ctx);
    if (*pareto) return run_pareto(ctx);
    if (*indep) return run_indep(ctx);
    std::cerr << app.help();
    return kUsage;
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const Infeasible& e) {
    std::cerr << "infeasible: " << e.what() << '\n';
    return kInfeasible;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
}
