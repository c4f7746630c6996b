// Command line driver for the co-design toolkit. Subcommands mirror the
// pipeline: generate inputs, synthesize a gain, factorize it into a
// power-constrained codebook, simulate the closed loop, and run the two
// studies. Exit code 0 on success, 1 when a result misses its certificate
// (synthesis non-convergence, factorization residual, study invariant) or
// any input is malformed.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <oac/experiments.hpp>
#include <oac/io.hpp>

namespace {

using namespace oac;

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

struct GenerateOpts {
  std::string out;
  // plant
  bool ball_and_beam = false;
  int states = 4, inputs = 2, outputs = 2;
  double delta = 0.1;
  // channel
  std::string topology_path;
  double sigma2 = 0.0;
  // topology
  int actuators = 2, sensors = 2;
  std::uint64_t seed = 1;
};

int run_generate_plant(const GenerateOpts& o) {
  PlantModel plant = o.ball_and_beam ? ball_and_beam_plant(o.delta)
                                     : random_plant(o.states, o.inputs, o.outputs, o.seed);
  save_plant(plant, o.out);
  std::printf("wrote plant (%d states, %d inputs, %d outputs) to %s\n", plant.states(),
              plant.inputs(), plant.outputs(), o.out.c_str());
  return 0;
}

int run_generate_topology(const GenerateOpts& o) {
  auto topo = NetworkTopology::full(o.actuators, o.sensors);
  save_topology(topo, o.out);
  std::printf("wrote full %dx%d topology to %s\n", o.actuators, o.sensors, o.out.c_str());
  return 0;
}

int run_generate_channel(const GenerateOpts& o) {
  auto topo = load_topology(o.topology_path);
  auto H = sample_channel(topo, o.seed, o.sigma2);
  save_channel(H, o.out);
  std::printf("wrote channel draw (seed %llu, sigma2 %g) to %s\n",
              static_cast<unsigned long long>(o.seed), o.sigma2, o.out.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// synthesize
// ---------------------------------------------------------------------------

struct SynthesizeOpts {
  std::string plant_path, topology_path, out;
  double gmax = std::numeric_limits<double>::infinity();
};

int run_synthesize(const SynthesizeOpts& o) {
  auto plant = load_plant(o.plant_path);
  auto topo = load_topology(o.topology_path);
  auto cs = GainConstraintSet::from_topology(
      topo, std::isinf(o.gmax) ? std::nullopt : std::optional<double>(o.gmax));
  auto res = synthesize(plant, cs);
  save_synthesis(res, o.out);
  double rho = spectral_radius(closed_loop_matrix(plant, res.G));
  std::printf("status %s, gamma %.6g, closed-loop spectral radius %.4f, %d outer iterations\n",
              to_string(res.status), res.gamma, rho, res.outer_iterations);
  std::printf("wrote synthesis result to %s\n", o.out.c_str());
  if (res.status != SynthesisStatus::Converged) {
    std::fprintf(stderr, "synthesis did not converge; result written for inspection\n");
    return 1;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// factorize
// ---------------------------------------------------------------------------

struct FactorizeOpts {
  std::string gain_path, channel_path, out;
  std::string budget;
  int slots = 4;
  std::uint64_t seed = 1;
  AdmmOptions admm;
};

int run_factorize(const FactorizeOpts& o) {
  auto syn = load_synthesis(o.gain_path);
  auto H = load_channel(o.channel_path);
  Matrix M = target_matrix(syn.G, H);
  auto budgets_list = detail::parse_list(o.budget, "budget");
  PowerBudget budgets = budgets_list.size() == 1
                            ? PowerBudget::uniform(static_cast<int>(M.rows()), budgets_list[0])
                            : PowerBudget(Eigen::Map<const Vector>(
                                  budgets_list.data(), static_cast<int>(budgets_list.size())));
  auto res = run_admm(OacProblem(M, budgets, o.slots), o.admm, o.seed);
  save_code(res, o.out);
  std::printf("status %s after %d iterations, product residual %.3g, worst KKT residual %.3g\n",
              to_string(res.status), res.iterations, res.primal_residual,
              res.kkt.max_residual());
  std::printf("wrote codebook to %s\n", o.out.c_str());
  if (res.primal_residual > o.admm.primal_tol) {
    std::fprintf(stderr, "factorization missed the product tolerance %.3g\n", o.admm.primal_tol);
    return 1;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateOpts {
  std::string system_path, plant_path, channel_path, code_path, out;
  std::string x0;
  int runs = 100, horizon = 50;
  std::uint64_t seed = 1;
  std::string save_system_path;
};

ClosedLoopSystem assemble_system(const SimulateOpts& o) {
  if (!o.system_path.empty()) return load_system(o.system_path);
  if (o.plant_path.empty() || o.channel_path.empty() || o.code_path.empty())
    throw std::runtime_error("simulate needs either --system or all of --plant/--channel/--code");
  auto plant = load_plant(o.plant_path);
  auto H = load_channel(o.channel_path);
  auto code = load_code(o.code_path);
  Matrix G = reconstruct_gain(code.code, H);
  return ClosedLoopSystem{closed_loop_matrix(plant, G), plant.B(), code.code.D, H.sigma2()};
}

int run_simulate(const SimulateOpts& o) {
  ClosedLoopSystem sys = assemble_system(o);
  sys.validate();
  if (!o.save_system_path.empty()) {
    save_system(sys, o.save_system_path);
    std::printf("wrote assembled closed loop to %s\n", o.save_system_path.c_str());
  }

  std::optional<Vector> fixed_x0;
  if (!o.x0.empty()) {
    auto vals = detail::parse_list(o.x0, "x0");
    detail::require(static_cast<int>(vals.size()) == sys.A_hat.rows(),
                    "simulate: x0 length must match the state dimension");
    fixed_x0 = Eigen::Map<const Vector>(vals.data(), static_cast<int>(vals.size()));
  }

  std::ofstream out(o.out);
  if (!out) throw std::runtime_error("simulate: cannot open " + o.out);
  std::vector<double> stable_mses;
  int diverged = 0;
  out << "run,mse,diverged\n";
  for (int r = 0; r < o.runs; ++r) {
    Vector x0;
    if (fixed_x0) {
      x0 = *fixed_x0;
    } else {
      auto rng = make_rng(derive_seed(derive_seed(o.seed, 1), r));
      x0 = detail::random_unit_vector(rng, static_cast<int>(sys.A_hat.rows()));
    }
    auto [traj, mse] = run_trajectory(sys, x0, o.horizon, derive_seed(derive_seed(o.seed, 2), r));
    out << r << ',' << detail::format_double(mse) << ',' << (traj.diverged ? 1 : 0) << '\n';
    if (traj.diverged) ++diverged;
    else stable_mses.push_back(mse);
  }
  auto [mean, sd] = detail::mean_and_std(stable_mses);
  double unstable = static_cast<double>(diverged) / o.runs;
  out << "summary," << detail::format_double(mean) << ',' << detail::format_double(unstable)
      << '\n';
  out << "# mse_std " << detail::format_double(sd) << '\n';
  if (!out) throw std::runtime_error("simulate: write failed for " + o.out);
  std::printf("%d runs: mean MSE %.6g (std %.3g), unstable fraction %.3g\n", o.runs, mean, sd,
              unstable);
  std::printf("wrote per-run results to %s\n", o.out.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// experiment
// ---------------------------------------------------------------------------

struct ExperimentOpts {
  std::string out_dir;
  std::string config_path;
  int trials = -1;  // -1 = keep config/default
  std::uint64_t seed = 0;
  bool seed_set = false;
  double tau0 = -1.0, alpha = -1.0, beta = -1.0;
  int slots = -1;
};

ExperimentConfig resolve_config(const ExperimentOpts& o, ExperimentConfig cfg) {
  if (!o.config_path.empty()) cfg = load_config(o.config_path);
  if (o.trials > 0) cfg.trials = o.trials;
  if (o.seed_set) cfg.seed = o.seed;
  if (o.tau0 > 0) cfg.tau0 = o.tau0;
  if (o.alpha > 0) cfg.alpha = o.alpha;
  if (o.beta > 0) cfg.beta = o.beta;
  if (o.slots > 0) cfg.slots = o.slots;
  cfg.out_dir = o.out_dir;
  return cfg;
}

void write_outputs(const ResultTable& table, const ExperimentConfig& cfg,
                   const std::string& csv_name) {
  std::filesystem::create_directories(cfg.out_dir);
  auto dir = std::filesystem::path(cfg.out_dir);
  emit_table(table, (dir / csv_name).string());
  emit_plotdata(table, (dir / "plot").string());
  save_config(cfg, (dir / "config.txt").string());
  std::printf("wrote %s, plot/, and config.txt under %s (config %s)\n", csv_name.c_str(),
              cfg.out_dir.c_str(), config_hash(cfg).c_str());
}

double series_at(const ResultTable& t, double x, const std::string& series) {
  for (const auto& r : t.rows())
    if (r.x == x && r.series == series) return r.y;
  throw std::runtime_error("missing row " + series);
}

double std_at(const ResultTable& t, double x, const std::string& series) {
  for (const auto& r : t.rows())
    if (r.x == x && r.series == series) return r.ystd;
  throw std::runtime_error("missing row " + series);
}

int check(bool ok, const std::string& what) {
  std::printf("%s: %s\n", ok ? "invariant ok" : "INVARIANT FAILED", what.c_str());
  return ok ? 0 : 1;
}

int run_fig2(const ExperimentOpts& o) {
  ExperimentConfig cfg = resolve_config(o, stability_sweep_defaults());
  auto table = stability_sweep(cfg);
  write_outputs(table, cfg, "stability.csv");

  int rc = 0;
  for (double p : cfg.power_grid) {
    double cons = series_at(table, p, "constrained-admm");
    double base = series_at(table, p, "baseline");
    rc |= check(std::isfinite(cons) && std::isfinite(base),
                "counted trials at P_max = " + detail::format_double(p));
    if (!std::isfinite(cons) || !std::isfinite(base)) continue;
    rc |= check(cons == 0.0,
                "constrained series fully stable at P_max = " + detail::format_double(p));
    rc |= check(base >= cons,
                "baseline at least as unstable at P_max = " + detail::format_double(p));
  }
  return rc;
}

int run_fig3(const ExperimentOpts& o) {
  ExperimentConfig cfg = resolve_config(o, mse_vs_snr_defaults());
  auto table = mse_vs_snr(cfg);
  write_outputs(table, cfg, "mse_vs_snr.csv");

  int rc = 0;
  std::vector<double> snrs;
  for (double p : cfg.power_grid) snrs.push_back(snr_db(p, cfg.sigma2));
  std::vector<std::string> series;
  for (double b : cfg.gain_bounds) series.push_back(detail::gain_bound_series(b));

  for (const auto& s : series) {
    bool finite = true, monotone = true;
    for (std::size_t i = 0; i < snrs.size(); ++i) {
      finite = finite && std::isfinite(series_at(table, snrs[i], s));
      if (i + 1 < snrs.size())
        monotone = monotone && series_at(table, snrs[i + 1], s) <=
                                   series_at(table, snrs[i], s) + std_at(table, snrs[i], s);
    }
    rc |= check(finite, "every point feasible for series " + s);
    rc |= check(finite && monotone, "MSE nonincreasing in SNR (1 std slack) for series " + s);
  }
  bool have_unconstrained =
      std::find(series.begin(), series.end(), "unconstrained") != series.end();
  if (have_unconstrained) {
    for (const auto& s : series) {
      if (s == "unconstrained") continue;
      bool below = true, dnorm_below = true;
      for (double x : snrs) {
        below = below && series_at(table, x, s) <=
                             series_at(table, x, "unconstrained") +
                                 std_at(table, x, "unconstrained");
        dnorm_below = dnorm_below && series_at(table, x, s + "/dnorm") <=
                                         series_at(table, x, "unconstrained/dnorm");
      }
      rc |= check(below, "bounded series " + s + " within 1 std of unconstrained or lower");
      rc |= check(dnorm_below, "decoder norms of " + s + " at or below unconstrained");
    }
  }
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wireless control co-design toolkit"};
  app.require_subcommand(1);
  int rc = 0;

  // Shared solver knobs, usable before or after any subcommand name; the
  // sentinel values mean "keep the subcommand's own default".
  ExperimentOpts exp;
  app.add_option("--tau0", exp.tau0, "Step growth scale of the splitting scheme");
  app.add_option("--alpha", exp.alpha, "Decoder proximal weight");
  app.add_option("--beta", exp.beta, "Precoder proximal weight");
  app.add_option("--slots", exp.slots, "Code length (transmissions per control step)");

  // generate
  GenerateOpts gen;
  auto* generate = app.add_subcommand("generate", "Create plant, topology, and channel files");
  generate->require_subcommand(1);
  auto* gplant = generate->add_subcommand("plant", "Random ensemble plant or the testbed plant");
  gplant->add_flag("--ball-and-beam", gen.ball_and_beam, "Sampled ball-and-beam testbed");
  gplant->add_option("--states", gen.states, "State dimension (random plant)");
  gplant->add_option("--inputs", gen.inputs, "Actuator count (random plant)");
  gplant->add_option("--outputs", gen.outputs, "Sensor count (random plant)");
  gplant->add_option("--delta", gen.delta, "Sampling period (ball-and-beam)");
  gplant->add_option("--seed", gen.seed, "Draw seed (random plant)");
  gplant->add_option("--out", gen.out, "Output file")->required();
  gplant->callback([&] { rc = run_generate_plant(gen); });
  auto* gtopo = generate->add_subcommand("topology", "Full bipartite topology");
  gtopo->add_option("--actuators", gen.actuators, "Actuator count")->required();
  gtopo->add_option("--sensors", gen.sensors, "Sensor count")->required();
  gtopo->add_option("--out", gen.out, "Output file")->required();
  gtopo->callback([&] { rc = run_generate_topology(gen); });
  auto* gchan = generate->add_subcommand("channel", "Rayleigh fading draw on a topology");
  gchan->add_option("--topology", gen.topology_path, "Topology file")->required();
  gchan->add_option("--seed", gen.seed, "Draw seed");
  gchan->add_option("--sigma2", gen.sigma2, "Receiver noise variance");
  gchan->add_option("--out", gen.out, "Output file")->required();
  gchan->callback([&] { rc = run_generate_channel(gen); });

  // synthesize
  SynthesizeOpts syn;
  auto* synth = app.add_subcommand("synthesize", "Topology-structured gain synthesis");
  synth->add_option("--plant", syn.plant_path, "Plant file")->required();
  synth->add_option("--topology", syn.topology_path, "Topology file")->required();
  synth->add_option("--gmax", syn.gmax, "Frobenius cap on the gain");
  synth->add_option("--out", syn.out, "Output synthesis file")->required();
  synth->callback([&] { rc = run_synthesize(syn); });

  // factorize
  FactorizeOpts fac;
  auto* fact = app.add_subcommand("factorize", "Split a gain into a power-constrained codebook");
  fact->add_option("--gain", fac.gain_path, "Synthesis result file")->required();
  fact->add_option("--channel", fac.channel_path, "Channel file")->required();
  fact->add_option("--budget", fac.budget, "Per-sensor power cap: scalar or comma list")
      ->required();
  fact->add_option("--slots", fac.slots, "Code length (transmissions per control step)");
  fact->add_option("--seed", fac.seed, "Factor initialization seed");
  fact->add_option("--primal-tol", fac.admm.primal_tol, "Product residual tolerance");
  fact->add_option("--max-iters", fac.admm.max_iters, "Iteration budget");
  fact->add_option("--out", fac.out, "Output codebook file")->required();
  fact->callback([&] {
    // Shared solver knobs land in exp during parse; apply before running.
    if (exp.tau0 > 0) fac.admm.tau0 = exp.tau0;
    if (exp.alpha > 0) fac.admm.alpha = exp.alpha;
    if (exp.beta > 0) fac.admm.beta = exp.beta;
    if (exp.slots > 0 && fact->count("--slots") == 0) fac.slots = exp.slots;
    rc = run_factorize(fac);
  });

  // simulate
  SimulateOpts sim;
  auto* simu = app.add_subcommand("simulate", "Monte-Carlo closed-loop simulation");
  simu->add_option("--system", sim.system_path, "Closed-loop system file");
  simu->add_option("--plant", sim.plant_path, "Plant file (with --channel and --code)");
  simu->add_option("--channel", sim.channel_path, "Channel file");
  simu->add_option("--code", sim.code_path, "Codebook file");
  simu->add_option("--runs", sim.runs, "Monte-Carlo runs");
  simu->add_option("--horizon", sim.horizon, "Steps per run");
  simu->add_option("--seed", sim.seed, "Base seed");
  simu->add_option("--x0", sim.x0, "Fixed initial state (comma list, default random per run)");
  simu->add_option("--save-system", sim.save_system_path, "Also write the assembled loop");
  simu->add_option("--out", sim.out, "Per-run MSE table")->required();
  simu->callback([&] { rc = run_simulate(sim); });

  // experiment
  auto* expe = app.add_subcommand("experiment", "Run the two studies");
  expe->require_subcommand(1);
  auto add_common = [&](CLI::App* sub, const char* trials_name) {
    sub->add_option(trials_name, exp.trials, "Trials per point");
    sub->add_option("--seed", exp.seed, "Master seed")->each([&](const std::string&) {
      exp.seed_set = true;
    });
    sub->add_option("--config", exp.config_path, "Config file (flags override its fields)");
    sub->add_option("--out", exp.out_dir, "Output directory")->required();
  };
  auto* fig2 = expe->add_subcommand("fig2", "Stability sweep over transmit power");
  add_common(fig2, "--trials");
  fig2->callback([&] { rc = run_fig2(exp); });
  auto* fig3 = expe->add_subcommand("fig3", "Ball-and-beam MSE versus SNR");
  add_common(fig3, "--runs");
  fig3->callback([&] { rc = run_fig3(exp); });

  // Let options given after a subcommand name climb to the parent, so the
  // shared knobs work in any position.
  for (auto* sub : {generate, gplant, gtopo, gchan, synth, fact, simu, expe, fig2, fig3})
    sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return rc;
}
