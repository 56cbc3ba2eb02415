#include "hardsum/cli.hpp"

#include "hardsum/synthetic.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iomanip>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

namespace hardsum {

using nlohmann::ordered_json;

namespace {

bool is_hard_mode(const std::string& mode) {
  return mode == "deterministic" || mode == "individual" || mode == "third-moment";
}

/// Deterministic d grows with the budget it must absorb, so K comes first.
Index deterministic_query_budget(const RunConfig& c, double smoothness) {
  if (c.instance.query_budget > 0) return c.instance.query_budget;
  if (c.budget > 0) return static_cast<Index>(c.budget);
  const HardInstanceSpec probe =
      deterministic_params(c.instance.p, c.instance.n, c.instance.gap, smoothness, c.instance.epsilon, 0);
  return c.instance.n * (probe.chain_length + 3);
}

HardInstanceSpec hard_spec(const RunConfig& c) {
  const InstanceConfig& in = c.instance;
  if (in.mode == "deterministic") {
    const double l = in.smoothness > 0.0 ? in.smoothness : chain_smoothness_constant(in.p);
    return deterministic_params(in.p, in.n, in.gap, l, in.epsilon, deterministic_query_budget(c, l));
  }
  const double hat = in.hat_ell > 0.0 ? in.hat_ell : default_hat_ell(in.p);
  const double l = in.smoothness > 0.0 ? in.smoothness : hat;
  const std::optional<Index> d = in.d > 0 ? std::optional<Index>(in.d) : std::nullopt;
  return randomized_params(instance_mode_from_string(in.mode), in.p, in.n, in.gap, l, in.epsilon, hat, in.c0, d);
}

std::uint64_t default_budget(const RunConfig& c, const HardInstanceSpec* spec) {
  if (c.budget > 0) return c.budget;
  const auto n = static_cast<std::uint64_t>(c.instance.n);
  if (spec && spec->mode == InstanceMode::Deterministic) return n * static_cast<std::uint64_t>(spec->chain_length + 3);
  return 100 * n;
}

struct Problem {
  std::unique_ptr<FiniteSumFunction> function;
  std::unique_ptr<Oracle> oracle;
  std::optional<HardInstanceSpec> spec;
  ResistingOracle* resisting = nullptr;
};

Problem build_problem(const RunConfig& c, Rng& rng) {
  Problem p;
  const double eps = c.instance.epsilon;
  if (is_hard_mode(c.instance.mode)) {
    p.spec = hard_spec(c);
    if (p.spec->mode == InstanceMode::Deterministic) {
      auto oracle = std::make_unique<ResistingOracle>(*p.spec, Rng(rng()), eps);
      p.resisting = oracle.get();
      p.oracle = std::move(oracle);
    } else {
      p.function = std::make_unique<RandomizedHardInstance>(
          sample_randomized_instance(*p.spec, rng, c.instance.haar_rotation));
      p.oracle = std::make_unique<CountingOracle>(*p.function, eps);
    }
    return p;
  }
  Rng draw(rng());
  if (c.instance.mode == "quadratic") {
    p.function = std::make_unique<QuadraticFiniteSum>(make_quadratic_finite_sum(c.instance.n, c.instance.dim, draw));
  } else {
    p.function = std::make_unique<CubicFiniteSum>(make_cubic_finite_sum(c.instance.n, c.instance.dim, draw));
  }
  p.oracle = std::make_unique<CountingOracle>(*p.function, eps);
  return p;
}

/// L_2 for SVRC and mu: configured, the instance's own, or a sampled estimate.
double second_order_smoothness(const RunConfig& c, const Problem& p, Rng& rng) {
  if (c.instance.smoothness > 0.0) return c.instance.smoothness;
  if (p.spec) return p.spec->smoothness;
  const double est = estimate_smoothness(*p.function, SmoothnessMode::ThirdMoment, 200, rng).constant;
  return est > 0.0 ? est : 1.0;
}

ordered_json optional_json(const std::optional<std::uint64_t>& v) { return v ? ordered_json(*v) : ordered_json(); }

}  // namespace

ordered_json record_json(const TrajectoryRecord& r) {
  ordered_json j;
  j["iter"] = r.iter;
  j["epoch"] = r.epoch;
  j["step"] = r.step;
  j["f"] = r.f;
  j["grad_norm"] = r.grad_norm;
  j["mu"] = r.mu;
  j["h_norm"] = r.h_norm;
  j["q_val"] = r.q_val;
  j["q_grad"] = r.q_grad;
  j["q_hess"] = r.q_hess;
  j["i_queried"] = r.i_queried;
  j["q_total"] = r.q_total;
  j["q_cached"] = r.q_cached;
  return j;
}

std::string csv_header() { return "iter,epoch,step,f,grad_norm,mu,h_norm,q_val,q_grad,q_hess,i_queried,q_total,q_cached"; }

std::string csv_row(const TrajectoryRecord& r) {
  std::ostringstream o;
  o << std::setprecision(17) << r.iter << ',' << r.epoch << ',' << r.step << ',' << r.f << ',' << r.grad_norm << ','
    << r.mu << ',' << r.h_norm << ',' << r.q_val << ',' << r.q_grad << ',' << r.q_hess << ',' << r.i_queried << ','
    << r.q_total << ',' << r.q_cached;
  return o.str();
}

ordered_json instance_spec_json(const HardInstanceSpec& s) {
  ordered_json j;
  j["mode"] = to_string(s.mode);
  j["p"] = s.p;
  j["n"] = s.n;
  j["gap"] = s.gap;
  j["smoothness"] = s.smoothness;
  j["epsilon"] = s.epsilon;
  j["lambda"] = s.lambda;
  j["sigma"] = s.sigma;
  j["chain_length"] = s.chain_length;
  j["d"] = s.d;
  j["ell"] = s.ell;
  j["scale"] = s.scale;
  j["gradient_floor"] = s.gradient_floor;
  j["required_dimension"] = s.required_dimension;
  j["c0"] = s.c0;
  j["warnings"] = s.warnings;
  return j;
}

RunOutput run_once(const RunConfig& c, std::uint64_t seed) {
  Rng master(seed);
  Rng build_rng(master());
  Problem p = build_problem(c, build_rng);
  Rng estimate_rng(master());
  const std::uint64_t run_seed = master();
  const double l2 = second_order_smoothness(c, p, estimate_rng);
  const std::uint64_t budget = default_budget(c, p.spec ? &*p.spec : nullptr);
  const Vector x0 = Vector::Zero(p.oracle->dimension());
  const OptimizerConfig& oc = c.optimizer;

  RunResult result;
  ordered_json params;
  if (oc.name == "svrc") {
    SvrcParams sp = svrc_default_params(p.oracle->num_components(), p.oracle->dimension(), c.instance.gap, l2,
                                        c.instance.epsilon);
    if (oc.penalty > 0.0) sp.penalty = oc.penalty;
    if (oc.grad_batch > 0) sp.grad_batch = oc.grad_batch;
    if (oc.hess_batch > 0) sp.hess_batch = oc.hess_batch;
    if (oc.epochs > 0) sp.epochs = oc.epochs;
    if (oc.steps > 0) sp.steps = oc.steps;
    sp.batch_mode = batch_mode_from_string(oc.batch_mode);
    sp.seed = run_seed;
    if (c.budget == 0 && static_cast<double>(sp.epochs) * static_cast<double>(sp.steps) > 1e6) {
      throw std::invalid_argument("the SVRC schedule asks for " + std::to_string(sp.epochs) + " epochs of " +
                                  std::to_string(sp.steps) + " steps; set a budget or optimizer.epochs");
    }
    params["penalty"] = sp.penalty;
    params["grad_batch"] = sp.grad_batch;
    params["hess_batch"] = sp.hess_batch;
    params["epochs"] = sp.epochs;
    params["steps"] = sp.steps;
    params["batch_mode"] = to_string(sp.batch_mode);
    result = svrc_run(*p.oracle, x0, sp, c.budget > 0 ? std::optional<std::uint64_t>(c.budget) : std::nullopt);
  } else {
    RunMonitor monitor;
    monitor.mu_smoothness = l2;
    if (oc.name == "gd") {
      double step = oc.step;
      if (!(step > 0.0)) step = p.spec ? p.spec->sigma * p.spec->sigma / (20.0 * p.spec->scale) : 0.05;
      params["step"] = step;
      result = baseline_full_gd(*p.oracle, x0, step, budget, monitor);
    } else {
      double penalty = oc.penalty;
      if (!(penalty > 0.0)) {
        penalty = p.spec ? 20.0 * p.spec->scale / std::pow(p.spec->sigma, 3) : 2.0 * l2;
      }
      params["penalty"] = penalty;
      result = baseline_full_cubic(*p.oracle, x0, penalty, budget, monitor);
    }
  }

  RunOutput out;
  out.records.reserve(result.trajectory.size());
  for (const TrajectoryRecord& r : result.trajectory) out.records.push_back(record_json(r));
  out.trajectory = result.trajectory;

  const OracleLedger& ledger = result.ledger;
  ordered_json& s = out.summary;
  s["summary"] = true;
  s["seed"] = seed;
  s["mode"] = c.instance.mode;
  s["optimizer"] = oc.name;
  s["n"] = p.oracle->num_components();
  s["d"] = p.oracle->dimension();
  s["epsilon"] = c.instance.epsilon;
  s["smoothness"] = l2;
  s["params"] = params;
  s["iterations"] = result.trajectory.empty() ? 0 : result.trajectory.size() - 1;
  s["first_hit"] = optional_json(ledger.first_hit_queries);
  s["first_hit_iter"] = optional_json(ledger.first_hit);
  s["q_total"] = ledger.total_queries;
  s["q_val"] = ledger.value_queries;
  s["q_grad"] = ledger.gradient_queries;
  s["q_hess"] = ledger.hessian_queries;
  s["q_cached"] = ledger.cached_lookups;
  s["q_raw"] = ledger.raw_queries();
  s["out_iter"] = result.out_iter;
  if (result.out_iter < result.trajectory.size()) {
    const TrajectoryRecord& r = result.trajectory[result.out_iter];
    s["f_out"] = r.f;
    s["grad_norm_out"] = r.grad_norm;
    s["mu_out"] = r.mu;
  }
  s["increases"] = result.increases;
  s["aborted"] = result.aborted;
  if (result.aborted) s["abort_reason"] = result.abort_reason;

  if (p.resisting) {
    ResistingOracle& adv = *p.resisting;
    const Index k = adv.spec().chain_length;
    const std::vector<std::uint64_t> closed_by_queries = adv.round_close_queries();
    const bool all_rounds_by_queries = static_cast<Index>(closed_by_queries.size()) >= k;
    adv.finalize();
    const ResistingCertificate cert = resisting_certificate(adv);
    const ReplayReport replay = replay_archive(adv);
    s["chain_length"] = k;
    s["round_close_queries"] = closed_by_queries;
    if (all_rounds_by_queries) {
      const std::uint64_t last = closed_by_queries.back();
      s["final_round_queries"] = last;
      s["first_hit_after_final_round"] = !ledger.first_hit_queries || *ledger.first_hit_queries > last;
    } else {
      s["final_round_queries"] = nullptr;
      s["first_hit_after_final_round"] = nullptr;
    }
    ordered_json cj;
    cj["points"] = cert.gradient_norms.size();
    cj["bound"] = cert.bound;
    cj["min_norm"] = cert.min_norm;
    cj["all_exceed"] = cert.all_exceed;
    cj["max_final_overlap"] = replay.max_final_overlap;
    cj["max_replay_error"] = replay.max_relative_error;
    s["certificate"] = cj;
  }
  return out;
}

unsigned thread_cap() {
  if (const char* env = std::getenv("HARDSUM_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

std::string per_seed_path(const std::string& path, std::uint64_t seed, std::size_t num_seeds) {
  if (num_seeds == 1 || path.empty()) return path;
  const std::string tag = ".seed" + std::to_string(seed);
  const auto dot = path.find_last_of('.');
  const auto slash = path.find_last_of('/');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return path + tag;
  return path.substr(0, dot) + tag + path.substr(dot);
}

void write_jsonl(std::ostream& os, const RunOutput& r) {
  for (const ordered_json& j : r.records) os << j.dump() << '\n';
  os << r.summary.dump() << '\n';
}

}  // namespace

int cmd_gen(const RunConfig& c, const CliOptions& opts, std::ostream& out, std::ostream& err) {
  if (!is_hard_mode(c.instance.mode)) {
    err << "gen: mode '" << c.instance.mode << "' is a synthetic finite sum; nothing to generate\n";
    return kExitBadInstance;
  }
  HardInstanceSpec spec;
  try {
    spec = hard_spec(c);
  } catch (const InstanceTooSmall& e) {
    err << "error: " << e.what() << "\n";
    err << "hint: K >= 1 needs gap >= " << std::setprecision(17) << e.minimal_gap() << "\n";
    return kExitBadInstance;
  }

  if (!opts.quiet) {
    out << std::setprecision(10);
    out << "mode = " << to_string(spec.mode) << "\n";
    out << "p = " << spec.p << "\n";
    out << "n = " << spec.n << "\n";
    out << "lambda = " << spec.lambda << "\n";
    out << "sigma = " << spec.sigma << "\n";
    out << "K = " << spec.chain_length << "\n";
    if (spec.mode == InstanceMode::Deterministic) out << "K+1 = " << spec.chain_length + 1 << "\n";
    out << "d = " << spec.d << "\n";
    out << "d_required = " << spec.required_dimension << "\n";
    out << "scale = " << spec.scale << "\n";
    out << "gradient_floor = " << spec.gradient_floor << "\n";
    for (const std::string& w : spec.warnings) out << "warning: " << w << "\n";
  }

  ordered_json doc;
  doc["seed"] = c.seed;
  doc["spec"] = instance_spec_json(spec);
  if (c.out.empty()) {
    if (!opts.quiet) out << doc.dump(2) << "\n";
    return kExitOk;
  }
  {
    std::ofstream f(c.out);
    if (!f) {
      err << "gen: cannot write '" << c.out << "'\n";
      return kExitFailure;
    }
    f << doc.dump(2) << "\n";
  }
  if (spec.mode != InstanceMode::Deterministic) {
    // Same stream position as `run`, so both see the same B.
    Rng master(c.seed);
    Rng build_rng(master());
    const RandomizedHardInstance inst = sample_randomized_instance(spec, build_rng, c.instance.haar_rotation);
    write_basis_file(c.out + ".basis.bin", inst);
    if (!opts.quiet) out << "basis written to " << c.out << ".basis.bin\n";
  }
  return kExitOk;
}

int cmd_run(const RunConfig& c, const CliOptions& opts, std::ostream& out, std::ostream& err) {
  const auto num_seeds = static_cast<std::size_t>(c.optimizer.num_seeds);
  if (num_seeds > 1 && c.out.empty()) {
    err << "run: several seeds need --out so that each run gets its own file\n";
    return kExitBadInstance;
  }

  std::vector<RunOutput> results(num_seeds);
  std::vector<std::string> errors(num_seeds);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t k = next++; k < num_seeds; k = next++) {
      try {
        results[k] = run_once(c, c.seed + k);
      } catch (const InstanceTooSmall& e) {
        std::ostringstream msg;
        msg << e.what() << "; K >= 1 needs gap >= " << std::setprecision(17) << e.minimal_gap();
        errors[k] = msg.str();
      } catch (const std::exception& e) {
        errors[k] = e.what();
      }
    }
  };
  const unsigned threads = std::min<unsigned>(thread_cap(), static_cast<unsigned>(num_seeds));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  for (std::size_t k = 0; k < num_seeds; ++k) {
    if (!errors[k].empty()) {
      err << "run (seed " << c.seed + k << "): " << errors[k] << "\n";
      return kExitBadInstance;
    }
  }

  for (std::size_t k = 0; k < num_seeds; ++k) {
    const std::uint64_t seed = c.seed + k;
    const RunOutput& r = results[k];
    if (c.out.empty()) {
      if (!opts.quiet) write_jsonl(out, r);
    } else {
      const std::string path = per_seed_path(c.out, seed, num_seeds);
      std::ofstream f(path);
      if (!f) {
        err << "run: cannot write '" << path << "'\n";
        return kExitFailure;
      }
      write_jsonl(f, r);
      if (!opts.quiet) out << r.summary.dump() << "\n";
    }
    if (!opts.csv.empty()) {
      const std::string path = per_seed_path(opts.csv, seed, num_seeds);
      std::ofstream f(path);
      if (!f) {
        err << "run: cannot write '" << path << "'\n";
        return kExitFailure;
      }
      f << csv_header() << "\n";
      for (const TrajectoryRecord& t : r.trajectory) f << csv_row(t) << "\n";
    }
  }
  return kExitOk;
}

int cmd_verify(const RunConfig& c, const CliOptions& opts, std::ostream& out, std::ostream& err,
               const VerifyHooks& hooks) {
  const BatteryResult result = run_verification_battery(c.verify, c.seed, hooks);
  const std::string text = result.report.dump(2);
  if (!c.out.empty()) {
    std::ofstream f(c.out);
    if (!f) {
      err << "verify: cannot write '" << c.out << "'\n";
      return kExitFailure;
    }
    f << text << "\n";
  } else if (!opts.quiet) {
    out << text << "\n";
  }
  if (result.passed) return kExitOk;
  err << "verification failed:";
  for (const std::string& name : result.failed_sections) err << " " << name;
  err << "\n";
  for (const std::string& name : result.failed_sections) {
    err << name << ": " << result.report["sections"][name].dump(2) << "\n";
  }
  return kExitFailure;
}

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hard finite-sum instances, SVRC and their checks"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_path;
  std::optional<std::uint64_t> budget;
  CliOptions opts;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "INI config with [instance], [optimizer], [verify]");
    sub->add_option("--seed", seed, "RNG seed (overrides the config)");
    sub->add_option("--out", out_path, "Output path (overrides the config)");
    sub->add_option("--budget", budget, "Total oracle-query budget (overrides the config)");
    sub->add_flag("--quiet", opts.quiet, "Suppress stdout output");
    sub->add_option("--csv", opts.csv, "Also write the trajectory CSV projection here");
  };
  CLI::App* gen = app.add_subcommand("gen", "Derive the instance scalings and write the instance description");
  CLI::App* run = app.add_subcommand("run", "Run the configured optimizer and stream JSONL");
  CLI::App* verify = app.add_subcommand("verify", "Run the verification battery");
  add_common(gen);
  add_common(run);
  add_common(verify);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  RunConfig config;
  try {
    if (!config_path.empty()) config = load_config(config_path);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitBadInstance;
  }
  if (seed) config.seed = *seed;
  if (out_path) config.out = *out_path;
  if (budget) config.budget = *budget;

  try {
    if (gen->parsed()) return cmd_gen(config, opts, out, err);
    if (run->parsed()) return cmd_run(config, opts, out, err);
    return cmd_verify(config, opts, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitBadInstance;
  }
}

}  // namespace hardsum
