// Command-line runner. Subcommands:
//   run          one experiment -> metrics.csv + summary.json
//   compare      dnh vs static over N seeds -> per-seed CSVs + report.txt
//   gradcheck    analytic-vs-finite-difference oracle suite
//   sweep        compare across values of one meta parameter
//   dump-stream  materialize a stream as CSV
//
// Exit codes: 0 success, 1 check failure, 2 configuration error, 3 numeric
// failure. Nothing is written outside --out, and nothing is written at all
// until the config has parsed and validated.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dnh/config.hpp"
#include "dnh/errors.hpp"
#include "dnh/harness.hpp"
#include "dnh/memory.hpp"
#include "dnh/meta.hpp"
#include "dnh/metrics.hpp"
#include "dnh/numerics.hpp"
#include "dnh/rng.hpp"
#include "dnh/streams.hpp"

namespace fs = std::filesystem;
using namespace dnh;

namespace {

int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::config:
      return 2;
    case ErrorKind::numeric:
      return 3;
    default:
      return 1;
  }
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  require(os.good(), ErrorKind::invalid_state, "cannot write " + path.string());
}

ExperimentConfig load_with_overrides(const std::string& config_path, uint64_t* seed_override,
                                     long* steps_override) {
  ExperimentConfig cfg = load_config_file(config_path);
  if (seed_override) {
    // The override selects a replica: it moves the run seed and the stream
    // seed together, and the echoed config (and so the hash) records it.
    cfg.seed = *seed_override;
    cfg.stream.seed = *seed_override;
  }
  if (steps_override) cfg.total_steps = *steps_override;
  validate_config(cfg);
  return cfg;
}

int default_jobs() {
  if (const char* env = std::getenv("DNH_JOBS")) {
    int v = std::atoi(env);
    if (v >= 1) return v;
  }
  return 1;
}

std::string id_header(const ExperimentConfig& cfg) {
  std::ostringstream os;
  os << "# config_hash " << hash_hex(config_hash(cfg)) << "\n";
  os << "# seed " << cfg.seed << "\n";
  os << "# stream_seed " << cfg.stream.seed << "\n";
  return os.str();
}

int cmd_run(const std::string& config_path, const std::string& out_dir, uint64_t* seed_override,
            long* steps_override) {
  ExperimentConfig cfg = load_with_overrides(config_path, seed_override, steps_override);
  MetricsLog log = run_experiment(cfg);
  fs::create_directories(out_dir);
  {
    std::ostringstream os;
    write_metrics_csv(os, log);
    write_file(fs::path(out_dir) / "metrics.csv", os.str());
  }
  {
    std::ostringstream os;
    write_summary_text(os, log);
    write_file(fs::path(out_dir) / "summary.json", os.str());
  }
  std::printf("run complete: %ld steps, final L=%d, outputs in %s\n", log.total_steps,
              log.records.empty() ? 0 : log.records.back().levels, out_dir.c_str());
  return 0;
}

int cmd_compare(const std::string& config_path, const std::string& out_dir, int seeds, int jobs,
                uint64_t* seed_override, long* steps_override) {
  ExperimentConfig cfg = load_with_overrides(config_path, seed_override, steps_override);
  CompareReport rep = run_compare(cfg, seeds, jobs);
  fs::create_directories(out_dir);
  for (int i = 0; i < rep.n_seeds; ++i) {
    std::ostringstream d, s;
    write_metrics_csv(d, rep.dnh_logs[i]);
    write_metrics_csv(s, rep.static_logs[i]);
    write_file(fs::path(out_dir) / ("dnh_seed" + std::to_string(rep.seeds[i]) + ".csv"), d.str());
    write_file(fs::path(out_dir) / ("static_seed" + std::to_string(rep.seeds[i]) + ".csv"),
               s.str());
  }
  std::string report = compare_report_text(rep);
  write_file(fs::path(out_dir) / "report.txt", report);
  std::fputs(report.c_str(), stdout);
  return 0;
}

int cmd_dump_stream(const std::string& config_path, const std::string& out_dir) {
  ExperimentConfig cfg = load_config_file(config_path);
  validate_config(cfg);
  std::ostringstream os;
  os << id_header(cfg);
  dump_stream_csv(os, cfg.stream);
  fs::create_directories(out_dir);
  write_file(fs::path(out_dir) / "stream.csv", os.str());
  std::printf("stream dumped: %ld samples to %s/stream.csv\n",
              cfg.stream.segment_len * cfg.stream.num_segments, out_dir.c_str());
  return 0;
}

// ---- gradcheck ----

struct CheckResult {
  std::string name;
  double worst_rel = 0.0;
  bool ok = true;
};

double rel_err(double got, double want) {
  return std::fabs(got - want) / std::max(1.0, std::fabs(want));
}

// Analytic level-loss gradient against central differences in theta.
CheckResult check_level_grad(uint64_t seed, int trials, bool corrupt) {
  CheckResult r{"level_loss_grad", 0.0, true};
  RngState rng = RngState(seed).fork(11);
  for (int trial = 0; trial < trials; ++trial) {
    int d = 2 + static_cast<int>(rng.next_u64() % 7);
    MemoryModule m(1, 1, d, 1.0);
    for (double& v : m.theta.data) v = rng.normal(0.0, 1.0);
    Vector input(d), target(d);
    for (double& v : input) v = rng.normal(0.0, 1.0);
    for (double& v : target) v = rng.normal(0.0, 1.0);
    Matrix analytic = level_loss_grad(m, input, target);
    if (corrupt) analytic.data[0] += 1e-2;

    Vector flat = m.theta.data;
    auto loss = [&](const Vector& th) {
      Matrix t = m.theta;
      t.data = th;
      Vector e = sub(matvec(t, input), target);
      return 0.5 * dot(e, e);
    };
    Vector fd = central_fd(loss, flat);
    for (size_t i = 0; i < fd.size(); ++i)
      r.worst_rel = std::max(r.worst_rel, rel_err(fd[i], analytic.data[i]));
  }
  r.ok = r.worst_rel < 1e-5;
  return r;
}

// Analytic gradient of the self-modulation fit objective in (psi_w, psi_b).
CheckResult check_meta_net_grad(uint64_t seed, int trials) {
  CheckResult r{"meta_net_objective_grad", 0.0, true};
  RngState rng = RngState(seed).fork(12);
  for (int trial = 0; trial < trials; ++trial) {
    int d = 2 + static_cast<int>(rng.next_u64() % 7);
    MemoryModule m(1, 1, d, 1.0);
    for (double& v : m.theta.data) v = rng.normal(0.0, 0.5);
    MetaNet net(d);
    for (double& v : net.psi_w) v = rng.normal(0.0, 0.3);
    for (double& v : net.psi_b) v = rng.normal(0.0, 0.3);
    Vector k(d), v(d), c(d), prev(4 * d);
    for (double& x : k) x = rng.normal(0.0, 1.0);
    for (double& x : v) x = rng.normal(0.0, 1.0);
    for (double& x : c) x = rng.normal(0.0, 1.0);
    for (double& x : prev) x = rng.normal(0.0, 0.2);
    double beta_reg = 0.5 * rng.next_unit();

    Vector analytic = meta_net_objective_grad(m, net, k, v, c, beta_reg, prev);
    Vector flat = concat(net.psi_w, net.psi_b, {});
    auto obj = [&](const Vector& psi) {
      MetaNet n2(d);
      for (int i = 0; i < 3 * d; ++i) n2.psi_w[i] = psi[i];
      for (int i = 0; i < d; ++i) n2.psi_b[i] = psi[3 * d + i];
      return meta_net_objective(m, n2, k, v, c, beta_reg, prev);
    };
    Vector fd = central_fd(obj, flat);
    for (size_t i = 0; i < fd.size(); ++i)
      r.worst_rel = std::max(r.worst_rel, rel_err(fd[i], analytic[i]));
  }
  r.ok = r.worst_rel < 1e-5;
  return r;
}

// Frequency finite differences on a planted quadratic score: the estimate
// must recover 2a(f - f0) and curvature 2a.
CheckResult check_freq_fd(uint64_t seed, int trials) {
  CheckResult r{"fd_frequency_gradient", 0.0, true};
  RngState rng = RngState(seed).fork(13);
  MetaParams p;
  for (int trial = 0; trial < trials; ++trial) {
    Hierarchy h(4, 2, 5, {2.0, 1.0}, p.f_min, p.f_max);
    int level = 1 + static_cast<int>(rng.next_u64() % 2);
    double f = 1.0 + 3.0 * rng.next_unit();  // keep f +- fd_h inside bounds
    h.module(level).freq = f;
    double a = 0.1 + 1.9 * rng.next_unit();
    double f0 = 1.0 + 3.0 * rng.next_unit();
    RolloutEval eval = [&](const Hierarchy& hh) {
      double df = hh.module(level).freq - f0;
      return a * df * df + 0.25;
    };
    FreqGradResult g = fd_frequency_gradient(h, level, p.rollout_k, eval, p, true);
    r.worst_rel = std::max(r.worst_rel, rel_err(g.grad, 2.0 * a * (f - f0)));
    r.worst_rel = std::max(r.worst_rel, rel_err(g.hess, 2.0 * a));
  }
  r.ok = r.worst_rel < 1e-5;
  return r;
}

int cmd_gradcheck(uint64_t seed, int trials, bool corrupt) {
  require(trials >= 1, ErrorKind::invalid_argument, "gradcheck: trials must be >= 1");
  std::vector<CheckResult> results;
  results.push_back(check_level_grad(seed, trials, corrupt));
  results.push_back(check_meta_net_grad(seed, trials));
  results.push_back(check_freq_fd(seed, trials));
  bool all_ok = true;
  for (const CheckResult& r : results) {
    std::printf("%-26s worst rel err %.3e  %s\n", r.name.c_str(), r.worst_rel,
                r.ok ? "ok" : "FAIL");
    all_ok = all_ok && r.ok;
  }
  return all_ok ? 0 : 1;
}

// ---- sweep ----

struct SweepRow {
  std::string value;
  CompareReport rep;
};

void apply_sweep_value(ExperimentConfig& cfg, const std::string& param, const std::string& value) {
  auto as_double = [&] {
    try {
      size_t pos = 0;
      double v = std::stod(value, &pos);
      require(pos == value.size(), ErrorKind::config, "sweep: bad numeric value '" + value + "'");
      return v;
    } catch (const std::exception&) {
      fail(ErrorKind::config, "sweep: bad numeric value '" + value + "'");
    }
  };
  if (param == "delta_threshold")
    cfg.meta.delta_threshold = as_double();
  else if (param == "gamma")
    cfg.meta.gamma = as_double();
  else if (param == "eta_f")
    cfg.meta.eta_f = as_double();
  else if (param == "l_max") {
    double v = as_double();
    cfg.l_max = static_cast<int>(v);
    require(static_cast<double>(cfg.l_max) == v, ErrorKind::config,
            "sweep: l_max values must be integers");
  } else {
    fail(ErrorKind::config,
         "sweep: unknown param '" + param +
             "' (sweepable: delta_threshold, gamma, l_max, eta_f)");
  }
}

int cmd_sweep(const std::string& config_path, const std::string& out_dir,
              const std::string& param, const std::string& values_csv, int seeds, int jobs,
              long* steps_override) {
  ExperimentConfig base = load_with_overrides(config_path, nullptr, steps_override);
  std::vector<std::string> values;
  std::stringstream ss(values_csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) values.push_back(tok);
  }
  require(!values.empty(), ErrorKind::config, "sweep: --values is empty");

  // Validate every point before anything runs or gets written.
  std::vector<ExperimentConfig> cfgs;
  for (const std::string& v : values) {
    ExperimentConfig c = base;
    apply_sweep_value(c, param, v);
    validate_config(c);
    cfgs.push_back(c);
  }

  std::vector<SweepRow> rows(values.size());
  std::vector<std::function<void()>> tasks;
  for (size_t i = 0; i < values.size(); ++i) {
    tasks.push_back([&rows, &cfgs, &values, seeds, i] {
      rows[i].value = values[i];
      rows[i].rep = run_compare(cfgs[i], seeds, 1);
    });
  }
  run_parallel(tasks, jobs);

  fs::create_directories(out_dir);
  std::ostringstream os;
  os << "== sweep " << param << " ==\n";
  os << "base config_hash: " << hash_hex(config_hash(base)) << "\n";
  os << "seeds per point: " << seeds << " (base " << base.seed << ")\n";
  os << "  value        regret_ratio      dnh_aa     dnh_bwt   static_bwt  within_bound\n";
  for (const SweepRow& row : rows) {
    char line[200];
    std::snprintf(line, sizeof line, "  %-10s %14.6g %11.6g %11.6g %12.6g  %s\n",
                  row.value.c_str(), row.rep.regret_ratio, row.rep.mean_dnh_aa,
                  row.rep.mean_dnh_bwt, row.rep.mean_static_bwt,
                  row.rep.regret_within_bound ? "yes" : "no");
    os << line;
  }
  write_file(fs::path(out_dir) / "sweep.txt", os.str());
  for (size_t i = 0; i < rows.size(); ++i) {
    fs::path sub = fs::path(out_dir) / (param + "=" + rows[i].value);
    fs::create_directories(sub);
    write_file(sub / "report.txt", compare_report_text(rows[i].rep));
  }
  std::fputs(os.str().c_str(), stdout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dynamic nested hierarchy experiment runner"};
  app.require_subcommand(1);

  std::string config_path, out_dir, param, values_csv;
  uint64_t seed = 1;
  bool seed_set = false;
  long steps = 0;
  bool steps_set = false;
  int seeds = 3;
  int jobs = default_jobs();
  int trials = 100;
  bool corrupt = false;

  auto add_common = [&](CLI::App* cmd, bool with_out) {
    cmd->add_option("--config", config_path, "experiment config file")->required();
    if (with_out) cmd->add_option("--out", out_dir, "output directory")->required();
  };

  CLI::App* run = app.add_subcommand("run", "run one experiment");
  add_common(run, true);
  run->add_option("--seed", seed, "override run + stream seed")->each([&](const std::string&) {
    seed_set = true;
  });
  run->add_option("--steps", steps, "step-count override (0 = full stream)")
      ->each([&](const std::string&) { steps_set = true; });

  CLI::App* compare = app.add_subcommand("compare", "dnh vs static over several seeds");
  add_common(compare, true);
  compare->add_option("--seeds", seeds, "number of replica seeds")->check(CLI::PositiveNumber);
  compare->add_option("--jobs", jobs, "max concurrent jobs")->check(CLI::PositiveNumber);
  compare->add_option("--seed", seed, "override base seed")->each([&](const std::string&) {
    seed_set = true;
  });
  compare->add_option("--steps", steps, "step-count override")->each([&](const std::string&) {
    steps_set = true;
  });

  CLI::App* gradcheck = app.add_subcommand("gradcheck", "analytic vs finite-difference suite");
  gradcheck->add_option("--seed", seed, "rng seed");
  gradcheck->add_option("--trials", trials, "instances per check")->check(CLI::PositiveNumber);
  gradcheck->add_flag("--corrupt", corrupt, "inject a gradient error (sensitivity test)")
      ->group("");  // hidden

  CLI::App* sweep = app.add_subcommand("sweep", "compare across values of one meta parameter");
  add_common(sweep, true);
  sweep->add_option("--param", param, "delta_threshold | gamma | l_max | eta_f")->required();
  sweep->add_option("--values", values_csv, "comma-separated values")->required();
  sweep->add_option("--seeds", seeds, "number of replica seeds")->check(CLI::PositiveNumber);
  sweep->add_option("--jobs", jobs, "max concurrent sweep points")->check(CLI::PositiveNumber);
  sweep->add_option("--steps", steps, "step-count override")->each([&](const std::string&) {
    steps_set = true;
  });

  CLI::App* dump = app.add_subcommand("dump-stream", "materialize the configured stream as CSV");
  add_common(dump, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;  // usage problems are configuration errors
  }

  try {
    uint64_t* seed_ovr = seed_set ? &seed : nullptr;
    long* steps_ovr = steps_set ? &steps : nullptr;
    if (run->parsed()) return cmd_run(config_path, out_dir, seed_ovr, steps_ovr);
    if (compare->parsed())
      return cmd_compare(config_path, out_dir, seeds, jobs, seed_ovr, steps_ovr);
    if (gradcheck->parsed()) return cmd_gradcheck(seed, trials, corrupt);
    if (sweep->parsed())
      return cmd_sweep(config_path, out_dir, param, values_csv, seeds, jobs, steps_ovr);
    if (dump->parsed()) return cmd_dump_stream(config_path, out_dir);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "unexpected error: %s\n", e.what());
    return 1;
  }
  return 0;
}
