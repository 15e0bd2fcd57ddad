#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>

#include "CLI11.hpp"
#include "tcplr/analytic.hpp"
#include "tcplr/experiments.hpp"
#include "tcplr/harness.hpp"
#include "tcplr/oracle.hpp"

namespace fs = std::filesystem;
using namespace tcplr;

namespace {

// "-" means standard output.
struct Output {
  explicit Output(const std::string& path) {
    if (path == "-") return;
    if (const auto dir = fs::path(path).parent_path(); !dir.empty()) fs::create_directories(dir);
    file = std::make_unique<std::ofstream>(path);
    if (!*file) throw ConfigError("cannot write " + path);
  }
  std::ostream& os() { return file ? *file : std::cout; }
  std::unique_ptr<std::ofstream> file;
};

std::vector<analytic::GridPoint> load_grid(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open grid file " + path);
  return analytic::parse_grid(in);
}

std::vector<analytic::GridPoint> analytic_table_grid(const std::string& id) {
  const std::vector<RecoveryAlgo> algos{RecoveryAlgo::RH, RecoveryAlgo::PRR, RecoveryAlgo::QARR, RecoveryAlgo::BARR};
  if (id == "T1") return analytic::make_grid(algos, {false, true}, {10, 50, 100}, {0.1}, {20e6}, {0.7});
  if (id == "T2") return analytic::make_grid(algos, {false, true}, {10}, {0.05, 0.15, 0.2}, {20e6}, {0.7});
  throw ConfigError("analytic --table accepts T1 or T2");
}

int cmd_analytic(const std::string& grid_file, const std::string& table, const std::string& out) {
  if (grid_file.empty() == table.empty()) throw ConfigError("analytic needs exactly one of --grid or --table");
  const auto grid = table.empty() ? load_grid(grid_file) : analytic_table_grid(table);
  Output o(out);
  analytic::write_csv_header(o.os());
  for (const auto& row : analytic::sweep(grid)) analytic::write_csv_row(o.os(), row);
  return 0;
}

int cmd_oracle(const std::string& grid_file, const std::string& out) {
  const auto grid = load_grid(grid_file);
  Output o(out);
  auto& os = o.os();
  os << "algo,or,n,U_ms,C_mbps,beta,analytic_imin_ms,oracle_imin_ms,abs_diff_ms,service_ms,within_one_service\n";
  for (const auto& g : grid) {
    const auto p = analytic::params_for(g);
    os << to_string(g.algo) << ',' << (g.or_enabled ? 1 : 0) << ',' << g.n << ',' << g.u_s * 1e3 << ','
       << g.rate_bps / 1e6 << ',' << g.beta << ',';
    try {
      const double a = analytic::imin(g.algo, g.or_enabled, p, g.n, g.beta).imin_s;
      const double r = oracle::oracle_imin(g.algo, g.or_enabled, p, g.n, g.beta);
      const double svc = service_time(p);
      os << a * 1e3 << ',' << r * 1e3 << ',' << std::abs(a - r) * 1e3 << ',' << svc * 1e3 << ','
         << (std::abs(a - r) <= svc + 1e-12 ? 1 : 0) << '\n';
    } catch (const ConfigError& e) {
      os << ",,,,skipped: " << e.what() << '\n';
    }
  }
  return 0;
}

void write_episodes(std::ostream& os, const ExperimentResult& r) {
  write_resolved_config(os, r.config);
  os << "run_id,seed,t_entry_s,t_exit_s,t_first_retx_s,recovery_utilization,utilization_to_exit,idle_s,stall_s,"
        "max_rtt_ms,aborted_by_rto\n";
  for (std::size_t i = 0; i < r.runs.size(); ++i) {
    for (const auto& e : r.runs[i].episode_detail) {
      os << i << ',' << r.runs[i].seed << ',' << e.t_entry << ',' << e.t_exit << ',' << e.t_first_retx << ',';
      if (!std::isnan(e.utilization)) os << e.utilization;
      os << ',';
      if (e.util_to_exit >= 0) os << e.util_to_exit;
      os << ',' << e.idle_s << ',' << e.stall_s << ',' << e.max_rtt_s * 1e3 << ',' << (e.aborted_by_rto ? 1 : 0)
         << '\n';
    }
  }
}

void write_extras(std::ostream& os, const ExperimentResult& r) {
  write_resolved_config(os, r.config);
  os << "run_id,seed,throughput_steady_mbps,link_idle_recovery_s,stall_time_s,recovery_time_s,"
        "max_rtt_post_recovery_ms,base_rtt_ms,episodes,episodes_aborted,retransmits,beyond_awnd_packets,"
        "out_of_window_accepted,out_of_window_discarded,discards_detected,lost_retransmits,dupacks_no_new_sack,"
        "link_drops,delivered_packets,completed\n";
  auto row = [&](const std::string& id, const RunMetrics& m) {
    os << id << ',' << m.seed << ',' << m.throughput_steady_bps / 1e6 << ',' << m.link_idle_recovery_s << ','
       << m.stall_time_s << ',' << m.recovery_time_s << ',' << m.max_rtt_post_recovery_s * 1e3 << ','
       << m.base_rtt_s * 1e3 << ',' << m.episodes << ',' << m.episodes_aborted << ',' << m.retransmits << ','
       << m.beyond_awnd_packets << ',' << m.out_of_window_accepted << ',' << m.out_of_window_discarded << ','
       << m.discards_detected << ',' << m.lost_retransmits << ',' << m.dupacks_no_new_sack << ',' << m.link_drops
       << ',' << m.delivered_packets << ',' << (m.completed ? 1 : 0) << '\n';
  };
  for (std::size_t i = 0; i < r.runs.size(); ++i) row(std::to_string(i), r.runs[i]);
  row("total", r.mean);
}

int cmd_simulate(const std::string& config, const std::string& out_dir) {
  const auto cfg = load_config(config);
  const auto result = run_experiment(cfg);
  fs::create_directories(out_dir);
  std::ofstream summary(fs::path(out_dir) / "summary.csv");
  std::ofstream episodes(fs::path(out_dir) / "episodes.csv");
  std::ofstream extras(fs::path(out_dir) / "extras.csv");
  if (!summary || !episodes || !extras) throw ConfigError("cannot write into " + out_dir);
  write_summary(summary, result);
  write_episodes(episodes, result);
  write_extras(extras, result);
  write_summary(std::cout, result);
  return result.mean.stream_intact ? 0 : 3;
}

int cmd_table(const std::string& id, const std::string& out, const experiments::TableOptions& opts) {
  if (!experiments::is_table_id(id)) throw ConfigError("unknown table id '" + id + "'");
  const auto rows = experiments::reproduce_table(id, opts);
  Output o(out);
  o.os() << "# table = " << id << "\n# runs = " << opts.runs << "\n# duration_s = " << opts.duration_s
         << "\n# seed = " << opts.seed << '\n';
  experiments::write_table_csv(o.os(), rows);
  return 0;
}

int cmd_trace(const std::string& config, const std::string& out) {
  const auto cfg = load_config(config);
  Output o(out);
  const auto m = emit_trace(cfg, o.os());
  return m.stream_intact ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TCP loss-recovery simulator, analytic model and table reproduction"};
  app.require_subcommand(1);

  std::string grid, table, out = "-", config, out_dir, table_id;
  experiments::TableOptions topts;

  auto* an = app.add_subcommand("analytic", "closed-form idle time and utilization");
  an->add_option("--grid", grid, "grid file (key = v1,v2 lines)");
  an->add_option("--table", table, "T1 or T2");
  an->add_option("--out", out, "output CSV, '-' for stdout");

  auto* orc = app.add_subcommand("oracle", "event-level idle time next to the closed form");
  orc->add_option("--grid", grid, "grid file")->required();
  orc->add_option("--out", out, "output CSV, '-' for stdout");

  auto* sim = app.add_subcommand("simulate", "run a configured experiment");
  sim->add_option("--config", config, "config file")->required();
  sim->add_option("--out", out_dir, "output directory")->required();

  auto* tab = app.add_subcommand("table", "reproduce a published table");
  tab->add_option("--id", table_id, "T1, T2, T4, T5, T6, T8 or T14")->required();
  tab->add_option("--out", out, "output CSV, '-' for stdout");
  tab->add_option("--runs", topts.runs, "seeds per random-loss cell")->check(CLI::PositiveNumber);
  tab->add_option("--duration", topts.duration_s, "random-loss run length in seconds")->check(CLI::PositiveNumber);
  tab->add_option("--seed", topts.seed, "first seed");

  auto* tr = app.add_subcommand("trace", "per-ACK time series of one run");
  tr->add_option("--config", config, "config file")->required();
  tr->add_option("--out", out, "output CSV, '-' for stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*an) return cmd_analytic(grid, table, out);
    if (*orc) return cmd_oracle(grid, out);
    if (*sim) return cmd_simulate(config, out_dir);
    if (*tab) return cmd_table(table_id, out, topts);
    if (*tr) return cmd_trace(config, out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const InvariantViolation& e) {
    std::cerr << "invariant violation: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
