// Acceptance checks. Prints one PASS/FAIL line per criterion; with
// `--criterion N` only that one runs. Exit status is 0 only if every
// selected criterion passes.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "tcplr/analytic.hpp"
#include "tcplr/experiments.hpp"
#include "tcplr/harness.hpp"
#include "tcplr/oracle.hpp"

using namespace tcplr;
namespace ex = tcplr::experiments;

namespace {

struct Verdict {
  bool pass = true;
  std::ostringstream detail;
  void fail_if(bool bad) {
    if (bad) pass = false;
  }
};

std::string fmt(double v, int p = 3) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(p) << v;
  return os.str();
}

// Every simulated run in this binary contributes to the integrity check.
bool g_all_intact = true;
int g_runs_checked = 0;

ExperimentResult run(ExperimentConfig c) {
  c.instrumented = true;
  auto r = run_experiment(c);
  for (const auto& m : r.runs) {
    g_all_intact = g_all_intact && m.stream_intact;
    ++g_runs_checked;
  }
  return r;
}

const std::vector<analytic::GridPoint>& grid() {
  static const auto g = analytic::property_grid();
  return g;
}

// ---------------------------------------------------------------------------

Verdict criterion1() {
  Verdict v;
  int checked = 0, skipped = 0, bad = 0;
  std::ostringstream worst;
  double worst_excess = 0;
  for (const auto& g : grid()) {
    const auto p = analytic::params_for(g);
    if (g.n >= awnd(p)) {
      ++skipped;
      continue;
    }
    const double a = analytic::imin(g.algo, g.or_enabled, p, g.n, g.beta).imin_s;
    const double o = oracle::oracle_imin(g.algo, g.or_enabled, p, g.n, g.beta);
    const double svc = service_time(p);
    ++checked;
    if (std::abs(a - o) > svc + 1e-12) {
      ++bad;
      const double excess = std::abs(a - o) / svc;
      if (excess > worst_excess) {
        worst_excess = excess;
        worst.str("");
        worst << to_string(g.algo) << (g.or_enabled ? "+or" : "") << " n=" << g.n << " U=" << g.u_s * 1e3
              << "ms C=" << g.rate_bps / 1e6 << "Mbps beta=" << g.beta << " analytic=" << fmt(a * 1e3)
              << "ms oracle=" << fmt(o * 1e3) << "ms";
      }
    }
  }
  v.fail_if(bad > 0);
  v.detail << checked << " points compared, " << skipped << " skipped (n >= AW), " << bad
           << " outside one service time";
  if (bad > 0) v.detail << "; worst " << fmt(worst_excess, 1) << " service times at " << worst.str();
  return v;
}

Verdict criterion2() {
  Verdict v;
  LinkParams p;
  const std::int64_t ns[3] = {10, 50, 100};
  const double rh[3] = {0.054, 0.294, 0.474};
  const double other[3] = {0.054, 0.294, 0.594};
  for (auto algo : {RecoveryAlgo::RH, RecoveryAlgo::PRR, RecoveryAlgo::QARR, RecoveryAlgo::BARR}) {
    v.detail << to_string(algo) << " {";
    for (int k = 0; k < 3; ++k) {
      const double eta = analytic::imin(algo, false, p, ns[k], 0.7).eta;
      const double ref = algo == RecoveryAlgo::RH ? rh[k] : other[k];
      v.fail_if(std::abs(eta - ref) > 0.03);
      v.detail << (k ? "," : "") << fmt(eta);
    }
    v.detail << "} ";
  }
  v.detail << "vs RH {0.054,0.294,0.474}, others {0.054,0.294,0.594}, tolerance 0.03";
  return v;
}

Verdict criterion3() {
  Verdict v;
  const double us[3] = {0.05, 0.15, 0.2};
  const double ref[3] = {0.108, 0.036, 0.027};
  for (auto algo : {RecoveryAlgo::RH, RecoveryAlgo::PRR, RecoveryAlgo::QARR, RecoveryAlgo::BARR}) {
    v.detail << to_string(algo) << " {";
    for (int k = 0; k < 3; ++k) {
      LinkParams p;
      p.rtt_prop_s = us[k];
      const double eta = analytic::imin(algo, false, p, 10, 0.7).eta;
      v.fail_if(std::abs(eta - ref[k]) > 0.03);
      v.detail << (k ? "," : "") << fmt(eta);
    }
    v.detail << "} ";
  }
  v.detail << "vs {0.108,0.036,0.027}, tolerance 0.03";
  return v;
}

Verdict criterion4() {
  Verdict v;
  int points = 0, bad_eta = 0, bad_idle = 0;
  double worst_idle = 0;
  for (const auto& g : grid()) {
    if (!g.or_enabled || (g.algo != RecoveryAlgo::QARR && g.algo != RecoveryAlgo::BARR)) continue;
    const auto p = analytic::params_for(g);
    if (g.n >= awnd(p)) continue;
    ++points;
    if (analytic::imin(g.algo, true, p, g.n, g.beta).eta != 1.0) ++bad_eta;
    const double idle = oracle::oracle_imin(g.algo, true, p, g.n, g.beta);
    worst_idle = std::max(worst_idle, idle / service_time(p));
    if (idle > service_time(p) + 1e-12) ++bad_idle;
  }
  v.fail_if(bad_eta > 0 || bad_idle > 0);
  v.detail << points << " grid points; eta != 1 at " << bad_eta << "; best-case idle above one service time at "
           << bad_idle << " (max " << fmt(worst_idle, 2) << " service times)";
  return v;
}

Verdict criterion5() {
  Verdict v;
  const std::int64_t bursts[3] = {10, 50, 100};
  const double delays[3] = {50, 150, 200};
  const double ref_rh_burst[3] = {0.74, 0.74, 0.51}, ref_prr_burst[3] = {0.74, 0.74, 0.74};
  const double ref_rh_delay[3] = {0.74, 0.73, 0.73}, ref_prr_delay[3] = {0.74, 0.73, 0.73};
  int misses = 0;
  auto cell = [&](RecoveryAlgo a, std::int64_t n, double d, double ref) {
    const auto c = ex::burst_scenario(a, n, d, true, ex::kRefinedSndbufFactor);
    const double u = run(c).mean.recovery_utilization;
    bool ok;
    if (a == RecoveryAlgo::QARR || a == RecoveryAlgo::BARR) {
      ok = u >= 0.93;
    } else {
      ok = std::abs(u - ref) <= 0.06;
    }
    if (!ok) {
      ++misses;
      v.detail << ' ' << to_string(a) << "(n=" << n << ",U=" << d << ")=" << fmt(u);
    }
    return u;
  };
  std::ostringstream all;
  for (auto a : {RecoveryAlgo::RH, RecoveryAlgo::PRR, RecoveryAlgo::QARR, RecoveryAlgo::BARR}) {
    all << ' ' << to_string(a) << " bursts{";
    for (int k = 0; k < 3; ++k) {
      const double ref = a == RecoveryAlgo::RH ? ref_rh_burst[k] : ref_prr_burst[k];
      all << (k ? "," : "") << fmt(cell(a, bursts[k], 100, ref));
    }
    all << "} delays{";
    for (int k = 0; k < 3; ++k) {
      const double ref = a == RecoveryAlgo::RH ? ref_rh_delay[k] : ref_prr_delay[k];
      all << (k ? "," : "") << fmt(cell(a, 10, delays[k], ref));
    }
    all << '}';
  }
  v.fail_if(misses > 0);
  const std::string missed = v.detail.str();
  v.detail.str("");
  v.detail << "recovery utilization:" << all.str() << "; " << misses << " cells miss";
  if (misses > 0) v.detail << ":" << missed;
  return v;
}

// Fraction of completed recovery episodes in which the application stalled,
// pooled over a sweep of trigger phases.
double stalled_episode_share(RecoveryAlgo a, double factor, int* episodes_out = nullptr) {
  int eps = 0;
  double stalled = 0;
  for (const auto& c : ex::stall_phase_sweep(a, factor)) {
    const auto m = run(c).runs.front();
    eps += static_cast<int>(m.episodes);
    stalled += m.stall_episode_fraction * static_cast<double>(m.episodes);
  }
  if (episodes_out) *episodes_out = eps;
  return eps ? stalled / eps : std::nan("");
}

Verdict criterion6() {
  Verdict v;
  int eps = 0;
  const double prr2 = stalled_episode_share(RecoveryAlgo::PRR, 2, &eps);
  v.fail_if(!(prr2 >= 0.45 && prr2 <= 0.70));
  v.detail << "prr factor 2: " << fmt(prr2) << " of " << eps << " episodes stall (target [0.45,0.70])";
  for (auto a : {RecoveryAlgo::PRR, RecoveryAlgo::QARR, RecoveryAlgo::BARR}) {
    const double f3 = stalled_episode_share(a, 3);
    v.fail_if(f3 != 0);
    v.detail << "; " << to_string(a) << " factor 3: " << fmt(f3);
  }
  for (auto a : {RecoveryAlgo::QARR, RecoveryAlgo::BARR}) {
    const double f2 = stalled_episode_share(a, 2, &eps);
    v.fail_if(f2 < 1.0);
    v.detail << "; " << to_string(a) << " factor 2: " << fmt(f2) << " of " << eps << " episodes (target 1)";
  }
  return v;
}

struct SpikeRun {
  RunMetrics m;
  double max_rtt_from_first_loss = 0;
};

// Slow start queues up to half a window before any loss happens; that burst
// is the same with or without the optimizations, so the span that is judged
// starts at the first recovery entry and runs to the end of the transfer.
SpikeRun spike_run(ExperimentConfig c) {
  c.instrumented = true;
  std::vector<TraceRow> rows;
  SpikeRun s{run_once(c, c.seed, &rows), 0};
  g_all_intact = g_all_intact && s.m.stream_intact;
  ++g_runs_checked;
  if (s.m.episode_detail.empty()) return s;
  const double t0 = s.m.episode_detail.front().t_entry;
  for (const auto& r : rows) {
    if (r.t >= t0 && r.rtt_s > 0) s.max_rtt_from_first_loss = std::max(s.max_rtt_from_first_loss, r.rtt_s);
  }
  return s;
}

Verdict criterion7() {
  Verdict v;
  for (auto a : {RecoveryAlgo::PRR, RecoveryAlgo::QARR}) {
    const auto plain = spike_run(ex::rtt_spike_scenario(a, false));
    const auto opt = spike_run(ex::rtt_spike_scenario(a, true));
    const double base = plain.m.base_rtt_s;
    const double spike = plain.max_rtt_from_first_loss / base;
    const double flat = opt.max_rtt_from_first_loss / opt.m.base_rtt_s;
    v.fail_if(spike < 1.5 || flat > 1.1 || plain.m.episodes != 5 || opt.m.episodes != 5 || !plain.m.completed ||
              !opt.m.completed);
    v.detail << to_string(a) << ": plain max " << fmt(spike, 2) << "x base, optimized max " << fmt(flat, 3)
             << "x base after the first loss (" << fmt(opt.m.max_rtt_s / opt.m.base_rtt_s, 2)
             << "x including slow start); ";
  }
  v.detail << "targets >= 1.5x and <= 1.1x";
  return v;
}

Verdict criterion8() {
  Verdict v;
  for (auto a : {RecoveryAlgo::QARR, RecoveryAlgo::BARR}) {
    auto orig = ex::loss_rate_scenario(Variant::CUBIC, a, 0.001, false);
    auto opt = ex::loss_rate_scenario(Variant::CUBIC, a, 0.001, true);
    orig.runs = opt.runs = 5;
    const double uo = run(orig).mean.utilization;
    const double up = run(opt).mean.utilization;
    v.fail_if(up < 0.92 || uo > 0.86 || up - uo < 0.10);
    v.detail << to_string(a) << ": original " << fmt(uo) << ", optimized " << fmt(up) << " (+"
             << fmt(100 * (up - uo), 1) << " pp); ";
  }
  v.detail << "targets optimized >= 0.92, original <= 0.86, gain >= 10 pp";
  return v;
}

Verdict criterion9() {
  Verdict v;
  constexpr int kRuns = 3;
  constexpr double kDuration = 200;
  const double delays[4] = {50, 100, 150, 200};
  bool evidence = true;
  std::ostringstream misses;
  for (auto a : {RecoveryAlgo::QARR, RecoveryAlgo::BARR}) {
    v.detail << to_string(a) << " [orig/opt/hack1/optimal]:";
    for (double d : delays) {
      double u[4];
      for (int m = 0; m < 4; ++m) {
        auto c = ex::high_loss_scenario(a, d, static_cast<ex::HighLossMode>(m));
        c.runs = kRuns;
        c.duration_s = kDuration;
        const auto r = run(c);
        u[m] = r.mean.utilization;
        if (m == static_cast<int>(ex::HighLossMode::OptimizedHack1)) {
          for (const auto& rm : r.runs) {
            if (rm.hack1_fires > 0 && (rm.out_of_window_discarded == 0 || rm.dupacks_no_new_sack == 0)) {
              evidence = false;
            }
          }
          if (r.mean.hack1_fires == 0) evidence = false;
        }
      }
      v.detail << " U=" << d << ' ' << fmt(u[0], 2) << '/' << fmt(u[1], 2) << '/' << fmt(u[2], 2) << '/'
               << fmt(u[3], 2);
      if (u[2] < u[1]) misses << ' ' << to_string(a) << " U=" << d << " hack1<optimized";
      if (u[2] < u[0]) misses << ' ' << to_string(a) << " U=" << d << " hack1<original";
      if (u[3] < 0.93) misses << ' ' << to_string(a) << " U=" << d << " optimal<0.93";
    }
    v.detail << "; ";
  }
  if (!evidence) misses << " missing discard/stale-DUPACK evidence when Hack 1 fired";
  v.fail_if(!misses.str().empty());
  v.detail << "misses:" << (misses.str().empty() ? std::string(" none") : misses.str());
  return v;
}

Verdict criterion10() {
  Verdict v;
  // Determinism: same seed and config give byte-identical summary and trace output.
  auto c = parse_config("rate_mbps = 20\nloss = 0.002\nrecovery = qarr\nor = on\nhack1 = on\nduration_s = 30\n");
  c.instrumented = true;
  std::ostringstream s1, s2, t1, t2;
  write_summary(s1, run(c));
  write_summary(s2, run(c));
  (void)emit_trace(c, t1);
  (void)emit_trace(c, t2);
  const bool same = s1.str() == s2.str() && t1.str() == t2.str();
  v.fail_if(!same);

  // Instrumented runs across every discipline, with and without the optimizations.
  int instrumented = 0;
  bool threw = false;
  std::string what;
  for (auto a : {RecoveryAlgo::Standard, RecoveryAlgo::RH, RecoveryAlgo::PRR, RecoveryAlgo::QARR,
                 RecoveryAlgo::BARR}) {
    for (bool opt : {false, true}) {
      auto k = ex::loss_rate_scenario(Variant::CUBIC, a, 0.003, opt);
      k.runs = 1;
      k.duration_s = 40;
      k.recovery.hack1_enabled = opt;
      k.drain_bytes_per_s = opt ? 2.5e6 : std::numeric_limits<double>::infinity();
      try {
        (void)run(k);
        ++instrumented;
      } catch (const InvariantViolation& e) {
        threw = true;
        what = e.what();
      }
    }
  }
  v.fail_if(threw || !g_all_intact);
  v.detail << "determinism " << (same ? "ok" : "BROKEN") << "; " << instrumented
           << " instrumented runs without invariant violation";
  if (threw) v.detail << " (violation: " << what << ")";
  v.detail << "; stream intact in all " << g_runs_checked << " runs so far: " << (g_all_intact ? "yes" : "no");
  return v;
}

const std::vector<std::pair<std::string, std::function<Verdict()>>>& criteria() {
  static const std::vector<std::pair<std::string, std::function<Verdict()>>> c = {
      {"analytic and oracle idle times agree within one service time", criterion1},
      {"burst-size utilization of the closed forms matches the published values", criterion2},
      {"delay sweep of the closed forms matches the published values", criterion3},
      {"regulated recovery with opportunistic retransmission leaves no idle time", criterion4},
      {"burst recovery utilization with both optimizations", criterion5},
      {"application stalls during recovery versus send-buffer factor", criterion6},
      {"RTT spikes after recovery vanish with both optimizations", criterion7},
      {"throughput gain at 0.1% loss", criterion8},
      {"high-loss ordering with Hack 1 and protected retransmissions", criterion9},
      {"determinism, stream integrity and instrumented invariants", criterion10},
  };
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::string(argv[i]) == "--criterion" && i + 1 < argc) only = std::atoi(argv[++i]);
  }
  const auto& list = criteria();
  if (only < 0 || only > static_cast<int>(list.size())) {
    std::cerr << "criterion must be between 1 and " << list.size() << '\n';
    return 2;
  }
  bool all = true;
  for (std::size_t i = 0; i < list.size(); ++i) {
    if (only && static_cast<int>(i) + 1 != only) continue;
    Verdict v;
    try {
      v = list[i].second();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail << "exception: " << e.what();
    }
    all = all && v.pass;
    std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << i + 1 << ": " << list[i].first << " | "
              << v.detail.str() << std::endl;
  }
  return all ? 0 : 1;
}
