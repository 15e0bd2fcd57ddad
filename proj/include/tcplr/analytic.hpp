#pragma once

// Closed-form minimum link idle time during the recovery period of a burst of
// n consecutive losses, and the corresponding maximum bandwidth utilization.

#include <algorithm>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "tcplr/core.hpp"

namespace tcplr::analytic {

struct IdleTimeResult {
  double imin_s = 0;
  std::string case_label;
  double eta = 1;
  std::int64_t n_counted = 0;
  // Alternative accounting that credits every packet the window lets through
  // in the first round (retransmissions plus opportunistic new data).
  double eta_window = 1;
  std::int64_t n_window = 0;
};

/// eta = n / (C * I + n)
[[nodiscard]] inline double utilization(double n_counted, double rate_pkts, double imin_s) {
  return n_counted / (rate_pkts * imin_s + n_counted);
}

namespace detail {

inline double pos(double x) { return std::max(x, 0.0); }

// Rounds of b_j = min(cap, base * 2^j) packets until n retransmissions are out.
// A round whose budget is not used up by retransmissions carries the first new
// packet, so its trailing gap falls outside the window and is not charged.
inline double doubling_rounds_idle(std::int64_t n, std::int64_t base, std::int64_t cap, double c, double u) {
  std::int64_t sent = 0;
  double idle = 0;
  std::int64_t grow = base;
  while (sent < n) {
    if (grow < cap) grow *= 2;
    const std::int64_t b = std::min(cap, grow);
    sent += b;
    if (sent <= n) idle += u - static_cast<double>(b - 1) / c;
  }
  return idle;
}

}  // namespace detail

/// Minimum link idle time for n consecutive losses under the given discipline.
/// Throws ConfigError when n < 1, n > AW, beta outside (0,1], or when the
/// RH/PRR formulas are asked for n = AW (they divide by AW - n).
[[nodiscard]] inline IdleTimeResult imin(RecoveryAlgo algo, bool or_enabled, const LinkParams& params,
                                         std::int64_t n, double beta) {
  const std::int64_t aw = awnd(params);
  if (n < 1) throw ConfigError("burst size must be at least one packet");
  if (n > aw) throw ConfigError("burst size exceeds the advertised window");
  if (!(beta > 0 && beta <= 1)) throw ConfigError("beta must be in (0,1]");
  const bool needs_margin = algo == RecoveryAlgo::RH || algo == RecoveryAlgo::PRR;
  if (needs_margin && n == aw) throw ConfigError("RH/PRR idle time is undefined for n == AW");

  const double c = rate_pkts(params);
  const double u = params.rtt_prop_s;
  const double nd = static_cast<double>(n);
  const std::int64_t half_ceil = (aw + 1) / 2;
  const std::int64_t half_floor = aw / 2;
  const std::int64_t beta_aw = ceil_tol(beta * static_cast<double>(aw));
  const std::int64_t spare = aw - n;  // SACKed packets clocking the first round

  IdleTimeResult r;
  r.n_counted = n;
  r.n_window = n;
  auto single = [&](std::int64_t budget) { return detail::pos(u - static_cast<double>(budget - 1) / c); };

  if (!or_enabled) {
    switch (algo) {
      case RecoveryAlgo::Standard:
        if (n < half_ceil) {
          r.imin_s = single(n);
          r.case_label = "standard:burst-below-window";
        } else {
          r.imin_s = single(half_ceil);
          r.case_label = "standard:window-limited";
        }
        break;
      case RecoveryAlgo::RH:
        if (n <= half_floor) {
          r.imin_s = single(n);
          r.case_label = "rh:single-round";
        } else {
          const auto rounds = static_cast<double>(n / spare);
          r.imin_s = detail::pos(rounds * (u - static_cast<double>(spare - 1) / c));
          r.case_label = "rh:multi-round";
        }
        break;
      case RecoveryAlgo::PRR:
        if (n <= 2 * spare) {
          r.imin_s = single(std::min(n, beta_aw));
          r.case_label = n <= beta_aw ? "prr:single-round" : "prr:single-round-ssthresh-capped";
        } else {
          r.imin_s = detail::pos(detail::doubling_rounds_idle(n, spare, beta_aw, c, u));
          r.case_label = "prr:doubling-rounds";
        }
        break;
      case RecoveryAlgo::QARR:
      case RecoveryAlgo::BARR:
        r.imin_s = single(n);
        r.case_label = std::string(to_string(algo)) + ":single-round";
        break;
    }
  } else {
    switch (algo) {
      case RecoveryAlgo::Standard:
        r.imin_s = single(half_ceil);
        r.n_window = half_ceil;
        r.case_label = "standard+or:window-limited";
        break;
      case RecoveryAlgo::RH:
        if (n <= aw - beta_aw) {
          r.imin_s = single(beta_aw);
          r.n_window = beta_aw;
          r.case_label = "rh+or:ssthresh-window";
        } else if (n <= spare) {
          r.imin_s = single(spare);
          r.n_window = spare;
          r.case_label = "rh+or:sack-clocked";
        } else {
          const auto rounds = static_cast<double>(n / spare);
          r.imin_s = detail::pos(rounds * (u - static_cast<double>(spare - 1) / c));
          r.case_label = "rh+or:multi-round";
        }
        break;
      case RecoveryAlgo::PRR:
        if (n <= 2 * spare) {
          const std::int64_t first_round = std::min(beta_aw, 2 * spare);
          r.imin_s = single(first_round);
          r.n_window = first_round;
          r.case_label = first_round == beta_aw ? "prr+or:ssthresh-window" : "prr+or:ack-clock-capped";
        } else {
          r.imin_s = detail::pos(detail::doubling_rounds_idle(n, spare, beta_aw, c, u));
          r.case_label = "prr+or:doubling-rounds";
        }
        break;
      case RecoveryAlgo::QARR:
      case RecoveryAlgo::BARR:
        r.imin_s = 0;
        r.case_label = std::string(to_string(algo)) + "+or:no-idle";
        break;
    }
  }
  r.eta = utilization(nd, c, r.imin_s);
  r.eta_window = utilization(static_cast<double>(r.n_window), c, r.imin_s);
  return r;
}

struct GridPoint {
  RecoveryAlgo algo = RecoveryAlgo::Standard;
  bool or_enabled = false;
  std::int64_t n = 10;
  double u_s = 0.1;
  double rate_bps = 20e6;
  double beta = 0.7;
  double packet_size_bytes = 1515;
};

struct SweepRow {
  GridPoint point;
  IdleTimeResult result;
  std::string error;  // non-empty when the point violated a precondition
};

[[nodiscard]] inline LinkParams params_for(const GridPoint& g) {
  LinkParams p;
  p.rate_bps = g.rate_bps;
  p.packet_size_bytes = g.packet_size_bytes;
  p.rtt_prop_s = g.u_s;
  return p;
}

/// Evaluates every grid point in order; precondition failures become flagged rows.
[[nodiscard]] inline std::vector<SweepRow> sweep(const std::vector<GridPoint>& grid) {
  std::vector<SweepRow> rows;
  rows.reserve(grid.size());
  for (const auto& g : grid) {
    SweepRow row{g, {}, {}};
    try {
      row.result = imin(g.algo, g.or_enabled, params_for(g), g.n, g.beta);
    } catch (const ConfigError& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

/// Cartesian product of the listed axes, in algo-major order.
[[nodiscard]] inline std::vector<GridPoint> make_grid(const std::vector<RecoveryAlgo>& algos,
                                                      const std::vector<bool>& ors,
                                                      const std::vector<std::int64_t>& ns,
                                                      const std::vector<double>& us_s,
                                                      const std::vector<double>& rates_bps,
                                                      const std::vector<double>& betas) {
  std::vector<GridPoint> g;
  for (auto a : algos)
    for (bool o : ors)
      for (auto n : ns)
        for (double u : us_s)
          for (double c : rates_bps)
            for (double b : betas) g.push_back({a, o, n, u, c, b, 1515});
  return g;
}

/// The full equivalence grid used by the analytic/oracle property check.
[[nodiscard]] inline std::vector<GridPoint> property_grid() {
  return make_grid({RecoveryAlgo::Standard, RecoveryAlgo::RH, RecoveryAlgo::PRR, RecoveryAlgo::QARR, RecoveryAlgo::BARR},
                   {false, true}, {5, 10, 50, 82, 83, 100, 160}, {0.05, 0.1, 0.15, 0.2}, {20e6, 100e6},
                   {0.5, 0.7, 0.75, 0.8});
}

/// Grid file: `key = v1, v2, ...` lines for algo, or, n, U_ms, C_mbps, beta.
/// Missing axes default to a single value (PRR, off, 10, 100 ms, 20 Mbps, 0.7).
[[nodiscard]] inline std::vector<GridPoint> parse_grid(std::istream& in) {
  std::vector<RecoveryAlgo> algos{RecoveryAlgo::PRR};
  std::vector<bool> ors{false};
  std::vector<std::int64_t> ns{10};
  std::vector<double> us{0.1}, cs{20e6}, betas{0.7};
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string{};
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
  };
  auto num = [&](const std::string& v) {
    try {
      std::size_t used = 0;
      const double d = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return d;
    } catch (const std::exception&) {
      throw ConfigError("grid line " + std::to_string(lineno) + ": bad number '" + v + "'");
    }
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("grid line " + std::to_string(lineno) + ": expected key = values");
    const std::string key = trim(line.substr(0, eq));
    std::vector<std::string> vals;
    std::stringstream ss(line.substr(eq + 1));
    for (std::string v; std::getline(ss, v, ',');) {
      v = trim(v);
      if (!v.empty()) vals.push_back(v);
    }
    if (vals.empty()) throw ConfigError("grid line " + std::to_string(lineno) + ": no values");
    if (key == "algo") {
      algos.clear();
      for (auto& v : vals) algos.push_back(parse_algo(v));
    } else if (key == "or") {
      ors.clear();
      for (auto& v : vals) {
        if (v == "on" || v == "1" || v == "true") ors.push_back(true);
        else if (v == "off" || v == "0" || v == "false") ors.push_back(false);
        else throw ConfigError("grid line " + std::to_string(lineno) + ": bad boolean '" + v + "'");
      }
    } else if (key == "n") {
      ns.clear();
      for (auto& v : vals) ns.push_back(static_cast<std::int64_t>(num(v)));
    } else if (key == "U_ms") {
      us.clear();
      for (auto& v : vals) us.push_back(num(v) / 1e3);
    } else if (key == "C_mbps") {
      cs.clear();
      for (auto& v : vals) cs.push_back(num(v) * 1e6);
    } else if (key == "beta") {
      betas.clear();
      for (auto& v : vals) betas.push_back(num(v));
    } else {
      throw ConfigError("grid line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
  }
  return make_grid(algos, ors, ns, us, cs, betas);
}

inline void write_csv_header(std::ostream& os) {
  os << "algo,or,n,U_ms,C_mbps,beta,case_label,imin_ms,eta,eta_window\n";
}

inline void write_csv_row(std::ostream& os, const SweepRow& row) {
  const auto& g = row.point;
  os << to_string(g.algo) << ',' << (g.or_enabled ? 1 : 0) << ',' << g.n << ',' << g.u_s * 1e3 << ','
     << g.rate_bps / 1e6 << ',' << g.beta << ',';
  if (!row.error.empty()) {
    os << "error: " << row.error << ",,,\n";
    return;
  }
  os << row.result.case_label << ',' << row.result.imin_s * 1e3 << ',' << row.result.eta << ','
     << row.result.eta_window << '\n';
}

}  // namespace tcplr::analytic
