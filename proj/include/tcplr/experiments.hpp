#pragma once

// Canned scenarios and the table reproductions built from them.
//
// Every builder starts from the testbed defaults (20 Mbps, 100 ms round trip,
// CUBIC, AW = C*U, 4.3 MB bottleneck queue) and changes only what the scenario
// is about. "Original" means no opportunistic retransmission and the stock
// send-buffer factor of 2. "Optimized" turns on both opportunistic
// retransmission and factor 3.

#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "tcplr/analytic.hpp"
#include "tcplr/harness.hpp"

namespace tcplr::experiments {

inline constexpr double kStockSndbufFactor = 2.0;
inline constexpr double kRefinedSndbufFactor = 3.0;

inline ExperimentConfig testbed_defaults() {
  ExperimentConfig c;
  c.duration_s = 200;
  c.runs = 10;
  c.recovery.sndbuf_factor = kStockSndbufFactor;
  return c;
}

inline void set_optimized(ExperimentConfig& c, bool optimized) {
  c.recovery.or_enabled = optimized;
  c.recovery.sndbuf_factor = optimized ? kRefinedSndbufFactor : kStockSndbufFactor;
}

/// Packet index at which a steady-state burst is injected. Scaling with the
/// delay keeps the drop a few seconds past slow start at every U.
inline std::int64_t steady_trigger(double delay_ms) { return static_cast<std::int64_t>(50 * delay_ms); }

/// One burst of n consecutive losses at steady state; the run ends shortly after recovery.
inline ExperimentConfig burst_scenario(RecoveryAlgo algo, std::int64_t n, double delay_ms, bool or_enabled,
                                       double sndbuf_factor, std::int64_t trigger = -1) {
  ExperimentConfig c = testbed_defaults();
  c.link.rtt_prop_s = delay_ms / 1e3;
  c.recovery.algorithm = algo;
  c.recovery.or_enabled = or_enabled;
  c.recovery.sndbuf_factor = sndbuf_factor;
  if (trigger < 0) trigger = steady_trigger(delay_ms);
  c.loss = LossModel::burst(n, trigger);
  c.loss_text = "burst:" + std::to_string(n) + "@" + std::to_string(trigger);
  c.duration_s = static_cast<double>(trigger) / rate_pkts(c.link) + 40 * c.link.rtt_prop_s + 1;
  c.runs = 1;
  return c;
}

/// Phase sweep for the send-buffer stall check: n = 10 bursts whose trigger
/// walks through roughly one send-buffer refill cycle in steps of 5 packets.
inline std::vector<ExperimentConfig> stall_phase_sweep(RecoveryAlgo algo, double sndbuf_factor, int phases = 24) {
  std::vector<ExperimentConfig> out;
  for (int k = 0; k < phases; ++k) {
    auto c = burst_scenario(algo, 10, 100, true, sndbuf_factor, 5000 + 5 * k);
    c.duration_s = 5;
    out.push_back(std::move(c));
  }
  return out;
}

/// Five isolated drops inside a 50 MB transfer, for RTT traces.
inline ExperimentConfig rtt_spike_scenario(RecoveryAlgo algo, bool optimized) {
  ExperimentConfig c = testbed_defaults();
  c.recovery.algorithm = algo;
  set_optimized(c, optimized);
  c.loss = LossModel::scripted({3000, 6000, 9000, 12000, 15000});
  c.loss_text = "script:3000,6000,9000,12000,15000";
  c.transfer_bytes = 50e6;
  c.duration_s = 200;
  c.runs = 1;
  return c;
}

/// Random loss at 20 Mbps and U = 100 ms.
inline ExperimentConfig loss_rate_scenario(Variant v, RecoveryAlgo algo, double rho, bool optimized) {
  ExperimentConfig c = testbed_defaults();
  c.variant = v;
  c.recovery.algorithm = algo;
  set_optimized(c, optimized);
  c.loss = LossModel::random(rho);
  c.loss_text = std::to_string(rho);
  return c;
}

enum class HighLossMode { Original, Optimized, OptimizedHack1, Optimal };

inline const char* to_string(HighLossMode m) {
  switch (m) {
    case HighLossMode::Original: return "original";
    case HighLossMode::Optimized: return "optimized";
    case HighLossMode::OptimizedHack1: return "optimized+hack1";
    case HighLossMode::Optimal: return "optimal";
  }
  return "?";
}

/// 100 Mbps with 0.5% random loss. Optimal protects retransmissions from the loss model.
inline ExperimentConfig high_loss_scenario(RecoveryAlgo algo, double delay_ms, HighLossMode mode) {
  ExperimentConfig c = testbed_defaults();
  c.link.rate_bps = 100e6;
  c.link.rtt_prop_s = delay_ms / 1e3;
  c.recovery.algorithm = algo;
  set_optimized(c, mode != HighLossMode::Original);
  c.recovery.hack1_enabled = mode == HighLossMode::OptimizedHack1;
  c.loss = LossModel::random(0.005);
  c.loss.protect_retransmits = mode == HighLossMode::Optimal;
  c.loss_text = "0.005";
  return c;
}

// ---------------------------------------------------------------------------
// Table reproduction

struct TableOptions {
  int runs = 10;              // seeds per random-loss cell
  double duration_s = 200;    // random-loss run length
  std::uint64_t seed = 1;
};

struct TableRow {
  std::string table;
  std::string algo;
  std::string variant = "cubic";
  std::string setting;        // original | or | optimized | optimized+hack1 | optimal
  std::string param;          // burst | delay_ms | loss_pct
  double value = 0;
  double numerical = std::numeric_limits<double>::quiet_NaN();
  double numerical_window = std::numeric_limits<double>::quiet_NaN();
  double experimental = std::numeric_limits<double>::quiet_NaN();
  double reference_numerical = std::numeric_limits<double>::quiet_NaN();
  double reference_experimental = std::numeric_limits<double>::quiet_NaN();
  std::string note;
};

namespace detail {

// Published values, indexed [algo RH,PRR,QARR,BARR][column]. Numerical cells first,
// experimental second.
struct BurstRef {
  double num[4][3];
  double exp[4][3];
};

inline const BurstRef& t1_original() {
  static const BurstRef r{{{0.054, 0.294, 0.474}, {0.054, 0.294, 0.594}, {0.054, 0.294, 0.594}, {0.054, 0.294, 0.594}},
                          {{0.057, 0.286, 0.513}, {0.057, 0.286, 0.571}, {0.057, 0.286, 0.513}, {0.057, 0.481, 0.738}}};
  return r;
}
inline const BurstRef& t1_or() {
  static const BurstRef r{{{0.75, 0.75, 0.474}, {0.75, 0.75, 0.75}, {1, 1, 1}, {1, 1, 1}},
                          {{0.485, 0.737, 0.437}, {0.383, 0.703, 0.731}, {0.246, 0.543, 0.983}, {0.517, 0.771, 0.990}}};
  return r;
}
inline const BurstRef& t2_original() {
  static const BurstRef r{{{0.108, 0.036, 0.027}, {0.108, 0.036, 0.027}, {0.108, 0.036, 0.027}, {0.108, 0.036, 0.027}},
                          {{0.114, 0.038, 0.028}, {0.114, 0.038, 0.028}, {0.114, 0.038, 0.028}, {0.113, 0.035, 0.033}}};
  return r;
}
inline const BurstRef& t2_or() {
  static const BurstRef r{{{0.75, 0.75, 0.75}, {0.75, 0.75, 0.75}, {1, 1, 1}, {1, 1, 1}},
                          {{0.479, 0.225, 0.720}, {0.74, 0.57, 0.726}, {0.411, 0.256, 0.340}, {0.676, 0.555, 0.440}}};
  return r;
}
inline const BurstRef& t4() {
  static const BurstRef r{{{0.75, 0.75, 0.47}, {0.75, 0.75, 0.75}, {1, 1, 1}, {1, 1, 1}},
                          {{0.74, 0.74, 0.51}, {0.74, 0.74, 0.74}, {0.96, 0.98, 0.95}, {0.97, 0.98, 0.96}}};
  return r;
}
inline const BurstRef& t5() {
  static const BurstRef r{{{0.75, 0.75, 0.75}, {0.75, 0.75, 0.75}, {1, 1, 1}, {1, 1, 1}},
                          {{0.74, 0.73, 0.73}, {0.74, 0.73, 0.73}, {0.95, 0.96, 0.98}, {0.99, 0.95, 0.98}}};
  return r;
}

// Utilization fractions, indexed [variant CUBIC,Veno,Westwood,Vegas][algo][loss 0.01,0.05,0.1 %].
inline const double (&t6_ref())[4][4][3] {
  static const double r[4][4][3] = {
      {{0.851, 0.343, 0.260}, {0.803, 0.395, 0.271}, {0.940, 0.880, 0.785}, {0.935, 0.895, 0.830}},
      {{0.710, 0.318, 0.236}, {0.706, 0.360, 0.264}, {0.945, 0.830, 0.705}, {0.940, 0.895, 0.825}},
      {{0.725, 0.612, 0.394}, {0.835, 0.479, 0.416}, {0.930, 0.840, 0.770}, {0.910, 0.840, 0.810}},
      {{0.650, 0.335, 0.231}, {0.689, 0.304, 0.218}, {0.916, 0.845, 0.715}, {0.935, 0.880, 0.810}}};
  return r;
}
inline const double (&t8_ref())[4][4][3] {
  static const double r[4][4][3] = {
      {{0.851, 0.388, 0.262}, {0.815, 0.451, 0.299}, {0.955, 0.955, 0.955}, {0.955, 0.955, 0.950}},
      {{0.754, 0.384, 0.280}, {0.785, 0.419, 0.313}, {0.955, 0.955, 0.955}, {0.955, 0.955, 0.955}},
      {{0.833, 0.645, 0.410}, {0.916, 0.669, 0.455}, {0.955, 0.955, 0.955}, {0.955, 0.955, 0.955}},
      {{0.650, 0.355, 0.239}, {0.713, 0.341, 0.241}, {0.955, 0.955, 0.955}, {0.955, 0.955, 0.945}}};
  return r;
}

// [mode Original,Optimized,Hack1,Optimal][algo QARR,BARR][delay 50,100,150,200]
inline const double (&t14_ref())[4][2][4] {
  static const double r[4][2][4] = {{{0.545, 0.510, 0.474, 0.411}, {0.478, 0.349, 0.291, 0.262}},
                                    {{0.843, 0.527, 0.468, 0.462}, {0.827, 0.516, 0.358, 0.337}},
                                    {{0.853, 0.806, 0.760, 0.729}, {0.857, 0.790, 0.741, 0.718}},
                                    {{0.952, 0.950, 0.944, 0.939}, {0.950, 0.944, 0.939, 0.935}}};
  return r;
}

inline constexpr RecoveryAlgo kTableAlgos[4] = {RecoveryAlgo::RH, RecoveryAlgo::PRR, RecoveryAlgo::QARR,
                                                RecoveryAlgo::BARR};

inline double sim_recovery_utilization(const ExperimentConfig& c) {
  return run_experiment(c).mean.recovery_utilization;
}

// Burst tables: one analytic and one simulated value per (algo, setting, column).
inline void burst_rows(std::vector<TableRow>& out, const std::string& id, const std::string& setting, bool or_on,
                       double factor, const BurstRef& ref, bool vary_delay) {
  const std::int64_t bursts[3] = {10, 50, 100};
  const double delays[3] = {50, 150, 200};
  const double beta = VariantParams::of(Variant::CUBIC).beta;
  for (int a = 0; a < 4; ++a) {
    for (int k = 0; k < 3; ++k) {
      const std::int64_t n = vary_delay ? 10 : bursts[k];
      const double d = vary_delay ? delays[k] : 100;
      TableRow r;
      r.table = id;
      r.algo = std::string(to_string(kTableAlgos[a]));
      r.setting = setting;
      r.param = vary_delay ? "delay_ms" : "burst";
      r.value = vary_delay ? d : static_cast<double>(n);
      auto cfg = burst_scenario(kTableAlgos[a], n, d, or_on, factor);
      const auto an = analytic::imin(kTableAlgos[a], or_on, cfg.link, n, beta);
      r.numerical = an.eta;
      r.numerical_window = an.eta_window;
      r.experimental = sim_recovery_utilization(cfg);
      r.reference_numerical = ref.num[a][k];
      r.reference_experimental = ref.exp[a][k];
      out.push_back(std::move(r));
    }
  }
}

inline void loss_rate_rows(std::vector<TableRow>& out, const std::string& id, bool optimized,
                           const double (&ref)[4][4][3], const TableOptions& o) {
  const Variant variants[4] = {Variant::CUBIC, Variant::Veno, Variant::Westwood, Variant::Vegas};
  const double rates[3] = {0.0001, 0.0005, 0.001};
  for (int v = 0; v < 4; ++v) {
    for (int a = 0; a < 4; ++a) {
      for (int k = 0; k < 3; ++k) {
        auto cfg = loss_rate_scenario(variants[v], kTableAlgos[a], rates[k], optimized);
        cfg.runs = o.runs;
        cfg.duration_s = o.duration_s;
        cfg.seed = o.seed;
        TableRow r;
        r.table = id;
        r.algo = std::string(to_string(kTableAlgos[a]));
        r.variant = std::string(tcplr::to_string(variants[v]));
        r.setting = optimized ? "optimized" : "original";
        r.param = "loss_pct";
        r.value = rates[k] * 100;
        r.experimental = run_experiment(cfg).mean.utilization;
        r.reference_experimental = ref[v][a][k];
        if (variants[v] != Variant::CUBIC) r.note = "approximate";
        out.push_back(std::move(r));
      }
    }
  }
}

}  // namespace detail

inline bool is_table_id(const std::string& id) {
  return id == "T1" || id == "T2" || id == "T4" || id == "T5" || id == "T6" || id == "T8" || id == "T14";
}

/// Builds one published table from analytic evaluation and simulation.
inline std::vector<TableRow> reproduce_table(const std::string& id, const TableOptions& o = {}) {
  using namespace detail;
  std::vector<TableRow> out;
  if (id == "T1") {
    burst_rows(out, id, "original", false, kStockSndbufFactor, t1_original(), false);
    burst_rows(out, id, "or", true, kStockSndbufFactor, t1_or(), false);
  } else if (id == "T2") {
    burst_rows(out, id, "original", false, kStockSndbufFactor, t2_original(), true);
    burst_rows(out, id, "or", true, kStockSndbufFactor, t2_or(), true);
  } else if (id == "T4") {
    burst_rows(out, id, "optimized", true, kRefinedSndbufFactor, t4(), false);
  } else if (id == "T5") {
    burst_rows(out, id, "optimized", true, kRefinedSndbufFactor, t5(), true);
  } else if (id == "T6") {
    loss_rate_rows(out, id, false, t6_ref(), o);
  } else if (id == "T8") {
    loss_rate_rows(out, id, true, t8_ref(), o);
  } else if (id == "T14") {
    const HighLossMode modes[4] = {HighLossMode::Original, HighLossMode::Optimized, HighLossMode::OptimizedHack1,
                                   HighLossMode::Optimal};
    const RecoveryAlgo algos[2] = {RecoveryAlgo::QARR, RecoveryAlgo::BARR};
    const double delays[4] = {50, 100, 150, 200};
    for (int m = 0; m < 4; ++m) {
      for (int a = 0; a < 2; ++a) {
        for (int k = 0; k < 4; ++k) {
          auto cfg = high_loss_scenario(algos[a], delays[k], modes[m]);
          cfg.runs = o.runs;
          cfg.duration_s = o.duration_s;
          cfg.seed = o.seed;
          TableRow r;
          r.table = id;
          r.algo = std::string(to_string(algos[a]));
          r.setting = to_string(modes[m]);
          r.param = "delay_ms";
          r.value = delays[k];
          r.experimental = run_experiment(cfg).mean.utilization;
          r.reference_experimental = t14_ref()[m][a][k];
          out.push_back(std::move(r));
        }
      }
    }
  } else {
    throw ConfigError("unknown table id '" + id + "' (expected T1, T2, T4, T5, T6, T8 or T14)");
  }
  return out;
}

inline void write_table_csv(std::ostream& os, const std::vector<TableRow>& rows) {
  auto cell = [&](double v) {
    if (!std::isnan(v)) os << v;
  };
  os << "table,algo,variant,setting,param,value,numerical,numerical_window,experimental,reference_numerical,"
        "reference_experimental,note\n";
  for (const auto& r : rows) {
    os << r.table << ',' << r.algo << ',' << r.variant << ',' << r.setting << ',' << r.param << ',' << r.value << ',';
    cell(r.numerical);
    os << ',';
    cell(r.numerical_window);
    os << ',';
    cell(r.experimental);
    os << ',';
    cell(r.reference_numerical);
    os << ',';
    cell(r.reference_experimental);
    os << ',' << r.note << '\n';
  }
}

}  // namespace tcplr::experiments
