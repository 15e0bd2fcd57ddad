#pragma once

// Experiment configuration, single-run wiring of sender/link/receiver, and
// the metrics derived from a run.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "tcplr/core.hpp"
#include "tcplr/netem.hpp"
#include "tcplr/receiver.hpp"
#include "tcplr/recovery.hpp"
#include "tcplr/sender.hpp"

namespace tcplr {

/// Per-packet header overhead: a 1515-byte frame carries a 1448-byte payload.
inline constexpr double kHeaderBytes = 67;

struct ExperimentConfig {
  LinkParams link;
  RecoveryConfig recovery;
  Variant variant = Variant::CUBIC;
  LossModel loss;
  std::string loss_text = "none";
  double duration_s = 200;
  std::optional<double> transfer_bytes;  // application payload bytes; run ends when delivered
  std::uint64_t seed = 1;
  int runs = 1;
  double drain_bytes_per_s = std::numeric_limits<double>::infinity();
  double sndbuf_max_bytes = 64.0 * 1024 * 1024;
  std::int64_t init_cwnd = 10;
  bool instrumented = false;

  void validate() const {
    link.validate();
    recovery.validate();
    loss.validate();
    if (!(duration_s > 0)) throw ConfigError("duration_s must be positive");
    if (transfer_bytes && !(*transfer_bytes > 0)) throw ConfigError("transfer size must be positive");
    if (runs < 1) throw ConfigError("runs must be >= 1");
    if (!(drain_bytes_per_s >= 0)) throw ConfigError("drain must be non-negative");
    if (!(link.packet_size_bytes > kHeaderBytes)) throw ConfigError("packet size must exceed header overhead");
    if (loss.kind == LossModel::Kind::ConsecutiveBurst && loss.burst_n > awnd(link)) {
      throw ConfigError("burst size exceeds the advertised window");
    }
  }
};

// ---------------------------------------------------------------------------
// Config text

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "off" || v == "no") return false;
  throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

inline double parse_num(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size() || !std::isfinite(d)) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
}

inline std::int64_t parse_int(const std::string& key, const std::string& v) {
  const double d = parse_num(key, v);
  if (d != std::floor(d)) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return static_cast<std::int64_t>(d);
}

}  // namespace detail

/// Parses a loss setting: none | RATE | RATE% | burst:N@SEQ | script:FILE.
inline LossModel parse_loss(const std::string& text, const std::filesystem::path& base_dir = {}) {
  const std::string v = detail::trim(text);
  if (v.empty() || v == "none" || v == "0") return LossModel::none();
  if (v.rfind("burst:", 0) == 0) {
    const auto at = v.find('@');
    if (at == std::string::npos) throw ConfigError("loss: burst form is burst:N@SEQ");
    return LossModel::burst(detail::parse_int("loss", v.substr(6, at - 6)), detail::parse_int("loss", v.substr(at + 1)));
  }
  if (v.rfind("script:", 0) == 0) {
    std::filesystem::path file = v.substr(7);
    if (file.is_relative() && !base_dir.empty()) file = base_dir / file;
    std::ifstream in(file);
    if (!in) throw ConfigError("loss: cannot open script file " + file.string());
    std::vector<std::int64_t> seqs;
    std::string tok;
    while (in >> tok) {
      if (tok.front() == '#') {
        std::getline(in, tok);
        continue;
      }
      seqs.push_back(detail::parse_int("loss script", tok));
    }
    return LossModel::scripted(std::move(seqs));
  }
  double rate = 0;
  if (v.back() == '%') {
    rate = detail::parse_num("loss", v.substr(0, v.size() - 1)) / 100.0;
  } else {
    rate = detail::parse_num("loss", v);
  }
  if (!(rate >= 0 && rate < 1)) throw ConfigError("loss: rate must be in [0,1)");
  return rate == 0 ? LossModel::none() : LossModel::random(rate);
}

/// Parses flat `key = value` lines. Blank lines and '#' comments are skipped;
/// unknown keys and malformed lines are errors.
inline ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {}) {
  ExperimentConfig c;
  bool protect = false;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string val = detail::trim(line.substr(eq + 1));
    using detail::parse_bool;
    using detail::parse_int;
    using detail::parse_num;
    if (key == "rate_mbps") c.link.rate_bps = parse_num(key, val) * 1e6;
    else if (key == "delay_ms") c.link.rtt_prop_s = parse_num(key, val) / 1e3;
    else if (key == "loss") { c.loss = parse_loss(val, base_dir); c.loss_text = val; }
    else if (key == "protect_retransmits") protect = parse_bool(key, val);
    else if (key == "awnd") c.link.awnd_pkts = val == "auto" ? 0 : parse_int(key, val);
    else if (key == "recovery") c.recovery.algorithm = parse_algo(val);
    else if (key == "variant") c.variant = parse_variant(val);
    else if (key == "or") c.recovery.or_enabled = parse_bool(key, val);
    else if (key == "hack1") c.recovery.hack1_enabled = parse_bool(key, val);
    else if (key == "sndbuf_factor") c.recovery.sndbuf_factor = parse_num(key, val);
    else if (key == "qt") c.recovery.qt_pkts = parse_num(key, val);
    else if (key == "slide_m") c.recovery.slide_m = static_cast<int>(parse_int(key, val));
    else if (key == "duration_s") c.duration_s = parse_num(key, val);
    else if (key == "transfer_mb") c.transfer_bytes = parse_num(key, val) * 1e6;
    else if (key == "seed") c.seed = static_cast<std::uint64_t>(parse_int(key, val));
    else if (key == "runs") c.runs = static_cast<int>(parse_int(key, val));
    else if (key == "drain") c.drain_bytes_per_s = val == "unlimited" ? std::numeric_limits<double>::infinity() : parse_num(key, val) / 8.0;
    // Extensions beyond the documented core keys.
    else if (key == "packet_size") c.link.packet_size_bytes = parse_num(key, val);
    else if (key == "buffer_bytes") c.link.buffer_bytes = parse_num(key, val);
    else if (key == "dupthresh") c.recovery.dupthresh = static_cast<int>(parse_int(key, val));
    else if (key == "entry") c.recovery.entry = val == "fack" ? EntryTrigger::Fack : val == "dupthresh" ? EntryTrigger::Dupthresh : throw ConfigError("entry: expected dupthresh|fack");
    else if (key == "barr_use_min_rtt") c.recovery.barr_use_min_rtt = parse_bool(key, val);
    else if (key == "qarr_vegas_growth") c.recovery.qarr_vegas_growth = parse_bool(key, val);
    else if (key == "init_cwnd") c.init_cwnd = parse_int(key, val);
    else if (key == "sndbuf_max_mb") c.sndbuf_max_bytes = parse_num(key, val) * 1024 * 1024;
    else if (key == "instrumented") c.instrumented = parse_bool(key, val);
    else throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
  }
  c.loss.protect_retransmits = protect;
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open config file " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), file.parent_path());
}

/// Fully resolved configuration as `key = value` lines, each prefixed by `prefix`.
inline void write_resolved_config(std::ostream& os, const ExperimentConfig& c, const std::string& prefix = "# ") {
  os << prefix << "rate_mbps = " << c.link.rate_bps / 1e6 << '\n'
     << prefix << "delay_ms = " << c.link.rtt_prop_s * 1e3 << '\n'
     << prefix << "packet_size = " << c.link.packet_size_bytes << '\n'
     << prefix << "buffer_bytes = " << c.link.buffer_bytes << '\n'
     << prefix << "awnd = " << awnd(c.link) << '\n'
     << prefix << "loss = " << c.loss_text << '\n'
     << prefix << "protect_retransmits = " << (c.loss.protect_retransmits ? "on" : "off") << '\n'
     << prefix << "recovery = " << to_string(c.recovery.algorithm) << '\n'
     << prefix << "variant = " << to_string(c.variant) << '\n'
     << prefix << "or = " << (c.recovery.or_enabled ? "on" : "off") << '\n'
     << prefix << "hack1 = " << (c.recovery.hack1_enabled ? "on" : "off") << '\n'
     << prefix << "sndbuf_factor = " << c.recovery.sndbuf_factor << '\n'
     << prefix << "qt = " << c.recovery.qt_pkts << '\n'
     << prefix << "slide_m = " << c.recovery.slide_m << '\n'
     << prefix << "dupthresh = " << c.recovery.dupthresh << '\n'
     << prefix << "entry = " << (c.recovery.entry == EntryTrigger::Fack ? "fack" : "dupthresh") << '\n'
     << prefix << "barr_use_min_rtt = " << (c.recovery.barr_use_min_rtt ? "on" : "off") << '\n'
     << prefix << "qarr_vegas_growth = " << (c.recovery.qarr_vegas_growth ? "on" : "off") << '\n'
     << prefix << "duration_s = " << c.duration_s << '\n';
  if (c.transfer_bytes) os << prefix << "transfer_mb = " << *c.transfer_bytes / 1e6 << '\n';
  os << prefix << "seed = " << c.seed << '\n'
     << prefix << "runs = " << c.runs << '\n'
     << prefix << "drain = "
     << (std::isinf(c.drain_bytes_per_s) ? std::string("unlimited") : std::to_string(c.drain_bytes_per_s * 8)) << '\n'
     << prefix << "init_cwnd = " << c.init_cwnd << '\n';
}

// ---------------------------------------------------------------------------
// Running one simulation

struct TraceRow {
  double t = 0;
  std::int64_t cwnd = 0;
  std::int64_t ssthresh = 0;
  double rtt_s = -1;
  std::int64_t pipe = 0;
  double sndbuf_free_pkts = 0;
  bool stalled = false;
  const char* phase = "open";
};

struct EpisodeMetrics {
  double t_entry = 0;
  double t_exit = -1;
  double t_first_retx = -1;
  double utilization = std::numeric_limits<double>::quiet_NaN();
  double util_to_exit = -1;  // same measure over the whole episode
  double idle_s = 0;
  double stall_s = 0;
  double max_rtt_s = 0;
  bool aborted_by_rto = false;
};

struct RunMetrics {
  std::uint64_t seed = 0;
  double duration_s = 0;
  bool completed = true;  // transfer finished (always true for timed runs)
  double throughput_bps = 0;
  double throughput_steady_bps = 0;  // after the first tenth of the run
  double utilization = 0;
  double recovery_utilization = std::numeric_limits<double>::quiet_NaN();
  double link_idle_recovery_s = 0;
  double stall_fraction = 0;          // stall time / recovery time
  double stall_episode_fraction = 0;  // episodes with any stall / episodes
  double stall_time_s = 0;
  double recovery_time_s = 0;
  double max_rtt_s = 0;
  double max_rtt_post_recovery_s = 0;
  double base_rtt_s = 0;
  std::int64_t episodes = 0;
  std::int64_t episodes_aborted = 0;
  std::uint64_t rto_count = 0;
  std::uint64_t hack1_fires = 0;
  std::uint64_t retransmits = 0;
  std::uint64_t beyond_awnd_packets = 0;
  std::uint64_t out_of_window_discarded = 0;
  std::uint64_t out_of_window_accepted = 0;
  std::uint64_t discards_detected = 0;
  std::uint64_t lost_retransmits = 0;
  std::uint64_t dupacks_no_new_sack = 0;
  std::uint64_t link_drops = 0;
  std::int64_t delivered_packets = 0;
  bool stream_intact = true;
  std::vector<EpisodeMetrics> episode_detail;
};

namespace detail {

inline double max_rtt_in(const std::vector<std::pair<double, double>>& rtts, double t0, double t1) {
  auto it = std::lower_bound(rtts.begin(), rtts.end(), t0,
                             [](const std::pair<double, double>& p, double t) { return p.first < t; });
  double m = 0;
  for (; it != rtts.end() && it->first <= t1; ++it) m = std::max(m, it->second);
  return m;
}

}  // namespace detail

/// Runs one seeded simulation. When `trace` is non-null a row is appended per ACK.
inline RunMetrics run_once(const ExperimentConfig& cfg, std::uint64_t seed, std::vector<TraceRow>* trace = nullptr) {
  cfg.validate();
  const auto s_bytes = static_cast<std::int64_t>(std::llround(cfg.link.packet_size_bytes));
  const double payload = cfg.link.packet_size_bytes - kHeaderBytes;
  const double half = cfg.link.rtt_prop_s / 2;
  const double svc = service_time(cfg.link);
  const auto aw = awnd(cfg.link);

  EventQueue eq;
  BottleneckLink link(cfg.link, cfg.loss, seed);
  Receiver rcv(aw, s_bytes, cfg.drain_bytes_per_s);

  SenderConfig sc;
  sc.link = cfg.link;
  sc.recovery = cfg.recovery;
  sc.variant = VariantParams::of(cfg.variant);
  sc.init_cwnd = cfg.init_cwnd;
  sc.sndbuf_max_bytes = cfg.sndbuf_max_bytes;
  sc.instrumented = cfg.instrumented;
  std::int64_t transfer_pkts = 0;
  if (cfg.transfer_bytes) {
    transfer_pkts = static_cast<std::int64_t>(std::ceil(*cfg.transfer_bytes / payload - kRoundEps));
    sc.app_bytes = static_cast<double>(transfer_pkts * s_bytes);
  }

  std::unique_ptr<Sender> snd;
  auto emit = [&](const Packet& p) -> double {
    const auto out = link.enqueue(p.seq_start / s_bytes, p.is_retransmit, static_cast<double>(s_bytes), eq.now());
    if (out.result != EnqueueResult::Queued) return std::numeric_limits<double>::quiet_NaN();
    eq.schedule(out.depart_s + half, [&, p] {
      auto r = rcv.on_data(p, eq.now());
      eq.schedule(eq.now() + half, [&, ack = std::move(r.ack)] { snd->on_ack(ack); });
    });
    return out.depart_s - svc;
  };
  snd = std::make_unique<Sender>(sc, eq, emit);

  std::vector<std::pair<double, double>> rtts;
  snd->on_rtt = [&](double now, double r) { rtts.emplace_back(now, r); };
  if (trace) {
    snd->on_trace = [&](const SenderTrace& t) {
      TraceRow row;
      row.t = t.t;
      row.cwnd = t.cwnd;
      row.ssthresh = std::min<std::int64_t>(t.ssthresh, 1'000'000'000);
      row.rtt_s = t.rtt_s;
      row.pipe = t.pipe;
      row.sndbuf_free_pkts = (t.sndbuf_size - t.sndbuf_occupied) / static_cast<double>(s_bytes);
      row.stalled = snd->app_stalled();
      row.phase = t.in_recovery ? "recovery" : snd->in_loss_state() ? "loss" : "open";
      trace->push_back(row);
    };
  }

  const double warmup = cfg.duration_s / 10;
  std::int64_t delivered_at_warmup = 0;
  eq.schedule(warmup, [&] { delivered_at_warmup = rcv.rcv_nxt(); });

  snd->start();
  bool done = false;
  while (!eq.empty() && eq.next_time() <= cfg.duration_s) {
    eq.step();
    if (cfg.transfer_bytes && rcv.rcv_nxt() >= transfer_pkts && snd->finished()) {
      done = true;
      break;
    }
  }
  const double end = done ? eq.now() : cfg.duration_s;
  snd->finalize(end);

  RunMetrics m;
  m.seed = seed;
  m.duration_s = end;
  m.completed = !cfg.transfer_bytes || done;
  m.delivered_packets = rcv.rcv_nxt();
  m.stream_intact = rcv.stream_intact();
  if (cfg.instrumented && !rcv.stream_intact()) throw InvariantViolation("delivered stream has gaps or duplicates");
  m.throughput_bps = static_cast<double>(m.delivered_packets) * payload * 8 / end;
  if (end > warmup) {
    m.throughput_steady_bps = static_cast<double>(m.delivered_packets - delivered_at_warmup) * payload * 8 / (end - warmup);
  }
  m.utilization = m.throughput_bps / cfg.link.rate_bps;

  const auto& st = snd->stats();
  double util_sum = 0;
  int util_n = 0;
  std::int64_t stalled_eps = 0;
  for (const auto& ep : st.episodes) {
    EpisodeMetrics e;
    e.t_entry = ep.t_entry;
    e.t_exit = ep.t_exit;
    e.t_first_retx = ep.t_first_retx_start;
    e.stall_s = ep.stall_time_s;
    e.aborted_by_rto = ep.aborted_by_rto;
    if (ep.aborted_by_rto || ep.t_exit < 0) {
      ++m.episodes_aborted;
      m.episode_detail.push_back(e);
      continue;
    }
    ++m.episodes;
    m.recovery_time_s += ep.t_exit - ep.t_entry;
    m.stall_time_s += ep.stall_time_s;
    if (ep.stall_time_s > 0) ++stalled_eps;
    e.max_rtt_s = detail::max_rtt_in(rtts, ep.t_entry, ep.t_exit + 2 * cfg.link.rtt_prop_s);
    m.max_rtt_post_recovery_s = std::max(m.max_rtt_post_recovery_s, e.max_rtt_s);
    // Window: first retransmission's service start up to the first new-data service start
    // after that retransmission is acknowledged, falling back to recovery exit.
    double w_end = ep.t_exit;
    if (ep.t_first_new_after > ep.t_first_retx_start) w_end = std::min(w_end, ep.t_first_new_after);
    e.util_to_exit = -1;
    if (ep.t_first_retx_start >= 0 && ep.t_exit > ep.t_first_retx_start) {
      e.util_to_exit = 1.0 - link.idle_time(ep.t_first_retx_start, ep.t_exit) / (ep.t_exit - ep.t_first_retx_start);
    }
    if (ep.t_first_retx_start >= 0 && w_end > ep.t_first_retx_start) {
      const double len = w_end - ep.t_first_retx_start;
      e.idle_s = link.idle_time(ep.t_first_retx_start, w_end);
      e.utilization = 1.0 - e.idle_s / len;
      m.link_idle_recovery_s += e.idle_s;
      util_sum += e.utilization;
      ++util_n;
    }
    m.episode_detail.push_back(e);
  }
  if (util_n > 0) m.recovery_utilization = util_sum / util_n;
  if (m.recovery_time_s > 0) m.stall_fraction = std::min(1.0, m.stall_time_s / m.recovery_time_s);
  if (m.episodes > 0) m.stall_episode_fraction = static_cast<double>(stalled_eps) / static_cast<double>(m.episodes);

  m.max_rtt_s = st.max_rtt_s;
  m.base_rtt_s = snd->rtt().has_sample ? snd->rtt().base_rtt_s : 0;
  m.rto_count = st.rto_count;
  m.hack1_fires = st.hack1_fires;
  m.retransmits = st.retransmits;
  m.beyond_awnd_packets = st.beyond_awnd_packets;
  m.out_of_window_discarded = rcv.stats().out_of_window_discarded;
  m.out_of_window_accepted = rcv.stats().out_of_window_accepted;
  m.discards_detected = st.discards_detected;
  m.lost_retransmits = st.lost_retransmits;
  m.dupacks_no_new_sack = st.dupacks_no_new_sack;
  m.link_drops = link.model_drops() + link.tail_drops();
  return m;
}

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<RunMetrics> runs;
  RunMetrics mean;
};

/// Runs cfg.runs seeds (seed, seed+1, ...) and averages the per-run metrics.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentResult r;
  r.config = cfg;
  for (int i = 0; i < cfg.runs; ++i) r.runs.push_back(run_once(cfg, cfg.seed + static_cast<std::uint64_t>(i)));

  auto avg = [&](auto field) {
    double sum = 0;
    int n = 0;
    for (const auto& m : r.runs) {
      const double v = static_cast<double>(m.*field);
      if (std::isnan(v)) continue;
      sum += v;
      ++n;
    }
    return n ? sum / n : std::numeric_limits<double>::quiet_NaN();
  };
  auto& a = r.mean;
  a.seed = cfg.seed;
  a.duration_s = avg(&RunMetrics::duration_s);
  a.throughput_bps = avg(&RunMetrics::throughput_bps);
  a.throughput_steady_bps = avg(&RunMetrics::throughput_steady_bps);
  a.utilization = avg(&RunMetrics::utilization);
  a.recovery_utilization = avg(&RunMetrics::recovery_utilization);
  a.link_idle_recovery_s = avg(&RunMetrics::link_idle_recovery_s);
  a.stall_fraction = avg(&RunMetrics::stall_fraction);
  a.stall_episode_fraction = avg(&RunMetrics::stall_episode_fraction);
  a.stall_time_s = avg(&RunMetrics::stall_time_s);
  a.recovery_time_s = avg(&RunMetrics::recovery_time_s);
  a.max_rtt_s = avg(&RunMetrics::max_rtt_s);
  a.max_rtt_post_recovery_s = avg(&RunMetrics::max_rtt_post_recovery_s);
  a.base_rtt_s = avg(&RunMetrics::base_rtt_s);
  a.episodes = std::llround(avg(&RunMetrics::episodes));
  a.episodes_aborted = std::llround(avg(&RunMetrics::episodes_aborted));
  a.completed = std::all_of(r.runs.begin(), r.runs.end(), [](const RunMetrics& m) { return m.completed; });
  a.stream_intact = std::all_of(r.runs.begin(), r.runs.end(), [](const RunMetrics& m) { return m.stream_intact; });
  for (const auto& m : r.runs) {
    a.rto_count += m.rto_count;
    a.hack1_fires += m.hack1_fires;
    a.retransmits += m.retransmits;
    a.beyond_awnd_packets += m.beyond_awnd_packets;
    a.out_of_window_discarded += m.out_of_window_discarded;
    a.out_of_window_accepted += m.out_of_window_accepted;
    a.discards_detected += m.discards_detected;
    a.lost_retransmits += m.lost_retransmits;
    a.dupacks_no_new_sack += m.dupacks_no_new_sack;
    a.link_drops += m.link_drops;
    a.delivered_packets += m.delivered_packets;
  }
  return r;
}

// ---------------------------------------------------------------------------
// CSV output

inline void write_summary_header(std::ostream& os) {
  os << "run_id,seed,recovery,variant,or,hack1,sndbuf_factor,rate_mbps,delay_ms,loss,throughput_mbps,utilization,"
        "recovery_utilization,stall_fraction,max_rtt_ms,stall_episode_fraction,episodes,rto_count,hack1_fires,"
        "stream_intact\n";
}

inline void write_summary_row(std::ostream& os, const std::string& run_id, const ExperimentConfig& c,
                              const RunMetrics& m) {
  const auto flags = os.flags();
  const auto prec = os.precision();
  os << std::setprecision(6);
  os << run_id << ',' << m.seed << ',' << to_string(c.recovery.algorithm) << ',' << to_string(c.variant) << ','
     << (c.recovery.or_enabled ? 1 : 0) << ',' << (c.recovery.hack1_enabled ? 1 : 0) << ','
     << c.recovery.sndbuf_factor << ',' << c.link.rate_bps / 1e6 << ',' << c.link.rtt_prop_s * 1e3 << ','
     << c.loss_text << (c.loss.protect_retransmits ? "+protect" : "") << ',' << m.throughput_bps / 1e6 << ','
     << m.utilization << ',' << m.recovery_utilization << ',' << m.stall_fraction << ',' << m.max_rtt_s * 1e3
     << ',' << m.stall_episode_fraction << ',' << m.episodes << ',' << m.rto_count << ',' << m.hack1_fires << ','
     << (m.stream_intact ? 1 : 0) << '\n';
  os.flags(flags);
  os.precision(prec);
}

/// Summary CSV for an experiment: resolved config as comments, one row per run, then the mean.
inline void write_summary(std::ostream& os, const ExperimentResult& r) {
  write_resolved_config(os, r.config);
  write_summary_header(os);
  for (std::size_t i = 0; i < r.runs.size(); ++i) write_summary_row(os, std::to_string(i), r.config, r.runs[i]);
  write_summary_row(os, "mean", r.config, r.mean);
}

/// Time series for one run: one row per ACK.
inline RunMetrics emit_trace(const ExperimentConfig& cfg, std::ostream& os) {
  std::vector<TraceRow> rows;
  auto m = run_once(cfg, cfg.seed, &rows);
  write_resolved_config(os, cfg);
  os << "time_s,cwnd_pkts,ssthresh_pkts,rtt_ms,pipe_pkts,sndbuf_free_pkts,stall_flag,phase\n";
  os << std::setprecision(9);
  for (const auto& r : rows) {
    os << r.t << ',' << r.cwnd << ',' << r.ssthresh << ',';
    if (r.rtt_s >= 0) os << r.rtt_s * 1e3;
    os << ',' << r.pipe << ',' << r.sndbuf_free_pkts << ',' << (r.stalled ? 1 : 0) << ',' << r.phase << '\n';
  }
  return m;
}

}  // namespace tcplr
