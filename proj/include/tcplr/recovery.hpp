#pragma once

// Per-ACK loss-recovery engines and the delay/bandwidth estimators they read.
//
// Each engine mutates a CcState that the sender owns. The sender fills in the
// scoreboard-derived fields (pipe, flight size, n1, n2) before every call.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <memory>

#include "tcplr/core.hpp"

namespace tcplr {

inline constexpr std::int64_t kInfiniteWindow = std::numeric_limits<std::int64_t>::max() / 4;

struct CcState {
  std::int64_t cwnd = 10;
  std::int64_t ssthresh = kInfiniteWindow;
  std::int64_t pipe = 0;
  std::int64_t flight_size = 0;
  std::int64_t n1 = 0;  // holes below the highest SACKed packet
  std::int64_t n2 = 0;  // SACKed packets above snd_una
  bool in_recovery = false;
  double acc = 0;              // fractional window accumulator
  std::int64_t ack_count = 0;  // ACKs seen in the current reduction
};

/// Everything an engine may want to know about one arriving ACK.
struct AckSample {
  double now = 0;
  std::int64_t newly_delivered = 0;  // packets newly cum-acked or SACKed
  double rtt_s = -1;                 // negative when the ACK carried no usable sample
  double echo_sent_at = -1;          // send time of the packet that triggered the ACK
  double delivered_bytes = 0;        // cumulatively acked plus SACKed bytes
};

// ---------------------------------------------------------------------------
// Estimators

/// Q = pipe * (RTT - baseRTT) / RTT, zero when RTT is not above the base.
[[nodiscard]] inline double estimate_queue(double pipe, double rtt_s, double base_rtt_s) {
  if (pipe <= 0 || !(rtt_s > 0) || rtt_s <= base_rtt_s) return 0;
  return pipe * (rtt_s - base_rtt_s) / rtt_s;
}

struct QueueEstimator {
  double base_rtt_s = std::numeric_limits<double>::infinity();
  double last_q = 0;
  double qt = 5;

  double update(double pipe, double rtt_s) {
    if (!(rtt_s > 0)) return last_q;
    base_rtt_s = std::min(base_rtt_s, rtt_s);
    last_q = estimate_queue(pipe, rtt_s, base_rtt_s);
    return last_q;
  }
};

struct BandwidthEstimator {
  struct Sample {
    double t;
    double ack;
  };
  int m = 200;
  std::deque<Sample> ring;
  double last_b = 0;  // bytes per second

  explicit BandwidthEstimator(int window = 200) : m(window) {}
};

/// Pushes (t_new, ack_new) and returns the rate over the last M intervals,
/// or 0 while fewer than M+1 samples are held. Regressing counters are ignored;
/// a sample at the same instant as the newest one replaces it.
inline double estimate_bandwidth(BandwidthEstimator& est, double t_new, double ack_new) {
  if (!est.ring.empty()) {
    auto& back = est.ring.back();
    if (ack_new < back.ack) return est.last_b;
    if (t_new <= back.t) {
      back.ack = ack_new;
      if (est.ring.size() == static_cast<std::size_t>(est.m) + 1) {
        const auto& front = est.ring.front();
        if (back.t > front.t) est.last_b = (back.ack - front.ack) / (back.t - front.t);
      }
      return est.last_b;
    }
  }
  est.ring.push_back({t_new, ack_new});
  while (est.ring.size() > static_cast<std::size_t>(est.m) + 1) est.ring.pop_front();
  if (est.ring.size() == static_cast<std::size_t>(est.m) + 1) {
    const auto& front = est.ring.front();
    est.last_b = (ack_new - front.ack) / (t_new - front.t);
  }
  return est.last_b;
}

// ---------------------------------------------------------------------------
// Per-ACK window rules used inside recovery

/// Rate halving: clamp to pipe+1, then one decrement per two ACKs down to ssthresh.
inline std::int64_t rh_on_ack(CcState& s) {
  if (s.pipe + 1 < s.cwnd) s.cwnd = s.pipe + 1;
  ++s.ack_count;
  if (s.cwnd > s.ssthresh && s.ack_count % 2 == 0) --s.cwnd;
  return s.cwnd;
}

/// Proportional reduction by (1 - beta) per ACK; regrows by one per ACK after a pipe collapse.
inline std::int64_t prr_on_ack(CcState& s, double beta) {
  if (s.pipe + 1 < s.cwnd) s.cwnd = s.pipe + 1;
  ++s.ack_count;
  if (s.cwnd > s.ssthresh) {
    s.acc += 1.0 - beta;
    while (s.acc >= 1.0 - kRoundEps && s.cwnd > s.ssthresh) {
      --s.cwnd;
      s.acc -= 1.0;
    }
    if (s.cwnd == s.ssthresh) s.acc = 0;
  } else if (s.cwnd < s.ssthresh) {
    ++s.cwnd;
  }
  return s.cwnd;
}

/// Queue-regulated decrease: W -= max(Q - Q_T, 0), fractional part carried over.
inline std::int64_t qarr_on_ack(CcState& s, double q, double qt) {
  s.acc += std::max(q - qt, 0.0);
  const auto dec = floor_tol(s.acc);
  if (dec > 0) {
    s.acc -= static_cast<double>(dec);
    s.cwnd = std::max<std::int64_t>(1, s.cwnd - dec);
  }
  return s.cwnd;
}

/// Bandwidth-regulated window: W = round(B * RTT) once B is known.
inline std::int64_t barr_on_ack(CcState& s, double b_pkts_per_s, double rtt_s) {
  if (b_pkts_per_s > 0 && rtt_s > 0) {
    s.cwnd = std::max<std::int64_t>(1, std::llround(b_pkts_per_s * rtt_s));
  }
  return s.cwnd;
}

struct ReductionInputs {
  double queue_pkts = 0;
  double qt_pkts = 5;
  double bw_pkts_per_s = 0;
  double base_rtt_s = 0;
};

/// Loss response at recovery entry.
inline void init_reduction(CcState& s, const VariantParams& v, RecoveryAlgo algo, const ReductionInputs& in) {
  s.acc = 0;
  s.ack_count = 0;
  switch (algo) {
    case RecoveryAlgo::Standard:
      s.ssthresh = std::max<std::int64_t>(2, ceil_tol(0.5 * static_cast<double>(s.flight_size)));
      s.cwnd = s.ssthresh;
      return;
    case RecoveryAlgo::RH:
    case RecoveryAlgo::PRR: {
      const auto w = static_cast<double>(s.cwnd);
      std::int64_t target = 0;
      switch (v.ssthresh_rule) {
        case SsthreshRule::FixedBeta: target = ceil_tol(v.beta * w); break;
        case SsthreshRule::VenoConditional:
          target = ceil_tol((in.queue_pkts <= in.qt_pkts ? 0.8 : 0.5) * w);
          break;
        case SsthreshRule::WestwoodBdp:
          target = in.bw_pkts_per_s > 0 && in.base_rtt_s > 0 ? std::llround(in.bw_pkts_per_s * in.base_rtt_s)
                                                             : ceil_tol(v.beta * w);
          break;
      }
      s.ssthresh = std::max<std::int64_t>(2, target);
      return;
    }
    case RecoveryAlgo::QARR:
    case RecoveryAlgo::BARR:
      return;  // no ssthresh, window untouched at entry
  }
}

// ---------------------------------------------------------------------------
// Engines

class RecoveryEngine {
 public:
  RecoveryEngine(const RecoveryConfig& cfg, const VariantParams& variant, double packet_size_bytes)
      : cfg_(cfg), variant_(variant), pkt_bytes_(packet_size_bytes), bw_(cfg.slide_m) {
    queue_.qt = cfg.qt_pkts;
  }
  virtual ~RecoveryEngine() = default;
  RecoveryEngine(const RecoveryEngine&) = delete;
  RecoveryEngine& operator=(const RecoveryEngine&) = delete;

  [[nodiscard]] virtual RecoveryAlgo algo() const = 0;

  /// Estimator feed, called for every ACK before any window update.
  void pkts_acked(const CcState& s, const AckSample& a) {
    if (a.rtt_s > 0) {
      queue_.update(static_cast<double>(s.pipe), a.rtt_s);
      last_rtt_ = a.rtt_s;
    }
    estimate_bandwidth(bw_, a.now, a.delivered_bytes);
  }

  virtual void init_reduction(CcState& s) {
    if (variant_.name == Variant::CUBIC) {
      cubic_wmax_ = static_cast<double>(s.cwnd);
    }
    tcplr::init_reduction(s, variant_, algo(), reduction_inputs());
    s.in_recovery = true;
  }

  virtual void on_ack_reduction(CcState& s, const AckSample& a) = 0;

  virtual void end_reduction(CcState& s, double now) {
    s.in_recovery = false;
    s.acc = 0;
    s.ack_count = 0;
    epoch_start_ = now;
    epoch_origin_ = static_cast<double>(s.cwnd);
  }

  /// Window growth outside recovery. Only called when the sender is cwnd-limited.
  virtual void on_ack_open(CcState& s, const AckSample& a) { standard_growth(s, a); }

  virtual void on_timeout(CcState& s, double now) {
    const double beta = algo() == RecoveryAlgo::Standard ? 0.5 : variant_.beta;
    s.ssthresh = std::max<std::int64_t>(2, ceil_tol(beta * static_cast<double>(std::max(s.cwnd, s.flight_size))));
    if (variant_.name == Variant::CUBIC) cubic_wmax_ = static_cast<double>(s.cwnd);
    s.cwnd = 1;
    s.acc = 0;
    s.ack_count = 0;
    s.in_recovery = false;
    epoch_start_ = now;
    epoch_origin_ = 1;
  }

  /// Extra flow-control allowance granted by opportunistic retransmission.
  [[nodiscard]] std::int64_t awnd_extension(const CcState& s) const {
    return cfg_.or_enabled && s.in_recovery ? s.n1 + s.n2 : 0;
  }

  [[nodiscard]] const QueueEstimator& queue() const { return queue_; }
  [[nodiscard]] const BandwidthEstimator& bandwidth() const { return bw_; }
  [[nodiscard]] double bw_pkts_per_s() const { return bw_.last_b / pkt_bytes_; }
  [[nodiscard]] double last_rtt() const { return last_rtt_; }
  [[nodiscard]] const RecoveryConfig& config() const { return cfg_; }
  [[nodiscard]] const VariantParams& variant() const { return variant_; }

 protected:
  [[nodiscard]] ReductionInputs reduction_inputs() const {
    const double base = std::isfinite(queue_.base_rtt_s) ? queue_.base_rtt_s : 0;
    return {queue_.last_q, cfg_.qt_pkts, bw_pkts_per_s(), base};
  }

  void slow_start(CcState& s, const AckSample& a) {
    s.cwnd = std::min(s.cwnd + std::max<std::int64_t>(a.newly_delivered, 0), std::max(s.ssthresh, s.cwnd));
  }

  void standard_growth(CcState& s, const AckSample& a) {
    if (a.newly_delivered <= 0) return;
    if (s.cwnd < s.ssthresh) {
      slow_start(s, a);
      return;
    }
    const auto w = static_cast<double>(s.cwnd);
    double inc = static_cast<double>(a.newly_delivered) / w;  // Reno: one packet per window
    if (variant_.name == Variant::CUBIC) {
      constexpr double kC = 0.4;
      const double wmax = std::max(cubic_wmax_, epoch_origin_);
      const double k = std::cbrt(std::max(wmax - epoch_origin_, 0.0) / kC);
      const double t = a.now - epoch_start_ + (last_rtt_ > 0 ? last_rtt_ : 0);
      const double target = kC * std::pow(t - k, 3) + wmax;
      if (target > w) inc = std::max(inc, (target - w) / w * static_cast<double>(a.newly_delivered));
    }
    s.acc += inc;
    const auto whole = floor_tol(s.acc);
    if (whole > 0) {
      s.cwnd += whole;
      s.acc -= static_cast<double>(whole);
    }
  }

  RecoveryConfig cfg_;
  VariantParams variant_;
  double pkt_bytes_;
  QueueEstimator queue_;
  BandwidthEstimator bw_;
  double last_rtt_ = -1;
  double cubic_wmax_ = 0;
  double epoch_start_ = 0;
  double epoch_origin_ = 0;
};

class StandardEngine final : public RecoveryEngine {
 public:
  using RecoveryEngine::RecoveryEngine;
  [[nodiscard]] RecoveryAlgo algo() const override { return RecoveryAlgo::Standard; }
  void on_ack_reduction(CcState&, const AckSample&) override {}  // window fixed for the episode
  void end_reduction(CcState& s, double now) override {
    s.cwnd = s.ssthresh;
    RecoveryEngine::end_reduction(s, now);
  }
};

class RhEngine final : public RecoveryEngine {
 public:
  using RecoveryEngine::RecoveryEngine;
  [[nodiscard]] RecoveryAlgo algo() const override { return RecoveryAlgo::RH; }
  void on_ack_reduction(CcState& s, const AckSample&) override { rh_on_ack(s); }
  void end_reduction(CcState& s, double now) override {
    s.cwnd = std::min(s.cwnd, s.ssthresh);
    RecoveryEngine::end_reduction(s, now);
  }
};

class PrrEngine final : public RecoveryEngine {
 public:
  using RecoveryEngine::RecoveryEngine;
  [[nodiscard]] RecoveryAlgo algo() const override { return RecoveryAlgo::PRR; }
  void on_ack_reduction(CcState& s, const AckSample&) override { prr_on_ack(s, variant_.beta); }
  void end_reduction(CcState& s, double now) override {
    s.cwnd = s.ssthresh;
    RecoveryEngine::end_reduction(s, now);
  }
};

// The queue rule is applied at most once per round trip. Only an ACK for a
// packet sent after the previous cut can trigger the next one, otherwise the
// same standing queue would be subtracted on every ACK of the same window.
// Additive growth uses the same gate.
class QarrEngine final : public RecoveryEngine {
 public:
  using RecoveryEngine::RecoveryEngine;
  [[nodiscard]] RecoveryAlgo algo() const override { return RecoveryAlgo::QARR; }

  void init_reduction(CcState& s) override {
    RecoveryEngine::init_reduction(s);
    gate_t_ = -1;
  }

  void on_ack_reduction(CcState& s, const AckSample& a) override {
    if (a.rtt_s <= 0) return;
    round_min_rtt_ = std::min(round_min_rtt_, a.rtt_s);
    if (a.echo_sent_at < gate_t_) return;
    const double q = estimate_queue(s.pipe, round_min_rtt_, queue_.base_rtt_s);
    if (q > cfg_.qt_pkts) {
      s.acc = 0;
      qarr_on_ack(s, q, cfg_.qt_pkts);
    }
    gate_t_ = a.now;
    round_min_rtt_ = std::numeric_limits<double>::infinity();
  }

  void on_ack_open(CcState& s, const AckSample& a) override {
    if (!cfg_.qarr_vegas_growth) {
      standard_growth(s, a);
      return;
    }
    if (a.rtt_s <= 0 || a.newly_delivered <= 0) return;
    // Decisions are taken once per round on the smallest RTT seen in it, which
    // filters the transient queue that slow-start bursts create.
    round_min_rtt_ = std::min(round_min_rtt_, a.rtt_s);
    if (s.cwnd < s.ssthresh) slow_start(s, a);
    if (a.echo_sent_at < gate_t_) return;
    const double q = estimate_queue(s.pipe, round_min_rtt_, queue_.base_rtt_s);
    if (q > cfg_.qt_pkts) {
      s.acc = 0;
      qarr_on_ack(s, q, cfg_.qt_pkts);
      s.ssthresh = std::max<std::int64_t>(2, s.cwnd);
    } else if (s.cwnd >= s.ssthresh) {
      ++s.cwnd;
    }
    gate_t_ = a.now;
    round_min_rtt_ = std::numeric_limits<double>::infinity();
  }

 private:
  double gate_t_ = -1;
  double round_min_rtt_ = std::numeric_limits<double>::infinity();
};

class BarrEngine final : public RecoveryEngine {
 public:
  using RecoveryEngine::RecoveryEngine;
  [[nodiscard]] RecoveryAlgo algo() const override { return RecoveryAlgo::BARR; }
  void on_ack_reduction(CcState& s, const AckSample& a) override {
    double rtt = a.rtt_s;
    if (cfg_.barr_use_min_rtt && std::isfinite(queue_.base_rtt_s)) rtt = queue_.base_rtt_s;
    if (rtt <= 0) return;
    barr_on_ack(s, bw_pkts_per_s(), rtt);
  }
};

[[nodiscard]] inline std::unique_ptr<RecoveryEngine> make_engine(const RecoveryConfig& cfg, const VariantParams& v,
                                                                 double packet_size_bytes) {
  switch (cfg.algorithm) {
    case RecoveryAlgo::Standard: return std::make_unique<StandardEngine>(cfg, v, packet_size_bytes);
    case RecoveryAlgo::RH: return std::make_unique<RhEngine>(cfg, v, packet_size_bytes);
    case RecoveryAlgo::PRR: return std::make_unique<PrrEngine>(cfg, v, packet_size_bytes);
    case RecoveryAlgo::QARR: return std::make_unique<QarrEngine>(cfg, v, packet_size_bytes);
    case RecoveryAlgo::BARR: return std::make_unique<BarrEngine>(cfg, v, packet_size_bytes);
  }
  throw ConfigError("unknown recovery algorithm");
}

}  // namespace tcplr
