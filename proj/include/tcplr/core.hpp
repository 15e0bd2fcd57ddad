#pragma once

// Shared domain types: link parameters, recovery/variant configuration,
// loss models and the wire packet.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tcplr {

/// Raised for invalid parameters or configuration (CLI exit code 2).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an instrumented run detects a broken invariant (CLI exit code 3).
class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Rounding helpers that tolerate binary noise such as 0.7 * 100 = 70.00000000000001.
inline constexpr double kRoundEps = 1e-9;

inline std::int64_t ceil_tol(double x) { return static_cast<std::int64_t>(std::ceil(x - kRoundEps)); }
inline std::int64_t floor_tol(double x) { return static_cast<std::int64_t>(std::floor(x + kRoundEps)); }

struct LinkParams {
  double rate_bps = 20e6;              // C
  double packet_size_bytes = 1515;     // S
  double rtt_prop_s = 0.1;             // U, round trip
  std::int64_t awnd_pkts = 0;          // AW; 0 selects awnd_auto
  double buffer_bytes = 4.3e6;         // L
  bool allow_small_awnd = false;       // stress runs may set AW < C*U

  void validate() const;
};

/// Bottleneck rate in packets per second.
[[nodiscard]] inline double rate_pkts(const LinkParams& p) {
  return p.rate_bps / (8.0 * p.packet_size_bytes);
}

/// floor(C * U): the receive window that just covers the bandwidth-delay product.
[[nodiscard]] inline std::int64_t awnd_auto(const LinkParams& p) {
  return floor_tol(rate_pkts(p) * p.rtt_prop_s);
}

/// Advertised window in packets, resolving the auto setting.
[[nodiscard]] inline std::int64_t awnd(const LinkParams& p) {
  return p.awnd_pkts > 0 ? p.awnd_pkts : awnd_auto(p);
}

/// One packet service time at the bottleneck, 8S/C.
[[nodiscard]] inline double service_time(const LinkParams& p) {
  return 8.0 * p.packet_size_bytes / p.rate_bps;
}

inline void LinkParams::validate() const {
  if (!(rate_bps > 0)) throw ConfigError("rate_bps must be positive");
  if (!(packet_size_bytes > 0)) throw ConfigError("packet_size_bytes must be positive");
  if (!(rtt_prop_s >= 0)) throw ConfigError("rtt_prop_s must be non-negative");
  if (!(buffer_bytes > 0)) throw ConfigError("buffer_bytes must be positive");
  if (awnd_pkts < 0) throw ConfigError("awnd_pkts must be positive or 0 for auto");
  const auto aw = awnd(*this);
  if (aw < 1) throw ConfigError("advertised window resolves to zero packets");
  if (!allow_small_awnd && aw < awnd_auto(*this)) {
    throw ConfigError("advertised window is smaller than the bandwidth-delay product");
  }
}

enum class RecoveryAlgo { Standard, RH, PRR, QARR, BARR };

enum class EntryTrigger {
  Dupthresh,  // dupthresh packets SACKed above snd_una
  Fack,       // highest SACKed - snd_una > dupthresh
};

struct RecoveryConfig {
  RecoveryAlgo algorithm = RecoveryAlgo::PRR;
  bool or_enabled = false;
  bool hack1_enabled = false;
  double sndbuf_factor = 3;
  double qt_pkts = 5;
  int slide_m = 200;
  int dupthresh = 3;
  bool barr_use_min_rtt = false;
  bool qarr_vegas_growth = true;  // +1/RTT outside recovery while Q < Q_T
  EntryTrigger entry = EntryTrigger::Dupthresh;

  void validate() const {
    if (!(sndbuf_factor >= 1)) throw ConfigError("sndbuf_factor must be >= 1");
    if (!(qt_pkts >= 1)) throw ConfigError("qt must be >= 1");
    if (slide_m < 1) throw ConfigError("slide_m must be >= 1");
    if (dupthresh < 1) throw ConfigError("dupthresh must be >= 1");
  }
};

enum class Variant { CUBIC, Reno, Veno, Westwood, Vegas };
enum class SsthreshRule { FixedBeta, VenoConditional, WestwoodBdp };

struct VariantParams {
  Variant name = Variant::CUBIC;
  double beta = 0.7;
  SsthreshRule ssthresh_rule = SsthreshRule::FixedBeta;

  static VariantParams of(Variant v) {
    switch (v) {
      case Variant::CUBIC: return {v, 0.7, SsthreshRule::FixedBeta};
      case Variant::Reno: return {v, 0.5, SsthreshRule::FixedBeta};
      case Variant::Vegas: return {v, 0.5, SsthreshRule::FixedBeta};
      case Variant::Veno: return {v, 0.8, SsthreshRule::VenoConditional};
      case Variant::Westwood: return {v, 0.5, SsthreshRule::WestwoodBdp};
    }
    return {};
  }
};

struct LossModel {
  enum class Kind { None, RandomRate, ConsecutiveBurst, Scripted };
  Kind kind = Kind::None;
  double rate = 0;                    // per packet, RandomRate
  std::int64_t burst_n = 1;           // ConsecutiveBurst size
  std::int64_t trigger_seq = 0;       // first dropped packet index (original transmissions)
  std::vector<std::int64_t> script;   // Scripted: packet indices to drop once
  bool protect_retransmits = false;

  void validate() const {
    if (!(rate >= 0 && rate < 1)) throw ConfigError("loss rate must be in [0,1)");
    if (burst_n < 1) throw ConfigError("burst size must be >= 1");
  }

  static LossModel none() { return {}; }
  static LossModel random(double rho) {
    LossModel m;
    m.kind = Kind::RandomRate;
    m.rate = rho;
    return m;
  }
  static LossModel burst(std::int64_t n, std::int64_t trigger) {
    LossModel m;
    m.kind = Kind::ConsecutiveBurst;
    m.burst_n = n;
    m.trigger_seq = trigger;
    return m;
  }
  static LossModel scripted(std::vector<std::int64_t> seqs) {
    LossModel m;
    m.kind = Kind::Scripted;
    m.script = std::move(seqs);
    return m;
  }
};

/// Half-open byte range [start, end).
struct ByteRange {
  std::int64_t start = 0;
  std::int64_t end = 0;
  friend bool operator==(const ByteRange&, const ByteRange&) = default;
};

/// Sorts, merges overlapping/adjacent ranges and drops anything at or below cum_ack.
[[nodiscard]] inline std::vector<ByteRange> normalize_sack(std::vector<ByteRange> blocks,
                                                           std::int64_t cum_ack) {
  std::vector<ByteRange> out;
  for (auto& b : blocks) {
    if (b.start < cum_ack) b.start = cum_ack;
    if (b.end > b.start) out.push_back(b);
  }
  std::sort(out.begin(), out.end(), [](const ByteRange& a, const ByteRange& b) { return a.start < b.start; });
  std::vector<ByteRange> merged;
  for (const auto& b : out) {
    if (!merged.empty() && b.start <= merged.back().end) {
      merged.back().end = std::max(merged.back().end, b.end);
    } else {
      merged.push_back(b);
    }
  }
  return merged;
}

struct Packet {
  enum class Kind { Data, Ack };
  std::uint64_t id = 0;
  Kind kind = Kind::Data;
  std::int64_t seq_start = 0;
  std::int64_t seq_end = 0;
  bool is_retransmit = false;
  std::vector<ByteRange> sack_blocks;
  std::int64_t cum_ack = 0;
  std::int64_t awnd_bytes = 0;
  double sent_at = 0;
  double ts_echo = 0;
  std::uint64_t echo_id = 0;  // id of the data packet that triggered this ACK (timestamp echo at full resolution)
  bool new_sack = false;  // receiver-side hint used only for tracing; the sender derives its own
};

[[nodiscard]] inline std::string_view to_string(RecoveryAlgo a) {
  switch (a) {
    case RecoveryAlgo::Standard: return "standard";
    case RecoveryAlgo::RH: return "rh";
    case RecoveryAlgo::PRR: return "prr";
    case RecoveryAlgo::QARR: return "qarr";
    case RecoveryAlgo::BARR: return "barr";
  }
  return "?";
}

[[nodiscard]] inline std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::CUBIC: return "cubic";
    case Variant::Reno: return "reno";
    case Variant::Veno: return "veno";
    case Variant::Westwood: return "westwood";
    case Variant::Vegas: return "vegas";
  }
  return "?";
}

namespace detail {
inline std::string lower(std::string_view in) {
  std::string out(in);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}
}  // namespace detail

// Names are matched case-insensitively.
[[nodiscard]] inline RecoveryAlgo parse_algo(std::string_view raw) {
  const std::string s = detail::lower(raw);
  if (s == "standard") return RecoveryAlgo::Standard;
  if (s == "rh") return RecoveryAlgo::RH;
  if (s == "prr") return RecoveryAlgo::PRR;
  if (s == "qarr") return RecoveryAlgo::QARR;
  if (s == "barr") return RecoveryAlgo::BARR;
  throw ConfigError("unknown recovery algorithm: " + std::string(raw));
}

[[nodiscard]] inline Variant parse_variant(std::string_view raw) {
  const std::string s = detail::lower(raw);
  if (s == "cubic") return Variant::CUBIC;
  if (s == "reno") return Variant::Reno;
  if (s == "veno") return Variant::Veno;
  if (s == "westwood") return Variant::Westwood;
  if (s == "vegas") return Variant::Vegas;
  throw ConfigError("unknown variant: " + std::string(raw));
}

}  // namespace tcplr
