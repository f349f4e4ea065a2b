#ifndef STETH_TRANSPORT_HPP_
#define STETH_TRANSPORT_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "steth/audio.hpp"

namespace steth {

inline constexpr std::uint8_t kPacketVersion = 1;
inline constexpr std::size_t kMaxCodesPerPacket = 48;
inline constexpr std::size_t kPacketHeaderBytes = 9;
/// Application payload budget left in a 127-byte 802.15.4 frame.
inline constexpr std::size_t kMaxPacketBytes = 102;

namespace packet_flags {
inline constexpr std::uint8_t kCutoffHigh = 0x01; ///< set: 1000 Hz filter, clear: 100 Hz
inline constexpr std::uint8_t kOddPadding = 0x02; ///< set when the code count is odd
} // namespace packet_flags

struct Packet
{
    std::uint8_t version = kPacketVersion;
    std::uint8_t flags = 0;
    std::uint16_t seq = 0;
    std::uint32_t timestamp = 0;
    std::vector<std::uint16_t> codes;

    void validate() const;

    friend bool operator==(const Packet&, const Packet&) = default;
};

/// Bytes on the wire for a packet carrying `count` codes.
constexpr std::size_t encoded_size(std::size_t count) noexcept
{
    return kPacketHeaderBytes + (count * 12 + 7) / 8;
}

inline constexpr std::size_t kMaxEncodedBytes = encoded_size(kMaxCodesPerPacket);
static_assert(kMaxEncodedBytes <= kMaxPacketBytes);

/// Splits a block into 48-code packets with consecutive (wrapping)
/// sequence numbers. The odd-padding flag is derived per packet; other
/// bits of `flags` are copied through.
std::vector<Packet> packetize(const SampleBlock& block, std::uint16_t seq_start,
                              std::uint8_t flags);

std::vector<std::uint8_t> encode_packet(const Packet& p);
Packet decode_packet(std::span<const std::uint8_t> bytes);

struct LinkParams
{
    double bitrate = 250000.0;
    double loss_prob = 0.0;
    double jitter_max = 0.020;
    std::uint32_t overhead_bytes = 25;
    std::uint64_t seed = 1;

    void validate() const;
};

struct TimedPacket
{
    Packet packet;
    double send_time = 0.0;
};

struct DeliveredPacket
{
    Packet packet;
    double send_time = 0.0;
    double transmit_end = 0.0;
    double arrival_time = 0.0;
    bool dropped = false;
};

struct LinkReport
{
    std::vector<DeliveredPacket> packets; ///< in transmission order
    double busy_time = 0.0;
    double utilization = 0.0;
};

double serialization_delay(std::size_t encoded_bytes, const LinkParams& params);

/// Half-duplex FIFO radio channel with Bernoulli loss and uniform jitter.
/// Deterministic for a given seed.
LinkReport link_transmit(std::span<const TimedPacket> packets, const LinkParams& params);

enum class Concealment { ZeroFill, RepeatLast };

struct JitterConfig
{
    double depth = 0.100;
    Concealment concealment = Concealment::ZeroFill;
    std::uint32_t sample_rate = 4000;
    /// When set, playout starts here instead of at the first packet heard.
    std::optional<std::uint64_t> start_timestamp;
    /// When set, playout stops here; nothing past it is played or concealed.
    std::optional<std::uint64_t> end_timestamp;

    void validate() const;
};

struct JitterStats
{
    std::uint64_t accepted = 0;
    std::uint64_t played = 0;
    std::uint64_t dropped = 0;
    std::uint64_t late = 0;
    std::uint64_t duplicate = 0;
    std::uint64_t concealed_samples = 0;
};

/// Receiver playout buffer. The first packet heard anchors the playout
/// clock: sample s plays at anchor_arrival + (s - anchor_ts)/rate + depth.
/// A packet whose first sample has already been played is late and is
/// discarded; holes are concealed as the clock passes them.
class JitterBuffer
{
public:
    explicit JitterBuffer(const JitterConfig& cfg);

    /// Arrivals must be pushed in nondecreasing arrival_time order.
    void push(const DeliveredPacket& dp);

    /// Plays out everything due at `now`.
    void advance_to(double now);

    /// Plays out all buffered packets regardless of the clock, then
    /// conceals up to `end_timestamp` if given.
    void flush(std::optional<std::uint64_t> end_timestamp = std::nullopt);

    /// Codes played since the previous take(), as a contiguous block.
    SampleBlock take();

    const JitterStats& stats() const noexcept { return m_stats; }
    std::uint64_t cursor() const noexcept { return m_cursor; }

private:
    std::uint64_t unwrap(std::uint32_t ts) const noexcept;
    void play_until(std::uint64_t bound);
    void conceal(std::uint64_t count);

    JitterConfig m_cfg;
    JitterStats m_stats;
    bool m_anchored = false;
    double m_anchor_time = 0.0;
    std::uint64_t m_anchor_ts = 0;
    std::uint64_t m_cursor = 0;
    std::uint64_t m_last_end = 0;
    std::vector<std::uint16_t> m_last_codes;
    std::map<std::uint64_t, std::vector<std::uint16_t>> m_pending;
    std::vector<std::uint16_t> m_out;
    std::uint64_t m_out_start = 0;
};

/// Offline playout: orders arrivals by time, runs them through a
/// JitterBuffer and flushes to `end_timestamp` (default: the end of the
/// last packet received). Output never runs past that point.
SampleBlock reassemble(std::span<const DeliveredPacket> delivered, const JitterConfig& cfg,
                       std::optional<std::uint64_t> end_timestamp = std::nullopt,
                       JitterStats* stats = nullptr);

} // namespace steth

#endif
