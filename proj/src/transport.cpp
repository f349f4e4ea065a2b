#include "steth/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "steth/error.hpp"

namespace steth {

namespace {

double unit_uniform(std::mt19937_64& rng)
{
    return double(rng() >> 11) * 0x1.0p-53;
}

std::uint8_t with_parity_flag(std::uint8_t flags, std::size_t count)
{
    flags &= std::uint8_t(~packet_flags::kOddPadding);
    if (count % 2 != 0)
        flags |= packet_flags::kOddPadding;
    return flags;
}

} // namespace

void Packet::validate() const
{
    if (version != kPacketVersion)
        fail(ErrorCode::BadVersion, "packet version " + std::to_string(version));
    if (codes.empty() || codes.size() > kMaxCodesPerPacket)
        fail(ErrorCode::BadCount, "packet carries " + std::to_string(codes.size()) +
                                      " codes, expected 1.." +
                                      std::to_string(kMaxCodesPerPacket));
    for (std::uint16_t c : codes)
        if (c > kMaxCode)
            fail(ErrorCode::InvalidArgument, "code " + std::to_string(c) + " exceeds 12 bits");
    if (with_parity_flag(flags, codes.size()) != flags)
        fail(ErrorCode::BadFlags, "odd-padding flag disagrees with code count");
}

std::vector<Packet> packetize(const SampleBlock& block, std::uint16_t seq_start,
                              std::uint8_t flags)
{
    block.validate();
    std::vector<Packet> out;
    out.reserve((block.codes.size() + kMaxCodesPerPacket - 1) / kMaxCodesPerPacket);
    std::uint16_t seq = seq_start;
    for (std::size_t off = 0; off < block.codes.size(); off += kMaxCodesPerPacket) {
        const std::size_t n = std::min(kMaxCodesPerPacket, block.codes.size() - off);
        Packet p;
        p.seq = seq++;
        p.timestamp = static_cast<std::uint32_t>(block.start_timestamp + off);
        p.codes.assign(block.codes.begin() + std::ptrdiff_t(off),
                       block.codes.begin() + std::ptrdiff_t(off + n));
        p.flags = with_parity_flag(flags, n);
        out.push_back(std::move(p));
    }
    return out;
}

std::vector<std::uint8_t> encode_packet(const Packet& p)
{
    if (p.codes.size() > kMaxCodesPerPacket || encoded_size(p.codes.size()) > kMaxPacketBytes)
        fail(ErrorCode::Encoding, "packet of " + std::to_string(p.codes.size()) +
                                      " codes does not fit one frame");
    try {
        p.validate();
    } catch (const Error& e) {
        fail(ErrorCode::Encoding, e.what());
    }

    std::vector<std::uint8_t> out;
    out.reserve(encoded_size(p.codes.size()));
    out.push_back(p.version);
    out.push_back(p.flags);
    out.push_back(std::uint8_t(p.seq >> 8));
    out.push_back(std::uint8_t(p.seq));
    for (int shift = 24; shift >= 0; shift -= 8)
        out.push_back(std::uint8_t(p.timestamp >> shift));
    out.push_back(std::uint8_t(p.codes.size()));

    const std::size_t n = p.codes.size();
    for (std::size_t i = 0; i < n; i += 2) {
        const std::uint16_t s0 = p.codes[i];
        const std::uint16_t s1 = i + 1 < n ? p.codes[i + 1] : 0;
        out.push_back(std::uint8_t(s0 >> 4));
        if (i + 1 < n) {
            out.push_back(std::uint8_t(((s0 & 0xF) << 4) | (s1 >> 8)));
            out.push_back(std::uint8_t(s1 & 0xFF));
        } else {
            out.push_back(std::uint8_t((s0 & 0xF) << 4));
        }
    }
    return out;
}

Packet decode_packet(std::span<const std::uint8_t> bytes)
{
    if (bytes.size() < kPacketHeaderBytes)
        fail(ErrorCode::Truncated, "header needs " + std::to_string(kPacketHeaderBytes) +
                                       " bytes, got " + std::to_string(bytes.size()));
    Packet p;
    p.version = bytes[0];
    if (p.version != kPacketVersion)
        fail(ErrorCode::BadVersion, "packet version " + std::to_string(p.version));
    p.flags = bytes[1];
    p.seq = std::uint16_t((bytes[2] << 8) | bytes[3]);
    p.timestamp = (std::uint32_t(bytes[4]) << 24) | (std::uint32_t(bytes[5]) << 16) |
                  (std::uint32_t(bytes[6]) << 8) | std::uint32_t(bytes[7]);
    const std::size_t n = bytes[8];
    if (n == 0 || n > kMaxCodesPerPacket)
        fail(ErrorCode::BadCount, "code count " + std::to_string(n));

    const std::size_t need = encoded_size(n);
    if (bytes.size() < need)
        fail(ErrorCode::Truncated, "payload needs " + std::to_string(need) + " bytes, got " +
                                       std::to_string(bytes.size()));
    if (bytes.size() > need)
        fail(ErrorCode::LengthMismatch, "code count " + std::to_string(n) + " implies " +
                                            std::to_string(need) + " bytes, got " +
                                            std::to_string(bytes.size()));
    if (with_parity_flag(p.flags, n) != p.flags)
        fail(ErrorCode::BadFlags, "odd-padding flag disagrees with code count");

    p.codes.reserve(n);
    const std::uint8_t* d = bytes.data() + kPacketHeaderBytes;
    for (std::size_t i = 0; i < n; i += 2, d += 3) {
        p.codes.push_back(std::uint16_t((d[0] << 4) | (d[1] >> 4)));
        if (i + 1 < n)
            p.codes.push_back(std::uint16_t(((d[1] & 0xF) << 8) | d[2]));
        else if ((d[1] & 0xF) != 0)
            fail(ErrorCode::BadFlags, "padding nibble is not zero");
    }
    return p;
}

void LinkParams::validate() const
{
    if (!(bitrate > 0.0))
        fail(ErrorCode::InvalidArgument, "bitrate must be positive");
    if (!(loss_prob >= 0.0 && loss_prob < 1.0))
        fail(ErrorCode::InvalidArgument, "loss probability must lie in [0, 1)");
    if (!(jitter_max >= 0.0) || !std::isfinite(jitter_max))
        fail(ErrorCode::InvalidArgument, "jitter bound must be non-negative");
}

double serialization_delay(std::size_t encoded_bytes, const LinkParams& params)
{
    return double(encoded_bytes + params.overhead_bytes) * 8.0 / params.bitrate;
}

LinkReport link_transmit(std::span<const TimedPacket> packets, const LinkParams& params)
{
    params.validate();
    LinkReport report;
    report.packets.reserve(packets.size());

    std::mt19937_64 rng(params.seed);
    double channel_free = -std::numeric_limits<double>::infinity();
    double prev_send = -std::numeric_limits<double>::infinity();

    for (const TimedPacket& tp : packets) {
        if (tp.send_time < prev_send)
            fail(ErrorCode::InvalidArgument, "send times must be nondecreasing");
        prev_send = tp.send_time;

        const double delay = serialization_delay(encoded_size(tp.packet.codes.size()), params);
        const double start = std::max(tp.send_time, channel_free);
        channel_free = start + delay;
        report.busy_time += delay;

        // one loss draw then one jitter draw per packet keeps the stream
        // aligned whatever the outcome
        const bool dropped = unit_uniform(rng) < params.loss_prob;
        const double jitter = unit_uniform(rng) * params.jitter_max;

        DeliveredPacket dp;
        dp.packet = tp.packet;
        dp.send_time = tp.send_time;
        dp.transmit_end = channel_free;
        dp.arrival_time = channel_free + jitter;
        dp.dropped = dropped;
        report.packets.push_back(std::move(dp));
    }

    if (!packets.empty()) {
        const double span = channel_free - packets.front().send_time;
        report.utilization = span > 0.0 ? report.busy_time / span : 1.0;
    }
    return report;
}

void JitterConfig::validate() const
{
    if (!(depth > 0.0) || !std::isfinite(depth))
        fail(ErrorCode::InvalidArgument, "jitter buffer depth must be positive");
    if (sample_rate == 0)
        fail(ErrorCode::InvalidArgument, "sample rate must be positive");
}

JitterBuffer::JitterBuffer(const JitterConfig& cfg)
    : m_cfg(cfg)
{
    m_cfg.validate();
}

std::uint64_t JitterBuffer::unwrap(std::uint32_t ts) const noexcept
{
    // nearest 64-bit index to the cursor that shares the low 32 bits
    const std::uint64_t ref = m_cursor;
    const auto delta = static_cast<std::int32_t>(ts - static_cast<std::uint32_t>(ref));
    const auto ext = static_cast<std::int64_t>(ref) + delta;
    return ext < 0 ? std::uint64_t(ts) : std::uint64_t(ext);
}

void JitterBuffer::push(const DeliveredPacket& dp)
{
    if (dp.dropped) {
        ++m_stats.dropped;
        return;
    }
    if (!m_anchored) {
        m_anchored = true;
        m_anchor_time = dp.arrival_time;
        m_anchor_ts = m_cfg.start_timestamp.value_or(dp.packet.timestamp);
        m_cursor = m_anchor_ts;
        m_out_start = m_cursor;
        m_last_end = m_cursor;
        m_anchor_ts = unwrap(dp.packet.timestamp);
    }
    advance_to(dp.arrival_time);

    const std::uint64_t ts = unwrap(dp.packet.timestamp);
    if (ts < m_cursor) {
        ++m_stats.late;
        return;
    }
    auto [it, inserted] = m_pending.try_emplace(ts, dp.packet.codes);
    if (!inserted) {
        ++m_stats.duplicate;
        return;
    }
    ++m_stats.accepted;
}

void JitterBuffer::advance_to(double now)
{
    if (!m_anchored)
        return;
    const double due = (now - m_anchor_time - m_cfg.depth) * m_cfg.sample_rate;
    if (due < 0.0)
        return;
    // samples with index <= anchor + due are due; play up to (exclusive) bound
    const std::uint64_t bound = m_anchor_ts + std::uint64_t(std::floor(due)) + 1;
    play_until(bound);
}

void JitterBuffer::play_until(std::uint64_t bound)
{
    if (m_cfg.end_timestamp)
        bound = std::min(bound, *m_cfg.end_timestamp);
    while (m_cursor < bound) {
        auto it = m_pending.begin();
        while (it != m_pending.end() && it->first < m_cursor) {
            // overlaps audio already played
            ++m_stats.late;
            --m_stats.accepted;
            it = m_pending.erase(it);
        }
        if (it != m_pending.end() && it->first == m_cursor) {
            m_out.insert(m_out.end(), it->second.begin(), it->second.end());
            m_cursor += it->second.size();
            m_last_end = m_cursor;
            m_last_codes = std::move(it->second);
            m_pending.erase(it);
            ++m_stats.played;
            continue;
        }
        const std::uint64_t gap_end = it == m_pending.end() ? bound : std::min(bound, it->first);
        conceal(gap_end - m_cursor);
    }
}

void JitterBuffer::conceal(std::uint64_t count)
{
    for (std::uint64_t i = 0; i < count; ++i, ++m_cursor) {
        if (m_cfg.concealment == Concealment::RepeatLast && !m_last_codes.empty())
            m_out.push_back(m_last_codes[(m_cursor - m_last_end) % m_last_codes.size()]);
        else
            m_out.push_back(kMidCode);
    }
    m_stats.concealed_samples += count;
}

void JitterBuffer::flush(std::optional<std::uint64_t> end_timestamp)
{
    if (!m_anchored)
        return;
    for (;;) {
        while (!m_pending.empty() && m_pending.begin()->first < m_cursor) {
            ++m_stats.late;
            --m_stats.accepted;
            m_pending.erase(m_pending.begin());
        }
        if (m_pending.empty())
            break;
        const auto& last = *m_pending.rbegin();
        play_until(last.first + last.second.size());
    }
    if (end_timestamp && m_cfg.end_timestamp)
        end_timestamp = std::min(*end_timestamp, *m_cfg.end_timestamp);
    if (end_timestamp && *end_timestamp > m_cursor)
        conceal(*end_timestamp - m_cursor);
}

SampleBlock JitterBuffer::take()
{
    SampleBlock block;
    block.sample_rate = m_cfg.sample_rate;
    block.start_timestamp = m_out_start;
    block.codes = std::move(m_out);
    m_out.clear();
    m_out_start = m_cursor;
    return block;
}

SampleBlock reassemble(std::span<const DeliveredPacket> delivered, const JitterConfig& cfg,
                       std::optional<std::uint64_t> end_timestamp, JitterStats* stats)
{
    std::vector<std::size_t> order(delivered.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return delivered[a].arrival_time < delivered[b].arrival_time;
    });

    JitterConfig bounded = cfg;
    if (!end_timestamp) {
        // end of the last packet heard, unwrapped against the first arrival
        bool have = false;
        std::uint64_t base = cfg.start_timestamp.value_or(0), last = 0;
        for (std::size_t i : order) {
            const DeliveredPacket& dp = delivered[i];
            if (dp.dropped)
                continue;
            if (!have && !cfg.start_timestamp)
                base = dp.packet.timestamp;
            have = true;
            const auto delta =
                static_cast<std::int32_t>(dp.packet.timestamp - static_cast<std::uint32_t>(base));
            const auto ext = static_cast<std::int64_t>(base) + delta;
            if (ext >= 0)
                last = std::max(last, std::uint64_t(ext) + dp.packet.codes.size());
        }
        if (have)
            bounded.end_timestamp = last;
    } else {
        bounded.end_timestamp = end_timestamp;
    }

    JitterBuffer jb(bounded);
    for (std::size_t i : order)
        jb.push(delivered[i]);
    jb.flush(end_timestamp);

    SampleBlock out = jb.take();
    if (out.codes.empty() && cfg.start_timestamp) {
        // nothing arrived at all
        out.start_timestamp = *cfg.start_timestamp;
        if (end_timestamp && *end_timestamp > *cfg.start_timestamp)
            out.codes.assign(*end_timestamp - *cfg.start_timestamp, kMidCode);
    }
    if (stats)
        *stats = jb.stats();
    return out;
}

} // namespace steth
