#ifndef STETH_SERVICE_HPP_
#define STETH_SERVICE_HPP_

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>

#include "steth/audio.hpp"
#include "steth/dsp_chain.hpp"
#include "steth/transport.hpp"

namespace steth {

enum class ControlKind { SetVolume, SetCutoff, GetStatus };

struct ControlCommand
{
    ControlKind kind = ControlKind::GetStatus;
    double value = 0.0;
};

/// Parses one line of the control protocol ("SET VOLUME 0.5",
/// "SET CUTOFF 1000", "GET STATUS"). Throws Rejected on anything else.
ControlCommand parse_control(std::string_view line);

/// Returns `cfg` with the command applied. Throws Rejected if the result
/// would be invalid; `cfg` is never modified.
ChainConfig apply_control(const ControlCommand& cmd, const ChainConfig& cfg);

struct ServerConfig
{
    std::string bind_host = "127.0.0.1";
    std::uint16_t stream_port = 0; ///< 0 picks an ephemeral port
    std::uint16_t control_port = 0;
    std::size_t queue_limit = 256;
    /// SO_SNDBUF for listener sockets; 0 keeps the system default.
    int send_buffer_bytes = 0;
    /// Samples processed between control-command checkpoints.
    std::size_t block_samples = 480;
};

struct ServerStats
{
    std::uint64_t packets_broadcast = 0;
    std::uint64_t sessions_accepted = 0;
    std::uint64_t sessions_live = 0;
    std::uint64_t sessions_dropped_slow = 0;
    std::uint64_t sessions_failed = 0;
    std::uint64_t commands_applied = 0;
};

/// Broadcasts the processed stream to every connected listener as
/// [u16 big-endian length][encoded packet] frames and serves the text
/// control protocol on a second port. A listener sees only packets
/// broadcast after it joined; one whose queue exceeds the limit is
/// disconnected instead of stalling the others.
class StreamServer
{
public:
    StreamServer(const ServerConfig& server, const ChainConfig& chain);
    ~StreamServer();

    StreamServer(const StreamServer&) = delete;
    StreamServer& operator=(const StreamServer&) = delete;

    std::uint16_t stream_port() const noexcept;
    std::uint16_t control_port() const noexcept;

    /// Blocks until `count` listeners are connected or the timeout passes.
    bool wait_for_listeners(std::size_t count, std::chrono::milliseconds timeout);

    /// Runs `source` through the transmit chain block by block and
    /// broadcasts the packets, paced at `speed` x real time (speed <= 0
    /// disables pacing). Returns early when `cancel` becomes nonzero.
    void stream(const AudioBuffer& source, double speed,
                const volatile std::sig_atomic_t* cancel = nullptr);

    /// Broadcasts one already-encoded packet.
    void broadcast(std::span<const std::uint8_t> encoded);

    /// Handles one control line and returns the reply ("OK", "ERR ...",
    /// or a STATUS line).
    std::string handle_control_line(std::string_view line);

    /// Stops accepting, lets every live listener drain its queue, then
    /// closes all connections. Idempotent.
    void shutdown();

    ChainConfig config() const;
    ServerStats stats() const;

private:
    struct Impl;
    std::unique_ptr<Impl> m_impl;
};

enum class StreamEnd { EndOfStream, ConnectionReset, ProtocolError, Cancelled };

const char* to_string(StreamEnd e) noexcept;

/// Receives packets from a listener connection, in arrival order.
class PacketConsumer
{
public:
    virtual ~PacketConsumer() = default;
    /// `frame` is the encoded packet exactly as received; `arrival` is
    /// seconds since the connection was established.
    virtual void on_packet(const Packet& packet, std::span<const std::uint8_t> frame,
                           double arrival) = 0;
    virtual void on_end(StreamEnd reason) = 0;
};

struct ListenConfig
{
    std::string host = "127.0.0.1";
    std::uint16_t port = 0;
    /// SO_RCVBUF for the connection; 0 keeps the system default.
    int receive_buffer_bytes = 0;
};

struct ListenSummary
{
    StreamEnd end = StreamEnd::EndOfStream;
    std::string detail;
    std::uint64_t packets = 0;
    std::uint64_t bytes = 0;
};

/// Connects and feeds `sink` until the server closes, the stream breaks,
/// or `cancel` becomes nonzero. Throws Network if the connection cannot be
/// established; later failures end the stream and are reported in the
/// summary after sink.on_end() has run.
ListenSummary listen_client(const ListenConfig& cfg, PacketConsumer& sink,
                            const volatile std::sig_atomic_t* cancel = nullptr);

/// Consumer that plays the stream through a jitter buffer and keeps the
/// DAC output for recording.
class RecordingSink : public PacketConsumer
{
public:
    RecordingSink(const JitterConfig& jitter, double full_scale);

    void on_packet(const Packet& packet, std::span<const std::uint8_t> frame,
                   double arrival) override;
    void on_end(StreamEnd reason) override;

    /// Valid after on_end().
    AudioBuffer recording() const;
    const JitterStats& jitter_stats() const noexcept { return m_jitter.stats(); }
    std::uint8_t last_flags() const noexcept { return m_last_flags; }

private:
    JitterBuffer m_jitter;
    double m_full_scale;
    std::uint32_t m_rate;
    std::vector<std::uint16_t> m_codes;
    std::uint8_t m_last_flags = 0;
};

/// Sends one line to a control port and returns the reply line.
std::string send_control(const std::string& host, std::uint16_t port, std::string_view line,
                         std::chrono::milliseconds timeout = std::chrono::seconds(5));

} // namespace steth

#endif
