#include "steth/service.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <list>
#include <mutex>
#include <sstream>
#include <thread>
#include <vector>

#include "steth/error.hpp"
#include "steth/pipeline.hpp"

namespace steth {

namespace {

constexpr int kPollMillis = 100;

class Socket
{
public:
    Socket() = default;
    explicit Socket(int fd) : m_fd(fd) {}
    ~Socket() { close(); }
    Socket(Socket&& o) noexcept : m_fd(std::exchange(o.m_fd, -1)) {}
    Socket& operator=(Socket&& o) noexcept
    {
        if (this != &o) {
            close();
            m_fd = std::exchange(o.m_fd, -1);
        }
        return *this;
    }
    Socket(const Socket&) = delete;
    Socket& operator=(const Socket&) = delete;

    int fd() const noexcept { return m_fd; }
    explicit operator bool() const noexcept { return m_fd >= 0; }

    void close() noexcept
    {
        if (m_fd >= 0)
            ::close(m_fd);
        m_fd = -1;
    }

private:
    int m_fd = -1;
};

std::string errno_text(const char* what)
{
    return std::string(what) + ": " + std::strerror(errno);
}

addrinfo* resolve(const std::string& host, std::uint16_t port, bool passive)
{
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    hints.ai_flags = passive ? AI_PASSIVE : 0;
    addrinfo* res = nullptr;
    const std::string service = std::to_string(port);
    const int rc = ::getaddrinfo(host.empty() ? nullptr : host.c_str(), service.c_str(), &hints, &res);
    if (rc != 0)
        fail(ErrorCode::Network, "cannot resolve '" + host + "': " + ::gai_strerror(rc));
    return res;
}

Socket open_listener(const std::string& host, std::uint16_t port)
{
    addrinfo* res = resolve(host, port, true);
    std::string last = "no usable address";
    for (addrinfo* ai = res; ai; ai = ai->ai_next) {
        Socket s(::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol));
        if (!s) {
            last = errno_text("socket");
            continue;
        }
        int one = 1;
        ::setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
        if (::bind(s.fd(), ai->ai_addr, ai->ai_addrlen) != 0) {
            last = errno_text("bind");
            continue;
        }
        if (::listen(s.fd(), 16) != 0) {
            last = errno_text("listen");
            continue;
        }
        ::freeaddrinfo(res);
        return s;
    }
    ::freeaddrinfo(res);
    fail(ErrorCode::Network, "cannot listen on " + host + ":" + std::to_string(port) + " (" +
                                 last + ")");
}

std::uint16_t local_port(const Socket& s)
{
    sockaddr_storage addr{};
    socklen_t len = sizeof addr;
    if (::getsockname(s.fd(), reinterpret_cast<sockaddr*>(&addr), &len) != 0)
        return 0;
    if (addr.ss_family == AF_INET)
        return ntohs(reinterpret_cast<sockaddr_in*>(&addr)->sin_port);
    if (addr.ss_family == AF_INET6)
        return ntohs(reinterpret_cast<sockaddr_in6*>(&addr)->sin6_port);
    return 0;
}

Socket connect_to(const std::string& host, std::uint16_t port, int rcvbuf)
{
    addrinfo* res = resolve(host, port, false);
    std::string last = "no usable address";
    for (addrinfo* ai = res; ai; ai = ai->ai_next) {
        Socket s(::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol));
        if (!s) {
            last = errno_text("socket");
            continue;
        }
        if (rcvbuf > 0)
            ::setsockopt(s.fd(), SOL_SOCKET, SO_RCVBUF, &rcvbuf, sizeof rcvbuf);
        if (::connect(s.fd(), ai->ai_addr, ai->ai_addrlen) != 0) {
            last = errno_text("connect");
            continue;
        }
        ::freeaddrinfo(res);
        return s;
    }
    ::freeaddrinfo(res);
    fail(ErrorCode::Network, "cannot connect to " + host + ":" + std::to_string(port) + " (" +
                                 last + ")");
}

bool send_all(int fd, std::span<const std::uint8_t> data)
{
    std::size_t off = 0;
    while (off < data.size()) {
        const ssize_t n = ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR)
                continue;
            return false;
        }
        off += std::size_t(n);
    }
    return true;
}

enum class ReadStatus { Ok, Closed, ClosedMidway, Error, Cancelled, TimedOut };

bool cancelled(const volatile std::sig_atomic_t* flag)
{
    return flag && *flag != 0;
}

/// Reads exactly `out.size()` bytes, polling so that `cancel` and the
/// optional deadline are honoured.
ReadStatus read_exact(int fd, std::span<std::uint8_t> out, const volatile std::sig_atomic_t* cancel,
                      std::chrono::steady_clock::time_point deadline =
                          std::chrono::steady_clock::time_point::max())
{
    std::size_t got = 0;
    while (got < out.size()) {
        if (cancelled(cancel))
            return ReadStatus::Cancelled;
        if (std::chrono::steady_clock::now() >= deadline)
            return ReadStatus::TimedOut;
        pollfd p{fd, POLLIN, 0};
        const int rc = ::poll(&p, 1, kPollMillis);
        if (rc < 0) {
            if (errno == EINTR)
                continue;
            return ReadStatus::Error;
        }
        if (rc == 0)
            continue;
        const ssize_t n = ::recv(fd, out.data() + got, out.size() - got, 0);
        if (n < 0) {
            if (errno == EINTR || errno == EAGAIN)
                continue;
            return ReadStatus::Error;
        }
        if (n == 0)
            return got == 0 ? ReadStatus::Closed : ReadStatus::ClosedMidway;
        got += std::size_t(n);
    }
    return ReadStatus::Ok;
}

std::string format_double(double v)
{
    std::ostringstream os;
    os << v;
    return os.str();
}

std::string upper(std::string_view s)
{
    std::string out(s);
    for (char& c : out)
        c = char(std::toupper(static_cast<unsigned char>(c)));
    return out;
}

using Frame = std::shared_ptr<const std::vector<std::uint8_t>>;

struct Session
{
    std::uint64_t id = 0;
    Socket sock;
    std::mutex m;
    std::condition_variable cv;
    std::deque<Frame> queue;
    bool draining = false;
    bool killed = false;
    bool failed = false;
    std::atomic<bool> done{false};
    std::uint64_t sent = 0;
    std::chrono::steady_clock::time_point subscribed;
    std::thread sender;

    void run()
    {
        bool graceful = false;
        for (;;) {
            Frame f;
            {
                std::unique_lock lk(m);
                cv.wait(lk, [&] { return killed || draining || !queue.empty(); });
                if (killed)
                    break;
                if (queue.empty()) {
                    graceful = true;
                    break;
                }
                f = std::move(queue.front());
                queue.pop_front();
            }
            if (!send_all(sock.fd(), *f)) {
                std::lock_guard lk(m);
                failed = true;
                break;
            }
            std::lock_guard lk(m);
            ++sent;
        }
        if (graceful)
            ::shutdown(sock.fd(), SHUT_WR);
        done = true;
    }
};

} // namespace

ControlCommand parse_control(std::string_view line)
{
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n' || line.back() == ' '))
        line.remove_suffix(1);
    std::istringstream in{std::string(line)};
    std::string verb, noun, value, extra;
    in >> verb >> noun >> value >> extra;
    verb = upper(verb);
    noun = upper(noun);

    if (verb == "GET" && noun == "STATUS" && value.empty())
        return {ControlKind::GetStatus, 0.0};
    if (verb != "SET" || (noun != "VOLUME" && noun != "CUTOFF"))
        fail(ErrorCode::Rejected, "unknown command '" + std::string(line) + "'");
    if (value.empty() || !extra.empty())
        fail(ErrorCode::Rejected, "SET " + noun + " takes exactly one value");

    double v = 0.0;
    const char* first = value.data();
    const char* last = value.data() + value.size();
    char* end = nullptr;
    v = std::strtod(first, &end);
    if (end != last || !std::isfinite(v))
        fail(ErrorCode::Rejected, "'" + value + "' is not a number");
    return {noun == "VOLUME" ? ControlKind::SetVolume : ControlKind::SetCutoff, v};
}

ChainConfig apply_control(const ControlCommand& cmd, const ChainConfig& cfg)
{
    ChainConfig next = cfg;
    switch (cmd.kind) {
    case ControlKind::SetVolume:
        if (!(cmd.value >= 0.0 && cmd.value <= 1.0))
            fail(ErrorCode::Rejected, "volume " + format_double(cmd.value) + " outside [0, 1]");
        next.volume = cmd.value;
        break;
    case ControlKind::SetCutoff:
        if (!is_supported_cutoff(cmd.value))
            fail(ErrorCode::Rejected,
                 "cutoff " + format_double(cmd.value) + " Hz is not one of 100, 1000");
        next.cutoff_hz = int(cmd.value);
        break;
    case ControlKind::GetStatus:
        break;
    }
    try {
        next.validate();
    } catch (const Error& e) {
        fail(ErrorCode::Rejected, e.what());
    }
    return next;
}

struct StreamServer::Impl
{
    ServerConfig server;
    Socket stream_listener;
    Socket control_listener;
    std::uint16_t stream_port = 0;
    std::uint16_t control_port = 0;
    std::atomic<bool> stopping{false};
    bool shut = false;

    std::thread stream_acceptor;
    std::thread control_acceptor;

    mutable std::mutex sessions_m;
    std::condition_variable sessions_cv;
    std::list<std::unique_ptr<Session>> sessions;
    std::uint64_t next_session_id = 1;

    std::mutex control_m;
    std::list<std::pair<Socket, std::thread>> control_conns;

    mutable std::mutex cfg_m;
    ChainConfig active;  // what the processing loop runs
    ChainConfig target;  // active with every accepted command applied
    bool streaming = false;
    bool pending = false;
    // a later stream() continues the numbering so listeners see one stream
    std::uint16_t next_seq = 0;
    std::uint64_t next_ts = 0;

    mutable std::mutex stats_m;
    ServerStats stats;

    void accept_streams()
    {
        while (!stopping) {
            pollfd p{stream_listener.fd(), POLLIN, 0};
            if (::poll(&p, 1, kPollMillis) <= 0)
                continue;
            Socket s(::accept4(stream_listener.fd(), nullptr, nullptr, SOCK_CLOEXEC));
            if (!s)
                continue;
            int one = 1;
            ::setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
            if (server.send_buffer_bytes > 0)
                ::setsockopt(s.fd(), SOL_SOCKET, SO_SNDBUF, &server.send_buffer_bytes,
                             sizeof server.send_buffer_bytes);

            auto session = std::make_unique<Session>();
            session->sock = std::move(s);
            session->subscribed = std::chrono::steady_clock::now();
            Session* raw = session.get();
            {
                std::lock_guard lk(sessions_m);
                if (stopping)
                    break;
                raw->id = next_session_id++;
                sessions.push_back(std::move(session));
                raw->sender = std::thread([raw] { raw->run(); });
            }
            {
                std::lock_guard lk(stats_m);
                ++stats.sessions_accepted;
            }
            sessions_cv.notify_all();
        }
    }

    void accept_control(StreamServer& owner)
    {
        while (!stopping) {
            pollfd p{control_listener.fd(), POLLIN, 0};
            if (::poll(&p, 1, kPollMillis) <= 0)
                continue;
            Socket s(::accept4(control_listener.fd(), nullptr, nullptr, SOCK_CLOEXEC));
            if (!s)
                continue;
            std::lock_guard lk(control_m);
            if (stopping)
                break;
            auto& conn = control_conns.emplace_back(std::move(s), std::thread{});
            const int fd = conn.first.fd();
            conn.second = std::thread([this, &owner, fd] { serve_control(owner, fd); });
        }
    }

    void serve_control(StreamServer& owner, int fd)
    {
        std::string buffer;
        char chunk[256];
        while (!stopping) {
            pollfd p{fd, POLLIN, 0};
            const int rc = ::poll(&p, 1, kPollMillis);
            if (rc < 0 && errno != EINTR)
                return;
            if (rc <= 0)
                continue;
            const ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
            if (n <= 0)
                return;
            buffer.append(chunk, std::size_t(n));
            std::size_t nl;
            while ((nl = buffer.find('\n')) != std::string::npos) {
                const std::string line = buffer.substr(0, nl);
                buffer.erase(0, nl + 1);
                const std::string reply = owner.handle_control_line(line) + "\n";
                if (!send_all(fd, {reinterpret_cast<const std::uint8_t*>(reply.data()),
                                   reply.size()}))
                    return;
            }
            if (buffer.size() > 4096)
                return;
        }
    }

    void reap_locked()
    {
        for (auto it = sessions.begin(); it != sessions.end();) {
            if ((*it)->done) {
                (*it)->sender.join();
                it = sessions.erase(it);
            } else {
                ++it;
            }
        }
    }

    void publish(const Frame& frame)
    {
        std::uint64_t slow = 0, failed = 0;
        {
            std::lock_guard lk(sessions_m);
            for (auto& s : sessions) {
                std::lock_guard sl(s->m);
                if (s->killed || s->failed || s->draining)
                    continue;
                if (s->queue.size() >= server.queue_limit) {
                    s->killed = true;
                    s->queue.clear();
                    ::shutdown(s->sock.fd(), SHUT_RDWR);
                    s->cv.notify_all();
                    ++slow;
                    continue;
                }
                s->queue.push_back(frame);
                s->cv.notify_all();
            }
            for (auto& s : sessions) {
                if (s->done) {
                    std::lock_guard sl(s->m);
                    if (s->failed && !s->killed)
                        ++failed;
                }
            }
            reap_locked();
        }
        std::lock_guard lk(stats_m);
        ++stats.packets_broadcast;
        stats.sessions_dropped_slow += slow;
        stats.sessions_failed += failed;
    }

    std::size_t live_sessions() const
    {
        std::lock_guard lk(sessions_m);
        return std::size_t(std::count_if(sessions.begin(), sessions.end(), [](const auto& s) {
            std::lock_guard sl(s->m);
            return !s->killed && !s->failed && !s->done;
        }));
    }
};

StreamServer::StreamServer(const ServerConfig& server, const ChainConfig& chain)
    : m_impl(std::make_unique<Impl>())
{
    chain.validate();
    if (server.queue_limit == 0 || server.block_samples == 0)
        fail(ErrorCode::InvalidArgument, "queue limit and block size must be positive");
    m_impl->server = server;
    m_impl->active = m_impl->target = chain;
    m_impl->stream_listener = open_listener(server.bind_host, server.stream_port);
    m_impl->control_listener = open_listener(server.bind_host, server.control_port);
    m_impl->stream_port = local_port(m_impl->stream_listener);
    m_impl->control_port = local_port(m_impl->control_listener);
    m_impl->stream_acceptor = std::thread([this] { m_impl->accept_streams(); });
    m_impl->control_acceptor = std::thread([this] { m_impl->accept_control(*this); });
}

StreamServer::~StreamServer()
{
    shutdown();
}

std::uint16_t StreamServer::stream_port() const noexcept
{
    return m_impl->stream_port;
}

std::uint16_t StreamServer::control_port() const noexcept
{
    return m_impl->control_port;
}

bool StreamServer::wait_for_listeners(std::size_t count, std::chrono::milliseconds timeout)
{
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    std::unique_lock lk(m_impl->sessions_m);
    return m_impl->sessions_cv.wait_until(lk, deadline, [&] {
        return m_impl->stopping || m_impl->sessions.size() >= count;
    }) && !m_impl->stopping;
}

void StreamServer::broadcast(std::span<const std::uint8_t> encoded)
{
    if (encoded.empty() || encoded.size() > kMaxEncodedBytes)
        fail(ErrorCode::InvalidArgument, "frame of " + std::to_string(encoded.size()) +
                                             " bytes cannot be broadcast");
    auto frame = std::make_shared<std::vector<std::uint8_t>>();
    frame->reserve(encoded.size() + 2);
    frame->push_back(std::uint8_t(encoded.size() >> 8));
    frame->push_back(std::uint8_t(encoded.size()));
    frame->insert(frame->end(), encoded.begin(), encoded.end());
    m_impl->publish(frame);
}

void StreamServer::stream(const AudioBuffer& source, double speed,
                          const volatile std::sig_atomic_t* cancel)
{
    Impl& im = *m_impl;
    ChainConfig cfg;
    {
        std::lock_guard lk(im.cfg_m);
        if (im.streaming)
            fail(ErrorCode::InvalidArgument, "a stream is already running");
        im.streaming = true;
        cfg = im.active;
    }
    struct Finish
    {
        Impl& im;
        ~Finish()
        {
            std::lock_guard lk(im.cfg_m);
            im.active = im.target;
            im.pending = false;
            im.streaming = false;
        }
    } finish{im};

    if (source.sample_rate() != cfg.sample_rate)
        fail(ErrorCode::InvalidArgument,
             "source is sampled at " + std::to_string(source.sample_rate()) +
                 " Hz but the chain runs at " + std::to_string(cfg.sample_rate) + " Hz");

    TransmitChain chain(cfg);
    std::uint16_t seq;
    {
        std::lock_guard lk(im.cfg_m);
        seq = im.next_seq;
        chain.set_next_timestamp(im.next_ts);
    }
    const std::uint64_t ts0 = chain.next_timestamp();
    const double rate = cfg.sample_rate;
    const auto start = std::chrono::steady_clock::now();
    const auto& samples = source.samples();

    for (std::size_t off = 0; off < samples.size(); off += im.server.block_samples) {
        if (im.stopping || cancelled(cancel))
            break;

        // block boundary: take the latest fully applied configuration
        {
            std::lock_guard lk(im.cfg_m);
            if (im.pending) {
                im.active = im.target;
                im.pending = false;
            }
            cfg = im.active;
        }
        if (!(cfg == chain.config()))
            chain.reconfigure(cfg);

        const std::size_t n = std::min(im.server.block_samples, samples.size() - off);
        AudioBuffer block(source.sample_rate(),
                          std::vector<double>(samples.begin() + std::ptrdiff_t(off),
                                              samples.begin() + std::ptrdiff_t(off + n)));
        const SampleBlock codes = chain.process(block);
        const std::vector<Packet> packets = packetize(codes, seq, cutoff_flags(cfg));
        seq = std::uint16_t(seq + packets.size());

        std::uint64_t captured = codes.start_timestamp;
        for (const Packet& p : packets) {
            captured += p.codes.size();
            if (speed > 0.0) {
                // a packet leaves once its last sample has been captured
                const double due = double(captured - ts0) / rate / speed;
                std::this_thread::sleep_until(
                    start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                std::chrono::duration<double>(due)));
            }
            broadcast(encode_packet(p));
        }
        std::lock_guard lk(im.cfg_m);
        im.next_seq = seq;
        im.next_ts = chain.next_timestamp();
    }
}

std::string StreamServer::handle_control_line(std::string_view line)
{
    Impl& im = *m_impl;
    try {
        const ControlCommand cmd = parse_control(line);
        if (cmd.kind == ControlKind::GetStatus) {
            const ChainConfig cfg = config();
            const ServerStats st = stats();
            bool streaming;
            {
                std::lock_guard lk(im.cfg_m);
                streaming = im.streaming;
            }
            std::ostringstream os;
            os << "STATUS cutoff=" << cfg.cutoff_hz << " volume=" << cfg.volume
               << " listeners=" << st.sessions_live << " packets=" << st.packets_broadcast
               << " streaming=" << (streaming ? 1 : 0);
            return os.str();
        }
        {
            std::lock_guard lk(im.cfg_m);
            im.target = apply_control(cmd, im.target);
            if (im.streaming)
                im.pending = true;
            else
                im.active = im.target;
        }
        std::lock_guard lk(im.stats_m);
        ++im.stats.commands_applied;
        return "OK";
    } catch (const Error& e) {
        return std::string("ERR ") + e.what();
    }
}

void StreamServer::shutdown()
{
    Impl& im = *m_impl;
    if (im.shut)
        return;
    im.shut = true;
    im.stopping = true;
    im.sessions_cv.notify_all();
    if (im.stream_acceptor.joinable())
        im.stream_acceptor.join();
    if (im.control_acceptor.joinable())
        im.control_acceptor.join();
    im.stream_listener.close();
    im.control_listener.close();

    {
        std::lock_guard lk(im.sessions_m);
        for (auto& s : im.sessions) {
            std::lock_guard sl(s->m);
            s->draining = true;
            s->cv.notify_all();
        }
    }
    // give live listeners a moment to take what is queued, then cut off
    // whoever is still stuck
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(2);
    for (;;) {
        std::lock_guard lk(im.sessions_m);
        const bool all_done = std::all_of(im.sessions.begin(), im.sessions.end(),
                                          [](const auto& s) { return s->done.load(); });
        if (all_done || std::chrono::steady_clock::now() >= deadline) {
            for (auto& s : im.sessions) {
                if (!s->done) {
                    std::lock_guard sl(s->m);
                    s->killed = true;
                    ::shutdown(s->sock.fd(), SHUT_RDWR);
                    s->cv.notify_all();
                }
            }
            for (auto& s : im.sessions)
                s->sender.join();
            im.sessions.clear();
            break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }

    std::lock_guard lk(im.control_m);
    for (auto& [sock, th] : im.control_conns) {
        ::shutdown(sock.fd(), SHUT_RDWR);
        if (th.joinable())
            th.join();
    }
    im.control_conns.clear();
}

ChainConfig StreamServer::config() const
{
    std::lock_guard lk(m_impl->cfg_m);
    return m_impl->target;
}

ServerStats StreamServer::stats() const
{
    ServerStats st;
    {
        std::lock_guard lk(m_impl->stats_m);
        st = m_impl->stats;
    }
    st.sessions_live = m_impl->live_sessions();
    return st;
}

const char* to_string(StreamEnd e) noexcept
{
    switch (e) {
    case StreamEnd::EndOfStream: return "end of stream";
    case StreamEnd::ConnectionReset: return "connection reset";
    case StreamEnd::ProtocolError: return "protocol error";
    case StreamEnd::Cancelled: return "cancelled";
    }
    return "unknown";
}

ListenSummary listen_client(const ListenConfig& cfg, PacketConsumer& sink,
                            const volatile std::sig_atomic_t* cancel)
{
    Socket sock = connect_to(cfg.host, cfg.port, cfg.receive_buffer_bytes);
    const auto t0 = std::chrono::steady_clock::now();
    ListenSummary summary;

    auto end = [&](StreamEnd reason, std::string detail) {
        summary.end = reason;
        summary.detail = std::move(detail);
        sink.on_end(reason);
        return summary;
    };

    std::vector<std::uint8_t> body;
    for (;;) {
        std::uint8_t hdr[2];
        switch (read_exact(sock.fd(), hdr, cancel)) {
        case ReadStatus::Ok: break;
        case ReadStatus::Closed: return end(StreamEnd::EndOfStream, "server closed the stream");
        case ReadStatus::Cancelled: return end(StreamEnd::Cancelled, "stopped by request");
        case ReadStatus::ClosedMidway:
        case ReadStatus::TimedOut:
        case ReadStatus::Error: return end(StreamEnd::ConnectionReset, "connection lost");
        }
        const std::size_t len = (std::size_t(hdr[0]) << 8) | hdr[1];
        if (len == 0 || len > kMaxEncodedBytes)
            return end(StreamEnd::ProtocolError,
                       "frame length " + std::to_string(len) + " exceeds " +
                           std::to_string(kMaxEncodedBytes) + " bytes");
        body.resize(len);
        switch (read_exact(sock.fd(), body, cancel)) {
        case ReadStatus::Ok: break;
        case ReadStatus::Cancelled: return end(StreamEnd::Cancelled, "stopped by request");
        default: return end(StreamEnd::ConnectionReset, "connection lost inside a frame");
        }
        const double arrival =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        Packet p;
        try {
            p = decode_packet(body);
        } catch (const Error& e) {
            return end(StreamEnd::ProtocolError, e.what());
        }
        ++summary.packets;
        summary.bytes += len + 2;
        sink.on_packet(p, body, arrival);
    }
}

RecordingSink::RecordingSink(const JitterConfig& jitter, double full_scale)
    : m_jitter(jitter)
    , m_full_scale(full_scale)
    , m_rate(jitter.sample_rate)
{
    if (!(full_scale > 0.0))
        fail(ErrorCode::InvalidArgument, "full scale must be positive");
}

void RecordingSink::on_packet(const Packet& packet, std::span<const std::uint8_t>,
                              double arrival)
{
    DeliveredPacket dp;
    dp.packet = packet;
    dp.send_time = dp.transmit_end = dp.arrival_time = arrival;
    m_jitter.push(dp);
    m_last_flags = packet.flags;
    SampleBlock played = m_jitter.take();
    m_codes.insert(m_codes.end(), played.codes.begin(), played.codes.end());
}

void RecordingSink::on_end(StreamEnd)
{
    m_jitter.flush();
    SampleBlock played = m_jitter.take();
    m_codes.insert(m_codes.end(), played.codes.begin(), played.codes.end());
}

AudioBuffer RecordingSink::recording() const
{
    SampleBlock block;
    block.codes = m_codes;
    block.sample_rate = m_rate;
    return dequantize_dac(block, m_full_scale);
}

std::string send_control(const std::string& host, std::uint16_t port, std::string_view line,
                         std::chrono::milliseconds timeout)
{
    Socket sock = connect_to(host, port, 0);
    std::string msg(line);
    while (!msg.empty() && (msg.back() == '\n' || msg.back() == '\r'))
        msg.pop_back();
    msg += '\n';
    if (!send_all(sock.fd(), {reinterpret_cast<const std::uint8_t*>(msg.data()), msg.size()}))
        fail(ErrorCode::Network, errno_text("send"));

    const auto deadline = std::chrono::steady_clock::now() + timeout;
    std::string reply;
    for (;;) {
        std::uint8_t c;
        switch (read_exact(sock.fd(), {&c, 1}, nullptr, deadline)) {
        case ReadStatus::Ok: break;
        case ReadStatus::TimedOut: fail(ErrorCode::Network, "no reply from control port");
        default: fail(ErrorCode::Network, "control connection closed before a reply");
        }
        if (c == '\n')
            break;
        reply.push_back(char(c));
        if (reply.size() > 4096)
            fail(ErrorCode::Protocol, "control reply too long");
    }
    if (!reply.empty() && reply.back() == '\r')
        reply.pop_back();
    return reply;
}

} // namespace steth
