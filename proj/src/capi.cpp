#include "steth/steth.h"

#include <cstring>
#include <exception>
#include <memory>
#include <new>
#include <string>

#include "steth/analysis.hpp"
#include "steth/error.hpp"
#include "steth/pipeline.hpp"
#include "steth/service.hpp"
#include "steth/synth.hpp"
#include "steth/wav.hpp"

using steth::ErrorCode;

struct steth_audio
{
    steth::AudioBuffer rep;
};

struct steth_events
{
    std::vector<steth::HeartEvent> rep;
};

struct steth_server
{
    std::unique_ptr<steth::StreamServer> rep;
};

namespace {

thread_local std::string g_last_error;

steth_status status_of(ErrorCode code)
{
    switch (code) {
    case ErrorCode::InvalidArgument: return STETH_ERR_INVALID_ARGUMENT;
    case ErrorCode::FilterDesign: return STETH_ERR_FILTER_DESIGN;
    case ErrorCode::Io: return STETH_ERR_IO;
    case ErrorCode::NotFound: return STETH_ERR_NOT_FOUND;
    case ErrorCode::UnsupportedFormat: return STETH_ERR_UNSUPPORTED_FORMAT;
    case ErrorCode::UnsupportedChannels: return STETH_ERR_UNSUPPORTED_CHANNELS;
    case ErrorCode::UnsupportedBitDepth: return STETH_ERR_UNSUPPORTED_BIT_DEPTH;
    case ErrorCode::MalformedFile: return STETH_ERR_MALFORMED_FILE;
    case ErrorCode::BadVersion:
    case ErrorCode::Truncated:
    case ErrorCode::LengthMismatch:
    case ErrorCode::BadCount:
    case ErrorCode::BadFlags: return STETH_ERR_DECODE;
    case ErrorCode::Encoding: return STETH_ERR_ENCODE;
    case ErrorCode::InsufficientData: return STETH_ERR_INSUFFICIENT_DATA;
    case ErrorCode::Network: return STETH_ERR_NETWORK;
    case ErrorCode::Protocol: return STETH_ERR_PROTOCOL;
    case ErrorCode::Rejected: return STETH_ERR_REJECTED;
    }
    return STETH_ERR_INTERNAL;
}

steth_status set_error(steth_status status, const std::string& msg)
{
    g_last_error = msg;
    return status;
}

template <typename F>
steth_status guarded(F&& body)
{
    try {
        g_last_error.clear();
        return body();
    } catch (const steth::Error& e) {
        return set_error(status_of(e.code()), e.what());
    } catch (const std::bad_alloc&) {
        return set_error(STETH_ERR_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return set_error(STETH_ERR_INTERNAL, e.what());
    } catch (...) {
        return set_error(STETH_ERR_INTERNAL, "unknown failure");
    }
}

#define STETH_REQUIRE(cond)                                                              \
    do {                                                                                 \
        if (!(cond))                                                                     \
            return set_error(STETH_ERR_INVALID_ARGUMENT, "null argument: " #cond);       \
    } while (0)

steth::ChainConfig to_cpp(const steth_chain_config& c)
{
    steth::ChainConfig cfg;
    cfg.preamp_gain = c.preamp_gain;
    cfg.cutoff_hz = c.cutoff_hz;
    cfg.filter_gain = c.filter_gain;
    cfg.volume = c.volume;
    cfg.power_gain = c.power_gain;
    cfg.full_scale = c.full_scale;
    cfg.sample_rate = c.sample_rate;
    cfg.dc_block_hz = c.dc_block_hz;
    return cfg;
}

steth::Concealment to_cpp(steth_concealment c)
{
    switch (c) {
    case STETH_CONCEAL_ZERO: return steth::Concealment::ZeroFill;
    case STETH_CONCEAL_REPEAT: return steth::Concealment::RepeatLast;
    }
    steth::fail(ErrorCode::InvalidArgument, "unknown concealment policy");
}

steth_audio* wrap(steth::AudioBuffer buf)
{
    return new steth_audio{std::move(buf)};
}

} // namespace

extern "C" {

const char* steth_status_string(steth_status status)
{
    switch (status) {
    case STETH_OK: return "ok";
    case STETH_ERR_INVALID_ARGUMENT: return "invalid argument";
    case STETH_ERR_FILTER_DESIGN: return "filter design error";
    case STETH_ERR_IO: return "I/O error";
    case STETH_ERR_NOT_FOUND: return "not found";
    case STETH_ERR_UNSUPPORTED_FORMAT: return "unsupported format";
    case STETH_ERR_UNSUPPORTED_CHANNELS: return "unsupported channel count";
    case STETH_ERR_UNSUPPORTED_BIT_DEPTH: return "unsupported bit depth";
    case STETH_ERR_MALFORMED_FILE: return "malformed file";
    case STETH_ERR_DECODE: return "decode error";
    case STETH_ERR_ENCODE: return "encode error";
    case STETH_ERR_INSUFFICIENT_DATA: return "insufficient data";
    case STETH_ERR_NETWORK: return "network error";
    case STETH_ERR_PROTOCOL: return "protocol error";
    case STETH_ERR_REJECTED: return "rejected";
    case STETH_ERR_INTERNAL: return "internal error";
    }
    return "unknown status";
}

const char* steth_last_error(void)
{
    return g_last_error.c_str();
}

steth_status steth_audio_create(uint32_t sample_rate, const double* samples, size_t count,
                                steth_audio** out)
{
    STETH_REQUIRE(out);
    STETH_REQUIRE(samples || count == 0);
    return guarded([&] {
        std::vector<double> v(samples, samples + count);
        *out = wrap(steth::AudioBuffer(sample_rate, std::move(v)));
        return STETH_OK;
    });
}

void steth_audio_destroy(steth_audio* audio)
{
    delete audio;
}

uint32_t steth_audio_sample_rate(const steth_audio* audio)
{
    return audio ? audio->rep.sample_rate() : 0;
}

size_t steth_audio_length(const steth_audio* audio)
{
    return audio ? audio->rep.size() : 0;
}

const double* steth_audio_samples(const steth_audio* audio)
{
    return audio ? audio->rep.samples().data() : nullptr;
}

steth_status steth_wav_read(const char* path, double full_scale, steth_audio** out)
{
    STETH_REQUIRE(path);
    STETH_REQUIRE(out);
    return guarded([&] {
        *out = wrap(steth::read_wav(path, full_scale));
        return STETH_OK;
    });
}

steth_status steth_wav_write(const char* path, const steth_audio* audio, double full_scale)
{
    STETH_REQUIRE(path);
    STETH_REQUIRE(audio);
    return guarded([&] {
        steth::write_wav(path, audio->rep, full_scale);
        return STETH_OK;
    });
}

void steth_synth_options_default(steth_synth_options* opts)
{
    if (!opts)
        return;
    const steth::SynthParams d;
    opts->kind = STETH_SYNTH_HEART;
    opts->bpm = d.bpm;
    opts->seed = d.seed;
    opts->duration_s = d.duration;
    opts->sample_rate = d.sample_rate;
    opts->amplitude = d.amplitude;
}

steth_status steth_synthesize(const steth_synth_options* opts, steth_audio** out)
{
    STETH_REQUIRE(opts);
    STETH_REQUIRE(out);
    return guarded([&] {
        steth::SynthParams p;
        switch (opts->kind) {
        case STETH_SYNTH_HEART: p.kind = steth::SynthKind::Heart; break;
        case STETH_SYNTH_MURMUR: p.kind = steth::SynthKind::Murmur; break;
        case STETH_SYNTH_LUNG: p.kind = steth::SynthKind::Lung; break;
        default: steth::fail(ErrorCode::InvalidArgument, "unknown synthesis kind");
        }
        p.bpm = opts->bpm;
        p.seed = opts->seed;
        p.duration = opts->duration_s;
        p.sample_rate = opts->sample_rate;
        p.amplitude = opts->amplitude;
        *out = wrap(steth::synthesize(p).audio);
        return STETH_OK;
    });
}

void steth_chain_config_default(steth_chain_config* cfg)
{
    if (!cfg)
        return;
    const steth::ChainConfig d;
    cfg->preamp_gain = d.preamp_gain;
    cfg->cutoff_hz = d.cutoff_hz;
    cfg->filter_gain = d.filter_gain;
    cfg->volume = d.volume;
    cfg->power_gain = d.power_gain;
    cfg->full_scale = d.full_scale;
    cfg->sample_rate = d.sample_rate;
    cfg->dc_block_hz = d.dc_block_hz;
}

steth_status steth_process(const steth_audio* input, const steth_chain_config* cfg,
                           steth_audio** output, steth_process_report* report)
{
    STETH_REQUIRE(input);
    STETH_REQUIRE(cfg);
    STETH_REQUIRE(output);
    return guarded([&] {
        steth::ProcessResult r = steth::process_audio(input->rep, to_cpp(*cfg));
        if (report) {
            report->preamp_gain = r.report.preamp_gain;
            report->filter_dc_gain = r.report.filter_dc_gain;
            report->filter_gain_at_cutoff = r.report.filter_gain_at_cutoff;
            report->power_gain_effective = r.report.power_gain_effective;
            report->nominal_gain = r.report.nominal_gain;
            report->input_rms = r.report.input_rms;
            report->output_rms = r.report.output_rms;
            report->clipped_samples = r.report.clipped_samples;
        }
        *output = wrap(std::move(r.output));
        return STETH_OK;
    });
}

void steth_link_config_default(steth_link_config* cfg)
{
    if (!cfg)
        return;
    const steth::LinkParams d;
    const steth::SimulateConfig s;
    cfg->bitrate = d.bitrate;
    cfg->loss_prob = d.loss_prob;
    cfg->jitter_max_s = d.jitter_max;
    cfg->overhead_bytes = d.overhead_bytes;
    cfg->seed = d.seed;
    cfg->depth_s = s.depth;
    cfg->concealment = STETH_CONCEAL_ZERO;
}

steth_status steth_simulate(const steth_audio* input, const steth_chain_config* chain,
                            const steth_link_config* link, steth_audio** output,
                            steth_link_stats* stats)
{
    STETH_REQUIRE(input);
    STETH_REQUIRE(chain);
    STETH_REQUIRE(link);
    STETH_REQUIRE(output);
    return guarded([&] {
        steth::SimulateConfig cfg;
        cfg.chain = to_cpp(*chain);
        cfg.link.bitrate = link->bitrate;
        cfg.link.loss_prob = link->loss_prob;
        cfg.link.jitter_max = link->jitter_max_s;
        cfg.link.overhead_bytes = link->overhead_bytes;
        cfg.link.seed = link->seed;
        cfg.depth = link->depth_s;
        cfg.concealment = to_cpp(link->concealment);
        steth::SimulateResult r = steth::simulate_link(input->rep, cfg);
        if (stats) {
            stats->sent = r.stats.sent;
            stats->delivered = r.stats.delivered;
            stats->dropped = r.stats.dropped;
            stats->late = r.stats.late;
            stats->concealed_samples = r.stats.concealed_samples;
            stats->utilization = r.stats.utilization;
            stats->latency_p50_s = r.stats.latency_p50;
            stats->latency_p95_s = r.stats.latency_p95;
            stats->latency_p99_s = r.stats.latency_p99;
            stats->latency_max_s = r.stats.latency_max;
        }
        *output = wrap(std::move(r.output));
        return STETH_OK;
    });
}

steth_status steth_detect_heart_sounds(const steth_audio* audio, steth_events** out)
{
    STETH_REQUIRE(audio);
    STETH_REQUIRE(out);
    return guarded([&] {
        *out = new steth_events{steth::detect_heart_sounds(audio->rep)};
        return STETH_OK;
    });
}

void steth_events_destroy(steth_events* events)
{
    delete events;
}

size_t steth_events_count(const steth_events* events)
{
    return events ? events->rep.size() : 0;
}

steth_status steth_events_get(const steth_events* events, size_t index, steth_heart_event* out)
{
    STETH_REQUIRE(events);
    STETH_REQUIRE(out);
    if (index >= events->rep.size())
        return set_error(STETH_ERR_INVALID_ARGUMENT, "event index out of range");
    const steth::HeartEvent& e = events->rep[index];
    out->time_s = e.time;
    out->label = e.label == steth::HeartSound::S1 ? STETH_S1 : STETH_S2;
    out->energy_s1_band = e.energy_s1_band;
    out->energy_s2_band = e.energy_s2_band;
    return STETH_OK;
}

steth_status steth_estimate_heart_rate(const steth_events* events, double* bpm)
{
    STETH_REQUIRE(events);
    STETH_REQUIRE(bpm);
    return guarded([&] {
        *bpm = steth::estimate_heart_rate(events->rep);
        return STETH_OK;
    });
}

void steth_server_options_default(steth_server_options* opts)
{
    if (!opts)
        return;
    const steth::ServerConfig d;
    opts->bind_host = "127.0.0.1";
    opts->stream_port = d.stream_port;
    opts->control_port = d.control_port;
    opts->queue_limit = d.queue_limit;
    opts->send_buffer_bytes = d.send_buffer_bytes;
}

steth_status steth_server_create(const steth_server_options* opts, const steth_chain_config* chain,
                                 steth_server** out)
{
    STETH_REQUIRE(opts);
    STETH_REQUIRE(chain);
    STETH_REQUIRE(out);
    return guarded([&] {
        steth::ServerConfig sc;
        sc.bind_host = opts->bind_host ? opts->bind_host : "127.0.0.1";
        sc.stream_port = opts->stream_port;
        sc.control_port = opts->control_port;
        sc.queue_limit = opts->queue_limit;
        sc.send_buffer_bytes = opts->send_buffer_bytes;
        auto server = std::make_unique<steth::StreamServer>(sc, to_cpp(*chain));
        *out = new steth_server{std::move(server)};
        return STETH_OK;
    });
}

void steth_server_destroy(steth_server* server)
{
    delete server;
}

uint16_t steth_server_stream_port(const steth_server* server)
{
    return server ? server->rep->stream_port() : 0;
}

uint16_t steth_server_control_port(const steth_server* server)
{
    return server ? server->rep->control_port() : 0;
}

int steth_server_wait_listeners(steth_server* server, size_t count, int timeout_ms)
{
    if (!server)
        return 0;
    return server->rep->wait_for_listeners(count, std::chrono::milliseconds(timeout_ms)) ? 1 : 0;
}

steth_status steth_server_stream(steth_server* server, const steth_audio* source, double speed,
                                 const volatile sig_atomic_t* cancel)
{
    STETH_REQUIRE(server);
    STETH_REQUIRE(source);
    return guarded([&] {
        server->rep->stream(source->rep, speed, cancel);
        return STETH_OK;
    });
}

void steth_server_shutdown(steth_server* server)
{
    if (server)
        server->rep->shutdown();
}

void steth_server_get_stats(const steth_server* server, steth_server_stats* out)
{
    if (!server || !out)
        return;
    const steth::ServerStats st = server->rep->stats();
    out->packets_broadcast = st.packets_broadcast;
    out->sessions_accepted = st.sessions_accepted;
    out->sessions_live = st.sessions_live;
    out->sessions_dropped_slow = st.sessions_dropped_slow;
    out->sessions_failed = st.sessions_failed;
    out->commands_applied = st.commands_applied;
}

void steth_listen_options_default(steth_listen_options* opts)
{
    if (!opts)
        return;
    const steth::JitterConfig j;
    opts->host = "127.0.0.1";
    opts->port = 0;
    opts->sample_rate = j.sample_rate;
    opts->full_scale = steth::ChainConfig{}.full_scale;
    opts->depth_s = j.depth;
    opts->concealment = STETH_CONCEAL_ZERO;
    opts->receive_buffer_bytes = 0;
}

steth_status steth_listen(const steth_listen_options* opts, const volatile sig_atomic_t* cancel,
                          steth_audio** recording, steth_listen_result* result)
{
    STETH_REQUIRE(opts);
    return guarded([&] {
        steth::ListenConfig lc;
        lc.host = opts->host ? opts->host : "127.0.0.1";
        lc.port = opts->port;
        lc.receive_buffer_bytes = opts->receive_buffer_bytes;

        steth::JitterConfig jc;
        jc.depth = opts->depth_s;
        jc.concealment = to_cpp(opts->concealment);
        jc.sample_rate = opts->sample_rate;
        steth::RecordingSink sink(jc, opts->full_scale);

        const steth::ListenSummary s = steth::listen_client(lc, sink, cancel);
        if (result) {
            switch (s.end) {
            case steth::StreamEnd::EndOfStream: result->end = STETH_END_OF_STREAM; break;
            case steth::StreamEnd::ConnectionReset: result->end = STETH_END_CONNECTION_RESET; break;
            case steth::StreamEnd::ProtocolError: result->end = STETH_END_PROTOCOL_ERROR; break;
            case steth::StreamEnd::Cancelled: result->end = STETH_END_CANCELLED; break;
            }
            result->packets = s.packets;
            result->bytes = s.bytes;
            result->late = sink.jitter_stats().late;
            result->concealed_samples = sink.jitter_stats().concealed_samples;
            result->last_flags = sink.last_flags();
        }
        if (recording)
            *recording = wrap(sink.recording());
        if (s.end == steth::StreamEnd::ProtocolError)
            return set_error(STETH_ERR_PROTOCOL, s.detail);
        if (s.end == steth::StreamEnd::ConnectionReset)
            return set_error(STETH_ERR_NETWORK, s.detail);
        return STETH_OK;
    });
}

steth_status steth_control(const char* host, uint16_t port, const char* line, char* reply,
                           size_t reply_capacity)
{
    STETH_REQUIRE(line);
    return guarded([&] {
        const std::string r = steth::send_control(host ? host : "127.0.0.1", port, line);
        if (reply && reply_capacity > 0) {
            const std::size_t n = std::min(r.size(), reply_capacity - 1);
            std::memcpy(reply, r.data(), n);
            reply[n] = '\0';
        }
        if (r.rfind("ERR", 0) == 0)
            return set_error(STETH_ERR_REJECTED, r);
        return STETH_OK;
    });
}

} // extern "C"
