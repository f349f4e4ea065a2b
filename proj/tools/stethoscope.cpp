// stethoscope: command-line front end for the wireless stethoscope twin.
// Links only the C API in libsteth.

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "steth/steth.h"

namespace {

volatile std::sig_atomic_t g_stop = 0;

void on_signal(int)
{
    g_stop = 1;
}

struct AudioDeleter
{
    void operator()(steth_audio* a) const { steth_audio_destroy(a); }
};
using Audio = std::unique_ptr<steth_audio, AudioDeleter>;

struct EventsDeleter
{
    void operator()(steth_events* e) const { steth_events_destroy(e); }
};

struct ServerDeleter
{
    void operator()(steth_server* s) const { steth_server_destroy(s); }
};

int report(steth_status st, const std::string& context)
{
    if (st != STETH_OK) {
        std::fprintf(stderr, "error: %s: %s (%s)\n", context.c_str(), steth_last_error(),
                     steth_status_string(st));
    }
    return int(st);
}

struct Endpoint
{
    std::string host = "127.0.0.1";
    std::uint16_t port = 0;
};

bool parse_endpoint(const std::string& text, Endpoint& ep)
{
    const auto colon = text.rfind(':');
    std::string port_text = text;
    if (colon != std::string::npos) {
        ep.host = text.substr(0, colon);
        port_text = text.substr(colon + 1);
    }
    if (!ep.host.empty() && ep.host.front() == '[' && ep.host.back() == ']')
        ep.host = ep.host.substr(1, ep.host.size() - 2);
    char* end = nullptr;
    const long port = std::strtol(port_text.c_str(), &end, 10);
    if (port_text.empty() || *end != '\0' || port < 0 || port > 65535)
        return false;
    ep.port = std::uint16_t(port);
    return true;
}

struct ChainFlags
{
    int cutoff = 100;
    double volume = 0.5;
    std::uint32_t rate = 0; // 0: take the input file's rate
    double dc_block = 2.0;
    double full_scale = 2.5;

    void add_to(CLI::App* cmd)
    {
        cmd->add_option("--cutoff", cutoff, "Low-pass cutoff in Hz")
            ->check(CLI::IsMember({100, 1000}))
            ->capture_default_str();
        cmd->add_option("--volume", volume, "Power amplifier volume pot position")
            ->check(CLI::Range(0.0, 1.0))
            ->capture_default_str();
        cmd->add_option("--rate", rate,
                        "Chain sample rate in Hz; must match the input (default: input rate)");
        cmd->add_option("--dc-block", dc_block, "AC-coupling high-pass corner in Hz")
            ->capture_default_str();
        cmd->add_option("--full-scale", full_scale, "Converter and output WAV full scale, volts")
            ->capture_default_str();
    }

    steth_chain_config config(std::uint32_t input_rate) const
    {
        steth_chain_config cfg;
        steth_chain_config_default(&cfg);
        cfg.cutoff_hz = cutoff;
        cfg.volume = volume;
        cfg.sample_rate = rate != 0 ? rate : input_rate;
        cfg.dc_block_hz = dc_block;
        cfg.full_scale = full_scale;
        return cfg;
    }
};

void print_chain(const steth_chain_config& cfg)
{
    std::printf("chain: rate=%u Hz cutoff=%d Hz volume=%.3f full_scale=%.3f V dc_block=%.2f Hz\n",
                cfg.sample_rate, cfg.cutoff_hz, cfg.volume, cfg.full_scale, cfg.dc_block_hz);
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Wireless electronic stethoscope: front-end emulation, radio link "
                 "simulation, heart sound analysis and LAN streaming"};
    app.require_subcommand(1);
    app.footer("Exit status is 0 on success; otherwise the library status code "
               "(2 invalid argument, 4 I/O, 5 not found, 6-9 WAV format, 12 insufficient "
               "data, 13 network, 14 protocol, 15 rejected).");

    double input_scale = 0.01;

    // synth ---------------------------------------------------------------
    auto* synth = app.add_subcommand("synth", "Write a deterministic synthetic test signal");
    std::string synth_kind = "heart";
    std::string synth_out;
    steth_synth_options synth_opts;
    steth_synth_options_default(&synth_opts);
    synth->add_option("kind", synth_kind, "heart | murmur | lung")
        ->required()
        ->check(CLI::IsMember({"heart", "murmur", "lung"}));
    synth->add_option("out", synth_out, "Output WAV")->required();
    synth->add_option("--bpm", synth_opts.bpm, "Heart rate")->capture_default_str();
    synth->add_option("--seed", synth_opts.seed, "Noise seed")->capture_default_str();
    synth->add_option("--duration", synth_opts.duration_s, "Seconds")->capture_default_str();
    synth->add_option("--rate", synth_opts.sample_rate, "Sample rate in Hz")->capture_default_str();
    synth->add_option("--amplitude", synth_opts.amplitude,
                      "S1 peak (heart, murmur) or RMS (lung) at the microphone, volts; "
                      "0 = 3 mV heart, 1 mV lung")
        ->capture_default_str();
    synth->add_option("--input-scale", input_scale,
                      "Volts represented by WAV full scale for microphone-level files")
        ->capture_default_str();

    // process -------------------------------------------------------------
    auto* process = app.add_subcommand("process", "Run a WAV through the transmit chain and DAC");
    std::string proc_in, proc_out;
    ChainFlags proc_chain;
    process->add_option("in", proc_in, "Microphone-level input WAV")->required();
    process->add_option("out", proc_out, "Output WAV (DAC volts)")->required();
    proc_chain.add_to(process);
    process->add_option("--input-scale", input_scale,
                        "Volts represented by WAV full scale in the input file")
        ->capture_default_str();

    // simulate ------------------------------------------------------------
    auto* simulate = app.add_subcommand(
        "simulate", "Transmit a WAV over the simulated 250 kbps radio link and reconstruct it");
    std::string sim_in, sim_out, sim_conceal = "zero";
    ChainFlags sim_chain;
    steth_link_config link;
    steth_link_config_default(&link);
    simulate->add_option("in", sim_in, "Microphone-level input WAV")->required();
    simulate->add_option("out", sim_out, "Received output WAV")->required();
    sim_chain.add_to(simulate);
    simulate->add_option("--input-scale", input_scale,
                         "Volts represented by WAV full scale in the input file")
        ->capture_default_str();
    simulate->add_option("--loss", link.loss_prob, "Per-packet loss probability")
        ->check(CLI::Range(0.0, 0.999999))
        ->capture_default_str();
    simulate->add_option("--jitter", link.jitter_max_s, "Maximum extra delay, seconds")
        ->capture_default_str();
    simulate->add_option("--seed", link.seed, "Channel RNG seed")->capture_default_str();
    simulate->add_option("--depth", link.depth_s, "Jitter buffer depth, seconds")
        ->capture_default_str();
    simulate->add_option("--concealment", sim_conceal, "zero | repeat")
        ->check(CLI::IsMember({"zero", "repeat"}))
        ->capture_default_str();
    simulate->add_option("--bitrate", link.bitrate, "Radio bit rate, bits/s")->capture_default_str();
    simulate->add_option("--overhead", link.overhead_bytes, "MAC/PHY bytes per frame")
        ->capture_default_str();

    // analyze -------------------------------------------------------------
    auto* analyze = app.add_subcommand("analyze", "Detect S1/S2 heart sounds and estimate heart rate");
    analyze->footer("Output: one line per event\n"
                    "  <time_s> <S1|S2> <energy_30_45Hz_V2> <energy_50_70Hz_V2>\n"
                    "followed by 'heart rate: <bpm> bpm'. Silence prints 'no events'.");
    std::string ana_in;
    double ana_scale = 2.5;
    analyze->add_option("in", ana_in, "WAV to analyze (at least 2 s)")->required();
    analyze->add_option("--full-scale", ana_scale, "Volts represented by WAV full scale")
        ->capture_default_str();

    // serve ---------------------------------------------------------------
    auto* serve = app.add_subcommand("serve", "Stream a WAV through the chain to LAN listeners");
    serve->footer("Stream port: repeated [u16 big-endian length][packet]. Control port: one text\n"
                  "command per line (SET VOLUME <0..1>, SET CUTOFF <100|1000>, GET STATUS);\n"
                  "replies OK, ERR <reason>, or a STATUS line.");
    std::string srv_in, srv_bind = "127.0.0.1:7600";
    ChainFlags srv_chain;
    std::uint16_t srv_control_port = 7601;
    double srv_speed = 1.0;
    std::size_t srv_wait = 0;
    double srv_wait_timeout = 30.0;
    bool srv_loop = false;
    serve->add_option("--input", srv_in, "Microphone-level source WAV")->required();
    serve->add_option("--bind", srv_bind, "Stream listen address host:port")->capture_default_str();
    serve->add_option("--control-port", srv_control_port, "Control port on the bind host")
        ->capture_default_str();
    srv_chain.add_to(serve);
    serve->add_option("--input-scale", input_scale,
                      "Volts represented by WAV full scale in the input file")
        ->capture_default_str();
    serve->add_option("--speed", srv_speed, "Pacing relative to real time; 0 disables pacing")
        ->capture_default_str();
    serve->add_option("--wait-listeners", srv_wait, "Hold the stream until this many listeners join")
        ->capture_default_str();
    serve->add_option("--wait-timeout", srv_wait_timeout, "Seconds to wait for listeners")
        ->capture_default_str();
    serve->add_flag("--loop", srv_loop, "Repeat the source until interrupted");

    // listen --------------------------------------------------------------
    auto* listen = app.add_subcommand("listen", "Receive a stream and optionally record it");
    std::string lis_connect = "127.0.0.1:7600", lis_record, lis_conceal = "zero";
    steth_listen_options lis_opts;
    steth_listen_options_default(&lis_opts);
    listen->add_option("--connect", lis_connect, "Server stream address host:port")
        ->capture_default_str();
    listen->add_option("--record", lis_record, "Write the received audio to this WAV");
    listen->add_option("--rate", lis_opts.sample_rate, "Stream sample rate in Hz")
        ->capture_default_str();
    listen->add_option("--depth", lis_opts.depth_s, "Jitter buffer depth, seconds")
        ->capture_default_str();
    listen->add_option("--concealment", lis_conceal, "zero | repeat")
        ->check(CLI::IsMember({"zero", "repeat"}))
        ->capture_default_str();
    listen->add_option("--full-scale", lis_opts.full_scale, "DAC full scale, volts")
        ->capture_default_str();

    // control -------------------------------------------------------------
    auto* control = app.add_subcommand("control", "Send one control command to a running server");
    std::string ctl_connect = "127.0.0.1:7601";
    std::vector<std::string> ctl_words;
    control->add_option("--connect", ctl_connect, "Server control address host:port")
        ->capture_default_str();
    control->add_option("command", ctl_words, "e.g. SET VOLUME 0.5 | SET CUTOFF 1000 | GET STATUS")
        ->required();

    CLI11_PARSE(app, argc, argv);

    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);

    if (*synth) {
        synth_opts.kind = synth_kind == "heart"   ? STETH_SYNTH_HEART
                          : synth_kind == "murmur" ? STETH_SYNTH_MURMUR
                                                   : STETH_SYNTH_LUNG;
        steth_audio* raw = nullptr;
        if (auto st = steth_synthesize(&synth_opts, &raw); st != STETH_OK)
            return report(st, "synth");
        Audio audio(raw);
        if (auto st = steth_wav_write(synth_out.c_str(), audio.get(), input_scale); st != STETH_OK)
            return report(st, synth_out);
        std::printf("wrote %s: %s, %zu samples at %u Hz\n", synth_out.c_str(), synth_kind.c_str(),
                    steth_audio_length(audio.get()), steth_audio_sample_rate(audio.get()));
        return 0;
    }

    auto load = [&](const std::string& path, double scale, Audio& out) {
        steth_audio* raw = nullptr;
        const steth_status st = steth_wav_read(path.c_str(), scale, &raw);
        out.reset(raw);
        return st;
    };

    if (*process) {
        Audio in;
        if (auto st = load(proc_in, input_scale, in); st != STETH_OK)
            return report(st, proc_in);
        const steth_chain_config cfg = proc_chain.config(steth_audio_sample_rate(in.get()));
        steth_audio* raw = nullptr;
        steth_process_report rep;
        if (auto st = steth_process(in.get(), &cfg, &raw, &rep); st != STETH_OK)
            return report(st, "process");
        Audio out(raw);
        if (auto st = steth_wav_write(proc_out.c_str(), out.get(), cfg.full_scale); st != STETH_OK)
            return report(st, proc_out);
        print_chain(cfg);
        std::printf("preamp gain        %10.4f\n", rep.preamp_gain);
        std::printf("filter DC gain     %10.4f\n", rep.filter_dc_gain);
        std::printf("filter gain @ fc   %10.4f\n", rep.filter_gain_at_cutoff);
        std::printf("power amp gain     %10.4f\n", rep.power_gain_effective);
        std::printf("nominal total gain %10.4f\n", rep.nominal_gain);
        std::printf("input RMS          %10.6f V\n", rep.input_rms);
        std::printf("output RMS         %10.6f V\n", rep.output_rms);
        std::printf("clipped samples    %10llu\n", (unsigned long long)rep.clipped_samples);
        return 0;
    }

    if (*simulate) {
        Audio in;
        if (auto st = load(sim_in, input_scale, in); st != STETH_OK)
            return report(st, sim_in);
        const steth_chain_config cfg = sim_chain.config(steth_audio_sample_rate(in.get()));
        link.concealment = sim_conceal == "repeat" ? STETH_CONCEAL_REPEAT : STETH_CONCEAL_ZERO;
        steth_audio* raw = nullptr;
        steth_link_stats stats;
        if (auto st = steth_simulate(in.get(), &cfg, &link, &raw, &stats); st != STETH_OK)
            return report(st, "simulate");
        Audio out(raw);
        if (auto st = steth_wav_write(sim_out.c_str(), out.get(), cfg.full_scale); st != STETH_OK)
            return report(st, sim_out);
        print_chain(cfg);
        std::printf("link: bitrate=%.0f bit/s loss=%.4f jitter=%.4f s depth=%.4f s seed=%llu\n",
                    link.bitrate, link.loss_prob, link.jitter_max_s, link.depth_s,
                    (unsigned long long)link.seed);
        std::printf("sent %llu delivered %llu dropped %llu late %llu\n",
                    (unsigned long long)stats.sent, (unsigned long long)stats.delivered,
                    (unsigned long long)stats.dropped, (unsigned long long)stats.late);
        std::printf("concealed samples %llu\n", (unsigned long long)stats.concealed_samples);
        std::printf("utilization %.4f\n", stats.utilization);
        std::printf("latency ms p50 %.3f p95 %.3f p99 %.3f max %.3f\n",
                    stats.latency_p50_s * 1e3, stats.latency_p95_s * 1e3,
                    stats.latency_p99_s * 1e3, stats.latency_max_s * 1e3);
        return 0;
    }

    if (*analyze) {
        Audio in;
        if (auto st = load(ana_in, ana_scale, in); st != STETH_OK)
            return report(st, ana_in);
        steth_events* raw = nullptr;
        if (auto st = steth_detect_heart_sounds(in.get(), &raw); st != STETH_OK)
            return report(st, "analyze");
        std::unique_ptr<steth_events, EventsDeleter> events(raw);
        const std::size_t n = steth_events_count(events.get());
        if (n == 0) {
            std::printf("no events\n");
            return int(STETH_ERR_INSUFFICIENT_DATA);
        }
        std::printf("# time_s label energy_30_45Hz_V2 energy_50_70Hz_V2\n");
        for (std::size_t i = 0; i < n; ++i) {
            steth_heart_event ev;
            steth_events_get(events.get(), i, &ev);
            std::printf("%.3f %s %.6e %.6e\n", ev.time_s, ev.label == STETH_S1 ? "S1" : "S2",
                        ev.energy_s1_band, ev.energy_s2_band);
        }
        double bpm = 0.0;
        if (auto st = steth_estimate_heart_rate(events.get(), &bpm); st != STETH_OK) {
            std::printf("heart rate: insufficient data\n");
            return report(st, "heart rate");
        }
        std::printf("heart rate: %.1f bpm\n", bpm);
        return 0;
    }

    if (*serve) {
        Endpoint bind;
        if (!parse_endpoint(srv_bind, bind)) {
            std::fprintf(stderr, "error: bad --bind address '%s'\n", srv_bind.c_str());
            return int(STETH_ERR_INVALID_ARGUMENT);
        }
        Audio in;
        if (auto st = load(srv_in, input_scale, in); st != STETH_OK)
            return report(st, srv_in);
        const steth_chain_config cfg = srv_chain.config(steth_audio_sample_rate(in.get()));

        steth_server_options opts;
        steth_server_options_default(&opts);
        opts.bind_host = bind.host.c_str();
        opts.stream_port = bind.port;
        opts.control_port = srv_control_port;
        steth_server* raw = nullptr;
        if (auto st = steth_server_create(&opts, &cfg, &raw); st != STETH_OK)
            return report(st, "serve");
        std::unique_ptr<steth_server, ServerDeleter> server(raw);
        std::printf("streaming on %s:%u, control on port %u\n", bind.host.c_str(),
                    steth_server_stream_port(server.get()), steth_server_control_port(server.get()));
        std::fflush(stdout);

        if (srv_wait > 0 &&
            !steth_server_wait_listeners(server.get(), srv_wait, int(srv_wait_timeout * 1000))) {
            std::fprintf(stderr, "error: fewer than %zu listeners joined within %.1f s\n",
                         srv_wait, srv_wait_timeout);
            return int(STETH_ERR_NETWORK);
        }
        do {
            if (auto st = steth_server_stream(server.get(), in.get(), srv_speed, &g_stop);
                st != STETH_OK)
                return report(st, "stream");
        } while (srv_loop && !g_stop);
        steth_server_shutdown(server.get());

        steth_server_stats stats;
        steth_server_get_stats(server.get(), &stats);
        std::printf("packets %llu listeners %llu slow-disconnected %llu commands %llu\n",
                    (unsigned long long)stats.packets_broadcast,
                    (unsigned long long)stats.sessions_accepted,
                    (unsigned long long)stats.sessions_dropped_slow,
                    (unsigned long long)stats.commands_applied);
        return 0;
    }

    if (*listen) {
        Endpoint ep;
        if (!parse_endpoint(lis_connect, ep)) {
            std::fprintf(stderr, "error: bad --connect address '%s'\n", lis_connect.c_str());
            return int(STETH_ERR_INVALID_ARGUMENT);
        }
        lis_opts.host = ep.host.c_str();
        lis_opts.port = ep.port;
        lis_opts.concealment = lis_conceal == "repeat" ? STETH_CONCEAL_REPEAT : STETH_CONCEAL_ZERO;
        steth_audio* raw = nullptr;
        steth_listen_result res{};
        const steth_status st = steth_listen(&lis_opts, &g_stop, &raw, &res);
        Audio rec(raw);
        if (rec && !lis_record.empty()) {
            if (auto wst = steth_wav_write(lis_record.c_str(), rec.get(), lis_opts.full_scale);
                wst != STETH_OK)
                return report(wst, lis_record);
        }
        std::printf("packets %llu bytes %llu late %llu concealed %llu samples %zu\n",
                    (unsigned long long)res.packets, (unsigned long long)res.bytes,
                    (unsigned long long)res.late, (unsigned long long)res.concealed_samples,
                    rec ? steth_audio_length(rec.get()) : std::size_t{0});
        return report(st, "listen");
    }

    if (*control) {
        Endpoint ep;
        if (!parse_endpoint(ctl_connect, ep)) {
            std::fprintf(stderr, "error: bad --connect address '%s'\n", ctl_connect.c_str());
            return int(STETH_ERR_INVALID_ARGUMENT);
        }
        std::string line;
        for (const std::string& w : ctl_words)
            line += (line.empty() ? "" : " ") + w;
        char reply[512] = {0};
        const steth_status st = steth_control(ep.host.c_str(), ep.port, line.c_str(), reply,
                                              sizeof reply);
        if (st == STETH_OK || st == STETH_ERR_REJECTED)
            std::printf("%s\n", reply);
        else
            report(st, "control");
        return int(st);
    }
    return 0;
}
