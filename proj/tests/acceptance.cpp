// Acceptance run: one PASS/FAIL line per criterion, each under its time limit.
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <thread>

#include "oracles.hpp"
#include "steth/analysis.hpp"
#include "steth/error.hpp"
#include "steth/pipeline.hpp"
#include "steth/service.hpp"
#include "steth/synth.hpp"
#include "steth/wav.hpp"

using namespace steth;

namespace {

struct Outcome
{
    bool ok = true;
    std::ostringstream note;

    void expect(bool cond, const std::string& what)
    {
        if (!cond) {
            if (ok)
                note << what;
            else
                note << "; " << what;
            ok = false;
        }
    }
};

double tone_gain(Biquad section, double f, double fs)
{
    const std::size_t settle = 4000, n = 12000;
    const auto x = oracle::sine(f, 1.0, fs, settle + n);
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        y[i] = section.process(x[i]);
    return oracle::tone_amplitude(y, f, fs, settle);
}

void filter_response(Outcome& out)
{
    const double fs = 4000;
    for (int fc : {100, 1000}) {
        const Biquad lp = design_lowpass(fc, 1.6, fs);
        double worst = 0;
        for (double f = 0.1 * fc; f <= 0.9 * fs / 2; f *= 1.05) {
            const double expect = 1.6 * oracle::butter_lp2(f, fc, fs);
            worst = std::max(worst, std::abs(tone_gain(lp, f, fs) / expect - 1.0));
        }
        out.expect(worst <= 0.02, "fc " + std::to_string(fc) + ": sweep error " +
                                      std::to_string(worst * 100) + "%");

        // bisect the measured -3 dB point
        const double target = 1.6 / std::sqrt(2.0);
        double lo = 0.5 * fc, hi = std::min(2.0 * fc, 0.95 * fs / 2);
        for (int i = 0; i < 30; ++i) {
            const double mid = 0.5 * (lo + hi);
            (tone_gain(lp, mid, fs) > target ? lo : hi) = mid;
        }
        const double f3 = 0.5 * (lo + hi);
        out.expect(std::abs(f3 / fc - 1.0) <= 0.05,
                   "fc " + std::to_string(fc) + ": -3 dB at " + std::to_string(f3) + " Hz");
    }
}

void stage_gains(Outcome& out)
{
    const AudioBuffer x(4000, oracle::sine(50.0, 0.005, 4000, 40000));
    const AudioBuffer y = preamplify(x, 20.0);
    out.expect(std::abs(rms(y.samples()) / rms(x.samples()) - 20.0) <= 1e-9, "preamp RMS ratio");

    const AudioBuffer big(4000, oracle::sine(37.0, 1.0, 4000, 8000));
    const AudioBuffer p = power_amplify(big, 1.0, 20.0, 2.5);
    double peak = 0;
    std::size_t railed = 0;
    for (double v : p.samples()) {
        peak = std::max(peak, std::abs(v));
        railed += std::abs(v) == 2.5;
    }
    out.expect(peak == 2.5, "power amp peak " + std::to_string(peak));
    out.expect(railed > 0, "power amp never reached the rails");
}

void quantization(Outcome& out)
{
    const double fsv = 2.5;
    std::size_t bad = 0;
    for (std::uint16_t c = 0; c < 4096; ++c)
        bad += quantize_sample(dequantize_code(c, fsv), fsv) != c;
    out.expect(bad == 0, std::to_string(bad) + " codes fail DAC->ADC identity");

    const double lsb = 2 * fsv / 4096;
    double worst = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double v = -fsv + 2 * fsv * double(i) / (n - 1) * (4095.0 / 4096.0);
        worst = std::max(worst, std::abs(dequantize_code(quantize_sample(v, fsv), fsv) - v));
    }
    out.expect(worst <= lsb, "ADC->DAC error " + std::to_string(worst / lsb) + " LSB");
}

void codec(Outcome& out)
{
    std::mt19937_64 rng(2024);
    std::size_t failures = 0;
    for (int i = 0; i < 10000; ++i) {
        Packet p;
        const std::size_t n = 1 + rng() % kMaxCodesPerPacket;
        p.flags = std::uint8_t((rng() & 1) | (n % 2 ? packet_flags::kOddPadding : 0));
        p.seq = std::uint16_t(rng());
        p.timestamp = std::uint32_t(rng());
        for (std::size_t k = 0; k < n; ++k)
            p.codes.push_back(std::uint16_t(rng() % 4096));
        try {
            failures += !(decode_packet(encode_packet(p)) == p);
        } catch (const Error&) {
            ++failures;
        }
    }
    out.expect(failures == 0, std::to_string(failures) + " round-trip failures");
}

AudioBuffer heart(double bpm, double seconds = 10.0)
{
    SynthParams sp;
    sp.bpm = bpm;
    sp.duration = seconds;
    return synthesize(sp).audio;
}

void lossless(Outcome& out)
{
    const AudioBuffer in = heart(60);
    SimulateConfig cfg;
    cfg.link.loss_prob = 0;
    cfg.link.jitter_max = 0;
    const SimulateResult s = simulate_link(in, cfg);
    const SampleBlock tx = run_transmit_chain(in, cfg.chain);
    out.expect(s.codes.codes == tx.codes, "received codes differ from transmitted codes");
    out.expect(s.stats.delivered == s.stats.sent, "not every packet delivered");

    const SimulateResult d = simulate_link(in, SimulateConfig{});
    out.expect(std::abs(d.stats.utilization - 0.28) <= 0.02,
               "utilization " + std::to_string(d.stats.utilization));
}

void lossy(Outcome& out)
{
    const AudioBuffer in = heart(60);
    SimulateConfig cfg;
    cfg.link.loss_prob = 0.1;
    cfg.link.seed = 42;
    const SimulateResult a = simulate_link(in, cfg);
    const SimulateResult b = simulate_link(in, cfg);
    out.expect(encode_wav(a.output, cfg.chain.full_scale) ==
                   encode_wav(b.output, cfg.chain.full_scale),
               "two runs differ");
    out.expect(a.stats.delivered == b.stats.delivered && a.stats.dropped == b.stats.dropped &&
                   a.stats.late == b.stats.late,
               "two runs report different counts");
    out.expect(a.stats.delivered + a.stats.dropped + a.stats.late == a.stats.sent,
               "delivered + dropped + late != sent");
    out.expect(a.stats.dropped > 0, "no loss at 10%");
}

double retention(const AudioBuffer& in, const AudioBuffer& out, const ChainConfig& cfg,
                 double lo, double hi)
{
    const double g = cfg.nominal_gain();
    return oracle::dft_band_energy(out.samples(), cfg.sample_rate, lo, hi) /
           (g * g * oracle::dft_band_energy(in.samples(), cfg.sample_rate, lo, hi));
}

void filter_selection(Outcome& out)
{
    ChainConfig narrow, wide;
    wide.cutoff_hz = 1000;

    const AudioBuffer h = heart(60);
    const double kept = retention(h, process_audio(h, narrow).output, narrow, 20, 100);
    out.expect(kept >= 0.9, "heart keeps " + std::to_string(kept) + " of 20-100 Hz");

    SynthParams sp;
    sp.kind = SynthKind::Lung;
    sp.duration = 10;
    const AudioBuffer lung = synthesize(sp).audio;
    auto total = [&](const ChainConfig& cfg) {
        const double g = cfg.nominal_gain();
        return oracle::energy(process_audio(lung, cfg).output.samples()) /
               (g * g * oracle::energy(lung.samples()));
    };
    const double all_hi = total(wide);
    const double all_lo = total(narrow);
    out.expect(all_hi >= 0.8, "lung keeps " + std::to_string(all_hi) + " at 1000 Hz");
    out.expect(all_lo < 0.8, "lung keeps " + std::to_string(all_lo) + " at 100 Hz");
}

struct PR
{
    double precision, recall;
};

// Greedy matching within 50 ms, per label.
PR score(const std::vector<HeartEvent>& ev, const std::vector<double>& truth, HeartSound label)
{
    std::vector<bool> used(truth.size(), false);
    std::size_t det = 0, hits = 0;
    for (const HeartEvent& e : ev) {
        if (e.label != label)
            continue;
        ++det;
        for (std::size_t j = 0; j < truth.size(); ++j) {
            if (!used[j] && std::abs(truth[j] - e.time) <= 0.05) {
                used[j] = true;
                ++hits;
                break;
            }
        }
    }
    return {det ? double(hits) / double(det) : 0.0,
            truth.empty() ? 0.0 : double(hits) / double(truth.size())};
}

void analysis(Outcome& out)
{
    for (double bpm : {60.0, 80.0}) {
        SynthParams sp;
        sp.bpm = bpm;
        const SynthSignal sig = synthesize(sp);
        const std::string tag = std::to_string(int(bpm)) + " bpm: ";

        const auto ev = detect_heart_sounds(sig.audio);
        double est = 0;
        try {
            est = estimate_heart_rate(ev);
        } catch (const Error&) {
        }
        out.expect(std::abs(est - bpm) <= 2.0, tag + "estimate " + std::to_string(est));
        for (auto [label, truth] : {std::pair{HeartSound::S1, &sig.s1_times},
                                    std::pair{HeartSound::S2, &sig.s2_times}}) {
            const PR pr = score(ev, *truth, label);
            out.expect(pr.precision == 1.0 && pr.recall == 1.0, tag + "clean labels not exact");
        }

        const double sigma = rms(sig.audio.samples()) / 10.0;
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            auto noisy = sig.audio.samples();
            const auto n = oracle::white_noise(noisy.size(), sigma, seed);
            for (std::size_t i = 0; i < noisy.size(); ++i)
                noisy[i] += n[i];
            const auto nev = detect_heart_sounds(AudioBuffer(sig.audio.sample_rate(), noisy));
            for (auto [label, truth] : {std::pair{HeartSound::S1, &sig.s1_times},
                                        std::pair{HeartSound::S2, &sig.s2_times}}) {
                const PR pr = score(nev, *truth, label);
                out.expect(pr.precision >= 0.9 && pr.recall >= 0.9,
                           tag + "20 dB seed " + std::to_string(seed) + " P/R " +
                               std::to_string(pr.precision) + "/" + std::to_string(pr.recall));
            }
        }
    }
}

class SlowConsumer : public PacketConsumer
{
public:
    void on_packet(const Packet&, std::span<const std::uint8_t>, double) override
    {
        ++packets;
        if (!hurry)
            std::this_thread::sleep_for(std::chrono::milliseconds(40));
    }
    void on_end(StreamEnd) override {}
    std::atomic<std::size_t> packets{0};
    std::atomic<bool> hurry{false};
};

void fan_out(Outcome& out)
{
    const AudioBuffer src = heart(60, 30.0);
    ChainConfig cfg;
    ServerConfig sc;
    sc.send_buffer_bytes = 4096;
    StreamServer server(sc, cfg);

    JitterConfig jc;
    std::vector<std::unique_ptr<RecordingSink>> sinks;
    std::vector<ListenSummary> summaries(3);
    std::vector<std::thread> threads;
    for (int i = 0; i < 3; ++i) {
        sinks.push_back(std::make_unique<RecordingSink>(jc, cfg.full_scale));
        threads.emplace_back([&, i] {
            ListenConfig lc;
            lc.port = server.stream_port();
            summaries[std::size_t(i)] = listen_client(lc, *sinks[std::size_t(i)]);
        });
    }
    SlowConsumer slow;
    threads.emplace_back([&] {
        ListenConfig lc;
        lc.port = server.stream_port();
        lc.receive_buffer_bytes = 4096;
        listen_client(lc, slow);
    });
    if (!server.wait_for_listeners(4, std::chrono::seconds(5))) {
        out.expect(false, "listeners did not connect");
        server.shutdown();
        slow.hurry = true;
        for (auto& t : threads)
            t.join();
        return;
    }
    server.stream(src, 20.0);
    const ServerStats st = server.stats();
    server.shutdown();
    slow.hurry = true;
    for (auto& t : threads)
        t.join();

    const auto expect = encode_wav(dequantize_dac(run_transmit_chain(src, cfg), cfg.full_scale),
                                   cfg.full_scale);
    for (std::size_t i = 0; i < 3; ++i) {
        const auto got = encode_wav(sinks[i]->recording(), cfg.full_scale);
        out.expect(got == expect, "listener " + std::to_string(i) + " recording differs");
        out.expect(summaries[i].end == StreamEnd::EndOfStream,
                   "listener " + std::to_string(i) + " ended with " + to_string(summaries[i].end));
    }
    out.expect(st.sessions_dropped_slow >= 1, "slow listener was not disconnected");
    out.expect(slow.packets < st.packets_broadcast, "slow listener received everything");
}

void wav(Outcome& out)
{
    const double fsv = 2.5;
    const double lsb = fsv / 32767;
    auto x = oracle::white_noise(40000, 0.8, 5);
    for (double& v : x)
        v = std::clamp(v, -fsv, fsv);
    const AudioBuffer a(4000, x);
    const auto bytes = encode_wav(a, fsv);
    const AudioBuffer b = decode_wav(bytes, fsv);
    double worst = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        worst = std::max(worst, std::abs(a[i] - b[i]));
    out.expect(b.size() == a.size() && worst <= lsb,
               "round trip error " + std::to_string(worst / lsb) + " LSB");

    // canonical 44-byte header for 4000 Hz mono 16-bit, 80000 data bytes
    const std::uint8_t header[44] = {
        'R', 'I', 'F', 'F', 0xA4, 0x38, 0x01, 0x00, 'W',  'A',  'V',  'E',  'f', 'm', 't',
        ' ', 16,  0,   0,   0,    1,    0,    1,    0,    0xA0, 0x0F, 0x00, 0x00, 0x40, 0x1F,
        0,   0,   2,   0,   16,   0,    'd',  'a',  't',  'a',  0x80, 0x38, 0x01, 0x00};
    out.expect(bytes.size() == 44 + 80000 && std::equal(header, header + 44, bytes.begin()),
               "header bytes differ");
}

struct Criterion
{
    int id;
    const char* title;
    double limit_s;
    void (*run)(Outcome&);
};

} // namespace

int main()
{
    const Criterion criteria[] = {
        {1, "filter response", 5.0, filter_response},
        {2, "stage gains", 1.0, stage_gains},
        {3, "quantization", 5.0, quantization},
        {4, "packet codec", 5.0, codec},
        {5, "lossless end-to-end", 10.0, lossless},
        {6, "lossy determinism and conservation", 10.0, lossy},
        {7, "filter selection", 10.0, filter_selection},
        {8, "heart sound analysis", 10.0, analysis},
        {9, "service fan-out", 30.0, fan_out},
        {10, "WAV round trip", 2.0, wav},
    };
    int failed = 0;
    for (const Criterion& c : criteria) {
        Outcome out;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            c.run(out);
        } catch (const std::exception& e) {
            out.expect(false, std::string("exception: ") + e.what());
        }
        const double took =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        out.expect(took < c.limit_s, "over the " + std::to_string(c.limit_s) + " s limit");
        std::printf("criterion %2d %s: %s (%.2f s)%s%s\n", c.id, out.ok ? "PASS" : "FAIL", c.title,
                    took, out.ok ? "" : " ", out.note.str().c_str());
        failed += !out.ok;
    }
    std::printf("%d/10 criteria passed\n", 10 - failed);
    return failed ? 1 : 0;
}
