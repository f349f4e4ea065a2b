#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <string>
#include <thread>
#include <vector>

#include <unistd.h>

#include "steth/steth.h"

namespace fs = std::filesystem;

namespace {

struct Audio
{
    steth_audio* p = nullptr;
    ~Audio() { steth_audio_destroy(p); }
    std::vector<double> samples() const
    {
        const double* s = steth_audio_samples(p);
        return {s, s + steth_audio_length(p)};
    }
};

Audio heart(double seconds, double bpm = 60)
{
    steth_synth_options o;
    steth_synth_options_default(&o);
    o.duration_s = seconds;
    o.bpm = bpm;
    Audio a;
    REQUIRE(steth_synthesize(&o, &a.p) == STETH_OK);
    return a;
}

} // namespace

TEST_CASE("status strings and last error")
{
    CHECK(std::string(steth_status_string(STETH_OK)).size() > 0);
    CHECK(std::string(steth_status_string(STETH_ERR_REJECTED)) !=
          steth_status_string(STETH_ERR_NETWORK));

    steth_audio* a = nullptr;
    CHECK(steth_audio_create(0, nullptr, 0, &a) == STETH_ERR_INVALID_ARGUMENT);
    CHECK(a == nullptr);
    CHECK(std::strlen(steth_last_error()) > 0);

    const double x[2] = {0.1, 0.2};
    REQUIRE(steth_audio_create(4000, x, 2, &a) == STETH_OK);
    CHECK(std::string(steth_last_error()).empty());
    CHECK(steth_audio_sample_rate(a) == 4000);
    CHECK(steth_audio_length(a) == 2);
    CHECK(steth_audio_samples(a)[1] == 0.2);
    steth_audio_destroy(a);
    steth_audio_destroy(nullptr);

    // the message is per thread
    std::string other = "unset";
    std::thread([&] { other = steth_last_error(); }).join();
    CHECK(other.empty());

    CHECK(steth_audio_create(4000, x, 2, nullptr) == STETH_ERR_INVALID_ARGUMENT);
}

TEST_CASE("wav round trip and errors")
{
    const fs::path dir = fs::temp_directory_path() / ("steth_capi_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    const std::string path = (dir / "h.wav").string();

    Audio h = heart(3);
    REQUIRE(steth_wav_write(path.c_str(), h.p, 0.01) == STETH_OK);
    Audio back;
    REQUIRE(steth_wav_read(path.c_str(), 0.01, &back.p) == STETH_OK);
    const auto a = h.samples(), b = back.samples();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        REQUIRE(std::abs(a[i] - b[i]) <= 0.01 / 32767);

    steth_audio* none = nullptr;
    CHECK(steth_wav_read((dir / "missing.wav").c_str(), 2.5, &none) == STETH_ERR_NOT_FOUND);
    CHECK(none == nullptr);
    {
        FILE* f = std::fopen((dir / "junk.wav").c_str(), "wb");
        std::fputs("not a wav file at all", f);
        std::fclose(f);
    }
    CHECK(steth_wav_read((dir / "junk.wav").c_str(), 2.5, &none) == STETH_ERR_MALFORMED_FILE);
    CHECK(steth_wav_write((dir / "no" / "x.wav").c_str(), h.p, 2.5) == STETH_ERR_IO);
    fs::remove_all(dir);
}

TEST_CASE("process and simulate")
{
    Audio in = heart(5);
    steth_chain_config cfg;
    steth_chain_config_default(&cfg);
    CHECK(cfg.cutoff_hz == 100);
    CHECK(cfg.sample_rate == 4000);

    Audio out;
    steth_process_report rep;
    REQUIRE(steth_process(in.p, &cfg, &out.p, &rep) == STETH_OK);
    CHECK(steth_audio_length(out.p) == steth_audio_length(in.p));
    CHECK(rep.nominal_gain == doctest::Approx(320.0));
    CHECK(rep.clipped_samples == 0);

    steth_link_config link;
    steth_link_config_default(&link);
    link.jitter_max_s = 0;
    Audio sim;
    steth_link_stats st;
    REQUIRE(steth_simulate(in.p, &cfg, &link, &sim.p, &st) == STETH_OK);
    CHECK(sim.samples() == out.samples());
    CHECK(st.sent == st.delivered);
    CHECK(st.utilization == doctest::Approx(0.28).epsilon(0.1));

    link.loss_prob = 0.2;
    link.seed = 3;
    Audio s1, s2;
    steth_link_stats a, b;
    REQUIRE(steth_simulate(in.p, &cfg, &link, &s1.p, &a) == STETH_OK);
    REQUIRE(steth_simulate(in.p, &cfg, &link, &s2.p, nullptr) == STETH_OK);
    CHECK(s1.samples() == s2.samples());
    CHECK(a.delivered + a.dropped + a.late == a.sent);

    cfg.cutoff_hz = 500;
    steth_audio* bad = nullptr;
    CHECK(steth_process(in.p, &cfg, &bad, nullptr) == STETH_ERR_INVALID_ARGUMENT);
    CHECK(bad == nullptr);
    steth_chain_config_default(&cfg);
    link.loss_prob = 1.5;
    CHECK(steth_simulate(in.p, &cfg, &link, &bad, nullptr) == STETH_ERR_INVALID_ARGUMENT);
}

TEST_CASE("analysis")
{
    Audio h = heart(10, 72);
    steth_events* ev = nullptr;
    REQUIRE(steth_detect_heart_sounds(h.p, &ev) == STETH_OK);
    REQUIRE(steth_events_count(ev) >= 4);
    steth_heart_event e;
    REQUIRE(steth_events_get(ev, 0, &e) == STETH_OK);
    CHECK(e.label == STETH_S1);
    CHECK(steth_events_get(ev, steth_events_count(ev), &e) == STETH_ERR_INVALID_ARGUMENT);
    double bpm = 0;
    REQUIRE(steth_estimate_heart_rate(ev, &bpm) == STETH_OK);
    CHECK(bpm == doctest::Approx(72.0).epsilon(2.0 / 72));
    steth_events_destroy(ev);

    std::vector<double> zeros(12000, 0.0);
    Audio silent;
    REQUIRE(steth_audio_create(4000, zeros.data(), zeros.size(), &silent.p) == STETH_OK);
    REQUIRE(steth_detect_heart_sounds(silent.p, &ev) == STETH_OK);
    CHECK(steth_events_count(ev) == 0);
    CHECK(steth_estimate_heart_rate(ev, &bpm) == STETH_ERR_INSUFFICIENT_DATA);
    steth_events_destroy(ev);
}

TEST_CASE("server, listener and control")
{
    steth_chain_config cfg;
    steth_chain_config_default(&cfg);
    steth_server_options so;
    steth_server_options_default(&so);
    steth_server* srv = nullptr;
    REQUIRE(steth_server_create(&so, &cfg, &srv) == STETH_OK);
    const uint16_t port = steth_server_stream_port(srv);
    const uint16_t cport = steth_server_control_port(srv);
    CHECK(port != 0);
    CHECK(cport != 0);

    char reply[128];
    CHECK(steth_control("127.0.0.1", cport, "SET VOLUME 0.5", reply, sizeof reply) == STETH_OK);
    CHECK(std::string(reply) == "OK");
    CHECK(steth_control("127.0.0.1", cport, "SET VOLUME 1.5", reply, sizeof reply) ==
          STETH_ERR_REJECTED);
    CHECK(std::string(reply).rfind("ERR", 0) == 0);

    Audio src = heart(3);
    Audio rec[2];
    steth_listen_result res[2];
    steth_status rc[2];
    std::thread ls[2];
    for (int i = 0; i < 2; ++i) {
        ls[i] = std::thread([&, i] {
            steth_listen_options lo;
            steth_listen_options_default(&lo);
            lo.port = port;
            rc[i] = steth_listen(&lo, nullptr, &rec[i].p, &res[i]);
        });
    }
    REQUIRE(steth_server_wait_listeners(srv, 2, 5000) == 1);
    REQUIRE(steth_server_stream(srv, src.p, 0.0, nullptr) == STETH_OK);
    steth_server_stats st;
    steth_server_get_stats(srv, &st);
    CHECK(st.sessions_accepted == 2);
    CHECK(st.commands_applied == 1);
    steth_server_destroy(srv);
    for (auto& t : ls)
        t.join();

    Audio expect;
    REQUIRE(steth_process(src.p, &cfg, &expect.p, nullptr) == STETH_OK);
    for (int i = 0; i < 2; ++i) {
        CHECK(rc[i] == STETH_OK);
        CHECK(res[i].end == STETH_END_OF_STREAM);
        CHECK(res[i].packets == st.packets_broadcast);
        CHECK(res[i].late == 0);
        CHECK(res[i].concealed_samples == 0);
        CHECK(rec[i].samples() == rec[0].samples());
    }
    // volume 0.5 on both sides: the recording matches a local run
    CHECK(rec[0].samples() == expect.samples());

    steth_listen_options lo;
    steth_listen_options_default(&lo);
    lo.port = port;
    steth_audio* none = nullptr;
    CHECK(steth_listen(&lo, nullptr, &none, nullptr) == STETH_ERR_NETWORK);
    CHECK(steth_control("127.0.0.1", cport, "GET STATUS", reply, sizeof reply) ==
          STETH_ERR_NETWORK);
}
