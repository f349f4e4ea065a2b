#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "steth/error.hpp"
#include "steth/synth.hpp"
#include "steth/wav.hpp"

using namespace steth;

TEST_CASE("heart rhythm")
{
    SynthParams sp;
    sp.bpm = 60;
    const SynthSignal s = synthesize(sp);
    CHECK(s.audio.sample_rate() == 4000);
    CHECK(s.audio.size() == 40000);
    REQUIRE(s.s1_times.size() == 10);
    for (std::size_t i = 1; i < s.s1_times.size(); ++i)
        CHECK(s.s1_times[i] - s.s1_times[i - 1] == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t i = 0; i < s.s2_times.size(); ++i)
        CHECK(s.s2_times[i] - s.s1_times[i] == doctest::Approx(0.3));

    sp.bpm = 80;
    const SynthSignal f = synthesize(sp);
    CHECK(f.s1_times[1] - f.s1_times[0] == doctest::Approx(0.75));
    CHECK(systole_seconds(0.5) == doctest::Approx(0.2));

    // the S1 burst peak sits near the requested amplitude
    const auto i1 = std::size_t(s.s1_times[2] * 4000);
    double peak = 0;
    for (std::size_t i = i1 - 200; i < i1 + 200; ++i)
        peak = std::max(peak, std::abs(s.audio[i]));
    CHECK(peak == doctest::Approx(kDefaultHeartPeak).epsilon(0.05));
}

TEST_CASE("heart energy sits below 100 Hz")
{
    SynthParams sp;
    sp.duration = 4;
    const auto x = synthesize(sp).audio.samples();
    const double low = oracle::dft_band_energy(x, 4000, 0, 100);
    CHECK(low / oracle::energy(x) >= 0.95);
}

TEST_CASE("murmur adds 150-400 Hz energy inside systole only")
{
    SynthParams sp;
    sp.duration = 4;
    sp.kind = SynthKind::Murmur;
    const SynthSignal m = synthesize(sp);
    sp.kind = SynthKind::Heart;
    const SynthSignal h = synthesize(sp);
    std::vector<double> diff(m.audio.size());
    for (std::size_t i = 0; i < diff.size(); ++i)
        diff[i] = m.audio[i] - h.audio[i];
    const double total = oracle::energy(diff);
    CHECK(total > 0.0);
    CHECK(oracle::dft_band_energy(diff, 4000, 140, 410) / total >= 0.9);
    // outside [S1, S2] nothing was added
    for (std::size_t i = 0; i < diff.size(); ++i) {
        const double t = double(i) / 4000;
        bool in_systole = false;
        for (std::size_t k = 0; k < m.s1_times.size(); ++k)
            in_systole = in_systole || (t > m.s1_times[k] && t < m.s1_times[k] + 0.3);
        if (!in_systole)
            REQUIRE(diff[i] == 0.0);
    }
}

TEST_CASE("lung sound")
{
    SynthParams sp;
    sp.kind = SynthKind::Lung;
    sp.duration = 4;
    const auto x = synthesize(sp).audio.samples();
    CHECK(rms(x) == doctest::Approx(kDefaultLungRms).epsilon(1e-9));
    const double e = oracle::energy(x);
    CHECK(oracle::dft_band_energy(x, 4000, 100, 900) / e >= 0.85);
    CHECK(oracle::dft_band_energy(x, 4000, 300, 1000) / e >= 0.3);
    CHECK(oracle::dft_band_energy(x, 4000, 0, 60) / e <= 0.05);
}

TEST_CASE("determinism")
{
    for (auto kind : {SynthKind::Heart, SynthKind::Murmur, SynthKind::Lung}) {
        SynthParams sp;
        sp.kind = kind;
        sp.seed = 9;
        const auto a = encode_wav(synthesize(sp).audio, 0.01);
        const auto b = encode_wav(synthesize(sp).audio, 0.01);
        CHECK(a == b);
        if (kind != SynthKind::Heart) {
            sp.seed = 10;
            CHECK(encode_wav(synthesize(sp).audio, 0.01) != a);
        }
    }
}

TEST_CASE("parameter validation")
{
    SynthParams sp;
    sp.duration = 0;
    CHECK_THROWS_AS(synthesize(sp), Error);
    sp = {};
    sp.bpm = 0;
    CHECK_THROWS_AS(synthesize(sp), Error);
    sp = {};
    sp.amplitude = -1;
    CHECK_THROWS_AS(synthesize(sp), Error);
    sp = {};
    sp.kind = SynthKind::Lung;
    sp.sample_rate = 1000;
    CHECK_THROWS_AS(synthesize(sp), Error);
}
