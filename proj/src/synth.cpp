#include "steth/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "steth/analysis.hpp"
#include "steth/error.hpp"

namespace steth {

namespace {

constexpr double kS1Freq = 37.0;
constexpr double kS2Freq = 60.0;
constexpr double kS1Sigma = 0.020;
constexpr double kS2Sigma = 0.015;
constexpr double kS2Relative = 0.6;
constexpr double kBreathPeriod = 4.0;

void add_burst(std::vector<double>& x, double rate, double centre, double freq, double sigma,
               double peak)
{
    const auto n = std::ptrdiff_t(x.size());
    const auto lo = std::max<std::ptrdiff_t>(0, std::ptrdiff_t(std::floor((centre - 5 * sigma) * rate)));
    const auto hi = std::min<std::ptrdiff_t>(n, std::ptrdiff_t(std::ceil((centre + 5 * sigma) * rate)) + 1);
    for (std::ptrdiff_t i = lo; i < hi; ++i) {
        const double t = double(i) / rate - centre;
        x[std::size_t(i)] += peak * std::exp(-t * t / (2 * sigma * sigma)) *
                             std::sin(2 * std::numbers::pi * freq * t);
    }
}

std::vector<double> band_noise(std::size_t n, double rate, BandSpec band, std::mt19937_64& rng)
{
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> w(n);
    for (double& v : w)
        v = gauss(rng);
    return bandpass_zero_phase(w, band, rate);
}

void scale_to_rms(std::vector<double>& x, double target)
{
    const double r = rms(x);
    if (r > 0.0)
        for (double& v : x)
            v *= target / r;
}

} // namespace

double systole_seconds(double beat_period) noexcept
{
    return std::min(0.3, 0.4 * beat_period);
}

SynthSignal synthesize(const SynthParams& params)
{
    if (!(params.duration > 0.0) || params.sample_rate == 0)
        fail(ErrorCode::InvalidArgument, "synthesis needs a positive duration and rate");
    if (!(params.amplitude >= 0.0) || !std::isfinite(params.amplitude))
        fail(ErrorCode::InvalidArgument, "amplitude must be non-negative");
    const double amplitude = params.amplitude > 0.0 ? params.amplitude
                             : params.kind == SynthKind::Lung ? kDefaultLungRms
                                                              : kDefaultHeartPeak;
    if (params.kind != SynthKind::Lung && !(params.bpm >= 20.0 && params.bpm <= 240.0))
        fail(ErrorCode::InvalidArgument, "bpm must lie in [20, 240]");

    const double rate = params.sample_rate;
    const auto n = std::size_t(std::llround(params.duration * rate));
    std::vector<double> x(n, 0.0);
    std::mt19937_64 rng(params.seed);
    SynthSignal sig{AudioBuffer(params.sample_rate, {}), {}, {}};

    if (params.kind == SynthKind::Lung) {
        if (rate <= 2.0 * 900.0)
            fail(ErrorCode::InvalidArgument, "lung sounds need a sample rate above 1800 Hz");
        std::vector<double> noise = band_noise(n, rate, {100.0, 900.0}, rng);
        for (std::size_t i = 0; i < n; ++i) {
            const double phase = std::sin(std::numbers::pi * double(i) / rate / kBreathPeriod);
            noise[i] *= 0.3 + 0.7 * phase * phase;
        }
        scale_to_rms(noise, amplitude);
        sig.audio = AudioBuffer(params.sample_rate, std::move(noise));
        return sig;
    }

    const double period = 60.0 / params.bpm;
    const double systole = systole_seconds(period);
    for (double c1 = params.first_beat; c1 < params.duration; c1 += period) {
        add_burst(x, rate, c1, kS1Freq, kS1Sigma, amplitude);
        sig.s1_times.push_back(c1);
        const double c2 = c1 + systole;
        if (c2 < params.duration) {
            add_burst(x, rate, c2, kS2Freq, kS2Sigma, kS2Relative * amplitude);
            sig.s2_times.push_back(c2);
        }
    }

    if (params.kind == SynthKind::Murmur) {
        if (rate <= 2.0 * 400.0)
            fail(ErrorCode::InvalidArgument, "murmurs need a sample rate above 800 Hz");
        std::vector<double> noise = band_noise(n, rate, {150.0, 400.0}, rng);
        scale_to_rms(noise, 0.25 * amplitude);
        std::vector<double> gate(n, 0.0);
        for (double c1 : sig.s1_times) {
            // late systole: second half of the S1-S2 interval, clear of S2
            const double on = c1 + 0.45 * systole;
            const double off = c1 + systole - 0.05;
            for (auto i = std::size_t(std::max(0.0, on * rate));
                 i < n && double(i) / rate < off; ++i) {
                const double u = (double(i) / rate - on) / (off - on);
                gate[i] = std::sin(std::numbers::pi * u);
            }
        }
        for (std::size_t i = 0; i < n; ++i)
            x[i] += gate[i] * noise[i];
    }

    sig.audio = AudioBuffer(params.sample_rate, std::move(x));
    return sig;
}

} // namespace steth
