#include "steth/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>
#include <string>

#include "steth/error.hpp"

namespace steth {

void BandSpec::validate(double sample_rate) const
{
    if (!(lo > 0.0 && lo < hi && hi < sample_rate / 2.0))
        fail(ErrorCode::InvalidArgument,
             "band [" + std::to_string(lo) + ", " + std::to_string(hi) +
                 "] Hz must satisfy 0 < lo < hi < " + std::to_string(sample_rate / 2.0));
}

std::array<Biquad, 2> design_bandpass(const BandSpec& band, double sample_rate)
{
    band.validate(sample_rate);

    // Work in the bilinear domain s = (1 - z^-1) / (1 + z^-1), where a
    // digital frequency f sits at tan(pi f / fs).
    const double w1 = std::tan(std::numbers::pi * band.lo / sample_rate);
    const double w2 = std::tan(std::numbers::pi * band.hi / sample_rate);
    const double w0sq = w1 * w2;
    const double bw = w2 - w1;

    // Low-pass prototype pole at exp(j 3pi/4). Each prototype pole maps to
    // the two roots of s^2 - p*bw*s + w0^2; the conjugate prototype pole
    // supplies their conjugates, so each root seeds one real biquad.
    const std::complex<double> p = std::polar(1.0, 3.0 * std::numbers::pi / 4.0);
    const std::complex<double> disc = std::sqrt(p * p * bw * bw - 4.0 * w0sq);
    const std::array<std::complex<double>, 2> roots{(p * bw + disc) / 2.0,
                                                    (p * bw - disc) / 2.0};

    std::array<Biquad, 2> sections;
    for (std::size_t i = 0; i < 2; ++i) {
        // analog section: bw*s / (s^2 + d1 s + d0)
        const double d1 = -2.0 * roots[i].real();
        const double d0 = std::norm(roots[i]);
        const double a0 = 1.0 + d1 + d0;
        sections[i] = Biquad(bw / a0, 0.0, -bw / a0, (2.0 * d0 - 2.0) / a0,
                             (1.0 - d1 + d0) / a0);
    }
    return sections;
}

std::vector<double> bandpass_zero_phase(std::span<const double> x, const BandSpec& band,
                                        double sample_rate)
{
    auto sections = design_bandpass(band, sample_rate);
    std::vector<double> y(x.begin(), x.end());
    for (Biquad& s : sections)
        for (double& v : y)
            v = s.process(v);
    std::reverse(y.begin(), y.end());
    for (Biquad& s : sections) {
        s.reset();
        for (double& v : y)
            v = s.process(v);
    }
    std::reverse(y.begin(), y.end());
    return y;
}

double band_energy(const AudioBuffer& buf, const BandSpec& band)
{
    auto sections = design_bandpass(band, buf.sample_rate());
    double acc = 0.0;
    for (double v : buf.samples()) {
        const double y = sections[1].process(sections[0].process(v));
        acc += y * y;
    }
    return buf.empty() ? 0.0 : acc / double(buf.size());
}

const char* to_string(HeartSound s) noexcept
{
    return s == HeartSound::S1 ? "S1" : "S2";
}

std::vector<double> shannon_envelope(std::span<const double> x, std::size_t frame,
                                     std::size_t hop)
{
    if (frame == 0 || hop == 0)
        fail(ErrorCode::InvalidArgument, "frame and hop must be positive");
    if (x.size() < frame)
        return {};

    double peak = 0.0;
    for (double v : x)
        peak = std::max(peak, std::abs(v));

    std::vector<double> se(x.size(), 0.0);
    if (peak > 0.0) {
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double e = (x[i] / peak) * (x[i] / peak);
            se[i] = e > 0.0 ? -e * std::log(e) : 0.0;
        }
    }

    const std::size_t frames = (x.size() - frame) / hop + 1;
    std::vector<double> env(frames);
    for (std::size_t k = 0; k < frames; ++k) {
        const auto first = se.begin() + std::ptrdiff_t(k * hop);
        env[k] = std::accumulate(first, first + std::ptrdiff_t(frame), 0.0) / double(frame);
    }

    const double mean = std::accumulate(env.begin(), env.end(), 0.0) / double(frames);
    double var = 0.0;
    for (double e : env)
        var += (e - mean) * (e - mean);
    const double sd = std::sqrt(var / double(frames));
    for (double& e : env)
        e = sd > 0.0 ? (e - mean) / sd : 0.0;
    return env;
}

namespace {

double window_energy(const std::vector<double>& y, double centre, double half, double rate)
{
    const auto n = std::ptrdiff_t(y.size());
    const auto lo = std::clamp<std::ptrdiff_t>(std::ptrdiff_t(std::lround((centre - half) * rate)), 0, n);
    const auto hi = std::clamp<std::ptrdiff_t>(std::ptrdiff_t(std::lround((centre + half) * rate)), lo, n);
    return mean_square(std::span<const double>(y.data() + lo, std::size_t(hi - lo)));
}

} // namespace

std::vector<HeartEvent> detect_heart_sounds(const AudioBuffer& buf, const DetectorConfig& cfg)
{
    const double rate = buf.sample_rate();
    if (buf.duration() < cfg.min_duration)
        fail(ErrorCode::InvalidArgument, "heart sound detection needs at least " +
                                             std::to_string(cfg.min_duration) + " s, got " +
                                             std::to_string(buf.duration()) + " s");
    if (!(cfg.hop > 0.0) || !(cfg.frame >= cfg.hop) || !(cfg.refractory >= 0.0))
        fail(ErrorCode::InvalidArgument, "bad detector timing parameters");

    const std::vector<double> y = bandpass_zero_phase(buf.samples(), cfg.prefilter, rate);
    const std::size_t frame = std::max<std::size_t>(1, std::size_t(std::lround(cfg.frame * rate)));
    const std::size_t hop = std::max<std::size_t>(1, std::size_t(std::lround(cfg.hop * rate)));

    const std::vector<double> env = shannon_envelope(y, frame, hop);
    if (env.size() < 3)
        return {};

    const double mean = std::accumulate(env.begin(), env.end(), 0.0) / double(env.size());
    double var = 0.0;
    for (double e : env)
        var += (e - mean) * (e - mean);
    const double sd = std::sqrt(var / double(env.size()));
    if (sd == 0.0)
        return {};
    const double threshold = mean + cfg.threshold_k * sd;

    std::vector<std::size_t> candidates;
    for (std::size_t i = 1; i + 1 < env.size(); ++i) {
        if (env[i] > threshold && env[i] > env[i - 1] && env[i] >= env[i + 1])
            candidates.push_back(i);
    }
    // strongest first; the earlier frame wins a tie
    std::stable_sort(candidates.begin(), candidates.end(),
                     [&](std::size_t a, std::size_t b) { return env[a] > env[b]; });

    auto frame_time = [&](std::size_t k) {
        return (double(k * hop) + double(frame) / 2.0) / rate;
    };

    std::vector<double> picked;
    for (std::size_t k : candidates) {
        const double t = frame_time(k);
        const bool clear = std::none_of(picked.begin(), picked.end(), [&](double u) {
            return std::abs(u - t) < cfg.refractory;
        });
        if (clear)
            picked.push_back(t);
    }
    std::sort(picked.begin(), picked.end());

    const std::vector<double> s1 = bandpass_zero_phase(buf.samples(), kS1Band, rate);
    const std::vector<double> s2 = bandpass_zero_phase(buf.samples(), kS2Band, rate);

    std::vector<HeartEvent> events;
    events.reserve(picked.size());
    for (double t : picked) {
        HeartEvent ev;
        ev.time = t;
        ev.energy_s1_band = window_energy(s1, t, cfg.classify_half_window, rate);
        ev.energy_s2_band = window_energy(s2, t, cfg.classify_half_window, rate);
        ev.label = ev.energy_s1_band >= ev.energy_s2_band ? HeartSound::S1 : HeartSound::S2;
        events.push_back(ev);
    }
    return events;
}

double estimate_heart_rate(std::span<const HeartEvent> events)
{
    std::vector<double> s1;
    for (const HeartEvent& e : events)
        if (e.label == HeartSound::S1)
            s1.push_back(e.time);
    if (s1.size() < 2)
        fail(ErrorCode::InsufficientData, "heart rate needs at least two S1 events, got " +
                                              std::to_string(s1.size()));
    std::sort(s1.begin(), s1.end());

    std::vector<double> intervals;
    for (std::size_t i = 1; i < s1.size(); ++i)
        intervals.push_back(s1[i] - s1[i - 1]);
    std::sort(intervals.begin(), intervals.end());

    const std::size_t m = intervals.size() / 2;
    const double median = intervals.size() % 2 != 0 ? intervals[m]
                                                    : 0.5 * (intervals[m - 1] + intervals[m]);
    if (!(median > 0.0))
        fail(ErrorCode::InsufficientData, "S1 events are not separated in time");
    return 60.0 / median;
}

} // namespace steth
