#ifndef STETH_SYNTH_HPP_
#define STETH_SYNTH_HPP_

#include <cstdint>
#include <vector>

#include "steth/audio.hpp"

namespace steth {

enum class SynthKind { Heart, Murmur, Lung };

inline constexpr double kDefaultHeartPeak = 0.003;
/// Breath sounds are quieter than heart sounds; 1 mV RMS keeps the default
/// chain (x320) clear of the rails.
inline constexpr double kDefaultLungRms = 0.001;

struct SynthParams
{
    SynthKind kind = SynthKind::Heart;
    double bpm = 60.0;
    std::uint64_t seed = 1;
    double duration = 10.0;
    std::uint32_t sample_rate = 4000;
    /// Peak of the S1 burst (heart, murmur) or RMS of the breath noise
    /// (lung), in volts at the microphone. 0 picks the kind's default.
    double amplitude = 0.0;
    double first_beat = 0.5;
};

struct SynthSignal
{
    AudioBuffer audio;
    std::vector<double> s1_times; ///< burst centres, empty for lung sounds
    std::vector<double> s2_times;
};

/// Deterministic test signals. Heart: Gaussian-windowed 37 Hz (S1) and
/// 60 Hz (S2) bursts; murmur: heart plus 150-400 Hz noise in late systole;
/// lung: band-limited noise up to 900 Hz under a breathing envelope.
SynthSignal synthesize(const SynthParams& params);

/// Systolic interval between S1 and S2 for a beat period.
double systole_seconds(double beat_period) noexcept;

} // namespace steth

#endif
