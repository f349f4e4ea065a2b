#ifndef STETH_ANALYSIS_HPP_
#define STETH_ANALYSIS_HPP_

#include <array>
#include <span>
#include <vector>

#include "steth/audio.hpp"
#include "steth/dsp_chain.hpp"

namespace steth {

struct BandSpec
{
    double lo = 0.0;
    double hi = 0.0;

    /// Throws InvalidArgument unless 0 < lo < hi < sample_rate/2.
    void validate(double sample_rate) const;
};

/// Where first and second heart sounds concentrate their energy.
inline constexpr BandSpec kS1Band{30.0, 45.0};
inline constexpr BandSpec kS2Band{50.0, 70.0};

/// Fourth-order Butterworth band-pass as two biquads, unity gain at the
/// geometric centre of the pre-warped edges.
std::array<Biquad, 2> design_bandpass(const BandSpec& band, double sample_rate);

/// Forward-backward band-pass; zero phase, squared magnitude.
std::vector<double> bandpass_zero_phase(std::span<const double> x, const BandSpec& band,
                                        double sample_rate);

/// Mean square of the buffer after the causal band-pass, in volts^2.
double band_energy(const AudioBuffer& buf, const BandSpec& band);

enum class HeartSound { S1, S2 };

const char* to_string(HeartSound s) noexcept;

struct HeartEvent
{
    double time = 0.0; ///< envelope peak, seconds from buffer start
    HeartSound label = HeartSound::S1;
    double energy_s1_band = 0.0;
    double energy_s2_band = 0.0;
};

struct DetectorConfig
{
    BandSpec prefilter{20.0, 150.0};
    double frame = 0.020;
    double hop = 0.010;
    double threshold_k = 0.5; ///< threshold = mean + k * stddev of the envelope
    double refractory = 0.200;
    double classify_half_window = 0.050;
    double min_duration = 2.0;
};

/// Normalised average Shannon energy per frame.
std::vector<double> shannon_envelope(std::span<const double> x, std::size_t frame,
                                     std::size_t hop);

std::vector<HeartEvent> detect_heart_sounds(const AudioBuffer& buf,
                                            const DetectorConfig& cfg = {});

/// 60 / median interval between consecutive S1 events.
double estimate_heart_rate(std::span<const HeartEvent> events);

} // namespace steth

#endif
