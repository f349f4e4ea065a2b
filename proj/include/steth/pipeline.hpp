#ifndef STETH_PIPELINE_HPP_
#define STETH_PIPELINE_HPP_

#include <cstdint>

#include "steth/audio.hpp"
#include "steth/dsp_chain.hpp"
#include "steth/transport.hpp"

namespace steth {

/// Gain accounting for one pass through the transmitter front end.
struct ProcessReport
{
    double preamp_gain = 0.0;
    double filter_dc_gain = 0.0;
    double filter_gain_at_cutoff = 0.0;
    double power_gain_effective = 0.0; ///< volume x power gain
    double nominal_gain = 0.0;
    double input_rms = 0.0;
    double output_rms = 0.0;
    std::uint64_t clipped_samples = 0;
};

struct ProcessResult
{
    AudioBuffer output; ///< DAC reconstruction of the ADC codes
    SampleBlock codes;
    ProcessReport report;
};

/// Transmit chain followed directly by the DAC, no radio in between.
ProcessResult process_audio(const AudioBuffer& input, const ChainConfig& cfg);

std::uint8_t cutoff_flags(const ChainConfig& cfg) noexcept;

struct SimulateConfig
{
    ChainConfig chain;
    LinkParams link;
    double depth = 0.100;
    Concealment concealment = Concealment::ZeroFill;
};

struct SimulateStats
{
    std::uint64_t sent = 0;
    std::uint64_t delivered = 0; ///< played out by the receiver
    std::uint64_t dropped = 0;   ///< lost on the radio
    std::uint64_t late = 0;      ///< arrived after their playout time
    std::uint64_t concealed_samples = 0;
    double utilization = 0.0;
    double latency_p50 = 0.0; ///< capture-complete to radio arrival, seconds
    double latency_p95 = 0.0;
    double latency_p99 = 0.0;
    double latency_max = 0.0;
};

struct SimulateResult
{
    AudioBuffer output;
    SampleBlock codes;
    SimulateStats stats;
};

/// chain -> packetize -> radio link -> jitter buffer -> DAC. Each packet
/// leaves as soon as its last sample is captured.
SimulateResult simulate_link(const AudioBuffer& input, const SimulateConfig& cfg);

} // namespace steth

#endif
