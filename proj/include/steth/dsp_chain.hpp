#ifndef STETH_DSP_CHAIN_HPP_
#define STETH_DSP_CHAIN_HPP_

#include <array>
#include <complex>
#include <cstdint>

#include "steth/audio.hpp"

namespace steth {

/// Front-end parameters of the transmitter. Defaults model the reference
/// circuit: x20 preamp, 1.6x low-pass, x20 power amp behind a volume pot,
/// symmetric rails at +/-2.5 V.
struct ChainConfig
{
    double preamp_gain = 20.0;
    int cutoff_hz = 100;
    double filter_gain = 1.6;
    double volume = 0.5;
    double power_gain = 20.0;
    double full_scale = 2.5;
    std::uint32_t sample_rate = 4000;
    /// Corner of the first-order AC-coupling high-pass at chain entry.
    double dc_block_hz = 2.0;

    void validate() const;

    /// Small-signal gain from microphone to ADC input, ignoring the
    /// frequency response.
    double nominal_gain() const noexcept
    {
        return preamp_gain * filter_gain * volume * power_gain;
    }

    friend bool operator==(const ChainConfig&, const ChainConfig&) = default;
};

bool is_supported_cutoff(double hz) noexcept;

/// Second-order recursive section, transposed direct form II.
/// Feedback coefficients follow the 1 + a1 z^-1 + a2 z^-2 convention.
class Biquad
{
public:
    Biquad() = default;
    Biquad(double b0, double b1, double b2, double a1, double a2);

    double process(double x) noexcept
    {
        double y = m_b0 * x + m_s1;
        m_s1 = m_b1 * x - m_a1 * y + m_s2;
        m_s2 = m_b2 * x - m_a2 * y;
        return y;
    }

    void reset() noexcept { m_s1 = m_s2 = 0.0; }

    double b0() const noexcept { return m_b0; }
    double b1() const noexcept { return m_b1; }
    double b2() const noexcept { return m_b2; }
    double a1() const noexcept { return m_a1; }
    double a2() const noexcept { return m_a2; }

    std::array<std::complex<double>, 2> poles() const;
    bool stable() const;

    /// Complex frequency response evaluated from the coefficients.
    std::complex<double> response(double freq_hz, double sample_rate) const;

private:
    double m_b0 = 1.0, m_b1 = 0.0, m_b2 = 0.0;
    double m_a1 = 0.0, m_a2 = 0.0;
    double m_s1 = 0.0, m_s2 = 0.0;
};

/// Butterworth low-pass, bilinear transform with the cutoff pre-warped.
/// DC gain equals `gain`; the response at `cutoff_hz` is gain/sqrt(2).
Biquad design_lowpass(double cutoff_hz, double gain, double sample_rate);

/// First-order Butterworth high-pass packed into a biquad (b2 = a2 = 0).
Biquad design_highpass1(double corner_hz, double sample_rate);

AudioBuffer preamplify(const AudioBuffer& buf, double gain);

/// Streams `buf` through `section`; state is kept in `section`, so
/// consecutive calls continue the same stream.
AudioBuffer filter_apply(const AudioBuffer& buf, Biquad& section);

AudioBuffer power_amplify(const AudioBuffer& buf, double volume, double power_gain,
                          double full_scale);

std::uint16_t quantize_sample(double volts, double full_scale) noexcept;
double dequantize_code(std::uint16_t code, double full_scale) noexcept;

SampleBlock quantize_adc(const AudioBuffer& buf, double full_scale,
                         std::uint64_t start_timestamp = 0);
AudioBuffer dequantize_dac(const SampleBlock& block, double full_scale);

/// Stateful transmitter front end. One instance serves one stream;
/// successive process() calls behave like one call on the concatenation.
class TransmitChain
{
public:
    explicit TransmitChain(const ChainConfig& cfg);

    SampleBlock process(const AudioBuffer& buf);

    /// Clears filter memory; the timestamp cursor keeps running.
    void reset() noexcept;

    /// Switches to `cfg` at the next sample. Filters are redesigned and
    /// their memory cleared only when a filter parameter changed.
    void reconfigure(const ChainConfig& cfg);

    const ChainConfig& config() const noexcept { return m_cfg; }
    std::uint64_t next_timestamp() const noexcept { return m_next_ts; }
    void set_next_timestamp(std::uint64_t ts) noexcept { m_next_ts = ts; }
    std::uint64_t clipped_samples() const noexcept { return m_clipped; }

private:
    ChainConfig m_cfg;
    Biquad m_dc_block;
    Biquad m_lowpass;
    std::uint64_t m_next_ts = 0;
    std::uint64_t m_clipped = 0;
};

SampleBlock run_transmit_chain(const AudioBuffer& buf, const ChainConfig& cfg);

} // namespace steth

#endif
