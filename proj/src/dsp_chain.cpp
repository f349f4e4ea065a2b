#include "steth/dsp_chain.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "steth/error.hpp"

namespace steth {

namespace {

std::string num(double v)
{
    std::string s = std::to_string(v);
    s.erase(s.find_last_not_of('0') + 1);
    if (!s.empty() && s.back() == '.')
        s.pop_back();
    return s;
}

void check_design(double freq_hz, double sample_rate, const char* what)
{
    if (!(sample_rate > 0.0))
        fail(ErrorCode::FilterDesign, "sample rate must be positive");
    if (!(freq_hz > 0.0) || !(freq_hz < sample_rate / 2.0))
        fail(ErrorCode::FilterDesign, std::string(what) + " " + num(freq_hz) +
                                          " Hz is outside (0, " + num(sample_rate / 2.0) +
                                          ") Hz");
}

} // namespace

bool is_supported_cutoff(double hz) noexcept
{
    return hz == 100.0 || hz == 1000.0;
}

void ChainConfig::validate() const
{
    if (!is_supported_cutoff(cutoff_hz))
        fail(ErrorCode::InvalidArgument,
             "cutoff must be 100 or 1000 Hz, got " + std::to_string(cutoff_hz));
    if (!(volume >= 0.0 && volume <= 1.0))
        fail(ErrorCode::InvalidArgument, "volume must lie in [0, 1], got " + num(volume));
    if (!(preamp_gain > 0.0) || !(filter_gain > 0.0) || !(power_gain > 0.0))
        fail(ErrorCode::InvalidArgument, "stage gains must be positive");
    if (!(full_scale > 0.0))
        fail(ErrorCode::InvalidArgument, "full scale must be positive");
    if (double(sample_rate) <= 2.0 * cutoff_hz)
        fail(ErrorCode::InvalidArgument, "sample rate " + std::to_string(sample_rate) +
                                             " Hz leaves no margin above 2 x " +
                                             std::to_string(cutoff_hz) + " Hz");
    if (!(dc_block_hz > 0.0) || !(dc_block_hz < cutoff_hz))
        fail(ErrorCode::InvalidArgument, "DC-block corner must lie in (0, cutoff)");
}

Biquad::Biquad(double b0, double b1, double b2, double a1, double a2)
    : m_b0(b0), m_b1(b1), m_b2(b2), m_a1(a1), m_a2(a2)
{}

std::array<std::complex<double>, 2> Biquad::poles() const
{
    // roots of z^2 + a1 z + a2
    std::complex<double> disc = std::sqrt(std::complex<double>(m_a1 * m_a1 - 4.0 * m_a2));
    return {(-m_a1 + disc) / 2.0, (-m_a1 - disc) / 2.0};
}

bool Biquad::stable() const
{
    auto p = poles();
    return std::abs(p[0]) < 1.0 && std::abs(p[1]) < 1.0;
}

std::complex<double> Biquad::response(double freq_hz, double sample_rate) const
{
    const double w = 2.0 * std::numbers::pi * freq_hz / sample_rate;
    const std::complex<double> z1 = std::polar(1.0, -w);
    const std::complex<double> z2 = z1 * z1;
    return (m_b0 + m_b1 * z1 + m_b2 * z2) / (1.0 + m_a1 * z1 + m_a2 * z2);
}

Biquad design_lowpass(double cutoff_hz, double gain, double sample_rate)
{
    check_design(cutoff_hz, sample_rate, "low-pass cutoff");
    if (!(gain > 0.0))
        fail(ErrorCode::FilterDesign, "filter gain must be positive");

    const double k = std::tan(std::numbers::pi * cutoff_hz / sample_rate);
    const double k2 = k * k;
    const double norm = 1.0 / (1.0 + std::numbers::sqrt2 * k + k2);
    const double b0 = gain * k2 * norm;
    return Biquad(b0, 2.0 * b0, b0, 2.0 * (k2 - 1.0) * norm,
                  (1.0 - std::numbers::sqrt2 * k + k2) * norm);
}

Biquad design_highpass1(double corner_hz, double sample_rate)
{
    check_design(corner_hz, sample_rate, "high-pass corner");
    const double k = std::tan(std::numbers::pi * corner_hz / sample_rate);
    const double b0 = 1.0 / (1.0 + k);
    return Biquad(b0, -b0, 0.0, (k - 1.0) / (k + 1.0), 0.0);
}

AudioBuffer preamplify(const AudioBuffer& buf, double gain)
{
    if (!(gain > 0.0))
        fail(ErrorCode::InvalidArgument, "preamp gain must be positive");
    std::vector<double> out(buf.samples());
    for (double& v : out)
        v *= gain;
    return AudioBuffer(buf.sample_rate(), std::move(out));
}

AudioBuffer filter_apply(const AudioBuffer& buf, Biquad& section)
{
    std::vector<double> out(buf.samples());
    for (double& v : out)
        v = section.process(v);
    return AudioBuffer(buf.sample_rate(), std::move(out));
}

AudioBuffer power_amplify(const AudioBuffer& buf, double volume, double power_gain,
                          double full_scale)
{
    if (!(volume >= 0.0 && volume <= 1.0))
        fail(ErrorCode::InvalidArgument, "volume must lie in [0, 1]");
    if (!(full_scale > 0.0))
        fail(ErrorCode::InvalidArgument, "full scale must be positive");
    const double g = volume * power_gain;
    std::vector<double> out(buf.samples());
    for (double& v : out)
        v = std::clamp(g * v, -full_scale, full_scale);
    return AudioBuffer(buf.sample_rate(), std::move(out));
}

std::uint16_t quantize_sample(double volts, double full_scale) noexcept
{
    // round half up; out-of-range voltages saturate like a SAR converter at the rails
    const double x = std::floor((volts + full_scale) / (2.0 * full_scale) * kMaxCode + 0.5);
    return static_cast<std::uint16_t>(std::clamp(x, 0.0, double(kMaxCode)));
}

double dequantize_code(std::uint16_t code, double full_scale) noexcept
{
    return double(code) / kMaxCode * 2.0 * full_scale - full_scale;
}

SampleBlock quantize_adc(const AudioBuffer& buf, double full_scale, std::uint64_t start_timestamp)
{
    if (!(full_scale > 0.0))
        fail(ErrorCode::InvalidArgument, "full scale must be positive");
    SampleBlock block;
    block.start_timestamp = start_timestamp;
    block.sample_rate = buf.sample_rate();
    block.codes.reserve(buf.size());
    for (double v : buf.samples())
        block.codes.push_back(quantize_sample(v, full_scale));
    return block;
}

AudioBuffer dequantize_dac(const SampleBlock& block, double full_scale)
{
    if (!(full_scale > 0.0))
        fail(ErrorCode::InvalidArgument, "full scale must be positive");
    block.validate();
    std::vector<double> out;
    out.reserve(block.codes.size());
    for (std::uint16_t c : block.codes)
        out.push_back(dequantize_code(c, full_scale));
    return AudioBuffer(block.sample_rate, std::move(out));
}

TransmitChain::TransmitChain(const ChainConfig& cfg)
    : m_cfg(cfg)
{
    m_cfg.validate();
    m_dc_block = design_highpass1(m_cfg.dc_block_hz, m_cfg.sample_rate);
    m_lowpass = design_lowpass(m_cfg.cutoff_hz, m_cfg.filter_gain, m_cfg.sample_rate);
}

void TransmitChain::reset() noexcept
{
    m_dc_block.reset();
    m_lowpass.reset();
}

void TransmitChain::reconfigure(const ChainConfig& cfg)
{
    cfg.validate();
    const bool refilter = cfg.cutoff_hz != m_cfg.cutoff_hz ||
                          cfg.filter_gain != m_cfg.filter_gain ||
                          cfg.sample_rate != m_cfg.sample_rate ||
                          cfg.dc_block_hz != m_cfg.dc_block_hz;
    m_cfg = cfg;
    if (refilter) {
        m_dc_block = design_highpass1(m_cfg.dc_block_hz, m_cfg.sample_rate);
        m_lowpass = design_lowpass(m_cfg.cutoff_hz, m_cfg.filter_gain, m_cfg.sample_rate);
    }
}

SampleBlock TransmitChain::process(const AudioBuffer& buf)
{
    if (buf.sample_rate() != m_cfg.sample_rate)
        fail(ErrorCode::InvalidArgument,
             "buffer rate " + std::to_string(buf.sample_rate()) +
                 " Hz does not match chain rate " + std::to_string(m_cfg.sample_rate) + " Hz");

    AudioBuffer x = filter_apply(buf, m_dc_block);
    x = preamplify(x, m_cfg.preamp_gain);
    x = filter_apply(x, m_lowpass);

    const double g = m_cfg.volume * m_cfg.power_gain;
    for (double v : x.samples())
        if (std::abs(g * v) > m_cfg.full_scale)
            ++m_clipped;
    x = power_amplify(x, m_cfg.volume, m_cfg.power_gain, m_cfg.full_scale);

    SampleBlock block = quantize_adc(x, m_cfg.full_scale, m_next_ts);
    m_next_ts += block.codes.size();
    return block;
}

SampleBlock run_transmit_chain(const AudioBuffer& buf, const ChainConfig& cfg)
{
    TransmitChain chain(cfg);
    return chain.process(buf);
}

} // namespace steth
