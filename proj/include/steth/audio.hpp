#ifndef STETH_AUDIO_HPP_
#define STETH_AUDIO_HPP_

#include <cstdint>
#include <span>
#include <vector>

namespace steth {

inline constexpr std::uint16_t kMaxCode = 4095;
inline constexpr std::uint16_t kMidCode = 2048;

/// Uniformly sampled mono signal in volts. Construction validates the
/// sample rate and rejects non-finite samples, so every live instance is
/// well formed.
class AudioBuffer
{
public:
    AudioBuffer(std::uint32_t sample_rate, std::vector<double> samples);

    std::uint32_t sample_rate() const noexcept { return m_rate; }
    const std::vector<double>& samples() const noexcept { return m_samples; }
    std::size_t size() const noexcept { return m_samples.size(); }
    bool empty() const noexcept { return m_samples.empty(); }
    double duration() const noexcept { return double(m_samples.size()) / m_rate; }
    double operator[](std::size_t i) const { return m_samples[i]; }

    friend bool operator==(const AudioBuffer&, const AudioBuffer&) = default;

private:
    std::uint32_t m_rate;
    std::vector<double> m_samples;
};

/// Run of 12-bit converter codes starting at an absolute sample index.
struct SampleBlock
{
    std::vector<std::uint16_t> codes;
    std::uint64_t start_timestamp = 0;
    std::uint32_t sample_rate = 4000;

    /// Throws InvalidArgument on a code above 4095 or a zero rate.
    void validate() const;

    friend bool operator==(const SampleBlock&, const SampleBlock&) = default;
};

double rms(std::span<const double> x);
double mean_square(std::span<const double> x);

} // namespace steth

#endif
