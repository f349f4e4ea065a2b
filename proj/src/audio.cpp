#include "steth/error.hpp"

#include <cmath>
#include <numeric>

#include "steth/audio.hpp"

namespace steth {

const char* to_string(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::InvalidArgument: return "invalid argument";
    case ErrorCode::FilterDesign: return "filter design error";
    case ErrorCode::Io: return "I/O error";
    case ErrorCode::NotFound: return "file not found";
    case ErrorCode::UnsupportedFormat: return "unsupported format";
    case ErrorCode::UnsupportedChannels: return "unsupported channel count";
    case ErrorCode::UnsupportedBitDepth: return "unsupported bit depth";
    case ErrorCode::MalformedFile: return "malformed file";
    case ErrorCode::BadVersion: return "bad packet version";
    case ErrorCode::Truncated: return "truncated packet";
    case ErrorCode::LengthMismatch: return "packet length mismatch";
    case ErrorCode::BadCount: return "bad code count";
    case ErrorCode::BadFlags: return "bad packet flags";
    case ErrorCode::Encoding: return "encoding error";
    case ErrorCode::InsufficientData: return "insufficient data";
    case ErrorCode::Network: return "network error";
    case ErrorCode::Protocol: return "protocol error";
    case ErrorCode::Rejected: return "command rejected";
    }
    return "unknown error";
}

AudioBuffer::AudioBuffer(std::uint32_t sample_rate, std::vector<double> samples)
    : m_rate(sample_rate)
    , m_samples(std::move(samples))
{
    if (m_rate == 0)
        fail(ErrorCode::InvalidArgument, "sample rate must be positive");
    for (std::size_t i = 0; i < m_samples.size(); ++i) {
        if (!std::isfinite(m_samples[i]))
            fail(ErrorCode::InvalidArgument,
                 "non-finite sample at index " + std::to_string(i));
    }
}

void SampleBlock::validate() const
{
    if (sample_rate == 0)
        fail(ErrorCode::InvalidArgument, "sample rate must be positive");
    for (std::size_t i = 0; i < codes.size(); ++i) {
        if (codes[i] > kMaxCode)
            fail(ErrorCode::InvalidArgument, "code " + std::to_string(codes[i]) +
                                                 " at index " + std::to_string(i) +
                                                 " exceeds 12 bits");
    }
}

double mean_square(std::span<const double> x)
{
    if (x.empty())
        return 0.0;
    double acc = 0.0;
    for (double v : x)
        acc += v * v;
    return acc / double(x.size());
}

double rms(std::span<const double> x)
{
    return std::sqrt(mean_square(x));
}

} // namespace steth
