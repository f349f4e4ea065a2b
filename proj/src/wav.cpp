#include "steth/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>
#include <string>

#include "steth/error.hpp"

namespace steth {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kBitsPerSample = 16;

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v)
{
    out.push_back(std::uint8_t(v));
    out.push_back(std::uint8_t(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i)
        out.push_back(std::uint8_t(v >> (8 * i)));
}

void put_tag(std::vector<std::uint8_t>& out, const char (&tag)[5])
{
    out.insert(out.end(), tag, tag + 4);
}

std::uint16_t get_u16(const std::uint8_t* p)
{
    return std::uint16_t(p[0] | (p[1] << 8));
}

std::uint32_t get_u32(const std::uint8_t* p)
{
    return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
           (std::uint32_t(p[3]) << 24);
}

bool tag_is(const std::uint8_t* p, const char* tag)
{
    return std::memcmp(p, tag, 4) == 0;
}

void check_scale(double full_scale)
{
    if (!(full_scale > 0.0))
        fail(ErrorCode::InvalidArgument, "full scale must be positive");
}

} // namespace

std::int16_t volts_to_pcm16(double volts, double full_scale) noexcept
{
    const double x = std::floor(volts / full_scale * 32768.0 + 0.5);
    return static_cast<std::int16_t>(std::clamp(x, -32768.0, 32767.0));
}

double pcm16_to_volts(std::int16_t pcm, double full_scale) noexcept
{
    return double(pcm) / 32768.0 * full_scale;
}

std::vector<std::uint8_t> encode_wav(const AudioBuffer& buf, double full_scale)
{
    check_scale(full_scale);
    const std::uint64_t data_bytes = std::uint64_t(buf.size()) * 2;
    if (data_bytes > 0xFFFFFFFFull - 36)
        fail(ErrorCode::InvalidArgument, "buffer too long for a RIFF file");

    std::vector<std::uint8_t> out;
    out.reserve(44 + data_bytes);
    put_tag(out, "RIFF");
    put_u32(out, std::uint32_t(36 + data_bytes));
    put_tag(out, "WAVE");
    put_tag(out, "fmt ");
    put_u32(out, 16);
    put_u16(out, kFormatPcm);
    put_u16(out, 1);
    put_u32(out, buf.sample_rate());
    put_u32(out, buf.sample_rate() * 2);
    put_u16(out, 2);
    put_u16(out, kBitsPerSample);
    put_tag(out, "data");
    put_u32(out, std::uint32_t(data_bytes));
    for (double v : buf.samples())
        put_u16(out, std::uint16_t(volts_to_pcm16(v, full_scale)));
    return out;
}

AudioBuffer decode_wav(std::span<const std::uint8_t> bytes, double full_scale)
{
    check_scale(full_scale);
    if (bytes.size() < 12 || !tag_is(bytes.data(), "RIFF") || !tag_is(bytes.data() + 8, "WAVE"))
        fail(ErrorCode::MalformedFile, "not a RIFF/WAVE file");
    const std::uint64_t riff_end = std::uint64_t(get_u32(bytes.data() + 4)) + 8;
    if (riff_end > bytes.size())
        fail(ErrorCode::MalformedFile, "RIFF size exceeds file length");

    std::optional<std::uint32_t> rate;
    std::size_t pos = 12;
    while (pos + 8 <= riff_end) {
        const std::uint8_t* hdr = bytes.data() + pos;
        const std::uint32_t size = get_u32(hdr + 4);
        const std::size_t body = pos + 8;
        if (body + std::uint64_t(size) > riff_end)
            fail(ErrorCode::MalformedFile, "chunk '" + std::string(hdr, hdr + 4) +
                                               "' runs past the end of the file");

        if (tag_is(hdr, "fmt ")) {
            if (size < 16)
                fail(ErrorCode::MalformedFile, "fmt chunk too short");
            const std::uint8_t* f = bytes.data() + body;
            const std::uint16_t tag = get_u16(f);
            const std::uint16_t channels = get_u16(f + 2);
            const std::uint32_t sr = get_u32(f + 4);
            const std::uint32_t byte_rate = get_u32(f + 8);
            const std::uint16_t align = get_u16(f + 12);
            const std::uint16_t bits = get_u16(f + 14);
            if (tag != kFormatPcm)
                fail(ErrorCode::UnsupportedFormat,
                     "format tag " + std::to_string(tag) + " is not PCM");
            if (channels != 1)
                fail(ErrorCode::UnsupportedChannels,
                     std::to_string(channels) + " channels, only mono is supported");
            if (bits != kBitsPerSample)
                fail(ErrorCode::UnsupportedBitDepth,
                     std::to_string(bits) + "-bit samples, only 16-bit is supported");
            if (sr == 0 || align != 2 || byte_rate != sr * 2)
                fail(ErrorCode::MalformedFile, "inconsistent fmt chunk");
            rate = sr;
        } else if (tag_is(hdr, "data")) {
            if (!rate)
                fail(ErrorCode::MalformedFile, "data chunk before fmt chunk");
            if (size % 2 != 0)
                fail(ErrorCode::MalformedFile, "data chunk holds a partial sample");
            std::vector<double> samples(size / 2);
            const std::uint8_t* d = bytes.data() + body;
            for (std::size_t i = 0; i < samples.size(); ++i)
                samples[i] = pcm16_to_volts(std::int16_t(get_u16(d + 2 * i)), full_scale);
            return AudioBuffer(*rate, std::move(samples));
        }
        pos = body + size + (size & 1);
    }
    fail(ErrorCode::MalformedFile, rate ? "no data chunk" : "no fmt chunk");
}

void write_wav(const std::filesystem::path& path, const AudioBuffer& buf, double full_scale)
{
    const std::vector<std::uint8_t> bytes = encode_wav(buf, full_scale);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        fail(ErrorCode::Io, "cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    out.close();
    if (!out)
        fail(ErrorCode::Io, "failed writing '" + path.string() + "'");
}

AudioBuffer read_wav(const std::filesystem::path& path, double full_scale)
{
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec))
        fail(ErrorCode::NotFound, "no such file '" + path.string() + "'");
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(ErrorCode::Io, "cannot open '" + path.string() + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    try {
        return decode_wav(bytes, full_scale);
    } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": " + e.what());
    }
}

} // namespace steth
