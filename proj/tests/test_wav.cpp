#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include <unistd.h>

#include "oracles.hpp"
#include "steth/error.hpp"
#include "steth/wav.hpp"

using namespace steth;
namespace fs = std::filesystem;

namespace {

void put16(std::vector<std::uint8_t>& b, std::uint32_t v)
{
    b.push_back(std::uint8_t(v));
    b.push_back(std::uint8_t(v >> 8));
}

void put32(std::vector<std::uint8_t>& b, std::uint32_t v)
{
    put16(b, v & 0xFFFF);
    put16(b, v >> 16);
}

void tag(std::vector<std::uint8_t>& b, const char* t)
{
    b.insert(b.end(), t, t + 4);
}

// Hand-assembled canonical header for arbitrary format fields.
std::vector<std::uint8_t> header(std::uint32_t rate, std::uint16_t channels, std::uint16_t bits,
                                 std::uint32_t data_bytes, std::uint16_t format = 1)
{
    std::vector<std::uint8_t> b;
    tag(b, "RIFF");
    put32(b, 36 + data_bytes);
    tag(b, "WAVE");
    tag(b, "fmt ");
    put32(b, 16);
    put16(b, format);
    put16(b, channels);
    put32(b, rate);
    put32(b, rate * channels * bits / 8);
    put16(b, std::uint16_t(channels * bits / 8));
    put16(b, bits);
    tag(b, "data");
    put32(b, data_bytes);
    return b;
}

ErrorCode decode_error(const std::vector<std::uint8_t>& bytes)
{
    try {
        decode_wav(bytes, 2.5);
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("decode accepted a bad file");
    return ErrorCode::InvalidArgument;
}

struct TempDir
{
    fs::path path = fs::temp_directory_path() / ("steth_wav_" + std::to_string(::getpid()));
    TempDir() { fs::create_directories(path); }
    ~TempDir() { fs::remove_all(path); }
};

} // namespace

TEST_CASE("header layout")
{
    const AudioBuffer x(4000, std::vector<double>(4000, 0.0));
    const auto bytes = encode_wav(x, 2.5);
    REQUIRE(bytes.size() == 44 + 8000);
    const auto expect = header(4000, 1, 16, 8000);
    CHECK(std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + 44) == expect);
    // RIFF size 36 + 8000
    CHECK((bytes[4] | bytes[5] << 8 | bytes[6] << 16 | bytes[7] << 24) == 8036);
    for (std::size_t i = 44; i < bytes.size(); ++i)
        REQUIRE(bytes[i] == 0);
}

TEST_CASE("PCM mapping")
{
    CHECK(volts_to_pcm16(0.0, 2.5) == 0);
    CHECK(volts_to_pcm16(2.5, 2.5) == 32767);
    CHECK(volts_to_pcm16(-2.5, 2.5) == -32768);
    CHECK(volts_to_pcm16(10.0, 2.5) == 32767);
    CHECK(volts_to_pcm16(-10.0, 2.5) == -32768);
    CHECK(volts_to_pcm16(1.25, 2.5) == 16384);
    CHECK(pcm16_to_volts(-32768, 2.5) == -2.5);

    const auto bytes = encode_wav(AudioBuffer(8000, {1.25, -2.5}), 2.5);
    CHECK(bytes[44] == 0x00);
    CHECK(bytes[45] == 0x40);
    CHECK(bytes[46] == 0x00);
    CHECK(bytes[47] == 0x80);
}

TEST_CASE("round trip within one LSB")
{
    const double fsv = 2.5;
    const double lsb = fsv / 32767;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        auto x = oracle::white_noise(5000 + seed * 7, 1.0, seed);
        for (double& v : x)
            v = std::clamp(v, -fsv, fsv * 32767 / 32768);
        const AudioBuffer a(std::uint32_t(4000 + seed), x);
        const AudioBuffer b = decode_wav(encode_wav(a, fsv), fsv);
        REQUIRE(b.size() == a.size());
        CHECK(b.sample_rate() == a.sample_rate());
        for (std::size_t i = 0; i < a.size(); ++i)
            REQUIRE(std::abs(a[i] - b[i]) <= lsb);
    }
}

TEST_CASE("files")
{
    TempDir tmp;
    const AudioBuffer x(4000, oracle::sine(37.0, 1.0, 4000.0, 4321));
    const fs::path p = tmp.path / "a.wav";
    write_wav(p, x, 2.5);
    CHECK(fs::file_size(p) == 44 + 2 * 4321);
    const AudioBuffer y = read_wav(p, 2.5);
    CHECK(y.size() == x.size());

    SUBCASE("identical inputs give identical bytes")
    {
        const fs::path q = tmp.path / "b.wav";
        write_wav(q, x, 2.5);
        std::ifstream a(p, std::ios::binary), b(q, std::ios::binary);
        const std::string sa((std::istreambuf_iterator<char>(a)), {});
        const std::string sb((std::istreambuf_iterator<char>(b)), {});
        CHECK(sa == sb);
    }
    SUBCASE("missing file")
    {
        try {
            read_wav(tmp.path / "nope.wav", 2.5);
            FAIL("read a missing file");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::NotFound);
        }
    }
    SUBCASE("unwritable path")
    {
        try {
            write_wav(tmp.path / "no_dir" / "x.wav", x, 2.5);
            FAIL("wrote into a missing directory");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::Io);
        }
    }
}

TEST_CASE("rejects non-canonical files")
{
    auto with_data = [](std::vector<std::uint8_t> h, std::size_t n) {
        h.resize(h.size() + n, 0);
        return h;
    };
    CHECK(decode_error(with_data(header(4000, 2, 16, 8), 8)) == ErrorCode::UnsupportedChannels);
    CHECK(decode_error(with_data(header(4000, 1, 8, 8), 8)) == ErrorCode::UnsupportedBitDepth);
    CHECK(decode_error(with_data(header(4000, 1, 16, 8, 3), 8)) ==
          ErrorCode::UnsupportedFormat);
    CHECK(decode_error(with_data(header(4000, 1, 16, 8, 0xFFFE), 8)) ==
          ErrorCode::UnsupportedFormat);
    // truncated data chunk
    CHECK(decode_error(with_data(header(4000, 1, 16, 8), 6)) == ErrorCode::MalformedFile);
    // odd data size for 16-bit samples
    CHECK(decode_error(with_data(header(4000, 1, 16, 7), 7)) == ErrorCode::MalformedFile);
    // not RIFF at all
    CHECK(decode_error({'R', 'I', 'F', 'X', 0, 0, 0, 0}) == ErrorCode::MalformedFile);
    CHECK(decode_error({}) == ErrorCode::MalformedFile);
    // zero sample rate
    CHECK(decode_error(with_data(header(0, 1, 16, 2), 2)) == ErrorCode::MalformedFile);

    SUBCASE("unknown chunks are skipped")
    {
        auto h = header(4000, 1, 16, 4);
        std::vector<std::uint8_t> b(h.begin(), h.begin() + 36);
        tag(b, "LIST");
        put32(b, 3);
        b.insert(b.end(), {1, 2, 3, 0}); // odd chunk plus pad byte
        b.insert(b.end(), h.begin() + 36, h.end());
        put16(b, 0x4000);
        put16(b, 0xC000);
        // fix RIFF size
        const std::uint32_t riff = std::uint32_t(b.size() - 8);
        std::memcpy(b.data() + 4, &riff, 4);
        const AudioBuffer x = decode_wav(b, 2.5);
        REQUIRE(x.size() == 2);
        CHECK(x[0] == doctest::Approx(1.25));
        CHECK(x[1] == doctest::Approx(-1.25));
    }
}
