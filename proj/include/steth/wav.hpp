#ifndef STETH_WAV_HPP_
#define STETH_WAV_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "steth/audio.hpp"

namespace steth {

/// Canonical RIFF/WAVE, PCM tag 1, mono, 16-bit little endian.
/// Volts map linearly with +full_scale at 32768 (saturating to 32767) and
/// -full_scale at -32768.
std::vector<std::uint8_t> encode_wav(const AudioBuffer& buf, double full_scale);
AudioBuffer decode_wav(std::span<const std::uint8_t> bytes, double full_scale);

void write_wav(const std::filesystem::path& path, const AudioBuffer& buf, double full_scale);
AudioBuffer read_wav(const std::filesystem::path& path, double full_scale);

std::int16_t volts_to_pcm16(double volts, double full_scale) noexcept;
double pcm16_to_volts(std::int16_t pcm, double full_scale) noexcept;

} // namespace steth

#endif
