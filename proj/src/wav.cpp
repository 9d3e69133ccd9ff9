// Copyright 2026 The navae Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "navae/wav.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "navae/error.hpp"

namespace navae {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(v & 0xFF);
  out.push_back(v >> 8);
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back((v >> (8 * i)) & 0xFF);
}

void put_tag(std::vector<unsigned char>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

void write_file(const std::filesystem::path& path, std::uint16_t format,
                std::uint16_t bits, const std::vector<unsigned char>& payload,
                int sample_rate) {
  const std::uint16_t block_align = bits / 8;
  std::vector<unsigned char> out;
  out.reserve(44 + payload.size());
  put_tag(out, "RIFF");
  put_u32(out, static_cast<std::uint32_t>(36 + payload.size()));
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, format);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(sample_rate));
  put_u32(out, static_cast<std::uint32_t>(sample_rate) * block_align);
  put_u16(out, block_align);
  put_u16(out, bits);
  put_tag(out, "data");
  put_u32(out, static_cast<std::uint32_t>(payload.size()));
  out.insert(out.end(), payload.begin(), payload.end());

  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  os.write(reinterpret_cast<const char*>(out.data()),
           static_cast<std::streamsize>(out.size()));
  if (!os) throw DataError("failed writing " + path.string());
}

}  // namespace

Waveform load_wav(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)),
                                   std::istreambuf_iterator<char>());
  const std::string name = path.string();
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw DataError(name + ": not a RIFF/WAVE file");

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::size_t size = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size() && std::memcmp(chunk, "data", 4) != 0)
      throw DataError(name + ": truncated chunk");
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) throw DataError(name + ": short fmt chunk");
      const unsigned char* f = bytes.data() + body;
      format = read_u16(f);
      channels = read_u16(f + 2);
      rate = read_u32(f + 4);
      bits = read_u16(f + 14);
      if (format == kFormatExtensible) {
        if (size < 40) throw DataError(name + ": short extensible fmt chunk");
        format = read_u16(f + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      data_size = std::min(size, bytes.size() - body);
      break;
    }
    pos = body + size + (size & 1);
  }
  if (!have_fmt) throw DataError(name + ": missing fmt chunk");
  if (data == nullptr) throw DataError(name + ": missing data chunk");
  if (channels != 1)
    throw DataError(name + ": mono required, file has " +
                    std::to_string(channels) + " channels");
  if (rate != static_cast<std::uint32_t>(kSampleRate))
    throw DataError(name + ": 16 kHz required, file is " +
                    std::to_string(rate) + " Hz");

  Waveform wave;
  wave.sample_rate = static_cast<int>(rate);
  if (format == kFormatPcm && bits == 16) {
    const std::size_t n = data_size / 2;
    wave.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i)
      wave.samples[i] =
          static_cast<std::int16_t>(read_u16(data + 2 * i)) / 32768.0;
  } else if (format == kFormatFloat && bits == 32) {
    const std::size_t n = data_size / 4;
    wave.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const float v = std::bit_cast<float>(read_u32(data + 4 * i));
      if (!std::isfinite(v)) throw DataError(name + ": non-finite sample");
      wave.samples[i] = v;
    }
  } else {
    throw DataError(name + ": unsupported sample format (tag " +
                    std::to_string(format) + ", " + std::to_string(bits) +
                    " bits); 16-bit PCM or 32-bit float required");
  }
  return wave;
}

void save_wav(const std::filesystem::path& path, const Waveform& wave) {
  std::vector<unsigned char> payload;
  payload.reserve(wave.size() * 2);
  for (double v : wave.samples) {
    const double q = std::clamp(std::round(v * 32768.0), -32768.0, 32767.0);
    put_u16(payload, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  write_file(path, kFormatPcm, 16, payload, wave.sample_rate);
}

void save_wav_float(const std::filesystem::path& path, const Waveform& wave) {
  std::vector<unsigned char> payload;
  payload.reserve(wave.size() * 4);
  for (double v : wave.samples)
    put_u32(payload, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  write_file(path, kFormatFloat, 32, payload, wave.sample_rate);
}

}  // namespace navae
