// src/wav.cc


// Copyright 2026  The varisep Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "varisep/wav.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include "varisep/error.h"

namespace varisep {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t ReadU16(const std::uint8_t *p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t ReadU32(const std::uint8_t *p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

void PutU16(std::vector<std::uint8_t> *out, std::uint16_t v) {
  out->push_back(static_cast<std::uint8_t>(v & 0xff));
  out->push_back(static_cast<std::uint8_t>(v >> 8));
}

void PutU32(std::vector<std::uint8_t> *out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i)
    out->push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void PutTag(std::vector<std::uint8_t> *out, const char *tag) {
  out->insert(out->end(), tag, tag + 4);
}

}  // namespace

int QuantizePcm16(double x) {
  const double clamped = std::clamp(x, -1.0, 32767.0 / 32768.0);
  return static_cast<int>(std::lround(clamped * 32768.0));
}

Signal read_wav(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    Fail(ErrorCode::kMissingFile, "cannot open wav file: " + path);
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                        std::istreambuf_iterator<char>()};
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    Fail(ErrorCode::kMalformedFile, "not a RIFF/WAVE file: " + path);

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const std::uint8_t *data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t *hdr = bytes.data() + pos;
    const std::size_t size = ReadU32(hdr + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) {
      // Tolerate a truncated data chunk; anything else is corrupt.
      if (std::memcmp(hdr, "data", 4) != 0)
        Fail(ErrorCode::kMalformedFile, "truncated chunk in " + path);
    }
    const std::size_t avail = std::min(size, bytes.size() - body);
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (avail < 16) Fail(ErrorCode::kMalformedFile, "short fmt chunk in " + path);
      const std::uint8_t *f = bytes.data() + body;
      format = ReadU16(f);
      channels = ReadU16(f + 2);
      rate = ReadU32(f + 4);
      bits = ReadU16(f + 14);
      if (format == kFormatExtensible) {
        if (avail < 26)
          Fail(ErrorCode::kMalformedFile, "short extensible fmt chunk in " + path);
        format = ReadU16(f + 24);  // first two bytes of the subformat GUID
      }
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data = bytes.data() + body;
      data_size = avail;
    }
    pos = body + size + (size & 1);
  }
  if (!have_fmt || data == nullptr)
    Fail(ErrorCode::kMalformedFile, "missing fmt or data chunk in " + path);
  if (channels != 1)
    Fail(ErrorCode::kMultiChannel,
         path + " has " + std::to_string(channels) + " channels, expected 1");
  if (rate == 0) Fail(ErrorCode::kMalformedFile, "zero sample rate in " + path);

  Signal s;
  s.sample_rate = static_cast<int>(rate);
  if (format == kFormatPcm && bits == 16) {
    const std::size_t n = data_size / 2;
    s.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto code = static_cast<std::int16_t>(ReadU16(data + 2 * i));
      s.samples[i] = code / 32768.0;
    }
  } else if (format == kFormatFloat && bits == 32) {
    const std::size_t n = data_size / 4;
    s.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const float v = std::bit_cast<float>(ReadU32(data + 4 * i));
      if (!std::isfinite(v))
        Fail(ErrorCode::kNonFinite, "non-finite sample in " + path);
      s.samples[i] = v;
    }
  } else {
    Fail(ErrorCode::kUnsupportedEncoding,
         path + ": format " + std::to_string(format) + " with " +
             std::to_string(bits) + " bits is not PCM16 or float32");
  }
  return s;
}

void write_wav(const std::string &path, const Signal &s, WavEncoding encoding) {
  ValidateSignal(s);
  const bool pcm = encoding == WavEncoding::kPcm16;
  const std::uint16_t bits = pcm ? 16 : 32;
  const std::uint16_t block = bits / 8;
  const auto data_size = static_cast<std::uint32_t>(s.size() * block);

  std::vector<std::uint8_t> out;
  out.reserve(44 + data_size);
  PutTag(&out, "RIFF");
  PutU32(&out, 36 + data_size);
  PutTag(&out, "WAVE");
  PutTag(&out, "fmt ");
  PutU32(&out, 16);
  PutU16(&out, pcm ? kFormatPcm : kFormatFloat);
  PutU16(&out, 1);
  PutU32(&out, static_cast<std::uint32_t>(s.sample_rate));
  PutU32(&out, static_cast<std::uint32_t>(s.sample_rate) * block);
  PutU16(&out, block);
  PutU16(&out, bits);
  PutTag(&out, "data");
  PutU32(&out, data_size);
  for (double x : s.samples) {
    if (pcm)
      PutU16(&out, static_cast<std::uint16_t>(
                       static_cast<std::int16_t>(QuantizePcm16(x))));
    else
      PutU32(&out, std::bit_cast<std::uint32_t>(static_cast<float>(x)));
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) Fail(ErrorCode::kUnwritable, "cannot write wav file: " + path);
  f.write(reinterpret_cast<const char *>(out.data()),
          static_cast<std::streamsize>(out.size()));
  if (!f) Fail(ErrorCode::kUnwritable, "write failed: " + path);
}

}  // namespace varisep
