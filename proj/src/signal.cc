// src/signal.cc


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

#include "varisep/signal.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "varisep/error.h"

namespace varisep {

void ValidateSignal(const Signal &s) {
  if (s.sample_rate <= 0)
    Fail(ErrorCode::kInvalidArgument,
         "sample rate must be positive, got " + std::to_string(s.sample_rate));
  for (std::size_t i = 0; i < s.samples.size(); ++i) {
    if (!std::isfinite(s.samples[i]))
      Fail(ErrorCode::kNonFinite,
           "non-finite sample at index " + std::to_string(i));
  }
}

ChunkGeometry ResolveChunkSpec(const ChunkSpec &spec, int sample_rate) {
  if (sample_rate <= 0)
    Fail(ErrorCode::kInvalidArgument, "sample rate must be positive");
  if (!(spec.hop_seconds > 0.0) || spec.hop_seconds > spec.chunk_seconds)
    Fail(ErrorCode::kInvalidArgument,
         "chunk spec requires 0 < hop_seconds <= chunk_seconds");
  if (spec.min_keep_seconds < 0.0 ||
      spec.min_keep_seconds > spec.chunk_seconds)
    Fail(ErrorCode::kInvalidArgument,
         "chunk spec requires 0 <= min_keep_seconds <= chunk_seconds");
  ChunkGeometry g;
  g.chunk_len = static_cast<std::size_t>(std::llround(spec.chunk_seconds * sample_rate));
  g.hop_len = static_cast<std::size_t>(std::llround(spec.hop_seconds * sample_rate));
  g.min_keep_len = static_cast<std::size_t>(std::llround(spec.min_keep_seconds * sample_rate));
  if (g.hop_len == 0 || g.chunk_len == 0)
    Fail(ErrorCode::kInvalidArgument, "chunk spec rounds to zero samples");
  return g;
}

std::vector<ChunkPlacement> PlanChunks(std::size_t total_len,
                                       const ChunkGeometry &geom) {
  if (total_len < geom.min_keep_len || total_len == 0)
    Fail(ErrorCode::kTooShort,
         "signal of " + std::to_string(total_len) +
             " samples is shorter than the minimum of " +
             std::to_string(geom.min_keep_len));
  std::vector<ChunkPlacement> out;
  for (std::size_t start = 0; start < total_len; start += geom.hop_len) {
    const std::size_t remaining = total_len - start;
    if (remaining >= geom.chunk_len) {
      out.push_back({start, 0});
      continue;
    }
    // Trailing segment: keep only if strictly longer than min_keep. The
    // very first chunk is kept regardless so that any admissible signal
    // yields at least one chunk.
    if (remaining > geom.min_keep_len || start == 0)
      out.push_back({start, geom.chunk_len - remaining});
    break;
  }
  return out;
}

std::vector<Chunk> chunk_at(const Signal &s,
                            std::span<const ChunkPlacement> placements,
                            std::size_t chunk_len) {
  std::vector<Chunk> chunks;
  chunks.reserve(placements.size());
  for (const ChunkPlacement &p : placements) {
    if (p.start > s.size())
      Fail(ErrorCode::kInvalidArgument, "chunk start beyond signal end");
    Chunk c;
    c.start = p.start;
    c.pad_len = p.pad_len;
    c.data.sample_rate = s.sample_rate;
    c.data.samples.assign(chunk_len, 0.0);
    const std::size_t n = std::min(chunk_len, s.size() - p.start);
    std::copy_n(s.samples.begin() + static_cast<std::ptrdiff_t>(p.start), n,
                c.data.samples.begin());
    chunks.push_back(std::move(c));
  }
  return chunks;
}

std::vector<Chunk> chunk_signal(const Signal &s, const ChunkSpec &spec) {
  const ChunkGeometry geom = ResolveChunkSpec(spec, s.sample_rate);
  const auto plan = PlanChunks(s.size(), geom);
  return chunk_at(s, plan, geom.chunk_len);
}

namespace {

void CheckStarts(std::span<const std::size_t> starts) {
  for (std::size_t c = 1; c < starts.size(); ++c) {
    if (starts[c] <= starts[c - 1])
      Fail(ErrorCode::kInvalidArgument,
           "chunk starts must be strictly increasing");
  }
}

// Length of the region at the head of a chunk starting at `start` that is
// already covered by earlier chunks.
std::size_t OverlapLen(std::size_t covered_end, std::size_t start,
                       std::size_t chunk_len) {
  if (covered_end <= start) return 0;
  return std::min(covered_end - start, chunk_len);
}

}  // namespace

std::vector<std::vector<double>> crossfade_weights(
    std::span<const std::size_t> starts, std::size_t chunk_len) {
  CheckStarts(starts);
  std::vector<std::vector<double>> w(starts.size(),
                                     std::vector<double>(chunk_len, 0.0));
  std::size_t covered_end = 0;
  for (std::size_t c = 0; c < starts.size(); ++c) {
    const std::size_t s = starts[c];
    const std::size_t overlap = OverlapLen(covered_end, s, chunk_len);
    for (std::size_t i = 0; i < chunk_len; ++i) {
      if (i >= overlap) {
        w[c][i] = 1.0;
        continue;
      }
      const double ramp =
          static_cast<double>(i + 1) / static_cast<double>(overlap + 1);
      w[c][i] = ramp;
      const std::size_t pos = s + i;
      for (std::size_t d = 0; d < c; ++d) {
        if (starts[d] <= pos && pos < starts[d] + chunk_len)
          w[d][pos - starts[d]] *= 1.0 - ramp;
      }
    }
    covered_end = std::max(covered_end, s + chunk_len);
  }
  return w;
}

Signal overlap_add(std::span<const Chunk> chunks, std::size_t total_len) {
  Signal out;
  out.samples.assign(total_len, 0.0);
  if (chunks.empty()) return out;
  out.sample_rate = chunks.front().data.sample_rate;
  const std::size_t chunk_len = chunks.front().data.size();
  for (std::size_t c = 0; c < chunks.size(); ++c) {
    if (chunks[c].data.size() != chunk_len)
      Fail(ErrorCode::kLengthMismatch, "inconsistent chunk lengths");
    if (c > 0 && chunks[c].start <= chunks[c - 1].start)
      Fail(ErrorCode::kInvalidArgument,
           "chunk starts must be strictly increasing");
  }

  std::vector<double> buf(
      std::max(total_len, chunks.back().start + chunk_len), 0.0);
  std::size_t covered_end = 0;
  for (const Chunk &chunk : chunks) {
    const std::size_t s = chunk.start;
    const std::size_t overlap = OverlapLen(covered_end, s, chunk_len);
    const std::vector<double> &x = chunk.data.samples;
    for (std::size_t i = 0; i < overlap; ++i) {
      const double ramp =
          static_cast<double>(i + 1) / static_cast<double>(overlap + 1);
      // Written as a lerp so equal inputs reproduce exactly.
      buf[s + i] += ramp * (x[i] - buf[s + i]);
    }
    std::copy(x.begin() + static_cast<std::ptrdiff_t>(overlap), x.end(),
              buf.begin() + static_cast<std::ptrdiff_t>(s + overlap));
    covered_end = std::max(covered_end, s + chunk_len);
  }
  std::copy_n(buf.begin(), total_len, out.samples.begin());
  return out;
}

double energy_ratio_db(const Signal &signal, const Signal &reference) {
  if (signal.empty() || reference.empty())
    Fail(ErrorCode::kEmptyInput, "energy ratio of an empty signal");
  double num = 0.0, den = 0.0;
  for (double v : signal.samples) num += v * v;
  for (double v : reference.samples) den += v * v;
  if (den == 0.0)
    Fail(ErrorCode::kZeroEnergy, "reference signal has zero energy");
  return 10.0 * std::log10(num / den);
}

}  // namespace varisep
