// include/varisep/signal.h


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

#ifndef VARISEP_SIGNAL_H_
#define VARISEP_SIGNAL_H_

#include <cstddef>
#include <span>
#include <vector>

namespace varisep {

constexpr int kDefaultSampleRate = 8000;

/// A mono waveform. Amplitudes are nominally in [-1, 1].
struct Signal {
  std::vector<double> samples;
  int sample_rate = kDefaultSampleRate;

  Signal() = default;
  Signal(std::vector<double> s, int rate) : samples(std::move(s)), sample_rate(rate) {}

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  double seconds() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
  std::span<const double> view() const { return samples; }
};

/// Throws kInvalidArgument for a non-positive rate and kNonFinite for
/// NaN/Inf samples.
void ValidateSignal(const Signal &s);

/// Chunking geometry in seconds; converted to samples by ChunkGeometry.
struct ChunkSpec {
  double chunk_seconds = 4.0;
  double hop_seconds = 2.0;
  double min_keep_seconds = 2.0;
};

struct ChunkGeometry {
  std::size_t chunk_len = 0;
  std::size_t hop_len = 0;
  std::size_t min_keep_len = 0;
};

/// Rounds the spec to whole samples and checks its invariants.
ChunkGeometry ResolveChunkSpec(const ChunkSpec &spec, int sample_rate);

struct Chunk {
  Signal data;             // exactly chunk_len samples
  std::size_t start = 0;   // offset in the source signal
  std::size_t pad_len = 0; // trailing zeros appended past the source end

  std::size_t valid_len() const { return data.size() - pad_len; }
};

/// Chunk start offsets (and pad lengths) for a signal of `total_len` samples.
/// Chunks start at 0, hop, 2*hop, ...; a trailing segment strictly longer
/// than min_keep (but shorter than a chunk) is padded and ends the list,
/// anything shorter or equal is dropped. The first chunk is always emitted
/// once total_len >= min_keep.
struct ChunkPlacement {
  std::size_t start;
  std::size_t pad_len;
};
std::vector<ChunkPlacement> PlanChunks(std::size_t total_len,
                                       const ChunkGeometry &geom);

std::vector<Chunk> chunk_signal(const Signal &s, const ChunkSpec &spec);

/// Cuts `s` at the given placements. Used to chunk sources with the exact
/// boundaries of their mixture.
std::vector<Chunk> chunk_at(const Signal &s,
                            std::span<const ChunkPlacement> placements,
                            std::size_t chunk_len);

/// Effective per-chunk blending weights used by overlap_add. Element c has
/// chunk_len entries; at each output sample the weights of all chunks that
/// cover it sum to 1.
std::vector<std::vector<double>> crossfade_weights(
    std::span<const std::size_t> starts, std::size_t chunk_len);

/// Stitches chunks back together. Overlaps are blended with a linear
/// crossfade, samples past total_len are dropped and samples no chunk covers
/// stay zero.
Signal overlap_add(std::span<const Chunk> chunks, std::size_t total_len);

/// 10*log10(sum(signal^2) / sum(reference^2)).
double energy_ratio_db(const Signal &signal, const Signal &reference);

}  // namespace varisep

#endif  // VARISEP_SIGNAL_H_
