// include/varisep/pipeline.h


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

#ifndef VARISEP_PIPELINE_H_
#define VARISEP_PIPELINE_H_

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "varisep/signal.h"

namespace varisep {

/// What the inference pipeline needs from a model: a distribution over the
/// speaker count and a decoder for a given count. Both see one chunk at a
/// time.
class Separator {
 public:
  virtual ~Separator() = default;
  virtual int max_speakers() const = 0;
  /// Probabilities for counts 1..max_speakers (index 0 is one speaker).
  virtual std::vector<double> count_probs(const Chunk &chunk) = 0;
  /// Exactly k channels, each chunk-length.
  virtual std::vector<Signal> decode(const Chunk &chunk, int k) = 0;
};

/// Majority vote over per-chunk argmax counts. Ties go to the larger summed
/// probability, then to the smaller count. Returns a count in 1..K.
int vote_count(std::span<const std::vector<double>> per_chunk_probs);

/// Pearson correlation; 0 when either side has zero variance.
double pearson(std::span<const double> a, std::span<const double> b);

/// Channel order for the current chunk that best continues the previous
/// one: result[i] is the current channel placed at output position i.
std::vector<int> match_overlap(std::span<const Signal> prev_overlap,
                               std::span<const Signal> cur_overlap);

/// Streaming channel reordering plus the per-channel chunk buffers that
/// overlap_add consumes.
class StitchState {
 public:
  explicit StitchState(int num_channels);

  /// Reorders `channels` against the region they share with the previously
  /// committed chunk (valid samples only) and commits them. Returns the
  /// order applied.
  std::vector<int> push(std::size_t start, std::size_t pad_len,
                        std::vector<Signal> channels);

  const std::vector<int> &channel_order() const { return channel_order_; }
  /// Output channel c stitched to total_len samples.
  std::vector<Signal> finish(std::size_t total_len) const;

 private:
  std::vector<std::vector<Chunk>> committed_;  // per output channel
  std::vector<int> channel_order_;
};

struct SeparationResult {
  std::vector<Signal> sources;
  int pred_count = 0;
  std::vector<std::vector<double>> chunk_probs;
};

/// Chunk, vote on the count, decode every chunk with the winning head,
/// reorder channels through the overlaps and overlap-add back to the
/// mixture length.
SeparationResult separate_full(const Signal &mixture, Separator &sep,
                               const ChunkSpec &spec = {});

/// As separate_full but with the count supplied (oracle counting).
SeparationResult separate_with_count(const Signal &mixture, Separator &sep,
                                     int count, const ChunkSpec &spec = {});

/// Answers with ground truth: one-hot count probabilities and the reference
/// sources cut at the chunk's position. With a shuffle seed the channel
/// order of every decoded chunk is randomly permuted.
class OracleSeparator : public Separator {
 public:
  OracleSeparator(std::vector<Signal> refs, int max_speakers,
                  std::optional<std::uint64_t> shuffle_seed = std::nullopt);

  int max_speakers() const override { return max_speakers_; }
  std::vector<double> count_probs(const Chunk &chunk) override;
  std::vector<Signal> decode(const Chunk &chunk, int k) override;

 private:
  std::vector<Signal> refs_;
  int max_speakers_;
  std::optional<std::mt19937_64> shuffle_;
};

}  // namespace varisep

#endif  // VARISEP_PIPELINE_H_
