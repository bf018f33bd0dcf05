// src/pipeline.cc


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

#include "varisep/pipeline.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "varisep/assignment.h"
#include "varisep/error.h"

namespace varisep {

int vote_count(std::span<const std::vector<double>> per_chunk_probs) {
  if (per_chunk_probs.empty())
    Fail(ErrorCode::kEmptyInput, "vote over zero chunks");
  const std::size_t k = per_chunk_probs.front().size();
  if (k == 0) Fail(ErrorCode::kInvalidArgument, "empty probability vector");
  std::vector<int> votes(k, 0);
  std::vector<double> mass(k, 0.0);
  for (const auto &p : per_chunk_probs) {
    if (p.size() != k)
      Fail(ErrorCode::kInvalidArgument, "probability vectors differ in length");
    // max_element keeps the first maximum, i.e. the smaller count.
    ++votes[static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin())];
    for (std::size_t c = 0; c < k; ++c) mass[c] += p[c];
  }
  std::size_t best = 0;
  for (std::size_t c = 1; c < k; ++c) {
    if (votes[c] > votes[best] || (votes[c] == votes[best] && mass[c] > mass[best]))
      best = c;
  }
  return static_cast<int>(best) + 1;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    Fail(ErrorCode::kLengthMismatch, "pearson needs equal lengths");
  if (a.empty()) return 0.0;
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a[i] - ma, y = b[i] - mb;
    ab += x * y;
    aa += x * x;
    bb += y * y;
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return ab / std::sqrt(aa * bb);
}

std::vector<int> match_overlap(std::span<const Signal> prev_overlap,
                               std::span<const Signal> cur_overlap) {
  if (prev_overlap.size() != cur_overlap.size())
    Fail(ErrorCode::kCountMismatch,
         "overlap matching needs equal channel counts, got " +
             std::to_string(prev_overlap.size()) + " and " +
             std::to_string(cur_overlap.size()));
  const auto n = static_cast<Eigen::Index>(prev_overlap.size());
  if (n == 0) return {};
  Eigen::MatrixXd corr(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      corr(i, j) = pearson(prev_overlap[static_cast<std::size_t>(i)].view(),
                           cur_overlap[static_cast<std::size_t>(j)].view());
  return solve_assignment(corr).row_to_col;
}

StitchState::StitchState(int num_channels)
    : committed_(static_cast<std::size_t>(num_channels)) {
  channel_order_.resize(static_cast<std::size_t>(num_channels));
  std::iota(channel_order_.begin(), channel_order_.end(), 0);
}

std::vector<int> StitchState::push(std::size_t start, std::size_t pad_len,
                                   std::vector<Signal> channels) {
  const std::size_t n = committed_.size();
  if (channels.size() != n)
    Fail(ErrorCode::kCountMismatch,
         "chunk has " + std::to_string(channels.size()) + " channels, expected " +
             std::to_string(n));
  const std::size_t chunk_len = channels.front().size();
  for (const Signal &c : channels)
    if (c.size() != chunk_len)
      Fail(ErrorCode::kLengthMismatch, "channels of one chunk differ in length");

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  if (n > 1 && !committed_.front().empty()) {
    const Chunk &prev = committed_.front().back();
    if (start <= prev.start)
      Fail(ErrorCode::kInvalidArgument, "chunk starts must be strictly increasing");
    const std::size_t prev_end = prev.start + prev.valid_len();
    const std::size_t cur_end = start + (chunk_len - pad_len);
    const std::size_t shared_end = std::min(prev_end, cur_end);
    if (shared_end > start) {
      const std::size_t len = shared_end - start;
      const std::size_t prev_off = start - prev.start;
      std::vector<Signal> prev_seg(n), cur_seg(n);
      for (std::size_t c = 0; c < n; ++c) {
        const auto &p = committed_[c].back().data.samples;
        prev_seg[c].samples.assign(p.begin() + static_cast<std::ptrdiff_t>(prev_off),
                                   p.begin() + static_cast<std::ptrdiff_t>(prev_off + len));
        const auto &q = channels[c].samples;
        cur_seg[c].samples.assign(q.begin(), q.begin() + static_cast<std::ptrdiff_t>(len));
      }
      order = match_overlap(prev_seg, cur_seg);
    }
  }
  for (std::size_t out = 0; out < n; ++out) {
    Chunk chunk;
    chunk.start = start;
    chunk.pad_len = pad_len;
    chunk.data = std::move(channels[static_cast<std::size_t>(order[out])]);
    committed_[out].push_back(std::move(chunk));
  }
  channel_order_ = order;
  return order;
}

std::vector<Signal> StitchState::finish(std::size_t total_len) const {
  std::vector<Signal> out;
  out.reserve(committed_.size());
  for (const auto &chunks : committed_) out.push_back(overlap_add(chunks, total_len));
  return out;
}

namespace {

void CheckProbs(const std::vector<double> &p, int max_speakers) {
  if (static_cast<int>(p.size()) != max_speakers)
    Fail(ErrorCode::kInvalidArgument, "count_probs returned the wrong number of classes");
  double total = 0.0;
  for (double v : p) {
    if (!(v >= 0.0)) Fail(ErrorCode::kNonFinite, "count_probs returned a negative or NaN value");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9)
    Fail(ErrorCode::kNonFinite, "count_probs does not sum to 1");
}

SeparationResult Decode(const Signal &mixture, Separator &sep, int count,
                        const std::vector<Chunk> &chunks) {
  if (count < 1 || count > sep.max_speakers())
    Fail(ErrorCode::kInvalidArgument, "speaker count outside the separator's range");
  SeparationResult result;
  result.pred_count = count;
  StitchState state(count);
  for (const Chunk &chunk : chunks) {
    std::vector<Signal> channels = sep.decode(chunk, count);
    if (static_cast<int>(channels.size()) != count)
      Fail(ErrorCode::kCountMismatch, "decode returned the wrong number of channels");
    for (const Signal &c : channels)
      if (c.size() != chunk.data.size())
        Fail(ErrorCode::kLengthMismatch, "decode returned a channel of the wrong length");
    state.push(chunk.start, chunk.pad_len, std::move(channels));
  }
  result.sources = state.finish(mixture.size());
  for (Signal &s : result.sources) s.sample_rate = mixture.sample_rate;
  return result;
}

}  // namespace

SeparationResult separate_full(const Signal &mixture, Separator &sep,
                               const ChunkSpec &spec) {
  const std::vector<Chunk> chunks = chunk_signal(mixture, spec);
  std::vector<std::vector<double>> probs;
  probs.reserve(chunks.size());
  for (const Chunk &chunk : chunks) {
    probs.push_back(sep.count_probs(chunk));
    CheckProbs(probs.back(), sep.max_speakers());
  }
  const int count = vote_count(probs);
  SeparationResult result = Decode(mixture, sep, count, chunks);
  result.chunk_probs = std::move(probs);
  return result;
}

SeparationResult separate_with_count(const Signal &mixture, Separator &sep,
                                     int count, const ChunkSpec &spec) {
  return Decode(mixture, sep, count, chunk_signal(mixture, spec));
}

OracleSeparator::OracleSeparator(std::vector<Signal> refs, int max_speakers,
                                 std::optional<std::uint64_t> shuffle_seed)
    : refs_(std::move(refs)), max_speakers_(max_speakers) {
  if (refs_.empty() || static_cast<int>(refs_.size()) > max_speakers_)
    Fail(ErrorCode::kInvalidArgument, "oracle needs 1..max_speakers references");
  if (shuffle_seed) shuffle_.emplace(*shuffle_seed);
}

std::vector<double> OracleSeparator::count_probs(const Chunk &) {
  std::vector<double> p(static_cast<std::size_t>(max_speakers_), 0.0);
  p[refs_.size() - 1] = 1.0;
  return p;
}

std::vector<Signal> OracleSeparator::decode(const Chunk &chunk, int k) {
  const ChunkPlacement at[] = {{chunk.start, chunk.pad_len}};
  std::vector<Signal> out;
  for (int c = 0; c < k; ++c) {
    if (c < static_cast<int>(refs_.size())) {
      out.push_back(chunk_at(refs_[static_cast<std::size_t>(c)], at, chunk.data.size())
                        .front().data);
    } else {
      out.emplace_back(std::vector<double>(chunk.data.size(), 0.0),
                       chunk.data.sample_rate);
    }
  }
  if (shuffle_) std::shuffle(out.begin(), out.end(), *shuffle_);
  return out;
}

}  // namespace varisep
