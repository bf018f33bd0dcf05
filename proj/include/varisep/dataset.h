// include/varisep/dataset.h


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

#ifndef VARISEP_DATASET_H_
#define VARISEP_DATASET_H_

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "varisep/signal.h"
#include "varisep/wav.h"

namespace varisep {

struct MixtureExample {
  Signal mixture;
  std::vector<Signal> sources;  // scaled and truncated; they sum to mixture

  int speaker_count() const { return static_cast<int>(sources.size()); }
};

/// Truncates every source to the shortest, applies its gain (dB) and sums.
MixtureExample mix_sources(std::span<const Signal> sources,
                           std::span<const double> gains_db);

/// Number of distinct synthetic speaker profiles.
constexpr int kNumProfiles = 8;

/// A deterministic harmonic "speaker": 3 to 5 harmonics of a slowly
/// wandering fundamental, clustered around a profile-specific formant,
/// with syllable-rate amplitude modulation and a little noise. Different
/// profiles occupy different frequency regions, so they are nearly
/// uncorrelated. Peak amplitude stays at or below 0.9.
Signal synth_speaker(std::uint64_t seed, double duration_seconds, int profile,
                     int sample_rate = kDefaultSampleRate);

/// Derives an independent per-item seed.
std::uint64_t DeriveSeed(std::uint64_t seed, std::uint64_t index);

struct ManifestEntry {
  std::string mix;
  std::vector<std::string> sources;
  int k = 0;
  double dur = 0.0;
};

/// JSON lines: {"mix":..., "sources":[...], "k":int, "dur":float}.
std::vector<ManifestEntry> read_manifest(const std::string &path);
void write_manifest(const std::string &path, std::span<const ManifestEntry> entries);

/// Loads the WAVs of an entry; relative paths resolve against base_dir.
MixtureExample load_example(const ManifestEntry &entry, const std::string &base_dir);

/// Per-chunk selection probabilities: a chunk of class c gets weight
/// 1/chunk_counts[c], normalized to sum to 1. Chunks are laid out class by
/// class in the order of chunk_counts.
std::vector<double> build_sampler(std::span<const std::size_t> chunk_counts);

/// Weighted sampling with replacement over the table above.
class ChunkSampler {
 public:
  ChunkSampler(std::vector<std::size_t> chunk_counts, std::uint64_t seed);

  struct Draw {
    std::size_t cls;
    std::size_t index;  // within the class
  };
  Draw next();
  const std::vector<double> &table() const { return table_; }

 private:
  std::vector<std::size_t> counts_;
  std::vector<std::size_t> offsets_;
  std::vector<double> table_;
  std::mt19937_64 rng_;
  std::discrete_distribution<std::size_t> dist_;
};

struct DatasetConfig {
  int n_per_class = 5;
  int max_speakers = 5;
  std::uint64_t seed = 0;
  int sample_rate = kDefaultSampleRate;
  double min_seconds = 4.0;
  double max_seconds = 12.0;
  double gain_range_db = 2.5;
  WavEncoding encoding = WavEncoding::kFloat32;
};

/// Synthesizes n_per_class mixtures for every speaker count 2..max_speakers
/// and writes them as WAVs under out_dir along with out_dir/manifest.jsonl
/// (written last, atomically). Each source gets its own duration drawn from
/// [min_seconds, max_seconds]; the mixture is as long as the shortest.
std::vector<ManifestEntry> generate_dataset(const std::string &out_dir,
                                            const DatasetConfig &cfg);

/// The in-memory example generate_dataset writes for item `index`, with
/// sources already rounded to the storage encoding.
MixtureExample make_example(const DatasetConfig &cfg, int k, std::uint64_t index);

}  // namespace varisep

#endif  // VARISEP_DATASET_H_
