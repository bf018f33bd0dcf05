// src/dataset.cc


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

#include "varisep/dataset.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>

#include "json.hpp"
#include "varisep/error.h"

namespace varisep {

namespace fs = std::filesystem;

namespace {

struct Profile {
  double f0_lo, f0_hi;  // Hz
  double formant;       // Hz, harmonics cluster around it
};

// Formants are interleaved so the first few profiles are far apart.
constexpr Profile kProfiles[kNumProfiles] = {
    {100, 125, 300},  {130, 155, 1700}, {160, 185, 3000}, {105, 130, 1000},
    {140, 165, 2350}, {115, 140, 650},  {170, 195, 2000}, {125, 150, 3400},
};

constexpr double kTargetRms = 0.1;

}  // namespace

std::uint64_t DeriveSeed(std::uint64_t seed, std::uint64_t index) {
  // splitmix64 over a combination of both inputs.
  std::uint64_t z = seed * 0x9E3779B97F4A7C15ULL + index + 0x632BE59BD9B4E019ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Signal synth_speaker(std::uint64_t seed, double duration_seconds, int profile,
                     int sample_rate) {
  if (profile < 0 || profile >= kNumProfiles)
    Fail(ErrorCode::kInvalidArgument, "speaker profile out of range");
  if (!(duration_seconds > 0.0) || sample_rate <= 0)
    Fail(ErrorCode::kInvalidArgument, "speaker duration and rate must be positive");
  const Profile &p = kProfiles[profile];
  std::mt19937_64 rng(DeriveSeed(seed, static_cast<std::uint64_t>(profile) + 1));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  constexpr double two_pi = 2.0 * std::numbers::pi;

  const double f0 = p.f0_lo + (p.f0_hi - p.f0_lo) * u(rng);
  const int num_harmonics = 3 + static_cast<int>(u(rng) * 3.0) % 3;
  const int first = std::max(
      1, static_cast<int>(std::lround(p.formant / f0)) - num_harmonics / 2);
  std::vector<double> amp(num_harmonics), phase(num_harmonics);
  for (int h = 0; h < num_harmonics; ++h) {
    amp[h] = 0.5 + 0.5 * u(rng);
    phase[h] = two_pi * u(rng);
  }
  const double vibrato_hz = 0.5 + u(rng), vibrato_phase = two_pi * u(rng);
  const double am_hz = 2.0 + 3.0 * u(rng), am_phase = two_pi * u(rng);
  const double nyquist = 0.5 * sample_rate;
  std::normal_distribution<double> noise(0.0, 0.003);

  const auto n = static_cast<std::size_t>(std::llround(duration_seconds * sample_rate));
  Signal s;
  s.sample_rate = sample_rate;
  s.samples.resize(n);
  double f0_phase = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    const double inst_f0 = f0 * (1.0 + 0.03 * std::sin(two_pi * vibrato_hz * t + vibrato_phase));
    f0_phase += two_pi * inst_f0 / sample_rate;
    double v = 0.0;
    for (int h = 0; h < num_harmonics; ++h) {
      const int order = first + h;
      if (order * f0 * 1.03 >= 0.95 * nyquist) continue;
      v += amp[h] * std::sin(order * f0_phase + phase[h]);
    }
    const double env = 0.6 + 0.4 * std::sin(two_pi * am_hz * t + am_phase);
    s.samples[i] = env * v + noise(rng);
  }

  double energy = 0.0, peak = 0.0;
  for (double v : s.samples) {
    energy += v * v;
    peak = std::max(peak, std::abs(v));
  }
  if (energy > 0.0) {
    double gain = kTargetRms / std::sqrt(energy / static_cast<double>(n));
    gain = std::min(gain, 0.9 / peak);
    for (double &v : s.samples) v *= gain;
  }
  return s;
}

MixtureExample mix_sources(std::span<const Signal> sources,
                           std::span<const double> gains_db) {
  if (sources.size() < 2)
    Fail(ErrorCode::kInvalidArgument, "a mixture needs at least two sources");
  if (gains_db.size() != sources.size())
    Fail(ErrorCode::kCountMismatch, "one gain per source is required");
  std::size_t len = sources.front().size();
  for (const Signal &s : sources) {
    if (s.sample_rate != sources.front().sample_rate)
      Fail(ErrorCode::kInvalidArgument, "sources have different sample rates");
    len = std::min(len, s.size());
  }
  MixtureExample ex;
  ex.mixture.sample_rate = sources.front().sample_rate;
  ex.mixture.samples.assign(len, 0.0);
  for (std::size_t j = 0; j < sources.size(); ++j) {
    const double g = std::pow(10.0, gains_db[j] / 20.0);
    Signal scaled;
    scaled.sample_rate = ex.mixture.sample_rate;
    scaled.samples.resize(len);
    for (std::size_t i = 0; i < len; ++i) {
      scaled.samples[i] = g * sources[j].samples[i];
      ex.mixture.samples[i] += scaled.samples[i];
    }
    ex.sources.push_back(std::move(scaled));
  }
  return ex;
}

std::vector<double> build_sampler(std::span<const std::size_t> chunk_counts) {
  if (chunk_counts.empty()) Fail(ErrorCode::kEmptyInput, "sampler needs at least one class");
  std::size_t total = 0;
  for (std::size_t c : chunk_counts) {
    if (c == 0) Fail(ErrorCode::kInvalidArgument, "sampler class with zero chunks");
    total += c;
  }
  const double classes = static_cast<double>(chunk_counts.size());
  std::vector<double> table;
  table.reserve(total);
  // 1/count per chunk, normalized by the number of classes.
  for (std::size_t c : chunk_counts)
    table.insert(table.end(), c, 1.0 / (static_cast<double>(c) * classes));
  return table;
}

ChunkSampler::ChunkSampler(std::vector<std::size_t> chunk_counts, std::uint64_t seed)
    : counts_(std::move(chunk_counts)),
      table_(build_sampler(counts_)),
      rng_(seed),
      dist_(table_.begin(), table_.end()) {
  offsets_.resize(counts_.size());
  std::exclusive_scan(counts_.begin(), counts_.end(), offsets_.begin(), std::size_t{0});
}

ChunkSampler::Draw ChunkSampler::next() {
  const std::size_t flat = dist_(rng_);
  const auto it = std::upper_bound(offsets_.begin(), offsets_.end(), flat);
  const auto cls = static_cast<std::size_t>(it - offsets_.begin()) - 1;
  return {cls, flat - offsets_[cls]};
}

std::vector<ManifestEntry> read_manifest(const std::string &path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorCode::kMissingFile, "cannot open manifest: " + path);
  std::vector<ManifestEntry> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ManifestEntry e;
      e.mix = j.at("mix").get<std::string>();
      e.sources = j.at("sources").get<std::vector<std::string>>();
      e.k = j.at("k").get<int>();
      e.dur = j.value("dur", 0.0);
      if (e.k != static_cast<int>(e.sources.size()))
        Fail(ErrorCode::kMalformedFile, path + ":" + std::to_string(line_no) +
                                            ": k does not match the number of sources");
      out.push_back(std::move(e));
    } catch (const nlohmann::json::exception &ex) {
      Fail(ErrorCode::kMalformedFile,
           path + ":" + std::to_string(line_no) + ": " + ex.what());
    }
  }
  return out;
}

void write_manifest(const std::string &path, std::span<const ManifestEntry> entries) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) Fail(ErrorCode::kUnwritable, "cannot write manifest: " + path);
    for (const ManifestEntry &e : entries) {
      nlohmann::json j;
      j["mix"] = e.mix;
      j["sources"] = e.sources;
      j["k"] = e.k;
      j["dur"] = e.dur;
      out << j.dump() << '\n';
    }
    if (!out) Fail(ErrorCode::kUnwritable, "write failed: " + path);
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) Fail(ErrorCode::kUnwritable, "cannot move manifest into place: " + path);
}

MixtureExample load_example(const ManifestEntry &entry, const std::string &base_dir) {
  auto resolve = [&base_dir](const std::string &p) {
    const fs::path path(p);
    return path.is_absolute() ? path.string() : (fs::path(base_dir) / path).string();
  };
  MixtureExample ex;
  ex.mixture = read_wav(resolve(entry.mix));
  for (const std::string &s : entry.sources) {
    ex.sources.push_back(read_wav(resolve(s)));
    if (ex.sources.back().size() != ex.mixture.size())
      Fail(ErrorCode::kLengthMismatch, "source length differs from mixture: " + s);
  }
  return ex;
}

namespace {

double RoundToEncoding(double x, WavEncoding enc) {
  if (enc == WavEncoding::kFloat32) return static_cast<double>(static_cast<float>(x));
  return QuantizePcm16(x) / 32768.0;
}

}  // namespace

MixtureExample make_example(const DatasetConfig &cfg, int k, std::uint64_t index) {
  if (k < 2 || k > kNumProfiles || k > cfg.max_speakers)
    Fail(ErrorCode::kInvalidArgument, "speaker count out of range for synthesis");
  const std::uint64_t ex_seed = DeriveSeed(cfg.seed, index);
  std::mt19937_64 rng(ex_seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);

  std::vector<int> profiles(static_cast<std::size_t>(
      std::min(std::max(cfg.max_speakers, k), kNumProfiles)));
  std::iota(profiles.begin(), profiles.end(), 0);
  std::shuffle(profiles.begin(), profiles.end(), rng);
  profiles.resize(static_cast<std::size_t>(k));

  std::vector<Signal> sources;
  std::vector<double> gains;
  for (int j = 0; j < k; ++j) {
    const double dur = cfg.min_seconds + (cfg.max_seconds - cfg.min_seconds) * u(rng);
    gains.push_back(cfg.gain_range_db * (2.0 * u(rng) - 1.0));
    sources.push_back(synth_speaker(DeriveSeed(ex_seed, static_cast<std::uint64_t>(j)),
                                    dur, profiles[static_cast<std::size_t>(j)],
                                    cfg.sample_rate));
  }
  MixtureExample ex = mix_sources(sources, gains);

  // Keep the sum clear of the PCM16 clip point, then round every source to
  // the storage grid and rebuild the mixture from the rounded sources.
  double peak = 0.0;
  for (double v : ex.mixture.samples) peak = std::max(peak, std::abs(v));
  const double headroom = peak > 0.95 ? 0.95 / peak : 1.0;
  std::fill(ex.mixture.samples.begin(), ex.mixture.samples.end(), 0.0);
  for (Signal &s : ex.sources) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      s.samples[i] = RoundToEncoding(headroom * s.samples[i], cfg.encoding);
      ex.mixture.samples[i] += s.samples[i];
    }
  }
  return ex;
}

std::vector<ManifestEntry> generate_dataset(const std::string &out_dir,
                                            const DatasetConfig &cfg) {
  if (cfg.n_per_class < 1 || cfg.max_speakers < 2 || cfg.max_speakers > kNumProfiles)
    Fail(ErrorCode::kInvalidArgument,
         "need n_per_class >= 1 and 2 <= max_speakers <= " + std::to_string(kNumProfiles));
  if (cfg.min_seconds <= 0.0 || cfg.max_seconds < cfg.min_seconds)
    Fail(ErrorCode::kInvalidArgument, "invalid duration range");
  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "wav", ec);
  if (ec) Fail(ErrorCode::kUnwritable, "cannot create output directory " + out_dir);

  std::vector<ManifestEntry> entries;
  std::uint64_t index = 0;
  for (int k = 2; k <= cfg.max_speakers; ++k) {
    for (int i = 0; i < cfg.n_per_class; ++i, ++index) {
      const MixtureExample ex = make_example(cfg, k, index);
      char stem[32];
      std::snprintf(stem, sizeof(stem), "%05llu_k%d",
                    static_cast<unsigned long long>(index), k);
      ManifestEntry e;
      e.k = k;
      e.dur = ex.mixture.seconds();
      e.mix = "wav/" + std::string(stem) + "_mix.wav";
      write_wav((fs::path(out_dir) / e.mix).string(), ex.mixture, cfg.encoding);
      for (int j = 0; j < k; ++j) {
        e.sources.push_back("wav/" + std::string(stem) + "_s" + std::to_string(j) + ".wav");
        write_wav((fs::path(out_dir) / e.sources.back()).string(),
                  ex.sources[static_cast<std::size_t>(j)], cfg.encoding);
      }
      entries.push_back(std::move(e));
    }
  }
  write_manifest((fs::path(out_dir) / "manifest.jsonl").string(), entries);
  return entries;
}

}  // namespace varisep
