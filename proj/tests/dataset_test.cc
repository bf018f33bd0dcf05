// tests/dataset_test.cc


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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <numeric>

#include "doctest.h"
#include "varisep/dataset.h"
#include "varisep/error.h"
#include "varisep/pipeline.h"

using namespace varisep;
namespace fs = std::filesystem;

namespace {

std::string FreshDir(const std::string &name) {
  const fs::path p = fs::temp_directory_path() / "varisep_dataset_test" / name;
  fs::remove_all(p);
  return p.string();
}

std::string Slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("mix_sources") {
  const Signal a({0.1, 0.2, 0.3, 0.4}, 8000), b({-0.1, 0.5, 0.0, 0.25}, 8000);
  const Signal srcs[] = {a, b};
  const double unit[] = {0.0, 0.0};
  MixtureExample ex = mix_sources(srcs, unit);
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(ex.mixture.samples[i] == a.samples[i] + b.samples[i]);
  CHECK(ex.speaker_count() == 2);

  const Signal long3 = synth_speaker(1, 3.0, 0), long5 = synth_speaker(2, 5.0, 1);
  const Signal uneven[] = {long3, long5};
  ex = mix_sources(uneven, unit);
  CHECK(ex.mixture.size() == 24000);
  CHECK(ex.sources[1].size() == 24000);

  const double halve[] = {0.0, -6.02};
  ex = mix_sources(uneven, halve);
  for (std::size_t i = 0; i < 24000; i += 997) {
    CHECK(ex.sources[1].samples[i] == doctest::Approx(0.5 * long5.samples[i]).epsilon(1e-3));
    CHECK(std::abs(ex.mixture.samples[i] - ex.sources[0].samples[i] - ex.sources[1].samples[i]) < 1e-9);
  }

  const Signal one[] = {a};
  const double g1[] = {0.0};
  CHECK_THROWS_AS(mix_sources(one, g1), Error);
  const Signal other_rate({0.1}, 16000);
  const Signal mismatched[] = {a, other_rate};
  CHECK_THROWS_AS(mix_sources(mismatched, unit), Error);
}

TEST_CASE("synth_speaker") {
  const Signal x = synth_speaker(5, 4.0, 2), y = synth_speaker(5, 4.0, 2);
  CHECK(x.samples == y.samples);
  CHECK(x.size() == 32000);
  CHECK(synth_speaker(6, 4.0, 2).samples != x.samples);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    for (int p = 0; p < kNumProfiles; ++p) {
      const Signal s = synth_speaker(seed, 4.0, p);
      double peak = 0.0;
      for (double v : s.samples) peak = std::max(peak, std::abs(v));
      CHECK(peak <= 0.9);
      CHECK(peak > 0.05);
      for (int q = p + 1; q < kNumProfiles; ++q) {
        const Signal t = synth_speaker(seed + 100, 4.0, q);
        CHECK(std::abs(pearson(s.view(), t.view())) < 0.2);
      }
    }
  }
  CHECK_THROWS_AS(synth_speaker(0, 4.0, kNumProfiles), Error);
}

TEST_CASE("build_sampler: class totals") {
  const std::size_t counts[] = {24773, 19066, 15986, 13809};
  const std::vector<double> table = build_sampler(counts);
  REQUIRE(table.size() == 24773 + 19066 + 15986 + 13809);
  std::size_t off = 0;
  for (std::size_t c : counts) {
    double total = 0.0;
    for (std::size_t i = 0; i < c; ++i) total += table[off + i];
    CHECK(total == doctest::Approx(0.25).epsilon(1e-12));
    off += c;
  }
  const std::size_t equal[] = {3, 3};
  for (double w : build_sampler(equal)) CHECK(w == doctest::Approx(1.0 / 6.0));
  const std::size_t zero[] = {3, 0};
  CHECK_THROWS_AS(build_sampler(zero), Error);
}

TEST_CASE("ChunkSampler: empirical balance") {
  ChunkSampler sampler({24773, 19066, 15986, 13809}, 0);
  std::vector<int> hits(4, 0);
  for (int i = 0; i < 100000; ++i) {
    const auto d = sampler.next();
    REQUIRE(d.cls < 4);
    ++hits[d.cls];
  }
  for (int h : hits) CHECK(std::abs(h / 100000.0 - 0.25) <= 0.01);
}

TEST_CASE("manifest round trip and errors") {
  const std::string dir = FreshDir("manifest");
  fs::create_directories(dir);
  const std::vector<ManifestEntry> entries = {
      {"a.wav", {"a0.wav", "a1.wav"}, 2, 4.5}, {"/abs/b.wav", {"b0.wav"}, 1, 2.0}};
  const std::string path = dir + "/m.jsonl";
  write_manifest(path, entries);
  const auto back = read_manifest(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].mix == "a.wav");
  CHECK(back[0].sources == entries[0].sources);
  CHECK(back[1].k == 1);
  CHECK(back[1].dur == 2.0);

  std::ofstream(dir + "/bad.jsonl") << "{\"mix\":\"x\",\"sources\":[\"y\"],\"k\":2}\n";
  CHECK_THROWS_AS(read_manifest(dir + "/bad.jsonl"), Error);
  std::ofstream(dir + "/junk.jsonl") << "not json\n";
  CHECK_THROWS_AS(read_manifest(dir + "/junk.jsonl"), Error);
  CHECK_THROWS_AS(read_manifest(dir + "/missing.jsonl"), Error);
}

TEST_CASE("generate_dataset: shape, determinism, reload invariants") {
  DatasetConfig cfg;
  cfg.n_per_class = 5;
  cfg.max_speakers = 3;
  cfg.seed = 0;
  const std::string d1 = FreshDir("gen1"), d2 = FreshDir("gen2");
  const auto entries = generate_dataset(d1, cfg);
  REQUIRE(entries.size() == 10);
  std::map<int, int> hist;
  for (const auto &e : entries) ++hist[e.k];
  CHECK(hist == std::map<int, int>{{2, 5}, {3, 5}});
  CHECK(read_manifest(d1 + "/manifest.jsonl").size() == 10);

  generate_dataset(d2, cfg);
  for (const auto &e : entries) {
    CHECK(Slurp(fs::path(d1) / e.mix) == Slurp(fs::path(d2) / e.mix));
    for (const auto &s : e.sources)
      CHECK(Slurp(fs::path(d1) / s) == Slurp(fs::path(d2) / s));
  }
  CHECK(Slurp(fs::path(d1) / "manifest.jsonl") == Slurp(fs::path(d2) / "manifest.jsonl"));

  for (const auto &e : read_manifest(d1 + "/manifest.jsonl")) {
    const MixtureExample ex = load_example(e, d1);
    CHECK(ex.speaker_count() == e.k);
    CHECK(ex.mixture.seconds() >= 4.0);
    CHECK(ex.mixture.seconds() <= 12.0);
    CHECK(ex.mixture.seconds() == doctest::Approx(e.dur));
    for (std::size_t i = 0; i < ex.mixture.size(); ++i) {
      double sum = 0.0;
      for (const Signal &s : ex.sources) sum += s.samples[i];
      // Sources are stored exactly; the mixture is their sum rounded once.
      CHECK_MESSAGE(ex.mixture.samples[i] == static_cast<double>(static_cast<float>(sum)),
                    "sample ", i);
      if (ex.mixture.samples[i] != static_cast<double>(static_cast<float>(sum))) break;
    }
  }
}

TEST_CASE("generate_dataset: PCM16 sum within quantization bound") {
  DatasetConfig cfg;
  cfg.n_per_class = 2;
  cfg.max_speakers = 4;
  cfg.seed = 3;
  cfg.encoding = WavEncoding::kPcm16;
  const std::string dir = FreshDir("pcm");
  for (const auto &e : generate_dataset(dir, cfg)) {
    const MixtureExample ex = load_example(e, dir);
    double worst = 0.0;
    for (std::size_t i = 0; i < ex.mixture.size(); ++i) {
      double sum = 0.0;
      for (const Signal &s : ex.sources) sum += s.samples[i];
      worst = std::max(worst, std::abs(ex.mixture.samples[i] - sum));
    }
    CHECK(worst <= e.k / 32768.0);
  }
}

TEST_CASE("generate_dataset: unwritable output leaves no manifest") {
  DatasetConfig cfg;
  cfg.n_per_class = 1;
  cfg.max_speakers = 2;
  const std::string blocker = FreshDir("blocker");
  fs::create_directories(fs::path(blocker).parent_path());
  std::ofstream(blocker) << "a file, not a directory";
  CHECK_THROWS_AS(generate_dataset(blocker + "/out", cfg), Error);
  CHECK(!fs::exists(blocker + "/out/manifest.jsonl"));
  fs::remove(blocker);
}
