// tests/cli_test.cc


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

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "test_util.h"
#include "varisep/dataset.h"
#include "varisep/wav.h"

namespace fs = std::filesystem;
using namespace varisep;

namespace {

struct RunResult {
  int code = -1;
  std::string out;
};

RunResult Run(const std::string &args) {
  static int counter = 0;
  const fs::path capture =
      fs::temp_directory_path() / ("varisep_cli_out_" + std::to_string(counter++) + ".txt");
  const std::string cmd = std::string("\"") + VARISEP_CLI + "\" " + args + " > \"" +
                          capture.string() + "\" 2>/dev/null";
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(capture);
  std::stringstream ss;
  ss << in.rdbuf();
  r.out = ss.str();
  fs::remove(capture);
  return r;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string &name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str(const std::string &leaf = "") const {
    return leaf.empty() ? path.string() : (path / leaf).string();
  }
};

std::string Slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteLines(const fs::path &p, const std::vector<nlohmann::json> &lines) {
  std::ofstream out(p);
  for (const auto &j : lines) out << j.dump() << "\n";
}

}  // namespace

TEST_CASE("cli: upper-bound") {
  RunResult r = Run("upper-bound --a 0.846 --x 20.12 --k 2 --pref -30");
  CHECK(r.code == 0);
  CHECK(r.out == "17.55\n");
  r = Run("upper-bound --a 1 --x 12 --k 3 --pref -30");
  CHECK(r.out == "12.00\n");
  r = Run("upper-bound --a 0.462 --x 10.37 --k 4 --pref -10.37");
  CHECK(std::round(std::stod(r.out) * 10) / 10 == doctest::Approx(8.1));
  CHECK(Run("upper-bound --a 2 --x 1 --k 2").code == 1);
  CHECK(Run("upper-bound --x 1").code == 1);
  CHECK(Run("no-such-command").code == 1);
}

TEST_CASE("cli: mix is deterministic and fails cleanly") {
  TempDir t("varisep_cli_mix");
  const std::string common = " --n 5 --max-speakers 3 --seed 0 --min-seconds 1 --max-seconds 2";
  REQUIRE(Run("mix --out " + t.str("a") + common).code == 0);
  REQUIRE(Run("mix --out " + t.str("b") + common).code == 0);
  const auto entries = read_manifest(t.str("a/manifest.jsonl"));
  CHECK(entries.size() == 10);
  for (const auto &e : entries) {
    CHECK(Slurp(t.path / "a" / e.mix) == Slurp(t.path / "b" / e.mix));
    for (const auto &s : e.sources) CHECK(Slurp(t.path / "a" / s) == Slurp(t.path / "b" / s));
  }
  CHECK(Slurp(t.path / "a/manifest.jsonl") == Slurp(t.path / "b/manifest.jsonl"));

  std::ofstream(t.path / "blocker") << "x";
  CHECK(Run("mix --out " + t.str("blocker/sub") + common).code != 0);
  CHECK_FALSE(fs::exists(t.path / "blocker/sub/manifest.jsonl"));
}

TEST_CASE("cli: oracle infer then eval") {
  TempDir t("varisep_cli_oracle");
  REQUIRE(Run("mix --out " + t.str("d") +
              " --n 2 --max-speakers 3 --seed 4 --min-seconds 5 --max-seconds 9")
              .code == 0);
  REQUIRE(Run("infer --oracle --shuffle --max-speakers 3 --manifest " + t.str("d/manifest.jsonl") +
              " --out " + t.str("o"))
              .code == 0);
  const auto refs = read_manifest(t.str("d/manifest.jsonl"));
  const auto ests = read_manifest(t.str("o/manifest.jsonl"));
  REQUIRE(ests.size() == refs.size());
  std::ifstream cj(t.path / "o/counts.json");
  const auto counts = nlohmann::json::parse(cj);
  for (std::size_t i = 0; i < refs.size(); ++i) {
    CHECK(counts[i]["pred_count"] == refs[i].k);
    REQUIRE(ests[i].k == refs[i].k);
    // Every reference is reproduced by some output channel.
    for (const auto &rp : refs[i].sources) {
      const Signal ref = read_wav((t.path / "d" / rp).string());
      double best = 1e9;
      for (const auto &ep : ests[i].sources) {
        const Signal est = read_wav((t.path / "o" / ep).string());
        double e = 0.0;
        for (std::size_t n = 0; n < ref.size(); ++n)
          e = std::max(e, std::abs(ref.samples[n] - est.samples[n]));
        best = std::min(best, e);
      }
      CHECK(best < 1e-6);
    }
  }

  RunResult r = Run("eval --max-speakers 3 --ref " + t.str("d/manifest.jsonl") + " --est " +
                    t.str("o/manifest.jsonl"));
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["mean_p_si_snr"].is_null());
  CHECK(j["non_finite"].size() > 0);
  CHECK(j["recall"][1] == 1.0);
  CHECK(j["recall"][2] == 1.0);
  CHECK(j["pref_mode"] == "fixed_db");
  CHECK(j["excluded"] == 0);

  CHECK(Run("eval --ref " + t.str("d/manifest.jsonl") + " --est " + t.str("o/manifest.jsonl") +
            " --pref oracle --pref-db -20")
            .code == 1);
  CHECK(Run("infer --oracle --manifest " + t.str("missing.jsonl") + " --out " + t.str("x")).code ==
        2);
}

TEST_CASE("cli: eval fixtures") {
  TempDir t("varisep_cli_eval");
  std::mt19937_64 rng(21);
  auto save = [&](const std::string &name, const Signal &s) {
    write_wav(t.str(name), s);
    return name;
  };
  // Entry 0: two speakers estimated at 20 dB. Entry 1: three references, two
  // estimates at 10 and 14 dB. Entry 2: no estimates.
  std::vector<Signal> r0{testutil::Noise(4000, rng, 0.1), testutil::Noise(4000, rng, 0.1)};
  std::vector<Signal> r1{testutil::Noise(4000, rng, 0.1), testutil::Noise(4000, rng, 0.1),
                         testutil::Noise(4000, rng, 0.1)};
  // Store references first so the estimates are built from the stored values.
  for (std::size_t i = 0; i < 2; ++i) r0[i] = (save("r0_" + std::to_string(i) + ".wav", r0[i]), read_wav(t.str("r0_" + std::to_string(i) + ".wav")));
  for (std::size_t i = 0; i < 3; ++i) r1[i] = (save("r1_" + std::to_string(i) + ".wav", r1[i]), read_wav(t.str("r1_" + std::to_string(i) + ".wav")));
  save("e0_0.wav", testutil::AtDb(r0[1], 20.0, rng));
  save("e0_1.wav", testutil::AtDb(r0[0], 20.0, rng));
  save("e1_0.wav", testutil::AtDb(r1[0], 10.0, rng));
  save("e1_1.wav", testutil::AtDb(r1[2], 14.0, rng));
  WriteLines(t.path / "ref.jsonl",
             {{{"mix", "m0.wav"}, {"sources", {"r0_0.wav", "r0_1.wav"}}, {"k", 2}},
              {{"mix", "m1.wav"}, {"sources", {"r1_0.wav", "r1_1.wav", "r1_2.wav"}}, {"k", 3}},
              {{"mix", "m2.wav"}, {"sources", {"r0_0.wav", "r0_1.wav"}}, {"k", 2}}});
  WriteLines(t.path / "est.jsonl",
             {{{"mix", "m0.wav"}, {"sources", {"e0_0.wav", "e0_1.wav"}}, {"k", 2}},
              {{"mix", "m1.wav"}, {"sources", {"e1_0.wav", "e1_1.wav"}}, {"k", 2}},
              {{"mix", "m2.wav"}, {"sources", nlohmann::json::array()}, {"k", 0}}});

  RunResult r = Run("eval --max-speakers 3 --ref " + t.str("ref.jsonl") + " --est " +
                    t.str("est.jsonl") + " --pref-db -30");
  REQUIRE(r.code == 0);
  auto j = nlohmann::json::parse(r.out);
  CHECK(j["excluded"] == 1);
  CHECK(j["errors"][0]["entry"] == 2);
  REQUIRE(j["examples"].size() == 2);
  // float32 storage moves the SI-SNRs slightly off the constructed values.
  CHECK(j["examples"][0]["p_si_snr"].get<double>() == doctest::Approx(20.0).epsilon(1e-4));
  CHECK(j["examples"][1]["p_si_snr"].get<double>() == doctest::Approx(-2.0).epsilon(1e-3));
  CHECK(j["mean_p_si_snr"].get<double>() == doctest::Approx(9.0).epsilon(1e-4));
  CHECK(j["confusion"][2][1] == 1);

  r = Run("eval --max-speakers 3 --ref " + t.str("ref.jsonl") + " --est " + t.str("est.jsonl") +
          " --pref oracle --out " + t.str("report.json"));
  REQUIRE(r.code == 0);
  CHECK(r.out.find("mean P-SI-SNR") != std::string::npos);
  std::ifstream rep(t.path / "report.json");
  j = nlohmann::json::parse(rep);
  CHECK(j["pref_mode"] == "oracle_average");
  CHECK(j["pref_db"].get<double>() == doctest::Approx(-20.0).epsilon(1e-4));

  std::ofstream(t.path / "empty.jsonl");
  CHECK(Run("eval --ref " + t.str("empty.jsonl") + " --est " + t.str("empty.jsonl")).code == 2);
}

TEST_CASE("cli: measure-pref") {
  TempDir t("varisep_cli_pref");
  std::mt19937_64 rng(31);
  Signal rec = testutil::Noise(16000, rng, 0.01);
  for (std::size_t i = 6000; i < rec.size(); ++i) rec.samples[i] += 0.3 * std::sin(0.05 * i);
  write_wav(t.str("one.wav"), rec);
  RunResult r = Run("measure-pref --dir " + t.str());
  REQUIRE(r.code == 0);
  std::istringstream lines(r.out);
  std::string name, a, mean_label, b;
  lines >> name >> a >> mean_label >> b;
  CHECK(name == "one.wav");
  CHECK(mean_label == "mean");
  CHECK(a == b);

  Signal silent = rec;
  for (std::size_t i = 0; i < 6000; ++i) silent.samples[i] = 0.0;
  write_wav(t.str("two.wav"), silent);
  write_wav(t.str("short.wav"), testutil::Noise(100, rng));
  r = Run("measure-pref --dir " + t.str());
  CHECK(r.code == 0);
  CHECK(r.out.find("two.wav") == std::string::npos);
  CHECK(r.out.find("short.wav") == std::string::npos);
  CHECK(r.out.find("mean\t" + a) != std::string::npos);
  CHECK(Run("measure-pref --dir " + t.str("nope")).code == 2);
}

TEST_CASE("cli: train then infer with the checkpoint") {
  TempDir t("varisep_cli_train");
  REQUIRE(Run("mix --out " + t.str("d") +
              " --n 3 --max-speakers 3 --seed 2 --min-seconds 1 --max-seconds 1.5")
              .code == 0);
  const std::string train_flags = " --max-speakers 3 --N 8 --B 1 --epochs 1 --samples-per-epoch 4"
                                  " --chunk-seconds 0.5 --hop-seconds 0.25 --min-keep-seconds 0.25";
  RunResult r = Run("train --manifest " + t.str("d/manifest.jsonl") + " --out " +
                    t.str("model.json") + " --log " + t.str("log.jsonl") + train_flags);
  REQUIRE(r.code == 0);
  CHECK(fs::exists(t.path / "model.json"));
  std::ifstream log(t.path / "log.jsonl");
  std::string line;
  std::getline(log, line);
  const auto entry = nlohmann::json::parse(line);
  CHECK(entry["epoch"] == 1);
  CHECK(entry.contains("mean_l_count"));

  const auto refs = read_manifest(t.str("d/manifest.jsonl"));
  r = Run("infer --max-speakers 3 --checkpoint " + t.str("model.json") + " --mix " +
          (t.path / "d" / refs[0].mix).string() +
          " --chunk-seconds 0.5 --hop-seconds 0.25 --min-keep-seconds 0.25 --out " + t.str("o"));
  REQUIRE(r.code == 0);
  std::ifstream cj(t.path / "o/counts.json");
  const auto counts = nlohmann::json::parse(cj);
  const int k = counts[0]["pred_count"];
  CHECK(k >= 1);
  CHECK(k <= 3);
  const auto ests = read_manifest(t.str("o/manifest.jsonl"));
  CHECK(ests[0].k == k);
  for (const auto &s : ests[0].sources) CHECK(fs::exists(t.path / "o" / s));

  CHECK(Run("infer --checkpoint " + t.str("missing.json") + " --mix " +
            (t.path / "d" / refs[0].mix).string() + " --out " + t.str("o2"))
            .code == 2);
  CHECK(Run("infer --oracle --checkpoint " + t.str("model.json") + " --mix x.wav --out " +
            t.str("o3"))
            .code == 1);
}
