// tools/varisep.cc


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

// varisep command-line tool: mix, eval, upper-bound, measure-pref, train,
// infer. Exit codes: 0 ok, 1 usage, 2 data, 3 numeric.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "varisep/dataset.h"
#include "varisep/error.h"
#include "varisep/metrics.h"
#include "varisep/pipeline.h"
#include "varisep/toymodel.h"
#include "varisep/train.h"
#include "varisep/wav.h"

namespace fs = std::filesystem;
using namespace varisep;

namespace {

constexpr int kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNumeric = 3;

struct GlobalFlags {
  std::uint64_t seed = 0;
  int sample_rate = kDefaultSampleRate;
  int max_speakers = 5;
};

int ExitCodeFor(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
      return kExitUsage;
    case ErrorCode::kZeroEnergy:
    case ErrorCode::kNonFinite:
    case ErrorCode::kDivergence:
      return kExitNumeric;
    default:
      return kExitData;
  }
}

std::string Db(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "+inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

// Worker count: hardware threads capped by VARISEP_THREADS.
int PoolSize() {
  int n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char *env = std::getenv("VARISEP_THREADS")) {
    char *end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || cap < 1)
      Fail(ErrorCode::kInvalidArgument, "VARISEP_THREADS must be a positive integer");
    n = std::min<long>(n, cap);
  }
  return n;
}

// Runs fn(i) for i in [0, n) on up to `workers` threads.
template <typename Fn>
void ParallelFor(std::size_t n, int workers, Fn fn) {
  const std::size_t w = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(workers, 1)));
  if (w <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < w; ++t)
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < n; i += w) fn(i);
    });
  for (std::thread &th : pool) th.join();
}

std::string Resolve(const std::string &path, const fs::path &base) {
  const fs::path p(path);
  return p.is_absolute() ? p.string() : (base / p).string();
}

void WriteText(const std::string &path, const std::string &text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) Fail(ErrorCode::kUnwritable, "cannot write " + path);
  out << text;
  if (!out) Fail(ErrorCode::kUnwritable, "cannot write " + path);
}

ChunkSpec ChunkFlags(CLI::App *cmd, ChunkSpec &spec) {
  cmd->add_option("--chunk-seconds", spec.chunk_seconds, "Chunk length")->capture_default_str();
  cmd->add_option("--hop-seconds", spec.hop_seconds, "Chunk hop")->capture_default_str();
  cmd->add_option("--min-keep-seconds", spec.min_keep_seconds,
                  "Shortest trailing segment kept")
      ->capture_default_str();
  return spec;
}

// ---- mix ----

struct MixFlags {
  std::string out;
  int n = 5;
  std::string encoding = "float32";
  double min_seconds = 4.0, max_seconds = 12.0;
};

int RunMix(const GlobalFlags &g, const MixFlags &f) {
  DatasetConfig cfg;
  cfg.n_per_class = f.n;
  cfg.max_speakers = g.max_speakers;
  cfg.seed = g.seed;
  cfg.sample_rate = g.sample_rate;
  cfg.min_seconds = f.min_seconds;
  cfg.max_seconds = f.max_seconds;
  cfg.encoding = f.encoding == "pcm16" ? WavEncoding::kPcm16 : WavEncoding::kFloat32;
  const auto entries = generate_dataset(f.out, cfg);
  std::cout << "wrote " << entries.size() << " mixtures to "
            << (fs::path(f.out) / "manifest.jsonl").string() << "\n";
  return kExitOk;
}

// ---- eval ----

struct EvalFlags {
  std::string ref, est, out;
  std::optional<double> pref_db;
  std::string pref;
};

int RunEval(const GlobalFlags &g, const EvalFlags &f) {
  const auto refs = read_manifest(f.ref);
  const auto ests = read_manifest(f.est);
  if (refs.empty()) Fail(ErrorCode::kEmptyInput, "reference manifest is empty: " + f.ref);
  if (refs.size() != ests.size())
    Fail(ErrorCode::kCountMismatch, "manifests differ in length: " +
                                        std::to_string(refs.size()) + " vs " +
                                        std::to_string(ests.size()));
  const bool oracle = f.pref == "oracle";
  if (!f.pref.empty() && !oracle)
    Fail(ErrorCode::kInvalidArgument, "--pref accepts only 'oracle'");
  const double fixed = f.pref_db.value_or(-30.0);
  if (!oracle && !(std::isfinite(fixed) && fixed <= 0.0))
    Fail(ErrorCode::kInvalidArgument, "--pref-db must be finite and <= 0");

  const fs::path ref_base = fs::path(f.ref).parent_path(), est_base = fs::path(f.est).parent_path();
  const std::size_t n = refs.size();
  std::vector<std::optional<ExampleResult>> scored(n);
  std::vector<std::string> failures(n);
  std::vector<std::optional<Error>> fatal(n);
  ParallelFor(n, PoolSize(), [&](std::size_t i) {
    try {
      if (ests[i].sources.empty()) {
        failures[i] = "no estimated sources";
        return;
      }
      SeparationExample ex;
      for (const auto &p : refs[i].sources) ex.refs.push_back(read_wav(Resolve(p, ref_base)));
      for (const auto &p : ests[i].sources) ex.ests.push_back(read_wav(Resolve(p, est_base)));
      // The matched sum does not depend on the penalty; terms are set below.
      scored[i] = score_example(ex, 0.0);
    } catch (const Error &e) {
      fatal[i] = e;
    }
  });
  for (std::size_t i = 0; i < n; ++i)
    if (fatal[i]) Fail(fatal[i]->code(), "entry " + std::to_string(i) + ": " + fatal[i]->what());

  std::vector<ExampleResult> results;
  std::vector<std::size_t> included;
  nlohmann::json errors = nlohmann::json::array();
  for (std::size_t i = 0; i < n; ++i) {
    if (scored[i]) {
      results.push_back(*scored[i]);
      included.push_back(i);
    } else {
      errors.push_back({{"entry", i}, {"error", failures[i]}});
    }
  }
  if (!errors.empty())
    std::cerr << "warning: excluded " << errors.size() << " entr"
              << (errors.size() == 1 ? "y" : "ies") << " without estimates\n";
  if (results.empty()) Fail(ErrorCode::kEmptyInput, "no entry has estimates");

  double pref = fixed;
  if (oracle) {
    double total = 0.0;
    std::size_t matched = 0;
    for (const ExampleResult &r : results) {
      if (r.true_count != r.pred_count) continue;
      total += r.matched_si_snr / r.true_count;
      ++matched;
    }
    if (matched == 0)
      Fail(ErrorCode::kCountMismatch,
           "oracle P_ref needs at least one correctly counted entry");
    pref = -(total / static_cast<double>(matched));
  }
  for (ExampleResult &r : results)
    r.p_si_snr = p_si_snr_term(r.matched_si_snr, r.true_count, r.pred_count, pref);
  const EvalReport report = assemble_report(
      std::move(results), g.max_speakers,
      oracle ? PrefPolicy::Mode::kOracleAverage : PrefPolicy::Mode::kFixedDb, pref);

  nlohmann::json j = nlohmann::json::parse(ReportToJson(report));
  j["entries"] = included;
  j["excluded"] = errors.size();
  j["errors"] = std::move(errors);
  const std::string text = j.dump(2) + "\n";
  if (f.out.empty()) {
    std::cout << text;
  } else {
    WriteText(f.out, text);
    std::cout << "mean P-SI-SNR " << Db(report.mean_p_si_snr) << " dB (P_ref "
              << Db(report.pref_db) << " dB), mean oracle SI-SNR "
              << Db(report.mean_oracle_si_snr) << " dB\n";
  }
  return kExitOk;
}

// ---- upper-bound ----

struct BoundFlags {
  double a = 0.0, x = 0.0, pref = -30.0;
  int k = 0;
};

int RunUpperBound(const BoundFlags &f) {
  std::cout << Db(upper_bound(f.a, f.x, f.k, f.pref)) << "\n";
  return kExitOk;
}

// ---- measure-pref ----

struct PrefFlags {
  std::string dir;
  double noise_seconds = 0.75;
};

int RunMeasurePref(const PrefFlags &f) {
  if (!(f.noise_seconds > 0.0))
    Fail(ErrorCode::kInvalidArgument, "--noise-seconds must be positive");
  if (!fs::is_directory(f.dir)) Fail(ErrorCode::kMissingFile, "not a directory: " + f.dir);
  std::vector<fs::path> files;
  for (const auto &e : fs::directory_iterator(f.dir))
    if (e.is_regular_file() && e.path().extension() == ".wav") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) Fail(ErrorCode::kEmptyInput, "no .wav files in " + f.dir);

  double total = 0.0;
  int ok = 0, failed = 0;
  for (const fs::path &p : files) {
    try {
      const Signal rec = read_wav(p.string());
      const auto win = static_cast<std::size_t>(std::llround(f.noise_seconds * rec.sample_rate));
      if (win == 0 || rec.size() < win)
        Fail(ErrorCode::kTooShort, "shorter than the noise window");
      Signal tiled;
      tiled.sample_rate = rec.sample_rate;
      tiled.samples.resize(rec.size());
      for (std::size_t i = 0; i < rec.size(); ++i) tiled.samples[i] = rec.samples[i % win];
      const double db = energy_ratio_db(tiled, rec);
      if (!std::isfinite(db)) Fail(ErrorCode::kZeroEnergy, "silent noise window");
      std::cout << p.filename().string() << "\t" << Db(db) << "\n";
      total += db;
      ++ok;
    } catch (const Error &e) {
      std::cerr << "error: " << p.filename().string() << ": " << e.what() << "\n";
      ++failed;
    }
  }
  if (ok == 0) Fail(ErrorCode::kEmptyInput, "no recording could be measured");
  std::cout << "mean\t" << Db(total / ok) << "\n";
  if (failed) std::cerr << "warning: " << failed << " file(s) skipped\n";
  return kExitOk;
}

// ---- train ----

struct TrainFlags {
  std::string manifest, out, log;
  TrainConfig cfg;
};

int RunTrain(const GlobalFlags &g, TrainFlags f) {
  f.cfg.seed = g.seed;
  f.cfg.K = g.max_speakers;
  f.cfg.threads = std::min(f.cfg.threads, PoolSize());
  std::ofstream log;
  if (!f.log.empty()) {
    log.open(f.log, std::ios::trunc);
    if (!log) Fail(ErrorCode::kUnwritable, "cannot write " + f.log);
  }
  // Fail on an unwritable checkpoint path before spending time training.
  {
    std::ofstream probe(f.out + ".tmp", std::ios::trunc);
    if (!probe) Fail(ErrorCode::kUnwritable, "cannot write " + f.out);
  }
  fs::remove(f.out + ".tmp");
  const TrainResult r = train(f.manifest, f.cfg, [&](const EpochLog &e) {
    std::cout << "epoch " << e.epoch << " lr " << e.lr << " L_count " << e.mean_l_count
              << " L_decoders " << Db(e.mean_l_decoders) << " heldout_acc "
              << e.heldout_accuracy << " (" << Db(e.seconds) << " s)" << std::endl;
    if (log.is_open()) {
      nlohmann::json j{{"epoch", e.epoch},
                       {"lr", e.lr},
                       {"mean_l_count", e.mean_l_count},
                       {"mean_l_decoders", e.mean_l_decoders},
                       {"heldout_accuracy", std::isnan(e.heldout_accuracy)
                                                ? nlohmann::json(nullptr)
                                                : nlohmann::json(e.heldout_accuracy)},
                       {"seconds", e.seconds}};
      log << j.dump() << std::endl;
    }
  });
  save_checkpoint(f.out, r.params);
  std::cout << "wrote " << f.out << "\n";
  return kExitOk;
}

// ---- infer ----

struct InferFlags {
  std::string checkpoint, manifest, out;
  std::vector<std::string> mixtures;
  bool oracle = false;
  bool shuffle = false;
  ChunkSpec chunk;
};

int RunInfer(const GlobalFlags &g, const InferFlags &f) {
  if (f.oracle == !f.checkpoint.empty())
    Fail(ErrorCode::kInvalidArgument, "give exactly one of --checkpoint and --oracle");
  if (f.oracle && f.manifest.empty())
    Fail(ErrorCode::kInvalidArgument, "--oracle needs --manifest for the reference sources");
  if (f.manifest.empty() == f.mixtures.empty())
    Fail(ErrorCode::kInvalidArgument, "give exactly one of --manifest and --mix");

  std::optional<ModelParams> params;
  if (!f.oracle) params = load_checkpoint(f.checkpoint);

  std::vector<ManifestEntry> entries;
  fs::path base;
  if (!f.manifest.empty()) {
    entries = read_manifest(f.manifest);
    base = fs::path(f.manifest).parent_path();
  } else {
    for (const auto &m : f.mixtures) entries.push_back({m, {}, 0, 0.0});
  }
  if (entries.empty()) Fail(ErrorCode::kEmptyInput, "nothing to separate");
  fs::create_directories(f.out);

  nlohmann::json counts = nlohmann::json::array();
  std::vector<ManifestEntry> est_entries;
  std::set<std::string> used;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const std::string mix_path = Resolve(entries[i].mix, base);
    const Signal mix = read_wav(mix_path);
    if (mix.sample_rate != g.sample_rate)
      Fail(ErrorCode::kMalformedFile, mix_path + ": sample rate " +
                                          std::to_string(mix.sample_rate) + ", expected " +
                                          std::to_string(g.sample_rate));
    std::unique_ptr<Separator> sep;
    if (f.oracle) {
      std::vector<Signal> refs;
      for (const auto &s : entries[i].sources) refs.push_back(read_wav(Resolve(s, base)));
      std::optional<std::uint64_t> shuffle;
      if (f.shuffle) shuffle = DeriveSeed(g.seed, i);
      sep = std::make_unique<OracleSeparator>(std::move(refs), g.max_speakers, shuffle);
    } else {
      sep = as_separator(*params);
    }
    const SeparationResult r = separate_full(mix, *sep, f.chunk);

    std::string stem = fs::path(mix_path).stem().string();
    if (!used.insert(stem).second) stem += "_" + std::to_string(i);
    ManifestEntry est;
    est.mix = fs::absolute(mix_path).string();
    est.k = r.pred_count;
    est.dur = mix.seconds();
    for (int c = 0; c < r.pred_count; ++c) {
      const std::string name = stem + "_est" + std::to_string(c) + ".wav";
      write_wav((fs::path(f.out) / name).string(), r.sources[static_cast<std::size_t>(c)]);
      est.sources.push_back(name);
    }
    est_entries.push_back(est);
    counts.push_back({{"mix", entries[i].mix},
                      {"pred_count", r.pred_count},
                      {"true_count", f.manifest.empty() ? nlohmann::json(nullptr)
                                                        : nlohmann::json(entries[i].k)},
                      {"chunk_probs", r.chunk_probs}});
    std::cout << entries[i].mix << "\tpred_count " << r.pred_count << "\n";
  }
  WriteText((fs::path(f.out) / "counts.json").string(), counts.dump(2) + "\n");
  write_manifest((fs::path(f.out) / "manifest.jsonl").string(), est_entries);
  return kExitOk;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"varisep: source separation with an unknown number of speakers"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalFlags g;
  app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_option("--sample-rate", g.sample_rate, "Sample rate in Hz")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app.add_option("--max-speakers", g.max_speakers, "Maximum speaker count K")
      ->capture_default_str()
      ->check(CLI::Range(1, 64));

  MixFlags mix;
  auto *c_mix = app.add_subcommand("mix", "Generate a synthetic mixture dataset");
  c_mix->add_option("--out", mix.out, "Output directory")->required();
  c_mix->add_option("--n", mix.n, "Mixtures per speaker count")->capture_default_str();
  c_mix->add_option("--encoding", mix.encoding, "WAV sample format")
      ->check(CLI::IsMember({"float32", "pcm16"}))
      ->capture_default_str();
  c_mix->add_option("--min-seconds", mix.min_seconds)->capture_default_str();
  c_mix->add_option("--max-seconds", mix.max_seconds)->capture_default_str();

  EvalFlags ev;
  auto *c_eval = app.add_subcommand("eval", "Score estimates against references");
  c_eval->add_option("--ref", ev.ref, "Reference manifest")->required();
  c_eval->add_option("--est", ev.est, "Estimate manifest (same entry order)")->required();
  auto *o_db = c_eval->add_option("--pref-db", ev.pref_db, "Fixed P_ref in dB (default -30)");
  auto *o_pref = c_eval->add_option("--pref", ev.pref, "'oracle' for the oracle-average P_ref")
                     ->check(CLI::IsMember({"oracle"}));
  o_db->excludes(o_pref);
  o_pref->excludes(o_db);
  c_eval->add_option("--out", ev.out, "Write the JSON report here instead of stdout");

  BoundFlags ub;
  auto *c_ub = app.add_subcommand("upper-bound", "P-SI-SNR upper bound");
  c_ub->add_option("--a", ub.a, "Counting accuracy")->required();
  c_ub->add_option("--x", ub.x, "Oracle SI-SNR in dB")->required();
  c_ub->add_option("--k", ub.k, "Speaker count")->required();
  c_ub->add_option("--pref", ub.pref, "P_ref in dB")->capture_default_str();

  PrefFlags mp;
  auto *c_mp = app.add_subcommand("measure-pref", "Measure the noise-floor P_ref");
  c_mp->add_option("dir,--dir", mp.dir, "Directory of recordings")->required();
  c_mp->add_option("--noise-seconds", mp.noise_seconds, "Leading noise window")
      ->capture_default_str();

  TrainFlags tr;
  auto *c_tr = app.add_subcommand("train", "Train the toy model");
  c_tr->add_option("--manifest", tr.manifest, "Training manifest")->required();
  c_tr->add_option("--out", tr.out, "Checkpoint path")->required();
  c_tr->add_option("--log", tr.log, "Per-epoch JSON lines log");
  c_tr->add_option("--alpha", tr.cfg.alpha, "Count loss weight")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  c_tr->add_option("--lr", tr.cfg.lr)->capture_default_str();
  c_tr->add_option("--decay", tr.cfg.decay)->capture_default_str();
  c_tr->add_option("--batch", tr.cfg.batch)->capture_default_str();
  c_tr->add_option("--epochs", tr.cfg.epochs)->capture_default_str();
  c_tr->add_option("--N", tr.cfg.N, "Feature channels")->capture_default_str();
  c_tr->add_option("--B", tr.cfg.B, "Backbone blocks")->capture_default_str();
  c_tr->add_option("--samples-per-epoch", tr.cfg.samples_per_epoch,
                   "Chunk draws per epoch (0: number of training chunks)")
      ->capture_default_str();
  c_tr->add_option("--holdout", tr.cfg.holdout, "Held-out fraction per class")
      ->capture_default_str();
  c_tr->add_option("--count-lr-scale", tr.cfg.count_lr_scale)->capture_default_str();
  c_tr->add_option("--threads", tr.cfg.threads, "Gradient workers per batch")
      ->capture_default_str();
  ChunkFlags(c_tr, tr.cfg.chunk);

  InferFlags in;
  auto *c_in = app.add_subcommand("infer", "Separate mixtures");
  auto *o_ck = c_in->add_option("--checkpoint", in.checkpoint, "Trained checkpoint");
  auto *o_or = c_in->add_flag("--oracle", in.oracle, "Use the reference-backed oracle");
  o_ck->excludes(o_or);
  o_or->excludes(o_ck);
  c_in->add_option("--manifest", in.manifest, "Manifest of mixtures");
  c_in->add_option("--mix", in.mixtures, "Mixture WAVs");
  c_in->add_flag("--shuffle", in.shuffle, "Oracle only: permute channels per chunk");
  c_in->add_option("--out", in.out, "Output directory")->required();
  ChunkFlags(c_in, in.chunk);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (c_mix->parsed()) return RunMix(g, mix);
    if (c_eval->parsed()) return RunEval(g, ev);
    if (c_ub->parsed()) return RunUpperBound(ub);
    if (c_mp->parsed()) return RunMeasurePref(mp);
    if (c_tr->parsed()) return RunTrain(g, tr);
    if (c_in->parsed()) return RunInfer(g, in);
  } catch (const Error &e) {
    std::cerr << "error (" << ErrorCodeName(e.code()) << "): " << e.what() << "\n";
    return ExitCodeFor(e.code());
  } catch (const fs::filesystem_error &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
