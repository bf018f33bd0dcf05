// src/train.cc


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

#include "varisep/train.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <map>
#include <random>
#include <thread>

#include "varisep/error.h"
#include "varisep/metrics.h"
#include "varisep/pipeline.h"

namespace varisep {

namespace {

struct TrainChunk {
  std::size_t example;
  ChunkPlacement at;
};

struct Adam {
  explicit Adam(const ModelConfig &cfg)
      : m(ModelParams::Zeros(cfg)), v(ModelParams::Zeros(cfg)) {}

  void Step(ModelParams &p, const ModelParams &g, double lr, double count_scale) {
    ++t;
    const double c1 = 1.0 - std::pow(kBeta1, t), c2 = 1.0 - std::pow(kBeta2, t);
    auto pv = p.tensors();
    const auto gv = g.tensors();
    auto mv = m.tensors(), vv = v.tensors();
    for (std::size_t k = 0; k < pv.size(); ++k) {
      const double step = pv[k].name.starts_with("count.") ? lr * count_scale : lr;
      for (std::size_t i = 0; i < pv[k].data.size(); ++i) {
        const double gi = gv[k].data[i];
        double &mi = mv[k].data[i], &vi = vv[k].data[i];
        mi = kBeta1 * mi + (1.0 - kBeta1) * gi;
        vi = kBeta2 * vi + (1.0 - kBeta2) * gi * gi;
        pv[k].data[i] -= step * (mi / c1) / (std::sqrt(vi / c2) + kEps);
      }
    }
  }

  static constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  ModelParams m, v;
  int t = 0;
};

void Accumulate(ModelParams &acc, const ModelParams &g, double scale) {
  auto a = acc.tensors();
  const auto b = g.tensors();
  for (std::size_t k = 0; k < a.size(); ++k)
    for (std::size_t i = 0; i < a[k].data.size(); ++i) a[k].data[i] += scale * b[k].data[i];
}

bool AllFinite(const ModelParams &p) {
  for (const auto &t : p.tensors())
    for (double v : t.data)
      if (!std::isfinite(v)) return false;
  return true;
}

Signal Cut(const Signal &s, const ChunkPlacement &at, std::size_t chunk_len) {
  const ChunkPlacement one[] = {at};
  return chunk_at(s, one, chunk_len).front().data;
}

}  // namespace

void split_holdout(std::span<const int> counts, double fraction, std::uint64_t seed,
                   std::vector<std::size_t> &train, std::vector<std::size_t> &heldout) {
  if (!(fraction >= 0.0 && fraction < 1.0))
    Fail(ErrorCode::kInvalidArgument, "holdout fraction must lie in [0, 1)");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < counts.size(); ++i) by_class[counts[i]].push_back(i);
  train.clear();
  heldout.clear();
  std::mt19937_64 rng(seed ^ 0x5bd1e995ULL);
  for (auto &[k, items] : by_class) {
    std::shuffle(items.begin(), items.end(), rng);
    std::size_t n_hold = static_cast<std::size_t>(std::llround(fraction * items.size()));
    if (fraction > 0.0 && items.size() >= 2) n_hold = std::max<std::size_t>(n_hold, 1);
    n_hold = std::min(n_hold, items.size() - 1);
    heldout.insert(heldout.end(), items.begin(), items.begin() + static_cast<long>(n_hold));
    train.insert(train.end(), items.begin() + static_cast<long>(n_hold), items.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(heldout.begin(), heldout.end());
}

int predict_count(Separator &sep, const Signal &mixture, const ChunkSpec &spec) {
  std::vector<std::vector<double>> probs;
  for (const Chunk &c : chunk_signal(mixture, spec)) probs.push_back(sep.count_probs(c));
  return vote_count(probs);
}

HeldoutScore evaluate_heldout(const ModelParams &params,
                              std::span<const MixtureExample> examples,
                              const ChunkSpec &spec) {
  if (examples.empty()) Fail(ErrorCode::kEmptyInput, "no held-out examples");
  auto sep = as_separator(params);
  HeldoutScore s;
  std::size_t correct = 0, sources = 0;
  for (const MixtureExample &ex : examples) {
    if (predict_count(*sep, ex.mixture, spec) == ex.speaker_count()) ++correct;
    const SeparationResult r =
        separate_with_count(ex.mixture, *sep, ex.speaker_count(), spec);
    s.mean_si_snr -= upit(ex.sources, r.sources).loss;
    for (const Signal &ref : ex.sources) s.mean_mixture_si_snr += si_snr(ex.mixture, ref);
    sources += ex.sources.size();
  }
  s.count_accuracy = static_cast<double>(correct) / static_cast<double>(examples.size());
  s.mean_si_snr /= static_cast<double>(sources);
  s.mean_mixture_si_snr /= static_cast<double>(sources);
  return s;
}

TrainResult train(std::span<const MixtureExample> examples, const TrainConfig &cfg,
                  const EpochCallback &on_epoch) {
  if (examples.empty()) Fail(ErrorCode::kEmptyInput, "no training examples");
  if (cfg.batch < 1 || cfg.epochs < 0 || !(cfg.lr > 0.0) || !(cfg.decay > 0.0) ||
      cfg.decay > 1.0 || !(cfg.count_lr_scale > 0.0) ||
      cfg.threads < 1)
    Fail(ErrorCode::kInvalidArgument, "invalid training configuration");
  if (!(cfg.alpha >= 0.0 && cfg.alpha <= 1.0))
    Fail(ErrorCode::kInvalidArgument, "alpha must lie in [0, 1]");
  const ModelConfig mcfg{cfg.N, cfg.B, cfg.K};

  std::vector<int> counts;
  for (const MixtureExample &ex : examples) {
    const int k = ex.speaker_count();
    if (k < 1 || k > cfg.K)
      Fail(ErrorCode::kInvalidArgument,
           "example with " + std::to_string(k) + " speakers exceeds K=" + std::to_string(cfg.K));
    counts.push_back(k);
  }

  TrainResult result;
  split_holdout(counts, cfg.holdout, cfg.seed, result.train_indices, result.heldout_indices);

  // Chunks of the training mixtures, grouped by speaker count.
  const int rate = examples.front().mixture.sample_rate;
  const ChunkGeometry geom = ResolveChunkSpec(cfg.chunk, rate);
  std::map<int, std::vector<TrainChunk>> by_class;
  for (std::size_t i : result.train_indices) {
    if (examples[i].mixture.size() < geom.min_keep_len) continue;
    for (const ChunkPlacement &at : PlanChunks(examples[i].mixture.size(), geom))
      by_class[counts[i]].push_back({i, at});
  }
  for (int k = 2; k <= cfg.K; ++k)
    if (by_class[k].empty())
      Fail(ErrorCode::kEmptyInput, "no training chunks with " + std::to_string(k) + " speakers");
  std::vector<int> classes;
  std::vector<std::size_t> class_sizes;
  std::size_t total_chunks = 0;
  for (const auto &[k, chunks] : by_class) {
    if (chunks.empty()) continue;
    classes.push_back(k);
    class_sizes.push_back(chunks.size());
    total_chunks += chunks.size();
  }

  std::vector<MixtureExample> heldout;
  for (std::size_t i : result.heldout_indices) heldout.push_back(examples[i]);

  std::mt19937_64 seeder(cfg.seed);
  result.params = ModelParams::Random(mcfg, seeder());
  ChunkSampler sampler(class_sizes, seeder());
  Adam adam(mcfg);
  const std::size_t per_epoch = cfg.samples_per_epoch ? cfg.samples_per_epoch : total_chunks;
  const std::size_t steps = (per_epoch + static_cast<std::size_t>(cfg.batch) - 1) /
                            static_cast<std::size_t>(cfg.batch);

  double lr = cfg.lr;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    EpochLog log;
    log.epoch = epoch;
    log.lr = lr;
    std::size_t seen = 0;
    for (std::size_t step = 0; step < steps; ++step) {
      const std::size_t n =
          std::min<std::size_t>(static_cast<std::size_t>(cfg.batch), per_epoch - step * cfg.batch);
      std::vector<TrainChunk> batch;
      for (std::size_t b = 0; b < n; ++b) {
        const ChunkSampler::Draw d = sampler.next();
        batch.push_back(by_class[classes[d.cls]][d.index]);
      }
      std::vector<LossAndGrad> out(n);
      std::vector<std::string> errors(n);
      auto work = [&](std::size_t b) {
        const TrainChunk &tc = batch[b];
        const MixtureExample &ex = examples[tc.example];
        const Signal x = Cut(ex.mixture, tc.at, geom.chunk_len);
        std::vector<Signal> refs;
        for (const Signal &s : ex.sources) refs.push_back(Cut(s, tc.at, geom.chunk_len));
        try {
          out[b] = backward(x, refs, result.params, cfg.alpha);
        } catch (const Error &e) {
          errors[b] = e.what();
        }
      };
      if (cfg.threads == 1 || n == 1) {
        for (std::size_t b = 0; b < n; ++b) work(b);
      } else {
        std::vector<std::thread> pool;
        const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(cfg.threads));
        for (std::size_t w = 0; w < workers; ++w)
          pool.emplace_back([&, w] {
            for (std::size_t b = w; b < n; b += workers) work(b);
          });
        for (std::thread &t : pool) t.join();
      }

      ModelParams grad = ModelParams::Zeros(mcfg);
      for (std::size_t b = 0; b < n; ++b) {
        const std::string where = "epoch " + std::to_string(epoch) + " step " +
                                  std::to_string(step) + " example " +
                                  std::to_string(batch[b].example);
        if (!errors[b].empty()) Fail(ErrorCode::kDivergence, where + ": " + errors[b]);
        if (!std::isfinite(out[b].loss) || !AllFinite(out[b].grad))
          Fail(ErrorCode::kDivergence, where + ": non-finite loss or gradient");
        Accumulate(grad, out[b].grad, 1.0 / static_cast<double>(n));
        log.mean_l_count += out[b].l_count;
        log.mean_l_decoders += out[b].l_decoders;
      }
      seen += n;
      adam.Step(result.params, grad, lr, cfg.count_lr_scale);
      if (!AllFinite(result.params))
        Fail(ErrorCode::kDivergence, "epoch " + std::to_string(epoch) + ": parameters diverged");
    }
    if (seen) {
      log.mean_l_count /= static_cast<double>(seen);
      log.mean_l_decoders /= static_cast<double>(seen);
    }
    if (!heldout.empty()) {
      auto sep = as_separator(result.params);
      std::size_t correct = 0;
      for (const MixtureExample &ex : heldout)
        if (predict_count(*sep, ex.mixture, cfg.chunk) == ex.speaker_count()) ++correct;
      log.heldout_accuracy = static_cast<double>(correct) / static_cast<double>(heldout.size());
    } else {
      log.heldout_accuracy = std::nan("");
    }
    log.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);
    lr *= cfg.decay;
  }
  return result;
}

TrainResult train(const std::string &manifest_path, const TrainConfig &cfg,
                  const EpochCallback &on_epoch) {
  const std::vector<ManifestEntry> entries = read_manifest(manifest_path);
  const std::string base = std::filesystem::path(manifest_path).parent_path().string();
  std::vector<MixtureExample> examples;
  examples.reserve(entries.size());
  for (const ManifestEntry &e : entries) examples.push_back(load_example(e, base));
  return train(examples, cfg, on_epoch);
}

}  // namespace varisep
