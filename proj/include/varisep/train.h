// include/varisep/train.h


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

#ifndef VARISEP_TRAIN_H_
#define VARISEP_TRAIN_H_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "varisep/dataset.h"
#include "varisep/signal.h"
#include "varisep/toymodel.h"

namespace varisep {

struct TrainConfig {
  double alpha = 0.5;  // weight of the count loss
  double lr = 5e-4;
  double decay = 0.94;  // step size multiplier per epoch
  double count_lr_scale = 10.0;  // extra step size factor for the count head
  int batch = 4;
  int epochs = 15;
  std::uint64_t seed = 0;
  int N = 32;
  int B = 2;
  int K = 3;
  ChunkSpec chunk;
  std::size_t samples_per_epoch = 0;  // 0: one draw per training chunk
  double holdout = 0.1;               // fraction of mixtures per class
  // Worker threads for the per-example gradients of a batch. Results are
  // reduced in batch order, so the outcome does not depend on this.
  int threads = 1;
};

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;
  double mean_l_count = 0.0;
  double mean_l_decoders = 0.0;  // 0 when alpha == 1
  double heldout_accuracy = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochLog> log;
  std::vector<std::size_t> train_indices;    // into the manifest
  std::vector<std::size_t> heldout_indices;  // into the manifest
};

using EpochCallback = std::function<void(const EpochLog &)>;

/// Trains on in-memory examples. Deterministic in cfg.seed.
TrainResult train(std::span<const MixtureExample> examples, const TrainConfig &cfg,
                  const EpochCallback &on_epoch = {});

/// Loads every manifest entry and trains on them.
TrainResult train(const std::string &manifest_path, const TrainConfig &cfg,
                  const EpochCallback &on_epoch = {});

/// Per-class deterministic split; every class keeps at least one training
/// mixture and, when it has two or more, one held-out mixture.
void split_holdout(std::span<const int> counts, double fraction, std::uint64_t seed,
                   std::vector<std::size_t> &train, std::vector<std::size_t> &heldout);

/// Chunk-vote count prediction for a whole mixture.
int predict_count(Separator &sep, const Signal &mixture, const ChunkSpec &spec = {});

struct HeldoutScore {
  double count_accuracy = 0.0;
  double mean_si_snr = 0.0;          // oracle count, matched, per source
  double mean_mixture_si_snr = 0.0;  // the mixture as every estimate
};

/// Count accuracy through predict_count and separation quality through
/// separate_with_count at the true count.
HeldoutScore evaluate_heldout(const ModelParams &params,
                              std::span<const MixtureExample> examples,
                              const ChunkSpec &spec = {});

}  // namespace varisep

#endif  // VARISEP_TRAIN_H_
