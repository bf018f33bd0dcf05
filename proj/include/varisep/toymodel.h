// include/varisep/toymodel.h


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

#ifndef VARISEP_TOYMODEL_H_
#define VARISEP_TOYMODEL_H_

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "varisep/pipeline.h"
#include "varisep/signal.h"

namespace varisep {

// A small multi-decoder separator with a speaker-count head:
//
//   waveform -> conv encoder (kernel 8, stride 4, ReLU)
//            -> B residual blocks (+-1 frame depthwise mix, N x N, tanh)
//            -> count head: linear, mean over frames, ReLU, linear, softmax
//            -> decoder head k: PReLU, 1x1 projection to N*k, per speaker a
//               transposed conv (8-sample frames, stride 4) back to audio.
//
// The input is divided by its RMS before encoding and the outputs are scaled
// back. Everything is double precision with hand-written reverse-mode
// gradients.

struct ModelConfig {
  int N = 32;  // feature channels
  int B = 2;   // backbone blocks
  int K = 3;   // maximum speaker count (one decoder head per count)

  static constexpr int kKernel = 8;
  static constexpr int kStride = 4;
};

struct BackboneBlock {
  Eigen::MatrixXd mix;  // 3 x N; rows weigh frames l-1, l, l+1
  Eigen::MatrixXd w;    // N x N
  Eigen::VectorXd b;    // N
};

struct CountHeadParams {
  Eigen::MatrixXd w;       // N x N
  Eigen::VectorXd b;       // N
  Eigen::MatrixXd proj;    // K x N
  Eigen::VectorXd proj_b;  // K
};

struct DecoderHeadParams {
  Eigen::VectorXd prelu;   // N slopes
  Eigen::MatrixXd proj;    // (N*k) x N
  Eigen::VectorXd proj_b;  // N*k
  Eigen::MatrixXd basis;   // kernel x N synthesis filters
};

/// Named flat view of one parameter tensor.
template <typename T>
struct TensorView {
  std::string name;
  std::span<T> data;
};

struct ModelParams {
  ModelConfig config;
  Eigen::MatrixXd enc_w;  // N x kernel
  Eigen::VectorXd enc_b;  // N
  std::vector<BackboneBlock> blocks;
  CountHeadParams count;
  std::vector<DecoderHeadParams> heads;  // heads[k-1] emits k channels

  /// All tensors zero, with the shapes implied by `config`.
  static ModelParams Zeros(const ModelConfig &config);
  /// Band-pass encoder filters and scaled uniform weights elsewhere,
  /// deterministic in `seed`.
  static ModelParams Random(const ModelConfig &config, std::uint64_t seed);

  std::vector<TensorView<double>> tensors();
  std::vector<TensorView<const double>> tensors() const;
  std::size_t num_params() const;
};

/// Number of encoder frames for T samples: floor((T - 8) / 4) + 1.
std::size_t NumFrames(std::size_t num_samples);

/// RMS of x, or 1 for an all-zero input. The encoder sees x / InputScale(x)
/// and forward() scales the decoded waveforms back by it, which makes the
/// model invariant to the input level.
double InputScale(std::span<const double> x);

/// L x N ReLU features of the level-normalized input. Throws kTooShort for
/// fewer than 8 samples.
Eigen::MatrixXd encode(std::span<const double> x, const ModelParams &params);

Eigen::MatrixXd backbone_forward(const Eigen::MatrixXd &frames,
                                 const ModelParams &params);

/// Softmax over counts 1..K.
std::vector<double> count_head(const Eigen::MatrixXd &features,
                               const ModelParams &params);

/// k waveforms of num_samples each, at the normalized level (not rescaled).
std::vector<Signal> decoder_head(const Eigen::MatrixXd &features,
                                 const ModelParams &params, int k,
                                 std::size_t num_samples, int sample_rate);

struct ForwardOutput {
  std::vector<std::vector<Signal>> per_head_sources;  // [k-1] has k channels
  std::vector<double> count_probs;
  int pred_count = 0;
};

ForwardOutput forward(const Signal &x, const ModelParams &params);

/// -log p(true_k); +inf when that probability is zero.
double loss_count(std::span<const double> count_probs, int true_k);

/// uPIT loss of the head matching the number of references.
double loss_decoders(std::span<const std::vector<Signal>> per_head_sources,
                     std::span<const Signal> refs);

/// alpha * loss_count + (1 - alpha) * loss_decoders.
double loss_total(const ForwardOutput &out, std::span<const Signal> refs,
                  double alpha);

struct LossAndGrad {
  double loss = 0.0;
  double l_count = 0.0;
  double l_decoders = 0.0;  // 0 and not evaluated when alpha == 1
  ModelParams grad;
};

/// Loss and gradient for one example; the optimal uPIT permutation is
/// held fixed. Heads other than the true count's receive zero gradient.
LossAndGrad backward(const Signal &x, std::span<const Signal> refs,
                     const ModelParams &params, double alpha);

/// Separator adapter for the inference pipeline.
std::unique_ptr<Separator> as_separator(ModelParams params);

/// JSON checkpoint tagged "varisep-ckpt-1".
void save_checkpoint(const std::string &path, const ModelParams &params);
ModelParams load_checkpoint(const std::string &path);

}  // namespace varisep

#endif  // VARISEP_TOYMODEL_H_
