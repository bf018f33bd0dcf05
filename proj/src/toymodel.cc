// src/toymodel.cc


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

#include "varisep/toymodel.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>

#include "json.hpp"
#include "varisep/error.h"
#include "varisep/metrics.h"

namespace varisep {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr int kKernel = ModelConfig::kKernel;
constexpr int kStride = ModelConfig::kStride;

void CheckConfig(const ModelConfig &c) {
  if (c.N < 1 || c.B < 0 || c.K < 1)
    Fail(ErrorCode::kInvalidArgument, "model config needs N >= 1, B >= 0, K >= 1");
}

}  // namespace

ModelParams ModelParams::Zeros(const ModelConfig &config) {
  CheckConfig(config);
  const Index n = config.N;
  ModelParams p;
  p.config = config;
  p.enc_w = MatrixXd::Zero(n, kKernel);
  p.enc_b = VectorXd::Zero(n);
  p.blocks.resize(static_cast<std::size_t>(config.B));
  for (BackboneBlock &b : p.blocks) {
    b.mix = MatrixXd::Zero(3, n);
    b.w = MatrixXd::Zero(n, n);
    b.b = VectorXd::Zero(n);
  }
  p.count.w = MatrixXd::Zero(n, n);
  p.count.b = VectorXd::Zero(n);
  p.count.proj = MatrixXd::Zero(config.K, n);
  p.count.proj_b = VectorXd::Zero(config.K);
  p.heads.resize(static_cast<std::size_t>(config.K));
  for (int k = 1; k <= config.K; ++k) {
    DecoderHeadParams &h = p.heads[static_cast<std::size_t>(k - 1)];
    h.prelu = VectorXd::Zero(n);
    h.proj = MatrixXd::Zero(n * k, n);
    h.proj_b = VectorXd::Zero(n * k);
    h.basis = MatrixXd::Zero(kKernel, n);
  }
  return p;
}

ModelParams ModelParams::Random(const ModelConfig &config, std::uint64_t seed) {
  ModelParams p = Zeros(config);
  std::mt19937_64 rng(seed);
  auto fill = [&rng](auto &m, double fan_in) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double scale = 1.0 / std::sqrt(fan_in);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = scale * u(rng);
  };
  const double n = config.N;
  // Encoder: Hann-windowed cosine and sine filters, evenly spaced in frequency.
  const int n_cos = (config.N + 1) / 2, n_sin = config.N - n_cos;
  for (int i = 0; i < config.N; ++i) {
    const bool is_cos = i < n_cos;
    const int band = is_cos ? i : i - n_cos;
    const double w = std::numbers::pi * (band + 0.5) / (is_cos ? n_cos : std::max(n_sin, 1));
    for (int j = 0; j < kKernel; ++j) {
      const double hann = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * (j + 1) / (kKernel + 1));
      p.enc_w(i, j) = hann * (is_cos ? std::cos(w * j) : std::sin(w * j));
    }
    p.enc_w.row(i).normalize();
  }
  for (BackboneBlock &b : p.blocks) {
    b.mix.setZero();
    b.mix.row(1).setOnes();
    fill(b.w, n);
  }
  fill(p.count.w, n);
  fill(p.count.proj, n);
  for (DecoderHeadParams &h : p.heads) {
    h.prelu.setConstant(0.25);
    fill(h.proj, n);
    fill(h.basis, n);
  }
  return p;
}

namespace {

template <typename T, typename Params>
std::vector<TensorView<T>> Views(Params &p) {
  std::vector<TensorView<T>> v;
  auto add = [&v](std::string name, auto &m) {
    v.push_back({std::move(name), std::span<T>(m.data(), static_cast<std::size_t>(m.size()))});
  };
  add("encoder.w", p.enc_w);
  add("encoder.b", p.enc_b);
  for (std::size_t i = 0; i < p.blocks.size(); ++i) {
    const std::string pre = "backbone." + std::to_string(i) + ".";
    add(pre + "mix", p.blocks[i].mix);
    add(pre + "w", p.blocks[i].w);
    add(pre + "b", p.blocks[i].b);
  }
  add("count.w", p.count.w);
  add("count.b", p.count.b);
  add("count.proj", p.count.proj);
  add("count.proj_b", p.count.proj_b);
  for (std::size_t k = 0; k < p.heads.size(); ++k) {
    const std::string pre = "decoder." + std::to_string(k + 1) + ".";
    add(pre + "prelu", p.heads[k].prelu);
    add(pre + "proj", p.heads[k].proj);
    add(pre + "proj_b", p.heads[k].proj_b);
    add(pre + "basis", p.heads[k].basis);
  }
  return v;
}

}  // namespace

std::vector<TensorView<double>> ModelParams::tensors() { return Views<double>(*this); }

std::vector<TensorView<const double>> ModelParams::tensors() const {
  return Views<const double>(*this);
}

std::size_t ModelParams::num_params() const {
  std::size_t n = 0;
  for (const auto &t : tensors()) n += t.data.size();
  return n;
}

std::size_t NumFrames(std::size_t num_samples) {
  if (num_samples < static_cast<std::size_t>(kKernel))
    Fail(ErrorCode::kTooShort, "input shorter than the encoder kernel");
  return (num_samples - kKernel) / kStride + 1;
}

double InputScale(std::span<const double> x) {
  double energy = 0.0;
  for (double v : x) energy += v * v;
  if (!(energy > 0.0)) return 1.0;
  return std::sqrt(energy / static_cast<double>(x.size()));
}

namespace {

// ---- forward pieces with the intermediates backward needs ----

MatrixXd FrameMatrix(std::span<const double> x) {
  const auto frames = static_cast<Index>(NumFrames(x.size()));
  const double scale = InputScale(x);
  MatrixXd f(frames, kKernel);
  for (Index l = 0; l < frames; ++l)
    for (Index j = 0; j < kKernel; ++j)
      f(l, j) = x[static_cast<std::size_t>(l * kStride + j)] / scale;
  return f;
}

MatrixXd TemporalMix(const MatrixXd &h, const MatrixXd &mix) {
  const Index L = h.rows();
  MatrixXd z = h.array().rowwise() * mix.row(1).array();
  if (L > 1) {
    z.bottomRows(L - 1).array() += h.topRows(L - 1).array().rowwise() * mix.row(0).array();
    z.topRows(L - 1).array() += h.bottomRows(L - 1).array().rowwise() * mix.row(2).array();
  }
  return z;
}

struct BlockCache {
  MatrixXd z;  // temporal mix output
  MatrixXd t;  // tanh output
};

struct CountCache {
  VectorXd pooled;  // mean of the linear transform, before ReLU
  VectorXd relu;
  VectorXd logits;
  std::vector<double> probs;
};

struct HeadCache {
  MatrixXd act;   // PReLU output, L x N
  MatrixXd proj;  // L x (N*k)
  std::vector<Signal> sources;
};

struct Trunk {
  MatrixXd frames;   // L x kernel
  MatrixXd enc_pre;  // L x N
  std::vector<MatrixXd> block_in;
  std::vector<BlockCache> blocks;
  MatrixXd features;
};

Trunk RunTrunk(std::span<const double> x, const ModelParams &p) {
  Trunk t;
  t.frames = FrameMatrix(x);
  t.enc_pre = (t.frames * p.enc_w.transpose()).rowwise() + p.enc_b.transpose();
  MatrixXd h = t.enc_pre.cwiseMax(0.0);
  for (const BackboneBlock &b : p.blocks) {
    t.block_in.push_back(h);
    BlockCache c;
    c.z = TemporalMix(h, b.mix);
    c.t = ((c.z * b.w.transpose()).rowwise() + b.b.transpose()).array().tanh();
    h += c.t;
    t.blocks.push_back(std::move(c));
  }
  t.features = std::move(h);
  return t;
}

CountCache RunCount(const MatrixXd &features, const ModelParams &p) {
  CountCache c;
  const VectorXd mean_feat = features.colwise().mean().transpose();
  // Linear map commutes with the frame average.
  c.pooled = p.count.w * mean_feat + p.count.b;
  c.relu = c.pooled.cwiseMax(0.0);
  c.logits = p.count.proj * c.relu + p.count.proj_b;
  const double top = c.logits.maxCoeff();
  const VectorXd e = (c.logits.array() - top).exp();
  const double z = e.sum();
  c.probs.resize(static_cast<std::size_t>(e.size()));
  for (Index i = 0; i < e.size(); ++i) c.probs[static_cast<std::size_t>(i)] = e(i) / z;
  return c;
}

HeadCache RunHead(const MatrixXd &features, const ModelParams &p, int k,
                  std::size_t num_samples, int sample_rate, double out_scale = 1.0) {
  if (k < 1 || k > p.config.K)
    Fail(ErrorCode::kInvalidArgument, "decoder head " + std::to_string(k) + " out of range");
  const DecoderHeadParams &h = p.heads[static_cast<std::size_t>(k - 1)];
  const Index N = p.config.N, L = features.rows();
  HeadCache c;
  c.act = features;
  for (Index l = 0; l < L; ++l)
    for (Index n = 0; n < N; ++n)
      if (c.act(l, n) < 0.0) c.act(l, n) *= h.prelu(n);
  c.proj = (c.act * h.proj.transpose()).rowwise() + h.proj_b.transpose();
  for (int s = 0; s < k; ++s) {
    const MatrixXd synth = c.proj.middleCols(s * N, N) * h.basis.transpose();  // L x kernel
    Signal y;
    y.sample_rate = sample_rate;
    y.samples.assign(num_samples, 0.0);
    for (Index l = 0; l < L; ++l)
      for (Index j = 0; j < kKernel; ++j)
        y.samples[static_cast<std::size_t>(l * kStride + j)] += synth(l, j);
    if (out_scale != 1.0)
      for (double &v : y.samples) v *= out_scale;
    c.sources.push_back(std::move(y));
  }
  return c;
}

}  // namespace

MatrixXd encode(std::span<const double> x, const ModelParams &params) {
  const MatrixXd frames = FrameMatrix(x);  // already divided by InputScale
  return ((frames * params.enc_w.transpose()).rowwise() + params.enc_b.transpose())
      .cwiseMax(0.0);
}

MatrixXd backbone_forward(const MatrixXd &frames, const ModelParams &params) {
  MatrixXd h = frames;
  for (const BackboneBlock &b : params.blocks)
    h += ((TemporalMix(h, b.mix) * b.w.transpose()).rowwise() + b.b.transpose())
             .array()
             .tanh()
             .matrix();
  return h;
}

std::vector<double> count_head(const MatrixXd &features, const ModelParams &params) {
  return RunCount(features, params).probs;
}

std::vector<Signal> decoder_head(const MatrixXd &features, const ModelParams &params,
                                 int k, std::size_t num_samples, int sample_rate) {
  if (NumFrames(num_samples) != static_cast<std::size_t>(features.rows()))
    Fail(ErrorCode::kLengthMismatch, "feature frames do not match the output length");
  return RunHead(features, params, k, num_samples, sample_rate).sources;
}

ForwardOutput forward(const Signal &x, const ModelParams &params) {
  const Trunk t = RunTrunk(x.view(), params);
  const double scale = InputScale(x.view());
  ForwardOutput out;
  out.count_probs = RunCount(t.features, params).probs;
  out.pred_count = static_cast<int>(std::max_element(out.count_probs.begin(),
                                                     out.count_probs.end()) -
                                    out.count_probs.begin()) + 1;
  for (int k = 1; k <= params.config.K; ++k)
    out.per_head_sources.push_back(
        RunHead(t.features, params, k, x.size(), x.sample_rate, scale).sources);
  return out;
}

double loss_count(std::span<const double> count_probs, int true_k) {
  if (true_k < 1 || true_k > static_cast<int>(count_probs.size()))
    Fail(ErrorCode::kInvalidArgument, "true count outside 1..K");
  const double p = count_probs[static_cast<std::size_t>(true_k - 1)];
  if (p <= 0.0) return std::numeric_limits<double>::infinity();
  return -std::log(p);
}

double loss_decoders(std::span<const std::vector<Signal>> per_head_sources,
                     std::span<const Signal> refs) {
  if (refs.empty() || refs.size() > per_head_sources.size())
    Fail(ErrorCode::kInvalidArgument, "reference count outside 1..K");
  return upit(refs, per_head_sources[refs.size() - 1]).loss;
}

double loss_total(const ForwardOutput &out, std::span<const Signal> refs, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    Fail(ErrorCode::kInvalidArgument, "alpha must lie in [0, 1]");
  const int k = static_cast<int>(refs.size());
  double total = 0.0;
  if (alpha > 0.0) total += alpha * loss_count(out.count_probs, k);
  if (alpha < 1.0) total += (1.0 - alpha) * loss_decoders(out.per_head_sources, refs);
  return total;
}

LossAndGrad backward(const Signal &x, std::span<const Signal> refs,
                     const ModelParams &p, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    Fail(ErrorCode::kInvalidArgument, "alpha must lie in [0, 1]");
  const int k = static_cast<int>(refs.size());
  if (k < 1 || k > p.config.K)
    Fail(ErrorCode::kInvalidArgument, "reference count outside 1..K");
  const Index N = p.config.N;
  const Trunk t = RunTrunk(x.view(), p);
  const Index L = t.features.rows();

  LossAndGrad out;
  out.grad = ModelParams::Zeros(p.config);
  ModelParams &g = out.grad;
  MatrixXd d_feat = MatrixXd::Zero(L, N);

  // Count head, via log-softmax so the loss stays finite.
  const CountCache cc = RunCount(t.features, p);
  {
    const double top = cc.logits.maxCoeff();
    const double lse = top + std::log((cc.logits.array() - top).exp().sum());
    out.l_count = lse - cc.logits(k - 1);
    VectorXd d_logits(cc.logits.size());
    for (Index i = 0; i < d_logits.size(); ++i)
      d_logits(i) = alpha * cc.probs[static_cast<std::size_t>(i)];
    d_logits(k - 1) -= alpha;
    g.count.proj = d_logits * cc.relu.transpose();
    g.count.proj_b = d_logits;
    const VectorXd d_pooled =
        (p.count.proj.transpose() * d_logits).cwiseProduct(
            (cc.pooled.array() > 0.0).cast<double>().matrix());
    const VectorXd mean_feat = t.features.colwise().mean().transpose();
    g.count.w = d_pooled * mean_feat.transpose();
    g.count.b = d_pooled;
    const VectorXd d_mean = p.count.w.transpose() * d_pooled / static_cast<double>(L);
    d_feat.rowwise() += d_mean.transpose();
  }
  out.loss = alpha * out.l_count;

  if (alpha < 1.0) {
    const DecoderHeadParams &h = p.heads[static_cast<std::size_t>(k - 1)];
    DecoderHeadParams &gh = g.heads[static_cast<std::size_t>(k - 1)];
    const HeadCache hc = RunHead(t.features, p, k, x.size(), x.sample_rate);
    const PitResult pit = upit(refs, hc.sources);
    out.l_decoders = pit.loss;
    out.loss += (1.0 - alpha) * pit.loss;

    MatrixXd d_proj(L, N * k);
    for (int s = 0; s < k; ++s) {
      const int r = pit.assignment.row_to_col[static_cast<std::size_t>(s)];
      const SiSnrGrad sg = si_snr_with_grad(hc.sources[static_cast<std::size_t>(s)].view(),
                                            refs[static_cast<std::size_t>(r)].view());
      // loss = -(1 - alpha) * sum of SI-SNR
      MatrixXd d_synth(L, kKernel);
      for (Index l = 0; l < L; ++l)
        for (Index j = 0; j < kKernel; ++j)
          d_synth(l, j) = -(1.0 - alpha) * sg.d_est[static_cast<std::size_t>(l * kStride + j)];
      const auto q = hc.proj.middleCols(s * N, N);
      gh.basis += d_synth.transpose() * q;
      d_proj.middleCols(s * N, N) = d_synth * h.basis;
    }
    gh.proj = d_proj.transpose() * hc.act;
    gh.proj_b = d_proj.colwise().sum().transpose();
    const MatrixXd d_act = d_proj * h.proj;
    for (Index l = 0; l < L; ++l) {
      for (Index n = 0; n < N; ++n) {
        const double f = t.features(l, n);
        if (f < 0.0) {
          gh.prelu(n) += d_act(l, n) * f;
          d_feat(l, n) += d_act(l, n) * h.prelu(n);
        } else {
          d_feat(l, n) += d_act(l, n);
        }
      }
    }
  }
  if (!std::isfinite(out.loss))
    Fail(ErrorCode::kNonFinite, "loss is not finite");

  // Backbone, last block first.
  MatrixXd d_h = std::move(d_feat);
  for (std::size_t bi = p.blocks.size(); bi-- > 0;) {
    const BackboneBlock &b = p.blocks[bi];
    BackboneBlock &gb = g.blocks[bi];
    const BlockCache &c = t.blocks[bi];
    const MatrixXd &h_in = t.block_in[bi];
    const MatrixXd d_u = d_h.array() * (1.0 - c.t.array().square());
    gb.w = d_u.transpose() * c.z;
    gb.b = d_u.colwise().sum().transpose();
    const MatrixXd d_z = d_u * b.w;
    gb.mix.row(1) = (d_z.array() * h_in.array()).colwise().sum();
    MatrixXd d_in = d_h;  // residual path
    d_in.array() += d_z.array().rowwise() * b.mix.row(1).array();
    if (L > 1) {
      gb.mix.row(0) = (d_z.bottomRows(L - 1).array() * h_in.topRows(L - 1).array()).colwise().sum();
      gb.mix.row(2) = (d_z.topRows(L - 1).array() * h_in.bottomRows(L - 1).array()).colwise().sum();
      d_in.topRows(L - 1).array() += d_z.bottomRows(L - 1).array().rowwise() * b.mix.row(0).array();
      d_in.bottomRows(L - 1).array() += d_z.topRows(L - 1).array().rowwise() * b.mix.row(2).array();
    }
    d_h = std::move(d_in);
  }

  const MatrixXd d_pre = d_h.array() * (t.enc_pre.array() > 0.0).cast<double>();
  g.enc_w = d_pre.transpose() * t.frames;
  g.enc_b = d_pre.colwise().sum().transpose();
  return out;
}

namespace {

class ModelSeparator : public Separator {
 public:
  explicit ModelSeparator(ModelParams p) : params_(std::move(p)) {}
  int max_speakers() const override { return params_.config.K; }

  std::vector<double> count_probs(const Chunk &chunk) override {
    return count_head(backbone_forward(encode(chunk.data.view(), params_), params_), params_);
  }

  std::vector<Signal> decode(const Chunk &chunk, int k) override {
    const MatrixXd feats = backbone_forward(encode(chunk.data.view(), params_), params_);
    std::vector<Signal> out =
        decoder_head(feats, params_, k, chunk.data.size(), chunk.data.sample_rate);
    const double scale = InputScale(chunk.data.view());
    for (Signal &s : out)
      for (double &v : s.samples) v *= scale;
    return out;
  }

 private:
  ModelParams params_;
};

}  // namespace

std::unique_ptr<Separator> as_separator(ModelParams params) {
  return std::make_unique<ModelSeparator>(std::move(params));
}

void save_checkpoint(const std::string &path, const ModelParams &params) {
  nlohmann::json j;
  j["format"] = "varisep-ckpt-1";
  j["config"] = {{"N", params.config.N},   {"B", params.config.B},
                 {"K", params.config.K},   {"kernel", kKernel},
                 {"stride", kStride}};
  nlohmann::json tensors = nlohmann::json::object();
  for (const auto &t : params.tensors())
    tensors[t.name] = std::vector<double>(t.data.begin(), t.data.end());
  j["tensors"] = std::move(tensors);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) Fail(ErrorCode::kUnwritable, "cannot write checkpoint: " + path);
    out << j.dump() << '\n';
    if (!out) Fail(ErrorCode::kUnwritable, "cannot write checkpoint: " + path);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    Fail(ErrorCode::kUnwritable, "cannot write checkpoint: " + path);
  }
}

ModelParams load_checkpoint(const std::string &path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorCode::kMissingFile, "cannot open checkpoint: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception &e) {
    Fail(ErrorCode::kMalformedFile, path + ": " + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "varisep-ckpt-1")
      Fail(ErrorCode::kMalformedFile, path + ": unknown checkpoint format");
    ModelConfig cfg;
    cfg.N = j.at("config").at("N").get<int>();
    cfg.B = j.at("config").at("B").get<int>();
    cfg.K = j.at("config").at("K").get<int>();
    if (j.at("config").at("kernel").get<int>() != kKernel ||
        j.at("config").at("stride").get<int>() != kStride)
      Fail(ErrorCode::kMalformedFile, path + ": unsupported encoder geometry");
    ModelParams p = ModelParams::Zeros(cfg);
    const nlohmann::json &tensors = j.at("tensors");
    if (tensors.size() != p.tensors().size())
      Fail(ErrorCode::kMalformedFile, path + ": unexpected tensor set");
    for (auto &t : p.tensors()) {
      const auto values = tensors.at(t.name).get<std::vector<double>>();
      if (values.size() != t.data.size())
        Fail(ErrorCode::kMalformedFile, path + ": tensor " + t.name + " has the wrong size");
      std::copy(values.begin(), values.end(), t.data.begin());
    }
    return p;
  } catch (const nlohmann::json::exception &e) {
    Fail(ErrorCode::kMalformedFile, path + ": " + e.what());
  } catch (const Error &e) {
    if (e.code() == ErrorCode::kInvalidArgument)
      Fail(ErrorCode::kMalformedFile, path + ": " + e.what());
    throw;
  }
}

}  // namespace varisep
