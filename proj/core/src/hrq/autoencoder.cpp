// SPDX-License-Identifier: Apache-2.0
#include "earthmapper/hrq/autoencoder.hpp"

#include <cmath>
#include <string>

#include "earthmapper/common/error.hpp"
#include "earthmapper/common/rng.hpp"
#include "earthmapper/num/ops.hpp"

namespace emap::hrq {

using num::Graph;
using num::Tensor;
using num::Var;

namespace {

Tensor<float> gaussian(num::Shape shape, double stddev, Rng& rng) {
  Tensor<float> t(std::move(shape));
  for (auto& v : t.data) v = static_cast<float>(rng.normal() * stddev);
  return t;
}

}  // namespace

Autoencoder::Autoencoder(AutoencoderConfig cfg, std::uint64_t seed) : cfg_(cfg) {
  if (cfg.latent_dim < 1 || cfg.hidden < 1 || cfg.patch < 1) throw ConfigError("autoencoder sizes must be positive");
  Rng rng(seed);
  const int p2 = cfg.patch * cfg.patch;
  const int in1 = p2 * 3, in2 = p2 * cfg.hidden;
  params_.add("enc.w1", gaussian({in1, cfg.hidden}, 1.0 / std::sqrt(in1), rng));
  params_.add("enc.b1", Tensor<float>({cfg.hidden}), false);
  params_.add("enc.w2", gaussian({in2, cfg.latent_dim}, 1.0 / std::sqrt(in2), rng));
  params_.add("enc.b2", Tensor<float>({cfg.latent_dim}), false);
  params_.add("dec.w1", gaussian({cfg.latent_dim, in2}, 1.0 / std::sqrt(cfg.latent_dim), rng));
  params_.add("dec.b1", Tensor<float>({in2}), false);
  params_.add("dec.w2", gaussian({cfg.hidden, in1}, 1.0 / std::sqrt(cfg.hidden), rng));
  params_.add("dec.b2", Tensor<float>({in1}), false);
}

Var<float> Autoencoder::encode_graph(num::BoundParams<float>& w, Var<float> pixels, int side) const {
  const int p = cfg_.patch;
  const auto rows = pixels.shape()[0];
  auto h = num::space_to_depth(pixels, p);  // [rows/p * side/p, p*p*3]
  h = num::gelu(num::add(num::matmul(h, w("enc.w1")), w("enc.b1")));
  h = num::reshape(h, {rows / p, side / p, cfg_.hidden});
  h = num::space_to_depth(h, p);
  h = num::add(num::matmul(h, w("enc.w2")), w("enc.b2"));
  return num::reshape(h, {rows / (p * p), side / (p * p), cfg_.latent_dim});
}

Var<float> Autoencoder::decode_graph(num::BoundParams<float>& w, Var<float> latent, int latent_side) const {
  const int p = cfg_.patch;
  const auto rows = latent.shape()[0];
  auto h = num::reshape(latent, {rows * latent_side, cfg_.latent_dim});
  h = num::gelu(num::add(num::matmul(h, w("dec.w1")), w("dec.b1")));
  h = num::depth_to_space(h, static_cast<int>(rows * p), latent_side * p, p);  // [rows*p, side*p, hidden]
  h = num::reshape(h, {rows * p * latent_side * p, cfg_.hidden});
  h = num::add(num::matmul(h, w("dec.w2")), w("dec.b2"));
  return num::depth_to_space(h, static_cast<int>(rows * p * p), latent_side * p * p, p);
}

Tensor<float> pixels_tensor(const std::vector<const RgbImage*>& images) {
  const int side = images.front()->width;
  Tensor<float> t({static_cast<std::int64_t>(images.size()) * side, side, 3});
  std::size_t o = 0;
  for (const RgbImage* img : images) {
    if (img->width != side || img->height != side) throw ShapeError("batch images differ in size");
    for (std::uint8_t v : img->pixels) t.data[o++] = static_cast<float>(v) / 255.0f - 0.5f;
  }
  return t;
}

LatentGrid Autoencoder::encode(const RgbImage& img) const {
  const int f = downsample();
  if (img.width != img.height || img.width % f != 0 || img.width == 0) {
    throw ShapeError("autoencoder input must be square with a side divisible by " + std::to_string(f) + ", got " +
                     std::to_string(img.width) + "x" + std::to_string(img.height));
  }
  Graph<float> g(false);
  num::BoundParams<float> w(g, params_);
  auto z = encode_graph(w, g.constant(pixels_tensor({&img})), img.width);
  const int s = img.width / f;
  LatentGrid out(s, s, cfg_.latent_dim);
  const auto& v = z.value().data;
  for (std::size_t i = 0; i < v.size(); ++i) out.data[i] = v[i];
  return out;
}

FloatImage Autoencoder::decode_float(const LatentGrid& latent) const {
  if (latent.d != cfg_.latent_dim || latent.h != latent.w) {
    throw ShapeError("latent grid " + std::to_string(latent.h) + "x" + std::to_string(latent.w) + "x" +
                     std::to_string(latent.d) + " does not fit the decoder");
  }
  Graph<float> g(false);
  Tensor<float> t({latent.h, latent.w, latent.d});
  for (std::size_t i = 0; i < t.data.size(); ++i) t.data[i] = static_cast<float>(latent.data[i]);
  num::BoundParams<float> w(g, params_);
  auto x = decode_graph(w, g.constant(std::move(t)), latent.w);
  const int side = latent.w * downsample();
  FloatImage img(side, side, 3);
  const auto& v = x.value().data;
  for (std::size_t i = 0; i < v.size(); ++i) img.data[i] = static_cast<double>(v[i]) + 0.5;
  return img;
}

RgbImage Autoencoder::decode(const LatentGrid& latent) const { return to_rgb8(decode_float(latent)); }

std::vector<double> train_autoencoder(Autoencoder& ae, const std::vector<RgbImage>& images,
                                      const AutoencoderTrainConfig& cfg, const TrainProgress& progress) {
  if (images.empty()) throw UsageError("autoencoder training needs at least one image");
  const int side = images.front().width;
  if (side != images.front().height || side % ae.downsample() != 0) {
    throw ShapeError("autoencoder training images must be square with a side divisible by " +
                     std::to_string(ae.downsample()));
  }
  auto& params = ae.params();
  num::AdamWState<float> state;
  num::AdamWConfig opt;
  opt.weight_decay = 0.0;
  std::vector<double> trace;
  trace.reserve(cfg.steps);
  for (int step = 0; step < cfg.steps; ++step) {
    Rng rng(Rng::derive(cfg.seed, static_cast<std::uint64_t>(step)));
    std::vector<const RgbImage*> batch;
    for (int b = 0; b < cfg.batch; ++b) batch.push_back(&images[rng.below(images.size())]);

    Graph<float> g;
    num::BoundParams<float> w(g, params);
    auto x = g.constant(pixels_tensor(batch));
    auto recon = ae.decode_graph(w, ae.encode_graph(w, x, side), side / ae.downsample());
    auto diff = num::sub(recon, x);
    auto loss = num::mean(num::mul(diff, diff));
    g.backward(loss);
    const double l = loss.value().item();
    if (!std::isfinite(l)) throw TrainingError("autoencoder loss diverged at step " + std::to_string(step));
    trace.push_back(l);

    const auto grads = w.grads();
    opt.lr = num::warmup_cosine(step, cfg.steps, cfg.lr, cfg.warmup);
    num::adamw_step<float>(params, grads, opt, state);
    if (progress) progress(step, l);
  }
  return trace;
}

}  // namespace emap::hrq
