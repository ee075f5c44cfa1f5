// Copyright 2026 The lbscan Authors.
// SPDX-License-Identifier: Apache-2.0

#include "lbscan/train.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "lbscan/errors.hpp"

namespace lbscan::train {
namespace {

double parse_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) {
    throw std::invalid_argument("config key '" + key + "': expected a number, got '" + v + "'");
  }
  return out;
}

std::size_t parse_count(const std::string& key, const std::string& v) {
  const double d = parse_double(key, v);
  if (d < 0 || d != std::floor(d)) {
    throw std::invalid_argument("config key '" + key + "': expected a non-negative integer");
  }
  return static_cast<std::size_t>(d);
}

}  // namespace

LossResult cross_entropy(const TensorD& logits, std::span<const std::uint32_t> labels,
                         double smoothing) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size()) {
    throw ShapeError("cross_entropy: logits " + shape_str(logits.shape()) + " vs " +
                     std::to_string(labels.size()) + " labels");
  }
  const std::size_t B = logits.dim(0), C = logits.dim(1);
  LossResult out;
  out.d_logits = TensorD({B, C});
  std::vector<double> p(C);
  for (std::size_t b = 0; b < B; ++b) {
    if (labels[b] >= C) throw RangeError("label " + std::to_string(labels[b]) + " out of range");
    const double* z = &logits(b, 0);
    const double top = *std::max_element(z, z + C);
    double total = 0.0;
    for (std::size_t k = 0; k < C; ++k) total += std::exp(z[k] - top);
    const double log_total = std::log(total) + top;
    std::size_t arg = 0;
    for (std::size_t k = 0; k < C; ++k) {
      p[k] = std::exp(z[k] - log_total);
      if (z[k] > z[arg]) arg = k;
      const double target = (k == labels[b] ? 1.0 - smoothing : 0.0) +
                            smoothing / static_cast<double>(C);
      out.loss -= target * (z[k] - log_total);
      out.d_logits(b, k) = (p[k] - target) / static_cast<double>(B);
    }
    if (arg == labels[b]) ++out.correct;
  }
  out.loss /= static_cast<double>(B);
  return out;
}

bool decays(const std::string& name, const TensorD& t) {
  if (t.rank() < 2) return false;
  if (name == "pos" || name == "cls") return false;
  return !(name.size() >= 5 && name.compare(name.size() - 5, 5, "a_log") == 0);
}

AdamW::AdamW(const ModelWeights& like, AdamWConfig config)
    : config_(config), m_(like), v_(like) {
  m_.for_each([](const std::string&, TensorD& t) { t.fill(0.0); });
  v_.for_each([](const std::string&, TensorD& t) { t.fill(0.0); });
}

void AdamW::step(ModelWeights& weights, const ModelWeights& grads, double lr) {
  ++steps_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));

  std::vector<TensorD*> ws, ms, vs;
  std::vector<const TensorD*> gs;
  std::vector<bool> decay;
  weights.for_each([&](const std::string& name, TensorD& t) {
    ws.push_back(&t);
    decay.push_back(decays(name, t));
  });
  m_.for_each([&](const std::string&, TensorD& t) { ms.push_back(&t); });
  v_.for_each([&](const std::string&, TensorD& t) { vs.push_back(&t); });
  grads.for_each([&](const std::string&, const TensorD& t) { gs.push_back(&t); });
  if (gs.size() != ws.size() || ms.size() != ws.size()) {
    throw ShapeError("AdamW: parameter layout changed");
  }
  for (std::size_t i = 0; i < ws.size(); ++i) {
    TensorD& w = *ws[i];
    TensorD& m = *ms[i];
    TensorD& v = *vs[i];
    const TensorD& g = *gs[i];
    require_shape(g.shape(), w.shape(), "gradient");
    const double wd = decay[i] ? config_.weight_decay : 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = b1 * m[k] + (1.0 - b1) * g[k];
      v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
      const double update = (m[k] / c1) / (std::sqrt(v[k] / c2) + config_.eps);
      w[k] -= lr * (update + wd * w[k]);
    }
  }
}

double cosine_lr(std::size_t step, std::size_t total, std::size_t warmup, double base,
                 double floor) {
  if (step < warmup) {
    return base * static_cast<double>(step + 1) / static_cast<double>(warmup);
  }
  if (total <= warmup) return base;
  const double progress = std::min(
      1.0, static_cast<double>(step - warmup) / static_cast<double>(total - warmup));
  return floor + 0.5 * (base - floor) * (1.0 + std::cos(std::numbers::pi * progress));
}

StepResult train_step(Model& model, AdamW& opt, const TensorD& images,
                      std::span<const std::uint32_t> labels, double lr, double smoothing,
                      std::size_t workers, std::size_t step_index) {
  const std::size_t last_good = step_index == 0 ? 0 : step_index - 1;
  ModelCache cache;
  LossResult lr_out;
  ModelGrads g;
  try {
    const TensorD logits = model_forward(model, images, workers, &cache);
    lr_out = cross_entropy(logits, labels, smoothing);
    if (!std::isfinite(lr_out.loss)) {
      std::ostringstream msg;
      msg << "non-finite loss at step index " << step_index << " (lr " << lr << ")";
      throw TrainingError(msg.str(), last_good);
    }
    g = model_backward(model, cache, lr_out.d_logits, workers);
  } catch (const NonFiniteError& e) {
    // Diverged weights usually surface inside the forward pass first.
    throw TrainingError(std::string(e.what()) + " at step index " + std::to_string(step_index),
                        last_good);
  }
  g.weights.for_each([&](const std::string& name, const TensorD& t) {
    if (!t.all_finite()) {
      throw TrainingError("non-finite gradient in " + name + " at step index " +
                              std::to_string(step_index),
                          last_good);
    }
  });
  opt.step(model.weights, g.weights, lr);
  return {lr_out.loss,
          static_cast<double>(lr_out.correct) / static_cast<double>(labels.size())};
}

double evaluate(const Model& model, const TensorD& images,
                std::span<const std::uint32_t> labels, std::size_t batch,
                std::size_t workers) {
  const std::size_t n = images.dim(0);
  if (labels.size() != n) throw ShapeError("evaluate: image/label count mismatch");
  const std::size_t per = images.size() / n;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < n; start += batch) {
    const std::size_t m = std::min(batch, n - start);
    Shape shape = images.shape();
    shape[0] = m;
    TensorD chunk(shape, std::vector<double>(images.ptr() + start * per,
                                             images.ptr() + (start + m) * per));
    const TensorD logits = model_forward(model, chunk, workers);
    correct += cross_entropy(logits, labels.subspan(start, m)).correct;
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

TrainConfig TrainConfig::from_key_values(const KeyValues& kv) {
  TrainConfig c;
  auto get = [&](const char* key, auto apply) {
    if (auto it = kv.find(key); it != kv.end()) apply(it->first, it->second);
  };
  get("steps", [&](const std::string& k, const std::string& v) { c.steps = parse_count(k, v); });
  get("batch", [&](const std::string& k, const std::string& v) { c.batch = parse_count(k, v); });
  get("lr", [&](const std::string& k, const std::string& v) { c.lr = parse_double(k, v); });
  get("warmup", [&](const std::string& k, const std::string& v) { c.warmup = parse_count(k, v); });
  get("min_lr", [&](const std::string& k, const std::string& v) { c.min_lr = parse_double(k, v); });
  get("label_smoothing",
      [&](const std::string& k, const std::string& v) { c.smoothing = parse_double(k, v); });
  get("weight_decay",
      [&](const std::string& k, const std::string& v) { c.weight_decay = parse_double(k, v); });
  get("log_every",
      [&](const std::string& k, const std::string& v) { c.log_every = parse_count(k, v); });
  if (c.batch == 0) throw std::invalid_argument("batch must be >= 1");
  if (c.smoothing < 0.0 || c.smoothing >= 1.0) {
    throw std::invalid_argument("label_smoothing must be in [0, 1)");
  }
  return c;
}

void fit(Model& model, const TrainConfig& config,
         const std::function<Batch(std::size_t)>& next_batch,
         const std::function<void(const LogRow&)>& on_log, std::size_t workers) {
  AdamWConfig ac;
  ac.weight_decay = config.weight_decay;
  AdamW opt(model.weights, ac);
  double loss_sum = 0.0, acc_sum = 0.0;
  std::size_t count = 0;
  for (std::size_t step = 0; step < config.steps; ++step) {
    const Batch batch = next_batch(step);
    const double lr = cosine_lr(step, config.steps, config.warmup, config.lr, config.min_lr);
    const StepResult r =
        train_step(model, opt, batch.images, batch.labels, lr, config.smoothing, workers, step);
    loss_sum += r.loss;
    acc_sum += r.accuracy;
    ++count;
    const bool last = step + 1 == config.steps;
    if (on_log && ((config.log_every > 0 && (step + 1) % config.log_every == 0) || last)) {
      on_log({step + 1, lr, loss_sum / static_cast<double>(count),
              acc_sum / static_cast<double>(count)});
      loss_sum = acc_sum = 0.0;
      count = 0;
    }
  }
}

}  // namespace lbscan::train
