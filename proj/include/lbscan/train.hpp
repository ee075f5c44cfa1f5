// Copyright 2026 The lbscan Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lbscan/config.hpp"
#include "lbscan/model.hpp"

namespace lbscan::train {

// Raised when a step produces a non-finite loss or gradient.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, std::size_t last_good_step)
      : std::runtime_error(what), last_good_step_(last_good_step) {}
  std::size_t last_good_step() const noexcept { return last_good_step_; }

 private:
  std::size_t last_good_step_;
};

struct LossResult {
  double loss = 0.0;        // mean over the batch
  std::size_t correct = 0;  // argmax hits
  TensorD d_logits;         // dL/dlogits for the mean loss
};

// Softmax cross-entropy against (1 - s) one-hot + s / classes targets.
LossResult cross_entropy(const TensorD& logits, std::span<const std::uint32_t> labels,
                         double smoothing = 0.0);

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.05;
};

// Decay applies to projection matrices only: rank >= 2, excluding positional
// embeddings, class tokens and a_log.
bool decays(const std::string& name, const TensorD& t);

// Decoupled weight decay: p -= lr * (m_hat / (sqrt(v_hat) + eps) + wd * p).
class AdamW {
 public:
  AdamW(const ModelWeights& like, AdamWConfig config = {});

  void step(ModelWeights& weights, const ModelWeights& grads, double lr);

  std::size_t steps() const noexcept { return steps_; }
  const ModelWeights& first_moment() const noexcept { return m_; }
  const ModelWeights& second_moment() const noexcept { return v_; }
  const AdamWConfig& config() const noexcept { return config_; }

 private:
  AdamWConfig config_;
  ModelWeights m_;
  ModelWeights v_;
  std::size_t steps_ = 0;
};

// Linear warmup from base/warmup to base over `warmup` steps, then cosine
// decay to `floor` at `total`.
double cosine_lr(std::size_t step, std::size_t total, std::size_t warmup, double base,
                 double floor = 0.0);

struct StepResult {
  double loss = 0.0;
  double accuracy = 0.0;
};

// Forward, backward and one optimizer update. Throws TrainingError when the
// loss or any gradient is non-finite; the weights are left untouched then.
StepResult train_step(Model& model, AdamW& opt, const TensorD& images,
                      std::span<const std::uint32_t> labels, double lr, double smoothing,
                      std::size_t workers = 1, std::size_t step_index = 0);

// Accuracy over a dataset, evaluated in batches.
double evaluate(const Model& model, const TensorD& images,
                std::span<const std::uint32_t> labels, std::size_t batch = 64,
                std::size_t workers = 1);

struct TrainConfig {
  std::size_t steps = 1000;
  std::size_t batch = 32;
  double lr = 3e-3;
  std::size_t warmup = 50;
  double min_lr = 0.0;
  double smoothing = 0.0;
  double weight_decay = 0.05;
  std::size_t log_every = 50;

  // Reads known keys (steps, batch, lr, warmup, min_lr, label_smoothing,
  // weight_decay, log_every); others are ignored.
  static TrainConfig from_key_values(const KeyValues& kv);
};

struct Batch {
  TensorD images;
  std::vector<std::uint32_t> labels;
};

struct LogRow {
  std::size_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
  double accuracy = 0.0;
};

// Runs `config.steps` steps, drawing batch k from next_batch(k). Every
// log_every steps, and at the last step, on_log receives the running means
// since the previous log row.
void fit(Model& model, const TrainConfig& config,
         const std::function<Batch(std::size_t)>& next_batch,
         const std::function<void(const LogRow&)>& on_log, std::size_t workers = 1);

}  // namespace lbscan::train
