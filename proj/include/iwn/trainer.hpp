#pragma once

#include <cstdint>
#include <vector>

#include "iwn/attacks.hpp"
#include "iwn/backbone.hpp"
#include "iwn/data_io.hpp"
#include "iwn/error.hpp"
#include "iwn/harness.hpp"
#include "iwn/objectives.hpp"

namespace iwn {

struct TrainConfig {
  double learning_rate = 1e-4;
  int epochs = 10;
  int batch_size = 1;
  int duplication = 1200;  ///< optimization steps per epoch on the single pair
  double alpha = 0.1;
  LossWeights weights{};
  ModelConfig model = ModelConfig::origin();
  std::uint64_t master_seed = 0;
  bool grad_clip = true;
  double clip_norm = 10.0;
  bool literal_rec = false;
  std::vector<AttackKind> attack_pool{kAllAttacks.begin(), kAllAttacks.end()};
  bool fixed_attack = false;  ///< reuse one damaged instance for every step
  std::vector<int> stability_counts{kStabilityCounts.begin(), kStabilityCounts.end()};
  bool record_stability = true;

  /// Throws InvalidConfig.
  void validate() const;
};

struct AdamOptions {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adaptive moment estimation over exactly the model's own parameter arrays.
class Adam {
 public:
  Adam(const ParameterSet<float>& like, AdamOptions options);

  /// Applies one update and advances the model's step counter.
  void step(Model& model, const ParameterSet<float>& grads);

  std::int64_t updates() const noexcept { return t_; }
  const ParameterSet<float>& first_moment() const noexcept { return m_; }

 private:
  AdamOptions options_;
  ParameterSet<float> m_;
  ParameterSet<float> v_;
  std::int64_t t_ = 0;
};

struct TrainState {
  Model model;
  Adam optimizer;
};

TrainState make_train_state(const TrainConfig& cfg);

/// Host, watermark and their DCT-embedded combination.
struct TrainPair {
  Image x;
  Image w;
  Image x_w;
};

TrainPair prepare_pair(const Image& x, const Image& w, double alpha);

/// The damaged instance used at `step` (0-based) for batch slot `slot`.
AttackSpec damage_for_step(const TrainConfig& cfg, std::int64_t step, int slot = 0);

/// Snapshot theta', damage x_w, evaluate the five terms and apply one update
/// to theta. Throws NonFiniteLoss naming the step and term.
LossBreakdown train_step(TrainState& state, const TrainPair& pair, const TrainConfig& cfg, std::int64_t step);

struct TrainHistory {
  std::vector<LossBreakdown> steps;
  std::vector<StabilityRow> epochs;
};

struct TrainResult {
  Checkpoint checkpoint;
  TrainHistory history;
};

class TrainObserver {
 public:
  virtual ~TrainObserver() = default;
  virtual void on_step(std::int64_t /*step*/, int /*epoch*/, const LossBreakdown& /*loss*/) {}
  virtual void on_epoch(int /*epoch*/, const Checkpoint& /*ckpt*/, const StabilityRow& /*row*/) {}
};

/// NonFiniteLoss raised by train(), carrying everything recorded so far.
class TrainingDiverged : public Error {
 public:
  TrainingDiverged(const Error& cause, TrainHistory partial)
      : Error(ErrorKind::NonFiniteLoss, cause.detail()), partial_(std::move(partial)) {}
  const TrainHistory& partial_history() const noexcept { return partial_; }

 private:
  TrainHistory partial_;
};

/// epochs x duplication steps on one (x, w) pair.
TrainResult train(const Image& x, const Image& w, const TrainConfig& cfg, TrainObserver* observer = nullptr);

}  // namespace iwn
