#include "iwn/trainer.hpp"

#include <cmath>
#include <spdlog/spdlog.h>
#include <string>

#include "iwn/rng.hpp"

namespace iwn {
namespace {

void check_finite(const LossBreakdown& l, std::int64_t step) {
  const std::pair<const char*, double> terms[] = {{"l_rec", l.l_rec},     {"l_idem", l.l_idem},
                                                  {"l_tight", l.l_tight}, {"l_wm", l.l_wm},
                                                  {"l_origin", l.l_origin}, {"total", l.total}};
  for (const auto& [name, value] : terms) {
    if (!std::isfinite(value)) {
      throw Error(ErrorKind::NonFiniteLoss, "step " + std::to_string(step) + " term " + name);
    }
  }
}

double global_norm(const ParameterSet<float>& grads) {
  double sq = 0.0;
  for (const auto& p : grads)
    for (float v : p.values) sq += static_cast<double>(v) * v;
  return std::sqrt(sq);
}

}  // namespace

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::InvalidConfig, msg); };
  if (!(learning_rate >= 0.0)) fail("learning_rate must be >= 0");
  if (epochs < 1) fail("epochs must be >= 1");
  if (duplication < 1) fail("duplication must be >= 1");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (!(alpha > 0.0 && alpha <= 1.0)) fail("alpha must lie in (0, 1]");
  if (attack_pool.empty()) throw Error(ErrorKind::EmptyPool, "attack pool is empty");
  const auto& w = weights;
  if (w.lambda_rec < 0 || w.lambda_idem < 0 || w.lambda_tight < 0 || w.lambda_wm < 0 || w.lambda_origin < 0 || w.r < 0)
    fail("loss weights must be non-negative");
  for (int n : stability_counts)
    if (n < 0) fail("projection counts must be non-negative");
  model.validate();
}

Adam::Adam(const ParameterSet<float>& like, AdamOptions options)
    : options_(options), m_(zeros_like(like)), v_(zeros_like(like)) {}

void Adam::step(Model& model, const ParameterSet<float>& grads) {
  auto& params = model.mutable_parameters();
  if (grads.size() != params.size() || m_.size() != params.size()) {
    throw Error(ErrorKind::ShapeMismatch, "gradient set does not match the model");
  }
  ++t_;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const double lr = options_.learning_rate;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i].values;
    auto& m = m_[i].values;
    auto& v = v_[i].values;
    const auto& g = grads[i].values;
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = static_cast<float>(b1 * m[k] + (1.0 - b1) * g[k]);
      v[k] = static_cast<float>(b2 * v[k] + (1.0 - b2) * static_cast<double>(g[k]) * g[k]);
      const double update = lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + options_.eps);
      p[k] = static_cast<float>(p[k] - update);
    }
  }
  model.advance_step();
}

TrainState make_train_state(const TrainConfig& cfg) {
  cfg.validate();
  Model model = build_model<float>(cfg.model, derive_seed(cfg.master_seed, {kInitStream}));
  Adam adam(model.parameters(), AdamOptions{cfg.learning_rate});
  return TrainState{std::move(model), std::move(adam)};
}

TrainPair prepare_pair(const Image& x, const Image& w, double alpha) {
  double clipped = 0.0;
  Image x_w = embed(x, w, EmbedConfig{alpha}, &clipped);
  if (clipped > 0.0) spdlog::info("embedding clipped {:.3f}% of pixel values", 100.0 * clipped);
  return TrainPair{x, w, std::move(x_w)};
}

AttackSpec damage_for_step(const TrainConfig& cfg, std::int64_t step, int slot) {
  const auto effective_step = cfg.fixed_attack ? 0 : step;
  const auto effective_slot = cfg.fixed_attack ? 0 : slot;
  return sample_attack(cfg.attack_pool,
                       derive_seed(cfg.master_seed, {kAttackStream, static_cast<std::uint64_t>(effective_step),
                                                     static_cast<std::uint64_t>(effective_slot)}));
}

LossBreakdown train_step(TrainState& state, const TrainPair& pair, const TrainConfig& cfg, std::int64_t step) {
  Model& model = state.model;
  const auto frozen = snapshot(model);
  const auto x = to_tensor<float>(pair.x);
  const auto x_w = to_tensor<float>(pair.x_w);
  const ObjectiveOptions options{cfg.weights, EmbedConfig{cfg.alpha}, cfg.literal_rec};

  auto grads = zeros_like(model.parameters());
  LossBreakdown mean;
  for (int slot = 0; slot < cfg.batch_size; ++slot) {
    const auto z = to_tensor<float>(apply_attack(pair.x_w, damage_for_step(cfg, step, slot)));
    const auto parts = evaluate_objective(model, frozen, x, x_w, z, options, &grads);
    check_finite(parts, step);
    mean.l_rec += parts.l_rec;
    mean.l_idem += parts.l_idem;
    mean.l_tight += parts.l_tight;
    mean.l_wm += parts.l_wm;
    mean.l_origin += parts.l_origin;
  }
  const double inv_batch = 1.0 / cfg.batch_size;
  mean.l_rec *= inv_batch;
  mean.l_idem *= inv_batch;
  mean.l_tight *= inv_batch;
  mean.l_wm *= inv_batch;
  mean.l_origin *= inv_batch;
  mean.total = total_loss(mean, cfg.weights);

  double scale = inv_batch;
  const double norm = global_norm(grads) * inv_batch;
  if (!std::isfinite(norm)) throw Error(ErrorKind::NonFiniteLoss, "step " + std::to_string(step) + " term gradient");
  if (cfg.grad_clip && norm > cfg.clip_norm) scale *= cfg.clip_norm / norm;
  if (scale != 1.0)
    for (auto& p : grads)
      for (auto& v : p.values) v = static_cast<float>(v * scale);

  state.optimizer.step(model, grads);
  return mean;
}

TrainResult train(const Image& x, const Image& w, const TrainConfig& cfg, TrainObserver* observer) {
  TrainState state = make_train_state(cfg);
  const TrainPair pair = prepare_pair(x, w, cfg.alpha);
  TrainHistory history;
  history.steps.reserve(static_cast<std::size_t>(cfg.epochs) * cfg.duplication);

  TrainingMeta meta;
  meta.seed = cfg.master_seed;
  meta.alpha = cfg.alpha;

  std::int64_t step = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (int i = 0; i < cfg.duplication; ++i, ++step) {
      LossBreakdown loss;
      try {
        loss = train_step(state, pair, cfg, step);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::NonFiniteLoss) throw;
        throw TrainingDiverged(e, std::move(history));
      }
      history.steps.push_back(loss);
      if (observer) observer->on_step(step + 1, epoch, loss);
    }
    StabilityRow row{epoch, {}};
    if (cfg.record_stability) row = stability_row(state.model, pair.x_w, cfg.stability_counts, epoch);
    history.epochs.push_back(row);
    if (observer) {
      meta.epoch = epoch;
      meta.loss_history = history.steps;
      observer->on_epoch(epoch, make_checkpoint(state.model, meta), row);
    }
  }
  meta.epoch = cfg.epochs;
  meta.loss_history = history.steps;
  return TrainResult{make_checkpoint(state.model, std::move(meta)), std::move(history)};
}

}  // namespace iwn
