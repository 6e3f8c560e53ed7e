#pragma once

#include "iwn/backbone.hpp"
#include "iwn/dct_codec.hpp"
#include "iwn/tensor.hpp"

namespace iwn {

/// Weights of the combined objective. `lambda_rec` multiplies the
/// reconstruction term; `r` scales the tanh bound on the tightness term.
struct LossWeights {
  double lambda_rec = 25.0;
  double lambda_idem = 20.0;
  double lambda_tight = 2.5;
  double lambda_wm = 0.1;
  double lambda_origin = 0.1;
  double r = 1.5;

  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

struct LossBreakdown {
  double l_rec = 0.0;
  double l_idem = 0.0;
  double l_tight = 0.0;
  double l_wm = 0.0;
  double l_origin = 0.0;
  double total = 0.0;

  friend bool operator==(const LossBreakdown&, const LossBreakdown&) = default;
};

double total_loss(const LossBreakdown& parts, const LossWeights& weights);

struct ObjectiveOptions {
  LossWeights weights{};
  EmbedConfig embed{};
  bool literal_rec = false;  ///< anchor both reconstruction terms to x
};

// Every loss below is mean-reduced over pixels and channels. When `grad` is
// non-null the term's (unweighted) gradient w.r.t. the live parameters is
// accumulated into it; frozen parameters never receive gradients.

/// mean|x - f(x)| + mean|x_w - f(x_w)|  (or mean|x - f(x_w)| with literal_rec).
template <class T>
double reconstruction_loss(const BasicModel<T>& m, const Tensor<T>& x, const Tensor<T>& x_w, NoDeduce<ParameterSet<T>>* grad,
                           bool literal_rec = false);

/// mean|f_theta(z) - f_theta'(f_theta(z))|, gradient through the inner
/// application only. Throws StaleSnapshot unless `frozen` was taken at the
/// model's current step.
template <class T>
double idempotency_loss(const BasicModel<T>& m, const ParameterSnapshot<T>& frozen, const Tensor<T>& z,
                        NoDeduce<ParameterSet<T>>* grad);

/// -tanh(D / (r l_rec)) r l_rec with D = mean|f_theta'(z) - f_theta(f_theta'(z))|;
/// gradient through the outer application only, l_rec held constant.
template <class T>
double tightness_loss(const BasicModel<T>& m, const ParameterSnapshot<T>& frozen, const Tensor<T>& z, double r,
                      double l_rec, NoDeduce<ParameterSet<T>>* grad);

/// The scalar map D -> -tanh(D / s) s with s = r max(l_rec, 1e-8), and its derivative.
double tightness_from_distance(double distance, double r, double l_rec);
double tightness_slope(double distance, double r, double l_rec);

/// Mean over bins and channels of |DFT2(e1 - e2)|.
double spectral_residual(const Image& e1, const Image& e2);

/// Same for a single residual tensor; `grad` (optional) receives d/dE.
template <class T>
double spectral_residual(const Tensor<T>& residual, NoDeduce<Tensor<T>>* grad);

/// Unclipped DCT-domain extraction e(v) = idct2((dct2(v) - dct2(x)) / alpha).
template <class T>
Tensor<T> extract_linear(const Tensor<T>& v, const Tensor<T>& x, double alpha);

/// Adjoint of v -> e(v) applied to an upstream gradient.
template <class T>
Tensor<T> extract_linear_adjoint(const Tensor<T>& upstream, double alpha);

/// spectral_residual(e(x_w), e(f(x_w))).
template <class T>
double watermark_loss(const BasicModel<T>& m, const Tensor<T>& x, const Tensor<T>& x_w, EmbedConfig cfg,
                      NoDeduce<ParameterSet<T>>* grad);

/// spectral_residual(e(x), e(f(x))).
template <class T>
double origin_loss(const BasicModel<T>& m, const Tensor<T>& x, EmbedConfig cfg, NoDeduce<ParameterSet<T>>* grad);

/// All five terms for one step with each network application evaluated once.
/// `grad` receives the gradient of the weighted total.
template <class T>
LossBreakdown evaluate_objective(const BasicModel<T>& m, const ParameterSnapshot<T>& frozen, const Tensor<T>& x,
                                 const Tensor<T>& x_w, const Tensor<T>& z, const ObjectiveOptions& options,
                                 NoDeduce<ParameterSet<T>>* grad);

}  // namespace iwn
