#include "iwn/objectives.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <map>
#include <mutex>
#include <numbers>
#include <tuple>

#include "iwn/error.hpp"

namespace iwn {
namespace {

constexpr double kRecFloor = 1e-8;

template <class T>
using CMatrix = Eigen::Matrix<std::complex<T>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using RMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// W[k][m] = exp(-2 pi i k m / n); symmetric.
template <class T>
const CMatrix<T>& dft_basis(int n) {
  static std::mutex mutex;
  static std::map<int, CMatrix<T>> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  CMatrix<T> w(n, n);
  for (int k = 0; k < n; ++k)
    for (int m = 0; m < n; ++m) {
      const double angle = -2.0 * std::numbers::pi * static_cast<double>((static_cast<long long>(k) * m) % n) / n;
      w(k, m) = std::complex<T>(static_cast<T>(std::cos(angle)), static_cast<T>(std::sin(angle)));
    }
  return cache.emplace(n, std::move(w)).first->second;
}

void require_same(const auto& a, const auto& b, const char* what) {
  if (!a.same_shape(b)) throw Error(ErrorKind::ShapeMismatch, what);
}

// mean|a - b| and, optionally, scale * d/db accumulated into grad_b.
template <class T>
double l1_mean(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>* grad_b, double scale) {
  require_same(a, b, "l1 operands differ in shape");
  const double n = static_cast<double>(a.size());
  double sum = 0.0;
  const T step = static_cast<T>(scale / n);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - b.data[i];
    sum += std::abs(d);
    if (grad_b) grad_b->data[i] += d > 0 ? -step : (d < 0 ? step : T(0));
  }
  return sum / n;
}

template <class T>
Tensor<T> subtract(const Tensor<T>& a, const Tensor<T>& b) {
  Tensor<T> out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] -= b.data[i];
  return out;
}

// spectral_residual(e(anchor) - e(output)) and scale * d/d(output) into grad_output.
template <class T>
double extraction_head(const Tensor<T>& anchor, const Tensor<T>& output, const Tensor<T>& reference, double alpha,
                       Tensor<T>* grad_output, double scale) {
  const Tensor<T> residual = subtract(extract_linear(anchor, reference, alpha), extract_linear(output, reference, alpha));
  Tensor<T> d_residual;
  const double value = spectral_residual(residual, grad_output ? &d_residual : nullptr);
  if (grad_output) {
    const Tensor<T> back = extract_linear_adjoint(d_residual, alpha);
    for (std::size_t i = 0; i < back.size(); ++i) grad_output->data[i] -= static_cast<T>(scale) * back.data[i];
  }
  return value;
}

template <class T>
Tensor<T> run(const ParameterSet<T>& params, const ModelConfig& cfg, const Tensor<T>& in, NoDeduce<ForwardTrace<T>>* trace) {
  return network_forward(cfg, params, in, trace);
}

template <class T>
void check_fresh(const BasicModel<T>& m, const ParameterSnapshot<T>& frozen) {
  if (frozen.step() != m.step()) {
    throw Error(ErrorKind::StaleSnapshot, "snapshot step " + std::to_string(frozen.step()) + " != model step " +
                                              std::to_string(m.step()));
  }
}

template <class T>
Tensor<T> zeros_of(const Tensor<T>& t) {
  return Tensor<T>(t.channels, t.height, t.width);
}

// Shared pieces of the two idempotency-style terms. Each returns the value and
// accumulates `scale` times its gradient into `grad`.
template <class T>
double idem_term(const BasicModel<T>& m, const ParameterSnapshot<T>& frozen, const Tensor<T>& z,
                 NoDeduce<ParameterSet<T>>* grad, double scale) {
  const auto& cfg = m.config();
  ForwardTrace<T> inner_trace, outer_trace;
  const Tensor<T> fz = run(m.parameters(), cfg, z, grad ? &inner_trace : nullptr);
  const Tensor<T> ffz = run(frozen.parameters(), cfg, fz, grad ? &outer_trace : nullptr);
  if (!grad) return l1_mean(fz, ffz, static_cast<Tensor<T>*>(nullptr), 0.0);

  Tensor<T> g_outer = zeros_of(ffz);
  const double value = l1_mean(fz, ffz, &g_outer, scale);
  // d/d(fz) of mean|fz - ffz| directly is the negation of d/d(ffz).
  Tensor<T> g_fz = g_outer;
  for (auto& v : g_fz.data) v = -v;
  // Path through the frozen outer copy: input gradient only.
  const Tensor<T> via_outer = network_backward(cfg, frozen.parameters(), outer_trace, g_outer,
                                               static_cast<ParameterSet<T>*>(nullptr), true);
  for (std::size_t i = 0; i < g_fz.size(); ++i) g_fz.data[i] += via_outer.data[i];
  network_backward(cfg, m.parameters(), inner_trace, g_fz, grad, false);
  return value;
}

template <class T>
double tight_term(const BasicModel<T>& m, const ParameterSnapshot<T>& frozen, const Tensor<T>& z, double r,
                  double l_rec, NoDeduce<ParameterSet<T>>* grad, double scale) {
  const auto& cfg = m.config();
  const Tensor<T> inner = run(frozen.parameters(), cfg, z, static_cast<ForwardTrace<T>*>(nullptr));
  ForwardTrace<T> outer_trace;
  const Tensor<T> outer = run(m.parameters(), cfg, inner, grad ? &outer_trace : nullptr);
  Tensor<T> g_outer = zeros_of(outer);
  const double distance = l1_mean(inner, outer, grad ? &g_outer : nullptr, 1.0);
  const double value = tightness_from_distance(distance, r, l_rec);
  if (grad) {
    const double slope = scale * tightness_slope(distance, r, l_rec);
    for (auto& v : g_outer.data) v = static_cast<T>(v * slope);
    network_backward(cfg, m.parameters(), outer_trace, g_outer, grad, false);
  }
  return value;
}

// Both terms together. With theta' numerically equal to theta, f'(z) = f(z) and
// f(f'(z)) = f'(f(z)), so one inner and one outer pass serve both; the outer
// backward carries the tightness parameter gradient and the idempotency input
// gradient at once. Returns {l_idem, l_tight}.
template <class T>
std::pair<double, double> self_terms(const BasicModel<T>& m, const ParameterSnapshot<T>& frozen, const Tensor<T>& z,
                                     double r, double l_rec, NoDeduce<ParameterSet<T>>* grad, double idem_scale,
                                     double tight_scale) {
  const auto& cfg = m.config();
  ForwardTrace<T> inner_trace, outer_trace;
  const Tensor<T> fz = run(m.parameters(), cfg, z, grad ? &inner_trace : nullptr);
  const Tensor<T> ffz = run(frozen.parameters(), cfg, fz, grad ? &outer_trace : nullptr);
  Tensor<T> g_outer = zeros_of(ffz);
  const double distance = l1_mean(fz, ffz, grad ? &g_outer : nullptr, 1.0);
  const double tight = tightness_from_distance(distance, r, l_rec);
  if (!grad) return {distance, tight};

  const double slope = tight_scale * tightness_slope(distance, r, l_rec);
  const Tensor<T> via_outer = network_backward(cfg, frozen.parameters(), outer_trace, g_outer, grad, true, slope);
  Tensor<T> g_fz = zeros_of(fz);
  for (std::size_t i = 0; i < g_fz.size(); ++i)
    g_fz.data[i] = static_cast<T>(idem_scale * (via_outer.data[i] - g_outer.data[i]));
  network_backward(cfg, m.parameters(), inner_trace, g_fz, grad, false);
  return {distance, tight};
}

}  // namespace

double total_loss(const LossBreakdown& p, const LossWeights& w) {
  return w.lambda_rec * p.l_rec + w.lambda_idem * p.l_idem + w.lambda_tight * p.l_tight + w.lambda_wm * p.l_wm +
         w.lambda_origin * p.l_origin;
}

double tightness_from_distance(double distance, double r, double l_rec) {
  const double s = r * std::max(l_rec, kRecFloor);
  return -std::tanh(distance / s) * s;
}

double tightness_slope(double distance, double r, double l_rec) {
  const double s = r * std::max(l_rec, kRecFloor);
  const double t = std::tanh(distance / s);
  return -(1.0 - t * t);
}

template <class T>
double spectral_residual(const Tensor<T>& residual, NoDeduce<Tensor<T>>* grad) {
  const int rows = residual.height;
  const int cols = residual.width;
  const auto& wr = dft_basis<T>(rows);
  const auto& wc = dft_basis<T>(cols);
  const double count = static_cast<double>(residual.size());
  if (grad) *grad = zeros_of(residual);
  double sum = 0.0;
  for (int c = 0; c < residual.channels; ++c) {
    Eigen::Map<const RMatrix<T>> e(residual.plane(c).data(), rows, cols);
    const CMatrix<T> spectrum = wr * e.template cast<std::complex<T>>() * wc;
    CMatrix<T> unit(rows, cols);
    for (Eigen::Index i = 0; i < spectrum.size(); ++i) {
      const T mag = std::abs(spectrum.data()[i]);
      sum += mag;
      unit.data()[i] = mag > T(0) ? spectrum.data()[i] / mag : std::complex<T>(0);
    }
    if (grad) {
      const CMatrix<T> back = wr.conjugate() * unit * wc.conjugate();
      Eigen::Map<RMatrix<T>> g(grad->plane(c).data(), rows, cols);
      g = (back.real() / static_cast<T>(count)).eval();
    }
  }
  return sum / count;
}

double spectral_residual(const Image& e1, const Image& e2) {
  require_same_shape(e1, e2, "spectral_residual");
  return spectral_residual(subtract(to_tensor<double>(e1), to_tensor<double>(e2)), static_cast<Tensor<double>*>(nullptr));
}

template <class T>
Tensor<T> extract_linear(const Tensor<T>& v, const Tensor<T>& x, double alpha) {
  require_same(v, x, "extract operands differ in shape");
  if (alpha == 0.0) throw Error(ErrorKind::ZeroStrength, "alpha must be non-zero");
  const std::size_t n = v.plane_size();
  Tensor<T> out = zeros_of(v);
  std::vector<T> fv(n), fx(n);
  for (int c = 0; c < v.channels; ++c) {
    dct2_plane<T>(v.plane(c), v.height, v.width, fv);
    dct2_plane<T>(x.plane(c), v.height, v.width, fx);
    for (std::size_t i = 0; i < n; ++i) fv[i] = static_cast<T>((fv[i] - fx[i]) / alpha);
    idct2_plane<T>(fv, v.height, v.width, out.plane(c));
  }
  return out;
}

template <class T>
Tensor<T> extract_linear_adjoint(const Tensor<T>& upstream, double alpha) {
  // v -> idct2(dct2(v)) / alpha; the adjoint of idct2 is dct2 and vice versa.
  const std::size_t n = upstream.plane_size();
  Tensor<T> out = zeros_of(upstream);
  std::vector<T> tmp(n);
  for (int c = 0; c < upstream.channels; ++c) {
    dct2_plane<T>(upstream.plane(c), upstream.height, upstream.width, tmp);
    for (auto& v : tmp) v = static_cast<T>(v / alpha);
    idct2_plane<T>(tmp, upstream.height, upstream.width, out.plane(c));
  }
  return out;
}

template <class T>
double reconstruction_loss(const BasicModel<T>& m, const Tensor<T>& x, const Tensor<T>& x_w, NoDeduce<ParameterSet<T>>* grad,
                           bool literal_rec) {
  ForwardTrace<T> tx, txw;
  const Tensor<T> fx = run(m.parameters(), m.config(), x, grad ? &tx : nullptr);
  const Tensor<T> fxw = run(m.parameters(), m.config(), x_w, grad ? &txw : nullptr);
  Tensor<T> gx = zeros_of(fx), gxw = zeros_of(fxw);
  const double value = l1_mean(x, fx, grad ? &gx : nullptr, 1.0) +
                       l1_mean(literal_rec ? x : x_w, fxw, grad ? &gxw : nullptr, 1.0);
  if (grad) {
    network_backward(m.config(), m.parameters(), tx, gx, grad, false);
    network_backward(m.config(), m.parameters(), txw, gxw, grad, false);
  }
  return value;
}

template <class T>
double idempotency_loss(const BasicModel<T>& m, const ParameterSnapshot<T>& frozen, const Tensor<T>& z,
                        NoDeduce<ParameterSet<T>>* grad) {
  check_fresh(m, frozen);
  return idem_term(m, frozen, z, grad, 1.0);
}

template <class T>
double tightness_loss(const BasicModel<T>& m, const ParameterSnapshot<T>& frozen, const Tensor<T>& z, double r,
                      double l_rec, NoDeduce<ParameterSet<T>>* grad) {
  check_fresh(m, frozen);
  return tight_term(m, frozen, z, r, l_rec, grad, 1.0);
}

template <class T>
double watermark_loss(const BasicModel<T>& m, const Tensor<T>& x, const Tensor<T>& x_w, EmbedConfig cfg,
                      NoDeduce<ParameterSet<T>>* grad) {
  ForwardTrace<T> trace;
  const Tensor<T> fxw = run(m.parameters(), m.config(), x_w, grad ? &trace : nullptr);
  Tensor<T> g = zeros_of(fxw);
  const double value = extraction_head(x_w, fxw, x, cfg.alpha, grad ? &g : nullptr, 1.0);
  if (grad) network_backward(m.config(), m.parameters(), trace, g, grad, false);
  return value;
}

template <class T>
double origin_loss(const BasicModel<T>& m, const Tensor<T>& x, EmbedConfig cfg, NoDeduce<ParameterSet<T>>* grad) {
  ForwardTrace<T> trace;
  const Tensor<T> fx = run(m.parameters(), m.config(), x, grad ? &trace : nullptr);
  Tensor<T> g = zeros_of(fx);
  const double value = extraction_head(x, fx, x, cfg.alpha, grad ? &g : nullptr, 1.0);
  if (grad) network_backward(m.config(), m.parameters(), trace, g, grad, false);
  return value;
}

template <class T>
LossBreakdown evaluate_objective(const BasicModel<T>& m, const ParameterSnapshot<T>& frozen, const Tensor<T>& x,
                                 const Tensor<T>& x_w, const Tensor<T>& z, const ObjectiveOptions& options,
                                 NoDeduce<ParameterSet<T>>* grad) {
  check_fresh(m, frozen);
  const auto& w = options.weights;
  const double alpha = options.embed.alpha;
  LossBreakdown out;

  // f(x) feeds the reconstruction and origin terms, f(x_w) the reconstruction
  // and watermark terms.
  ForwardTrace<T> tx, txw;
  const Tensor<T> fx = run(m.parameters(), m.config(), x, grad ? &tx : nullptr);
  const Tensor<T> fxw = run(m.parameters(), m.config(), x_w, grad ? &txw : nullptr);
  Tensor<T> gx = zeros_of(fx), gxw = zeros_of(fxw);
  Tensor<T>* gxp = grad ? &gx : nullptr;
  Tensor<T>* gxwp = grad ? &gxw : nullptr;

  out.l_rec = l1_mean(x, fx, gxp, w.lambda_rec) + l1_mean(options.literal_rec ? x : x_w, fxw, gxwp, w.lambda_rec);
  out.l_origin = extraction_head(x, fx, x, alpha, gxp, w.lambda_origin);
  out.l_wm = extraction_head(x_w, fxw, x, alpha, gxwp, w.lambda_wm);
  if (grad) {
    network_backward(m.config(), m.parameters(), tx, gx, grad, false);
    network_backward(m.config(), m.parameters(), txw, gxw, grad, false);
  }

  std::tie(out.l_idem, out.l_tight) = self_terms(m, frozen, z, w.r, out.l_rec, grad, w.lambda_idem, w.lambda_tight);
  out.total = total_loss(out, w);
  return out;
}

#define IWN_INSTANTIATE(T)                                                                                        \
  template double spectral_residual<T>(const Tensor<T>&, Tensor<T>*);                                             \
  template Tensor<T> extract_linear<T>(const Tensor<T>&, const Tensor<T>&, double);                               \
  template Tensor<T> extract_linear_adjoint<T>(const Tensor<T>&, double);                                          \
  template double reconstruction_loss<T>(const BasicModel<T>&, const Tensor<T>&, const Tensor<T>&, ParameterSet<T>*, \
                                         bool);                                                                   \
  template double idempotency_loss<T>(const BasicModel<T>&, const ParameterSnapshot<T>&, const Tensor<T>&,        \
                                      ParameterSet<T>*);                                                          \
  template double tightness_loss<T>(const BasicModel<T>&, const ParameterSnapshot<T>&, const Tensor<T>&, double,  \
                                    double, ParameterSet<T>*);                                                    \
  template double watermark_loss<T>(const BasicModel<T>&, const Tensor<T>&, const Tensor<T>&, EmbedConfig,        \
                                    ParameterSet<T>*);                                                            \
  template double origin_loss<T>(const BasicModel<T>&, const Tensor<T>&, EmbedConfig, ParameterSet<T>*);          \
  template LossBreakdown evaluate_objective<T>(const BasicModel<T>&, const ParameterSnapshot<T>&, const Tensor<T>&, \
                                               const Tensor<T>&, const Tensor<T>&, const ObjectiveOptions&,       \
                                               ParameterSet<T>*);

IWN_INSTANTIATE(float)
IWN_INSTANTIATE(double)

#undef IWN_INSTANTIATE

}  // namespace iwn
