#include "iwn/backbone.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "iwn/error.hpp"
#include "iwn/rng.hpp"

namespace iwn {
namespace {

constexpr double kNormEps = 1e-5;

void gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha, const float* a, const float* b,
          float beta, float* c) {
  cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans, trans_b ? CblasTrans : CblasNoTrans, m, n, k,
              alpha, a, trans_a ? m : k, b, trans_b ? k : n, beta, c, n);
}

void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha, const double* a, const double* b,
          double beta, double* c) {
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans, trans_b ? CblasTrans : CblasNoTrans, m, n, k,
              alpha, a, trans_a ? m : k, b, trans_b ? k : n, beta, c, n);
}

// Convolution geometry between an "image" side (channels x size x size) and a
// "grid" side (grid x grid). For a conv the image is the input; for a
// transposed conv the image is the output.
struct Geometry {
  int channels, size, kernel, stride, padding, grid;
};

template <class T>
void im2col(const T* img, const Geometry& g, T* cols) {
  const std::size_t grid_area = static_cast<std::size_t>(g.grid) * g.grid;
  for (int c = 0; c < g.channels; ++c) {
    const T* plane = img + static_cast<std::size_t>(c) * g.size * g.size;
    for (int ky = 0; ky < g.kernel; ++ky) {
      for (int kx = 0; kx < g.kernel; ++kx) {
        T* row = cols + ((static_cast<std::size_t>(c) * g.kernel + ky) * g.kernel + kx) * grid_area;
        for (int oy = 0; oy < g.grid; ++oy) {
          const int iy = oy * g.stride - g.padding + ky;
          T* dst = row + static_cast<std::size_t>(oy) * g.grid;
          if (iy < 0 || iy >= g.size) {
            std::fill(dst, dst + g.grid, T(0));
            continue;
          }
          const T* src = plane + static_cast<std::size_t>(iy) * g.size;
          for (int ox = 0; ox < g.grid; ++ox) {
            const int ix = ox * g.stride - g.padding + kx;
            dst[ox] = (ix >= 0 && ix < g.size) ? src[ix] : T(0);
          }
        }
      }
    }
  }
}

template <class T>
void col2im(const T* cols, const Geometry& g, T* img) {
  const std::size_t grid_area = static_cast<std::size_t>(g.grid) * g.grid;
  for (int c = 0; c < g.channels; ++c) {
    T* plane = img + static_cast<std::size_t>(c) * g.size * g.size;
    for (int ky = 0; ky < g.kernel; ++ky) {
      for (int kx = 0; kx < g.kernel; ++kx) {
        const T* row = cols + ((static_cast<std::size_t>(c) * g.kernel + ky) * g.kernel + kx) * grid_area;
        for (int oy = 0; oy < g.grid; ++oy) {
          const int iy = oy * g.stride - g.padding + ky;
          if (iy < 0 || iy >= g.size) continue;
          T* dst = plane + static_cast<std::size_t>(iy) * g.size;
          const T* src = row + static_cast<std::size_t>(oy) * g.grid;
          for (int ox = 0; ox < g.grid; ++ox) {
            const int ix = ox * g.stride - g.padding + kx;
            if (ix >= 0 && ix < g.size) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

struct ParamIndex {
  int weight = -1, bias = -1, gamma = -1, beta = -1;
};

std::vector<ParamIndex> param_indices(const std::vector<LayerSpec>& layers) {
  std::vector<ParamIndex> out;
  int next = 0;
  for (const auto& l : layers) {
    ParamIndex idx;
    idx.weight = next++;
    idx.bias = next++;
    if (l.norm) {
      idx.gamma = next++;
      idx.beta = next++;
    }
    out.push_back(idx);
  }
  return out;
}

enum class Activation { Leaky, Relu, TanhUnit };

Activation activation_of(const std::vector<LayerSpec>& layers, std::size_t i) {
  if (i + 1 == layers.size()) return Activation::TanhUnit;
  return layers[i].transposed ? Activation::Relu : Activation::Leaky;
}

Geometry geometry_of(const LayerSpec& l) {
  if (l.transposed) return {l.out_channels, l.out_size, l.kernel, l.stride, l.padding, l.in_size};
  return {l.in_channels, l.in_size, l.kernel, l.stride, l.padding, l.out_size};
}

template <class T>
void group_norm_forward(Tensor<T>& x, int groups, const T* gamma, const T* beta, Tensor<T>* normalized,
                        std::vector<T>* inv_std) {
  const int cpg = x.channels / groups;
  const std::size_t plane = x.plane_size();
  const std::size_t n = static_cast<std::size_t>(cpg) * plane;
  if (normalized) *normalized = Tensor<T>(x.channels, x.height, x.width);
  if (inv_std) inv_std->assign(groups, T(0));
  for (int g = 0; g < groups; ++g) {
    T* base = x.data.data() + static_cast<std::size_t>(g) * n;
    double sum = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += base[i];
    const double mean = sum / n;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = base[i] - mean;
      sq += d * d;
    }
    const double inv = 1.0 / std::sqrt(sq / n + kNormEps);
    if (inv_std) (*inv_std)[g] = static_cast<T>(inv);
    for (int cc = 0; cc < cpg; ++cc) {
      const int c = g * cpg + cc;
      T* p = base + static_cast<std::size_t>(cc) * plane;
      T* xh = normalized ? normalized->data.data() + static_cast<std::size_t>(c) * plane : nullptr;
      for (std::size_t i = 0; i < plane; ++i) {
        const T hat = static_cast<T>((p[i] - mean) * inv);
        if (xh) xh[i] = hat;
        p[i] = gamma[c] * hat + beta[c];
      }
    }
  }
}

template <class T>
void group_norm_backward(Tensor<T>& grad, int groups, const Tensor<T>& normalized, const std::vector<T>& inv_std,
                         const T* gamma, T* dgamma, T* dbeta, double scale) {
  const int cpg = grad.channels / groups;
  const std::size_t plane = grad.plane_size();
  const std::size_t n = static_cast<std::size_t>(cpg) * plane;
  for (int c = 0; c < grad.channels; ++c) {
    const T* g = grad.data.data() + static_cast<std::size_t>(c) * plane;
    const T* xh = normalized.data.data() + static_cast<std::size_t>(c) * plane;
    if (dgamma) {
      double sg = 0.0, sgx = 0.0;
      for (std::size_t i = 0; i < plane; ++i) {
        sg += g[i];
        sgx += static_cast<double>(g[i]) * xh[i];
      }
      dgamma[c] += static_cast<T>(scale * sgx);
      dbeta[c] += static_cast<T>(scale * sg);
    }
  }
  for (int gi = 0; gi < groups; ++gi) {
    T* g = grad.data.data() + static_cast<std::size_t>(gi) * n;
    const T* xh = normalized.data.data() + static_cast<std::size_t>(gi) * n;
    double sum_d = 0.0, sum_dx = 0.0;
    for (int cc = 0; cc < cpg; ++cc) {
      const T gm = gamma[gi * cpg + cc];
      for (std::size_t i = 0; i < plane; ++i) {
        const std::size_t k = static_cast<std::size_t>(cc) * plane + i;
        const double d = static_cast<double>(g[k]) * gm;
        sum_d += d;
        sum_dx += d * xh[k];
      }
    }
    const double inv = inv_std[gi];
    const double mean_d = sum_d / n;
    const double mean_dx = sum_dx / n;
    for (int cc = 0; cc < cpg; ++cc) {
      const T gm = gamma[gi * cpg + cc];
      for (std::size_t i = 0; i < plane; ++i) {
        const std::size_t k = static_cast<std::size_t>(cc) * plane + i;
        const double d = static_cast<double>(g[k]) * gm;
        g[k] = static_cast<T>(inv * (d - mean_d - xh[k] * mean_dx));
      }
    }
  }
}

}  // namespace

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::Small: return "small";
    case Variant::Origin: return "origin";
    case Variant::Large: return "large";
    case Variant::Custom: return "custom";
  }
  return "custom";
}

std::optional<Variant> parse_variant(std::string_view name) {
  for (auto v : {Variant::Small, Variant::Origin, Variant::Large, Variant::Custom})
    if (to_string(v) == name) return v;
  return std::nullopt;
}

ModelConfig ModelConfig::origin() { return ModelConfig{}; }

ModelConfig ModelConfig::small() {
  ModelConfig c;
  c.variant = Variant::Small;
  c.encoder_channels = {64, 128, 256};
  c.encoder_kernels = {4, 4, 4};
  c.encoder_strides = {2, 2, 1};
  c.encoder_paddings = {1, 1, 0};
  c.encoder_norm = {false, true, false};
  c.decoder_channels = {256, 128, 3};
  c.decoder_kernels = {4, 4, 4};
  c.decoder_strides = {1, 2, 2};
  c.decoder_paddings = {0, 1, 1};
  c.decoder_norm = {true, true, false};
  return c;
}

ModelConfig ModelConfig::large() {
  ModelConfig c;
  c.variant = Variant::Large;
  c.encoder_channels = {64, 128, 256, 512, 1024};
  c.encoder_kernels = {4, 4, 4, 4, 4};
  c.encoder_strides = {2, 2, 2, 2, 1};
  c.encoder_paddings = {1, 1, 1, 1, 0};
  c.encoder_norm = {false, true, true, true, false};
  c.decoder_channels = {1024, 512, 256, 128, 3};
  c.decoder_kernels = {4, 4, 4, 4, 4};
  c.decoder_strides = {1, 2, 2, 2, 2};
  c.decoder_paddings = {0, 1, 1, 1, 1};
  c.decoder_norm = {true, true, true, true, false};
  return c;
}

ModelConfig ModelConfig::for_variant(Variant v) {
  switch (v) {
    case Variant::Small: return small();
    case Variant::Large: return large();
    default: return origin();
  }
}

void ModelConfig::validate() const { (void)layers(); }

std::vector<LayerSpec> ModelConfig::layers() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::InvalidConfig, msg); };
  const auto ne = encoder_channels.size();
  const auto nd = decoder_channels.size();
  if (ne == 0 || nd == 0) fail("encoder and decoder need at least one layer");
  if (encoder_kernels.size() != ne || encoder_strides.size() != ne || encoder_paddings.size() != ne ||
      encoder_norm.size() != ne)
    fail("encoder lists have inconsistent lengths");
  if (decoder_kernels.size() != nd || decoder_strides.size() != nd || decoder_paddings.size() != nd ||
      decoder_norm.size() != nd)
    fail("decoder lists have inconsistent lengths");
  if (decoder_channels.back() != image_channels) fail("last decoder layer must output image_channels");
  if (norm_groups < 1) fail("norm_groups must be positive");

  std::vector<LayerSpec> out;
  int size = image_size;
  int channels = image_channels;
  for (std::size_t i = 0; i < ne + nd; ++i) {
    const bool dec = i >= ne;
    const std::size_t j = dec ? i - ne : i;
    LayerSpec l;
    l.transposed = dec;
    l.in_channels = channels;
    l.out_channels = dec ? decoder_channels[j] : encoder_channels[j];
    l.kernel = dec ? decoder_kernels[j] : encoder_kernels[j];
    l.stride = dec ? decoder_strides[j] : encoder_strides[j];
    l.padding = dec ? decoder_paddings[j] : encoder_paddings[j];
    l.norm = dec ? decoder_norm[j] : encoder_norm[j];
    l.in_size = size;
    if (l.kernel < 1 || l.stride < 1 || l.padding < 0 || l.out_channels < 1) fail("invalid layer geometry");
    l.out_size = dec ? (size - 1) * l.stride - 2 * l.padding + l.kernel
                     : (size + 2 * l.padding - l.kernel) / l.stride + 1;
    if (l.out_size < 1) fail("layer " + std::to_string(i) + " collapses the spatial size");
    if (l.norm && l.out_channels % norm_groups != 0) fail("norm channels must be divisible by norm_groups");
    size = l.out_size;
    channels = l.out_channels;
    out.push_back(l);
  }
  if (size != image_size) {
    fail("decoder output size " + std::to_string(size) + " != image_size " + std::to_string(image_size));
  }
  return out;
}

std::vector<std::pair<std::string, std::vector<int>>> parameter_layout(const ModelConfig& cfg) {
  std::vector<std::pair<std::string, std::vector<int>>> out;
  const auto layers = cfg.layers();
  const auto ne = static_cast<std::size_t>(cfg.encoder_layers());
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    const std::string prefix =
        (l.transposed ? "decoder." + std::to_string(i - ne) : "encoder." + std::to_string(i)) + ".";
    if (l.transposed)
      out.push_back({prefix + "weight", {l.in_channels, l.out_channels, l.kernel, l.kernel}});
    else
      out.push_back({prefix + "weight", {l.out_channels, l.in_channels, l.kernel, l.kernel}});
    out.push_back({prefix + "bias", {l.out_channels}});
    if (l.norm) {
      out.push_back({prefix + "norm.weight", {l.out_channels}});
      out.push_back({prefix + "norm.bias", {l.out_channels}});
    }
  }
  return out;
}

std::size_t count_parameters(const ModelConfig& cfg) {
  std::size_t n = 0;
  for (const auto& [name, shape] : parameter_layout(cfg)) {
    std::size_t k = 1;
    for (int d : shape) k *= static_cast<std::size_t>(d);
    n += k;
  }
  return n;
}

std::vector<int> spatial_probe(const ModelConfig& cfg) {
  std::vector<int> out;
  for (const auto& l : cfg.layers()) out.push_back(l.out_size);
  return out;
}

template <class T>
BasicModel<T>::BasicModel(ModelConfig cfg, ParameterSet<T> params, std::int64_t step)
    : config_(std::move(cfg)), params_(std::move(params)), step_(step) {
  const auto layout = parameter_layout(config_);
  if (layout.size() != params_.size()) throw Error(ErrorKind::ShapeMismatch, "parameter count does not match config");
  for (std::size_t i = 0; i < layout.size(); ++i) {
    std::size_t n = 1;
    for (int d : layout[i].second) n *= static_cast<std::size_t>(d);
    if (params_[i].shape != layout[i].second || params_[i].values.size() != n) {
      throw Error(ErrorKind::ShapeMismatch, "parameter '" + layout[i].first + "' has the wrong shape");
    }
  }
}

template <class T>
BasicModel<T> build_model(const ModelConfig& cfg, std::uint64_t init_seed) {
  std::mt19937_64 gen(derive_seed(init_seed, {kInitStream}));
  std::normal_distribution<double> normal(0.0, 0.02);
  ParameterSet<T> params;
  for (auto& [name, shape] : parameter_layout(cfg)) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    Parameter<T> p{name, shape, std::vector<T>(n, T(0))};
    if (name.ends_with("norm.weight")) {
      std::fill(p.values.begin(), p.values.end(), T(1));
    } else if (name.ends_with(".weight")) {
      for (auto& v : p.values) v = static_cast<T>(normal(gen));
    }
    params.push_back(std::move(p));
  }
  return BasicModel<T>(cfg, std::move(params));
}

template <class T>
Tensor<T> network_forward(const ModelConfig& cfg, const ParameterSet<T>& params, const Tensor<T>& input,
                          NoDeduce<ForwardTrace<T>>* trace) {
  const auto layers = cfg.layers();
  const auto index = param_indices(layers);
  if (input.channels != cfg.image_channels || input.height != cfg.image_size || input.width != cfg.image_size) {
    throw Error(ErrorKind::ShapeMismatch, "network input must be image_channels x image_size x image_size");
  }
  if (params.size() != static_cast<std::size_t>(index.back().beta >= 0 ? index.back().beta + 1 : index.back().bias + 1)) {
    throw Error(ErrorKind::ShapeMismatch, "parameter set does not match config");
  }
  if (trace) trace->layers.assign(layers.size(), {});

  Tensor<T> x = input;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    const auto& idx = index[i];
    const Geometry g = geometry_of(l);
    const T* w = params[idx.weight].values.data();
    const T* b = params[idx.bias].values.data();
    const int kk = l.kernel * l.kernel;
    const int in_area = l.in_size * l.in_size;
    const int out_area = l.out_size * l.out_size;
    Tensor<T> y(l.out_channels, l.out_size, l.out_size);

    if (!l.transposed) {
      std::vector<T> cols(static_cast<std::size_t>(l.in_channels) * kk * out_area);
      im2col(x.data.data(), g, cols.data());
      gemm(false, false, l.out_channels, out_area, l.in_channels * kk, T(1), w, cols.data(), T(0), y.data.data());
      if (trace) trace->layers[i].columns = std::move(cols);
    } else {
      std::vector<T> cols(static_cast<std::size_t>(l.out_channels) * kk * in_area);
      gemm(true, false, l.out_channels * kk, in_area, l.in_channels, T(1), w, x.data.data(), T(0), cols.data());
      col2im(cols.data(), g, y.data.data());
      if (trace) trace->layers[i].input = std::move(x);
    }
    for (int c = 0; c < l.out_channels; ++c)
      for (auto& v : y.plane(c)) v += b[c];

    if (l.norm) {
      auto* lt = trace ? &trace->layers[i] : nullptr;
      group_norm_forward(y, cfg.norm_groups, params[idx.gamma].values.data(), params[idx.beta].values.data(),
                         lt ? &lt->normalized : nullptr, lt ? &lt->inv_std : nullptr);
    }
    if (trace) trace->layers[i].activation_in = y;

    switch (activation_of(layers, i)) {
      case Activation::Leaky: {
        const T slope = static_cast<T>(cfg.leaky_slope);
        for (auto& v : y.data) v = v > T(0) ? v : v * slope;
        break;
      }
      case Activation::Relu:
        for (auto& v : y.data) v = std::max(v, T(0));
        break;
      case Activation::TanhUnit:
        for (auto& v : y.data) v = (std::tanh(v) + T(1)) * T(0.5);
        break;
    }
    x = std::move(y);
  }
  return x;
}

template <class T>
Tensor<T> network_backward(const ModelConfig& cfg, const ParameterSet<T>& params, const ForwardTrace<T>& trace,
                           const Tensor<T>& grad_output, NoDeduce<ParameterSet<T>>* param_grads, bool want_input_grad,
                           double param_scale) {
  const T ps = static_cast<T>(param_scale);
  const auto layers = cfg.layers();
  const auto index = param_indices(layers);
  if (trace.layers.size() != layers.size()) throw Error(ErrorKind::ShapeMismatch, "trace does not match config");

  Tensor<T> g = grad_output;
  for (std::size_t ii = layers.size(); ii-- > 0;) {
    const auto& l = layers[ii];
    const auto& idx = index[ii];
    const auto& lt = trace.layers[ii];
    const Geometry geo = geometry_of(l);
    const int kk = l.kernel * l.kernel;
    const int in_area = l.in_size * l.in_size;
    const int out_area = l.out_size * l.out_size;

    const auto& a = lt.activation_in.data;
    switch (activation_of(layers, ii)) {
      case Activation::Leaky: {
        const T slope = static_cast<T>(cfg.leaky_slope);
        for (std::size_t k = 0; k < g.data.size(); ++k)
          if (!(a[k] > T(0))) g.data[k] *= slope;
        break;
      }
      case Activation::Relu:
        for (std::size_t k = 0; k < g.data.size(); ++k)
          if (!(a[k] > T(0))) g.data[k] = T(0);
        break;
      case Activation::TanhUnit:
        for (std::size_t k = 0; k < g.data.size(); ++k) {
          const T t = std::tanh(a[k]);
          g.data[k] *= T(0.5) * (T(1) - t * t);
        }
        break;
    }

    if (l.norm) {
      T* dgamma = param_grads ? (*param_grads)[idx.gamma].values.data() : nullptr;
      T* dbeta = param_grads ? (*param_grads)[idx.beta].values.data() : nullptr;
      group_norm_backward(g, cfg.norm_groups, lt.normalized, lt.inv_std, params[idx.gamma].values.data(), dgamma,
                          dbeta, param_scale);
    }

    if (param_grads) {
      T* db = (*param_grads)[idx.bias].values.data();
      for (int c = 0; c < l.out_channels; ++c) {
        double s = 0.0;
        for (auto v : g.plane(c)) s += v;
        db[c] += static_cast<T>(param_scale * s);
      }
    }

    const bool need_input = ii > 0 || want_input_grad;
    const T* w = params[idx.weight].values.data();
    Tensor<T> gin;
    if (!l.transposed) {
      if (param_grads) {
        gemm(false, true, l.out_channels, l.in_channels * kk, out_area, ps, g.data.data(), lt.columns.data(), T(1),
             (*param_grads)[idx.weight].values.data());
      }
      if (need_input) {
        std::vector<T> dcols(static_cast<std::size_t>(l.in_channels) * kk * out_area);
        gemm(true, false, l.in_channels * kk, out_area, l.out_channels, T(1), w, g.data.data(), T(0), dcols.data());
        gin = Tensor<T>(l.in_channels, l.in_size, l.in_size);
        col2im(dcols.data(), geo, gin.data.data());
      }
    } else {
      std::vector<T> dcols(static_cast<std::size_t>(l.out_channels) * kk * in_area);
      im2col(g.data.data(), geo, dcols.data());
      if (param_grads) {
        gemm(false, true, l.in_channels, l.out_channels * kk, in_area, ps, lt.input.data.data(), dcols.data(), T(1),
             (*param_grads)[idx.weight].values.data());
      }
      if (need_input) {
        gin = Tensor<T>(l.in_channels, l.in_size, l.in_size);
        gemm(false, false, l.in_channels, in_area, l.out_channels * kk, T(1), w, dcols.data(), T(0), gin.data.data());
      }
    }
    if (!need_input) return {};
    g = std::move(gin);
  }
  return g;
}

template <class T>
Image forward(const BasicModel<T>& m, const Image& img) {
  return to_image(network_forward(m.config(), m.parameters(), to_tensor<T>(img), static_cast<ForwardTrace<T>*>(nullptr)));
}

template <class T>
Image forward_frozen(const ParameterSnapshot<T>& s, const ModelConfig& cfg, const Image& img) {
  return to_image(network_forward(cfg, s.parameters(), to_tensor<T>(img), static_cast<ForwardTrace<T>*>(nullptr)));
}

#define IWN_INSTANTIATE(T)                                                                                      \
  template class BasicModel<T>;                                                                                 \
  template BasicModel<T> build_model<T>(const ModelConfig&, std::uint64_t);                                     \
  template Tensor<T> network_forward<T>(const ModelConfig&, const ParameterSet<T>&, const Tensor<T>&,           \
                                        ForwardTrace<T>*);                                                      \
  template Tensor<T> network_backward<T>(const ModelConfig&, const ParameterSet<T>&, const ForwardTrace<T>&,    \
                                         const Tensor<T>&, ParameterSet<T>*, bool, double);                     \
  template Image forward<T>(const BasicModel<T>&, const Image&);                                                \
  template Image forward_frozen<T>(const ParameterSnapshot<T>&, const ModelConfig&, const Image&);

IWN_INSTANTIATE(float)
IWN_INSTANTIATE(double)

#undef IWN_INSTANTIATE

}  // namespace iwn
