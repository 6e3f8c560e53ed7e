#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "iwn/image.hpp"
#include "iwn/tensor.hpp"

namespace iwn {

enum class Variant { Small, Origin, Large, Custom };

std::string_view to_string(Variant v);
std::optional<Variant> parse_variant(std::string_view name);

/// Geometry of one convolution (encoder) or transposed convolution (decoder).
struct LayerSpec {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 4;
  int stride = 1;
  int padding = 0;
  bool norm = false;
  bool transposed = false;
  int in_size = 0;   ///< square input resolution
  int out_size = 0;  ///< square output resolution
};

/// Encoder-decoder description. Encoder layers are conv + optional GroupNorm +
/// LeakyReLU; decoder layers are transposed conv + optional GroupNorm + ReLU,
/// except the last which ends in Tanh remapped to [0, 1].
struct ModelConfig {
  Variant variant = Variant::Origin;
  int image_size = 128;
  int image_channels = 3;
  std::vector<int> encoder_channels{64, 128, 256, 512};
  std::vector<int> encoder_kernels{4, 4, 4, 4};
  std::vector<int> encoder_strides{2, 2, 2, 1};
  std::vector<int> encoder_paddings{1, 1, 1, 0};
  std::vector<bool> encoder_norm{false, true, true, false};
  std::vector<int> decoder_channels{512, 256, 128, 3};
  std::vector<int> decoder_kernels{4, 4, 4, 4};
  std::vector<int> decoder_strides{1, 2, 2, 2};
  std::vector<int> decoder_paddings{0, 1, 1, 1};
  std::vector<bool> decoder_norm{true, true, true, false};
  int norm_groups = 8;
  double leaky_slope = 0.2;

  static ModelConfig small();
  static ModelConfig origin();
  static ModelConfig large();
  static ModelConfig for_variant(Variant v);

  int encoder_layers() const noexcept { return static_cast<int>(encoder_channels.size()); }
  int decoder_layers() const noexcept { return static_cast<int>(decoder_channels.size()); }

  /// Throws InvalidConfig for inconsistent lists, channel/group mismatches or
  /// a decoder that does not return to image_size.
  void validate() const;

  /// Resolved layer stack (validates first).
  std::vector<LayerSpec> layers() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Parameter shapes in canonical order: per layer weight, bias, then
/// norm.weight / norm.bias where a norm is present. Conv weights are
/// [out, in, k, k]; transposed-conv weights are [in, out, k, k].
std::vector<std::pair<std::string, std::vector<int>>> parameter_layout(const ModelConfig& cfg);

/// Parameters f_theta plus a count of optimizer updates applied so far.
template <class T>
class BasicModel {
 public:
  BasicModel(ModelConfig cfg, ParameterSet<T> params, std::int64_t step = 0);

  const ModelConfig& config() const noexcept { return config_; }
  const ParameterSet<T>& parameters() const noexcept { return params_; }
  ParameterSet<T>& mutable_parameters() noexcept { return params_; }

  std::int64_t step() const noexcept { return step_; }
  void advance_step() noexcept { ++step_; }

 private:
  ModelConfig config_;
  ParameterSet<T> params_;
  std::int64_t step_ = 0;
};

using Model = BasicModel<float>;

/// Frozen copy theta' of a model's parameters. Immutable and cheap to share.
template <class T>
class ParameterSnapshot {
 public:
  ParameterSnapshot(ModelConfig cfg, ParameterSet<T> params, std::int64_t step)
      : config_(std::move(cfg)), params_(std::make_shared<const ParameterSet<T>>(std::move(params))), step_(step) {}

  const ModelConfig& config() const noexcept { return config_; }
  const ParameterSet<T>& parameters() const noexcept { return *params_; }
  std::int64_t step() const noexcept { return step_; }

 private:
  ModelConfig config_;
  std::shared_ptr<const ParameterSet<T>> params_;
  std::int64_t step_;
};

/// normal(0, 0.02) kernels, zero biases, unit/zero norm affine; all drawn
/// from `init_seed`.
template <class T = float>
BasicModel<T> build_model(const ModelConfig& cfg, std::uint64_t init_seed);

template <class T>
std::size_t count_parameters(const BasicModel<T>& m) {
  std::size_t n = 0;
  for (const auto& p : m.parameters()) n += p.values.size();
  return n;
}

std::size_t count_parameters(const ModelConfig& cfg);

template <class T>
ParameterSnapshot<T> snapshot(const BasicModel<T>& m) {
  return ParameterSnapshot<T>(m.config(), m.parameters(), m.step());
}

template <class T>
ParameterSnapshot<T> snapshot(const ParameterSnapshot<T>& s) {
  return ParameterSnapshot<T>(s.config(), s.parameters(), s.step());
}

// ---------------------------------------------------------------------------
// Differentiable engine.

/// Per-layer intermediates kept by a forward pass for the backward pass.
template <class T>
struct LayerTrace {
  std::vector<T> columns;  ///< im2col of the input (conv layers)
  Tensor<T> input;         ///< layer input (transposed-conv layers)
  Tensor<T> normalized;    ///< x-hat of GroupNorm
  std::vector<T> inv_std;  ///< per group
  Tensor<T> activation_in; ///< after norm, before activation
};

template <class T>
struct ForwardTrace {
  std::vector<LayerTrace<T>> layers;
};

/// Runs the network. When `trace` is non-null it receives what backward needs.
template <class T>
Tensor<T> network_forward(const ModelConfig& cfg, const ParameterSet<T>& params, const Tensor<T>& input,
                          NoDeduce<ForwardTrace<T>>* trace);

/// Back-propagates dL/d(output). Accumulates parameter gradients into
/// `param_grads` (multiplied by `param_scale`) when given, and returns
/// dL/d(input) when `want_input_grad` (otherwise an empty tensor).
template <class T>
Tensor<T> network_backward(const ModelConfig& cfg, const ParameterSet<T>& params, const ForwardTrace<T>& trace,
                           const Tensor<T>& grad_output, NoDeduce<ParameterSet<T>>* param_grads, bool want_input_grad,
                           double param_scale = 1.0);

/// Image-level forward for the live model. Throws ShapeMismatch unless the
/// image is image_size x image_size x image_channels.
template <class T>
Image forward(const BasicModel<T>& m, const Image& img);

template <class T>
Image forward_frozen(const ParameterSnapshot<T>& s, const ModelConfig& cfg, const Image& img);

/// Square resolution after each layer, encoder then decoder.
std::vector<int> spatial_probe(const ModelConfig& cfg);

}  // namespace iwn
