#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "iwn/image.hpp"

namespace iwn {

/// Single-sample CHW activation buffer used inside the network.
template <class T>
struct Tensor {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<T> data;

  Tensor() = default;
  Tensor(int c, int h, int w, T fill = T(0))
      : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, fill) {}

  std::size_t size() const noexcept { return data.size(); }
  std::size_t plane_size() const noexcept { return static_cast<std::size_t>(height) * width; }
  std::span<T> plane(int c) { return std::span<T>(data).subspan(c * plane_size(), plane_size()); }
  std::span<const T> plane(int c) const {
    return std::span<const T>(data).subspan(c * plane_size(), plane_size());
  }
  bool same_shape(const Tensor& o) const noexcept {
    return channels == o.channels && height == o.height && width == o.width;
  }
};

template <class T>
Tensor<T> to_tensor(const Image& img) {
  Tensor<T> t(img.channels(), img.height(), img.width());
  auto px = img.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) t.data[i] = static_cast<T>(px[i]);
  return t;
}

template <class T>
Image to_image(const Tensor<T>& t) {
  Image img(t.height, t.width, t.channels);
  auto px = img.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = static_cast<double>(t.data[i]);
  return img;
}

/// Keeps optional out-pointers (gradients, traces) out of template argument
/// deduction so callers can pass nullptr.
template <class T>
using NoDeduce = std::type_identity_t<T>;

/// A named parameter array with its logical shape.
template <class T>
struct Parameter {
  std::string name;
  std::vector<int> shape;
  std::vector<T> values;

  friend bool operator==(const Parameter&, const Parameter&) = default;
};

template <class T>
using ParameterSet = std::vector<Parameter<T>>;

template <class T>
ParameterSet<T> zeros_like(const ParameterSet<T>& params) {
  ParameterSet<T> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back({p.name, p.shape, std::vector<T>(p.values.size(), T(0))});
  return out;
}

}  // namespace iwn
