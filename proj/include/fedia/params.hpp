#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fedia/tensor.hpp"

namespace fedia {

struct LayerShape {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 1;  // 1 for bias vectors

  std::size_t size() const noexcept { return rows * cols; }
  friend bool operator==(const LayerShape&, const LayerShape&) = default;
};

using Manifest = std::vector<LayerShape>;

std::size_t parameter_count(const Manifest& manifest);

/// Flat parameter (or gradient) vector plus the layer layout it follows.
class ParameterVector {
 public:
  ParameterVector() = default;
  explicit ParameterVector(Manifest manifest);  // zero-filled
  ParameterVector(Manifest manifest, std::vector<double> values);

  const Manifest& manifest() const noexcept { return manifest_; }
  std::size_t size() const noexcept { return values_.size(); }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  /// Slice of layer `index` in the manifest.
  std::span<double> layer(std::size_t index);
  std::span<const double> layer(std::size_t index) const;

  bool same_layout(const ParameterVector& other) const { return manifest_ == other.manifest_; }

  friend bool operator==(const ParameterVector&, const ParameterVector&) = default;

 private:
  Manifest manifest_;
  std::vector<double> values_;
  std::vector<std::size_t> offsets_;
};

/// Per-layer matrices in manifest order (bias vectors become [rows x 1]).
std::vector<Matrix> unflatten(const ParameterVector& p);
ParameterVector flatten(const Manifest& manifest, const std::vector<Matrix>& layers);

/// Throws ValidationError when layouts differ.
void require_same_layout(const ParameterVector& a, const ParameterVector& b, const char* what);

double l2_norm(std::span<const double> v);

}  // namespace fedia
