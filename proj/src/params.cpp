#include "fedia/params.hpp"

#include <cmath>
#include <utility>

#include <fmt/format.h>

#include "fedia/error.hpp"

namespace fedia {

std::size_t parameter_count(const Manifest& manifest) {
  std::size_t total = 0;
  for (const auto& l : manifest) total += l.size();
  return total;
}

ParameterVector::ParameterVector(Manifest manifest)
    : ParameterVector(manifest, std::vector<double>(parameter_count(manifest), 0.0)) {}

ParameterVector::ParameterVector(Manifest manifest, std::vector<double> values)
    : manifest_(std::move(manifest)), values_(std::move(values)) {
  if (parameter_count(manifest_) != values_.size()) {
    throw ValidationError(fmt::format("manifest describes {} parameters but {} values given",
                                      parameter_count(manifest_), values_.size()));
  }
  std::size_t offset = 0;
  offsets_.reserve(manifest_.size());
  for (const auto& l : manifest_) {
    offsets_.push_back(offset);
    offset += l.size();
  }
}

std::span<double> ParameterVector::layer(std::size_t index) {
  return {values_.data() + offsets_.at(index), manifest_[index].size()};
}

std::span<const double> ParameterVector::layer(std::size_t index) const {
  return {values_.data() + offsets_.at(index), manifest_[index].size()};
}

std::vector<Matrix> unflatten(const ParameterVector& p) {
  std::vector<Matrix> out;
  out.reserve(p.manifest().size());
  for (std::size_t i = 0; i < p.manifest().size(); ++i) {
    const auto& shape = p.manifest()[i];
    const auto slice = p.layer(i);
    out.emplace_back(shape.rows, shape.cols, std::vector<double>(slice.begin(), slice.end()));
  }
  return out;
}

ParameterVector flatten(const Manifest& manifest, const std::vector<Matrix>& layers) {
  if (layers.size() != manifest.size()) {
    throw ValidationError("flatten: layer count does not match manifest");
  }
  std::vector<double> values;
  values.reserve(parameter_count(manifest));
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].rows() != manifest[i].rows || layers[i].cols() != manifest[i].cols) {
      throw ValidationError(fmt::format("flatten: layer '{}' has shape {}x{}, expected {}x{}",
                                        manifest[i].name, layers[i].rows(), layers[i].cols(),
                                        manifest[i].rows, manifest[i].cols));
    }
    values.insert(values.end(), layers[i].data().begin(), layers[i].data().end());
  }
  return ParameterVector(manifest, std::move(values));
}

void require_same_layout(const ParameterVector& a, const ParameterVector& b, const char* what) {
  if (!a.same_layout(b)) {
    throw ValidationError(fmt::format("{}: parameter layouts differ ({} vs {} values)", what,
                                      a.size(), b.size()));
  }
}

double l2_norm(std::span<const double> v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  return std::sqrt(sq);
}

}  // namespace fedia
