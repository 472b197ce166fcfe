#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "voxstate/errors.hpp"

namespace voxstate::nn {

// Dense row-major tensor of doubles with up to 5 axes
// (batch, channels, spatial...). Axis 0 is always the batch.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s);

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t axis(std::size_t i) const { return shape[i]; }

  // Elements per batch entry.
  std::size_t sample_size() const;

  bool same_shape(const Tensor& other) const { return shape == other.shape; }
  std::string shape_str() const;

  static std::size_t shape_product(const std::vector<std::size_t>& s);
};

void check_shape(const Tensor& t, const std::vector<std::size_t>& expected,
                 const std::string& who);

}  // namespace voxstate::nn
