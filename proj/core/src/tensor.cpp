#include "voxstate/tensor.hpp"

namespace voxstate::nn {

Tensor::Tensor(std::vector<std::size_t> s) : shape(std::move(s)) {
  if (shape.empty() || shape.size() > 5)
    throw config_error("Tensor: rank must be 1..5, got " +
                       std::to_string(shape.size()));
  data.assign(shape_product(shape), 0.0);
}

std::size_t Tensor::sample_size() const {
  if (shape.empty()) return 0;
  std::size_t n = 1;
  for (std::size_t i = 1; i < shape.size(); ++i) n *= shape[i];
  return n;
}

std::string Tensor::shape_str() const {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

std::size_t Tensor::shape_product(const std::vector<std::size_t>& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

void check_shape(const Tensor& t, const std::vector<std::size_t>& expected,
                 const std::string& who) {
  if (t.shape != expected) {
    Tensor e;
    e.shape = expected;
    throw config_error(who + ": expected shape " + e.shape_str() + ", got " +
                       t.shape_str());
  }
}

}  // namespace voxstate::nn
