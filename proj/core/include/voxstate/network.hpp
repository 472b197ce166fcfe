#pragma once

#include <cstddef>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "voxstate/layers.hpp"

namespace voxstate::nn {

// An ordered stack of layers sharing one forward/backward pass.
class Network {
 public:
  Network() = default;
  Network(Network&&) = default;
  Network& operator=(Network&&) = default;
  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;

  void add(std::unique_ptr<Layer> layer);

  Tensor forward(const Tensor& x, Mode mode, Rng* rng = nullptr);
  Tensor backward(const Tensor& grad_out);

  std::vector<ParamTensor*> params();
  void zero_grads();

  std::size_t n_layers() const { return layers_.size(); }
  Layer& layer(std::size_t i) { return *layers_[i]; }
  const Layer& layer(std::size_t i) const { return *layers_[i]; }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

struct LossResult {
  double loss = 0.0;
  Tensor grad;  // d(mean loss)/d(logits), same shape as the logits
};

// Row-wise softmax of (batch, classes) logits, shift-invariant.
Tensor softmax(const Tensor& logits);

// Mean cross-entropy between softmax(logits) and integer labels.
LossResult softmax_cross_entropy(const Tensor& logits,
                                 const std::vector<std::size_t>& labels);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // L2 term added to gradients flagged apply_l2
};

// Adam with bias correction. The decoupled epsilon sits outside the
// square root: theta -= lr * m_hat / (sqrt(v_hat) + eps). Non-learnable
// tensors are skipped entirely.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  void step(const std::vector<ParamTensor*>& params);

  double& lr() { return cfg_.lr; }
  const AdamConfig& config() const { return cfg_; }
  std::size_t steps_taken() const { return t_; }

 private:
  struct Slot {
    std::vector<double> m, v;
  };

  AdamConfig cfg_;
  std::size_t t_ = 0;
  std::vector<ParamTensor*> tracked_;
  std::vector<Slot> slots_;
};

// Reduce-on-plateau: after `patience` consecutive epochs without a strict
// improvement over the best loss seen so far, the rate is multiplied by
// `decay` and the stall counter starts over. The best loss survives each
// decay, so a plateau keeps decaying every `patience` epochs.
struct LrSchedule {
  double lr;
  double decay;
  std::size_t patience;
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t stall = 0;

  LrSchedule(double lr0, double decay_factor, std::size_t patience_epochs);

  // Feeds one epoch's training loss; returns the rate to use next.
  double observe(double loss);
};

// Binary weight checkpoint. Layout, all little-endian:
//   "NNET" | u32 version=1 | u32 layer_count
//   per layer: u32 kind_len, kind bytes, u32 tensor_count,
//              per tensor: u32 rank, u32 dims[rank], f64 values
// Reading loads into an already-built network and verifies that layer
// kinds and tensor shapes line up exactly.
void write_network_file(const std::string& path, Network& net);
void read_network_file(const std::string& path, Network& net);

}  // namespace voxstate::nn
