#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "voxstate/rng.hpp"
#include "voxstate/tensor.hpp"

namespace voxstate::nn {

enum class Mode { kTrain, kEval };

// Parameter state owned by a layer. `grad` always mirrors the shape of
// `value`; gradients accumulate across backward calls until zeroed.
// Non-learnable tensors (running statistics) are serialized alongside
// weights but never updated by optimizers. `apply_l2` marks tensors
// that participate in weight decay.
struct ParamTensor {
  std::string name;
  Tensor value;
  Tensor grad;
  bool apply_l2 = false;
  bool learnable = true;

  ParamTensor(std::string n, const std::vector<std::size_t>& shape, bool l2,
              bool learn = true)
      : name(std::move(n)),
        value(shape),
        grad(shape),
        apply_l2(l2),
        learnable(learn) {}
};

class Layer {
 public:
  explicit Layer(std::string name) : name_(std::move(name)) {}
  virtual ~Layer() = default;

  Layer(const Layer&) = delete;
  Layer& operator=(const Layer&) = delete;

  // `rng` is only consulted by stochastic layers in training mode.
  virtual Tensor forward(const Tensor& x, Mode mode, Rng* rng = nullptr) = 0;
  virtual Tensor backward(const Tensor& grad_out) = 0;
  virtual std::vector<ParamTensor*> params() { return {}; }
  virtual std::string kind() const = 0;

  // Draws fresh weights from U(-sqrt(1/fan_in), sqrt(1/fan_in)), one
  // derived stream per weight tensor so the fill order cannot matter.
  // `next_stream` advances past every consumed stream id. Layers
  // without weights ignore the call.
  virtual void init_params(Rng& base, std::size_t& next_stream) {
    (void)base;
    (void)next_stream;
  }

  const std::string& name() const { return name_; }

 protected:
  std::string name_;
};

// Convolution over 1 or 3 spatial axes with uniform kernel size, stride
// and zero padding. Input layout is (batch, channels, spatial...).
// Runs one im2col + GEMM per sample.
class Conv : public Layer {
 public:
  Conv(std::string name, std::size_t spatial_rank, std::size_t in_channels,
       std::size_t out_channels, std::size_t kernel, std::size_t stride = 1,
       std::size_t pad = 0);

  Tensor forward(const Tensor& x, Mode mode, Rng* rng = nullptr) override;
  Tensor backward(const Tensor& grad_out) override;
  std::vector<ParamTensor*> params() override { return {&weight_, &bias_}; }
  std::string kind() const override { return "conv"; }
  void init_params(Rng& base, std::size_t& next_stream) override;

  ParamTensor& weight() { return weight_; }
  ParamTensor& bias() { return bias_; }
  std::size_t fan_in() const { return fan_in_; }

 private:
  std::size_t spatial_rank_;
  std::size_t in_channels_;
  std::size_t out_channels_;
  std::size_t kernel_;
  std::size_t stride_;
  std::size_t pad_;
  std::size_t fan_in_;
  ParamTensor weight_;
  ParamTensor bias_;

  Tensor cached_input_;
  bool has_cache_ = false;
  std::vector<std::size_t> in_spatial_;
  std::vector<std::size_t> out_spatial_;

  void im2col(const double* x, double* col) const;
  void col2im(const double* col, double* gx) const;
};

// Fully connected layer, y = x W^T + b with weight shape (out, in).
class Dense : public Layer {
 public:
  Dense(std::string name, std::size_t in_features, std::size_t out_features);

  Tensor forward(const Tensor& x, Mode mode, Rng* rng = nullptr) override;
  Tensor backward(const Tensor& grad_out) override;
  std::vector<ParamTensor*> params() override { return {&weight_, &bias_}; }
  std::string kind() const override { return "dense"; }
  void init_params(Rng& base, std::size_t& next_stream) override;

  ParamTensor& weight() { return weight_; }
  ParamTensor& bias() { return bias_; }
  std::size_t fan_in() const { return in_features_; }

 private:
  std::size_t in_features_;
  std::size_t out_features_;
  ParamTensor weight_;
  ParamTensor bias_;
  Tensor cached_input_;
  bool has_cache_ = false;
};

class ReLU : public Layer {
 public:
  explicit ReLU(std::string name) : Layer(std::move(name)) {}

  Tensor forward(const Tensor& x, Mode mode, Rng* rng = nullptr) override;
  Tensor backward(const Tensor& grad_out) override;
  std::string kind() const override { return "relu"; }

 private:
  Tensor cached_input_;
  bool has_cache_ = false;
};

// Per-channel batch normalization over axis 1. Training mode uses biased
// batch statistics and refuses single-sample batches; evaluation mode
// uses the tracked running statistics. Backward is only valid after a
// training-mode forward pass.
class BatchNorm : public Layer {
 public:
  BatchNorm(std::string name, std::size_t channels, double eps = 1e-5,
            double momentum = 0.9);

  Tensor forward(const Tensor& x, Mode mode, Rng* rng = nullptr) override;
  Tensor backward(const Tensor& grad_out) override;
  std::vector<ParamTensor*> params() override {
    return {&gamma_, &beta_, &running_mean_, &running_var_};
  }
  std::string kind() const override { return "batch_norm"; }

  ParamTensor& gamma() { return gamma_; }
  ParamTensor& beta() { return beta_; }
  ParamTensor& running_mean() { return running_mean_; }
  ParamTensor& running_var() { return running_var_; }

 private:
  std::size_t channels_;
  double eps_;
  double momentum_;
  ParamTensor gamma_;
  ParamTensor beta_;
  ParamTensor running_mean_;
  ParamTensor running_var_;

  Tensor cached_xhat_;
  std::vector<double> cached_istd_;
  bool has_train_cache_ = false;
};

// Inverted dropout: kept activations are scaled by 1/(1-rate) during
// training so evaluation needs no rescaling. A rate of zero is an exact
// identity and consumes no randomness.
class Dropout : public Layer {
 public:
  Dropout(std::string name, double rate);

  Tensor forward(const Tensor& x, Mode mode, Rng* rng = nullptr) override;
  Tensor backward(const Tensor& grad_out) override;
  std::string kind() const override { return "dropout"; }

  double rate() const { return rate_; }

 private:
  double rate_;
  Tensor mask_;
  bool identity_pass_ = false;
  bool has_cache_ = false;
};

class Flatten : public Layer {
 public:
  explicit Flatten(std::string name) : Layer(std::move(name)) {}

  Tensor forward(const Tensor& x, Mode mode, Rng* rng = nullptr) override;
  Tensor backward(const Tensor& grad_out) override;
  std::string kind() const override { return "flatten"; }

 private:
  std::vector<std::size_t> cached_shape_;
  bool has_cache_ = false;
};

// Averages every spatial position away, (batch, channels, ...) down to
// (batch, channels).
class GlobalAvgPool : public Layer {
 public:
  explicit GlobalAvgPool(std::string name) : Layer(std::move(name)) {}

  Tensor forward(const Tensor& x, Mode mode, Rng* rng = nullptr) override;
  Tensor backward(const Tensor& grad_out) override;
  std::string kind() const override { return "global_avg_pool"; }

 private:
  std::vector<std::size_t> cached_shape_;
  bool has_cache_ = false;
};

// Uniform(-bound, bound) fill used for weight initialization.
void fill_uniform(Tensor& t, Rng& rng, double bound);

}  // namespace voxstate::nn
