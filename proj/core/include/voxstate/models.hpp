#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "voxstate/network.hpp"
#include "voxstate/volume.hpp"

namespace voxstate {

// Temporal-pattern classifier over a fixed-length voxel feature vector:
// six valid-convolution blocks (conv, batch norm, ReLU, dropout) feeding
// a flatten and a seven-layer dense head whose last layer emits logits.
struct ModelAConfig {
  std::size_t input_len = 300;
  std::size_t n_classes = 3;
  std::vector<std::size_t> conv_filters{64, 128, 128, 128, 128, 64};
  std::size_t kernel = 10;
  std::vector<std::size_t> fc_widths{1024, 512, 256, 128, 64, 32, 3};
  double conv_dropout = 0.25;
  double fc_dropout = 0.5;
  std::size_t fc_dropout_layers = 2;  // dense layers followed by dropout
  double weight_decay = 5e-2;
  double lr0 = 4.5e-3;
  double lr_decay = 0.2;
  std::size_t patience = 50;
  // Cross-check on the flatten width; 0 disables the check.
  std::size_t expected_flatten = 15744;

  void validate() const;
};

nn::Network build_model_a(const ModelAConfig& cfg, Rng& rng);

// Residual bottleneck: 1x1x1 reduce, 3x3x3 spatial (optionally strided),
// 1x1x1 expand, batch norm after each, with an identity or projected
// shortcut added before the closing activation.
class BottleneckBlock : public nn::Layer {
 public:
  BottleneckBlock(std::string name, std::size_t in_channels,
                  std::size_t mid_channels, std::size_t expansion,
                  std::size_t stride);

  nn::Tensor forward(const nn::Tensor& x, nn::Mode mode,
                     Rng* rng = nullptr) override;
  nn::Tensor backward(const nn::Tensor& grad_out) override;
  std::vector<nn::ParamTensor*> params() override;
  std::string kind() const override { return "bottleneck"; }
  void init_params(Rng& base, std::size_t& next_stream) override;

  std::size_t out_channels() const { return out_channels_; }
  bool has_projection() const { return proj_conv_ != nullptr; }

 private:
  std::size_t out_channels_;
  std::unique_ptr<nn::Conv> conv1_, conv2_, conv3_, proj_conv_;
  std::unique_ptr<nn::BatchNorm> bn1_, bn2_, bn3_, proj_bn_;
  std::unique_ptr<nn::ReLU> relu1_, relu2_, relu3_;
};

// Volumetric classifier: a strided 7x7x7 stem, four bottleneck stages,
// global average pooling and a two-layer dense head.
struct ModelBConfig {
  std::size_t in_channels = 1;
  std::size_t n_classes = 2;
  std::size_t stem_filters = 64;
  std::size_t stem_kernel = 7;
  std::size_t stem_stride = 2;
  std::size_t stem_pad = 3;
  std::vector<std::size_t> stage_blocks{3, 4, 6, 3};
  std::vector<std::size_t> stage_mids{64, 128, 256, 512};
  std::vector<std::size_t> stage_strides{1, 2, 2, 2};
  std::size_t expansion = 4;
  std::size_t penultimate = 1000;
  double weight_decay = 2e-4;
  double lr0 = 5e-4;
  double lr_decay = 0.3;
  std::size_t patience = 30;

  void validate() const;

  // Shrunk variant with the same topology, for small volumes and fast
  // turnaround.
  static ModelBConfig tiny();
};

nn::Network build_model_b(const ModelBConfig& cfg, const VolumeDims& dims,
                          Rng& rng);

struct Prediction {
  std::size_t label = 0;
  std::vector<double> probabilities;
  double latency_ms = 0.0;
};

// Single-sample evaluation-mode inference; the reported latency covers
// the forward pass and the softmax.
Prediction predict(nn::Network& net, const nn::Tensor& sample);

}  // namespace voxstate
