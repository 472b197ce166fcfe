#include "voxstate/models.hpp"

#include <chrono>
#include <cmath>

namespace voxstate {

using nn::BatchNorm;
using nn::Conv;
using nn::Dense;
using nn::Dropout;
using nn::Flatten;
using nn::GlobalAvgPool;
using nn::Mode;
using nn::Network;
using nn::ReLU;
using nn::Tensor;

namespace {

void check_rate(double r, const char* what) {
  if (!(r >= 0.0 && r < 1.0))
    throw config_error(std::string(what) + " must be in [0,1), got " +
                       std::to_string(r));
}

void check_training_params(double weight_decay, double lr0, double lr_decay,
                           std::size_t patience, const char* who) {
  const std::string w(who);
  if (weight_decay < 0.0)
    throw config_error(w + ": weight decay must be non-negative");
  if (!(lr0 > 0.0)) throw config_error(w + ": lr0 must be positive");
  if (!(lr_decay > 0.0 && lr_decay < 1.0))
    throw config_error(w + ": lr decay must be in (0,1)");
  if (patience == 0) throw config_error(w + ": patience must be positive");
}

std::size_t conv_out_extent(std::size_t in, std::size_t kernel,
                            std::size_t stride, std::size_t pad,
                            const std::string& where) {
  if (in + 2 * pad < kernel)
    throw config_error(where + ": spatial extent " + std::to_string(in) +
                       " collapses under kernel " + std::to_string(kernel) +
                       " with padding " + std::to_string(pad));
  return (in + 2 * pad - kernel) / stride + 1;
}

}  // namespace

// ---------------------------------------------------------------------------
// Model A

void ModelAConfig::validate() const {
  if (input_len == 0)
    throw config_error("ModelAConfig: input_len must be positive");
  if (n_classes < 2)
    throw config_error("ModelAConfig: need at least two classes");
  if (conv_filters.empty())
    throw config_error("ModelAConfig: conv_filters must not be empty");
  for (std::size_t f : conv_filters)
    if (f == 0)
      throw config_error("ModelAConfig: conv filter counts must be positive");
  if (kernel == 0) throw config_error("ModelAConfig: kernel must be positive");
  if (fc_widths.empty())
    throw config_error("ModelAConfig: fc_widths must not be empty");
  for (std::size_t w : fc_widths)
    if (w == 0)
      throw config_error("ModelAConfig: dense widths must be positive");
  if (fc_widths.back() != n_classes)
    throw config_error("ModelAConfig: last dense width " +
                       std::to_string(fc_widths.back()) +
                       " must equal n_classes " + std::to_string(n_classes));
  check_rate(conv_dropout, "ModelAConfig: conv_dropout");
  check_rate(fc_dropout, "ModelAConfig: fc_dropout");
  check_training_params(weight_decay, lr0, lr_decay, patience, "ModelAConfig");

  const std::size_t shrink = conv_filters.size() * (kernel - 1);
  if (input_len <= shrink)
    throw config_error("ModelAConfig: input_len " + std::to_string(input_len) +
                       " is consumed by " +
                       std::to_string(conv_filters.size()) +
                       " valid convolutions of kernel " +
                       std::to_string(kernel));
}

Network build_model_a(const ModelAConfig& cfg, Rng& rng) {
  cfg.validate();

  Network net;
  std::size_t channels = 1;
  std::size_t len = cfg.input_len;
  for (std::size_t i = 0; i < cfg.conv_filters.size(); ++i) {
    const std::string tag = std::to_string(i + 1);
    net.add(std::make_unique<Conv>("conv" + tag, 1, channels,
                                   cfg.conv_filters[i], cfg.kernel));
    net.add(std::make_unique<BatchNorm>("bn" + tag, cfg.conv_filters[i]));
    net.add(std::make_unique<ReLU>("relu" + tag));
    net.add(std::make_unique<Dropout>("drop" + tag, cfg.conv_dropout));
    channels = cfg.conv_filters[i];
    len -= cfg.kernel - 1;
  }
  net.add(std::make_unique<Flatten>("flatten"));

  std::size_t width = len * channels;
  if (cfg.expected_flatten != 0 && width != cfg.expected_flatten)
    throw config_error("build_model_a: flatten width " +
                       std::to_string(width) + " does not match expected " +
                       std::to_string(cfg.expected_flatten));

  for (std::size_t k = 0; k < cfg.fc_widths.size(); ++k) {
    const std::string tag = std::to_string(k + 1);
    net.add(std::make_unique<Dense>("fc" + tag, width, cfg.fc_widths[k]));
    if (k + 1 < cfg.fc_widths.size()) {
      net.add(std::make_unique<ReLU>("fc" + tag + "_relu"));
      if (k < cfg.fc_dropout_layers)
        net.add(std::make_unique<Dropout>("fc" + tag + "_drop",
                                          cfg.fc_dropout));
    }
    width = cfg.fc_widths[k];
  }

  std::size_t stream = 0;
  for (std::size_t i = 0; i < net.n_layers(); ++i)
    net.layer(i).init_params(rng, stream);
  return net;
}

// ---------------------------------------------------------------------------
// BottleneckBlock

BottleneckBlock::BottleneckBlock(std::string name, std::size_t in_channels,
                                 std::size_t mid_channels,
                                 std::size_t expansion, std::size_t stride)
    : Layer(std::move(name)), out_channels_(mid_channels * expansion) {
  if (in_channels == 0 || mid_channels == 0 || expansion == 0)
    throw config_error(name_ + ": channel counts must be positive");
  if (stride == 0) throw config_error(name_ + ": stride must be positive");

  conv1_ = std::make_unique<Conv>(name_ + ".conv1", 3, in_channels,
                                  mid_channels, 1);
  bn1_ = std::make_unique<BatchNorm>(name_ + ".bn1", mid_channels);
  relu1_ = std::make_unique<ReLU>(name_ + ".relu1");
  conv2_ = std::make_unique<Conv>(name_ + ".conv2", 3, mid_channels,
                                  mid_channels, 3, stride, 1);
  bn2_ = std::make_unique<BatchNorm>(name_ + ".bn2", mid_channels);
  relu2_ = std::make_unique<ReLU>(name_ + ".relu2");
  conv3_ = std::make_unique<Conv>(name_ + ".conv3", 3, mid_channels,
                                  out_channels_, 1);
  bn3_ = std::make_unique<BatchNorm>(name_ + ".bn3", out_channels_);
  relu3_ = std::make_unique<ReLU>(name_ + ".relu3");

  if (stride != 1 || in_channels != out_channels_) {
    proj_conv_ = std::make_unique<Conv>(name_ + ".proj", 3, in_channels,
                                        out_channels_, 1, stride);
    proj_bn_ = std::make_unique<BatchNorm>(name_ + ".proj_bn", out_channels_);
  }
}

Tensor BottleneckBlock::forward(const Tensor& x, Mode mode, Rng* rng) {
  Tensor h = conv1_->forward(x, mode, rng);
  h = bn1_->forward(h, mode, rng);
  h = relu1_->forward(h, mode, rng);
  h = conv2_->forward(h, mode, rng);
  h = bn2_->forward(h, mode, rng);
  h = relu2_->forward(h, mode, rng);
  h = conv3_->forward(h, mode, rng);
  h = bn3_->forward(h, mode, rng);

  if (proj_conv_) {
    Tensor s = proj_conv_->forward(x, mode, rng);
    s = proj_bn_->forward(s, mode, rng);
    for (std::size_t i = 0; i < h.size(); ++i) h.data[i] += s.data[i];
  } else {
    if (!h.same_shape(x))
      throw config_error(name_ + ": identity shortcut shape " + x.shape_str() +
                         " does not match main path " + h.shape_str());
    for (std::size_t i = 0; i < h.size(); ++i) h.data[i] += x.data[i];
  }
  return relu3_->forward(h, mode, rng);
}

Tensor BottleneckBlock::backward(const Tensor& grad_out) {
  Tensor g = relu3_->backward(grad_out);

  Tensor gm = bn3_->backward(g);
  gm = conv3_->backward(gm);
  gm = relu2_->backward(gm);
  gm = bn2_->backward(gm);
  gm = conv2_->backward(gm);
  gm = relu1_->backward(gm);
  gm = bn1_->backward(gm);
  gm = conv1_->backward(gm);

  if (proj_conv_) {
    Tensor gs = proj_bn_->backward(g);
    gs = proj_conv_->backward(gs);
    for (std::size_t i = 0; i < gm.size(); ++i) gm.data[i] += gs.data[i];
  } else {
    for (std::size_t i = 0; i < gm.size(); ++i) gm.data[i] += g.data[i];
  }
  return gm;
}

std::vector<nn::ParamTensor*> BottleneckBlock::params() {
  std::vector<nn::ParamTensor*> all;
  for (Layer* l :
       {static_cast<Layer*>(conv1_.get()), static_cast<Layer*>(bn1_.get()),
        static_cast<Layer*>(conv2_.get()), static_cast<Layer*>(bn2_.get()),
        static_cast<Layer*>(conv3_.get()), static_cast<Layer*>(bn3_.get())})
    for (nn::ParamTensor* p : l->params()) all.push_back(p);
  if (proj_conv_) {
    for (nn::ParamTensor* p : proj_conv_->params()) all.push_back(p);
    for (nn::ParamTensor* p : proj_bn_->params()) all.push_back(p);
  }
  return all;
}

void BottleneckBlock::init_params(Rng& base, std::size_t& next_stream) {
  conv1_->init_params(base, next_stream);
  conv2_->init_params(base, next_stream);
  conv3_->init_params(base, next_stream);
  if (proj_conv_) proj_conv_->init_params(base, next_stream);
}

// ---------------------------------------------------------------------------
// Model B

void ModelBConfig::validate() const {
  if (in_channels == 0)
    throw config_error("ModelBConfig: in_channels must be positive");
  if (n_classes < 2)
    throw config_error("ModelBConfig: need at least two classes");
  if (stem_filters == 0 || stem_kernel == 0 || stem_stride == 0)
    throw config_error("ModelBConfig: stem parameters must be positive");
  if (stage_blocks.empty())
    throw config_error("ModelBConfig: need at least one stage");
  if (stage_mids.size() != stage_blocks.size() ||
      stage_strides.size() != stage_blocks.size())
    throw config_error(
        "ModelBConfig: stage_blocks, stage_mids and stage_strides must have "
        "matching lengths");
  for (std::size_t i = 0; i < stage_blocks.size(); ++i)
    if (stage_blocks[i] == 0 || stage_mids[i] == 0 || stage_strides[i] == 0)
      throw config_error("ModelBConfig: stage " + std::to_string(i + 1) +
                         " has a zero entry");
  if (expansion == 0)
    throw config_error("ModelBConfig: expansion must be positive");
  if (penultimate == 0)
    throw config_error("ModelBConfig: penultimate width must be positive");
  check_training_params(weight_decay, lr0, lr_decay, patience, "ModelBConfig");
}

ModelBConfig ModelBConfig::tiny() {
  ModelBConfig cfg;
  cfg.stem_filters = 8;
  cfg.stage_blocks = {1, 1, 1, 1};
  cfg.stage_mids = {4, 8, 16, 32};
  cfg.expansion = 2;
  return cfg;
}

Network build_model_b(const ModelBConfig& cfg, const VolumeDims& dims,
                      Rng& rng) {
  cfg.validate();
  if (dims.count() == 0)
    throw config_error("build_model_b: volume dimensions must be positive");

  // Tensor spatial order is (z, y, x); x varies fastest in storage.
  std::size_t sp[3] = {dims.nz, dims.ny, dims.nx};

  Network net;
  net.add(std::make_unique<Conv>("stem", 3, cfg.in_channels, cfg.stem_filters,
                                 cfg.stem_kernel, cfg.stem_stride,
                                 cfg.stem_pad));
  net.add(std::make_unique<BatchNorm>("stem_bn", cfg.stem_filters));
  net.add(std::make_unique<ReLU>("stem_relu"));
  for (std::size_t d = 0; d < 3; ++d)
    sp[d] = conv_out_extent(sp[d], cfg.stem_kernel, cfg.stem_stride,
                            cfg.stem_pad, "build_model_b: stem");

  std::size_t channels = cfg.stem_filters;
  for (std::size_t s = 0; s < cfg.stage_blocks.size(); ++s) {
    for (std::size_t b = 0; b < cfg.stage_blocks[s]; ++b) {
      const std::size_t stride = b == 0 ? cfg.stage_strides[s] : 1;
      const std::string name =
          "s" + std::to_string(s + 1) + "b" + std::to_string(b + 1);
      auto block = std::make_unique<BottleneckBlock>(
          name, channels, cfg.stage_mids[s], cfg.expansion, stride);
      channels = block->out_channels();
      net.add(std::move(block));
      for (std::size_t d = 0; d < 3; ++d)
        sp[d] = conv_out_extent(sp[d], 3, stride, 1, "build_model_b: " + name);
    }
  }

  net.add(std::make_unique<GlobalAvgPool>("gap"));
  net.add(std::make_unique<Dense>("fc1", channels, cfg.penultimate));
  net.add(std::make_unique<ReLU>("fc1_relu"));
  net.add(std::make_unique<Dense>("fc2", cfg.penultimate, cfg.n_classes));

  std::size_t stream = 0;
  for (std::size_t i = 0; i < net.n_layers(); ++i)
    net.layer(i).init_params(rng, stream);
  return net;
}

// ---------------------------------------------------------------------------

Prediction predict(Network& net, const Tensor& sample) {
  if (sample.rank() < 2 || sample.axis(0) != 1)
    throw config_error("predict: expected a single-sample batch, got " +
                       sample.shape_str());

  const auto t0 = std::chrono::steady_clock::now();
  Tensor logits = net.forward(sample, Mode::kEval);
  Tensor probs = nn::softmax(logits);
  const auto t1 = std::chrono::steady_clock::now();

  Prediction out;
  out.probabilities.assign(probs.data.begin(), probs.data.end());
  out.label = 0;
  for (std::size_t j = 1; j < out.probabilities.size(); ++j)
    if (out.probabilities[j] > out.probabilities[out.label]) out.label = j;
  out.latency_ms =
      std::chrono::duration<double, std::milli>(t1 - t0).count();
  return out;
}

}  // namespace voxstate
