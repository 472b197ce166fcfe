#include "voxstate/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace voxstate::nn {

void Network::add(std::unique_ptr<Layer> layer) {
  if (!layer) throw config_error("Network::add: null layer");
  layers_.push_back(std::move(layer));
}

Tensor Network::forward(const Tensor& x, Mode mode, Rng* rng) {
  if (layers_.empty()) throw config_error("Network::forward: empty network");
  Tensor cur = x;
  for (auto& l : layers_) cur = l->forward(cur, mode, rng);
  return cur;
}

Tensor Network::backward(const Tensor& grad_out) {
  if (layers_.empty()) throw config_error("Network::backward: empty network");
  Tensor cur = grad_out;
  for (std::size_t i = layers_.size(); i-- > 0;)
    cur = layers_[i]->backward(cur);
  return cur;
}

std::vector<ParamTensor*> Network::params() {
  std::vector<ParamTensor*> all;
  for (auto& l : layers_)
    for (ParamTensor* p : l->params()) all.push_back(p);
  return all;
}

void Network::zero_grads() {
  for (ParamTensor* p : params())
    std::fill(p->grad.data.begin(), p->grad.data.end(), 0.0);
}

// ---------------------------------------------------------------------------

Tensor softmax(const Tensor& logits) {
  if (logits.rank() != 2)
    throw config_error("softmax: expected (batch, classes), got " +
                       logits.shape_str());
  const std::size_t n = logits.axis(0);
  const std::size_t c = logits.axis(1);
  Tensor p(logits.shape);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = logits.data.data() + i * c;
    double m = row[0];
    for (std::size_t j = 1; j < c; ++j) m = std::max(m, row[j]);
    double sum = 0.0;
    double* out = p.data.data() + i * c;
    for (std::size_t j = 0; j < c; ++j) {
      out[j] = std::exp(row[j] - m);
      sum += out[j];
    }
    for (std::size_t j = 0; j < c; ++j) out[j] /= sum;
  }
  return p;
}

LossResult softmax_cross_entropy(const Tensor& logits,
                                 const std::vector<std::size_t>& labels) {
  if (logits.rank() != 2)
    throw config_error("softmax_cross_entropy: expected (batch, classes), got " +
                       logits.shape_str());
  const std::size_t n = logits.axis(0);
  const std::size_t c = logits.axis(1);
  if (labels.size() != n)
    throw config_error("softmax_cross_entropy: " + std::to_string(n) +
                       " rows but " + std::to_string(labels.size()) +
                       " labels");
  if (n == 0) throw config_error("softmax_cross_entropy: empty batch");

  LossResult res;
  res.grad = softmax(logits);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] >= c)
      throw config_error("softmax_cross_entropy: label " +
                         std::to_string(labels[i]) + " out of range for " +
                         std::to_string(c) + " classes");
    const double* row = logits.data.data() + i * c;
    double m = row[0];
    for (std::size_t j = 1; j < c; ++j) m = std::max(m, row[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) sum += std::exp(row[j] - m);
    total += std::log(sum) - (row[labels[i]] - m);
  }
  res.loss = total / static_cast<double>(n);

  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    double* g = res.grad.data.data() + i * c;
    g[labels[i]] -= 1.0;
    for (std::size_t j = 0; j < c; ++j) g[j] *= inv_n;
  }
  return res;
}

// ---------------------------------------------------------------------------

void Adam::step(const std::vector<ParamTensor*>& params) {
  if (tracked_.empty()) {
    tracked_ = params;
    slots_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      slots_[i].m.assign(params[i]->value.size(), 0.0);
      slots_[i].v.assign(params[i]->value.size(), 0.0);
    }
  } else if (tracked_ != params) {
    throw config_error("Adam::step: parameter list changed between steps");
  }

  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));

  for (std::size_t i = 0; i < tracked_.size(); ++i) {
    ParamTensor& p = *tracked_[i];
    if (!p.learnable) continue;
    Slot& s = slots_[i];
    const double wd = p.apply_l2 ? cfg_.weight_decay : 0.0;
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const double g = p.grad.data[k] + wd * p.value.data[k];
      if (!std::isfinite(g))
        throw numeric_error("Adam::step: non-finite gradient in " + p.name);
      s.m[k] = cfg_.beta1 * s.m[k] + (1.0 - cfg_.beta1) * g;
      s.v[k] = cfg_.beta2 * s.v[k] + (1.0 - cfg_.beta2) * g * g;
      const double m_hat = s.m[k] / bc1;
      const double v_hat = s.v[k] / bc2;
      p.value.data[k] -= cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
    }
  }
}

// ---------------------------------------------------------------------------

LrSchedule::LrSchedule(double lr0, double decay_factor,
                       std::size_t patience_epochs)
    : lr(lr0), decay(decay_factor), patience(patience_epochs) {
  if (!(lr0 > 0.0)) throw config_error("LrSchedule: lr must be positive");
  if (!(decay_factor > 0.0 && decay_factor < 1.0))
    throw config_error("LrSchedule: decay must be in (0,1)");
  if (patience_epochs == 0)
    throw config_error("LrSchedule: patience must be positive");
}

double LrSchedule::observe(double loss) {
  if (loss < best_loss) {
    best_loss = loss;
    stall = 0;
  } else {
    ++stall;
    if (stall == patience) {
      lr *= decay;
      stall = 0;
    }
  }
  return lr;
}

// ---------------------------------------------------------------------------

void write_network_file(const std::string& path, Network& net) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw format_error("cannot open for writing: " + path);

  auto put_u32 = [&](std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v),
                          static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
  };
  auto put_f64 = [&](double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    put_u32(static_cast<std::uint32_t>(bits));
    put_u32(static_cast<std::uint32_t>(bits >> 32));
  };

  out.write("NNET", 4);
  put_u32(1);
  put_u32(static_cast<std::uint32_t>(net.n_layers()));
  for (std::size_t i = 0; i < net.n_layers(); ++i) {
    Layer& l = net.layer(i);
    const std::string kind = l.kind();
    put_u32(static_cast<std::uint32_t>(kind.size()));
    out.write(kind.data(), static_cast<std::streamsize>(kind.size()));
    const auto params = l.params();
    put_u32(static_cast<std::uint32_t>(params.size()));
    for (const ParamTensor* p : params) {
      put_u32(static_cast<std::uint32_t>(p->value.rank()));
      for (std::size_t d : p->value.shape)
        put_u32(static_cast<std::uint32_t>(d));
      for (double v : p->value.data) put_f64(v);
    }
  }
  out.close();
  if (!out) throw format_error("write failed: " + path);
}

void read_network_file(const std::string& path, Network& net) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw format_error("cannot open: " + path);
  std::size_t offset = 0;

  auto raw = [&](void* p, std::size_t n) {
    in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n)
      throw format_error(path + ": truncated at offset " +
                         std::to_string(offset +
                                        static_cast<std::size_t>(in.gcount())));
    offset += n;
  };
  auto get_u32 = [&] {
    unsigned char b[4];
    raw(b, 4);
    return static_cast<std::uint32_t>(b[0]) |
           (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) |
           (static_cast<std::uint32_t>(b[3]) << 24);
  };
  auto get_f64 = [&] {
    std::uint64_t lo = get_u32();
    std::uint64_t hi = get_u32();
    std::uint64_t bits = lo | (hi << 32);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  };

  char magic[4];
  raw(magic, 4);
  if (std::memcmp(magic, "NNET", 4) != 0)
    throw format_error(path + ": bad magic, expected \"NNET\"");
  const std::uint32_t version = get_u32();
  if (version != 1)
    throw format_error(path + ": unsupported version " +
                       std::to_string(version));
  const std::uint32_t n_layers = get_u32();
  if (n_layers != net.n_layers())
    throw format_error(path + ": file has " + std::to_string(n_layers) +
                       " layers, network has " +
                       std::to_string(net.n_layers()));

  for (std::size_t i = 0; i < n_layers; ++i) {
    Layer& l = net.layer(i);
    const std::uint32_t kind_len = get_u32();
    if (kind_len > 64)
      throw format_error(path + ": implausible layer kind length at offset " +
                         std::to_string(offset - 4));
    std::string kind(kind_len, '\0');
    if (kind_len) raw(kind.data(), kind_len);
    if (kind != l.kind())
      throw format_error(path + ": layer " + std::to_string(i) + " is \"" +
                         kind + "\" in the file but \"" + l.kind() +
                         "\" in the network");
    const auto params = l.params();
    const std::uint32_t n_tensors = get_u32();
    if (n_tensors != params.size())
      throw format_error(path + ": layer " + std::to_string(i) + " has " +
                         std::to_string(n_tensors) + " tensors in the file, " +
                         std::to_string(params.size()) + " in the network");
    for (ParamTensor* p : params) {
      const std::uint32_t rank = get_u32();
      if (rank == 0 || rank > 5)
        throw format_error(path + ": bad tensor rank at offset " +
                           std::to_string(offset - 4));
      std::vector<std::size_t> shape(rank);
      for (std::uint32_t d = 0; d < rank; ++d) shape[d] = get_u32();
      if (shape != p->value.shape) {
        Tensor probe;
        probe.shape = shape;
        throw format_error(path + ": tensor " + p->name + " has shape " +
                           probe.shape_str() + " in the file, expected " +
                           p->value.shape_str());
      }
      for (double& v : p->value.data) v = get_f64();
    }
  }

  char extra;
  in.read(&extra, 1);
  if (!in.eof())
    throw format_error(path + ": trailing bytes at offset " +
                       std::to_string(offset));
}

}  // namespace voxstate::nn
