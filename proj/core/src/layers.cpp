#include "voxstate/layers.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "voxstate/matrix.hpp"

namespace voxstate::nn {
namespace {

std::string shape_to_str(const std::vector<std::size_t>& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

void require_shape(const Tensor& t, const std::vector<std::size_t>& expected,
                   const std::string& who, const char* what) {
  if (t.shape != expected)
    throw config_error(who + ": " + what + " shape " + t.shape_str() +
                       " does not match expected " + shape_to_str(expected));
}

}  // namespace

// ---------------------------------------------------------------------------
// Conv

Conv::Conv(std::string name, std::size_t spatial_rank, std::size_t in_channels,
           std::size_t out_channels, std::size_t kernel, std::size_t stride,
           std::size_t pad)
    : Layer(std::move(name)),
      spatial_rank_(spatial_rank),
      in_channels_(in_channels),
      out_channels_(out_channels),
      kernel_(kernel),
      stride_(stride),
      pad_(pad),
      fan_in_(0),
      weight_(name_ + ".weight",
              [&] {
                std::vector<std::size_t> s{out_channels, in_channels};
                for (std::size_t d = 0; d < spatial_rank; ++d)
                  s.push_back(kernel);
                return s;
              }(),
              true),
      bias_(name_ + ".bias", {out_channels}, false) {
  if (spatial_rank_ != 1 && spatial_rank_ != 3)
    throw config_error(name_ + ": spatial rank must be 1 or 3, got " +
                       std::to_string(spatial_rank_));
  if (in_channels_ == 0 || out_channels_ == 0)
    throw config_error(name_ + ": channel counts must be positive");
  if (kernel_ == 0) throw config_error(name_ + ": kernel size must be positive");
  if (stride_ == 0) throw config_error(name_ + ": stride must be positive");
  fan_in_ = in_channels_;
  for (std::size_t d = 0; d < spatial_rank_; ++d) fan_in_ *= kernel_;
}

void Conv::im2col(const double* x, double* col) const {
  if (spatial_rank_ == 1) {
    const std::ptrdiff_t len = static_cast<std::ptrdiff_t>(in_spatial_[0]);
    const std::size_t out_len = out_spatial_[0];
    for (std::size_t c = 0; c < in_channels_; ++c) {
      const double* xc = x + c * in_spatial_[0];
      for (std::size_t k = 0; k < kernel_; ++k) {
        double* row = col + (c * kernel_ + k) * out_len;
        for (std::size_t o = 0; o < out_len; ++o) {
          const std::ptrdiff_t pos =
              static_cast<std::ptrdiff_t>(o * stride_ + k) -
              static_cast<std::ptrdiff_t>(pad_);
          row[o] = (pos >= 0 && pos < len) ? xc[pos] : 0.0;
        }
      }
    }
    return;
  }

  const std::ptrdiff_t in_d = static_cast<std::ptrdiff_t>(in_spatial_[0]);
  const std::ptrdiff_t in_h = static_cast<std::ptrdiff_t>(in_spatial_[1]);
  const std::ptrdiff_t in_w = static_cast<std::ptrdiff_t>(in_spatial_[2]);
  const std::size_t out_d = out_spatial_[0];
  const std::size_t out_h = out_spatial_[1];
  const std::size_t out_w = out_spatial_[2];
  const std::size_t out_len = out_d * out_h * out_w;
  const std::size_t k3 = kernel_ * kernel_ * kernel_;
  for (std::size_t c = 0; c < in_channels_; ++c) {
    const double* xc = x + c * (in_spatial_[0] * in_spatial_[1] * in_spatial_[2]);
    for (std::size_t kd = 0; kd < kernel_; ++kd)
      for (std::size_t kh = 0; kh < kernel_; ++kh)
        for (std::size_t kw = 0; kw < kernel_; ++kw) {
          double* row =
              col + (c * k3 + (kd * kernel_ + kh) * kernel_ + kw) * out_len;
          std::size_t o = 0;
          for (std::size_t od = 0; od < out_d; ++od) {
            const std::ptrdiff_t id =
                static_cast<std::ptrdiff_t>(od * stride_ + kd) -
                static_cast<std::ptrdiff_t>(pad_);
            for (std::size_t oh = 0; oh < out_h; ++oh) {
              const std::ptrdiff_t ih =
                  static_cast<std::ptrdiff_t>(oh * stride_ + kh) -
                  static_cast<std::ptrdiff_t>(pad_);
              const bool plane_ok =
                  id >= 0 && id < in_d && ih >= 0 && ih < in_h;
              const double* src =
                  plane_ok ? xc + (id * in_h + ih) * in_w : nullptr;
              for (std::size_t ow = 0; ow < out_w; ++ow, ++o) {
                const std::ptrdiff_t iw =
                    static_cast<std::ptrdiff_t>(ow * stride_ + kw) -
                    static_cast<std::ptrdiff_t>(pad_);
                row[o] =
                    (plane_ok && iw >= 0 && iw < in_w) ? src[iw] : 0.0;
              }
            }
          }
        }
  }
}

void Conv::col2im(const double* col, double* gx) const {
  if (spatial_rank_ == 1) {
    const std::ptrdiff_t len = static_cast<std::ptrdiff_t>(in_spatial_[0]);
    const std::size_t out_len = out_spatial_[0];
    for (std::size_t c = 0; c < in_channels_; ++c) {
      double* gc = gx + c * in_spatial_[0];
      for (std::size_t k = 0; k < kernel_; ++k) {
        const double* row = col + (c * kernel_ + k) * out_len;
        for (std::size_t o = 0; o < out_len; ++o) {
          const std::ptrdiff_t pos =
              static_cast<std::ptrdiff_t>(o * stride_ + k) -
              static_cast<std::ptrdiff_t>(pad_);
          if (pos >= 0 && pos < len) gc[pos] += row[o];
        }
      }
    }
    return;
  }

  const std::ptrdiff_t in_d = static_cast<std::ptrdiff_t>(in_spatial_[0]);
  const std::ptrdiff_t in_h = static_cast<std::ptrdiff_t>(in_spatial_[1]);
  const std::ptrdiff_t in_w = static_cast<std::ptrdiff_t>(in_spatial_[2]);
  const std::size_t out_d = out_spatial_[0];
  const std::size_t out_h = out_spatial_[1];
  const std::size_t out_w = out_spatial_[2];
  const std::size_t out_len = out_d * out_h * out_w;
  const std::size_t k3 = kernel_ * kernel_ * kernel_;
  for (std::size_t c = 0; c < in_channels_; ++c) {
    double* gc = gx + c * (in_spatial_[0] * in_spatial_[1] * in_spatial_[2]);
    for (std::size_t kd = 0; kd < kernel_; ++kd)
      for (std::size_t kh = 0; kh < kernel_; ++kh)
        for (std::size_t kw = 0; kw < kernel_; ++kw) {
          const double* row =
              col + (c * k3 + (kd * kernel_ + kh) * kernel_ + kw) * out_len;
          std::size_t o = 0;
          for (std::size_t od = 0; od < out_d; ++od) {
            const std::ptrdiff_t id =
                static_cast<std::ptrdiff_t>(od * stride_ + kd) -
                static_cast<std::ptrdiff_t>(pad_);
            for (std::size_t oh = 0; oh < out_h; ++oh) {
              const std::ptrdiff_t ih =
                  static_cast<std::ptrdiff_t>(oh * stride_ + kh) -
                  static_cast<std::ptrdiff_t>(pad_);
              const bool plane_ok =
                  id >= 0 && id < in_d && ih >= 0 && ih < in_h;
              double* dst = plane_ok ? gc + (id * in_h + ih) * in_w : nullptr;
              for (std::size_t ow = 0; ow < out_w; ++ow, ++o) {
                const std::ptrdiff_t iw =
                    static_cast<std::ptrdiff_t>(ow * stride_ + kw) -
                    static_cast<std::ptrdiff_t>(pad_);
                if (plane_ok && iw >= 0 && iw < in_w) dst[iw] += row[o];
              }
            }
          }
        }
  }
}

Tensor Conv::forward(const Tensor& x, Mode, Rng*) {
  if (x.rank() != spatial_rank_ + 2)
    throw config_error(name_ + ": expected rank " +
                       std::to_string(spatial_rank_ + 2) + " input, got " +
                       x.shape_str());
  if (x.axis(1) != in_channels_)
    throw config_error(name_ + ": input has " + std::to_string(x.axis(1)) +
                       " channels, layer expects " +
                       std::to_string(in_channels_));

  in_spatial_.assign(x.shape.begin() + 2, x.shape.end());
  out_spatial_.clear();
  for (std::size_t d = 0; d < spatial_rank_; ++d) {
    const std::ptrdiff_t padded =
        static_cast<std::ptrdiff_t>(in_spatial_[d]) +
        2 * static_cast<std::ptrdiff_t>(pad_) -
        static_cast<std::ptrdiff_t>(kernel_);
    if (padded < 0)
      throw config_error(name_ + ": kernel " + std::to_string(kernel_) +
                         " exceeds padded input extent " +
                         std::to_string(in_spatial_[d] + 2 * pad_));
    out_spatial_.push_back(static_cast<std::size_t>(padded) / stride_ + 1);
  }

  const std::size_t n = x.axis(0);
  const std::size_t out_len = Tensor::shape_product(out_spatial_);
  const std::size_t ck = fan_in_;

  std::vector<std::size_t> out_shape{n, out_channels_};
  out_shape.insert(out_shape.end(), out_spatial_.begin(), out_spatial_.end());
  Tensor y(out_shape);

  std::vector<double> col(ck * out_len);
  const std::size_t in_sample = x.sample_size();
  const std::size_t out_sample = out_channels_ * out_len;
  for (std::size_t i = 0; i < n; ++i) {
    im2col(x.data.data() + i * in_sample, col.data());
    gemm(false, false, out_channels_, out_len, ck, 1.0,
         weight_.value.data.data(), ck, col.data(), out_len, 0.0,
         y.data.data() + i * out_sample, out_len);
    double* yi = y.data.data() + i * out_sample;
    for (std::size_t f = 0; f < out_channels_; ++f) {
      const double b = bias_.value.data[f];
      for (std::size_t o = 0; o < out_len; ++o) yi[f * out_len + o] += b;
    }
  }

  cached_input_ = x;
  has_cache_ = true;
  return y;
}

Tensor Conv::backward(const Tensor& grad_out) {
  if (!has_cache_) throw state_error(name_ + ": backward before forward");

  std::vector<std::size_t> expected{cached_input_.axis(0), out_channels_};
  expected.insert(expected.end(), out_spatial_.begin(), out_spatial_.end());
  require_shape(grad_out, expected, name_, "gradient");

  const std::size_t n = cached_input_.axis(0);
  const std::size_t out_len = Tensor::shape_product(out_spatial_);
  const std::size_t ck = fan_in_;
  const std::size_t in_sample = cached_input_.sample_size();
  const std::size_t out_sample = out_channels_ * out_len;

  Tensor gx(cached_input_.shape);
  std::vector<double> col(ck * out_len);
  std::vector<double> gcol(ck * out_len);

  for (std::size_t i = 0; i < n; ++i) {
    const double* gy = grad_out.data.data() + i * out_sample;
    im2col(cached_input_.data.data() + i * in_sample, col.data());
    gemm(false, true, out_channels_, ck, out_len, 1.0, gy, out_len, col.data(),
         out_len, 1.0, weight_.grad.data.data(), ck);
    gemm(true, false, ck, out_len, out_channels_, 1.0,
         weight_.value.data.data(), ck, gy, out_len, 0.0, gcol.data(),
         out_len);
    col2im(gcol.data(), gx.data.data() + i * in_sample);
    for (std::size_t f = 0; f < out_channels_; ++f) {
      double s = 0.0;
      for (std::size_t o = 0; o < out_len; ++o) s += gy[f * out_len + o];
      bias_.grad.data[f] += s;
    }
  }
  return gx;
}

void Conv::init_params(Rng& base, std::size_t& next_stream) {
  Rng r = base.derive(next_stream++);
  fill_uniform(weight_.value, r, std::sqrt(1.0 / static_cast<double>(fan_in_)));
  std::fill(bias_.value.data.begin(), bias_.value.data.end(), 0.0);
}

// ---------------------------------------------------------------------------
// Dense

Dense::Dense(std::string name, std::size_t in_features,
             std::size_t out_features)
    : Layer(std::move(name)),
      in_features_(in_features),
      out_features_(out_features),
      weight_(name_ + ".weight", {out_features, in_features}, true),
      bias_(name_ + ".bias", {out_features}, false) {
  if (in_features_ == 0 || out_features_ == 0)
    throw config_error(name_ + ": feature counts must be positive");
}

Tensor Dense::forward(const Tensor& x, Mode, Rng*) {
  if (x.rank() != 2 || x.axis(1) != in_features_)
    throw config_error(name_ + ": expected input (batch," +
                       std::to_string(in_features_) + "), got " +
                       x.shape_str());
  const std::size_t n = x.axis(0);
  Tensor y({n, out_features_});
  gemm(false, true, n, out_features_, in_features_, 1.0, x.data.data(),
       in_features_, weight_.value.data.data(), in_features_, 0.0,
       y.data.data(), out_features_);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t o = 0; o < out_features_; ++o)
      y.data[i * out_features_ + o] += bias_.value.data[o];

  cached_input_ = x;
  has_cache_ = true;
  return y;
}

Tensor Dense::backward(const Tensor& grad_out) {
  if (!has_cache_) throw state_error(name_ + ": backward before forward");
  const std::size_t n = cached_input_.axis(0);
  require_shape(grad_out, {n, out_features_}, name_, "gradient");

  gemm(true, false, out_features_, in_features_, n, 1.0, grad_out.data.data(),
       out_features_, cached_input_.data.data(), in_features_, 1.0,
       weight_.grad.data.data(), in_features_);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t o = 0; o < out_features_; ++o)
      bias_.grad.data[o] += grad_out.data[i * out_features_ + o];

  Tensor gx({n, in_features_});
  gemm(false, false, n, in_features_, out_features_, 1.0, grad_out.data.data(),
       out_features_, weight_.value.data.data(), in_features_, 0.0,
       gx.data.data(), in_features_);
  return gx;
}

void Dense::init_params(Rng& base, std::size_t& next_stream) {
  Rng r = base.derive(next_stream++);
  fill_uniform(weight_.value, r,
               std::sqrt(1.0 / static_cast<double>(in_features_)));
  std::fill(bias_.value.data.begin(), bias_.value.data.end(), 0.0);
}

// ---------------------------------------------------------------------------
// ReLU

Tensor ReLU::forward(const Tensor& x, Mode, Rng*) {
  Tensor y(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i)
    y.data[i] = x.data[i] > 0.0 ? x.data[i] : 0.0;
  cached_input_ = x;
  has_cache_ = true;
  return y;
}

Tensor ReLU::backward(const Tensor& grad_out) {
  if (!has_cache_) throw state_error(name_ + ": backward before forward");
  require_shape(grad_out, cached_input_.shape, name_, "gradient");
  Tensor gx(cached_input_.shape);
  for (std::size_t i = 0; i < gx.size(); ++i)
    gx.data[i] = cached_input_.data[i] > 0.0 ? grad_out.data[i] : 0.0;
  return gx;
}

// ---------------------------------------------------------------------------
// BatchNorm

BatchNorm::BatchNorm(std::string name, std::size_t channels, double eps,
                     double momentum)
    : Layer(std::move(name)),
      channels_(channels),
      eps_(eps),
      momentum_(momentum),
      gamma_(name_ + ".gamma", {channels}, false),
      beta_(name_ + ".beta", {channels}, false),
      running_mean_(name_ + ".running_mean", {channels}, false, false),
      running_var_(name_ + ".running_var", {channels}, false, false) {
  if (channels_ == 0)
    throw config_error(name_ + ": channel count must be positive");
  if (!(eps_ > 0.0)) throw config_error(name_ + ": eps must be positive");
  if (!(momentum_ >= 0.0 && momentum_ < 1.0))
    throw config_error(name_ + ": momentum must be in [0,1)");
  for (double& g : gamma_.value.data) g = 1.0;
  for (double& v : running_var_.value.data) v = 1.0;
}

Tensor BatchNorm::forward(const Tensor& x, Mode mode, Rng*) {
  if (x.rank() < 2 || x.axis(1) != channels_)
    throw config_error(name_ + ": input " + x.shape_str() +
                       " does not carry " + std::to_string(channels_) +
                       " channels on axis 1");
  const std::size_t n = x.axis(0);
  const std::size_t spatial = x.sample_size() / channels_;
  Tensor y(x.shape);

  if (mode == Mode::kEval) {
    for (std::size_t c = 0; c < channels_; ++c) {
      const double istd = 1.0 / std::sqrt(running_var_.value.data[c] + eps_);
      const double mean = running_mean_.value.data[c];
      const double g = gamma_.value.data[c];
      const double b = beta_.value.data[c];
      for (std::size_t i = 0; i < n; ++i) {
        const double* xs = x.data.data() + (i * channels_ + c) * spatial;
        double* ys = y.data.data() + (i * channels_ + c) * spatial;
        for (std::size_t s = 0; s < spatial; ++s)
          ys[s] = g * (xs[s] - mean) * istd + b;
      }
    }
    has_train_cache_ = false;
    return y;
  }

  if (n < 2)
    throw numeric_error(name_ +
                        ": batch statistics are degenerate for a single "
                        "sample; use evaluation mode or a larger batch");

  const double count = static_cast<double>(n * spatial);
  cached_xhat_ = Tensor(x.shape);
  cached_istd_.assign(channels_, 0.0);

  for (std::size_t c = 0; c < channels_; ++c) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double* xs = x.data.data() + (i * channels_ + c) * spatial;
      for (std::size_t s = 0; s < spatial; ++s) sum += xs[s];
    }
    const double mean = sum / count;

    double ssq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double* xs = x.data.data() + (i * channels_ + c) * spatial;
      for (std::size_t s = 0; s < spatial; ++s) {
        const double d = xs[s] - mean;
        ssq += d * d;
      }
    }
    const double var = ssq / count;
    const double istd = 1.0 / std::sqrt(var + eps_);
    cached_istd_[c] = istd;

    const double g = gamma_.value.data[c];
    const double b = beta_.value.data[c];
    for (std::size_t i = 0; i < n; ++i) {
      const double* xs = x.data.data() + (i * channels_ + c) * spatial;
      double* xh = cached_xhat_.data.data() + (i * channels_ + c) * spatial;
      double* ys = y.data.data() + (i * channels_ + c) * spatial;
      for (std::size_t s = 0; s < spatial; ++s) {
        xh[s] = (xs[s] - mean) * istd;
        ys[s] = g * xh[s] + b;
      }
    }

    running_mean_.value.data[c] =
        momentum_ * running_mean_.value.data[c] + (1.0 - momentum_) * mean;
    running_var_.value.data[c] =
        momentum_ * running_var_.value.data[c] + (1.0 - momentum_) * var;
  }

  has_train_cache_ = true;
  return y;
}

Tensor BatchNorm::backward(const Tensor& grad_out) {
  if (!has_train_cache_)
    throw state_error(name_ +
                      ": backward requires a preceding training-mode forward");
  require_shape(grad_out, cached_xhat_.shape, name_, "gradient");

  const std::size_t n = cached_xhat_.axis(0);
  const std::size_t spatial = cached_xhat_.sample_size() / channels_;
  const double count = static_cast<double>(n * spatial);
  Tensor gx(cached_xhat_.shape);

  for (std::size_t c = 0; c < channels_; ++c) {
    double sum_gy = 0.0;
    double sum_gy_xhat = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double* gy = grad_out.data.data() + (i * channels_ + c) * spatial;
      const double* xh =
          cached_xhat_.data.data() + (i * channels_ + c) * spatial;
      for (std::size_t s = 0; s < spatial; ++s) {
        sum_gy += gy[s];
        sum_gy_xhat += gy[s] * xh[s];
      }
    }
    gamma_.grad.data[c] += sum_gy_xhat;
    beta_.grad.data[c] += sum_gy;

    const double scale = gamma_.value.data[c] * cached_istd_[c] / count;
    for (std::size_t i = 0; i < n; ++i) {
      const double* gy = grad_out.data.data() + (i * channels_ + c) * spatial;
      const double* xh =
          cached_xhat_.data.data() + (i * channels_ + c) * spatial;
      double* g = gx.data.data() + (i * channels_ + c) * spatial;
      for (std::size_t s = 0; s < spatial; ++s)
        g[s] = scale * (count * gy[s] - sum_gy - xh[s] * sum_gy_xhat);
    }
  }
  return gx;
}

// ---------------------------------------------------------------------------
// Dropout

Dropout::Dropout(std::string name, double rate)
    : Layer(std::move(name)), rate_(rate) {
  if (!(rate_ >= 0.0 && rate_ < 1.0))
    throw config_error(name_ + ": dropout rate must be in [0,1), got " +
                       std::to_string(rate_));
}

Tensor Dropout::forward(const Tensor& x, Mode mode, Rng* rng) {
  if (mode == Mode::kEval || rate_ == 0.0) {
    identity_pass_ = true;
    has_cache_ = true;
    return x;
  }
  if (rng == nullptr)
    throw config_error(name_ + ": training mode requires an rng");

  identity_pass_ = false;
  has_cache_ = true;
  mask_ = Tensor(x.shape);
  const double scale = 1.0 / (1.0 - rate_);
  Tensor y(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) {
    mask_.data[i] = rng->uniform() < rate_ ? 0.0 : scale;
    y.data[i] = x.data[i] * mask_.data[i];
  }
  return y;
}

Tensor Dropout::backward(const Tensor& grad_out) {
  if (!has_cache_) throw state_error(name_ + ": backward before forward");
  if (identity_pass_) return grad_out;
  require_shape(grad_out, mask_.shape, name_, "gradient");
  Tensor gx(mask_.shape);
  for (std::size_t i = 0; i < gx.size(); ++i)
    gx.data[i] = grad_out.data[i] * mask_.data[i];
  return gx;
}

// ---------------------------------------------------------------------------
// Flatten

Tensor Flatten::forward(const Tensor& x, Mode, Rng*) {
  if (x.rank() < 2)
    throw config_error(name_ + ": input must have a batch axis plus content");
  cached_shape_ = x.shape;
  has_cache_ = true;
  Tensor y({x.axis(0), x.sample_size()});
  y.data = x.data;
  return y;
}

Tensor Flatten::backward(const Tensor& grad_out) {
  if (!has_cache_) throw state_error(name_ + ": backward before forward");
  const std::size_t flat = Tensor::shape_product(cached_shape_) /
                           cached_shape_[0];
  require_shape(grad_out, {cached_shape_[0], flat}, name_, "gradient");
  Tensor gx(cached_shape_);
  gx.data = grad_out.data;
  return gx;
}

// ---------------------------------------------------------------------------
// GlobalAvgPool

Tensor GlobalAvgPool::forward(const Tensor& x, Mode, Rng*) {
  if (x.rank() < 3)
    throw config_error(name_ +
                       ": input must be (batch, channels, spatial...), got " +
                       x.shape_str());
  cached_shape_ = x.shape;
  has_cache_ = true;
  const std::size_t n = x.axis(0);
  const std::size_t ch = x.axis(1);
  const std::size_t spatial = x.sample_size() / ch;
  Tensor y({n, ch});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < ch; ++c) {
      const double* xs = x.data.data() + (i * ch + c) * spatial;
      double s = 0.0;
      for (std::size_t k = 0; k < spatial; ++k) s += xs[k];
      y.data[i * ch + c] = s / static_cast<double>(spatial);
    }
  return y;
}

Tensor GlobalAvgPool::backward(const Tensor& grad_out) {
  if (!has_cache_) throw state_error(name_ + ": backward before forward");
  const std::size_t n = cached_shape_[0];
  const std::size_t ch = cached_shape_[1];
  require_shape(grad_out, {n, ch}, name_, "gradient");
  const std::size_t spatial =
      Tensor::shape_product(cached_shape_) / (n * ch);
  Tensor gx(cached_shape_);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < ch; ++c) {
      const double g = grad_out.data[i * ch + c] / static_cast<double>(spatial);
      double* gs = gx.data.data() + (i * ch + c) * spatial;
      for (std::size_t k = 0; k < spatial; ++k) gs[k] = g;
    }
  return gx;
}

// ---------------------------------------------------------------------------

void fill_uniform(Tensor& t, Rng& rng, double bound) {
  for (double& v : t.data) v = (rng.uniform() * 2.0 - 1.0) * bound;
}

}  // namespace voxstate::nn
