#pragma once

// Small dense networks with hand-written backward passes.
// Samples are stored column-wise: a batch is a (features x batch) matrix.

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "vaoi/error.hpp"

namespace vaoi {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

enum class Activation { kIdentity, kMish, kTanh };

// With e = exp(x) and n = e (e + 2): tanh(softplus(x)) = n / (n + 2).
// Beyond x = 20 the ratio is 1 to double precision, so x is clamped there.
inline double mish(double x) {
  const double e = std::exp(std::min(x, 20.0));
  const double n = e * (e + 2.0);
  return x * n / (n + 2.0);
}

inline double mish_grad(double x) {
  const double e = std::exp(std::min(x, 20.0));
  const double n = e * (e + 2.0);
  const double t = n / (n + 2.0);
  const double one_minus_t = 2.0 / (n + 2.0);
  return t + x * one_minus_t * (1.0 + t) * e / (1.0 + e);
}

inline Mat activate(const Mat& z, Activation a) {
  switch (a) {
    case Activation::kMish: {
      const auto e = z.array().min(20.0).exp();
      const Eigen::ArrayXXd n = e * (e + 2.0);
      return (z.array() * n / (n + 2.0)).matrix();
    }
    case Activation::kTanh: return z.array().tanh().matrix();
    case Activation::kIdentity: break;
  }
  return z;
}

/// Elementwise d(activation)/dz, given pre-activation z and output y.
inline Mat activation_grad(const Mat& z, const Mat& y, Activation a) {
  switch (a) {
    case Activation::kMish: {
      const Eigen::ArrayXXd e = z.array().min(20.0).exp();
      const Eigen::ArrayXXd n = e * (e + 2.0);
      const Eigen::ArrayXXd t = n / (n + 2.0);
      return (t + z.array() * (2.0 / (n + 2.0)) * (1.0 + t) * e / (1.0 + e)).matrix();
    }
    case Activation::kTanh: return (1.0 - y.array().square()).matrix();
    case Activation::kIdentity: break;
  }
  return Mat::Ones(z.rows(), z.cols());
}

struct NamedParam {
  std::string name;
  Mat* value;
};
using ParamRefs = std::vector<NamedParam>;

inline Eigen::Index param_count(const ParamRefs& params) {
  Eigen::Index n = 0;
  for (const auto& p : params) n += p.value->size();
  return n;
}

inline Vec flatten(const ParamRefs& params) {
  Vec out(param_count(params));
  Eigen::Index off = 0;
  for (const auto& p : params) {
    out.segment(off, p.value->size()) = p.value->reshaped();
    off += p.value->size();
  }
  return out;
}

inline void assign(const ParamRefs& params, const Vec& flat) {
  if (flat.size() != param_count(params)) throw ArgumentError("flat parameter size mismatch");
  Eigen::Index off = 0;
  for (const auto& p : params) {
    p.value->reshaped() = flat.segment(off, p.value->size());
    off += p.value->size();
  }
}

inline void zero(const ParamRefs& params) {
  for (const auto& p : params) p.value->setZero();
}

inline double squared_norm(const ParamRefs& params) {
  double s = 0.0;
  for (const auto& p : params) s += p.value->squaredNorm();
  return s;
}

/// target <- zeta * online + (1 - zeta) * target
inline void soft_update(const ParamRefs& target, const ParamRefs& online, double zeta) {
  if (target.size() != online.size()) throw ArgumentError("soft_update: parameter list mismatch");
  for (std::size_t i = 0; i < target.size(); ++i)
    *target[i].value = zeta * *online[i].value + (1.0 - zeta) * *target[i].value;
}

struct LayerSpec {
  int units;
  Activation activation;
};

class Mlp {
 public:
  struct Cache {
    std::vector<Mat> inputs;  // input to each layer
    std::vector<Mat> pre;     // pre-activations
    std::vector<Mat> post;    // outputs
  };

  Mlp() = default;

  /// PyTorch-style uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialisation.
  Mlp(int in_dim, const std::vector<LayerSpec>& layers, std::mt19937_64& rng) : in_dim_(in_dim) {
    int fan_in = in_dim;
    for (const auto& l : layers) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      std::uniform_real_distribution<double> u(-bound, bound);
      Mat w(l.units, fan_in);
      for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = u(rng);
      Mat b(l.units, 1);
      for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = u(rng);
      weights_.push_back(std::move(w));
      biases_.push_back(std::move(b));
      activations_.push_back(l.activation);
      fan_in = l.units;
    }
  }

  int in_dim() const { return in_dim_; }
  int out_dim() const { return weights_.empty() ? in_dim_ : static_cast<int>(weights_.back().rows()); }
  std::size_t depth() const { return weights_.size(); }

  Mat forward(const Mat& x) const {
    Mat h = x;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      Mat z = weights_[i] * h;
      z.colwise() += biases_[i].col(0);
      h = activate(z, activations_[i]);
    }
    return h;
  }

  Mat forward(const Mat& x, Cache& cache) const {
    cache.inputs.clear();
    cache.pre.clear();
    cache.post.clear();
    Mat h = x;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      cache.inputs.push_back(h);
      Mat z = weights_[i] * h;
      z.colwise() += biases_[i].col(0);
      h = activate(z, activations_[i]);
      cache.pre.push_back(z);
      cache.post.push_back(h);
    }
    return h;
  }

  /// Accumulates parameter gradients into `grads` (same shape as *this) and
  /// returns the gradient with respect to the input.
  Mat backward(const Cache& cache, const Mat& grad_out, Mlp& grads) const {
    Mat g = grad_out;
    for (std::size_t i = weights_.size(); i-- > 0;) {
      g = (g.array() * activation_grad(cache.pre[i], cache.post[i], activations_[i]).array())
              .matrix();
      grads.weights_[i].noalias() += g * cache.inputs[i].transpose();
      grads.biases_[i] += g.rowwise().sum();
      g = weights_[i].transpose() * g;
    }
    return g;
  }

  /// A network of the same shape with all parameters zero.
  Mlp zeros_like() const {
    Mlp z = *this;
    for (auto& w : z.weights_) w.setZero();
    for (auto& b : z.biases_) b.setZero();
    return z;
  }

  ParamRefs params(const std::string& prefix) {
    ParamRefs out;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      out.push_back({prefix + "." + std::to_string(i) + ".weight", &weights_[i]});
      out.push_back({prefix + "." + std::to_string(i) + ".bias", &biases_[i]});
    }
    return out;
  }

 private:
  int in_dim_ = 0;
  std::vector<Mat> weights_;
  std::vector<Mat> biases_;
  std::vector<Activation> activations_;
};

/// Hidden Mish layers followed by an output layer with the given activation.
inline std::vector<LayerSpec> mish_stack(const std::vector<int>& hidden, int out,
                                         Activation out_act = Activation::kIdentity) {
  std::vector<LayerSpec> layers;
  for (int h : hidden) layers.push_back({h, Activation::kMish});
  layers.push_back({out, out_act});
  return layers;
}

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 10.0;  // <= 0 disables clipping
};

class Adam {
 public:
  Adam() = default;
  Adam(const ParamRefs& params, AdamConfig cfg) : cfg_(cfg) {
    for (const auto& p : params) {
      m_.push_back(Mat::Zero(p.value->rows(), p.value->cols()));
      v_.push_back(Mat::Zero(p.value->rows(), p.value->cols()));
    }
  }

  const AdamConfig& config() const { return cfg_; }
  long steps() const { return t_; }

  /// Applies one update; gradients are clipped by global norm first.
  /// Returns the pre-clipping gradient norm.
  double step(const ParamRefs& params, const ParamRefs& grads) {
    if (params.size() != m_.size() || grads.size() != m_.size())
      throw ArgumentError("Adam: parameter list mismatch");
    const double norm = std::sqrt(squared_norm(grads));
    const double scale = (cfg_.clip_norm > 0.0 && norm > cfg_.clip_norm) ? cfg_.clip_norm / norm : 1.0;
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      const Mat g = scale * *grads[i].value;
      m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
      v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
      *params[i].value -= (cfg_.lr * (m_[i].array() / bc1) /
                           ((v_[i].array() / bc2).sqrt() + cfg_.eps))
                              .matrix();
    }
    return norm;
  }

 private:
  AdamConfig cfg_;
  std::vector<Mat> m_;
  std::vector<Mat> v_;
  long t_ = 0;
};

/// Sinusoidal positional embedding of a scalar step index (sin half, cos half).
inline Vec sinusoidal_embedding(double position, int dim) {
  if (dim < 2 || dim % 2 != 0) throw ArgumentError("embedding dim must be even and >= 2");
  const int half = dim / 2;
  const double scale = half > 1 ? std::log(10000.0) / (half - 1) : 0.0;
  Vec e(dim);
  for (int i = 0; i < half; ++i) {
    const double f = std::exp(-scale * i);
    e(i) = std::sin(position * f);
    e(half + i) = std::cos(position * f);
  }
  return e;
}

/// Row-wise (per column) softmax of logits.
inline Mat softmax_columns(const Mat& logits) {
  Mat out(logits.rows(), logits.cols());
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    const double mx = logits.col(c).maxCoeff();
    Vec e = (logits.col(c).array() - mx).exp().matrix();
    out.col(c) = e / e.sum();
  }
  return out;
}

}  // namespace vaoi
