#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ovi/common.hpp"

namespace ovi::nn {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<RowMat>;
using ConstMapRM = Eigen::Map<const RowMat>;

// Dense row-major tensor of 64-bit floats.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<std::size_t> s, std::vector<double> d)
      : shape(std::move(s)), data(std::move(d)) {
    require(numel_of(shape) == data.size(), "tensor shape/data mismatch");
  }

  static std::size_t numel_of(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
  }
  static Tensor zeros(std::vector<std::size_t> s) {
    auto n = numel_of(s);
    return Tensor(std::move(s), std::vector<double>(n, 0.0));
  }
  std::size_t numel() const { return data.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }

  void check_finite(std::string_view where) const {
    ensure_finite(data, where);
  }
};

inline double relu(double x) { return x > 0.0 ? x : 0.0; }
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

enum class Activation { kReLU, kIdentity };

// ---------------------------------------------------------------------------
// Parameters and Adam
// ---------------------------------------------------------------------------

struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor m;  // first Adam moment
  Tensor v;  // second Adam moment

  explicit Param(std::string n, std::vector<std::size_t> shape)
      : name(std::move(n)),
        value(Tensor::zeros(shape)),
        grad(Tensor::zeros(shape)),
        m(Tensor::zeros(shape)),
        v(Tensor::zeros(shape)) {}
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Named parameters with their moment accumulators and the shared step count.
struct ParameterStore {
  std::vector<Param*> params;
  std::int64_t step = 0;
};

inline void zero_grad(ParameterStore& store) {
  for (Param* p : store.params) {
    std::fill(p->grad.data.begin(), p->grad.data.end(), 0.0);
  }
}

inline void check_grads_finite(const ParameterStore& store) {
  for (const Param* p : store.params) {
    for (double g : p->grad.data) {
      if (!std::isfinite(g)) {
        throw NumericError("non-finite gradient in parameter '" + p->name + "'");
      }
    }
  }
}

// Standard bias-corrected Adam update over all parameters in the store.
inline void adam_step(ParameterStore& store, double lr,
                      const AdamConfig& cfg = {}) {
  ++store.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(store.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(store.step));
  for (Param* p : store.params) {
    double* w = p->value.data.data();
    const double* g = p->grad.data.data();
    double* m = p->m.data.data();
    double* v = p->v.data.data();
    const std::size_t n = p->value.numel();
    for (std::size_t i = 0; i < n; ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

// ---------------------------------------------------------------------------
// Layers. All layer inputs are [B, T, F]; the head reduces to scores [B].
// Forward passes record what backward needs; backward accumulates parameter
// gradients and returns the input gradient.
// ---------------------------------------------------------------------------

class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor forward(const Tensor& x) = 0;
  virtual Tensor backward(const Tensor& grad_out) = 0;
  virtual void collect_params(std::vector<Param*>& out) = 0;
};

// Causal 1-D convolution over time with left zero padding of s-1, so output
// position t depends only on input positions <= t. Filter row m holds the
// window weights ordered oldest-to-newest: element m*(s*k_in) + j*k_in + i
// multiplies input feature i at offset t-s+1+j. s=1 is the per-instant
// (pointwise) convolution used by the feature mapping layer.
class CausalConv : public Layer {
 public:
  CausalConv(std::string name, std::size_t k_in, std::size_t k_out,
             std::size_t s, Activation act)
      : k_in_(k_in),
        k_out_(k_out),
        s_(s),
        act_(act),
        weight_(name + ".weight", {k_out, s * k_in}),
        bias_(name + ".bias", {k_out}) {
    require(s >= 1 && k_in >= 1 && k_out >= 1, "bad convolution shape");
  }

  Tensor forward(const Tensor& x) override {
    require(x.shape.size() == 3 && x.dim(2) == k_in_,
            "convolution input must be [B, T, k_in]");
    batch_ = x.dim(0);
    steps_ = x.dim(1);
    im2col(x);
    const auto rows = static_cast<Eigen::Index>(batch_ * steps_);
    Tensor y = Tensor::zeros({batch_, steps_, k_out_});
    MapRM ym(y.data.data(), rows, static_cast<Eigen::Index>(k_out_));
    ConstMapRM zm(cols_.data(), rows, static_cast<Eigen::Index>(s_ * k_in_));
    ConstMapRM wm(weight_.value.data.data(), static_cast<Eigen::Index>(k_out_),
                  static_cast<Eigen::Index>(s_ * k_in_));
    ym.noalias() = zm * wm.transpose();
    const double* b = bias_.value.data.data();
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < k_out_; ++c) ym(r, static_cast<Eigen::Index>(c)) += b[c];
    }
    if (act_ == Activation::kReLU) {
      for (double& v : y.data) v = relu(v);
    }
    y.check_finite(weight_.name + " forward");
    out_ = y;  // keep activation for the ReLU mask
    return y;
  }

  Tensor backward(const Tensor& grad_out) override {
    require(grad_out.shape.size() == 3 && grad_out.dim(0) == batch_ &&
                grad_out.dim(1) == steps_ && grad_out.dim(2) == k_out_,
            "convolution grad shape mismatch");
    const auto rows = static_cast<Eigen::Index>(batch_ * steps_);
    Tensor dpre = grad_out;
    if (act_ == Activation::kReLU) {
      for (std::size_t i = 0; i < dpre.data.size(); ++i) {
        if (out_.data[i] <= 0.0) dpre.data[i] = 0.0;
      }
    }
    ConstMapRM dm(dpre.data.data(), rows, static_cast<Eigen::Index>(k_out_));
    ConstMapRM zm(cols_.data(), rows, static_cast<Eigen::Index>(s_ * k_in_));
    MapRM gw(weight_.grad.data.data(), static_cast<Eigen::Index>(k_out_),
             static_cast<Eigen::Index>(s_ * k_in_));
    gw.noalias() += dm.transpose() * zm;
    double* gb = bias_.grad.data.data();
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < k_out_; ++c) gb[c] += dm(r, static_cast<Eigen::Index>(c));
    }
    // Input gradient via the transposed convolution (col2im scatter).
    dcols_.assign(cols_.size(), 0.0);
    MapRM dzm(dcols_.data(), rows, static_cast<Eigen::Index>(s_ * k_in_));
    ConstMapRM wm(weight_.value.data.data(), static_cast<Eigen::Index>(k_out_),
                  static_cast<Eigen::Index>(s_ * k_in_));
    dzm.noalias() = dm * wm;
    Tensor dx = Tensor::zeros({batch_, steps_, k_in_});
    for (std::size_t b = 0; b < batch_; ++b) {
      for (std::size_t t = 0; t < steps_; ++t) {
        const double* src = dcols_.data() + ((b * steps_ + t) * s_) * k_in_;
        for (std::size_t j = 0; j < s_; ++j) {
          const std::ptrdiff_t tsrc = static_cast<std::ptrdiff_t>(t + j) -
                                      static_cast<std::ptrdiff_t>(s_ - 1);
          if (tsrc < 0) continue;
          double* dst = dx.data.data() +
                        (b * steps_ + static_cast<std::size_t>(tsrc)) * k_in_;
          const double* s_ptr = src + j * k_in_;
          for (std::size_t i = 0; i < k_in_; ++i) dst[i] += s_ptr[i];
        }
      }
    }
    dx.check_finite(weight_.name + " backward");
    return dx;
  }

  void collect_params(std::vector<Param*>& out) override {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }

  Param& weight() { return weight_; }
  Param& bias() { return bias_; }

 private:
  void im2col(const Tensor& x) {
    cols_.assign(batch_ * steps_ * s_ * k_in_, 0.0);
    for (std::size_t b = 0; b < batch_; ++b) {
      const double* xb = x.data.data() + b * steps_ * k_in_;
      for (std::size_t t = 0; t < steps_; ++t) {
        double* row = cols_.data() + ((b * steps_ + t) * s_) * k_in_;
        for (std::size_t j = 0; j < s_; ++j) {
          const std::ptrdiff_t tsrc = static_cast<std::ptrdiff_t>(t + j) -
                                      static_cast<std::ptrdiff_t>(s_ - 1);
          if (tsrc < 0) continue;
          const double* src = xb + static_cast<std::size_t>(tsrc) * k_in_;
          std::copy(src, src + k_in_, row + j * k_in_);
        }
      }
    }
  }

  std::size_t k_in_, k_out_, s_;
  Activation act_;
  Param weight_, bias_;
  std::size_t batch_ = 0, steps_ = 0;
  std::vector<double> cols_, dcols_;
  Tensor out_;
};

// [B, T, F] -> [B, 1, T*F]; pure reshape, the row-major buffer is unchanged.
class Flatten : public Layer {
 public:
  Tensor forward(const Tensor& x) override {
    require(x.shape.size() == 3, "flatten input must be [B, T, F]");
    in_shape_ = x.shape;
    Tensor y = x;
    y.shape = {x.dim(0), 1, x.dim(1) * x.dim(2)};
    return y;
  }
  Tensor backward(const Tensor& grad_out) override {
    Tensor g = grad_out;
    g.shape = in_shape_;
    return g;
  }
  void collect_params(std::vector<Param*>&) override {}

 private:
  std::vector<std::size_t> in_shape_;
};

// Fully connected sigmoid head applied to the last time-step feature vector:
// score_b = sigmoid(w . x[b, T-1, :] + bias). Backward expects the gradient
// with respect to the pre-sigmoid logit.
class SigmoidHead : public Layer {
 public:
  SigmoidHead(std::string name, std::size_t k)
      : k_(k), weight_(name + ".weight", {k}), bias_(name + ".bias", {1}) {}

  Tensor forward(const Tensor& x) override {
    require(x.shape.size() == 3 && x.dim(2) == k_, "head input must be [B, T, k]");
    batch_ = x.dim(0);
    steps_ = x.dim(1);
    last_rows_.assign(batch_ * k_, 0.0);
    for (std::size_t b = 0; b < batch_; ++b) {
      const double* src = x.data.data() + (b * steps_ + (steps_ - 1)) * k_;
      std::copy(src, src + k_, last_rows_.data() + b * k_);
    }
    Tensor scores = Tensor::zeros({batch_});
    const double* w = weight_.value.data.data();
    for (std::size_t b = 0; b < batch_; ++b) {
      const double* y = last_rows_.data() + b * k_;
      double z = bias_.value.data[0];
      for (std::size_t i = 0; i < k_; ++i) z += w[i] * y[i];
      scores.data[b] = sigmoid(z);
    }
    scores.check_finite(weight_.name + " forward");
    return scores;
  }

  // grad_out holds dL/dlogit per sample.
  Tensor backward(const Tensor& grad_out) override {
    require(grad_out.shape.size() == 1 && grad_out.dim(0) == batch_,
            "head grad must be [B]");
    double* gw = weight_.grad.data.data();
    double gb = 0.0;
    Tensor dx = Tensor::zeros({batch_, steps_, k_});
    const double* w = weight_.value.data.data();
    for (std::size_t b = 0; b < batch_; ++b) {
      const double g = grad_out.data[b];
      const double* y = last_rows_.data() + b * k_;
      double* dlast = dx.data.data() + (b * steps_ + (steps_ - 1)) * k_;
      for (std::size_t i = 0; i < k_; ++i) {
        gw[i] += g * y[i];
        dlast[i] = g * w[i];
      }
      gb += g;
    }
    bias_.grad.data[0] += gb;
    dx.check_finite(weight_.name + " backward");
    return dx;
  }

  void collect_params(std::vector<Param*>& out) override {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }

  Param& weight() { return weight_; }
  Param& bias() { return bias_; }

 private:
  std::size_t k_;
  Param weight_, bias_;
  std::size_t batch_ = 0, steps_ = 0;
  std::vector<double> last_rows_;
};

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

inline constexpr double kBceClamp = 1e-12;

// Mean binary cross entropy with scores clamped to [eps, 1-eps].
inline double bce_loss(std::span<const double> scores,
                       std::span<const double> targets) {
  require(scores.size() == targets.size() && !scores.empty(),
          "bce needs matching nonempty inputs");
  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double p = std::clamp(scores[i], kBceClamp, 1.0 - kBceClamp);
    sum += -(targets[i] * std::log(p) + (1.0 - targets[i]) * std::log(1.0 - p));
  }
  const double loss = sum / static_cast<double>(scores.size());
  if (!std::isfinite(loss)) throw NumericError("non-finite loss");
  return loss;
}

// dL/dlogit for the fused sigmoid + BCE path: (p - target) / batch, with zero
// flow where the clamp was active.
inline void bce_logit_grad(std::span<const double> scores,
                           std::span<const double> targets,
                           std::span<double> out) {
  const double inv = 1.0 / static_cast<double>(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool clamped =
        scores[i] < kBceClamp || scores[i] > 1.0 - kBceClamp;
    out[i] = clamped ? 0.0 : (scores[i] - targets[i]) * inv;
  }
}

// ---------------------------------------------------------------------------
// Network: an ordered layer stack with fused sigmoid/BCE training step
// ---------------------------------------------------------------------------

class Network {
 public:
  Network() = default;

  void add(std::unique_ptr<Layer> layer) {
    layers_.push_back(std::move(layer));
    store_.params.clear();
    for (auto& l : layers_) l->collect_params(store_.params);
  }

  Tensor forward(const Tensor& x) {
    Tensor cur = x;
    for (auto& l : layers_) cur = l->forward(cur);
    return cur;
  }

  // Forward, BCE, reverse sweep. Returns the batch loss; parameter gradients
  // are freshly accumulated (previous gradients are cleared).
  double train_step(const Tensor& x, std::span<const double> targets) {
    const Tensor scores = forward(x);
    require(scores.shape.size() == 1 && scores.dim(0) == targets.size(),
            "network must end in a score head");
    const double loss = bce_loss(scores.data, targets);
    zero_grad(store_);
    Tensor g = Tensor::zeros({scores.dim(0)});
    bce_logit_grad(scores.data, targets, g.data);
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
      g = (*it)->backward(g);
    }
    check_grads_finite(store_);
    return loss;
  }

  ParameterStore& store() { return store_; }
  const std::vector<Param*>& params() const { return store_.params; }

  std::vector<Tensor> snapshot() const {
    std::vector<Tensor> out;
    out.reserve(store_.params.size());
    for (const Param* p : store_.params) out.push_back(p->value);
    return out;
  }
  void restore(const std::vector<Tensor>& snap) {
    require(snap.size() == store_.params.size(), "snapshot size mismatch");
    for (std::size_t i = 0; i < snap.size(); ++i) {
      require(snap[i].shape == store_.params[i]->value.shape,
              "snapshot shape mismatch");
      store_.params[i]->value = snap[i];
    }
  }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
  ParameterStore store_;
};

// He-style uniform fan-in initialization, deterministic in the seed. Biases
// start at zero.
inline void init_params(Network& net, std::uint64_t seed) {
  Rng rng(seed);
  for (Param* p : net.store().params) {
    if (p->value.shape.size() < 2) {
      std::fill(p->value.data.begin(), p->value.data.end(), 0.0);
      continue;
    }
    const double fan_in = static_cast<double>(p->value.shape.back());
    const double limit = std::sqrt(6.0 / fan_in);
    std::uniform_real_distribution<double> uni(-limit, limit);
    for (double& w : p->value.data) w = uni(rng);
  }
}

// ---------------------------------------------------------------------------
// Spec-level single-sample operations (thin wrappers over the layers)
// ---------------------------------------------------------------------------

// Per-instant affine map + ReLU lifting an l x n sequence into l x k feature
// space. filters: k x n, biases: k.
inline Tensor conv1d_pointwise(const Tensor& x, const Tensor& filters,
                               const Tensor& biases) {
  require(x.shape.size() == 2, "input must be l x n");
  require(filters.shape.size() == 2 && filters.dim(1) == x.dim(1),
          "filters must be k x n");
  require(biases.shape.size() == 1 && biases.dim(0) == filters.dim(0),
          "biases must be k");
  CausalConv conv("op", x.dim(1), filters.dim(0), 1, Activation::kReLU);
  conv.weight().value = filters;
  conv.bias().value = biases;
  Tensor batched({1, x.dim(0), x.dim(1)}, x.data);
  Tensor y = conv.forward(batched);
  return Tensor({x.dim(0), filters.dim(0)}, std::move(y.data));
}

// Length-preserving causal convolution. filters: k_out x (s*k_in), window
// weights ordered oldest-to-newest.
inline Tensor conv1d_causal(const Tensor& x, const Tensor& filters,
                            const Tensor& biases, std::size_t s,
                            Activation act = Activation::kReLU) {
  require(x.shape.size() == 2, "input must be l x k");
  require(filters.shape.size() == 2 && filters.dim(1) == s * x.dim(1),
          "filters must be k_out x (s*k_in)");
  require(biases.shape.size() == 1 && biases.dim(0) == filters.dim(0),
          "biases must be k_out");
  CausalConv conv("op", x.dim(1), filters.dim(0), s, act);
  conv.weight().value = filters;
  conv.bias().value = biases;
  Tensor batched({1, x.dim(0), x.dim(1)}, x.data);
  Tensor y = conv.forward(batched);
  return Tensor({x.dim(0), filters.dim(0)}, std::move(y.data));
}

inline double dense_sigmoid(std::span<const double> y,
                            std::span<const double> w, double b) {
  require(y.size() == w.size() && !y.empty(), "dense shape mismatch");
  double z = b;
  for (std::size_t i = 0; i < y.size(); ++i) z += w[i] * y[i];
  return sigmoid(z);
}

}  // namespace ovi::nn
