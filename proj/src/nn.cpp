#include "fireml/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "detail_util.hpp"
#include "fireml/kernels.hpp"

namespace fireml::nn {

Tensor::Tensor(std::vector<int> s) : shape(std::move(s)) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 1) throw std::invalid_argument("tensor dimension must be >= 1");
    n *= static_cast<std::size_t>(d);
  }
  v.assign(n, 0.0);
}

std::size_t shape_size(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

std::string shape_to_string(const std::vector<int>& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

std::string Layer::describe() const { return kind(); }

void Layer::zero_grads() {
  auto g = grads();
  std::fill(g.begin(), g.end(), 0.0);
}

namespace {

std::vector<int> batch_shape(int batch, const std::vector<int>& per_sample) {
  std::vector<int> s{batch};
  s.insert(s.end(), per_sample.begin(), per_sample.end());
  return s;
}

void check_rank(const Tensor& t, int rank, const std::string& layer) {
  if (t.rank() != rank)
    throw std::invalid_argument(layer + ": expected rank-" + std::to_string(rank) +
                                " input, got " + shape_to_string(t.shape));
}

// ---- conv2d ----
// Parameter block layout: out_c*in_c*k*k weights, then out_c biases.

class Conv2d : public Layer {
 public:
  Conv2d(int in_c, int out_c, int k, Padding pad)
      : in_c_(in_c), out_c_(out_c), k_(k), pad_(pad) {
    if (in_c < 1 || out_c < 1 || k < 1) throw std::invalid_argument("conv2d: bad dimensions");
    if (pad == Padding::Same && k % 2 == 0)
      throw std::invalid_argument("conv2d: same padding requires an odd kernel");
    const std::size_t wn = static_cast<std::size_t>(out_c) * in_c * k * k;
    params_.assign(wn + out_c, 0.0);
    grads_.assign(params_.size(), 0.0);
  }

  std::string kind() const override { return "conv2d"; }

  std::string describe() const override {
    return "conv2d " + std::to_string(in_c_) + " " + std::to_string(out_c_) + " " +
           std::to_string(k_) + " " + (pad_ == Padding::Same ? "same" : "valid");
  }

  std::vector<int> out_shape(const std::vector<int>& in) const override {
    if (in.size() != 3 || in[0] != in_c_)
      throw std::invalid_argument("conv2d: input shape " + shape_to_string(in) +
                                  " does not match " + std::to_string(in_c_) + " channels");
    const int p = padding();
    const int oh = in[1] + 2 * p - k_ + 1;
    const int ow = in[2] + 2 * p - k_ + 1;
    if (oh < 1 || ow < 1)
      throw std::invalid_argument("conv2d: input " + shape_to_string(in) + " too small for " +
                                  std::to_string(k_) + "x" + std::to_string(k_) + " kernel");
    return {out_c_, oh, ow};
  }

  Tensor forward(const Tensor& in, bool, std::mt19937_64&) override {
    check_rank(in, 4, "conv2d");
    const int batch = in.dim(0);
    const auto os = out_shape({in.dim(1), in.dim(2), in.dim(3)});
    const int height = in.dim(2), width = in.dim(3);
    const int oh = os[1], ow = os[2];
    const int p = padding();
    const double* w = params_.data();
    const double* bias = params_.data() + weight_count();

    Tensor out(batch_shape(batch, os));
    const std::size_t in_plane = static_cast<std::size_t>(height) * width;
    const std::size_t out_plane = static_cast<std::size_t>(oh) * ow;

    for (int bi = 0; bi < batch; ++bi) {
      for (int oc = 0; oc < out_c_; ++oc) {
        double* out_base = out.v.data() + (static_cast<std::size_t>(bi) * out_c_ + oc) * out_plane;
        std::fill(out_base, out_base + out_plane, bias[oc]);
        for (int ic = 0; ic < in_c_; ++ic) {
          const double* in_base =
              in.v.data() + (static_cast<std::size_t>(bi) * in_c_ + ic) * in_plane;
          for (int ki = 0; ki < k_; ++ki) {
            const int oi_lo = std::max(0, p - ki);
            const int oi_hi = std::min(oh, height + p - ki);
            for (int kj = 0; kj < k_; ++kj) {
              const double wv =
                  w[((static_cast<std::size_t>(oc) * in_c_ + ic) * k_ + ki) * k_ + kj];
              const int oj_lo = std::max(0, p - kj);
              const int oj_hi = std::min(ow, width + p - kj);
              if (oj_hi <= oj_lo) continue;
              for (int oi = oi_lo; oi < oi_hi; ++oi) {
                const double* in_row = in_base + static_cast<std::size_t>(oi + ki - p) * width +
                                       (oj_lo + kj - p);
                kernels::axpy(wv, in_row, out_base + static_cast<std::size_t>(oi) * ow + oj_lo,
                              static_cast<std::size_t>(oj_hi - oj_lo));
              }
            }
          }
        }
      }
    }
    input_ = in;
    return out;
  }

  Tensor backward(const Tensor& grad_out) override {
    const Tensor& in = input_;
    if (in.v.empty()) throw std::logic_error("conv2d: backward without forward");
    const int batch = in.dim(0);
    const int height = in.dim(2), width = in.dim(3);
    const int oh = grad_out.dim(2), ow = grad_out.dim(3);
    const int p = padding();
    const double* w = params_.data();
    double* gw = grads_.data();
    double* gb = grads_.data() + weight_count();
    const std::size_t in_plane = static_cast<std::size_t>(height) * width;
    const std::size_t out_plane = static_cast<std::size_t>(oh) * ow;

    Tensor grad_in(in.shape);
    for (int bi = 0; bi < batch; ++bi) {
      for (int oc = 0; oc < out_c_; ++oc) {
        const double* go_base =
            grad_out.v.data() + (static_cast<std::size_t>(bi) * out_c_ + oc) * out_plane;
        gb[oc] += kernels::sum(go_base, out_plane);
        for (int ic = 0; ic < in_c_; ++ic) {
          const double* in_base =
              in.v.data() + (static_cast<std::size_t>(bi) * in_c_ + ic) * in_plane;
          double* gi_base =
              grad_in.v.data() + (static_cast<std::size_t>(bi) * in_c_ + ic) * in_plane;
          for (int ki = 0; ki < k_; ++ki) {
            const int oi_lo = std::max(0, p - ki);
            const int oi_hi = std::min(oh, height + p - ki);
            for (int kj = 0; kj < k_; ++kj) {
              const std::size_t widx =
                  ((static_cast<std::size_t>(oc) * in_c_ + ic) * k_ + ki) * k_ + kj;
              const double wv = w[widx];
              const int oj_lo = std::max(0, p - kj);
              const int oj_hi = std::min(ow, width + p - kj);
              if (oj_hi <= oj_lo) continue;
              const std::size_t len = static_cast<std::size_t>(oj_hi - oj_lo);
              double gw_acc = 0.0;
              for (int oi = oi_lo; oi < oi_hi; ++oi) {
                const std::size_t in_off =
                    static_cast<std::size_t>(oi + ki - p) * width + (oj_lo + kj - p);
                const double* go_row = go_base + static_cast<std::size_t>(oi) * ow + oj_lo;
                gw_acc += kernels::dot(go_row, in_base + in_off, len);
                kernels::axpy(wv, go_row, gi_base + in_off, len);
              }
              gw[widx] += gw_acc;
            }
          }
        }
      }
    }
    return grad_in;
  }

  std::span<double> params() override { return params_; }
  std::span<double> grads() override { return grads_; }

  void init_params(std::mt19937_64& rng) override {
    const double limit = std::sqrt(6.0 / (static_cast<double>(in_c_) * k_ * k_));
    for (std::size_t i = 0; i < weight_count(); ++i)
      params_[i] = detail::uniform(rng, -limit, limit);
    std::fill(params_.begin() + weight_count(), params_.end(), 0.0);
  }

 private:
  int padding() const { return pad_ == Padding::Same ? (k_ - 1) / 2 : 0; }
  std::size_t weight_count() const {
    return static_cast<std::size_t>(out_c_) * in_c_ * k_ * k_;
  }

  int in_c_, out_c_, k_;
  Padding pad_;
  std::vector<double> params_, grads_;
  Tensor input_;
};

// ---- max pooling ----

class MaxPool2d : public Layer {
 public:
  MaxPool2d(int window, bool ceil_mode) : window_(window), ceil_(ceil_mode) {
    if (window < 1) throw std::invalid_argument("maxpool2d: window must be >= 1");
  }

  std::string kind() const override { return "maxpool2d"; }

  std::string describe() const override {
    return "maxpool2d " + std::to_string(window_) + " " + (ceil_ ? "ceil" : "floor");
  }

  std::vector<int> out_shape(const std::vector<int>& in) const override {
    if (in.size() != 3)
      throw std::invalid_argument("maxpool2d: input shape " + shape_to_string(in) +
                                  " is not (C,H,W)");
    const int oh = pooled(in[1]);
    const int ow = pooled(in[2]);
    if (oh < 1 || ow < 1)
      throw std::invalid_argument("maxpool2d: input " + shape_to_string(in) + " too small");
    return {in[0], oh, ow};
  }

  Tensor forward(const Tensor& in, bool, std::mt19937_64&) override {
    check_rank(in, 4, "maxpool2d");
    const int batch = in.dim(0), channels = in.dim(1);
    const int height = in.dim(2), width = in.dim(3);
    const auto os = out_shape({channels, height, width});
    const int oh = os[1], ow = os[2];

    Tensor out(batch_shape(batch, os));
    argmax_.assign(out.size(), 0);
    in_shape_ = in.shape;

    const std::size_t planes = static_cast<std::size_t>(batch) * channels;
    const std::size_t in_plane = static_cast<std::size_t>(height) * width;
    const std::size_t out_plane = static_cast<std::size_t>(oh) * ow;
    for (std::size_t pl = 0; pl < planes; ++pl) {
      const double* src = in.v.data() + pl * in_plane;
      double* dst = out.v.data() + pl * out_plane;
      int* arg = argmax_.data() + pl * out_plane;
      for (int oi = 0; oi < oh; ++oi) {
        const int r0 = oi * window_;
        const int r1 = std::min(r0 + window_, height);
        for (int oj = 0; oj < ow; ++oj) {
          const int c0 = oj * window_;
          const int c1 = std::min(c0 + window_, width);
          int best = r0 * width + c0;
          double best_v = src[best];
          for (int r = r0; r < r1; ++r)
            for (int c = c0; c < c1; ++c) {
              const int flat = r * width + c;
              if (src[flat] > best_v) {
                best_v = src[flat];
                best = flat;
              }
            }
          dst[static_cast<std::size_t>(oi) * ow + oj] = best_v;
          arg[static_cast<std::size_t>(oi) * ow + oj] = best;
        }
      }
    }
    return out;
  }

  Tensor backward(const Tensor& grad_out) override {
    if (argmax_.empty()) throw std::logic_error("maxpool2d: backward without forward");
    Tensor grad_in(in_shape_);
    const std::size_t planes =
        static_cast<std::size_t>(in_shape_[0]) * static_cast<std::size_t>(in_shape_[1]);
    const std::size_t in_plane =
        static_cast<std::size_t>(in_shape_[2]) * static_cast<std::size_t>(in_shape_[3]);
    const std::size_t out_plane = grad_out.size() / planes;
    for (std::size_t pl = 0; pl < planes; ++pl) {
      const double* go = grad_out.v.data() + pl * out_plane;
      const int* arg = argmax_.data() + pl * out_plane;
      double* gi = grad_in.v.data() + pl * in_plane;
      for (std::size_t i = 0; i < out_plane; ++i) gi[arg[i]] += go[i];
    }
    return grad_in;
  }

 private:
  int pooled(int n) const {
    return ceil_ ? (n + window_ - 1) / window_ : n / window_;
  }

  int window_;
  bool ceil_;
  std::vector<int> argmax_;
  std::vector<int> in_shape_;
};

// ---- dense ----
// Parameter block layout: out*in weights (row per output unit), then biases.

class Dense : public Layer {
 public:
  Dense(int in_units, int out_units) : in_(in_units), out_(out_units) {
    if (in_units < 1 || out_units < 1) throw std::invalid_argument("dense: bad dimensions");
    params_.assign(static_cast<std::size_t>(in_) * out_ + out_, 0.0);
    grads_.assign(params_.size(), 0.0);
  }

  std::string kind() const override { return "dense"; }

  std::string describe() const override {
    return "dense " + std::to_string(in_) + " " + std::to_string(out_);
  }

  std::vector<int> out_shape(const std::vector<int>& in) const override {
    if (in.size() != 1 || in[0] != in_)
      throw std::invalid_argument("dense: input shape " + shape_to_string(in) +
                                  " does not match " + std::to_string(in_) + " units");
    return {out_};
  }

  Tensor forward(const Tensor& in, bool, std::mt19937_64&) override {
    check_rank(in, 2, "dense");
    if (in.dim(1) != in_)
      throw std::invalid_argument("dense: input width " + std::to_string(in.dim(1)) +
                                  " does not match " + std::to_string(in_) + " units");
    const int batch = in.dim(0);
    const double* w = params_.data();
    const double* bias = params_.data() + static_cast<std::size_t>(in_) * out_;

    Tensor out({batch, out_});
    for (int bi = 0; bi < batch; ++bi) {
      const double* x = in.v.data() + static_cast<std::size_t>(bi) * in_;
      double* y = out.v.data() + static_cast<std::size_t>(bi) * out_;
      for (int o = 0; o < out_; ++o)
        y[o] = bias[o] + kernels::dot(w + static_cast<std::size_t>(o) * in_, x,
                                      static_cast<std::size_t>(in_));
    }
    input_ = in;
    return out;
  }

  Tensor backward(const Tensor& grad_out) override {
    const Tensor& in = input_;
    if (in.v.empty()) throw std::logic_error("dense: backward without forward");
    const int batch = in.dim(0);
    const double* w = params_.data();
    double* gw = grads_.data();
    double* gb = grads_.data() + static_cast<std::size_t>(in_) * out_;

    Tensor grad_in(in.shape);
    for (int bi = 0; bi < batch; ++bi) {
      const double* x = in.v.data() + static_cast<std::size_t>(bi) * in_;
      const double* go = grad_out.v.data() + static_cast<std::size_t>(bi) * out_;
      double* gi = grad_in.v.data() + static_cast<std::size_t>(bi) * in_;
      for (int o = 0; o < out_; ++o) {
        const double g = go[o];
        if (g == 0.0) continue;
        gb[o] += g;
        kernels::axpy(g, x, gw + static_cast<std::size_t>(o) * in_,
                      static_cast<std::size_t>(in_));
        kernels::axpy(g, w + static_cast<std::size_t>(o) * in_, gi,
                      static_cast<std::size_t>(in_));
      }
    }
    return grad_in;
  }

  std::span<double> params() override { return params_; }
  std::span<double> grads() override { return grads_; }

  void init_params(std::mt19937_64& rng) override {
    const double limit = std::sqrt(6.0 / in_);
    const std::size_t wn = static_cast<std::size_t>(in_) * out_;
    for (std::size_t i = 0; i < wn; ++i) params_[i] = detail::uniform(rng, -limit, limit);
    std::fill(params_.begin() + wn, params_.end(), 0.0);
  }

 private:
  int in_, out_;
  std::vector<double> params_, grads_;
  Tensor input_;
};

// ---- activations ----

class LeakyRelu : public Layer {
 public:
  explicit LeakyRelu(double alpha) : alpha_(alpha) {
    // alpha 0 is plain ReLU
    if (alpha < 0.0 || alpha >= 1.0)
      throw std::invalid_argument("leaky_relu: alpha must be in [0,1)");
  }

  std::string kind() const override { return alpha_ == 0.0 ? "relu" : "leaky_relu"; }

  std::string describe() const override {
    if (alpha_ == 0.0) return "relu";
    return "leaky_relu " + detail::format_double(alpha_);
  }

  std::vector<int> out_shape(const std::vector<int>& in) const override { return in; }

  Tensor forward(const Tensor& in, bool, std::mt19937_64&) override {
    Tensor out(in.shape);
    for (std::size_t i = 0; i < in.size(); ++i)
      out.v[i] = in.v[i] > 0.0 ? in.v[i] : alpha_ * in.v[i];
    input_ = in;
    return out;
  }

  Tensor backward(const Tensor& grad_out) override {
    if (input_.v.empty()) throw std::logic_error("activation: backward without forward");
    Tensor grad_in(input_.shape);
    for (std::size_t i = 0; i < grad_out.size(); ++i)
      grad_in.v[i] = input_.v[i] > 0.0 ? grad_out.v[i] : alpha_ * grad_out.v[i];
    return grad_in;
  }

 private:
  double alpha_;
  Tensor input_;
};

// ---- dropout (inverted scaling) ----

class Dropout : public Layer {
 public:
  explicit Dropout(double rate) : rate_(rate) {
    if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout: rate must be in [0,1)");
  }

  std::string kind() const override { return "dropout"; }

  std::string describe() const override { return "dropout " + detail::format_double(rate_); }

  std::vector<int> out_shape(const std::vector<int>& in) const override { return in; }

  Tensor forward(const Tensor& in, bool training, std::mt19937_64& rng) override {
    if (!training) {
      scale_.clear();
      return in;
    }
    const double keep_scale = 1.0 / (1.0 - rate_);
    scale_.resize(in.size());
    Tensor out(in.shape);
    for (std::size_t i = 0; i < in.size(); ++i) {
      scale_[i] = detail::uniform01(rng) >= rate_ ? keep_scale : 0.0;
      out.v[i] = in.v[i] * scale_[i];
    }
    return out;
  }

  Tensor backward(const Tensor& grad_out) override {
    Tensor grad_in(grad_out.shape);
    if (scale_.empty()) {
      grad_in.v = grad_out.v;  // inference mode: identity
      return grad_in;
    }
    for (std::size_t i = 0; i < grad_out.size(); ++i)
      grad_in.v[i] = grad_out.v[i] * scale_[i];
    return grad_in;
  }

 private:
  double rate_;
  std::vector<double> scale_;
};

// ---- flatten ----

class Flatten : public Layer {
 public:
  std::string kind() const override { return "flatten"; }

  std::vector<int> out_shape(const std::vector<int>& in) const override {
    return {static_cast<int>(shape_size(in))};
  }

  Tensor forward(const Tensor& in, bool, std::mt19937_64&) override {
    in_shape_ = in.shape;
    Tensor out;
    out.shape = {in.dim(0), static_cast<int>(in.size() / in.dim(0))};
    out.v = in.v;
    return out;
  }

  Tensor backward(const Tensor& grad_out) override {
    if (in_shape_.empty()) throw std::logic_error("flatten: backward without forward");
    Tensor grad_in;
    grad_in.shape = in_shape_;
    grad_in.v = grad_out.v;
    return grad_in;
  }

 private:
  std::vector<int> in_shape_;
};

}  // namespace

std::unique_ptr<Layer> make_conv2d(int in_channels, int out_channels, int kernel,
                                   Padding padding) {
  return std::make_unique<Conv2d>(in_channels, out_channels, kernel, padding);
}
std::unique_ptr<Layer> make_maxpool2d(int window, bool ceil_mode) {
  return std::make_unique<MaxPool2d>(window, ceil_mode);
}
std::unique_ptr<Layer> make_dense(int in_units, int out_units) {
  return std::make_unique<Dense>(in_units, out_units);
}
std::unique_ptr<Layer> make_relu() { return std::make_unique<LeakyRelu>(0.0); }
std::unique_ptr<Layer> make_leaky_relu(double alpha) {
  return std::make_unique<LeakyRelu>(alpha);
}
std::unique_ptr<Layer> make_dropout(double rate) { return std::make_unique<Dropout>(rate); }
std::unique_ptr<Layer> make_flatten() { return std::make_unique<Flatten>(); }

std::unique_ptr<Layer> layer_from_description(const std::string& line) {
  std::istringstream ss(line);
  std::string kind;
  ss >> kind;
  if (kind == "conv2d") {
    int in_c = 0, out_c = 0, k = 0;
    std::string pad;
    ss >> in_c >> out_c >> k >> pad;
    if (!ss || (pad != "same" && pad != "valid"))
      throw std::runtime_error("bad conv2d description: " + line);
    return make_conv2d(in_c, out_c, k, pad == "same" ? Padding::Same : Padding::Valid);
  }
  if (kind == "maxpool2d") {
    int window = 0;
    std::string mode;
    ss >> window >> mode;
    if (!ss || (mode != "ceil" && mode != "floor"))
      throw std::runtime_error("bad maxpool2d description: " + line);
    return make_maxpool2d(window, mode == "ceil");
  }
  if (kind == "dense") {
    int in_u = 0, out_u = 0;
    ss >> in_u >> out_u;
    if (!ss) throw std::runtime_error("bad dense description: " + line);
    return make_dense(in_u, out_u);
  }
  if (kind == "relu") return make_relu();
  if (kind == "leaky_relu") {
    double alpha = 0.0;
    ss >> alpha;
    if (!ss) throw std::runtime_error("bad leaky_relu description: " + line);
    return make_leaky_relu(alpha);
  }
  if (kind == "dropout") {
    double rate = 0.0;
    ss >> rate;
    if (!ss) throw std::runtime_error("bad dropout description: " + line);
    return make_dropout(rate);
  }
  if (kind == "flatten") return make_flatten();
  throw std::runtime_error("unknown layer kind: " + line);
}

// ---- network ----

void Network::add_branch(std::vector<int> input_shape) {
  if (branches_.size() >= 2) throw std::invalid_argument("network: at most two branches");
  input_shapes_.push_back(std::move(input_shape));
  branches_.emplace_back();
}

void Network::add_layer(int branch, std::unique_ptr<Layer> layer) {
  branches_.at(static_cast<std::size_t>(branch)).push_back(std::move(layer));
}

void Network::add_trunk_layer(std::unique_ptr<Layer> layer) {
  trunk_.push_back(std::move(layer));
}

void Network::init(std::uint64_t seed) {
  std::uint64_t idx = 0;
  for (auto& branch : branches_)
    for (auto& layer : branch) {
      std::mt19937_64 rng(detail::mix_seed(seed, idx++));
      layer->init_params(rng);
    }
  for (auto& layer : trunk_) {
    std::mt19937_64 rng(detail::mix_seed(seed, idx++));
    layer->init_params(rng);
  }
}

std::vector<std::pair<std::string, std::vector<int>>> Network::layer_shapes() const {
  std::vector<std::pair<std::string, std::vector<int>>> shapes;
  const bool two = branches_.size() == 2;
  int concat_width = 0;
  for (std::size_t b = 0; b < branches_.size(); ++b) {
    std::string prefix = two ? (b == 0 ? "a:" : "b:") : "";
    std::vector<int> shape = input_shapes_[b];
    shapes.emplace_back(prefix + "input", shape);
    for (const auto& layer : branches_[b]) {
      shape = layer->out_shape(shape);
      shapes.emplace_back(prefix + layer->kind(), shape);
    }
    if (shape.size() != 1 && (two || !trunk_.empty()))
      throw std::logic_error("network: branch output must be flat before the trunk");
    if (!shape.empty()) concat_width += shape[0];
  }
  std::vector<int> shape{concat_width};
  if (two) shapes.emplace_back("concatenate", shape);
  for (const auto& layer : trunk_) {
    shape = layer->out_shape(shape);
    shapes.emplace_back(layer->kind(), shape);
  }
  return shapes;
}

Tensor Network::forward(const std::vector<Tensor>& inputs, bool training, std::uint64_t seed) {
  if (inputs.size() != branches_.size())
    throw std::invalid_argument("network: expected " + std::to_string(branches_.size()) +
                                " inputs, got " + std::to_string(inputs.size()));
  const int batch = inputs.empty() ? 0 : inputs[0].dim(0);
  for (std::size_t b = 0; b < inputs.size(); ++b) {
    if (inputs[b].dim(0) != batch)
      throw std::invalid_argument("network: inconsistent batch sizes across inputs");
    if (inputs[b].size() != static_cast<std::size_t>(batch) * shape_size(input_shapes_[b]))
      throw std::invalid_argument("network: input " + std::to_string(b) + " shape " +
                                  shape_to_string(inputs[b].shape) + " does not match declared " +
                                  shape_to_string(input_shapes_[b]));
  }

  std::mt19937_64 rng(seed);
  branch_outputs_.clear();
  for (std::size_t b = 0; b < branches_.size(); ++b) {
    Tensor t = inputs[b];
    for (auto& layer : branches_[b]) t = layer->forward(t, training, rng);
    branch_outputs_.push_back(std::move(t));
  }
  have_cache_ = true;

  Tensor t;
  if (branches_.size() == 1) {
    t = branch_outputs_[0];
  } else {
    const Tensor& a = branch_outputs_[0];
    const Tensor& c = branch_outputs_[1];
    if (a.rank() != 2 || c.rank() != 2)
      throw std::logic_error("network: concatenate expects flat branch outputs");
    t = Tensor({batch, a.dim(1) + c.dim(1)});
    for (int bi = 0; bi < batch; ++bi) {
      std::copy_n(a.v.data() + static_cast<std::size_t>(bi) * a.dim(1), a.dim(1),
                  t.v.data() + static_cast<std::size_t>(bi) * t.dim(1));
      std::copy_n(c.v.data() + static_cast<std::size_t>(bi) * c.dim(1), c.dim(1),
                  t.v.data() + static_cast<std::size_t>(bi) * t.dim(1) + a.dim(1));
    }
  }
  for (auto& layer : trunk_) t = layer->forward(t, training, rng);
  return t;
}

void Network::backward(const Tensor& grad_out) {
  if (!have_cache_) throw std::logic_error("network: backward without forward");
  Tensor g = grad_out;
  for (auto it = trunk_.rbegin(); it != trunk_.rend(); ++it) g = (*it)->backward(g);

  if (branches_.size() == 1) {
    for (auto it = branches_[0].rbegin(); it != branches_[0].rend(); ++it)
      g = (*it)->backward(g);
    return;
  }

  const int batch = g.dim(0);
  const int wa = branch_outputs_[0].dim(1);
  const int wb = branch_outputs_[1].dim(1);
  Tensor ga({batch, wa});
  Tensor gb({batch, wb});
  for (int bi = 0; bi < batch; ++bi) {
    std::copy_n(g.v.data() + static_cast<std::size_t>(bi) * (wa + wb), wa,
                ga.v.data() + static_cast<std::size_t>(bi) * wa);
    std::copy_n(g.v.data() + static_cast<std::size_t>(bi) * (wa + wb) + wa, wb,
                gb.v.data() + static_cast<std::size_t>(bi) * wb);
  }
  for (auto it = branches_[0].rbegin(); it != branches_[0].rend(); ++it)
    ga = (*it)->backward(ga);
  for (auto it = branches_[1].rbegin(); it != branches_[1].rend(); ++it)
    gb = (*it)->backward(gb);
}

void Network::zero_grads() {
  for (auto& branch : branches_)
    for (auto& layer : branch) layer->zero_grads();
  for (auto& layer : trunk_) layer->zero_grads();
}

std::vector<std::span<double>> Network::param_views() {
  std::vector<std::span<double>> views;
  for (auto& branch : branches_)
    for (auto& layer : branch)
      if (!layer->params().empty()) views.push_back(layer->params());
  for (auto& layer : trunk_)
    if (!layer->params().empty()) views.push_back(layer->params());
  return views;
}

std::vector<std::span<double>> Network::grad_views() {
  std::vector<std::span<double>> views;
  for (auto& branch : branches_)
    for (auto& layer : branch)
      if (!layer->grads().empty()) views.push_back(layer->grads());
  for (auto& layer : trunk_)
    if (!layer->grads().empty()) views.push_back(layer->grads());
  return views;
}

std::size_t Network::param_count() {
  std::size_t n = 0;
  for (auto& view : param_views()) n += view.size();
  return n;
}

void Network::save(std::ostream& out) {
  out << "network 1\n";
  out << "branches " << branches_.size() << '\n';
  for (std::size_t b = 0; b < branches_.size(); ++b) {
    out << "input " << input_shapes_[b].size();
    for (int d : input_shapes_[b]) out << ' ' << d;
    out << '\n';
    out << "layers " << branches_[b].size() << '\n';
    for (const auto& layer : branches_[b]) out << layer->describe() << '\n';
  }
  out << "trunk " << trunk_.size() << '\n';
  for (const auto& layer : trunk_) out << layer->describe() << '\n';

  out << "params " << param_count() << '\n';
  for (auto& view : param_views())
    out.write(reinterpret_cast<const char*>(view.data()),
              static_cast<std::streamsize>(view.size() * sizeof(double)));
}

Network Network::load(std::istream& in) {
  auto expect = [&](const std::string& want) {
    std::string tag;
    in >> tag;
    if (!in || tag != want)
      throw std::runtime_error("network file: expected '" + want + "', got '" + tag + "'");
  };

  expect("network");
  int version = 0;
  in >> version;
  if (version != 1) throw std::runtime_error("network file: unsupported version");

  expect("branches");
  std::size_t n_branches = 0;
  in >> n_branches;
  if (!in || n_branches < 1 || n_branches > 2)
    throw std::runtime_error("network file: bad branch count");

  Network net;
  std::string line;
  for (std::size_t b = 0; b < n_branches; ++b) {
    expect("input");
    std::size_t rank = 0;
    in >> rank;
    std::vector<int> shape(rank);
    for (int& d : shape) in >> d;
    if (!in) throw std::runtime_error("network file: bad input shape");
    net.add_branch(shape);

    expect("layers");
    std::size_t n_layers = 0;
    in >> n_layers;
    std::getline(in, line);  // consume end of count line
    for (std::size_t i = 0; i < n_layers; ++i) {
      if (!std::getline(in, line)) throw std::runtime_error("network file: truncated layer list");
      net.add_layer(static_cast<int>(b), layer_from_description(line));
    }
  }

  expect("trunk");
  std::size_t n_trunk = 0;
  in >> n_trunk;
  std::getline(in, line);
  for (std::size_t i = 0; i < n_trunk; ++i) {
    if (!std::getline(in, line)) throw std::runtime_error("network file: truncated trunk list");
    net.add_trunk_layer(layer_from_description(line));
  }

  expect("params");
  std::size_t count = 0;
  in >> count;
  in.get();  // newline before the binary payload
  std::size_t expected = net.param_count();
  if (count != expected)
    throw std::runtime_error("network file: parameter count " + std::to_string(count) +
                             " does not match architecture (" + std::to_string(expected) + ")");
  for (auto& view : net.param_views()) {
    in.read(reinterpret_cast<char*>(view.data()),
            static_cast<std::streamsize>(view.size() * sizeof(double)));
    if (!in) throw std::runtime_error("network file: truncated parameter payload");
  }
  return net;
}

// ---- optimizers ----

void sgd_step(std::span<double> params, std::span<const double> grads, double learning_rate) {
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= learning_rate * grads[i];
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               std::size_t offset, const OptimizerConfig& config) {
  const double b1 = config.beta1;
  const double b2 = config.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    double& m = state.m[offset + i];
    double& v = state.v[offset + i];
    m = b1 * m + (1.0 - b1) * grads[i];
    v = b2 * v + (1.0 - b2) * grads[i] * grads[i];
    const double mhat = m / bc1;
    const double vhat = v / bc2;
    params[i] -= config.learning_rate * mhat / (std::sqrt(vhat) + config.epsilon);
  }
}

// ---- reference architectures ----

Network build_multilayer_cnn(int in_channels) {
  Network net;
  net.add_branch({in_channels, 100, 100});
  net.add_layer(0, make_conv2d(in_channels, 32, 3, Padding::Valid));
  net.add_layer(0, make_relu());
  net.add_layer(0, make_maxpool2d(2, /*ceil_mode=*/false));
  net.add_layer(0, make_conv2d(32, 64, 3, Padding::Valid));
  net.add_layer(0, make_relu());
  net.add_layer(0, make_dropout(0.25));
  net.add_layer(0, make_maxpool2d(2, /*ceil_mode=*/false));
  net.add_layer(0, make_flatten());
  net.add_layer(0, make_dense(23 * 23 * 64, 128));
  net.add_layer(0, make_leaky_relu(0.2));
  net.add_layer(0, make_dropout(0.25));
  net.add_layer(0, make_dense(128, 1));
  return net;
}

Network build_encoder_cnn() {
  Network net;
  net.add_branch({1, 100, 100});
  net.add_layer(0, make_conv2d(1, 32, 3, Padding::Same));
  net.add_layer(0, make_relu());
  net.add_layer(0, make_maxpool2d(2, /*ceil_mode=*/true));
  net.add_layer(0, make_conv2d(32, 16, 3, Padding::Same));
  net.add_layer(0, make_relu());
  net.add_layer(0, make_maxpool2d(2, /*ceil_mode=*/true));
  net.add_layer(0, make_conv2d(16, 16, 3, Padding::Same));
  net.add_layer(0, make_relu());
  net.add_layer(0, make_maxpool2d(2, /*ceil_mode=*/true));
  net.add_layer(0, make_flatten());
  net.add_layer(0, make_leaky_relu(0.3));
  net.add_layer(0, make_dense(13 * 13 * 16, 169));
  net.add_layer(0, make_leaky_relu(0.2));
  net.add_layer(0, make_dense(169, 20));

  net.add_branch({1, 30, 30});
  net.add_layer(1, make_conv2d(1, 32, 3, Padding::Same));
  net.add_layer(1, make_relu());
  net.add_layer(1, make_maxpool2d(2, /*ceil_mode=*/true));
  net.add_layer(1, make_conv2d(32, 16, 3, Padding::Same));
  net.add_layer(1, make_relu());
  net.add_layer(1, make_maxpool2d(2, /*ceil_mode=*/true));
  net.add_layer(1, make_flatten());
  net.add_layer(1, make_leaky_relu(0.3));
  net.add_layer(1, make_dense(8 * 8 * 16, 64));
  net.add_layer(1, make_leaky_relu(0.2));
  net.add_layer(1, make_dense(64, 10));

  net.add_trunk_layer(make_dense(30, 50));
  net.add_trunk_layer(make_relu());
  net.add_trunk_layer(make_dense(50, 1));
  return net;
}

// ---- training ----

namespace {

Tensor assemble_batch(const std::vector<Tensor>& samples, const std::vector<std::size_t>& order,
                      std::size_t start, std::size_t count) {
  const Tensor& first = samples[order[start]];
  Tensor batch(batch_shape(static_cast<int>(count), first.shape));
  const std::size_t stride = first.size();
  for (std::size_t i = 0; i < count; ++i) {
    const Tensor& s = samples[order[start + i]];
    if (s.size() != stride)
      throw std::invalid_argument("train: inconsistent sample shapes in dataset");
    std::copy_n(s.v.data(), stride, batch.v.data() + i * stride);
  }
  return batch;
}

}  // namespace

Trainer::Trainer(Network& net, const TrainConfig& config)
    : net_(net), cfg_(config), rng_(config.seed) {
  if (cfg_.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (cfg_.optimizer.kind == OptimizerKind::Adam) {
    adam_.m.assign(net_.param_count(), 0.0);
    adam_.v.assign(net_.param_count(), 0.0);
  }
}

std::vector<double> Trainer::run(const NnDataset& data, int epochs) {
  const std::size_t n = data.size();
  if (n == 0) throw std::invalid_argument("train: empty dataset");
  if (data.branch_inputs.size() != static_cast<std::size_t>(net_.branch_count()))
    throw std::invalid_argument("train: dataset has " +
                                std::to_string(data.branch_inputs.size()) +
                                " input branches, network wants " +
                                std::to_string(net_.branch_count()));
  for (const auto& branch : data.branch_inputs)
    if (branch.size() != n)
      throw std::invalid_argument("train: branch input count does not match label count");

  std::size_t batch = static_cast<std::size_t>(cfg_.batch_size);
  if (batch > n) {
    std::fprintf(stderr, "train: batch_size %zu exceeds dataset size %zu, using one full batch\n",
                 batch, n);
    batch = n;
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  std::vector<double> losses;
  losses.reserve(static_cast<std::size_t>(epochs));
  for (int epoch = 0; epoch < epochs; ++epoch) {
    detail::shuffle(order, rng_);
    double epoch_sse = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t count = std::min(batch, n - start);
      std::vector<Tensor> inputs;
      inputs.reserve(data.branch_inputs.size());
      for (const auto& branch : data.branch_inputs)
        inputs.push_back(assemble_batch(branch, order, start, count));

      const std::uint64_t fwd_seed = rng_();
      Tensor out = net_.forward(inputs, /*training=*/true, fwd_seed);
      if (out.rank() != 2 || out.dim(1) != 1)
        throw std::logic_error("train: network output is not (batch,1)");

      Tensor grad(out.shape);
      for (std::size_t i = 0; i < count; ++i) {
        const double r = out.v[i] - data.labels[order[start + i]];
        epoch_sse += r * r;
        grad.v[i] = 2.0 * r / static_cast<double>(count);
      }

      net_.zero_grads();
      net_.backward(grad);

      auto params = net_.param_views();
      auto grads = net_.grad_views();
      if (cfg_.optimizer.kind == OptimizerKind::Adam) {
        ++adam_.step;
        std::size_t offset = 0;
        for (std::size_t i = 0; i < params.size(); ++i) {
          adam_step(params[i], grads[i], adam_, offset, cfg_.optimizer);
          offset += params[i].size();
        }
      } else {
        for (std::size_t i = 0; i < params.size(); ++i)
          sgd_step(params[i], grads[i], cfg_.optimizer.learning_rate);
      }
    }
    losses.push_back(epoch_sse / static_cast<double>(n));
  }
  history_.insert(history_.end(), losses.begin(), losses.end());
  return losses;
}

std::vector<double> train(Network& net, const NnDataset& data, int batch_size, int epochs,
                          const OptimizerConfig& optimizer, std::uint64_t seed) {
  TrainConfig cfg;
  cfg.batch_size = batch_size;
  cfg.optimizer = optimizer;
  cfg.seed = seed;
  Trainer trainer(net, cfg);
  return trainer.run(data, epochs);
}

std::vector<double> predict(Network& net, const NnDataset& data) {
  const std::size_t n = data.size();
  std::vector<double> out;
  out.reserve(n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch = 256;
  for (std::size_t start = 0; start < n; start += batch) {
    const std::size_t count = std::min(batch, n - start);
    std::vector<Tensor> inputs;
    for (const auto& br : data.branch_inputs)
      inputs.push_back(assemble_batch(br, order, start, count));
    Tensor y = net.forward(inputs, /*training=*/false, 0);
    for (std::size_t i = 0; i < count; ++i) out.push_back(y.v[i]);
  }
  return out;
}

}  // namespace fireml::nn
