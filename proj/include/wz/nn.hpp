#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "wz/config.hpp"

namespace wz::nn {

using Mat = Eigen::MatrixXd;  // rows = batch
using Vec = Eigen::VectorXd;

inline void check_finite(const Mat& m, const std::string& layer, const char* phase) {
  if (!m.allFinite())
    throw std::runtime_error("non-finite values in " + layer + " during " + phase);
}

class Layer {
 public:
  explicit Layer(std::string name) : name_(std::move(name)) {}
  virtual ~Layer() = default;

  virtual Mat forward(const Mat& x) = 0;
  virtual Mat backward(const Mat& dy) = 0;

  virtual int param_count() const { return 0; }
  virtual void read_params(double*) const {}
  virtual void write_params(const double*) {}
  virtual void read_grads(double*) const {}
  virtual void zero_grads() {}
  virtual void init(std::mt19937_64&) {}
  virtual void scale_weights(double) {}
  virtual void set_bias(const std::vector<double>&) {}

  const std::string& name() const { return name_; }
  void set_accumulate(bool on) { accumulate_ = on; }

 protected:
  std::string name_;
  bool accumulate_ = true;
};

class Dense : public Layer {
 public:
  Dense(int in, int out, std::string name)
      : Layer(std::move(name)), in_(in), out_(out), W_(Mat::Zero(out, in)), b_(Vec::Zero(out)),
        dW_(Mat::Zero(out, in)), db_(Vec::Zero(out)) {}

  Mat forward(const Mat& x) override {
    if (x.cols() != in_)
      throw std::invalid_argument(name_ + ": input width " + std::to_string(x.cols()) +
                                  " != " + std::to_string(in_));
    x_ = x;
    Mat y = (x * W_.transpose()).rowwise() + b_.transpose();
    check_finite(y, name_, "forward");
    return y;
  }

  Mat backward(const Mat& dy) override {
    if (accumulate_) {
      dW_.noalias() += dy.transpose() * x_;
      db_.noalias() += dy.colwise().sum().transpose();
    }
    Mat dx = dy * W_;
    check_finite(dx, name_, "backward");
    return dx;
  }

  int param_count() const override { return out_ * in_ + out_; }
  void read_params(double* dst) const override { pack(W_, b_, dst); }
  void write_params(const double* src) override { unpack(src, W_, b_); }
  void read_grads(double* dst) const override { pack(dW_, db_, dst); }
  void zero_grads() override {
    dW_.setZero();
    db_.setZero();
  }
  void init(std::mt19937_64& rng) override {
    double limit = 1.0 / std::sqrt(static_cast<double>(in_));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (int r = 0; r < out_; ++r)
      for (int c = 0; c < in_; ++c) W_(r, c) = u(rng);
    for (int r = 0; r < out_; ++r) b_[r] = u(rng);
  }
  void scale_weights(double s) override { W_ *= s; }
  void set_bias(const std::vector<double>& b) override {
    if (static_cast<int>(b.size()) != out_)
      throw std::invalid_argument(name_ + ": bias size mismatch");
    for (int r = 0; r < out_; ++r) b_[r] = b[r];
  }

 private:
  static void pack(const Mat& W, const Vec& b, double* dst) {
    for (int r = 0; r < W.rows(); ++r)
      for (int c = 0; c < W.cols(); ++c) *dst++ = W(r, c);
    for (int r = 0; r < b.size(); ++r) *dst++ = b[r];
  }
  static void unpack(const double* src, Mat& W, Vec& b) {
    for (int r = 0; r < W.rows(); ++r)
      for (int c = 0; c < W.cols(); ++c) W(r, c) = *src++;
    for (int r = 0; r < b.size(); ++r) b[r] = *src++;
  }

  int in_, out_;
  Mat W_;
  Vec b_;
  Mat dW_;
  Vec db_;
  Mat x_;
};

class Relu : public Layer {
 public:
  explicit Relu(std::string name) : Layer(std::move(name)) {}
  Mat forward(const Mat& x) override {
    mask_ = (x.array() > 0.0).cast<double>();
    return x.cwiseMax(0.0);
  }
  Mat backward(const Mat& dy) override { return dy.cwiseProduct(mask_); }

 private:
  Mat mask_;
};

// 3x3 same-padding convolution over rows stored channel-major [c][h][w].
class Conv3x3 : public Layer {
 public:
  Conv3x3(int cin, int cout, int h, int w, std::string name)
      : Layer(std::move(name)), cin_(cin), cout_(cout), h_(h), w_(w),
        K_(Mat::Zero(cout, cin * 9)), b_(Vec::Zero(cout)), dK_(Mat::Zero(cout, cin * 9)),
        db_(Vec::Zero(cout)) {}

  Mat forward(const Mat& x) override {
    if (x.cols() != cin_ * h_ * w_) throw std::invalid_argument(name_ + ": input size mismatch");
    int batch = static_cast<int>(x.rows());
    cols_.assign(batch, Mat());
    Mat y(batch, cout_ * h_ * w_);
    for (int s = 0; s < batch; ++s) {
      Mat col = im2col(x, s);
      Mat out = col * K_.transpose();  // (h*w, cout)
      for (int c = 0; c < cout_; ++c)
        y.row(s).segment(c * h_ * w_, h_ * w_) = (out.col(c).array() + b_[c]).transpose();
      cols_[s] = std::move(col);
    }
    check_finite(y, name_, "forward");
    return y;
  }

  Mat backward(const Mat& dy) override {
    int batch = static_cast<int>(dy.rows());
    Mat dx = Mat::Zero(batch, cin_ * h_ * w_);
    for (int s = 0; s < batch; ++s) {
      Mat dout(h_ * w_, cout_);
      for (int c = 0; c < cout_; ++c)
        dout.col(c) = dy.row(s).segment(c * h_ * w_, h_ * w_).transpose();
      if (accumulate_) {
        dK_.noalias() += dout.transpose() * cols_[s];
        db_.noalias() += dout.colwise().sum().transpose();
      }
      Mat dcol = dout * K_;  // (h*w, cin*9)
      col2im(dcol, dx, s);
    }
    check_finite(dx, name_, "backward");
    return dx;
  }

  int param_count() const override { return cout_ * cin_ * 9 + cout_; }
  void read_params(double* dst) const override {
    for (int r = 0; r < K_.rows(); ++r)
      for (int c = 0; c < K_.cols(); ++c) *dst++ = K_(r, c);
    for (int r = 0; r < b_.size(); ++r) *dst++ = b_[r];
  }
  void write_params(const double* src) override {
    for (int r = 0; r < K_.rows(); ++r)
      for (int c = 0; c < K_.cols(); ++c) K_(r, c) = *src++;
    for (int r = 0; r < b_.size(); ++r) b_[r] = *src++;
  }
  void read_grads(double* dst) const override {
    for (int r = 0; r < dK_.rows(); ++r)
      for (int c = 0; c < dK_.cols(); ++c) *dst++ = dK_(r, c);
    for (int r = 0; r < db_.size(); ++r) *dst++ = db_[r];
  }
  void zero_grads() override {
    dK_.setZero();
    db_.setZero();
  }
  void init(std::mt19937_64& rng) override {
    double limit = 1.0 / std::sqrt(static_cast<double>(cin_ * 9));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (int r = 0; r < K_.rows(); ++r)
      for (int c = 0; c < K_.cols(); ++c) K_(r, c) = u(rng);
    for (int r = 0; r < b_.size(); ++r) b_[r] = u(rng);
  }
  void scale_weights(double s) override { K_ *= s; }

 private:
  Mat im2col(const Mat& x, int s) const {
    Mat col = Mat::Zero(h_ * w_, cin_ * 9);
    for (int y = 0; y < h_; ++y) {
      for (int xq = 0; xq < w_; ++xq) {
        int p = y * w_ + xq;
        for (int c = 0; c < cin_; ++c) {
          for (int ky = -1; ky <= 1; ++ky) {
            for (int kx = -1; kx <= 1; ++kx) {
              int yy = y + ky, xx = xq + kx;
              if (yy < 0 || yy >= h_ || xx < 0 || xx >= w_) continue;
              col(p, c * 9 + (ky + 1) * 3 + (kx + 1)) = x(s, c * h_ * w_ + yy * w_ + xx);
            }
          }
        }
      }
    }
    return col;
  }

  void col2im(const Mat& dcol, Mat& dx, int s) const {
    for (int y = 0; y < h_; ++y) {
      for (int xq = 0; xq < w_; ++xq) {
        int p = y * w_ + xq;
        for (int c = 0; c < cin_; ++c) {
          for (int ky = -1; ky <= 1; ++ky) {
            for (int kx = -1; kx <= 1; ++kx) {
              int yy = y + ky, xx = xq + kx;
              if (yy < 0 || yy >= h_ || xx < 0 || xx >= w_) continue;
              dx(s, c * h_ * w_ + yy * w_ + xx) += dcol(p, c * 9 + (ky + 1) * 3 + (kx + 1));
            }
          }
        }
      }
    }
  }

  int cin_, cout_, h_, w_;
  Mat K_;
  Vec b_;
  Mat dK_;
  Vec db_;
  std::vector<Mat> cols_;
};

// 3x3 max pooling, stride 2, padding 1 (e.g. 40x40 -> 20x20).
class MaxPool3x3 : public Layer {
 public:
  MaxPool3x3(int channels, int h, int w, std::string name)
      : Layer(std::move(name)), c_(channels), h_(h), w_(w), ho_((h + 2 - 3) / 2 + 1),
        wo_((w + 2 - 3) / 2 + 1) {}

  int out_h() const { return ho_; }
  int out_w() const { return wo_; }

  Mat forward(const Mat& x) override {
    int batch = static_cast<int>(x.rows());
    Mat y(batch, c_ * ho_ * wo_);
    argmax_.assign(static_cast<std::size_t>(batch) * c_ * ho_ * wo_, 0);
    for (int s = 0; s < batch; ++s) {
      for (int c = 0; c < c_; ++c) {
        for (int py = 0; py < ho_; ++py) {
          for (int px = 0; px < wo_; ++px) {
            double best = -std::numeric_limits<double>::infinity();
            int best_idx = -1;
            for (int ky = 0; ky < 3; ++ky) {
              for (int kx = 0; kx < 3; ++kx) {
                int yy = py * 2 - 1 + ky, xx = px * 2 - 1 + kx;
                if (yy < 0 || yy >= h_ || xx < 0 || xx >= w_) continue;
                int idx = c * h_ * w_ + yy * w_ + xx;
                if (x(s, idx) > best) {
                  best = x(s, idx);
                  best_idx = idx;
                }
              }
            }
            int po = c * ho_ * wo_ + py * wo_ + px;
            y(s, po) = best;
            argmax_[static_cast<std::size_t>(s) * c_ * ho_ * wo_ + po] = best_idx;
          }
        }
      }
    }
    return y;
  }

  Mat backward(const Mat& dy) override {
    int batch = static_cast<int>(dy.rows());
    Mat dx = Mat::Zero(batch, c_ * h_ * w_);
    for (int s = 0; s < batch; ++s) {
      for (int po = 0; po < c_ * ho_ * wo_; ++po) {
        dx(s, argmax_[static_cast<std::size_t>(s) * c_ * ho_ * wo_ + po]) += dy(s, po);
      }
    }
    return dx;
  }

 private:
  int c_, h_, w_, ho_, wo_;
  std::vector<int> argmax_;
};

// (ReLU -> 3x3 conv -> ReLU -> 3x3 conv) + skip, channel-preserving.
class ResBlock : public Layer {
 public:
  ResBlock(int channels, int h, int w, std::string name)
      : Layer(name), relu1_(name + ".relu1"), conv1_(channels, channels, h, w, name + ".conv1"),
        relu2_(name + ".relu2"), conv2_(channels, channels, h, w, name + ".conv2") {}

  Mat forward(const Mat& x) override {
    Mat y = conv2_.forward(relu2_.forward(conv1_.forward(relu1_.forward(x))));
    return x + y;
  }
  Mat backward(const Mat& dy) override {
    Mat d = relu1_.backward(conv1_.backward(relu2_.backward(conv2_.backward(dy))));
    return dy + d;
  }

  std::vector<Layer*> children() { return {&relu1_, &conv1_, &relu2_, &conv2_}; }

 private:
  Relu relu1_;
  Conv3x3 conv1_;
  Relu relu2_;
  Conv3x3 conv2_;
};

// ---- networks ----------------------------------------------------------------

class NetBase {
 public:
  virtual ~NetBase() = default;
  virtual Mat forward(const Mat& x) = 0;
  virtual Mat backward(const Mat& dy) = 0;
  virtual int input_dim() const = 0;
  virtual int output_dim() const = 0;
  virtual std::vector<Layer*> layers() = 0;
  virtual Layer* output_layer() = 0;

  int param_count() {
    int n = 0;
    for (Layer* l : layers()) n += l->param_count();
    return n;
  }
  Vec get_params() {
    Vec p(param_count());
    double* dst = p.data();
    for (Layer* l : layers()) {
      l->read_params(dst);
      dst += l->param_count();
    }
    return p;
  }
  void set_params(const Vec& p) {
    if (p.size() != param_count()) throw std::invalid_argument("set_params: dimension mismatch");
    const double* src = p.data();
    for (Layer* l : layers()) {
      l->write_params(src);
      src += l->param_count();
    }
  }
  Vec get_grads() {
    Vec g(param_count());
    double* dst = g.data();
    for (Layer* l : layers()) {
      l->read_grads(dst);
      dst += l->param_count();
    }
    return g;
  }
  void zero_grads() {
    for (Layer* l : layers()) l->zero_grads();
  }
  void set_accumulate(bool on) {
    for (Layer* l : layers()) l->set_accumulate(on);
  }
  // uniform fan-in init; output-layer weights scaled down, bias optionally set
  void init_params(std::mt19937_64& rng, double head_scale = 0.01,
                   const std::vector<double>* head_bias = nullptr) {
    for (Layer* l : layers()) l->init(rng);
    output_layer()->scale_weights(head_scale);
    if (head_bias != nullptr) output_layer()->set_bias(*head_bias);
  }
};

class MlpNet : public NetBase {
 public:
  MlpNet(int in, const std::vector<int>& hidden, int out) : in_(in), out_(out) {
    int prev = in;
    int i = 0;
    for (int h : hidden) {
      layers_.push_back(std::make_unique<Dense>(prev, h, "dense" + std::to_string(i)));
      layers_.push_back(std::make_unique<Relu>("relu" + std::to_string(i)));
      prev = h;
      ++i;
    }
    layers_.push_back(std::make_unique<Dense>(prev, out, "head"));
  }

  Mat forward(const Mat& x) override {
    Mat h = x;
    for (auto& l : layers_) h = l->forward(h);
    return h;
  }
  Mat backward(const Mat& dy) override {
    Mat d = dy;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) d = (*it)->backward(d);
    return d;
  }
  int input_dim() const override { return in_; }
  int output_dim() const override { return out_; }
  std::vector<Layer*> layers() override {
    std::vector<Layer*> out;
    for (auto& l : layers_) out.push_back(l.get());
    return out;
  }
  Layer* output_layer() override { return layers_.back().get(); }

 private:
  int in_, out_;
  std::vector<std::unique_ptr<Layer>> layers_;
};

// One grid stack: conv -> 3x3 maxpool stride 2 -> two residual blocks ->
// linear embedding.
class GridTrunk {
 public:
  GridTrunk(int h, int w, int filters, int embed, const std::string& name)
      : conv_(1, filters, h, w, name + ".conv"), pool_(filters, h, w, name + ".pool"),
        res1_(filters, pool_.out_h(), pool_.out_w(), name + ".res1"),
        res2_(filters, pool_.out_h(), pool_.out_w(), name + ".res2"),
        embed_(filters * pool_.out_h() * pool_.out_w(), embed, name + ".embed"),
        relu_(name + ".embed_relu") {}

  Mat forward(const Mat& x) {
    return relu_.forward(
        embed_.forward(res2_.forward(res1_.forward(pool_.forward(conv_.forward(x))))));
  }
  Mat backward(const Mat& dy) {
    return conv_.backward(
        pool_.backward(res1_.backward(res2_.backward(embed_.backward(relu_.backward(dy))))));
  }
  std::vector<Layer*> layers() {
    std::vector<Layer*> out{&conv_, &pool_};
    for (Layer* l : res1_.children()) out.push_back(l);
    out.push_back(&res1_);
    for (Layer* l : res2_.children()) out.push_back(l);
    out.push_back(&res2_);
    out.push_back(&embed_);
    out.push_back(&relu_);
    return out;
  }

 private:
  Conv3x3 conv_;
  MaxPool3x3 pool_;
  ResBlock res1_;
  ResBlock res2_;
  Dense embed_;
  Relu relu_;
};

// Two parallel grid stacks (speed / acceleration maps), embeddings
// concatenated with the local vector (and the action, for Q) into a dense
// head.
class ImpalaNet : public NetBase {
 public:
  ImpalaNet(int grid_h, int grid_w, int speed_filters, int accel_filters, int embed, int extra_in,
            int head_hidden, int out)
      : gh_(grid_h), gw_(grid_w), embed_(embed), extra_in_(extra_in), out_(out),
        trunk_speed_(grid_h, grid_w, speed_filters, embed, "speed"),
        trunk_accel_(grid_h, grid_w, accel_filters, embed, "accel"),
        head_(2 * embed + extra_in, std::vector<int>{head_hidden, head_hidden}, out) {}

  Mat forward(const Mat& x) override {
    if (x.cols() != input_dim()) throw std::invalid_argument("impala: input size mismatch");
    int g = gh_ * gw_;
    Mat es = trunk_speed_.forward(x.middleCols(0, g));
    Mat ea = trunk_accel_.forward(x.middleCols(g, g));
    Mat h(x.rows(), 2 * embed_ + extra_in_);
    h << es, ea, x.middleCols(2 * g, extra_in_);
    return head_.forward(h);
  }

  Mat backward(const Mat& dy) override {
    int g = gh_ * gw_;
    Mat dh = head_.backward(dy);
    Mat dx(dy.rows(), input_dim());
    dx.middleCols(0, g) = trunk_speed_.backward(dh.middleCols(0, embed_));
    dx.middleCols(g, g) = trunk_accel_.backward(dh.middleCols(embed_, embed_));
    dx.middleCols(2 * g, extra_in_) = dh.middleCols(2 * embed_, extra_in_);
    return dx;
  }

  int input_dim() const override { return 2 * gh_ * gw_ + extra_in_; }
  int output_dim() const override { return out_; }
  std::vector<Layer*> layers() override {
    std::vector<Layer*> out = trunk_speed_.layers();
    for (Layer* l : trunk_accel_.layers()) out.push_back(l);
    for (Layer* l : head_.layers()) out.push_back(l);
    return out;
  }
  Layer* output_layer() override { return head_.output_layer(); }

  // embedding of one grid map, exposed for architecture tests
  Mat speed_embedding(const Mat& grid) { return trunk_speed_.forward(grid); }

 private:
  int gh_, gw_, embed_, extra_in_, out_;
  GridTrunk trunk_speed_;
  GridTrunk trunk_accel_;
  MlpNet head_;
};

// ---- topology ------------------------------------------------------------------

struct TopologyConfig {
  enum class Variant { kReducedMlp, kImpalaCnn };
  Variant variant = Variant::kReducedMlp;
  int obs_dim = 3208;              // MLP flat observation width
  std::vector<int> hidden = {256, 256};
  int grid_h = 40, grid_w = 40;
  int speed_filters = 16, accel_filters = 32;
  int embed_dim = 32;
  int vec_dim = 8;
  int head_hidden = 256;

  int observation_dim() const {
    return variant == Variant::kReducedMlp ? obs_dim : 2 * grid_h * grid_w + vec_dim;
  }

  static TopologyConfig from_config(const Config& cfg) {
    TopologyConfig t;
    std::string v = cfg.get_string("net.variant", "reduced_mlp");
    if (v == "reduced_mlp") {
      t.variant = Variant::kReducedMlp;
    } else if (v == "impala_cnn") {
      t.variant = Variant::kImpalaCnn;
    } else {
      throw std::invalid_argument("net.variant must be reduced_mlp or impala_cnn");
    }
    t.obs_dim = static_cast<int>(cfg.get_int("net.obs_dim", t.obs_dim));
    t.hidden = {static_cast<int>(cfg.get_int("net.hidden0", 256)),
                static_cast<int>(cfg.get_int("net.hidden1", 256))};
    if (cfg.get_int("net.hidden1", 256) == 0) t.hidden.pop_back();
    t.head_hidden = static_cast<int>(cfg.get_int("net.head_hidden", t.head_hidden));
    return t;
  }
};

// extra_inputs: appended scalars (the action for Q networks)
inline std::unique_ptr<NetBase> make_net(const TopologyConfig& topo, int extra_inputs,
                                         int out_dim) {
  if (topo.variant == TopologyConfig::Variant::kReducedMlp) {
    return std::make_unique<MlpNet>(topo.obs_dim + extra_inputs, topo.hidden, out_dim);
  }
  return std::make_unique<ImpalaNet>(topo.grid_h, topo.grid_w, topo.speed_filters,
                                     topo.accel_filters, topo.embed_dim,
                                     topo.vec_dim + extra_inputs, topo.head_hidden, out_dim);
}

}  // namespace wz::nn
