#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "bidrl/errors.hpp"
#include "bidrl/observation.hpp"
#include "bidrl/rng.hpp"

namespace bidrl {

struct NetworkConfig {
  std::vector<int> actor_hidden{128, 128, 128, 128};
  std::vector<int> critic_hidden{256, 256, 256, 256};
  int target_embedding_dim = 64;
  std::vector<int> target_encoder_hidden{64, 64};
  bool use_attention_pooling = true;
  int bid_levels = 7;
  int action_count = 5;

  void validate() const {
    auto positive = [](const std::vector<int>& widths, const char* name) {
      for (int w : widths) {
        if (w < 1) throw InvalidParameter(std::string("network.") + name + " widths must be positive");
      }
    };
    positive(actor_hidden, "actor_hidden");
    positive(critic_hidden, "critic_hidden");
    positive(target_encoder_hidden, "target_encoder_hidden");
    if (target_embedding_dim < 1) throw InvalidParameter("network.target_embedding_dim must be >= 1");
    if (bid_levels < 1) throw InvalidParameter("network.bid_levels must be >= 1");
    if (action_count < 1) throw InvalidParameter("network.action_count must be >= 1");
  }

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

// A named slice of the flat parameter vector, stored column-major.
struct ParamBlock {
  std::string name;
  int rows = 0;
  int cols = 0;
  std::size_t offset = 0;
  double init_gain = 0.0;  // orthogonal gain; 0 keeps the block at zero

  std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
};

struct DenseLayer {
  std::size_t weight = 0;  // index into blocks
  std::size_t bias = 0;
  int in = 0;
  int out = 0;
  bool tanh = true;
};

// Shared actor-critic. Competitor blocks go through an MLP encoder and are
// pooled by softmax attention against a learned query; the pooled vector is
// appended to the self features and fed to separate actor and critic trunks.
// Without pooling the blocks are concatenated in order instead.
template <class Scalar>
class ActorCritic {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
  using MatrixMap = Eigen::Map<Matrix>;
  using ConstMatrixMap = Eigen::Map<const Matrix>;

  enum Heads : unsigned { kActor = 1u, kCritic = 2u, kBoth = 3u };

  struct Pass {
    unsigned heads = kBoth;
    int batch = 0;
    std::vector<int> offsets;
    std::vector<Matrix> encoder;  // [0] = raw blocks, then each layer output
    RowVector attention;          // softmax weight per block
    Matrix pooled;
    Matrix input;                 // trunk input
    std::vector<Matrix> actor;    // hidden outputs
    std::vector<Matrix> critic;
    Matrix action_logits;         // action_count x batch
    Matrix bid_logits;            // bid_levels x batch
    RowVector value;
  };

  ActorCritic(NetworkConfig config, ObservationLayout layout)
      : config_(std::move(config)), layout_(layout) {
    config_.validate();
    if (layout_.self_dim < 0 || layout_.block_dim < 0 || layout_.fixed_blocks < 0) {
      throw InvalidParameter("observation layout dimensions must be non-negative");
    }
    build();
    params_ = Vector::Zero(static_cast<Eigen::Index>(size_));
  }

  const NetworkConfig& config() const { return config_; }
  const ObservationLayout& layout() const { return layout_; }
  const std::vector<ParamBlock>& blocks() const { return blocks_; }
  std::size_t parameter_count() const { return size_; }
  Vector& params() { return params_; }
  const Vector& params() const { return params_; }
  int trunk_input_dim() const { return trunk_in_; }

  // Orthogonal weights scaled by each block's gain, zero biases, zero query.
  void initialize(Rng& rng) {
    params_.setZero();
    std::normal_distribution<double> normal(0.0, 1.0);
    for (const ParamBlock& b : blocks_) {
      if (b.init_gain == 0.0 || b.cols == 1) continue;
      const int tall = std::max(b.rows, b.cols);
      const int wide = std::min(b.rows, b.cols);
      Eigen::MatrixXd g(tall, wide);
      for (int c = 0; c < wide; ++c) {
        for (int r = 0; r < tall; ++r) g(r, c) = normal(rng);
      }
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
      Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(tall, wide);
      const Eigen::MatrixXd r = qr.matrixQR();
      for (int c = 0; c < wide; ++c) {
        if (r(c, c) < 0) q.col(c) *= -1.0;
      }
      Eigen::MatrixXd w = b.rows >= b.cols ? q : Eigen::MatrixXd(q.transpose());
      block(b) = (w * b.init_gain).template cast<Scalar>();
    }
  }

  MatrixMap block(const ParamBlock& b) {
    return MatrixMap(params_.data() + b.offset, b.rows, b.cols);
  }
  ConstMatrixMap block(const ParamBlock& b) const {
    return ConstMatrixMap(params_.data() + b.offset, b.rows, b.cols);
  }

  Pass forward(const ObservationBatch& batch, unsigned heads = kBoth) const {
    check_batch(batch);
    Pass p;
    p.heads = heads;
    p.batch = batch.size();
    p.offsets = batch.offsets;
    const int n = p.batch;

    Matrix self = Eigen::Map<const Eigen::MatrixXf>(batch.self.data(), layout_.self_dim, n)
                      .template cast<Scalar>();
    p.input.resize(trunk_in_, n);
    p.input.topRows(layout_.self_dim) = self;

    if (config_.use_attention_pooling) {
      const int total = batch.total_blocks();
      p.encoder.resize(encoder_.size() + 1);
      p.encoder[0] = Eigen::Map<const Eigen::MatrixXf>(batch.blocks.data(), layout_.block_dim, total)
                         .template cast<Scalar>();
      for (std::size_t l = 0; l < encoder_.size(); ++l) {
        p.encoder[l + 1] = dense(encoder_[l], p.encoder[l]);
      }
      const Matrix& emb = p.encoder.back();
      const auto q = block(blocks_[query_]);
      RowVector scores = q.transpose() * emb;
      p.attention.resize(total);
      p.pooled = Matrix::Zero(config_.target_embedding_dim, n);
      for (int b = 0; b < n; ++b) {
        const int lo = p.offsets[b];
        const int hi = p.offsets[b + 1];
        if (hi == lo) continue;
        const Scalar top = scores.segment(lo, hi - lo).maxCoeff();
        Scalar z = 0;
        for (int j = lo; j < hi; ++j) {
          p.attention(j) = std::exp(scores(j) - top);
          z += p.attention(j);
        }
        for (int j = lo; j < hi; ++j) {
          p.attention(j) /= z;
          p.pooled.col(b).noalias() += p.attention(j) * emb.col(j);
        }
      }
      p.input.bottomRows(config_.target_embedding_dim) = p.pooled;
    } else if (layout_.fixed_blocks > 0) {
      p.input.bottomRows(layout_.fixed_blocks * layout_.block_dim) =
          Eigen::Map<const Eigen::MatrixXf>(batch.blocks.data(), layout_.fixed_blocks * layout_.block_dim, n)
              .template cast<Scalar>();
    }

    if (heads & kActor) {
      const Matrix* x = &p.input;
      p.actor.resize(actor_.size());
      for (std::size_t l = 0; l < actor_.size(); ++l) {
        p.actor[l] = dense(actor_[l], *x);
        x = &p.actor[l];
      }
      p.action_logits = dense(action_head_, *x);
      p.bid_logits = dense(bid_head_, *x);
    }
    if (heads & kCritic) {
      const Matrix* x = &p.input;
      p.critic.resize(critic_.size());
      for (std::size_t l = 0; l < critic_.size(); ++l) {
        p.critic[l] = dense(critic_[l], *x);
        x = &p.critic[l];
      }
      p.value = dense(value_head_, *x);
    }
    return p;
  }

  // Accumulates dLoss/dparams into `grad` given the loss gradient w.r.t. the
  // outputs. Null output gradients are treated as zero.
  void backward(const Pass& p, const Matrix* d_action, const Matrix* d_bid, const RowVector* d_value,
                Vector& grad) const {
    if (grad.size() != params_.size()) grad = Vector::Zero(params_.size());
    Matrix d_input = Matrix::Zero(trunk_in_, p.batch);

    if ((p.heads & kActor) && (d_action || d_bid)) {
      const Matrix& top = actor_.empty() ? p.input : p.actor.back();
      Matrix d_top = Matrix::Zero(top.rows(), p.batch);
      if (d_action) d_top.noalias() += dense_backward(action_head_, top, top, *d_action, grad);
      if (d_bid) d_top.noalias() += dense_backward(bid_head_, top, top, *d_bid, grad);
      d_input.noalias() += trunk_backward(actor_, p.actor, p.input, std::move(d_top), grad);
    }
    if ((p.heads & kCritic) && d_value) {
      const Matrix& top = critic_.empty() ? p.input : p.critic.back();
      Matrix d_top = dense_backward(value_head_, top, top, Matrix(*d_value), grad);
      d_input.noalias() += trunk_backward(critic_, p.critic, p.input, std::move(d_top), grad);
    }

    if (!config_.use_attention_pooling) return;
    const Matrix d_pooled = d_input.bottomRows(config_.target_embedding_dim);
    const Matrix& emb = p.encoder.back();
    const auto q = block(blocks_[query_]);
    Matrix d_emb = Matrix::Zero(emb.rows(), emb.cols());
    Vector d_query = Vector::Zero(config_.target_embedding_dim);
    for (int b = 0; b < p.batch; ++b) {
      const int lo = p.offsets[b];
      const int hi = p.offsets[b + 1];
      if (hi == lo) continue;
      // out = sum_j w_j e_j with w = softmax(<e_j, q>)
      Scalar mean_dw = 0;
      std::vector<Scalar> dw(hi - lo);
      for (int j = lo; j < hi; ++j) {
        dw[j - lo] = d_pooled.col(b).dot(emb.col(j));
        mean_dw += p.attention(j) * dw[j - lo];
      }
      for (int j = lo; j < hi; ++j) {
        const Scalar ds = p.attention(j) * (dw[j - lo] - mean_dw);
        d_emb.col(j).noalias() += p.attention(j) * d_pooled.col(b) + ds * q;
        d_query.noalias() += ds * emb.col(j);
      }
    }
    MatrixMap(grad.data() + blocks_[query_].offset, config_.target_embedding_dim, 1) += d_query;
    Matrix d = std::move(d_emb);
    for (std::size_t l = encoder_.size(); l-- > 0;) {
      d = dense_backward(encoder_[l], p.encoder[l], p.encoder[l + 1], d, grad);
    }
  }

 private:
  std::size_t add_block(std::string name, int rows, int cols, double gain) {
    blocks_.push_back({std::move(name), rows, cols, size_, gain});
    size_ += blocks_.back().size();
    return blocks_.size() - 1;
  }

  DenseLayer add_dense(const std::string& name, int in, int out, double gain, bool tanh) {
    DenseLayer layer;
    layer.weight = add_block(name + ".weight", out, in, gain);
    layer.bias = add_block(name + ".bias", out, 1, 0.0);
    layer.in = in;
    layer.out = out;
    layer.tanh = tanh;
    return layer;
  }

  void build() {
    const double hidden_gain = std::sqrt(2.0);
    if (config_.use_attention_pooling) {
      int in = layout_.block_dim;
      for (std::size_t l = 0; l < config_.target_encoder_hidden.size(); ++l) {
        const int out = config_.target_encoder_hidden[l];
        encoder_.push_back(add_dense("encoder." + std::to_string(l), in, out, hidden_gain, true));
        in = out;
      }
      encoder_.push_back(add_dense("encoder.embedding", in, config_.target_embedding_dim, 1.0, false));
      query_ = add_block("pool.query", config_.target_embedding_dim, 1, 0.0);
      trunk_in_ = layout_.self_dim + config_.target_embedding_dim;
    } else {
      trunk_in_ = layout_.self_dim + layout_.fixed_blocks * layout_.block_dim;
    }
    int in = trunk_in_;
    for (std::size_t l = 0; l < config_.actor_hidden.size(); ++l) {
      actor_.push_back(add_dense("actor." + std::to_string(l), in, config_.actor_hidden[l], hidden_gain, true));
      in = config_.actor_hidden[l];
    }
    action_head_ = add_dense("actor.action_head", in, config_.action_count, 0.01, false);
    bid_head_ = add_dense("actor.bid_head", in, config_.bid_levels, 0.01, false);
    in = trunk_in_;
    for (std::size_t l = 0; l < config_.critic_hidden.size(); ++l) {
      critic_.push_back(
          add_dense("critic." + std::to_string(l), in, config_.critic_hidden[l], hidden_gain, true));
      in = config_.critic_hidden[l];
    }
    value_head_ = add_dense("critic.value_head", in, 1, 1.0, false);
  }

  void check_batch(const ObservationBatch& batch) const {
    if (batch.self_dim != layout_.self_dim) {
      throw LayoutMismatch("self features have width " + std::to_string(batch.self_dim) + ", network expects " +
                           std::to_string(layout_.self_dim));
    }
    if (batch.total_blocks() > 0 && batch.block_dim != layout_.block_dim) {
      throw LayoutMismatch("competitor blocks have width " + std::to_string(batch.block_dim) +
                           ", network expects " + std::to_string(layout_.block_dim));
    }
    if (!config_.use_attention_pooling) {
      for (int b = 0; b < batch.size(); ++b) {
        const int k = batch.offsets[b + 1] - batch.offsets[b];
        if (k != layout_.fixed_blocks) {
          throw LayoutMismatch("network without attention pooling takes exactly " +
                               std::to_string(layout_.fixed_blocks) + " competitor blocks, got " +
                               std::to_string(k));
        }
      }
    }
  }

  Matrix dense(const DenseLayer& layer, const Matrix& x) const {
    Matrix a = block(blocks_[layer.weight]) * x;
    a.colwise() += block(blocks_[layer.bias]).col(0);
    if (layer.tanh) a = a.array().tanh();
    return a;
  }

  // Returns dLoss/dx; `y` is the layer output (used for the tanh derivative).
  Matrix dense_backward(const DenseLayer& layer, const Matrix& x, const Matrix& y, const Matrix& dy,
                        Vector& grad) const {
    Matrix da = dy;
    if (layer.tanh) da.array() *= (Scalar(1) - y.array().square());
    const ParamBlock& w = blocks_[layer.weight];
    const ParamBlock& b = blocks_[layer.bias];
    MatrixMap(grad.data() + w.offset, w.rows, w.cols).noalias() += da * x.transpose();
    MatrixMap(grad.data() + b.offset, b.rows, 1) += da.rowwise().sum();
    return block(w).transpose() * da;
  }

  Matrix trunk_backward(const std::vector<DenseLayer>& layers, const std::vector<Matrix>& outputs,
                        const Matrix& input, Matrix d, Vector& grad) const {
    for (std::size_t l = layers.size(); l-- > 0;) {
      const Matrix& x = l == 0 ? input : outputs[l - 1];
      d = dense_backward(layers[l], x, outputs[l], d, grad);
    }
    return d;
  }

  NetworkConfig config_;
  ObservationLayout layout_;
  std::vector<ParamBlock> blocks_;
  std::size_t size_ = 0;
  std::vector<DenseLayer> encoder_;
  std::size_t query_ = 0;
  std::vector<DenseLayer> actor_;
  std::vector<DenseLayer> critic_;
  DenseLayer action_head_;
  DenseLayer bid_head_;
  DenseLayer value_head_;
  int trunk_in_ = 0;
  Vector params_;
};

// Number of scalars in a network; depends only on the config and layout.
inline std::size_t parameter_count(const NetworkConfig& config, const ObservationLayout& layout) {
  return ActorCritic<float>(config, layout).parameter_count();
}

}  // namespace bidrl
