#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <sstream>
#include <vector>

#include "bidrl/errors.hpp"
#include "bidrl/network.hpp"
#include "bidrl/rng.hpp"
#include "bidrl/rollout.hpp"

namespace bidrl {

struct PpoCoefficients {
  double clip_coef = 0.05;
  double entropy_coef = 0.03;
  double value_coef = 1.0;
};

struct LossTerms {
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;
  double total = 0.0;
  double clip_frac = 0.0;
  double approx_kl = 0.0;
};

// Adaptive-moment optimizer over a flat parameter vector.
template <class Scalar>
class Adam {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  explicit Adam(std::size_t size, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-5)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_ = Vector::Zero(static_cast<Eigen::Index>(size));
    v_ = Vector::Zero(static_cast<Eigen::Index>(size));
  }

  void step(Vector& params, const Vector& grad, double lr) {
    ++t_;
    m_ = Scalar(beta1_) * m_ + Scalar(1 - beta1_) * grad;
    v_ = Scalar(beta2_) * v_ + Scalar(1 - beta2_) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    const Scalar step_size = Scalar(lr / c1);
    const Scalar root_c2 = Scalar(std::sqrt(c2));
    params.array() -= step_size * m_.array() / (v_.array().sqrt() / root_c2 + Scalar(eps_));
  }

  long long steps() const { return t_; }

 private:
  double beta1_;
  double beta2_;
  double eps_;
  long long t_ = 0;
  Vector m_;
  Vector v_;
};

// Scales `grad` so its L2 norm is at most max_norm; returns the norm before
// clipping.
template <class Vector>
double clip_grad_norm(Vector& grad, double max_norm) {
  const double norm = static_cast<double>(grad.norm());
  if (max_norm > 0.0 && norm > max_norm) grad *= static_cast<typename Vector::Scalar>(max_norm / (norm + 1e-6));
  return norm;
}

// In-place (a - mean) / (std + 1e-8) with the unbiased standard deviation.
inline void normalize_advantages(std::vector<double>& adv) {
  const double n = static_cast<double>(adv.size());
  if (adv.size() < 2) {
    for (double& a : adv) a = 0.0;
    return;
  }
  const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / n;
  double var = 0.0;
  for (double a : adv) var += (a - mean) * (a - mean);
  const double sd = std::sqrt(var / (n - 1.0));
  for (double& a : adv) a = (a - mean) / (sd + 1e-8);
}

// Clipped-surrogate loss over one minibatch plus the gradient of the total
// loss w.r.t. the network outputs (action logits, bid logits, value).
//   policy  = -mean(min(r A, clip(r, 1-c, 1+c) A)), r = exp(logp - old_logp)
//   value   = mean((V - R)^2)
//   total   = policy + value_coef * value - entropy_coef * entropy
template <class Scalar>
LossTerms ppo_loss(const typename ActorCritic<Scalar>::Pass& pass, std::span<const int> actions,
                   std::span<const int> bids, std::span<const double> old_log_prob,
                   std::span<const double> advantages, std::span<const double> returns,
                   const PpoCoefficients& coef, typename ActorCritic<Scalar>::Matrix& d_action,
                   typename ActorCritic<Scalar>::Matrix& d_bid, typename ActorCritic<Scalar>::RowVector& d_value) {
  const int n = pass.batch;
  const int na = static_cast<int>(pass.action_logits.rows());
  const int nb = static_cast<int>(pass.bid_logits.rows());
  d_action.setZero(na, n);
  d_bid.setZero(nb, n);
  d_value.setZero(n);
  LossTerms out;
  if (n == 0) return out;
  const double inv_n = 1.0 / n;

  std::vector<double> pa(na), la(na), pb(nb), lb(nb);
  auto log_softmax = [](const auto& col, std::vector<double>& logp, std::vector<double>& p) {
    double top = static_cast<double>(col(0));
    for (Eigen::Index i = 1; i < col.size(); ++i) top = std::max(top, static_cast<double>(col(i)));
    double z = 0.0;
    for (Eigen::Index i = 0; i < col.size(); ++i) z += std::exp(static_cast<double>(col(i)) - top);
    const double lz = top + std::log(z);
    double h = 0.0;
    for (Eigen::Index i = 0; i < col.size(); ++i) {
      logp[i] = static_cast<double>(col(i)) - lz;
      p[i] = std::exp(logp[i]);
      h -= p[i] * logp[i];
    }
    return h;
  };

  for (int k = 0; k < n; ++k) {
    const double ha = log_softmax(pass.action_logits.col(k), la, pa);
    const double hb = log_softmax(pass.bid_logits.col(k), lb, pb);
    const double logp = la[actions[k]] + lb[bids[k]];
    const double log_ratio = logp - old_log_prob[k];
    const double ratio = std::exp(log_ratio);
    const double adv = advantages[k];
    const double clipped = std::clamp(ratio, 1.0 - coef.clip_coef, 1.0 + coef.clip_coef);
    const double unclipped_term = -adv * ratio;
    const double clipped_term = -adv * clipped;
    out.policy += std::max(unclipped_term, clipped_term) * inv_n;
    out.entropy += (ha + hb) * inv_n;
    const double v = static_cast<double>(pass.value(k));
    const double err = v - returns[k];
    out.value += err * err * inv_n;
    out.clip_frac += (std::abs(ratio - 1.0) > coef.clip_coef ? 1.0 : 0.0) * inv_n;
    out.approx_kl += ((ratio - 1.0) - log_ratio) * inv_n;

    // d policy / d logp: the unclipped branch carries the gradient.
    const double g_logp = unclipped_term >= clipped_term ? -adv * ratio * inv_n : 0.0;
    const double g_ent = -coef.entropy_coef * inv_n;
    for (int i = 0; i < na; ++i) {
      const double onehot = i == actions[k] ? 1.0 : 0.0;
      const double d_entropy = -pa[i] * (la[i] + ha);
      d_action(i, k) = static_cast<Scalar>(g_logp * (onehot - pa[i]) + g_ent * d_entropy);
    }
    for (int i = 0; i < nb; ++i) {
      const double onehot = i == bids[k] ? 1.0 : 0.0;
      const double d_entropy = -pb[i] * (lb[i] + hb);
      d_bid(i, k) = static_cast<Scalar>(g_logp * (onehot - pb[i]) + g_ent * d_entropy);
    }
    d_value(k) = static_cast<Scalar>(coef.value_coef * 2.0 * err * inv_n);
  }
  out.total = out.policy + coef.value_coef * out.value - coef.entropy_coef * out.entropy;
  return out;
}

struct UpdateConfig {
  PpoCoefficients coef;
  int epochs = 4;
  int num_minibatches = 4;
  double max_grad_norm = 0.5;
  double target_kl = 0.0;  // <= 0 disables early stopping
};

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_frac = 0.0;
  double approx_kl = 0.0;
  double grad_norm = 0.0;
  int minibatches = 0;
  bool early_stopped = false;
};

struct MinibatchData {
  std::vector<int> actions;
  std::vector<int> bids;
  std::vector<double> old_log_prob;
  std::vector<double> advantages;
  std::vector<double> returns;
  ObservationBatch obs;
};

inline MinibatchData gather_minibatch(const RolloutBuffer& buf, std::span<const int> idx) {
  MinibatchData mb;
  buf.gather(idx, mb.obs);
  for (int i : idx) {
    mb.actions.push_back(buf.action[i]);
    mb.bids.push_back(buf.bid[i]);
    mb.old_log_prob.push_back(buf.log_prob[i]);
    mb.advantages.push_back(buf.advantages[i]);
    mb.returns.push_back(buf.returns[i]);
  }
  normalize_advantages(mb.advantages);
  return mb;
}

inline std::vector<int> valid_entries(const RolloutBuffer& buf) {
  std::vector<int> idx;
  idx.reserve(buf.valid.size());
  for (int i = 0; i < buf.entries(); ++i) {
    if (buf.valid[i]) idx.push_back(i);
  }
  return idx;
}

// Loss of the current network on the given entries (advantages normalized
// over the whole set).
template <class Scalar>
LossTerms evaluate_loss(const ActorCritic<Scalar>& net, const RolloutBuffer& buf, std::span<const int> idx,
                        const PpoCoefficients& coef) {
  const MinibatchData mb = gather_minibatch(buf, idx);
  const auto pass = net.forward(mb.obs);
  typename ActorCritic<Scalar>::Matrix da, db;
  typename ActorCritic<Scalar>::RowVector dv;
  return ppo_loss<Scalar>(pass, mb.actions, mb.bids, mb.old_log_prob, mb.advantages, mb.returns, coef, da, db,
                          dv);
}

// Epochs of shuffled minibatch updates over the pooled per-agent entries.
template <class Scalar>
UpdateStats ppo_update(ActorCritic<Scalar>& net, Adam<Scalar>& opt, const RolloutBuffer& buf,
                       const UpdateConfig& cfg, double lr, Rng& rng) {
  std::vector<int> idx = valid_entries(buf);
  UpdateStats stats;
  if (idx.empty()) return stats;
  const int n = static_cast<int>(idx.size());
  const int parts = std::clamp(cfg.num_minibatches, 1, n);
  typename ActorCritic<Scalar>::Matrix da, db;
  typename ActorCritic<Scalar>::RowVector dv;
  typename ActorCritic<Scalar>::Vector grad(static_cast<Eigen::Index>(net.parameter_count()));

  for (int epoch = 0; epoch < cfg.epochs && !stats.early_stopped; ++epoch) {
    std::shuffle(idx.begin(), idx.end(), rng);
    for (int p = 0; p < parts; ++p) {
      const int lo = static_cast<int>(static_cast<long long>(n) * p / parts);
      const int hi = static_cast<int>(static_cast<long long>(n) * (p + 1) / parts);
      const std::span<const int> slice(idx.data() + lo, static_cast<std::size_t>(hi - lo));
      const MinibatchData mb = gather_minibatch(buf, slice);
      const auto pass = net.forward(mb.obs);
      const LossTerms loss = ppo_loss<Scalar>(pass, mb.actions, mb.bids, mb.old_log_prob, mb.advantages,
                                              mb.returns, cfg.coef, da, db, dv);
      if (!std::isfinite(loss.total)) {
        std::ostringstream msg;
        msg << "non-finite PPO loss (policy " << loss.policy << ", value " << loss.value << ", entropy "
            << loss.entropy << ") at epoch " << epoch << ", minibatch " << p;
        throw NumericalError(msg.str());
      }
      grad.setZero();
      net.backward(pass, &da, &db, &dv, grad);
      stats.grad_norm = clip_grad_norm(grad, cfg.max_grad_norm);
      opt.step(net.params(), grad, lr);

      stats.policy_loss += loss.policy;
      stats.value_loss += loss.value;
      stats.entropy += loss.entropy;
      stats.clip_frac += loss.clip_frac;
      stats.approx_kl += loss.approx_kl;
      stats.minibatches += 1;
      if (cfg.target_kl > 0.0 && loss.approx_kl > cfg.target_kl) {
        stats.early_stopped = true;
        break;
      }
    }
  }
  const double k = std::max(1, stats.minibatches);
  stats.policy_loss /= k;
  stats.value_loss /= k;
  stats.entropy /= k;
  stats.clip_frac /= k;
  stats.approx_kl /= k;
  return stats;
}

}  // namespace bidrl
