#pragma once

#include <cmath>
#include <limits>
#include <span>

#include "bidrl/errors.hpp"
#include "bidrl/rng.hpp"

namespace bidrl {

struct CategoricalDraw {
  int index = 0;
  double log_prob = 0.0;
  double entropy = 0.0;
};

template <class Scalar>
double log_sum_exp(std::span<const Scalar> logits) {
  double best = -std::numeric_limits<double>::infinity();
  for (Scalar v : logits) {
    if (!std::isfinite(static_cast<double>(v))) throw NumericalError("non-finite logit");
    best = std::max(best, static_cast<double>(v));
  }
  double sum = 0.0;
  for (Scalar v : logits) sum += std::exp(static_cast<double>(v) - best);
  return best + std::log(sum);
}

template <class Scalar>
double categorical_log_prob(std::span<const Scalar> logits, int index) {
  return static_cast<double>(logits[index]) - log_sum_exp(logits);
}

template <class Scalar>
double categorical_entropy(std::span<const Scalar> logits) {
  const double lse = log_sum_exp(logits);
  double h = 0.0;
  for (Scalar v : logits) {
    const double lp = static_cast<double>(v) - lse;
    h -= std::exp(lp) * lp;
  }
  return h;
}

// Inverse-CDF draw from softmax(logits); one uniform per call.
template <class Scalar>
CategoricalDraw sample_categorical(std::span<const Scalar> logits, Rng& rng) {
  const double lse = log_sum_exp(logits);
  const double u = uniform01(rng);
  const int n = static_cast<int>(logits.size());
  double cdf = 0.0;
  int pick = n - 1;
  for (int i = 0; i < n; ++i) {
    cdf += std::exp(static_cast<double>(logits[i]) - lse);
    if (u < cdf) {
      pick = i;
      break;
    }
  }
  return {pick, static_cast<double>(logits[pick]) - lse, categorical_entropy(logits)};
}

// Highest logit, ties to the lowest index.
template <class Scalar>
int argmax(std::span<const Scalar> logits) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(logits.size()); ++i) {
    if (logits[i] > logits[best]) best = i;
  }
  return best;
}

struct PolicySample {
  int action = 0;
  int bid = 0;
  double log_prob = 0.0;
  double entropy = 0.0;
};

// Factored (action, bid) draw: log-probabilities and entropies add.
template <class Scalar>
PolicySample sample_policy(std::span<const Scalar> action_logits, std::span<const Scalar> bid_logits,
                           Rng& rng) {
  const CategoricalDraw a = sample_categorical(action_logits, rng);
  const CategoricalDraw b = sample_categorical(bid_logits, rng);
  return {a.index, b.index, a.log_prob + b.log_prob, a.entropy + b.entropy};
}

}  // namespace bidrl
