#pragma once

#include <algorithm>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bidrl/errors.hpp"
#include "bidrl/rng.hpp"

namespace bidrl {

enum class PenaltyModel { WinnerPays, AllPay };

inline std::string_view to_string(PenaltyModel model) {
  return model == PenaltyModel::WinnerPays ? "winner-pays" : "all-pay";
}

inline PenaltyModel penalty_model_from_string(std::string_view name) {
  if (name == "winner-pays" || name == "WinnerPays") return PenaltyModel::WinnerPays;
  if (name == "all-pay" || name == "AllPay") return PenaltyModel::AllPay;
  throw ConfigError("unknown penalty model '" + std::string(name) +
                    "' (expected winner-pays or all-pay)");
}

struct AuctionParams {
  int tau = 5;          // bidding interval (action window), steps
  int beta = 6;         // maximum bid
  double rho = 0.1;     // bid penalty coefficient
  PenaltyModel penalty_model = PenaltyModel::AllPay;

  void validate() const {
    if (tau < 1) throw InvalidParameter("auction.tau must be >= 1, got " + std::to_string(tau));
    if (beta < 0) throw InvalidParameter("auction.beta must be >= 0, got " + std::to_string(beta));
    if (!(rho >= 0.0 && rho < 1.0)) {
      throw InvalidParameter("auction.rho must lie in [0, 1), got " + std::to_string(rho));
    }
  }

  int bid_levels() const { return beta + 1; }
};

inline void check_bid(int bid, int beta, int agent) {
  if (bid < 0 || bid > beta) {
    throw BidOutOfRange("agent " + std::to_string(agent) + " bid " + std::to_string(bid) +
                        " outside [0, " + std::to_string(beta) + "]");
  }
}

// Positions of the maximal bids, ascending.
inline std::vector<int> highest_bidders(std::span<const int> bids) {
  std::vector<int> top;
  if (bids.empty()) return top;
  const int best = *std::max_element(bids.begin(), bids.end());
  for (int i = 0; i < static_cast<int>(bids.size()); ++i) {
    if (bids[i] == best) top.push_back(i);
  }
  return top;
}

// Index of the winning bid. Ties are broken uniformly at random; a unique
// maximum consumes no randomness.
inline int resolve_auction(std::span<const int> bids, int beta, Rng& rng) {
  if (bids.empty()) throw EmptyGame("auction with no bidders");
  for (int i = 0; i < static_cast<int>(bids.size()); ++i) check_bid(bids[i], beta, i);
  const std::vector<int> top = highest_bidders(bids);
  if (top.size() == 1) return top.front();
  return top[uniform_int(rng, 0, static_cast<int>(top.size()) - 1)];
}

}  // namespace bidrl
