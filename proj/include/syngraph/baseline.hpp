#pragma once

#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "syngraph/error.hpp"
#include "syngraph/metrics.hpp"
#include "syngraph/review.hpp"

namespace syngraph {

// Running per-user rating history plus global class counts.
struct PredictorState {
  struct UserHistory {
    long long sum = 0;
    long long count = 0;
  };

  std::map<std::string, UserHistory> users;
  std::array<long long, 5> class_counts{};  // index r-1
  std::optional<Timestamp> last_timestamp;

  // Most frequent rating so far; ties go to the higher rating. 5 before any data.
  Rating global_mode() const {
    Rating best = 5;
    long long best_count = -1;
    for (Rating r = 5; r >= 1; --r) {
      if (class_counts[static_cast<std::size_t>(r - 1)] > best_count) {
        best = r;
        best_count = class_counts[static_cast<std::size_t>(r - 1)];
      }
    }
    return best;
  }

  Rating predict(const std::string& user) const {
    auto it = users.find(user);
    if (it == users.end() || it->second.count == 0) return global_mode();
    // Round half up on the exact fraction sum/count.
    long long q = (2 * it->second.sum + it->second.count) / (2 * it->second.count);
    return static_cast<Rating>(q);
  }

  void update(const ReviewEvent& e) {
    if (last_timestamp && e.timestamp < *last_timestamp) {
      throw Error(Errc::OutOfOrderEvent, std::to_string(e.timestamp) + " after " + std::to_string(*last_timestamp));
    }
    if (e.rating < 1 || e.rating > 5) throw Error(Errc::RatingOutOfRange, std::to_string(e.rating));
    auto& h = users[e.user_id];
    h.sum += e.rating;
    ++h.count;
    ++class_counts[static_cast<std::size_t>(e.rating - 1)];
    last_timestamp = e.timestamp;
  }
};

// Predicts from history only, then learns the true rating.
inline Rating predict_then_update(PredictorState& state, const ReviewEvent& e) {
  if (state.last_timestamp && e.timestamp < *state.last_timestamp) {
    throw Error(Errc::OutOfOrderEvent, std::to_string(e.timestamp) + " after " + std::to_string(*state.last_timestamp));
  }
  Rating p = state.predict(e.user_id);
  state.update(e);
  return p;
}

struct PrequentialResult {
  std::vector<Rating> predicted;
  std::vector<Rating> gold;
  MetricsReport metrics;
};

// Warms the predictor on `history`, then predicts each event of `test` in
// order. Only original test events are scored.
inline PrequentialResult prequential(const ReviewStream& history, const ReviewStream& test) {
  PredictorState state;
  for (const auto& e : history.events()) state.update(e);
  PrequentialResult out;
  for (const auto& e : test.events()) {
    Rating p = predict_then_update(state, e);
    if (e.provenance.is_synthesized()) continue;
    out.predicted.push_back(p);
    out.gold.push_back(e.rating);
  }
  if (out.gold.empty()) throw Error(Errc::EmptyInput, "test stream has no original events");
  out.metrics = evaluate_predictions(out.predicted, out.gold);
  return out;
}

struct Comparison {
  MetricsReport raw;
  MetricsReport augmented;
  double rmse_reduction = 0.0;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["raw"] = raw.to_json();
    j["augmented"] = augmented.to_json();
    j["rmse_reduction_percent"] = rmse_reduction;
    return j;
  }
};

// Same test events, two warm-up histories: the raw training stream and its
// augmented version.
inline Comparison compare_raw_augmented(const ReviewStream& raw_train, const ReviewStream& aug_train,
                                        const ReviewStream& test) {
  Comparison c;
  c.raw = prequential(raw_train, test).metrics;
  c.augmented = prequential(aug_train, test).metrics;
  // A perfect raw baseline leaves nothing to reduce.
  c.rmse_reduction = c.raw.rmse > 0.0 ? syngraph::rmse_reduction(c.raw.rmse, c.augmented.rmse) : 0.0;
  return c;
}

}  // namespace syngraph
