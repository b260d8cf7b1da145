#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <json.hpp>

#include "syngraph/error.hpp"
#include "syngraph/review.hpp"
#include "syngraph/sparsity.hpp"

namespace syngraph {

// Fraction of the series' intervals with no interactions.
inline double interpolation_factor(const ActivitySeries& series) {
  if (series.counts.empty()) throw Error(Errc::InvalidArgument, "T must be >= 1");
  auto zeros = std::count(series.counts.begin(), series.counts.end(), 0);
  return static_cast<double>(zeros) / static_cast<double>(series.counts.size());
}

// An empty interval on a sparse user's timeline.
struct InterpolationSlot {
  std::string user_id;
  std::size_t interval = 0;
  Timestamp timestamp = 0;  // interval midpoint
  SparsityCategory category = SparsityCategory::Normal;

  friend bool operator==(const InterpolationSlot&, const InterpolationSlot&) = default;
};

struct InterpolationConfig {
  int interval_count = 10;
  std::size_t min_interactions = 10;
  // Only slots in the first ceil(front_fraction * T) intervals are eligible.
  double front_fraction = 1.0;
};

inline void validate(const InterpolationConfig& cfg) {
  if (cfg.interval_count < 1) throw Error(Errc::InvalidConfig, "interval_count must be >= 1");
  if (cfg.min_interactions < 1) throw Error(Errc::InvalidConfig, "min_interactions must be >= 1");
  if (!(cfg.front_fraction >= 0.0 && cfg.front_fraction <= 1.0)) {
    throw Error(Errc::InvalidConfig, "front_fraction must lie in [0, 1]");
  }
}

inline std::size_t eligible_interval_count(const InterpolationConfig& cfg) {
  // The epsilon absorbs products like 0.6 * 10 that land a hair above 6.
  double x = cfg.front_fraction * static_cast<double>(cfg.interval_count);
  return static_cast<std::size_t>(std::ceil(x - 1e-9));
}

// One slot per zero-count interval of every non-Normal user, ordered by user
// then interval.
inline std::vector<InterpolationSlot> find_slots(const ReviewStream& stream,
                                                 const std::vector<SparsityAssignment>& assignments,
                                                 int interval_count) {
  if (interval_count < 1) throw Error(Errc::InvalidArgument, "T must be >= 1");
  std::vector<InterpolationSlot> slots;
  if (stream.empty()) return slots;
  const Span span = stream.span();
  auto timestamps = user_timestamps(stream);

  std::map<std::string, SparsityCategory> category;
  for (const auto& a : assignments) category[a.user_id] = a.category;
  for (const auto& [user, ts] : timestamps) {
    if (!category.count(user)) throw Error(Errc::InvalidArgument, "no assignment for user " + user);
  }

  for (const auto& [user, cat] : category) {
    if (!is_sparse_category(cat)) continue;
    auto it = timestamps.find(user);
    std::vector<Timestamp> none;
    const auto& ts = it == timestamps.end() ? none : it->second;
    auto series = bucketize(user, ts, span, interval_count);
    for (std::size_t t = 0; t < series.counts.size(); ++t) {
      if (series.counts[t] != 0) continue;
      slots.push_back({user, t, bucket_midpoint(t, span, series.counts.size()), cat});
    }
  }
  return slots;
}

// Slots that will actually be filled: per user, eligible slots earliest first
// until the user reaches min_interactions or runs out of slots.
inline std::vector<InterpolationSlot> plan_fills(const ReviewStream& stream,
                                                 const std::vector<InterpolationSlot>& slots,
                                                 const InterpolationConfig& cfg) {
  validate(cfg);
  std::map<std::string, std::size_t> original;
  for (const auto& e : stream.events()) ++original[e.user_id];

  std::map<std::string, std::vector<const InterpolationSlot*>> by_user;
  for (const auto& s : slots) by_user[s.user_id].push_back(&s);

  const std::size_t eligible = eligible_interval_count(cfg);
  std::vector<InterpolationSlot> plan;
  for (auto& [user, list] : by_user) {
    std::stable_sort(list.begin(), list.end(), [](const auto* a, const auto* b) {
      return a->interval < b->interval;
    });
    std::size_t have = original[user];
    std::size_t need = have < cfg.min_interactions ? cfg.min_interactions - have : 0;
    std::set<Timestamp> used;
    for (const auto* s : list) {
      if (need == 0) break;
      if (s->interval >= eligible) continue;
      // On spans shorter than 2T seconds two midpoints can round together.
      if (!used.insert(s->timestamp).second) continue;
      plan.push_back(*s);
      --need;
    }
  }
  return plan;
}

struct UserLedgerEntry {
  std::string user_id;
  SparsityCategory category = SparsityCategory::Normal;
  std::size_t original_count = 0;
  std::size_t slots_found = 0;
  std::size_t slots_filled = 0;
};

struct InterpolationLedger {
  int interval_count = 10;
  double front_fraction = 1.0;
  std::size_t min_interactions = 10;
  // Per-category count of empty intervals, i.e. the total interpolation need.
  std::map<SparsityCategory, std::size_t> total_found;
  std::map<SparsityCategory, std::size_t> total_filled;
  std::vector<UserLedgerEntry> users;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["interval_count"] = interval_count;
    j["front_fraction"] = front_fraction;
    j["min_interactions"] = min_interactions;
    for (auto c : kAllCategories) {
      if (!is_sparse_category(c)) continue;
      std::string name(to_string(c));
      j["total_found"][name] = total_found.count(c) ? total_found.at(c) : 0;
      j["total_filled"][name] = total_filled.count(c) ? total_filled.at(c) : 0;
    }
    j["users"] = nlohmann::json::array();
    for (const auto& u : users) {
      j["users"].push_back({{"user_id", u.user_id},
                            {"category", std::string(to_string(u.category))},
                            {"original_count", u.original_count},
                            {"slots_found", u.slots_found},
                            {"slots_filled", u.slots_filled}});
    }
    return j;
  }
};

struct AugmentedStream {
  ReviewStream stream;
  InterpolationLedger ledger;
};

// Merges one synthesized event per planned slot into the stream. `slots` is
// the full output of find_slots; the fill plan is derived from it and `cfg`.
// Original events keep their bytes and relative order; at equal timestamps
// they precede synthesized ones.
inline AugmentedStream interpolate_dataset(const ReviewStream& stream,
                                           const std::vector<InterpolationSlot>& slots,
                                           const std::vector<ReviewEvent>& synthesized,
                                           const InterpolationConfig& cfg) {
  validate(cfg);
  auto plan = plan_fills(stream, slots, cfg);

  using Key = std::pair<std::string, Timestamp>;
  std::map<Key, const InterpolationSlot*> planned;
  for (const auto& s : plan) planned[{s.user_id, s.timestamp}] = &s;

  std::map<Key, const ReviewEvent*> matched;
  for (const auto& e : synthesized) {
    if (!e.provenance.is_synthesized()) {
      throw Error(Errc::InvalidArgument, "synthesized list contains an original event");
    }
    Key key{e.user_id, e.timestamp};
    if (!planned.count(key)) {
      throw Error(Errc::InvalidArgument,
                  "synthesized event for " + e.user_id + " at " + std::to_string(e.timestamp) +
                      " matches no planned slot");
    }
    if (!matched.emplace(key, &e).second) {
      throw Error(Errc::InvalidArgument, "two synthesized events for one slot of " + e.user_id);
    }
  }
  for (const auto& [key, slot] : planned) {
    if (!matched.count(key)) {
      throw Error(Errc::MissingSynthesis, slot->user_id + " interval " + std::to_string(slot->interval));
    }
  }

  std::vector<ReviewEvent> merged = stream.events();
  std::vector<ReviewEvent> added;
  for (const auto& [key, e] : matched) added.push_back(*e);
  std::stable_sort(added.begin(), added.end(), [](const ReviewEvent& a, const ReviewEvent& b) {
    return std::tie(a.timestamp, a.user_id) < std::tie(b.timestamp, b.user_id);
  });
  merged.insert(merged.end(), added.begin(), added.end());

  AugmentedStream out;
  std::optional<Span> span;
  if (stream.has_span()) span = stream.span();
  out.stream = ReviewStream(std::move(merged), stream.interval_count(), span);

  auto& ledger = out.ledger;
  ledger.interval_count = cfg.interval_count;
  ledger.front_fraction = cfg.front_fraction;
  ledger.min_interactions = cfg.min_interactions;
  std::map<std::string, std::size_t> original;
  for (const auto& e : stream.events()) ++original[e.user_id];
  std::map<std::string, UserLedgerEntry> per_user;
  for (const auto& s : slots) {
    auto& u = per_user[s.user_id];
    u.user_id = s.user_id;
    u.category = s.category;
    u.original_count = original[s.user_id];
    ++u.slots_found;
    ++ledger.total_found[s.category];
  }
  for (const auto& s : plan) {
    ++per_user[s.user_id].slots_filled;
    ++ledger.total_filled[s.category];
  }
  for (auto& [id, u] : per_user) ledger.users.push_back(std::move(u));
  return out;
}

}  // namespace syngraph
