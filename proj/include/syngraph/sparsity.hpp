#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "syngraph/detail/hash.hpp"
#include "syngraph/error.hpp"
#include "syngraph/graph.hpp"
#include "syngraph/review.hpp"

namespace syngraph {

inline constexpr Timestamp kSecondsPerDay = 86400;

// Per-interval review counts of one user over a stream's span.
struct ActivitySeries {
  std::string user_id;
  std::vector<std::int64_t> counts;
  // Nominal bucket width in seconds (span length / T).
  double interval = 0.0;

  std::size_t interval_count() const { return counts.size(); }
};

// Index of the interval holding `t` when `span` is cut into `buckets` equal
// parts. Intervals are left-open, so a timestamp on a boundary belongs to the
// earlier interval; span.begin goes to the first and span.end to the last.
inline std::size_t bucket_of(Timestamp t, const Span& span, std::size_t buckets) {
  if (buckets == 0) throw Error(Errc::InvalidArgument, "bucket count must be >= 1");
  if (!span.contains(t)) throw Error(Errc::InvalidArgument, "timestamp outside span");
  Timestamp len = span.length();
  if (len == 0) return 0;
  // ceil((t - begin) * T / len) - 1 in exact 128-bit integer arithmetic.
  auto num = static_cast<__int128>(t - span.begin) * static_cast<__int128>(buckets);
  auto idx = (num + len - 1) / len - 1;
  return idx < 0 ? 0 : static_cast<std::size_t>(idx);
}

// Midpoint of interval `idx`, floored to whole seconds.
inline Timestamp bucket_midpoint(std::size_t idx, const Span& span, std::size_t buckets) {
  auto num = static_cast<__int128>(span.length()) * static_cast<__int128>(2 * idx + 1);
  return span.begin + static_cast<Timestamp>(num / (2 * static_cast<__int128>(buckets)));
}

inline ActivitySeries bucketize(std::string user_id, std::span<const Timestamp> timestamps,
                                const Span& span, int interval_count) {
  if (interval_count < 1) throw Error(Errc::InvalidArgument, "T must be >= 1");
  ActivitySeries s;
  s.user_id = std::move(user_id);
  s.counts.assign(static_cast<std::size_t>(interval_count), 0);
  s.interval = static_cast<double>(span.length()) / interval_count;
  for (Timestamp t : timestamps) {
    ++s.counts[bucket_of(t, span, s.counts.size())];
  }
  return s;
}

// Per-user timestamps in stream order.
inline std::map<std::string, std::vector<Timestamp>> user_timestamps(const ReviewStream& stream) {
  std::map<std::string, std::vector<Timestamp>> out;
  for (const auto& e : stream.events()) out[e.user_id].push_back(e.timestamp);
  return out;
}

inline ActivitySeries activity_series(const ReviewStream& stream, const std::string& user,
                                      int interval_count) {
  std::vector<Timestamp> ts;
  for (const auto& e : stream.events()) {
    if (e.user_id == user) ts.push_back(e.timestamp);
  }
  if (ts.empty()) throw Error(Errc::UnknownUser, user);
  return bucketize(user, ts, stream.span(), interval_count);
}

// Population variance (divisor T) of the per-interval counts.
inline double interaction_variance(const ActivitySeries& series) {
  if (series.counts.empty()) throw Error(Errc::InvalidArgument, "T must be >= 1");
  double n = static_cast<double>(series.counts.size());
  double mean = 0.0;
  for (auto c : series.counts) mean += static_cast<double>(c);
  mean /= n;
  double var = 0.0;
  for (auto c : series.counts) {
    double d = static_cast<double>(c) - mean;
    var += d * d;
  }
  return var / n;
}

// Summary statistics of a user's per-day review counts.
struct ActivityFeatures {
  double mean = 0.0;
  double std_dev = 0.0;
  double min = 0.0;
  double max = 0.0;

  std::vector<double> as_vector() const { return {mean, std_dev, min, max}; }
};

inline ActivityFeatures summarize_counts(std::span<const std::int64_t> counts) {
  if (counts.empty()) throw Error(Errc::InvalidArgument, "no counts to summarize");
  ActivityFeatures f;
  f.min = std::numeric_limits<double>::infinity();
  f.max = -std::numeric_limits<double>::infinity();
  for (auto c : counts) {
    double v = static_cast<double>(c);
    f.mean += v;
    f.min = std::min(f.min, v);
    f.max = std::max(f.max, v);
  }
  f.mean /= static_cast<double>(counts.size());
  double var = 0.0;
  for (auto c : counts) {
    double d = static_cast<double>(c) - f.mean;
    var += d * d;
  }
  f.std_dev = std::sqrt(var / static_cast<double>(counts.size()));
  return f;
}

// Features over calendar-day buckets spanning the whole stream.
inline ActivityFeatures daily_features(std::span<const Timestamp> timestamps, const Span& span) {
  auto days = static_cast<std::size_t>(span.length() / kSecondsPerDay) + 1;
  std::vector<std::int64_t> counts(days, 0);
  for (Timestamp t : timestamps) {
    ++counts[static_cast<std::size_t>((t - span.begin) / kSecondsPerDay)];
  }
  return summarize_counts(counts);
}

struct KMeansResult {
  std::vector<std::size_t> assignments;
  // Cluster means in the caller's (unstandardized) units. An empty cluster
  // reports the raw point nearest its last center.
  std::vector<std::vector<double>> centroids;
  std::vector<std::size_t> sizes;
  int iterations = 0;
  bool converged = false;
};

namespace detail {

inline double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double x = a[i] - b[i];
    d += x * x;
  }
  return d;
}

inline std::size_t nearest(const std::vector<double>& p,
                           const std::vector<std::vector<double>>& centers) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centers.size(); ++c) {
    double d = squared_distance(p, centers[c]);
    if (d < best_d) {  // strict: ties go to the lowest index
      best_d = d;
      best = c;
    }
  }
  return best;
}

// Column-wise z-scores; zero-variance columns become 0.
inline std::vector<std::vector<double>> standardize(const std::vector<std::vector<double>>& pts) {
  std::size_t dim = pts.front().size();
  double n = static_cast<double>(pts.size());
  std::vector<double> mean(dim, 0.0), sd(dim, 0.0);
  for (const auto& p : pts)
    for (std::size_t j = 0; j < dim; ++j) mean[j] += p[j] / n;
  for (const auto& p : pts)
    for (std::size_t j = 0; j < dim; ++j) sd[j] += (p[j] - mean[j]) * (p[j] - mean[j]) / n;
  for (auto& s : sd) s = std::sqrt(s);
  auto out = pts;
  for (auto& p : out)
    for (std::size_t j = 0; j < dim; ++j) p[j] = sd[j] > 0.0 ? (p[j] - mean[j]) / sd[j] : 0.0;
  return out;
}

}  // namespace detail

// Lloyd's algorithm on z-scored features from a seeded k-means++ start.
// Stops when an assignment pass changes nothing or after max_iter updates.
// An emptied cluster is reseeded at the point farthest from its centroid; if
// every point already sits on its centroid the cluster is left empty.
inline KMeansResult kmeans_fit(const std::vector<std::vector<double>>& points, std::size_t k,
                               std::uint64_t seed, int max_iter = 100) {
  if (k == 0) throw Error(Errc::InvalidArgument, "k must be >= 1");
  if (max_iter < 1) throw Error(Errc::InvalidArgument, "max_iter must be >= 1");
  if (points.empty() || k > points.size()) {
    throw Error(Errc::DegenerateInput, "k=" + std::to_string(k) + " exceeds " +
                                           std::to_string(points.size()) + " points");
  }
  std::size_t dim = points.front().size();
  for (const auto& p : points) {
    if (p.size() != dim) throw Error(Errc::InvalidArgument, "feature dimensions differ");
  }

  const auto z = detail::standardize(points);
  const std::size_t n = z.size();
  std::mt19937_64 rng(seed);

  // k-means++ seeding.
  std::vector<std::vector<double>> centers;
  centers.push_back(z[detail::draw_index(rng, n)]);
  std::vector<double> d2(n);
  while (centers.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = detail::squared_distance(z[i], centers[detail::nearest(z[i], centers)]);
      total += d2[i];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      double r = detail::draw_unit(rng) * total;
      double acc = 0.0;
      pick = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (d2[i] == 0.0) continue;
        acc += d2[i];
        if (r < acc) {
          pick = i;
          break;
        }
      }
      if (pick == n) {  // rounding at the tail; take the last eligible point
        for (std::size_t i = n; i-- > 0;) {
          if (d2[i] > 0.0) {
            pick = i;
            break;
          }
        }
      }
    }
    centers.push_back(z[pick]);
  }

  KMeansResult res;
  res.assignments.assign(n, k);  // k = unassigned sentinel
  for (int iter = 1; iter <= max_iter + 1; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t c = detail::nearest(z[i], centers);
      if (c != res.assignments[i]) {
        res.assignments[i] = c;
        changed = true;
      }
    }
    if (!changed) {
      res.converged = true;
      break;
    }
    if (iter > max_iter) break;
    res.iterations = iter;

    std::vector<std::vector<double>> sums(k, std::vector<double>(dim, 0.0));
    std::vector<std::size_t> sizes(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++sizes[res.assignments[i]];
      for (std::size_t j = 0; j < dim; ++j) sums[res.assignments[i]][j] += z[i][j];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (sizes[c] == 0) continue;
      for (std::size_t j = 0; j < dim; ++j) centers[c][j] = sums[c][j] / static_cast<double>(sizes[c]);
    }
    std::vector<bool> taken(n, false);
    for (std::size_t c = 0; c < k; ++c) {
      if (sizes[c] != 0) continue;
      std::size_t far = n;
      double far_d = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (taken[i]) continue;
        double d = detail::squared_distance(z[i], centers[res.assignments[i]]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      if (far == n) continue;  // nothing left to split off; tolerate the empty cluster
      taken[far] = true;
      centers[c] = z[far];
    }
  }

  res.sizes.assign(k, 0);
  res.centroids.assign(k, std::vector<double>(dim, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    ++res.sizes[res.assignments[i]];
    for (std::size_t j = 0; j < dim; ++j) res.centroids[res.assignments[i]][j] += points[i][j];
  }
  // An empty cluster reports the raw point nearest its standardized center.
  for (std::size_t c = 0; c < k; ++c) {
    if (res.sizes[c] > 0) {
      for (auto& v : res.centroids[c]) v /= static_cast<double>(res.sizes[c]);
    } else {
      res.centroids[c] = points[detail::nearest(centers[c], z)];
    }
  }
  return res;
}

struct SparsityConfig {
  std::size_t sparse_threshold = 5;
  std::size_t second_order_threshold = 5;
  std::size_t clusters = 4;
  std::uint64_t seed = 0;
  int max_iter = 100;
};

struct SparsityAssignment {
  std::string user_id;
  SparsityCategory category = SparsityCategory::Normal;
  ActivityFeatures features;
  std::size_t second_order_count = 0;
  std::size_t review_count = 0;
};

namespace detail {

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

// Sparse users (review_count <= sparse_threshold) split on second-order
// neighbor count: LongTail when |N2(u)| >= second_order_threshold, else
// Extreme. Everyone else is clustered on daily-activity features; clusters
// whose centroid std_dev exceeds the median centroid std_dev are MidTail.
// Output is sorted by user id.
inline std::vector<SparsityAssignment> categorize_users(const ReviewStream& stream,
                                                        const DynamicGraph& graph,
                                                        const SparsityConfig& cfg = {}) {
  if (cfg.sparse_threshold == 0 || cfg.second_order_threshold == 0 || cfg.clusters == 0) {
    throw Error(Errc::InvalidConfig, "sparsity thresholds must be positive");
  }
  std::vector<SparsityAssignment> out;
  if (stream.empty()) return out;
  const Span span = stream.span();

  std::vector<std::size_t> dense;
  for (const auto& [user, ts] : user_timestamps(stream)) {
    if (!graph.has_user(user)) throw Error(Errc::UnknownNode, "user " + user + " missing from graph");
    SparsityAssignment a;
    a.user_id = user;
    a.review_count = ts.size();
    a.features = daily_features(ts, span);
    a.second_order_count = graph.second_order_neighbors(user).size();
    if (a.review_count <= cfg.sparse_threshold) {
      a.category = a.second_order_count >= cfg.second_order_threshold ? SparsityCategory::LongTail
                                                                       : SparsityCategory::Extreme;
    } else {
      dense.push_back(out.size());
    }
    out.push_back(std::move(a));
  }
  if (dense.empty()) return out;

  if (dense.size() < cfg.clusters) {
    std::vector<double> sds;
    for (auto i : dense) sds.push_back(out[i].features.std_dev);
    double cut = detail::median(sds);
    for (auto i : dense) {
      out[i].category = out[i].features.std_dev > cut ? SparsityCategory::MidTail
                                                      : SparsityCategory::Normal;
    }
    return out;
  }

  std::vector<std::vector<double>> pts;
  for (auto i : dense) pts.push_back(out[i].features.as_vector());
  auto km = kmeans_fit(pts, cfg.clusters, cfg.seed, cfg.max_iter);
  std::vector<double> centroid_sd;
  for (std::size_t c = 0; c < cfg.clusters; ++c) {
    if (km.sizes[c] > 0) centroid_sd.push_back(km.centroids[c][1]);
  }
  double cut = detail::median(centroid_sd);
  for (std::size_t j = 0; j < dense.size(); ++j) {
    bool right = km.centroids[km.assignments[j]][1] > cut;
    out[dense[j]].category = right ? SparsityCategory::MidTail : SparsityCategory::Normal;
  }
  return out;
}

inline std::map<SparsityCategory, std::size_t> category_counts(
    const std::vector<SparsityAssignment>& assignments) {
  std::map<SparsityCategory, std::size_t> out;
  for (auto c : kAllCategories) out[c] = 0;
  for (const auto& a : assignments) ++out[a.category];
  return out;
}

// user_id,category,review_count,second_order_count,mean,std,min,max
inline void write_assignments_csv(std::ostream& out,
                                  const std::vector<SparsityAssignment>& assignments) {
  out << "user_id,category,review_count,second_order_count,mean,std,min,max\n";
  auto old = out.precision(10);
  for (const auto& a : assignments) {
    out << detail::csv_field(a.user_id) << ',' << to_string(a.category) << ',' << a.review_count << ','
        << a.second_order_count << ',' << a.features.mean << ',' << a.features.std_dev << ','
        << a.features.min << ',' << a.features.max << '\n';
  }
  out.precision(old);
}

}  // namespace syngraph
