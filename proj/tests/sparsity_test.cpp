#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "syngraph/sparsity.hpp"
#include "test_util.hpp"

using namespace syngraph;
using syngraph::testing::ev;

namespace {

std::vector<std::int64_t> counts_of(const ActivitySeries& s) { return s.counts; }

ActivitySeries series(std::vector<std::int64_t> counts) { return {"u", std::move(counts), 1.0}; }

// Two tight groups around (0,0) and (10,10); returns points and planted labels.
std::pair<std::vector<std::vector<double>>, std::vector<int>> planted(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-0.1, 0.1);
  std::vector<std::vector<double>> pts;
  std::vector<int> labels;
  for (int i = 0; i < 60; ++i) {
    int g = i % 2;
    pts.push_back({10.0 * g + jitter(rng), 10.0 * g + jitter(rng)});
    labels.push_back(g);
  }
  return {pts, labels};
}

bool same_partition(const std::vector<std::size_t>& a, const std::vector<int>& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a.size(); ++j) {
      if ((a[i] == a[j]) != (b[i] == b[j])) return false;
    }
  }
  return true;
}

}  // namespace

TEST(ActivitySeries, BucketsByInterval) {
  ReviewStream s({ev("u", "p", 5), ev("u", "p", 15), ev("u", "q", 15)}, 10, Span{0, 100});
  EXPECT_EQ(counts_of(activity_series(s, "u", 10)), (std::vector<std::int64_t>{1, 2, 0, 0, 0, 0, 0, 0, 0, 0}));
}

TEST(ActivitySeries, UserWithoutReviewsIsAllZeros) {
  auto s = bucketize("nobody", {}, Span{0, 100}, 10);
  EXPECT_EQ(s.counts, std::vector<std::int64_t>(10, 0));
  ReviewStream stream({ev("u", "p", 5)}, 10, Span{0, 100});
  EXPECT_THROW(activity_series(stream, "nobody", 10), Error);
}

TEST(ActivitySeries, BoundaryRules) {
  Span span{0, 100};
  EXPECT_EQ(bucket_of(100, span, 10), 9u);
  EXPECT_EQ(bucket_of(0, span, 10), 0u);
  EXPECT_EQ(bucket_of(10, span, 10), 0u);  // boundary goes to the earlier interval
  EXPECT_EQ(bucket_of(11, span, 10), 1u);
  EXPECT_EQ(bucket_of(7, Span{7, 7}, 10), 0u);
}

TEST(ActivitySeries, CountsSumToReviews) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<ReviewEvent> events;
    int n = 1 + static_cast<int>(rng() % 40);
    for (int i = 0; i < n; ++i) events.push_back(ev("u", "p", static_cast<Timestamp>(rng() % 100000)));
    ReviewStream s(events);
    int t = 1 + static_cast<int>(rng() % 12);
    auto a = activity_series(s, "u", t);
    EXPECT_EQ(a.counts.size(), static_cast<std::size_t>(t));
    std::int64_t sum = 0;
    for (auto c : a.counts) sum += c;
    EXPECT_EQ(sum, n);
  }
}

TEST(InteractionVariance, HandValues) {
  EXPECT_DOUBLE_EQ(interaction_variance(series({2, 2, 2})), 0.0);
  EXPECT_DOUBLE_EQ(interaction_variance(series({0, 4})), 4.0);
  EXPECT_DOUBLE_EQ(interaction_variance(series({1, 2, 3, 4})), 1.25);
}

TEST(InteractionVariance, ZeroExactlyWhenConstant) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::int64_t> c(1 + rng() % 10);
    for (auto& x : c) x = static_cast<std::int64_t>(rng() % 4);
    double v = interaction_variance(series(c));
    bool constant = std::all_of(c.begin(), c.end(), [&](auto x) { return x == c[0]; });
    EXPECT_GE(v, 0.0);
    EXPECT_EQ(v == 0.0, constant);
  }
}

TEST(DailyFeatures, SummarizesPerDayCounts) {
  Span span{0, 3 * kSecondsPerDay - 1};  // three days
  std::vector<Timestamp> ts{10, 20, 2 * kSecondsPerDay + 5};
  auto f = daily_features(ts, span);
  EXPECT_DOUBLE_EQ(f.mean, 1.0);
  EXPECT_DOUBLE_EQ(f.min, 0.0);
  EXPECT_DOUBLE_EQ(f.max, 2.0);
  EXPECT_NEAR(f.std_dev, std::sqrt(2.0 / 3.0), 1e-12);
}

TEST(KMeans, RecoversPlantedClustersAcrossSeeds) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto [pts, labels] = planted(seed);
    auto r = kmeans_fit(pts, 2, seed);
    EXPECT_TRUE(r.converged);
    EXPECT_TRUE(same_partition(r.assignments, labels)) << "seed " << seed;
  }
}

TEST(KMeans, SingleClusterCentroidIsMean) {
  std::vector<std::vector<double>> pts{{1, 2}, {3, 4}, {5, 9}};
  auto r = kmeans_fit(pts, 1, 0);
  ASSERT_EQ(r.centroids.size(), 1u);
  EXPECT_DOUBLE_EQ(r.centroids[0][0], 3.0);
  EXPECT_DOUBLE_EQ(r.centroids[0][1], 5.0);
  EXPECT_EQ(r.sizes[0], 3u);
}

TEST(KMeans, IdenticalPointsConvergeImmediately) {
  std::vector<std::vector<double>> pts(5, {2.0, 2.0});
  auto r = kmeans_fit(pts, 2, 1);
  EXPECT_TRUE(r.converged);
  EXPECT_LE(r.iterations, 1);
  EXPECT_EQ(r.sizes[0] + r.sizes[1], 5u);
  for (const auto& c : r.centroids) EXPECT_EQ(c, (std::vector<double>{2.0, 2.0}));
}

TEST(KMeans, DeterministicForSeed) {
  std::mt19937_64 rng(4);
  std::vector<std::vector<double>> pts;
  for (int i = 0; i < 100; ++i) pts.push_back({double(rng() % 100), double(rng() % 7), double(rng() % 3)});
  auto a = kmeans_fit(pts, 4, 77);
  auto b = kmeans_fit(pts, 4, 77);
  EXPECT_EQ(a.assignments, b.assignments);
  EXPECT_EQ(a.centroids, b.centroids);
}

TEST(KMeans, RejectsBadInput) {
  std::vector<std::vector<double>> pts{{1.0}, {2.0}};
  try {
    kmeans_fit(pts, 3, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DegenerateInput);
  }
  EXPECT_THROW(kmeans_fit(pts, 0, 0), Error);
  EXPECT_THROW(kmeans_fit({{1.0}, {1.0, 2.0}}, 1, 0), Error);
}

TEST(Categorize, SparseRules) {
  std::vector<ReviewEvent> events;
  // "lt" has 3 reviews on a product shared with ten others.
  for (int i = 0; i < 10; ++i) events.push_back(ev("n" + std::to_string(i), "hub", i));
  for (int i = 0; i < 3; ++i) events.push_back(ev("lt", "hub", 20 + i));
  events.push_back(ev("ex", "niche", 30));
  events.push_back(ev("ex", "niche2", 31));
  ReviewStream s(events);
  auto g = DynamicGraph::from_stream(s);
  auto out = categorize_users(s, g, {});
  auto find = [&](const std::string& id) {
    return *std::find_if(out.begin(), out.end(), [&](const auto& a) { return a.user_id == id; });
  };
  EXPECT_EQ(find("lt").category, SparsityCategory::LongTail);
  EXPECT_EQ(find("lt").second_order_count, 10u);
  EXPECT_EQ(find("ex").category, SparsityCategory::Extreme);
  EXPECT_EQ(find("ex").second_order_count, 0u);
}

TEST(Categorize, BurstyUsersAreMidTail) {
  // 40 non-sparse users in four behavior groups of ten: steady 10 and 12
  // reviews one per day, bursty 10 in one day and 12 over two days.
  const Timestamp day = kSecondsPerDay;
  std::vector<ReviewEvent> events;
  auto add = [&](const std::string& u, int reviews, int active_days, int first_day) {
    for (int i = 0; i < reviews; ++i) {
      events.push_back(ev(u, u + "_p" + std::to_string(i), (first_day + i % active_days) * day + i));
    }
  };
  for (int i = 0; i < 10; ++i) {
    add("steady10_" + std::to_string(i), 10, 10, 0);
    add("steady12_" + std::to_string(i), 12, 12, 40);
    add("burst10_" + std::to_string(i), 10, 1, 60);
    add("burst12_" + std::to_string(i), 12, 2, 80);
  }
  ReviewStream s(events);
  auto g = DynamicGraph::from_stream(s);
  auto out = categorize_users(s, g, {});
  ASSERT_EQ(out.size(), 40u);

  // Oracle: the 20 users with the largest per-day standard deviation.
  auto ranked = out;
  std::sort(ranked.begin(), ranked.end(),
            [](const auto& a, const auto& b) { return a.features.std_dev > b.features.std_dev; });
  std::set<std::string> top;
  for (int i = 0; i < 20; ++i) top.insert(ranked[i].user_id);
  for (const auto& a : out) {
    bool bursty = a.user_id.rfind("burst", 0) == 0;
    EXPECT_EQ(bursty, top.count(a.user_id) == 1) << a.user_id;
    EXPECT_EQ(a.category, bursty ? SparsityCategory::MidTail : SparsityCategory::Normal) << a.user_id;
  }
}

TEST(Categorize, FewDenseUsersFallBackToMedianSplit) {
  const Timestamp day = kSecondsPerDay;
  std::vector<ReviewEvent> events;
  for (int i = 0; i < 6; ++i) events.push_back(ev("steady", "p" + std::to_string(i), i * day));
  for (int i = 0; i < 6; ++i) events.push_back(ev("burst", "q" + std::to_string(i), 3 * day + i));
  ReviewStream s(events);
  auto out = categorize_users(s, DynamicGraph::from_stream(s), {});
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].user_id, "burst");
  EXPECT_EQ(out[0].category, SparsityCategory::MidTail);
  EXPECT_EQ(out[1].category, SparsityCategory::Normal);
}

TEST(Categorize, PartitionAndThresholdMonotonicity) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<ReviewEvent> events;
    int n = 20 + static_cast<int>(rng() % 200);
    for (int i = 0; i < n; ++i) {
      events.push_back(ev("u" + std::to_string(rng() % 40), "p" + std::to_string(rng() % 30),
                          static_cast<Timestamp>(rng() % (90 * kSecondsPerDay))));
    }
    ReviewStream s(events);
    auto g = DynamicGraph::from_stream(s);
    SparsityConfig lo, hi;
    lo.seed = hi.seed = static_cast<std::uint64_t>(trial);
    hi.second_order_threshold = lo.second_order_threshold + 3;
    auto a = categorize_users(s, g, lo);
    auto b = categorize_users(s, g, hi);
    EXPECT_EQ(a.size(), g.user_count());
    auto counts = category_counts(a);
    std::size_t total = 0;
    for (auto& [c, k] : counts) total += k;
    EXPECT_EQ(total, g.user_count());
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (is_sparse_category(a[i].category) && a[i].category != SparsityCategory::MidTail) {
        EXPECT_LE(a[i].review_count, lo.sparse_threshold);
      }
      if (a[i].category == SparsityCategory::Extreme) {
        EXPECT_EQ(b[i].category, SparsityCategory::Extreme);
      }
    }
  }
}

TEST(Categorize, CsvLayout) {
  std::vector<SparsityAssignment> a(1);
  a[0].user_id = "u1";
  a[0].category = SparsityCategory::LongTail;
  a[0].review_count = 2;
  a[0].second_order_count = 7;
  a[0].features = {0.5, 0.25, 0, 1};
  std::ostringstream out;
  write_assignments_csv(out, a);
  EXPECT_EQ(out.str(), "user_id,category,review_count,second_order_count,mean,std,min,max\n"
                       "u1,long_tail,2,7,0.5,0.25,0,1\n");
}
