#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "syngraph/review.hpp"
#include "test_util.hpp"

using namespace syngraph;
using syngraph::testing::ev;

namespace {

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::InvalidArgument;
}

ReviewStream read(const std::string& text, LoadOptions opts = {}, std::vector<ParseIssue>* skipped = nullptr) {
  std::istringstream in(text);
  return read_stream(in, opts, skipped);
}

}  // namespace

TEST(ParseReviewLine, MapsAmazonFields) {
  auto e = parse_review_line(
      R"({"overall":5.0,"reviewerID":"A1","asin":"B0","unixReviewTime":1357603200,"reviewText":"Great"})");
  EXPECT_EQ(e.user_id, "A1");
  EXPECT_EQ(e.product_id, "B0");
  EXPECT_EQ(e.timestamp, 1357603200);
  EXPECT_EQ(e.rating, 5);
  EXPECT_EQ(e.text, "Great");
  EXPECT_FALSE(e.summary.has_value());
  EXPECT_FALSE(e.provenance.is_synthesized());
}

TEST(ParseReviewLine, RatingAboveFiveIsOutOfRange) {
  EXPECT_EQ(code_of([] {
              parse_review_line(R"({"overall":6.0,"reviewerID":"A1","asin":"B0","unixReviewTime":1})");
            }),
            Errc::RatingOutOfRange);
  EXPECT_EQ(code_of([] {
              parse_review_line(R"({"overall":0.5,"reviewerID":"A1","asin":"B0","unixReviewTime":1})");
            }),
            Errc::RatingOutOfRange);
}

TEST(ParseReviewLine, MissingAsinNamesTheField) {
  try {
    parse_review_line(R"({"overall":4.0,"reviewerID":"A1","unixReviewTime":1})");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::MissingField);
    EXPECT_EQ(e.detail(), "asin");
  }
}

TEST(ParseReviewLine, MissingTextBecomesEmpty) {
  auto e = parse_review_line(R"({"overall":3,"reviewerID":"A1","asin":"B0","unixReviewTime":7,"summary":"ok"})");
  EXPECT_EQ(e.text, "");
  EXPECT_EQ(e.summary, "ok");
}

TEST(ParseReviewLine, FractionalRatingsRoundHalfUp) {
  auto at = [](double overall) {
    return parse_review_line(R"({"reviewerID":"A","asin":"B","unixReviewTime":1,"overall":)" +
                             std::to_string(overall) + "}")
        .rating;
  };
  EXPECT_EQ(at(4.5), 5);
  EXPECT_EQ(at(4.49), 4);
  EXPECT_EQ(at(1.5), 2);
  EXPECT_EQ(at(2.5), 3);
}

TEST(ParseReviewLine, RejectsNegativeTimestampAndBadJson) {
  EXPECT_EQ(code_of([] { parse_review_line(R"({"overall":4,"reviewerID":"A","asin":"B","unixReviewTime":-3})"); }),
            Errc::InvalidField);
  EXPECT_EQ(code_of([] { parse_review_line("{not json"); }), Errc::Parse);
}

TEST(LoadDataset, SortsByTimestamp) {
  auto s = read(R"({"overall":5,"reviewerID":"a","asin":"p","unixReviewTime":30}
{"overall":5,"reviewerID":"b","asin":"p","unixReviewTime":10}
{"overall":5,"reviewerID":"c","asin":"p","unixReviewTime":20}
)");
  ASSERT_EQ(s.size(), 3u);
  EXPECT_EQ(s.events()[0].timestamp, 10);
  EXPECT_EQ(s.events()[1].timestamp, 20);
  EXPECT_EQ(s.events()[2].timestamp, 30);
  EXPECT_EQ(s.span(), (Span{10, 30}));
}

TEST(LoadDataset, EqualTimestampsKeepFileOrder) {
  auto s = read(R"({"overall":5,"reviewerID":"first","asin":"p","unixReviewTime":10}
{"overall":5,"reviewerID":"second","asin":"p","unixReviewTime":10}
)");
  EXPECT_EQ(s.events()[0].user_id, "first");
  EXPECT_EQ(s.events()[1].user_id, "second");
}

TEST(LoadDataset, EmptyFileHasNoSpan) {
  auto path = std::filesystem::temp_directory_path() / "syngraph_empty.jsonl";
  std::ofstream(path).close();
  auto s = load_dataset(path);
  EXPECT_TRUE(s.empty());
  EXPECT_FALSE(s.has_span());
  EXPECT_EQ(code_of([&] { s.span(); }), Errc::EmptyStream);
  std::filesystem::remove(path);
}

TEST(LoadDataset, MissingFileIsIoError) {
  EXPECT_EQ(code_of([] { load_dataset("/nonexistent/reviews.jsonl"); }), Errc::Io);
}

TEST(LoadDataset, StrictModeReportsLineNumber) {
  const std::string text = R"({"overall":5,"reviewerID":"a","asin":"p","unixReviewTime":1}

{"overall":9,"reviewerID":"b","asin":"p","unixReviewTime":2}
)";
  try {
    read(text);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::Parse);
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(LoadDataset, LenientModeSkipsAndRecords) {
  std::vector<ParseIssue> skipped;
  auto s = read(R"({"overall":5,"reviewerID":"a","asin":"p","unixReviewTime":1}
garbage
{"overall":4,"reviewerID":"b","asin":"p","unixReviewTime":2}
)",
                {ParseMode::Lenient, 10}, &skipped);
  EXPECT_EQ(s.size(), 2u);
  ASSERT_EQ(skipped.size(), 1u);
  EXPECT_EQ(skipped[0].line, 2u);
}

TEST(ReviewStream, ExplicitSpanMustCoverEvents) {
  EXPECT_EQ(code_of([] { ReviewStream({ev("u", "p", 50)}, 10, Span{0, 40}); }), Errc::InvalidArgument);
  ReviewStream ok({ev("u", "p", 5)}, 10, Span{0, 100});
  EXPECT_EQ(ok.span(), (Span{0, 100}));
}

TEST(ReviewStream, SynthesizedEventsNeedText) {
  auto e = ev("u", "p", 1, 4, "");
  e.provenance = Provenance::synthesized(SparsityCategory::LongTail);
  EXPECT_EQ(code_of([&] { ReviewStream({e}); }), Errc::InvalidField);
}

TEST(SplitTrainTest, NineToOne) {
  std::vector<ReviewEvent> events;
  for (int i = 0; i < 10; ++i) events.push_back(ev("u" + std::to_string(i), "p", 100 - i));
  auto [train, test] = split_train_test(ReviewStream(events), 0.9);
  EXPECT_EQ(train.size(), 9u);
  ASSERT_EQ(test.size(), 1u);
  EXPECT_EQ(test.events()[0].timestamp, 100);
}

TEST(SplitTrainTest, FloorRule) {
  std::vector<ReviewEvent> events;
  for (int i = 0; i < 19; ++i) events.push_back(ev("u", "p", i));
  auto [train, test] = split_train_test(ReviewStream(events), 0.9);
  EXPECT_EQ(train.size(), 17u);
  EXPECT_EQ(test.size(), 2u);
}

TEST(SplitTrainTest, Errors) {
  EXPECT_EQ(code_of([] { split_train_test(ReviewStream(), 0.9); }), Errc::EmptyStream);
  EXPECT_EQ(code_of([] { split_train_test(ReviewStream({ev("u", "p", 1)}), 1.0); }), Errc::InvalidArgument);
  EXPECT_EQ(code_of([] { split_train_test(ReviewStream({ev("u", "p", 1)}), 0.0); }), Errc::InvalidArgument);
}

TEST(Serialization, CanonicalFormCarriesProvenance) {
  auto o = ev("A1", "B0", 7, 4, "nice");
  auto s = ev("A1", "B1", 8, 2, "meh");
  s.summary = "short";
  s.provenance = Provenance::synthesized(SparsityCategory::MidTail);
  EXPECT_EQ(to_json_line(o),
            R"({"asin":"B0","overall":4.0,"provenance":"original","reviewText":"nice","reviewerID":"A1",)"
            R"("sparsity_category":null,"unixReviewTime":7})");
  auto back = parse_review_line(to_json_line(s));
  EXPECT_EQ(back, s);
}

TEST(Serialization, RoundTripIsByteEqual) {
  std::mt19937_64 rng(11);
  std::vector<ReviewEvent> events;
  for (int i = 0; i < 200; ++i) {
    auto e = ev("u" + std::to_string(rng() % 20), "p" + std::to_string(rng() % 30),
                static_cast<Timestamp>(rng() % 1000), static_cast<Rating>(1 + rng() % 5),
                "text \"quoted\" \\ " + std::to_string(i) + " \xc3\xa9\n second line");
    if (i % 3 == 0) e.provenance = Provenance::synthesized(kAllCategories[1 + rng() % 3]);
    if (i % 4 == 0) e.summary = "s" + std::to_string(i);
    events.push_back(e);
  }
  ReviewStream s(events);
  auto text = serialize_stream(s);
  auto again = read(text);
  EXPECT_EQ(again.events(), s.events());
  EXPECT_EQ(serialize_stream(again), text);
  for (std::size_t i = 1; i < again.size(); ++i) {
    EXPECT_LE(again.events()[i - 1].timestamp, again.events()[i].timestamp);
  }
}

TEST(Categories, NamesRoundTrip) {
  for (auto c : kAllCategories) EXPECT_EQ(parse_category(to_string(c)), c);
  EXPECT_FALSE(is_sparse_category(SparsityCategory::Normal));
  EXPECT_TRUE(is_sparse_category(SparsityCategory::Extreme));
}
