#include <gtest/gtest.h>

#include <algorithm>
#include <deque>
#include <numeric>
#include <random>

#include "syngraph/metrics.hpp"
#include "test_util.hpp"

using namespace syngraph;
using syngraph::testing::ev;

namespace {

class ScriptedBackend : public LlmBackend {
 public:
  explicit ScriptedBackend(std::deque<std::string> script) : script_(std::move(script)) {}
  Completion complete(const CompletionRequest& req) override {
    prompts.push_back(req.prompt);
    seeds.push_back(req.seed);
    auto s = script_.front();
    if (script_.size() > 1) script_.pop_front();
    return {s, 1};
  }
  std::string name() const override { return "scripted"; }

  std::vector<std::string> prompts;
  std::vector<std::uint64_t> seeds;

 private:
  std::deque<std::string> script_;
};

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::InvalidArgument;
}

ReviewEvent synthetic(const std::string& user, Timestamp t) {
  auto e = ev(user, "p1", t, 4, "synthetic words here");
  e.provenance = Provenance::synthesized(SparsityCategory::LongTail);
  return e;
}

// Macro scores computed from an explicit 5x5 confusion matrix.
ClassificationScores confusion_oracle(const std::vector<Rating>& pred, const std::vector<Rating>& gold) {
  long m[6][6] = {};
  for (std::size_t i = 0; i < gold.size(); ++i) ++m[gold[i]][pred[i]];
  ClassificationScores s;
  double correct = 0, classes = 0;
  for (int c = 1; c <= 5; ++c) {
    double row = 0, col = 0;
    for (int k = 1; k <= 5; ++k) {
      row += m[c][k];
      col += m[k][c];
    }
    correct += m[c][c];
    if (row == 0 && col == 0) continue;
    classes += 1;
    double p = col ? m[c][c] / col : 0, r = row ? m[c][c] / row : 0;
    s.precision += p;
    s.recall += r;
    s.f1 += p + r > 0 ? 2 * p * r / (p + r) : 0;
  }
  s.accuracy = correct / static_cast<double>(gold.size());
  s.precision /= classes;
  s.recall /= classes;
  s.f1 /= classes;
  return s;
}

std::vector<Rating> random_ratings(std::mt19937_64& rng, std::size_t n) {
  std::vector<Rating> out(n);
  for (auto& r : out) r = static_cast<Rating>(1 + rng() % 5);
  return out;
}

}  // namespace

TEST(Classification, HandWorkedMacroHalf) {
  auto s = classification_metrics({5, 5, 4, 4}, {5, 4, 4, 5});
  EXPECT_DOUBLE_EQ(s.accuracy, 0.5);
  EXPECT_DOUBLE_EQ(s.precision, 0.5);
  EXPECT_DOUBLE_EQ(s.recall, 0.5);
  EXPECT_DOUBLE_EQ(s.f1, 0.5);
}

TEST(Classification, AbsentPredictedClassScoresZero) {
  auto s = classification_metrics({5, 5, 5, 5}, {5, 5, 5, 1});
  EXPECT_DOUBLE_EQ(s.accuracy, 0.75);
  EXPECT_DOUBLE_EQ(s.precision, 0.375);
  EXPECT_DOUBLE_EQ(s.recall, 0.5);
  EXPECT_DOUBLE_EQ(s.f1, 3.0 / 7.0);
}

TEST(Classification, MatchesConfusionMatrixOracle) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    auto n = 1 + rng() % 40;
    auto gold = random_ratings(rng, n), pred = random_ratings(rng, n);
    auto got = classification_metrics(pred, gold);
    auto want = confusion_oracle(pred, gold);
    EXPECT_NEAR(got.accuracy, want.accuracy, 1e-12);
    EXPECT_NEAR(got.precision, want.precision, 1e-12);
    EXPECT_NEAR(got.recall, want.recall, 1e-12);
    EXPECT_NEAR(got.f1, want.f1, 1e-12);
  }
}

TEST(Classification, InputErrors) {
  EXPECT_EQ(code_of([] { classification_metrics({5}, {5, 4}); }), Errc::LengthMismatch);
  EXPECT_EQ(code_of([] { classification_metrics({}, {}); }), Errc::EmptyInput);
  EXPECT_EQ(code_of([] { classification_metrics({6}, {5}); }), Errc::RatingOutOfRange);
}

TEST(Regression, HandValues) {
  auto r = regression_metrics({5, 3}, {4, 5});
  EXPECT_DOUBLE_EQ(r.mse, 2.5);
  EXPECT_DOUBLE_EQ(r.mae, 1.5);
  EXPECT_DOUBLE_EQ(r.rmse, std::sqrt(2.5));
  auto perfect = regression_metrics({1, 2, 3}, {1, 2, 3});
  EXPECT_EQ(perfect.mse, 0.0);
  EXPECT_EQ(perfect.rmse, 0.0);
}

TEST(Regression, IdentitiesOnRandomVectors) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    auto n = 1 + rng() % 60;
    auto gold = random_ratings(rng, n), pred = random_ratings(rng, n);
    auto r = regression_metrics(pred, gold);
    if (r.mse > 0) {
      EXPECT_NEAR(r.rmse * r.rmse / r.mse, 1.0, 1e-12);
    }
    EXPECT_LE(r.mae, r.rmse + 1e-12);

    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    std::vector<Rating> pg(n), pp(n);
    for (std::size_t i = 0; i < n; ++i) {
      pg[i] = gold[idx[i]];
      pp[i] = pred[idx[i]];
    }
    auto a = evaluate_predictions(pred, gold), b = evaluate_predictions(pp, pg);
    EXPECT_NEAR(a.mse, b.mse, 1e-12);
    EXPECT_NEAR(a.mae, b.mae, 1e-12);
    EXPECT_NEAR(a.f1, b.f1, 1e-12);
    EXPECT_DOUBLE_EQ(a.accuracy, b.accuracy);
    EXPECT_EQ(a.n_samples, n);
  }
}

TEST(RmseReduction, ReferenceValues) {
  EXPECT_NEAR(rmse_reduction(1.1366, 0.7183), 36.80, 0.01);
  EXPECT_NEAR(rmse_reduction(0.5535, 0.3383), 38.88, 0.01);
  EXPECT_DOUBLE_EQ(rmse_reduction(2.0, 2.0), 0.0);
  EXPECT_LT(rmse_reduction(1.0, 1.5), 0.0);
  EXPECT_EQ(code_of([] { rmse_reduction(0.0, 1.0); }), Errc::DivisionByZero);
}

TEST(Vocabulary, TypeTokenRatio) {
  EXPECT_DOUBLE_EQ(type_token_ratio("a a a"), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(type_token_ratio("Great product, GREAT price!"), 0.75);
  EXPECT_DOUBLE_EQ(type_token_ratio(""), 0.0);
  EXPECT_DOUBLE_EQ(type_token_ratio("the cat"), type_token_ratio("THE Cat"));
  EXPECT_EQ(tokenize("It's 5-star."), (std::vector<std::string>{"it", "s", "5", "star"}));
}

TEST(Vocabulary, DoublingNeverRaisesRatio) {
  std::mt19937_64 rng(17);
  const std::vector<std::string> words{"good", "bad", "card", "gift", "fast", "slow", "love", "meh", "ok", "wow"};
  for (int trial = 0; trial < 200; ++trial) {
    std::string d;
    auto n = 1 + rng() % 30;
    for (std::size_t i = 0; i < n; ++i) d += words[rng() % words.size()] + " ";
    EXPECT_LE(type_token_ratio(d + d), type_token_ratio(d));
  }
}

TEST(Vocabulary, RichnessIsMeanRatio) {
  EXPECT_DOUBLE_EQ(vocabulary_richness({"a a", "b c"}), 0.75);
  EXPECT_EQ(code_of([] { vocabulary_richness({}); }), Errc::EmptyInput);
}

TEST(Judge, ParsesFourAxes) {
  auto s = parse_judge_output("LSS: 4\nRHS: 3.5\nSS: 5\nAS: 2\n");
  EXPECT_EQ(s.lss, 4);
  EXPECT_EQ(s.rhs, 3.5);
  EXPECT_EQ(s.ss, 5);
  EXPECT_EQ(s.as_, 2);
  EXPECT_EQ(code_of([] { parse_judge_output("LSS: 4\nRHS: 3\nSS: 5"); }), Errc::UnparseableOutput);
  EXPECT_EQ(code_of([] { parse_judge_output("LSS: 9\nRHS: 3\nSS: 5\nAS: 1"); }), Errc::UnparseableOutput);
}

TEST(Judge, MockScoresAreDeterministicAndInRange) {
  TemplateSet t;
  MockBackend a, b;
  auto synth = synthetic("u", 10);
  std::vector<ReviewEvent> history{ev("u", "p0", 1)}, product{ev("v", "p1", 2)};
  auto x = judge_scores(synth, history, product, a, t.get(TemplateKind::JudgeRubric), 7);
  auto y = judge_scores(synth, history, product, b, t.get(TemplateKind::JudgeRubric), 7);
  EXPECT_EQ(x.to_json(), y.to_json());
  EXPECT_EQ(x.attempts, 1);
  for (double v : {x.lss, x.rhs, x.ss, x.as_}) {
    EXPECT_GE(v, 1.0);
    EXPECT_LE(v, 5.0);
  }
}

TEST(Judge, RetriesUnreadableAnswers) {
  TemplateSet t;
  ScriptedBackend backend({"no idea", "LSS: 4", "LSS: 4\nRHS: 4\nSS: 3\nAS: 5"});
  auto s = judge_scores(synthetic("u", 10), {}, {}, backend, t.get(TemplateKind::JudgeRubric));
  EXPECT_EQ(s.attempts, 3);
  EXPECT_EQ(s.as_, 5);
  ASSERT_EQ(backend.seeds.size(), 3u);
  EXPECT_NE(backend.seeds[0], backend.seeds[1]);
  EXPECT_NE(backend.prompts[1].find("could not be read"), std::string::npos);

  ScriptedBackend never({"nothing useful"});
  EXPECT_EQ(code_of([&] { judge_scores(synthetic("u", 10), {}, {}, never, t.get(TemplateKind::JudgeRubric)); }),
            Errc::UnparseableOutput);
  EXPECT_EQ(never.prompts.size(), 3u);
}

TEST(Judge, Preconditions) {
  TemplateSet t;
  MockBackend m;
  EXPECT_EQ(code_of([&] { judge_scores(ev("u", "p", 1), {}, {}, m, t.get(TemplateKind::JudgeRubric)); }),
            Errc::PreconditionViolated);
  EXPECT_EQ(code_of([&] { judge_scores(synthetic("u", 1), {}, {}, m, t.get(TemplateKind::ProductProfile)); }),
            Errc::InvalidTemplate);
}

TEST(ClassDistribution, OrderedFiveToOne) {
  auto d = class_distribution(std::vector<Rating>{5, 5, 4, 1});
  EXPECT_EQ(d, (std::array<double, 5>{0.5, 0.25, 0.0, 0.0, 0.25}));
  EXPECT_EQ(code_of([] { class_distribution(std::vector<Rating>{}); }), Errc::EmptyInput);

  // A 10000-rating stream with the Gift_Cards class mix.
  std::vector<Rating> gift;
  const int counts[5] = {9258, 519, 111, 74, 38};
  for (int i = 0; i < 5; ++i) gift.insert(gift.end(), static_cast<std::size_t>(counts[i]), static_cast<Rating>(5 - i));
  auto g = class_distribution(gift);
  const double want[5] = {0.9258, 0.0519, 0.0111, 0.0074, 0.0037};
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(g[static_cast<std::size_t>(i)], want[i], 1e-4);
}
