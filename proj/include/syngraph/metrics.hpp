#pragma once

#include <array>
#include <cctype>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "syngraph/detail/hash.hpp"
#include "syngraph/error.hpp"
#include "syngraph/llm.hpp"
#include "syngraph/prompts.hpp"
#include "syngraph/review.hpp"

namespace syngraph {

struct ClassificationScores {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct RegressionScores {
  double mse = 0.0;
  double rmse = 0.0;
  double mae = 0.0;
};

struct MetricsReport {
  double accuracy = 0.0;
  double precision = 0.0;  // macro
  double recall = 0.0;     // macro
  double f1 = 0.0;         // macro
  double mse = 0.0;
  double rmse = 0.0;
  double mae = 0.0;
  std::size_t n_samples = 0;

  nlohmann::json to_json() const {
    return {{"accuracy", accuracy}, {"precision", precision}, {"recall", recall}, {"f1", f1},
            {"mse", mse},           {"rmse", rmse},           {"mae", mae},       {"n_samples", n_samples}};
  }
};

namespace detail {

inline void check_pair(const std::vector<Rating>& predicted, const std::vector<Rating>& gold) {
  if (predicted.size() != gold.size()) {
    throw Error(Errc::LengthMismatch,
                std::to_string(predicted.size()) + " predictions vs " + std::to_string(gold.size()) + " labels");
  }
  if (gold.empty()) throw Error(Errc::EmptyInput, "no samples");
}

}  // namespace detail

// Macro-averaged over the classes that occur in gold or predicted. A class
// that is never predicted (or never gold) scores 0 precision (or recall).
inline ClassificationScores classification_metrics(const std::vector<Rating>& predicted,
                                                   const std::vector<Rating>& gold) {
  detail::check_pair(predicted, gold);
  std::map<Rating, std::size_t> tp, pred_count, gold_count;
  std::set<Rating> classes;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    for (Rating r : {predicted[i], gold[i]}) {
      if (r < 1 || r > 5) throw Error(Errc::RatingOutOfRange, std::to_string(r));
    }
    classes.insert(predicted[i]);
    classes.insert(gold[i]);
    ++pred_count[predicted[i]];
    ++gold_count[gold[i]];
    if (predicted[i] == gold[i]) {
      ++correct;
      ++tp[gold[i]];
    }
  }
  ClassificationScores s;
  s.accuracy = static_cast<double>(correct) / static_cast<double>(gold.size());
  for (Rating c : classes) {
    double t = static_cast<double>(tp[c]);
    double p = pred_count[c] ? t / static_cast<double>(pred_count[c]) : 0.0;
    double r = gold_count[c] ? t / static_cast<double>(gold_count[c]) : 0.0;
    s.precision += p;
    s.recall += r;
    s.f1 += (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
  }
  auto n = static_cast<double>(classes.size());
  s.precision /= n;
  s.recall /= n;
  s.f1 /= n;
  return s;
}

inline RegressionScores regression_metrics(const std::vector<Rating>& predicted, const std::vector<Rating>& gold) {
  detail::check_pair(predicted, gold);
  double se = 0.0, ae = 0.0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    double d = static_cast<double>(predicted[i]) - static_cast<double>(gold[i]);
    se += d * d;
    ae += std::abs(d);
  }
  auto n = static_cast<double>(gold.size());
  RegressionScores s;
  s.mse = se / n;
  s.rmse = std::sqrt(s.mse);
  s.mae = ae / n;
  return s;
}

inline MetricsReport evaluate_predictions(const std::vector<Rating>& predicted, const std::vector<Rating>& gold) {
  auto c = classification_metrics(predicted, gold);
  auto r = regression_metrics(predicted, gold);
  return {c.accuracy, c.precision, c.recall, c.f1, r.mse, r.rmse, r.mae, gold.size()};
}

// Percent reduction from base to augmented RMSE; negative means worse.
inline double rmse_reduction(double base_rmse, double aug_rmse) {
  if (!(base_rmse > 0.0)) throw Error(Errc::DivisionByZero, "base RMSE must be > 0");
  return (base_rmse - aug_rmse) / base_rmse * 100.0;
}

// Lowercased runs of ASCII letters and digits.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      cur += static_cast<char>(std::tolower(c));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

inline double type_token_ratio(std::string_view text) {
  auto tokens = tokenize(text);
  if (tokens.empty()) return 0.0;
  std::set<std::string> types(tokens.begin(), tokens.end());
  return static_cast<double>(types.size()) / static_cast<double>(tokens.size());
}

// Mean per-text type-token ratio; texts without tokens count as 0.
inline double vocabulary_richness(const std::vector<std::string>& texts) {
  if (texts.empty()) throw Error(Errc::EmptyInput, "no texts");
  double sum = 0.0;
  for (const auto& t : texts) sum += type_token_ratio(t);
  return sum / static_cast<double>(texts.size());
}

struct JudgeScores {
  double lss = 0.0;
  double rhs = 0.0;
  double ss = 0.0;
  double as_ = 0.0;
  int attempts = 0;

  nlohmann::json to_json() const { return {{"LSS", lss}, {"RHS", rhs}, {"SS", ss}, {"AS", as_}}; }
};

// Reads the four "AXIS: score" lines. Scores must lie in [1, 5].
inline JudgeScores parse_judge_output(const std::string& text) {
  std::map<std::string, double> found;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string_view line = std::string_view(text).substr(pos, eol - pos);
    pos = eol + 1;
    auto colon = line.find(':');
    if (colon == std::string_view::npos) continue;
    std::string key;
    for (char c : line.substr(0, colon)) {
      if (!std::isspace(static_cast<unsigned char>(c))) key += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    }
    if (key != "LSS" && key != "RHS" && key != "SS" && key != "AS") continue;
    std::string value(line.substr(colon + 1));
    double v = 0.0;
    try {
      v = std::stod(value);
    } catch (const std::exception&) {
      throw Error(Errc::UnparseableOutput, "score for " + key + " is '" + value + "'");
    }
    if (!(v >= 1.0 && v <= 5.0)) throw Error(Errc::UnparseableOutput, key + " score out of [1, 5]");
    found.emplace(key, v);
  }
  for (const char* axis : {"LSS", "RHS", "SS", "AS"}) {
    if (!found.count(axis)) throw Error(Errc::UnparseableOutput, std::string("missing ") + axis + " score");
  }
  return {found["LSS"], found["RHS"], found["SS"], found["AS"], 0};
}

namespace detail {

inline std::string render_events(const std::vector<ReviewEvent>& events) {
  if (events.empty()) return "(none)";
  std::string out;
  for (const auto& e : events) {
    std::string text = e.text;
    for (auto& c : text) {
      if (c == '\n' || c == '\r') c = ' ';
    }
    out += "- [rating " + std::to_string(e.rating) + "] " + text + "\n";
  }
  out.pop_back();
  return out;
}

}  // namespace detail

// Scores a synthesized review against the user's history and the product's
// other reviews. Unparseable answers are re-requested up to `parse_retries`
// times; `attempts` reports how many answers were read.
inline JudgeScores judge_scores(const ReviewEvent& synth, const std::vector<ReviewEvent>& user_history,
                                const std::vector<ReviewEvent>& product_reviews, LlmBackend& backend,
                                const PromptTemplate& rubric, std::uint64_t seed = 0, int parse_retries = 2) {
  if (!synth.provenance.is_synthesized()) {
    throw Error(Errc::PreconditionViolated, "judge_scores needs a synthesized review");
  }
  if (rubric.kind() != TemplateKind::JudgeRubric) throw Error(Errc::InvalidTemplate, "not a judge rubric");
  std::string base = rubric.render({{"synthesized_review", detail::render_events({synth})},
                                    {"user_history", detail::render_events(user_history)},
                                    {"product_reviews", detail::render_events(product_reviews)}});
  std::optional<Error> last;
  for (int attempt = 0; attempt <= parse_retries; ++attempt) {
    std::string prompt = base;
    if (attempt > 0) prompt += "\nYour previous answer could not be read. Use exactly the four lines above.\n";
    auto c = backend.complete({prompt, 64, 0.0,
                               detail::derive_seed(seed, "judge:" + synth.user_id + "@" +
                                                             std::to_string(synth.timestamp) + "#" +
                                                             std::to_string(attempt))});
    try {
      auto s = parse_judge_output(c.text);
      s.attempts = attempt + 1;
      return s;
    } catch (const Error& e) {
      if (e.code() != Errc::UnparseableOutput) throw;
      last = e;
    }
  }
  throw Error(Errc::UnparseableOutput,
              last->detail() + " after " + std::to_string(parse_retries + 1) + " attempts");
}

// Proportions of ratings 5, 4, 3, 2, 1 in that order.
inline std::array<double, 5> class_distribution(const std::vector<Rating>& ratings) {
  if (ratings.empty()) throw Error(Errc::EmptyInput, "no ratings");
  std::array<double, 5> out{};
  for (Rating r : ratings) {
    if (r < 1 || r > 5) throw Error(Errc::RatingOutOfRange, std::to_string(r));
    out[static_cast<std::size_t>(5 - r)] += 1.0;
  }
  for (auto& v : out) v /= static_cast<double>(ratings.size());
  return out;
}

inline std::array<double, 5> class_distribution(const ReviewStream& stream) {
  std::vector<Rating> ratings;
  ratings.reserve(stream.size());
  for (const auto& e : stream.events()) ratings.push_back(e.rating);
  return class_distribution(ratings);
}

}  // namespace syngraph
