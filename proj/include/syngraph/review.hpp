#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "syngraph/error.hpp"

namespace syngraph {

using Timestamp = std::int64_t;
using Rating = int;

enum class SparsityCategory { Normal, MidTail, LongTail, Extreme };

inline constexpr SparsityCategory kAllCategories[] = {
    SparsityCategory::Normal, SparsityCategory::MidTail,
    SparsityCategory::LongTail, SparsityCategory::Extreme};

inline std::string_view to_string(SparsityCategory c) {
  switch (c) {
    case SparsityCategory::Normal: return "normal";
    case SparsityCategory::MidTail: return "mid_tail";
    case SparsityCategory::LongTail: return "long_tail";
    case SparsityCategory::Extreme: return "extreme";
  }
  return "normal";
}

inline SparsityCategory parse_category(std::string_view name) {
  for (auto c : kAllCategories) {
    if (to_string(c) == name) return c;
  }
  throw Error(Errc::InvalidField, "sparsity_category '" + std::string(name) + "'");
}

inline bool is_sparse_category(SparsityCategory c) {
  return c != SparsityCategory::Normal;
}

struct Provenance {
  enum class Origin { Original, Synthesized };

  Origin origin = Origin::Original;
  // Only meaningful when synthesized; originals always carry Normal.
  SparsityCategory category = SparsityCategory::Normal;

  static Provenance original() { return {}; }
  static Provenance synthesized(SparsityCategory c) {
    return {Origin::Synthesized, c};
  }
  bool is_synthesized() const { return origin == Origin::Synthesized; }

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

// One timestamped user -> product review.
struct ReviewEvent {
  std::string user_id;
  std::string product_id;
  Timestamp timestamp = 0;
  Rating rating = 0;
  std::string text;
  std::optional<std::string> summary;
  Provenance provenance;

  friend bool operator==(const ReviewEvent&, const ReviewEvent&) = default;
};

inline void validate(const ReviewEvent& e) {
  if (e.user_id.empty()) throw Error(Errc::InvalidField, "empty user id");
  if (e.product_id.empty()) throw Error(Errc::InvalidField, "empty product id");
  if (e.rating < 1 || e.rating > 5) {
    throw Error(Errc::RatingOutOfRange, std::to_string(e.rating));
  }
  if (e.timestamp < 0) {
    throw Error(Errc::InvalidField, "negative timestamp " + std::to_string(e.timestamp));
  }
  if (e.provenance.is_synthesized() && e.text.empty()) {
    throw Error(Errc::InvalidField, "synthesized event without text");
  }
}

struct Span {
  Timestamp begin = 0;
  Timestamp end = 0;

  Timestamp length() const { return end - begin; }
  bool contains(Timestamp t) const { return t >= begin && t <= end; }
  friend bool operator==(const Span&, const Span&) = default;
};

// Chronologically ordered review events plus the timeline granularity used
// to bucket them. Immutable after construction.
class ReviewStream {
 public:
  ReviewStream() = default;

  // Stable-sorts `events` by timestamp, so equal timestamps keep their
  // ingestion order. Without an explicit span it is derived from min/max.
  explicit ReviewStream(std::vector<ReviewEvent> events, int interval_count = 10,
                        std::optional<Span> span = std::nullopt)
      : events_(std::move(events)), interval_count_(interval_count) {
    if (interval_count_ < 1) {
      throw Error(Errc::InvalidArgument, "interval_count must be >= 1");
    }
    for (const auto& e : events_) validate(e);
    std::stable_sort(events_.begin(), events_.end(),
                     [](const ReviewEvent& a, const ReviewEvent& b) {
                       return a.timestamp < b.timestamp;
                     });
    if (span) {
      if (span->begin > span->end) throw Error(Errc::InvalidArgument, "span begin > end");
      for (const auto& e : events_) {
        if (!span->contains(e.timestamp)) {
          throw Error(Errc::InvalidArgument,
                      "event at " + std::to_string(e.timestamp) + " outside span");
        }
      }
      span_ = span;
    } else if (!events_.empty()) {
      span_ = Span{events_.front().timestamp, events_.back().timestamp};
    }
  }

  const std::vector<ReviewEvent>& events() const { return events_; }
  std::size_t size() const { return events_.size(); }
  bool empty() const { return events_.empty(); }
  int interval_count() const { return interval_count_; }
  bool has_span() const { return span_.has_value(); }

  Span span() const {
    if (!span_) throw Error(Errc::EmptyStream, "stream has no events");
    return *span_;
  }

  // Same events and span, different bucketization.
  ReviewStream with_interval_count(int t) const {
    return ReviewStream(events_, t, span_);
  }

 private:
  std::vector<ReviewEvent> events_;
  int interval_count_ = 10;
  std::optional<Span> span_;
};

namespace detail {

inline const nlohmann::json& require(const nlohmann::json& rec, const char* name) {
  auto it = rec.find(name);
  if (it == rec.end() || it->is_null()) throw Error(Errc::MissingField, name);
  return *it;
}

inline std::string require_string(const nlohmann::json& rec, const char* name) {
  const auto& v = require(rec, name);
  if (!v.is_string()) throw Error(Errc::InvalidField, std::string(name) + " is not a string");
  return v.get<std::string>();
}

inline std::optional<std::string> optional_string(const nlohmann::json& rec,
                                                  const char* name) {
  auto it = rec.find(name);
  if (it == rec.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw Error(Errc::InvalidField, std::string(name) + " is not a string");
  return it->get<std::string>();
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace detail

// Parses one Amazon-schema record. Also accepts the two extra fields written
// by `to_json_line`, so augmented streams load back losslessly.
inline ReviewEvent parse_review_line(std::string_view line) {
  nlohmann::json rec;
  try {
    rec = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::Parse, e.what());
  }
  if (!rec.is_object()) throw Error(Errc::Parse, "record is not an object");

  ReviewEvent ev;
  ev.user_id = detail::require_string(rec, "reviewerID");
  ev.product_id = detail::require_string(rec, "asin");

  const auto& overall = detail::require(rec, "overall");
  if (!overall.is_number()) throw Error(Errc::InvalidField, "overall is not a number");
  double stars = overall.get<double>();
  if (!(stars >= 1.0 && stars <= 5.0)) {
    throw Error(Errc::RatingOutOfRange, "overall=" + overall.dump());
  }
  ev.rating = static_cast<Rating>(std::floor(stars + 0.5));

  const auto& when = detail::require(rec, "unixReviewTime");
  if (!when.is_number_integer()) throw Error(Errc::InvalidField, "unixReviewTime is not an integer");
  ev.timestamp = when.get<Timestamp>();
  if (ev.timestamp < 0) throw Error(Errc::InvalidField, "unixReviewTime is negative");

  ev.text = detail::optional_string(rec, "reviewText").value_or("");
  ev.summary = detail::optional_string(rec, "summary");

  auto origin = detail::optional_string(rec, "provenance").value_or("original");
  if (origin == "synthesized") {
    auto cat = detail::optional_string(rec, "sparsity_category");
    if (!cat) throw Error(Errc::MissingField, "sparsity_category");
    ev.provenance = Provenance::synthesized(parse_category(*cat));
    if (ev.text.empty()) throw Error(Errc::InvalidField, "synthesized record without reviewText");
  } else if (origin != "original") {
    throw Error(Errc::InvalidField, "provenance '" + origin + "'");
  }
  return ev;
}

// Canonical single-line form. Keys are emitted in sorted order, so equal
// events always serialize to identical bytes.
inline std::string to_json_line(const ReviewEvent& e) {
  nlohmann::json rec;
  rec["reviewerID"] = e.user_id;
  rec["asin"] = e.product_id;
  rec["overall"] = static_cast<double>(e.rating);
  rec["unixReviewTime"] = e.timestamp;
  rec["reviewText"] = e.text;
  if (e.summary) rec["summary"] = *e.summary;
  rec["provenance"] = e.provenance.is_synthesized() ? "synthesized" : "original";
  if (e.provenance.is_synthesized()) {
    rec["sparsity_category"] = std::string(to_string(e.provenance.category));
  } else {
    rec["sparsity_category"] = nullptr;
  }
  return rec.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

enum class ParseMode { Strict, Lenient };

struct ParseIssue {
  std::size_t line = 0;
  std::string cause;
};

struct LoadOptions {
  ParseMode mode = ParseMode::Strict;
  int interval_count = 10;
};

inline ReviewStream read_stream(std::istream& in, const LoadOptions& opts = {},
                                std::vector<ParseIssue>* skipped = nullptr) {
  std::vector<ReviewEvent> events;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      events.push_back(parse_review_line(line));
    } catch (const Error& e) {
      if (opts.mode == ParseMode::Strict) {
        throw Error(Errc::Parse, e.what(), line_no);
      }
      std::cerr << "warning: skipping line " << line_no << ": " << e.what() << "\n";
      if (skipped) skipped->push_back({line_no, e.what()});
    }
  }
  return ReviewStream(std::move(events), opts.interval_count);
}

inline ReviewStream load_dataset(const std::filesystem::path& path,
                                 const LoadOptions& opts = {},
                                 std::vector<ParseIssue>* skipped = nullptr) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  return read_stream(in, opts, skipped);
}

inline void write_stream(std::ostream& out, const ReviewStream& stream) {
  for (const auto& e : stream.events()) out << to_json_line(e) << '\n';
}

inline std::string serialize_stream(const ReviewStream& stream) {
  std::ostringstream out;
  write_stream(out, stream);
  return out.str();
}

inline void save_stream(const std::filesystem::path& path, const ReviewStream& stream) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  write_stream(out, stream);
  if (!out) throw Error(Errc::Io, "write failed for " + path.string());
}

// Chronological split: the first floor(ratio * N) events train, the rest test.
inline std::pair<ReviewStream, ReviewStream> split_train_test(const ReviewStream& stream,
                                                              double ratio) {
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw Error(Errc::InvalidArgument, "split ratio must lie in (0, 1)");
  }
  if (stream.empty()) throw Error(Errc::EmptyStream, "cannot split an empty stream");
  const auto& ev = stream.events();
  // The epsilon keeps products like 0.9 * 10 from landing just below 9.
  auto cut = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(ev.size()) + 1e-9));
  cut = std::min(cut, ev.size());
  std::vector<ReviewEvent> train(ev.begin(), ev.begin() + static_cast<std::ptrdiff_t>(cut));
  std::vector<ReviewEvent> test(ev.begin() + static_cast<std::ptrdiff_t>(cut), ev.end());
  return {ReviewStream(std::move(train), stream.interval_count()),
          ReviewStream(std::move(test), stream.interval_count())};
}

}  // namespace syngraph
