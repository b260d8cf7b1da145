#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "syngraph/error.hpp"
#include "syngraph/llm.hpp"

namespace syngraph {

enum class TemplateKind {
  UserProfile,        // mid-tail and extreme user profiles
  UserLongTail,       // long-tail user profile with local/global neighbor context
  ProductProfile,     // product profiles for every category
  SecondOrderSelect,  // pick second-order products for a user
  DataSynthesis,      // write the pseudo-review
  JudgeRubric,        // four-axis quality rubric
};

inline constexpr std::array<TemplateKind, 6> kAllTemplateKinds = {
    TemplateKind::UserProfile,       TemplateKind::UserLongTail,  TemplateKind::ProductProfile,
    TemplateKind::SecondOrderSelect, TemplateKind::DataSynthesis, TemplateKind::JudgeRubric};

// File name used when loading a template directory.
inline std::string_view template_file(TemplateKind kind) {
  switch (kind) {
    case TemplateKind::UserProfile: return "user_profile.txt";
    case TemplateKind::UserLongTail: return "user_long_tail.txt";
    case TemplateKind::ProductProfile: return "product_profile.txt";
    case TemplateKind::SecondOrderSelect: return "second_order_select.txt";
    case TemplateKind::DataSynthesis: return "data_synthesis.txt";
    case TemplateKind::JudgeRubric: return "judge_rubric.txt";
  }
  return "";
}

inline std::vector<std::string_view> required_placeholders(TemplateKind kind) {
  switch (kind) {
    case TemplateKind::UserProfile: return {"reviews"};
    case TemplateKind::UserLongTail: return {"reviews", "local_reviews", "global_reviews"};
    case TemplateKind::ProductProfile: return {"reviews"};
    case TemplateKind::SecondOrderSelect: return {"self_profile", "candidate_profiles"};
    case TemplateKind::DataSynthesis: return {"user_profile", "product_profiles"};
    case TemplateKind::JudgeRubric: return {"synthesized_review", "user_history", "product_reviews"};
  }
  return {};
}

// Output-format line a template must keep so responses stay parseable.
inline std::string_view required_contract(TemplateKind kind) {
  switch (kind) {
    case TemplateKind::SecondOrderSelect: return kSelectionContract;
    case TemplateKind::DataSynthesis: return kReviewContract;
    case TemplateKind::JudgeRubric: return kJudgeContract;
    default: return {};
  }
}

inline std::string_view default_template_body(TemplateKind kind) {
  switch (kind) {
    case TemplateKind::UserProfile:
      return R"(You are analysing the review history of an online shopper.
Below are reviews written by this user, each with its star rating.

{reviews}

Write a concise profile of this user: the kinds of products they buy, the product aspects they care about, their typical rating habits, and their writing style. Answer with the profile text only.
)";
    case TemplateKind::UserLongTail:
      return R"(You are analysing an online shopper who has written only a few reviews.

The user's own reviews:
{reviews}

Recent reviews by other customers of the same products (local neighbourhood):
{local_reviews}

Reviews by other customers of the same products over the whole history (global neighbourhood):
{global_reviews}

Treat the user's own reviews as the primary evidence and the neighbourhood reviews as context about similar customers. Write a concise profile of this user: preferences, aspects they care about, typical rating habits, and writing style. Answer with the profile text only.
)";
    case TemplateKind::ProductProfile:
      return R"(You are analysing customer reviews of a single product.

{reviews}

Write a concise product profile: what the product is, the strengths and weaknesses reviewers report, and the overall sentiment towards it. Answer with the profile text only.
)";
    case TemplateKind::SecondOrderSelect:
      return R"(A customer bought the product described here:
{self_profile}

Customers who bought the same product also bought the following products:
{candidate_profiles}

Choose the products this customer is most likely to buy and review next. Answer on one line in the format:
selected: <comma-separated product ids>
)";
    case TemplateKind::DataSynthesis:
      return R"(User profile:
{user_profile}

Product profiles:
{product_profiles}

Write the review this user would leave for the target product. Match the user's rating habits and writing style and stay consistent with what is known about the product. Answer in exactly this format:
rating: <1-5>
review: <text>
)";
    case TemplateKind::JudgeRubric:
      return R"(You are evaluating a synthesized product review.

Synthesized review:
{synthesized_review}

The user's past reviews:
{user_history}

Other reviews of the same product:
{product_reviews}

Score the synthesized review from 1 (very dissimilar) to 5 (very similar) on four axes:
LSS: language style similarity to the user's past reviews
RHS: consistency of the rating with the user's historical rating habits
SS: sentiment similarity to the product's other reviews
AS: overlap in the product aspects discussed
Answer with exactly four lines:
LSS: <1-5>
RHS: <1-5>
SS: <1-5>
AS: <1-5>
)";
  }
  return {};
}

// Template body with `{name}` placeholders.
class PromptTemplate {
 public:
  PromptTemplate(TemplateKind kind, std::string body) : kind_(kind), body_(std::move(body)) {
    for (auto name : required_placeholders(kind_)) {
      std::string token = "{" + std::string(name) + "}";
      if (body_.find(token) == std::string::npos) {
        throw Error(Errc::InvalidTemplate,
                    std::string(template_file(kind_)) + " lacks placeholder " + token);
      }
    }
    auto contract = required_contract(kind_);
    if (!contract.empty() && body_.find(contract) == std::string::npos) {
      throw Error(Errc::InvalidTemplate,
                  std::string(template_file(kind_)) + " lacks output line '" + std::string(contract) + "'");
    }
  }

  TemplateKind kind() const { return kind_; }
  const std::string& body() const { return body_; }

  // Single left-to-right pass, so substituted text is never re-expanded.
  // Unknown `{...}` sequences are copied through untouched.
  std::string render(const std::map<std::string, std::string>& values) const {
    for (auto name : required_placeholders(kind_)) {
      if (!values.count(std::string(name))) {
        throw Error(Errc::InvalidArgument, "no value for placeholder {" + std::string(name) + "}");
      }
    }
    std::string out;
    out.reserve(body_.size());
    std::size_t i = 0;
    while (i < body_.size()) {
      if (body_[i] == '{') {
        auto close = body_.find('}', i + 1);
        if (close != std::string::npos) {
          auto it = values.find(body_.substr(i + 1, close - i - 1));
          if (it != values.end()) {
            out += it->second;
            i = close + 1;
            continue;
          }
        }
      }
      out += body_[i++];
    }
    return out;
  }

 private:
  TemplateKind kind_;
  std::string body_;
};

class TemplateSet {
 public:
  TemplateSet() {
    for (auto k : kAllTemplateKinds) templates_.emplace(k, PromptTemplate(k, std::string(default_template_body(k))));
  }

  // Files missing from `dir` keep their built-in defaults.
  static TemplateSet load_dir(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw Error(Errc::Io, "template dir " + dir.string() + " not found");
    TemplateSet set;
    for (auto k : kAllTemplateKinds) {
      auto file = dir / template_file(k);
      if (!std::filesystem::exists(file)) continue;
      std::ifstream in(file);
      if (!in) throw Error(Errc::Io, "cannot read " + file.string());
      std::stringstream buf;
      buf << in.rdbuf();
      set.set(PromptTemplate(k, buf.str()));
    }
    return set;
  }

  void set(PromptTemplate t) { templates_.insert_or_assign(t.kind(), std::move(t)); }
  const PromptTemplate& get(TemplateKind kind) const { return templates_.at(kind); }

 private:
  std::map<TemplateKind, PromptTemplate> templates_;
};

}  // namespace syngraph
