#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "syngraph/detail/hash.hpp"
#include "syngraph/detail/parallel.hpp"
#include "syngraph/error.hpp"
#include "syngraph/graph.hpp"
#include "syngraph/interpolation.hpp"
#include "syngraph/llm.hpp"
#include "syngraph/prompts.hpp"
#include "syngraph/review.hpp"
#include "syngraph/sparsity.hpp"

namespace syngraph {

struct Profile {
  enum class Source { Generated, Predefined };

  std::string entity_id;
  NodeKind kind = NodeKind::User;
  std::string text;
  Source source = Source::Generated;
  std::vector<ReviewId> supporting_reviews;
};

inline constexpr const char* kDefaultExtremeProfile =
    "An occasional online shopper with little review history. Prefers well-reviewed, "
    "popular products, rates generously when a product meets expectations, and writes "
    "short, practical reviews focused on whether the product does its job.";

struct SynthesisConfig {
  std::uint64_t seed = 0;
  // Reviews sampled per entity for a prompt.
  std::size_t review_limit = 5;
  // Second-order candidates rendered into the selection prompt.
  std::size_t candidate_limit = 5;
  // Products kept per user after selection.
  std::size_t products_per_user = 3;
  // Size of the high-rated proxy set for extreme users.
  std::size_t high_rated_count = 3;
  int parse_retries = 2;
  int max_tokens = 512;
  double temperature = 0.0;
  int interval_count = 10;
  int max_in_flight = 1;
  std::string extreme_profile = kDefaultExtremeProfile;
  // Externally supplied profiles for extreme users, keyed by user id.
  std::map<std::string, std::string> external_profiles;
};

// One backend call as seen by the run report.
struct CallRecord {
  std::string stage;
  std::string entity;
  std::string prompt_hash;
  std::string backend;
  int attempts = 1;
  bool fallback = false;
  std::string note;
};

struct RunReport {
  std::vector<CallRecord> calls;

  void add(CallRecord r) { calls.push_back(std::move(r)); }
  void append(const RunReport& other) {
    calls.insert(calls.end(), other.calls.begin(), other.calls.end());
  }
  std::size_t fallback_count() const {
    return static_cast<std::size_t>(
        std::count_if(calls.begin(), calls.end(), [](const CallRecord& c) { return c.fallback; }));
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["call_count"] = calls.size();
    j["fallback_count"] = fallback_count();
    j["calls"] = nlohmann::json::array();
    for (const auto& c : calls) {
      nlohmann::json r = {{"stage", c.stage},       {"entity", c.entity},
                          {"prompt_hash", c.prompt_hash}, {"backend", c.backend},
                          {"attempts", c.attempts}, {"fallback", c.fallback}};
      if (!c.note.empty()) r["note"] = c.note;
      j["calls"].push_back(std::move(r));
    }
    return j;
  }
};

namespace detail {

inline Completion call_backend(LlmBackend& backend, const std::string& prompt, std::uint64_t seed,
                               const SynthesisConfig& cfg, RunReport* report, std::string stage,
                               std::string entity) {
  CompletionRequest req{prompt, cfg.max_tokens, cfg.temperature, seed};
  Completion c = backend.complete(req);
  if (report) {
    report->add({std::move(stage), std::move(entity), hex64(fnv1a64(prompt)), backend.name(),
                 c.attempts, false, {}});
  }
  return c;
}

inline std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  std::replace(s.begin(), s.end(), '\r', ' ');
  return s;
}

inline std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace detail

// Uniform seeded sample of `candidates` without replacement, capped at
// `limit`, returned in chronological (id) order.
inline std::vector<ReviewId> select_reviews(std::vector<ReviewId> candidates, std::size_t limit,
                                            std::uint64_t seed) {
  if (limit == 0) throw Error(Errc::InvalidArgument, "review limit must be >= 1");
  if (candidates.empty()) throw Error(Errc::EmptyHistory, "no reviews to sample");
  std::sort(candidates.begin(), candidates.end());
  if (candidates.size() > limit) {
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < limit; ++i) {
      std::size_t j = i + detail::draw_index(rng, candidates.size() - i);
      std::swap(candidates[i], candidates[j]);
    }
    candidates.resize(limit);
    std::sort(candidates.begin(), candidates.end());
  }
  return candidates;
}

inline std::vector<ReviewId> select_reviews(const DynamicGraph& graph, const NodeRef& entity,
                                            std::size_t limit, std::uint64_t seed) {
  try {
    return select_reviews(graph.reviews_of(entity), limit,
                          detail::derive_seed(seed, "reviews:" + entity.id));
  } catch (const Error& e) {
    if (e.code() == Errc::EmptyHistory) throw Error(Errc::EmptyHistory, entity.id);
    throw;
  }
}

// "- [rating 4] text" per review; neighbor blocks also name the author.
inline std::string render_reviews(const DynamicGraph& graph, const std::vector<ReviewId>& ids,
                                  bool with_author = false) {
  if (ids.empty()) return "(none)";
  std::string out;
  for (ReviewId r : ids) {
    const auto& e = graph.event_log().at(r);
    out += "- [";
    if (with_author) out += "user " + graph.user_of(r) + ", ";
    out += "rating " + std::to_string(e.rating) + "] ";
    out += e.text.empty() ? "(no text)" : detail::one_line(e.text);
    out += '\n';
  }
  out.pop_back();
  return out;
}

inline Span graph_span(const DynamicGraph& graph) {
  const auto& log = graph.event_log();
  if (log.empty()) throw Error(Errc::EmptyStream, "graph has no events");
  return {log.front().timestamp, log.back().timestamp};
}

// Interval (of T over the graph's span) holding the user's latest review.
inline TimeWindow local_window(const DynamicGraph& graph, const std::string& user, int interval_count) {
  const auto& mine = graph.reviews_of(NodeRef::user(user));
  Span span = graph_span(graph);
  auto t = static_cast<std::size_t>(interval_count);
  std::size_t idx = bucket_of(graph.event_log()[mine.back()].timestamp, span, t);
  // Interval idx covers (begin + idx*L/T, begin + (idx+1)*L/T]; the first one is closed.
  auto bound = [&](std::size_t k) {
    return span.begin + static_cast<Timestamp>(static_cast<__int128>(span.length()) * k / t);
  };
  Timestamp lo = idx == 0 ? span.begin : bound(idx) + 1;
  return {lo, bound(idx + 1)};
}

// Other users who reviewed any of `user`'s products inside `window`.
inline std::set<std::string> neighbor_users_in(const DynamicGraph& graph, const std::string& user,
                                               const TimeWindow& window) {
  std::set<std::string> out;
  for (const auto& p : graph.neighbors(NodeRef::user(user))) {
    for (ReviewId r : graph.reviews_of(NodeRef::product(p), window)) {
      if (graph.user_of(r) != user) out.insert(graph.user_of(r));
    }
  }
  return out;
}

// Reviews written by `users` on `user`'s products inside `window`.
inline std::vector<ReviewId> neighbor_reviews_in(const DynamicGraph& graph, const std::string& user,
                                                 const std::set<std::string>& users,
                                                 const TimeWindow& window) {
  std::vector<ReviewId> out;
  for (const auto& p : graph.neighbors(NodeRef::user(user))) {
    for (ReviewId r : graph.reviews_of(NodeRef::product(p), window)) {
      if (users.count(graph.user_of(r))) out.push_back(r);
    }
  }
  return out;
}

// Mid-tail: profile from the user's sampled reviews. Long-tail: the user's
// reviews plus reviews of second-order users from the local window (the
// interval holding the user's latest review) and from the whole history.
// Extreme: the predefined or externally supplied profile; no backend call.
inline Profile generate_user_profile(const std::string& user, SparsityCategory category,
                                     const DynamicGraph& graph, LlmBackend& backend,
                                     const TemplateSet& templates, const SynthesisConfig& cfg = {},
                                     RunReport* report = nullptr) {
  if (!graph.has_user(user)) throw Error(Errc::UnknownNode, "user " + user);
  Profile prof;
  prof.entity_id = user;
  prof.kind = NodeKind::User;

  if (category == SparsityCategory::Extreme) {
    auto it = cfg.external_profiles.find(user);
    prof.text = it != cfg.external_profiles.end() ? it->second : cfg.extreme_profile;
    if (prof.text.empty()) throw Error(Errc::InvalidConfig, "empty predefined profile");
    prof.source = Profile::Source::Predefined;
    return prof;
  }

  auto own = select_reviews(graph, NodeRef::user(user), cfg.review_limit, cfg.seed);
  std::string prompt;
  if (category == SparsityCategory::LongTail) {
    auto global_users = neighbor_users_in(graph, user, {});
    if (global_users.empty()) throw Error(Errc::InsufficientNeighbors, user);
    auto window = local_window(graph, user, cfg.interval_count);
    auto local_users = neighbor_users_in(graph, user, window);

    std::vector<ReviewId> local, global;
    if (!local_users.empty()) {
      local = select_reviews(neighbor_reviews_in(graph, user, local_users, window), cfg.review_limit,
                             detail::derive_seed(cfg.seed, "local:" + user));
    }
    global = select_reviews(neighbor_reviews_in(graph, user, global_users, {}), cfg.review_limit,
                            detail::derive_seed(cfg.seed, "global:" + user));
    prompt = templates.get(TemplateKind::UserLongTail)
                 .render({{"reviews", render_reviews(graph, own)},
                          {"local_reviews", render_reviews(graph, local, true)},
                          {"global_reviews", render_reviews(graph, global, true)}});
    prof.supporting_reviews = own;
    prof.supporting_reviews.insert(prof.supporting_reviews.end(), local.begin(), local.end());
    prof.supporting_reviews.insert(prof.supporting_reviews.end(), global.begin(), global.end());
  } else {
    prompt = templates.get(TemplateKind::UserProfile).render({{"reviews", render_reviews(graph, own)}});
    prof.supporting_reviews = own;
  }
  auto c = detail::call_backend(backend, prompt, detail::derive_seed(cfg.seed, "user:" + user), cfg,
                                report, "user_profile", user);
  prof.text = detail::trim(c.text);
  if (prof.text.empty()) throw Error(Errc::UnparseableOutput, "empty profile for user " + user);
  return prof;
}

// Profile of `product` from its sampled reviews, or from `substitute`
// reviews when given.
inline Profile generate_product_profile(const std::string& product, const DynamicGraph& graph,
                                        LlmBackend& backend, const TemplateSet& templates,
                                        const SynthesisConfig& cfg = {}, RunReport* report = nullptr,
                                        const std::vector<ReviewId>* substitute = nullptr) {
  std::vector<ReviewId> chosen;
  if (substitute) {
    chosen = select_reviews(*substitute, cfg.review_limit, detail::derive_seed(cfg.seed, "subst:" + product));
  } else {
    if (!graph.has_product(product)) throw Error(Errc::UnknownNode, "product " + product);
    chosen = select_reviews(graph, NodeRef::product(product), cfg.review_limit, cfg.seed);
  }
  auto prompt = templates.get(TemplateKind::ProductProfile).render({{"reviews", render_reviews(graph, chosen)}});
  auto c = detail::call_backend(backend, prompt, detail::derive_seed(cfg.seed, "product:" + product), cfg,
                                report, "product_profile", product);
  Profile prof{product, NodeKind::Product, detail::trim(c.text), Profile::Source::Generated, std::move(chosen)};
  if (prof.text.empty()) throw Error(Errc::UnparseableOutput, "empty profile for product " + product);
  return prof;
}

// Thread-safe memo of generated product profiles. A failed generation
// leaves no entry behind.
class ProductProfileCache {
 public:
  bool contains(const std::string& product) const {
    std::lock_guard lock(mu_);
    return cache_.count(product) != 0;
  }

  Profile get_or_generate(const std::string& product, const DynamicGraph& graph, LlmBackend& backend,
                          const TemplateSet& templates, const SynthesisConfig& cfg, RunReport* report) {
    {
      std::lock_guard lock(mu_);
      auto it = cache_.find(product);
      if (it != cache_.end()) return it->second;
    }
    Profile p = generate_product_profile(product, graph, backend, templates, cfg, report);
    std::lock_guard lock(mu_);
    return cache_.emplace(product, std::move(p)).first->second;
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return cache_.size();
  }

 private:
  mutable std::mutex mu_;
  std::map<std::string, Profile> cache_;
};

// Products ordered by review count (desc), then id.
inline std::vector<std::string> rank_by_review_count(const DynamicGraph& graph,
                                                     const std::set<std::string>& products) {
  std::vector<std::string> out(products.begin(), products.end());
  std::stable_sort(out.begin(), out.end(), [&](const std::string& a, const std::string& b) {
    return graph.reviews_of(NodeRef::product(a)).size() > graph.reviews_of(NodeRef::product(b)).size();
  });
  return out;
}

// Products reviewed by the user's second-order neighbors that the user has
// not reviewed, most-reviewed first.
inline std::vector<std::string> second_order_candidates(const DynamicGraph& graph, const std::string& user) {
  auto own = graph.neighbors(NodeRef::user(user));
  std::set<std::string> cands;
  for (const auto& v : graph.second_order_neighbors(user)) {
    for (const auto& p : graph.neighbors(NodeRef::user(v))) {
      if (!own.count(p)) cands.insert(p);
    }
  }
  return rank_by_review_count(graph, cands);
}

// The user's own product with the most reviews; anchors the selection prompt.
inline std::string anchor_product(const DynamicGraph& graph, const std::string& user) {
  auto own = graph.neighbors(NodeRef::user(user));
  if (own.empty()) throw Error(Errc::PreconditionViolated, "user " + user + " has no products");
  return rank_by_review_count(graph, own).front();
}

// Top-n products by mean rating, then review count, then id.
inline std::vector<std::string> high_rated_products(const DynamicGraph& graph, std::size_t n,
                                                    const std::set<std::string>& exclude = {}) {
  struct Entry {
    std::string id;
    double mean;
    std::size_t count;
  };
  std::vector<Entry> entries;
  for (const auto& p : graph.product_ids()) {
    if (exclude.count(p)) continue;
    const auto& rs = graph.reviews_of(NodeRef::product(p));
    double sum = 0.0;
    for (ReviewId r : rs) sum += graph.event_log()[r].rating;
    entries.push_back({p, sum / static_cast<double>(rs.size()), rs.size()});
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.mean != b.mean) return a.mean > b.mean;
    if (a.count != b.count) return a.count > b.count;
    return a.id < b.id;
  });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < entries.size() && i < n; ++i) out.push_back(entries[i].id);
  return out;
}

// Parses "selected: a, b" into ids that belong to `allowed`, keeping order
// and dropping duplicates.
inline std::vector<std::string> parse_selection(const std::string& text,
                                                const std::vector<std::string>& allowed, std::size_t k) {
  std::set<std::string> ok(allowed.begin(), allowed.end());
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string line = detail::trim(std::string_view(text).substr(pos, eol - pos));
    std::string lower = line;
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower.rfind("selected:", 0) == 0) {
      std::string rest = line.substr(9);
      std::size_t start = 0;
      while (start <= rest.size()) {
        std::size_t comma = rest.find(',', start);
        if (comma == std::string::npos) comma = rest.size();
        std::string id = detail::trim(std::string_view(rest).substr(start, comma - start));
        if (ok.count(id) && std::find(out.begin(), out.end(), id) == out.end() && out.size() < k) {
          out.push_back(id);
        }
        start = comma + 1;
      }
      break;
    }
    pos = eol + 1;
  }
  return out;
}

// Candidates are products of second-order users the user has not reviewed.
// Their profiles go into the selection prompt next to the profile of the
// user's anchor product; the backend's pick is parsed to at most k ids. An
// unusable answer falls back to the k most-reviewed candidates and is flagged
// in the report.
inline std::vector<Profile> select_second_order_products(const std::string& user, const DynamicGraph& graph,
                                                         LlmBackend& backend, const TemplateSet& templates,
                                                         std::size_t k, ProductProfileCache& cache,
                                                         const SynthesisConfig& cfg = {},
                                                         RunReport* report = nullptr) {
  if (k == 0) throw Error(Errc::InvalidArgument, "k must be >= 1");
  if (!graph.has_user(user)) throw Error(Errc::UnknownNode, "user " + user);
  auto anchor = anchor_product(graph, user);
  auto cands = second_order_candidates(graph, user);
  if (cands.empty()) throw Error(Errc::NoCandidates, user);
  if (cands.size() > cfg.candidate_limit) cands.resize(cfg.candidate_limit);

  auto self = cache.get_or_generate(anchor, graph, backend, templates, cfg, report);
  std::map<std::string, Profile> profiles;
  std::string block;
  for (const auto& p : cands) {
    auto prof = cache.get_or_generate(p, graph, backend, templates, cfg, report);
    block += "candidate " + p + ": " + detail::one_line(prof.text) + "\n";
    profiles.emplace(p, std::move(prof));
  }
  block.pop_back();
  auto prompt = templates.get(TemplateKind::SecondOrderSelect)
                    .render({{"self_profile", "product " + anchor + ": " + detail::one_line(self.text)},
                             {"candidate_profiles", block}});
  auto c = detail::call_backend(backend, prompt, detail::derive_seed(cfg.seed, "select:" + user), cfg, report,
                                "second_order_select", user);
  auto chosen = parse_selection(c.text, cands, k);
  if (chosen.empty()) {
    chosen.assign(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(std::min(k, cands.size())));
    if (report) {
      report->calls.back().fallback = true;
      report->calls.back().note = "unparseable selection; used top-k by review count";
    }
  }
  std::vector<Profile> out;
  for (const auto& id : chosen) out.push_back(profiles.at(id));
  return out;
}

struct ParsedReview {
  Rating rating = 0;
  std::string text;
};

// Reads "rating: R" and "review: ..." (the review may continue on later
// lines). Throws UnparseableOutput or RatingOutOfRange.
inline ParsedReview parse_review_output(const std::string& text) {
  std::optional<long long> rating;
  std::optional<std::string> review;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string line = detail::trim(std::string_view(text).substr(pos, eol - pos));
    std::string lower = line;
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (!rating && lower.rfind("rating:", 0) == 0) {
      std::string v = detail::trim(std::string_view(line).substr(7));
      std::size_t used = 0;
      try {
        rating = std::stoll(v, &used);
      } catch (const std::exception&) {
        throw Error(Errc::UnparseableOutput, "rating value '" + v + "'");
      }
      // Allow "4/5" or "4 stars" but not "4.5".
      if (used < v.size() && v[used] == '.') throw Error(Errc::UnparseableOutput, "fractional rating '" + v + "'");
    } else if (!review && lower.rfind("review:", 0) == 0) {
      std::string rest = std::string(line.substr(7));
      if (eol < text.size()) rest += "\n" + text.substr(eol + 1);
      review = detail::trim(rest);
      break;
    }
    pos = eol + 1;
  }
  if (!rating) throw Error(Errc::UnparseableOutput, "missing 'rating:' line");
  if (!review || review->empty()) throw Error(Errc::UnparseableOutput, "missing 'review:' text");
  if (*rating < 1 || *rating > 5) throw Error(Errc::RatingOutOfRange, std::to_string(*rating));
  return {static_cast<Rating>(*rating), *review};
}

// Target product for a slot: the selected profiles are used round-robin by
// interval index.
inline std::size_t target_index(const InterpolationSlot& slot, std::size_t n_products) {
  return slot.interval % n_products;
}

// Fills the synthesis prompt with the user profile and the product profile
// set (target product first), then parses the answer. Unusable answers are
// re-prompted up to cfg.parse_retries times with a format reminder.
inline ReviewEvent synthesize_review(const Profile& user_profile, const std::vector<Profile>& product_profiles,
                                     const InterpolationSlot& slot, LlmBackend& backend,
                                     const TemplateSet& templates, const SynthesisConfig& cfg = {},
                                     RunReport* report = nullptr) {
  if (user_profile.text.empty()) throw Error(Errc::PreconditionViolated, "empty user profile");
  if (product_profiles.empty()) throw Error(Errc::PreconditionViolated, "no product profiles");
  for (const auto& p : product_profiles) {
    if (p.text.empty()) throw Error(Errc::PreconditionViolated, "empty product profile " + p.entity_id);
  }
  const auto& target = product_profiles[target_index(slot, product_profiles.size())];
  std::string block = "target product " + target.entity_id + ": " + detail::one_line(target.text);
  for (const auto& p : product_profiles) {
    if (p.entity_id == target.entity_id) continue;
    block += "\nrelated product " + p.entity_id + ": " + detail::one_line(p.text);
  }
  const std::string base = templates.get(TemplateKind::DataSynthesis)
                               .render({{"user_profile", detail::one_line(user_profile.text)},
                                        {"product_profiles", block}});
  const std::string entity = slot.user_id + "@" + std::to_string(slot.interval);

  std::optional<Error> last;
  for (int attempt = 0; attempt <= cfg.parse_retries; ++attempt) {
    std::string prompt = base;
    if (attempt > 0) {
      prompt += "\nYour previous answer could not be used (" + std::string(last->what()) +
                "). Reply with exactly two lines, 'rating: <integer 1-5>' and 'review: <text>'.\n";
    }
    auto seed = detail::derive_seed(cfg.seed, "synth:" + entity + "#" + std::to_string(attempt));
    auto c = detail::call_backend(backend, prompt, seed, cfg, report, "data_synthesis", entity);
    try {
      auto parsed = parse_review_output(c.text);
      if (report && attempt > 0) report->calls.back().note = "parse attempt " + std::to_string(attempt + 1);
      ReviewEvent ev;
      ev.user_id = slot.user_id;
      ev.product_id = target.entity_id;
      ev.timestamp = slot.timestamp;
      ev.rating = parsed.rating;
      ev.text = std::move(parsed.text);
      ev.provenance = Provenance::synthesized(slot.category);
      return ev;
    } catch (const Error& e) {
      if (e.code() != Errc::UnparseableOutput && e.code() != Errc::RatingOutOfRange) throw;
      last = e;
    }
  }
  throw Error(last->code(), std::string(last->detail()) + " after " + std::to_string(cfg.parse_retries + 1) +
                                " attempts for " + entity);
}

// Product profile set for one sparse user (the P_set of each category).
inline std::vector<Profile> product_set_for(const std::string& user, SparsityCategory category,
                                            const DynamicGraph& graph, LlmBackend& backend,
                                            const TemplateSet& templates, ProductProfileCache& cache,
                                            const SynthesisConfig& cfg, RunReport* report) {
  auto high_rated = [&] {
    auto own = graph.neighbors(NodeRef::user(user));
    auto ids = high_rated_products(graph, cfg.high_rated_count, own);
    if (ids.empty()) ids = high_rated_products(graph, cfg.high_rated_count);
    std::vector<Profile> out;
    for (const auto& id : ids) out.push_back(cache.get_or_generate(id, graph, backend, templates, cfg, report));
    return out;
  };
  if (category == SparsityCategory::Extreme) return high_rated();
  try {
    return select_second_order_products(user, graph, backend, templates, cfg.products_per_user, cache, cfg,
                                        report);
  } catch (const Error& e) {
    if (e.code() != Errc::NoCandidates) throw;
    if (report) {
      report->add({"second_order_select", user, "", backend.name(), 0, true,
                   "no second-order candidates; used high-rated products"});
    }
    return high_rated();
  }
}

// Profile, product set, then one synthesized event per slot.
inline std::vector<ReviewEvent> synthesize_for_user(const std::string& user, SparsityCategory category,
                                                    const std::vector<InterpolationSlot>& slots,
                                                    const DynamicGraph& graph, LlmBackend& backend,
                                                    const TemplateSet& templates, ProductProfileCache& cache,
                                                    const SynthesisConfig& cfg = {}, RunReport* report = nullptr) {
  std::vector<ReviewEvent> out;
  if (slots.empty()) return out;
  if (!is_sparse_category(category)) throw Error(Errc::PreconditionViolated, "normal users are not augmented");
  auto profile = generate_user_profile(user, category, graph, backend, templates, cfg, report);
  auto products = product_set_for(user, category, graph, backend, templates, cache, cfg, report);
  for (const auto& slot : slots) {
    if (slot.user_id != user) throw Error(Errc::InvalidArgument, "slot belongs to " + slot.user_id);
    out.push_back(synthesize_review(profile, products, slot, backend, templates, cfg, report));
  }
  return out;
}

struct SynthesisResult {
  std::vector<ReviewEvent> events;
  RunReport report;
};

// Synthesizes one event for every planned slot. Product profiles are built in
// a first pass (sorted by id) so per-user work only reads the cache; both
// passes may run in parallel and still produce identical, ordered output.
inline SynthesisResult synthesize_slots(const DynamicGraph& graph, const std::vector<InterpolationSlot>& plan,
                                        LlmBackend& backend, const TemplateSet& templates,
                                        const SynthesisConfig& cfg = {}) {
  std::map<std::string, std::vector<InterpolationSlot>> by_user;
  std::map<std::string, SparsityCategory> category;
  for (const auto& s : plan) {
    by_user[s.user_id].push_back(s);
    category[s.user_id] = s.category;
  }

  std::set<std::string> needed;
  for (const auto& [user, slots] : by_user) {
    if (category[user] == SparsityCategory::Extreme) {
      auto own = graph.neighbors(NodeRef::user(user));
      auto ids = high_rated_products(graph, cfg.high_rated_count, own);
      if (ids.empty()) ids = high_rated_products(graph, cfg.high_rated_count);
      needed.insert(ids.begin(), ids.end());
      continue;
    }
    auto cands = second_order_candidates(graph, user);
    if (cands.empty()) {
      auto ids = high_rated_products(graph, cfg.high_rated_count, graph.neighbors(NodeRef::user(user)));
      needed.insert(ids.begin(), ids.end());
      continue;
    }
    needed.insert(anchor_product(graph, user));
    if (cands.size() > cfg.candidate_limit) cands.resize(cfg.candidate_limit);
    needed.insert(cands.begin(), cands.end());
  }

  ProductProfileCache cache;
  std::vector<std::string> products(needed.begin(), needed.end());
  std::vector<RunReport> product_reports(products.size());
  detail::parallel_for(products.size(), cfg.max_in_flight, [&](std::size_t i) {
    cache.get_or_generate(products[i], graph, backend, templates, cfg, &product_reports[i]);
  });

  std::vector<std::string> users;
  for (const auto& [user, slots] : by_user) users.push_back(user);
  std::vector<std::vector<ReviewEvent>> events(users.size());
  std::vector<RunReport> user_reports(users.size());
  detail::parallel_for(users.size(), cfg.max_in_flight, [&](std::size_t i) {
    const auto& u = users[i];
    events[i] = synthesize_for_user(u, category[u], by_user[u], graph, backend, templates, cache, cfg,
                                    &user_reports[i]);
  });

  SynthesisResult out;
  for (const auto& r : product_reports) out.report.append(r);
  for (std::size_t i = 0; i < users.size(); ++i) {
    out.report.append(user_reports[i]);
    out.events.insert(out.events.end(), events[i].begin(), events[i].end());
  }
  return out;
}

}  // namespace syngraph
