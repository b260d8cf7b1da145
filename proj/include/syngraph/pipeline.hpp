#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "syngraph/baseline.hpp"
#include "syngraph/error.hpp"
#include "syngraph/graph.hpp"
#include "syngraph/interpolation.hpp"
#include "syngraph/llm.hpp"
#include "syngraph/metrics.hpp"
#include "syngraph/prompts.hpp"
#include "syngraph/review.hpp"
#include "syngraph/sparsity.hpp"
#include "syngraph/synthesis.hpp"

namespace syngraph {

struct PipelineConfig {
  std::filesystem::path input;
  std::filesystem::path output_dir = "out";
  int interval_count = 10;
  std::size_t sparse_threshold = 5;
  std::size_t second_order_threshold = 5;
  std::size_t min_interactions = 10;
  double front_fraction = 1.0;
  std::size_t clusters = 4;
  double train_ratio = 0.9;
  std::uint64_t seed = 0;
  bool lenient = false;
  BackendConfig backend;
  std::optional<std::filesystem::path> template_dir;
  // JSON object mapping user id to a predefined profile for extreme users.
  std::optional<std::filesystem::path> profiles_file;
  std::size_t review_limit = 5;
  std::size_t products_per_user = 3;

  SparsityConfig sparsity() const { return {sparse_threshold, second_order_threshold, clusters, seed, 100}; }

  InterpolationConfig interpolation() const { return {interval_count, min_interactions, front_fraction}; }

  LoadOptions load_options() const {
    return {lenient ? ParseMode::Lenient : ParseMode::Strict, interval_count};
  }
};

inline void validate(const PipelineConfig& cfg) {
  if (cfg.interval_count < 1) throw Error(Errc::InvalidConfig, "intervals must be >= 1");
  if (cfg.sparse_threshold == 0 || cfg.second_order_threshold == 0 || cfg.min_interactions == 0 ||
      cfg.clusters == 0 || cfg.review_limit == 0 || cfg.products_per_user == 0) {
    throw Error(Errc::InvalidConfig, "thresholds must be positive");
  }
  if (!(cfg.front_fraction >= 0.0 && cfg.front_fraction <= 1.0)) {
    throw Error(Errc::InvalidConfig, "front fraction must lie in [0, 1]");
  }
  if (!(cfg.train_ratio > 0.0 && cfg.train_ratio < 1.0)) {
    throw Error(Errc::InvalidConfig, "train_ratio must lie in (0, 1)");
  }
  validate(cfg.backend);
}

namespace detail {

inline std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  unsigned long long x = 0;
  try {
    if (!v.empty() && v[0] == '-') throw std::invalid_argument("negative");
    x = std::stoull(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw Error(Errc::InvalidConfig, key + ": expected a non-negative integer");
  return x;
}

inline double parse_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw Error(Errc::InvalidConfig, key + ": expected a number");
  return x;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw Error(Errc::InvalidConfig, key + ": expected true or false");
}

}  // namespace detail

// Applies one config key. `front` is a percentage; `front_fraction` a fraction.
inline void apply_config_value(PipelineConfig& cfg, const std::string& key, const std::string& value) {
  using detail::parse_double;
  using detail::parse_u64;
  if (key == "input") cfg.input = value;
  else if (key == "output") cfg.output_dir = value;
  else if (key == "intervals") cfg.interval_count = static_cast<int>(parse_u64(key, value));
  else if (key == "sparse_threshold") cfg.sparse_threshold = parse_u64(key, value);
  else if (key == "second_order_threshold") cfg.second_order_threshold = parse_u64(key, value);
  else if (key == "min_interactions") cfg.min_interactions = parse_u64(key, value);
  else if (key == "front") cfg.front_fraction = parse_double(key, value) / 100.0;
  else if (key == "front_fraction") cfg.front_fraction = parse_double(key, value);
  else if (key == "clusters") cfg.clusters = parse_u64(key, value);
  else if (key == "train_ratio") cfg.train_ratio = parse_double(key, value);
  else if (key == "seed") cfg.seed = parse_u64(key, value);
  else if (key == "lenient") cfg.lenient = detail::parse_bool(key, value);
  else if (key == "templates") cfg.template_dir = value;
  else if (key == "profiles") cfg.profiles_file = value;
  else if (key == "review_limit") cfg.review_limit = parse_u64(key, value);
  else if (key == "products_per_user") cfg.products_per_user = parse_u64(key, value);
  else if (key == "backend") {
    if (value == "mock") cfg.backend.kind = BackendConfig::Kind::Mock;
    else if (value == "http") cfg.backend.kind = BackendConfig::Kind::Http;
    else throw Error(Errc::InvalidConfig, "backend must be mock or http");
  }
  else if (key == "endpoint") cfg.backend.endpoint = value;
  else if (key == "model") cfg.backend.model = value;
  else if (key == "api_key_env") cfg.backend.api_key_env = value;
  else if (key == "max_attempts") cfg.backend.retry.max_attempts = static_cast<int>(parse_u64(key, value));
  else if (key == "timeout_ms") cfg.backend.timeout = std::chrono::milliseconds(parse_u64(key, value));
  else if (key == "max_in_flight") cfg.backend.max_in_flight = static_cast<int>(parse_u64(key, value));
  else if (key == "positive_skew") cfg.backend.positive_skew = parse_double(key, value);
  else throw Error(Errc::InvalidConfig, "unknown key '" + key + "'");
}

// `key = value` lines; blank lines and lines starting with '#' are ignored.
inline void apply_config_text(PipelineConfig& cfg, std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto body = detail::trim(line);
    if (body.empty() || body[0] == '#') continue;
    auto eq = body.find('=');
    if (eq == std::string::npos) throw Error(Errc::InvalidConfig, "expected key = value", line_no);
    auto key = detail::trim(std::string_view(body).substr(0, eq));
    auto value = detail::trim(std::string_view(body).substr(eq + 1));
    try {
      apply_config_value(cfg, key, value);
    } catch (const Error& e) {
      throw Error(e.code(), e.detail(), line_no);
    }
  }
}

inline void apply_config_file(PipelineConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open config " + path.string());
  apply_config_text(cfg, in);
}

inline TemplateSet load_templates(const std::optional<std::filesystem::path>& dir) {
  return dir ? TemplateSet::load_dir(*dir) : TemplateSet{};
}

inline std::map<std::string, std::string> load_profiles(const std::optional<std::filesystem::path>& path) {
  std::map<std::string, std::string> out;
  if (!path) return out;
  std::ifstream in(*path);
  if (!in) throw Error(Errc::Io, "cannot open profiles " + path->string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::Parse, path->string() + ": " + e.what());
  }
  if (!j.is_object()) throw Error(Errc::InvalidConfig, "profiles file must hold a JSON object");
  for (const auto& [user, text] : j.items()) {
    if (!text.is_string() || text.get<std::string>().empty()) {
      throw Error(Errc::InvalidConfig, "profile for " + user + " must be a non-empty string");
    }
    out[user] = text.get<std::string>();
  }
  return out;
}

inline SynthesisConfig synthesis_config(const PipelineConfig& cfg) {
  SynthesisConfig s;
  s.seed = cfg.seed;
  s.review_limit = cfg.review_limit;
  s.products_per_user = cfg.products_per_user;
  s.interval_count = cfg.interval_count;
  s.max_in_flight = cfg.backend.max_in_flight;
  s.external_profiles = load_profiles(cfg.profiles_file);
  return s;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(Errc::Io, "write failed for " + path.string());
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  write_text(path, j.dump(2) + "\n");
}

inline std::string assignments_csv(const std::vector<SparsityAssignment>& assignments) {
  std::ostringstream out;
  write_assignments_csv(out, assignments);
  return out.str();
}

// Thrown by run_pipeline's stages; names the stage that failed.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const Error& cause)
      : std::runtime_error(stage + ": " + cause.what()), stage_(std::move(stage)), cause_(cause) {}

  const std::string& stage() const { return stage_; }
  const Error& cause() const { return cause_; }

  nlohmann::json to_json() const {
    nlohmann::json j = {{"status", "error"},
                        {"stage", stage_},
                        {"code", std::string(to_string(cause_.code()))},
                        {"message", cause_.what()}};
    if (cause_.line()) j["line"] = *cause_.line();
    return j;
  }

 private:
  std::string stage_;
  Error cause_;
};

template <typename Fn>
auto run_stage(const std::string& stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    throw StageError(stage, e);
  } catch (const std::exception& e) {
    throw StageError(stage, Error(Errc::Io, e.what()));
  }
}

struct CategorizeOutput {
  DynamicGraph graph;
  std::vector<SparsityAssignment> assignments;
};

inline CategorizeOutput categorize_stream(const ReviewStream& stream, const SparsityConfig& cfg) {
  CategorizeOutput out{DynamicGraph::from_stream(stream), {}};
  out.assignments = categorize_users(stream, out.graph, cfg);
  return out;
}

// Slots found, the fill plan, and the events synthesized for the plan.
struct SynthesizeOutput {
  std::vector<InterpolationSlot> slots;
  std::vector<InterpolationSlot> plan;
  SynthesisResult synthesis;
};

inline SynthesizeOutput synthesize_stream(const ReviewStream& stream, const CategorizeOutput& cats,
                                          const InterpolationConfig& icfg, LlmBackend& backend,
                                          const TemplateSet& templates, const SynthesisConfig& scfg) {
  SynthesizeOutput out;
  out.slots = find_slots(stream, cats.assignments, icfg.interval_count);
  out.plan = plan_fills(stream, out.slots, icfg);
  out.synthesis = synthesize_slots(cats.graph, out.plan, backend, templates, scfg);
  return out;
}

struct PipelineResult {
  std::vector<std::filesystem::path> artifacts;
  Comparison comparison;
  InterpolationLedger ledger;
  std::map<SparsityCategory, std::size_t> category_counts;
};

// ingest, split, categorize, synthesize, interpolate, evaluate. The training
// part of the chronological split is augmented; the held-out tail scores the
// baseline warmed on the raw and on the augmented training stream.
inline PipelineResult run_pipeline(const PipelineConfig& cfg, LlmBackend& backend) {
  run_stage("config", [&] { validate(cfg); });
  auto templates = run_stage("config", [&] { return load_templates(cfg.template_dir); });
  auto scfg = run_stage("config", [&] { return synthesis_config(cfg); });

  auto stream = run_stage("ingest", [&] { return load_dataset(cfg.input, cfg.load_options()); });
  auto split = run_stage("split", [&] { return split_train_test(stream, cfg.train_ratio); });
  const ReviewStream& train = split.first;
  const ReviewStream& test = split.second;
  auto cats = run_stage("categorize", [&] { return categorize_stream(train, cfg.sparsity()); });
  auto icfg = cfg.interpolation();
  auto synth = run_stage("synthesize",
                         [&] { return synthesize_stream(train, cats, icfg, backend, templates, scfg); });
  auto augmented = run_stage(
      "interpolate", [&] { return interpolate_dataset(train, synth.slots, synth.synthesis.events, icfg); });
  auto comparison = run_stage("evaluate", [&] { return compare_raw_augmented(train, augmented.stream, test); });

  PipelineResult result;
  run_stage("write", [&] {
    std::filesystem::create_directories(cfg.output_dir);
    auto put = [&](const char* name, const std::string& text) {
      auto path = cfg.output_dir / name;
      write_text(path, text);
      result.artifacts.push_back(path);
    };
    put("categories.csv", assignments_csv(cats.assignments));
    put("run_report.json", synth.synthesis.report.to_json().dump(2) + "\n");
    put("augmented.jsonl", serialize_stream(augmented.stream));
    put("ledger.json", augmented.ledger.to_json().dump(2) + "\n");
    nlohmann::json metrics = comparison.to_json();
    metrics["train_events"] = train.size();
    metrics["test_events"] = test.size();
    metrics["synthesized_events"] = synth.synthesis.events.size();
    put("metrics.json", metrics.dump(2) + "\n");
    put("train.jsonl", serialize_stream(train));
    put("test.jsonl", serialize_stream(test));
  });
  result.comparison = comparison;
  result.ledger = augmented.ledger;
  result.category_counts = category_counts(cats.assignments);
  return result;
}

}  // namespace syngraph
