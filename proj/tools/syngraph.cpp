// syngraph command line: ingest, categorize, synthesize, interpolate,
// evaluate, report, pipeline. Errors print one JSON record on stderr.

#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "syngraph/http_transport.hpp"
#include "syngraph/syngraph.hpp"

namespace {

using namespace syngraph;

struct Options {
  std::string config_file;
  std::string input;
  std::string output;
  std::string synthesized;
  std::string report;
  std::string ledger;
  std::string train, augmented, test;
  std::string edges;
  std::size_t judge_limit = 50;
  double front_percent = 100.0;
  double ratio = 0.9;
};

// Flags registered on a subcommand; each one overrides the config file.
struct Flags {
  std::vector<std::pair<CLI::Option*, std::function<void(PipelineConfig&)>>> overrides;
};

void add_common(CLI::App* sub, Options& o, PipelineConfig& raw, Flags& flags, bool synthesis_flags) {
  sub->add_option("--config", o.config_file, "key = value config file; flags win");
  auto* in = sub->add_option("-i,--input", o.input, "input review JSONL");
  flags.overrides.push_back({in, [&o](PipelineConfig& c) { c.input = o.input; }});
  auto* lenient = sub->add_flag("--lenient", raw.lenient, "skip malformed lines with a warning");
  flags.overrides.push_back({lenient, [&raw](PipelineConfig& c) { c.lenient = raw.lenient; }});
  auto* t = sub->add_option("-T,--intervals", raw.interval_count, "timeline intervals")->check(CLI::PositiveNumber);
  flags.overrides.push_back({t, [&raw](PipelineConfig& c) { c.interval_count = raw.interval_count; }});
  auto* seed = sub->add_option("--seed", raw.seed, "top-level seed");
  flags.overrides.push_back({seed, [&raw](PipelineConfig& c) { c.seed = raw.seed; }});
  auto* st = sub->add_option("--sparse-threshold", raw.sparse_threshold, "max reviews of a sparse user");
  flags.overrides.push_back({st, [&raw](PipelineConfig& c) { c.sparse_threshold = raw.sparse_threshold; }});
  auto* so = sub->add_option("--second-order-threshold", raw.second_order_threshold,
                             "min second-order neighbors of a long-tail user");
  flags.overrides.push_back(
      {so, [&raw](PipelineConfig& c) { c.second_order_threshold = raw.second_order_threshold; }});
  auto* k = sub->add_option("--clusters", raw.clusters, "k-means clusters for dense users");
  flags.overrides.push_back({k, [&raw](PipelineConfig& c) { c.clusters = raw.clusters; }});
  if (!synthesis_flags) return;

  auto* mi = sub->add_option("--min-interactions", raw.min_interactions, "fill target per sparse user");
  flags.overrides.push_back({mi, [&raw](PipelineConfig& c) { c.min_interactions = raw.min_interactions; }});
  auto* front = sub->add_option("--front", o.front_percent, "fill only the first k percent of intervals")
                    ->check(CLI::Range(0.0, 100.0));
  flags.overrides.push_back({front, [&o](PipelineConfig& c) { c.front_fraction = o.front_percent / 100.0; }});
  auto* backend = sub->add_option_function<std::string>(
      "--backend", [&raw](const std::string& v) { apply_config_value(raw, "backend", v); }, "mock or http");
  flags.overrides.push_back({backend, [&raw](PipelineConfig& c) { c.backend.kind = raw.backend.kind; }});
  auto* endpoint = sub->add_option("--endpoint", raw.backend.endpoint, "chat completions URL");
  flags.overrides.push_back({endpoint, [&raw](PipelineConfig& c) { c.backend.endpoint = raw.backend.endpoint; }});
  auto* model = sub->add_option("--model", raw.backend.model, "model name");
  flags.overrides.push_back({model, [&raw](PipelineConfig& c) { c.backend.model = raw.backend.model; }});
  auto* key = sub->add_option("--api-key-env", raw.backend.api_key_env, "env var holding the API key");
  flags.overrides.push_back({key, [&raw](PipelineConfig& c) { c.backend.api_key_env = raw.backend.api_key_env; }});
  auto* mif = sub->add_option("--max-in-flight", raw.backend.max_in_flight, "parallel backend calls");
  flags.overrides.push_back(
      {mif, [&raw](PipelineConfig& c) { c.backend.max_in_flight = raw.backend.max_in_flight; }});
  auto* tpl = sub->add_option_function<std::string>(
      "--templates", [&raw](const std::string& v) { raw.template_dir = v; }, "prompt template directory");
  flags.overrides.push_back({tpl, [&raw](PipelineConfig& c) { c.template_dir = raw.template_dir; }});
  auto* prof = sub->add_option_function<std::string>(
      "--profiles", [&raw](const std::string& v) { raw.profiles_file = v; }, "JSON map of extreme-user profiles");
  flags.overrides.push_back({prof, [&raw](PipelineConfig& c) { c.profiles_file = raw.profiles_file; }});
}

PipelineConfig resolve(const Options& o, const Flags& flags) {
  PipelineConfig cfg;
  if (!o.config_file.empty()) run_stage("config", [&] { apply_config_file(cfg, o.config_file); });
  for (const auto& [opt, apply] : flags.overrides) {
    if (opt->count() > 0) apply(cfg);
  }
  run_stage("config", [&] { validate(cfg); });
  return cfg;
}

ReviewStream ingest(const PipelineConfig& cfg) {
  return run_stage("ingest", [&] {
    if (cfg.input.empty()) throw Error(Errc::InvalidConfig, "no input path");
    return load_dataset(cfg.input, cfg.load_options());
  });
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    write_text(path, text);
  }
}

int cmd_ingest(const PipelineConfig& cfg, const Options& o) {
  auto stream = ingest(cfg);
  auto graph = run_stage("ingest", [&] { return DynamicGraph::from_stream(stream); });
  run_stage("write", [&] {
    if (!o.output.empty()) save_stream(o.output, stream);
    if (!o.edges.empty()) {
      std::ostringstream csv;
      graph.write_edge_list_csv(csv);
      write_text(o.edges, csv.str());
    }
  });
  nlohmann::json summary = {{"events", stream.size()},
                            {"users", graph.user_count()},
                            {"products", graph.product_count()}};
  if (!stream.empty()) summary["span"] = {stream.span().begin, stream.span().end};
  std::cout << summary.dump() << "\n";
  return 0;
}

int cmd_categorize(const PipelineConfig& cfg, const Options& o) {
  auto stream = ingest(cfg);
  auto cats = run_stage("categorize", [&] { return categorize_stream(stream, cfg.sparsity()); });
  run_stage("write", [&] { emit(o.output, assignments_csv(cats.assignments)); });
  nlohmann::json counts;
  for (const auto& [c, n] : category_counts(cats.assignments)) counts[std::string(to_string(c))] = n;
  std::cerr << counts.dump() << "\n";
  return 0;
}

SynthesizeOutput synthesize(const PipelineConfig& cfg, const ReviewStream& stream, CategorizeOutput& cats) {
  auto templates = run_stage("config", [&] { return load_templates(cfg.template_dir); });
  auto scfg = run_stage("config", [&] { return synthesis_config(cfg); });
  auto backend = run_stage("config", [&] { return make_backend(cfg.backend); });
  return run_stage("synthesize", [&] {
    return synthesize_stream(stream, cats, cfg.interpolation(), *backend, templates, scfg);
  });
}

int cmd_synthesize(const PipelineConfig& cfg, const Options& o) {
  auto stream = ingest(cfg);
  auto cats = run_stage("categorize", [&] { return categorize_stream(stream, cfg.sparsity()); });
  auto out = synthesize(cfg, stream, cats);
  run_stage("write", [&] {
    emit(o.output, serialize_stream(ReviewStream(out.synthesis.events, cfg.interval_count)));
    if (!o.report.empty()) write_json(o.report, out.synthesis.report.to_json());
  });
  return 0;
}

int cmd_interpolate(const PipelineConfig& cfg, const Options& o) {
  auto stream = ingest(cfg);
  auto cats = run_stage("categorize", [&] { return categorize_stream(stream, cfg.sparsity()); });
  auto icfg = cfg.interpolation();
  auto slots = run_stage("interpolate", [&] { return find_slots(stream, cats.assignments, cfg.interval_count); });
  std::vector<ReviewEvent> synthesized;
  if (!o.synthesized.empty()) {
    synthesized = run_stage("interpolate", [&] {
      LoadOptions lo;
      return load_dataset(o.synthesized, lo).events();
    });
  } else {
    synthesized = synthesize(cfg, stream, cats).synthesis.events;
  }
  auto aug = run_stage("interpolate", [&] { return interpolate_dataset(stream, slots, synthesized, icfg); });
  run_stage("write", [&] {
    emit(o.output, serialize_stream(aug.stream));
    if (!o.ledger.empty()) write_json(o.ledger, aug.ledger.to_json());
  });
  return 0;
}

int cmd_evaluate(const PipelineConfig& cfg, const Options& o) {
  auto load = [&](const std::string& path) {
    return run_stage("ingest", [&] {
      if (path.empty()) throw Error(Errc::InvalidConfig, "evaluate needs --train, --augmented and --test");
      return load_dataset(path, cfg.load_options());
    });
  };
  auto train = load(o.train);
  auto aug = load(o.augmented);
  auto test = load(o.test);
  auto cmp = run_stage("evaluate", [&] { return compare_raw_augmented(train, aug, test); });
  run_stage("write", [&] { emit(o.output, cmp.to_json().dump(2) + "\n"); });
  return 0;
}

// Per-category vocabulary richness of synthesized and original texts, plus
// mean judge scores over up to judge_limit synthesized reviews per category.
int cmd_report(const PipelineConfig& cfg, const Options& o) {
  auto stream = ingest(cfg);
  auto templates = run_stage("config", [&] { return load_templates(cfg.template_dir); });
  auto backend = run_stage("config", [&] { return make_backend(cfg.backend); });
  nlohmann::json out = run_stage("report", [&] {
    std::map<std::string, std::vector<ReviewEvent>> by_user, by_product;
    std::map<std::string, std::vector<std::string>> texts;
    std::map<SparsityCategory, std::vector<const ReviewEvent*>> synth;
    for (const auto& e : stream.events()) {
      if (e.provenance.is_synthesized()) {
        texts[std::string(to_string(e.provenance.category))].push_back(e.text);
        synth[e.provenance.category].push_back(&e);
      } else {
        texts["original"].push_back(e.text);
        by_user[e.user_id].push_back(e);
        by_product[e.product_id].push_back(e);
      }
    }
    nlohmann::json j;
    for (const auto& [name, list] : texts) {
      j["vocabulary_richness"][name] = {{"texts", list.size()}, {"richness", vocabulary_richness(list)}};
    }
    const auto& rubric = templates.get(TemplateKind::JudgeRubric);
    for (const auto& [cat, events] : synth) {
      double sums[4] = {0, 0, 0, 0};
      std::size_t n = std::min(events.size(), o.judge_limit);
      for (std::size_t i = 0; i < n; ++i) {
        const auto& e = *events[i];
        auto s = judge_scores(e, by_user[e.user_id], by_product[e.product_id], *backend, rubric, cfg.seed);
        sums[0] += s.lss;
        sums[1] += s.rhs;
        sums[2] += s.ss;
        sums[3] += s.as_;
      }
      if (n == 0) continue;
      auto d = static_cast<double>(n);
      j["judge_scores"][std::string(to_string(cat))] = {
          {"judged", n}, {"LSS", sums[0] / d}, {"RHS", sums[1] / d}, {"SS", sums[2] / d}, {"AS", sums[3] / d}};
    }
    auto dist = class_distribution(stream);
    j["class_distribution"] = {{"5", dist[0]}, {"4", dist[1]}, {"3", dist[2]}, {"2", dist[3]}, {"1", dist[4]}};
    return j;
  });
  run_stage("write", [&] { emit(o.output, out.dump(2) + "\n"); });
  return 0;
}

int cmd_pipeline(PipelineConfig cfg, const Options& o) {
  if (!o.output.empty()) cfg.output_dir = o.output;
  auto backend = run_stage("config", [&] { return make_backend(cfg.backend); });
  auto result = run_pipeline(cfg, *backend);
  nlohmann::json summary;
  summary["status"] = "ok";
  for (const auto& p : result.artifacts) summary["artifacts"].push_back(p.string());
  summary["rmse_reduction_percent"] = result.comparison.rmse_reduction;
  std::cout << summary.dump() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LLM-driven interpolation of sparse users in streaming review graphs"};
  app.require_subcommand(1);

  Options o;
  PipelineConfig raw;
  std::map<std::string, Flags> flags;
  std::map<std::string, CLI::App*> subs;

  auto add = [&](const std::string& name, const std::string& help, bool synthesis_flags) {
    auto* sub = app.add_subcommand(name, help);
    add_common(sub, o, raw, flags[name], synthesis_flags);
    subs[name] = sub;
    return sub;
  };

  auto* ingest_cmd = add("ingest", "validate and normalize a review JSONL file", false);
  ingest_cmd->add_option("-o,--output", o.output, "canonical JSONL output");
  ingest_cmd->add_option("--edges", o.edges, "edge list CSV output");

  add("categorize", "assign sparsity categories", false)->add_option("-o,--output", o.output, "CSV output");

  auto* synth_cmd = add("synthesize", "generate pseudo-reviews for empty intervals", true);
  synth_cmd->add_option("-o,--output", o.output, "synthesized JSONL output");
  synth_cmd->add_option("--report", o.report, "run report JSON");

  auto* interp_cmd = add("interpolate", "merge synthesized reviews into the stream", true);
  interp_cmd->add_option("-o,--output", o.output, "augmented JSONL output");
  interp_cmd->add_option("--synthesized", o.synthesized, "output of synthesize; generated when omitted");
  interp_cmd->add_option("--ledger", o.ledger, "ledger JSON output");

  auto* eval_cmd = add("evaluate", "prequential baseline on raw vs augmented history", false);
  eval_cmd->add_option("--train", o.train, "raw training JSONL");
  eval_cmd->add_option("--augmented", o.augmented, "augmented training JSONL");
  eval_cmd->add_option("--test", o.test, "held-out JSONL");
  eval_cmd->add_option("-o,--output", o.output, "metrics JSON output");

  auto* report_cmd = add("report", "richness and judge-score tables for an augmented stream", true);
  report_cmd->add_option("-o,--output", o.output, "report JSON output");
  report_cmd->add_option("--judge-limit", o.judge_limit, "max judged reviews per category");

  add("pipeline", "run every stage and write all artifacts", true)
      ->add_option("-o,--output", o.output, "artifact directory");

  CLI11_PARSE(app, argc, argv);

  std::string name;
  for (const auto& [n, sub] : subs) {
    if (sub->parsed()) name = n;
  }
  try {
    auto cfg = resolve(o, flags[name]);
    if (name == "ingest") return cmd_ingest(cfg, o);
    if (name == "categorize") return cmd_categorize(cfg, o);
    if (name == "synthesize") return cmd_synthesize(cfg, o);
    if (name == "interpolate") return cmd_interpolate(cfg, o);
    if (name == "evaluate") return cmd_evaluate(cfg, o);
    if (name == "report") return cmd_report(cfg, o);
    return cmd_pipeline(cfg, o);
  } catch (const StageError& e) {
    std::cerr << e.to_json().dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"status", "error"}, {"stage", name}, {"message", e.what()}}.dump() << "\n";
    return 1;
  }
}
