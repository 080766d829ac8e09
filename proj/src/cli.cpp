#include "pcpipe/cli.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <memory>

#include <json.hpp>

#include "pcpipe/util.hpp"

namespace pcpipe {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

long now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

std::string dirname_of(const std::string& path) {
  size_t slash = path.find_last_of('/');
  if (slash == std::string::npos) return ".";
  if (slash == 0) return "/";
  return path.substr(0, slash);
}

StagePolicy policy_from_name(const std::string& name) {
  if (name == "generate_evaluate_repair") return StagePolicy::generate_evaluate_repair;
  if (name == "generate_only") return StagePolicy::generate_only;
  if (name == "manual") return StagePolicy::manual;
  throw ConfigError("unknown dataset policy: " + name);
}

UnitKind unit_from_name(const std::string& name) {
  if (name == "task") return UnitKind::task;
  if (name == "instance") return UnitKind::instance;
  throw ConfigError("unknown unit kind: " + name);
}

int run_guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    std::cerr << json{{"error", "config"}, {"detail", e.what()}}.dump() << "\n";
    return kExitConfig;
  } catch (const MixtureError& e) {
    std::cerr << json{{"error", "config"}, {"detail", e.what()}}.dump() << "\n";
    return kExitConfig;
  } catch (const ScoreError& e) {
    std::cerr << json{{"error", "config"}, {"detail", e.what()}}.dump() << "\n";
    return kExitConfig;
  } catch (const NormalizeError& e) {
    std::cerr << json{{"error", "config"}, {"detail", e.what()}}.dump() << "\n";
    return kExitConfig;
  } catch (const GatewayError& e) {
    std::cerr << json{{"error", "endpoint"}, {"detail", e.what()}}.dump() << "\n";
    return kExitEndpoint;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", "io"}, {"detail", e.what()}}.dump() << "\n";
    return kExitIo;
  }
}

}  // namespace

std::string endpoint_host_only(const std::string& base_url) {
  std::string rest = base_url;
  size_t scheme = rest.find("://");
  if (scheme != std::string::npos) rest = rest.substr(scheme + 3);
  size_t cut = rest.find_first_of(":/");
  return cut == std::string::npos ? rest : rest.substr(0, cut);
}

void log_event(const std::string& event, const std::map<std::string, std::string>& fields) {
  json line;
  line["ts_ms"] = now_ms();
  line["event"] = event;
  for (const auto& [k, v] : fields) line[k] = v;
  std::cerr << line.dump() << "\n";
}

std::string resolve_path(const ToolConfig& config, const std::string& path) {
  if (path.empty() || path.front() == '/') return path;
  return config.base_dir + "/" + path;
}

ToolConfig load_config(const std::string& path) {
  std::string raw;
  try {
    raw = read_file(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  json doc = json::parse(raw, nullptr, false);
  if (doc.is_discarded() || !doc.is_object())
    throw ConfigError("config is not a JSON object: " + path);

  ToolConfig config;
  config.config_path = path;
  config.config_hash = content_hash(raw);
  config.base_dir = dirname_of(path);

  if (doc.contains("endpoint")) {
    const json& ep = doc["endpoint"];
    config.endpoint.base_url = ep.value("base_url", std::string{});
    config.endpoint.api = ep.value("api", std::string{"completions"});
    config.endpoint.model = ep.value("model", std::string{});
    config.endpoint.timeout_seconds = ep.value("timeout_seconds", 120);
    if (ep.contains("request_log"))
      config.endpoint.request_log_path =
          resolve_path(config, ep["request_log"].get<std::string>());
    std::string key_env = ep.value("api_key_env", std::string{"PCPIPE_API_KEY"});
    if (const char* key = std::getenv(key_env.c_str())) config.endpoint.api_key = key;
    if (const char* override_url = std::getenv("PCPIPE_ENDPOINT"))
      config.endpoint.base_url = override_url;
    if (ep.contains("retry")) {
      const json& r = ep["retry"];
      config.endpoint.retry.attempts = r.value("attempts", 3);
      config.endpoint.retry.base_delay_ms = r.value("base_delay_ms", 1000);
      config.endpoint.retry.jitter = r.value("jitter", 0.25);
    }
  }

  if (doc.contains("templates"))
    for (auto& [name, p] : doc["templates"].items())
      config.template_paths[name] = resolve_path(config, p.get<std::string>());

  auto read_stage = [&](const char* key, StageParams& params) {
    if (!doc.contains(key)) return;
    params.temperature = doc[key].value("temperature", params.temperature);
    params.max_tokens = doc[key].value("max_tokens", params.max_tokens);
  };
  read_stage("generation", config.generation);
  read_stage("evaluation", config.evaluation);

  if (doc.contains("repair")) {
    const json& r = doc["repair"];
    if (r.contains("temperatures"))
      config.repair.temperatures = r["temperatures"].get<std::vector<double>>();
    config.repair.max_rounds = r.value("max_rounds", 2);
    config.repair.max_testcases = r.value("max_testcases", 3);
    if (config.repair.temperatures.empty())
      throw ConfigError("repair.temperatures must be non-empty");
  }

  if (doc.contains("datasets")) {
    for (auto& [name, d] : doc["datasets"].items()) {
      DatasetConfig dc;
      dc.policy.dataset = name;
      dc.corpus_path = resolve_path(config, d.value("corpus", std::string{}));
      dc.policy.policy = policy_from_name(d.value("policy", std::string{"generate_only"}));
      dc.policy.unit = unit_from_name(d.value("unit", std::string{"instance"}));
      dc.task_structured = d.value("task_structured", dc.policy.unit == UnitKind::task);
      if (d.contains("demos"))
        dc.policy.demos_path = resolve_path(config, d["demos"].get<std::string>());
      if (d.contains("programs"))
        for (auto& [task, p] : d["programs"].items())
          dc.policy.manual_programs[task] = resolve_path(config, p.get<std::string>());
      if (d.contains("adapter"))
        for (auto& [from, to] : d["adapter"].items())
          dc.adapter[from] = to.get<std::string>();
      config.datasets[name] = std::move(dc);
    }
  }

  if (doc.contains("mixture")) {
    MixtureSpec spec;
    const json& m = doc["mixture"];
    for (const auto& e : m.value("entries", json::array())) {
      MixtureEntry entry;
      entry.dataset = e.at("dataset").get<std::string>();
      entry.proportion = e.at("proportion").get<double>();
      if (e.contains("per_task_cap") && !e["per_task_cap"].is_null())
        entry.per_task_cap = e["per_task_cap"].get<int64_t>();
      spec.entries.push_back(std::move(entry));
    }
    spec.budget = m.value("budget", int64_t{0});
    spec.seed = m.value("seed", uint64_t{0});
    config.mixture = std::move(spec);
  }

  if (doc.contains("normalizers")) {
    for (auto& [dataset, n] : doc["normalizers"].items()) {
      NormalizerSpec spec;
      spec.dataset = dataset;
      spec.kind = normalizer_kind_from_name(n.value("kind", std::string{"verbatim"}));
      spec.options_key = n.value("options_key", std::string{"options"});
      config.normalizers[dataset] = spec;
    }
  }
  return config;
}

MixtureSpec mixture_spec_from_json(const std::string& json_text) {
  json doc = json::parse(json_text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object())
    throw ConfigError("mixture spec is not a JSON object");
  MixtureSpec spec;
  for (const auto& e : doc.value("entries", json::array())) {
    MixtureEntry entry;
    entry.dataset = e.at("dataset").get<std::string>();
    entry.proportion = e.at("proportion").get<double>();
    if (e.contains("per_task_cap") && !e["per_task_cap"].is_null())
      entry.per_task_cap = e["per_task_cap"].get<int64_t>();
    spec.entries.push_back(std::move(entry));
  }
  spec.budget = doc.value("budget", int64_t{0});
  spec.seed = doc.value("seed", uint64_t{0});
  return spec;
}

void write_manifest(const RunManifest& manifest, const std::string& path) {
  ordered_json doc;
  doc["tool_version"] = manifest.tool_version;
  doc["config_hash"] = manifest.config_hash;
  if (!manifest.seeds.empty()) doc["seeds"] = manifest.seeds;
  if (!manifest.inputs.empty()) doc["inputs"] = manifest.inputs;
  if (!manifest.outputs.empty()) doc["outputs"] = manifest.outputs;
  if (!manifest.counters.empty()) doc["counters"] = manifest.counters;
  if (!manifest.timings_ms.empty()) doc["timings_ms"] = manifest.timings_ms;
  if (!manifest.endpoint_host.empty()) doc["endpoint_host"] = manifest.endpoint_host;
  write_file(path, doc.dump(2) + "\n");
}

// ---- pipeline commands ----

namespace {

struct PipelineSetup {
  ToolConfig config;
  std::unique_ptr<LlmClient> client;
  PipelineContext ctx;
};

PipelineSetup make_pipeline_setup(const PipelineArgs& args) {
  PipelineSetup setup;
  setup.config = load_config(args.config_path);
  if (setup.config.endpoint.base_url.empty())
    throw ConfigError("endpoint.base_url missing from config");

  auto need_template = [&](const std::string& name) {
    auto it = setup.config.template_paths.find(name);
    if (it == setup.config.template_paths.end())
      throw ConfigError("template '" + name + "' missing from config");
    return load_template(name, it->second);
  };

  setup.client = std::make_unique<LlmClient>(setup.config.endpoint);
  setup.ctx.client = setup.client.get();
  setup.ctx.generate_template = need_template("generate");
  setup.ctx.repair_template = need_template("repair");
  setup.ctx.eval_pc_template = need_template("eval_pc");
  setup.ctx.eval_nl_template = need_template("eval_nl");
  setup.ctx.generate_params = setup.config.generation;
  setup.ctx.eval_params = setup.config.evaluation;
  setup.ctx.repair = setup.config.repair;
  setup.ctx.seed = args.seed.value_or(
      setup.config.mixture ? setup.config.mixture->seed : uint64_t{0});
  setup.ctx.log = [](const std::string& msg) { log_event("pipeline", {{"detail", msg}}); };
  return setup;
}

Corpus read_dataset_corpus(const ToolConfig& config, const std::string& name) {
  auto it = config.datasets.find(name);
  if (it == config.datasets.end()) throw ConfigError("dataset not in config: " + name);
  ReadOptions opts;
  if (it->second.task_structured) opts.task_structured.insert(name);
  if (!it->second.adapter.empty()) opts.adapters[name] = it->second.adapter;
  opts.default_dataset = name;
  return read_corpus(it->second.corpus_path, opts);
}

std::vector<std::string> selected_datasets(const ToolConfig& config,
                                           const std::optional<std::string>& only) {
  std::vector<std::string> names;
  for (const auto& [name, _] : config.datasets) {
    if (only && *only != name) continue;
    names.push_back(name);
  }
  if (only && names.empty()) throw ConfigError("dataset not in config: " + *only);
  return names;
}

int pipeline_exit_code(const RunStats& stats, const std::vector<PipelineRecord>& records) {
  if (stats.processed == 0) return kExitOk;
  size_t retriable = 0;
  for (const auto& r : records)
    if (r.retriable()) ++retriable;
  // total failure against the endpoint
  if (stats.accepted == 0 && retriable > 0 && retriable == stats.rejected)
    return kExitEndpoint;
  return kExitOk;
}

struct FilterResult {
  PairedCorpora paired;
  std::string nl_path;
  std::string pc_path;
};

FilterResult filter_from_state(const ToolConfig& config, const PipelineArgs& args) {
  StateLog state(args.state_path);
  if (!file_exists(state.path()))
    throw IoError("state log not found: " + state.path());
  auto by_unit = state.replay();
  std::vector<PipelineRecord> records;
  records.reserve(by_unit.size());
  for (auto& [_, rec] : by_unit) records.push_back(rec);

  Corpus all_nl;
  for (const auto& name : selected_datasets(config, args.dataset)) {
    Corpus c = read_dataset_corpus(config, name);
    for (auto& inst : c.instances) all_nl.instances.push_back(std::move(inst));
  }

  FilterResult result;
  result.paired = filter_and_pair(records, all_nl);
  result.nl_path = args.out_dir + "/filtered_nl.jsonl";
  result.pc_path = args.out_dir + "/filtered_pc.jsonl";

  Corpus nl_out = result.paired.nl;
  write_corpus(nl_out, result.nl_path);
  std::string pc_text;
  for (const auto& pc : result.paired.pc) pc_text += serialize_pc_instance(pc) + "\n";
  write_file(result.pc_path, pc_text);
  return result;
}

}  // namespace

int cmd_pipeline(const PipelineArgs& args, RunPhase phase) {
  return run_guarded([&]() -> int {
    auto started = now_ms();
    PipelineSetup setup = make_pipeline_setup(args);

    if (file_exists(args.state_path) && !args.resume && phase == RunPhase::generate)
      throw IoError("state log already exists (pass --resume to continue): " +
                    args.state_path);
    StateLog state(args.state_path);

    RunManifest manifest;
    manifest.config_hash = setup.config.config_hash;
    manifest.seeds["pipeline"] = setup.ctx.seed;
    manifest.endpoint_host = endpoint_host_only(setup.config.endpoint.base_url);
    manifest.inputs[setup.config.config_path] = setup.config.config_hash;

    RunStats total;
    std::vector<PipelineRecord> records;
    for (const auto& name : selected_datasets(setup.config, args.dataset)) {
      const DatasetConfig& dc = setup.config.datasets.at(name);
      Corpus corpus = read_dataset_corpus(setup.config, name);
      manifest.inputs[dc.corpus_path] = file_hash(dc.corpus_path);
      RunStats stats = run_dataset(setup.ctx, corpus, dc.policy, &state, args.parallelism,
                                   phase, &records);
      total.accepted += stats.accepted;
      total.rejected += stats.rejected;
      total.skipped += stats.skipped;
      total.processed += stats.processed;
      log_event("dataset_done", {{"dataset", name},
                                 {"accepted", std::to_string(stats.accepted)},
                                 {"rejected", std::to_string(stats.rejected)},
                                 {"skipped", std::to_string(stats.skipped)}});
    }

    manifest.counters["accepted"] = static_cast<int64_t>(total.accepted);
    manifest.counters["rejected"] = static_cast<int64_t>(total.rejected);
    manifest.counters["skipped"] = static_cast<int64_t>(total.skipped);
    manifest.outputs[state.path()] = file_hash(state.path());
    manifest.timings_ms["total"] = now_ms() - started;
    write_manifest(manifest, args.out_dir + "/manifest.json");

    std::cout << "units: " << total.processed << " accepted: " << total.accepted
              << " rejected: " << total.rejected << " skipped: " << total.skipped << "\n";
    return pipeline_exit_code(total, records);
  });
}

int cmd_filter(const PipelineArgs& args) {
  return run_guarded([&]() -> int {
    auto started = now_ms();
    ToolConfig config = load_config(args.config_path);
    FilterResult result = filter_from_state(config, args);

    RunManifest manifest;
    manifest.config_hash = config.config_hash;
    manifest.inputs[args.state_path] = file_hash(args.state_path);
    manifest.outputs[result.nl_path] = file_hash(result.nl_path);
    manifest.outputs[result.pc_path] = file_hash(result.pc_path);
    manifest.counters["paired"] = static_cast<int64_t>(result.paired.pc.size());
    manifest.timings_ms["total"] = now_ms() - started;
    write_manifest(manifest, args.out_dir + "/manifest.json");

    std::cout << "paired instances: " << result.paired.pc.size() << "\n";
    return kExitOk;
  });
}

int cmd_run_all(const PipelineArgs& args) {
  return run_guarded([&]() -> int {
    auto started = now_ms();
    PipelineSetup setup = make_pipeline_setup(args);

    if (file_exists(args.state_path) && !args.resume)
      throw IoError("state log already exists (pass --resume to continue): " +
                    args.state_path);
    StateLog state(args.state_path);

    RunManifest manifest;
    manifest.config_hash = setup.config.config_hash;
    manifest.seeds["pipeline"] = setup.ctx.seed;
    manifest.endpoint_host = endpoint_host_only(setup.config.endpoint.base_url);
    manifest.inputs[setup.config.config_path] = setup.config.config_hash;

    RunStats total;
    std::vector<PipelineRecord> records;
    for (const auto& name : selected_datasets(setup.config, args.dataset)) {
      const DatasetConfig& dc = setup.config.datasets.at(name);
      Corpus corpus = read_dataset_corpus(setup.config, name);
      manifest.inputs[dc.corpus_path] = file_hash(dc.corpus_path);
      RunStats stats = run_dataset(setup.ctx, corpus, dc.policy, &state, args.parallelism,
                                   RunPhase::all, &records);
      total.accepted += stats.accepted;
      total.rejected += stats.rejected;
      total.skipped += stats.skipped;
      total.processed += stats.processed;
    }

    PipelineArgs filter_args = args;
    FilterResult filtered = filter_from_state(setup.config, filter_args);

    manifest.counters["accepted"] = static_cast<int64_t>(total.accepted);
    manifest.counters["rejected"] = static_cast<int64_t>(total.rejected);
    manifest.counters["skipped"] = static_cast<int64_t>(total.skipped);
    manifest.counters["paired"] = static_cast<int64_t>(filtered.paired.pc.size());
    manifest.outputs[state.path()] = file_hash(state.path());
    manifest.outputs[filtered.nl_path] = file_hash(filtered.nl_path);
    manifest.outputs[filtered.pc_path] = file_hash(filtered.pc_path);
    manifest.timings_ms["total"] = now_ms() - started;
    write_manifest(manifest, args.out_dir + "/manifest.json");

    std::cout << "units: " << total.processed << " accepted: " << total.accepted
              << " rejected: " << total.rejected << " paired: " << filtered.paired.pc.size()
              << "\n";
    return pipeline_exit_code(total, records);
  });
}

// ---- mix ----

int cmd_mix(const MixArgs& args) {
  return run_guarded([&]() -> int {
    auto started = now_ms();
    ToolConfig config = load_config(args.config_path);

    MixtureSpec spec;
    if (args.spec_path) {
      spec = mixture_spec_from_json(read_file(*args.spec_path));
    } else if (config.mixture) {
      spec = *config.mixture;
    } else {
      throw ConfigError("no mixture spec in config and no --spec given");
    }
    if (args.budget) spec.budget = *args.budget;
    if (args.seed) spec.seed = *args.seed;
    validate_mixture_spec(spec);

    Corpus nl = read_corpus(args.nl_corpus_path);
    std::vector<PcInstance> pc = read_pc_corpus(args.pc_corpus_path);

    std::map<std::string, Corpus> nl_by_dataset;
    for (auto& inst : nl.instances) nl_by_dataset[inst.dataset].instances.push_back(inst);
    std::map<std::string, std::vector<PcInstance>> pc_by_dataset;
    for (auto& p : pc) pc_by_dataset[p.instance.dataset].push_back(std::move(p));

    MixtureOutput output = build_mixture(spec, nl_by_dataset, pc_by_dataset);
    write_mixture(output, spec, args.out_dir);

    // fold run provenance into the mixture manifest so the directory has one
    std::string manifest_path = args.out_dir + "/manifest.json";
    ordered_json doc = ordered_json::parse(read_file(manifest_path));
    ordered_json run;
    run["tool_version"] = std::string(kToolVersion);
    run["config_hash"] = config.config_hash;
    run["inputs"] = {{args.nl_corpus_path, file_hash(args.nl_corpus_path)},
                     {args.pc_corpus_path, file_hash(args.pc_corpus_path)}};
    run["outputs"] = {{args.out_dir + "/nl.jsonl", file_hash(args.out_dir + "/nl.jsonl")},
                      {args.out_dir + "/pc.jsonl", file_hash(args.out_dir + "/pc.jsonl")}};
    run["timings_ms"] = {{"total", now_ms() - started}};
    doc["run"] = std::move(run);
    write_file(manifest_path, doc.dump(2) + "\n");

    std::cout << "emitted " << output.nl.size() << " paired samples (hash "
              << output.manifest_hash << ")\n";
    return kExitOk;
  });
}

// ---- postprocess / score ----

namespace {

struct GenerationRow {
  std::string id;
  std::string dataset;
  std::string generation;
};

std::vector<GenerationRow> read_generations(const std::string& path) {
  std::vector<GenerationRow> rows;
  size_t line_no = 0;
  for (const auto& line : split_lines(read_file(path))) {
    ++line_no;
    if (is_blank(line)) continue;
    json rec = json::parse(line, nullptr, false);
    if (rec.is_discarded())
      throw IoError(path + " line " + std::to_string(line_no) + ": malformed JSON");
    GenerationRow row;
    row.id = rec.at("id").get<std::string>();
    row.dataset = rec.value("dataset", std::string{});
    row.generation = rec.at("generation").get<std::string>();
    rows.push_back(std::move(row));
  }
  return rows;
}

OptionMap options_from_meta(const InstructionInstance& inst, const std::string& key) {
  OptionMap options;
  auto it = inst.meta.find(key);
  if (it == inst.meta.end()) return options;
  json parsed = json::parse(it->second, nullptr, false);
  if (parsed.is_discarded() || !parsed.is_object()) return options;
  for (auto& [label, text] : parsed.items())
    options[label] = text.is_string() ? text.get<std::string>() : text.dump();
  return options;
}

ExtractionResult extract_by_style(const std::string& style, const std::string& generation) {
  if (style == "pc") return extract_pc_answer(generation);
  if (style == "nl") return extract_nl_answer(generation);
  throw ConfigError("style must be 'pc' or 'nl', got '" + style + "'");
}

NormalizerSpec normalizer_for(const ToolConfig& config, const std::string& dataset) {
  auto it = config.normalizers.find(dataset);
  if (it != config.normalizers.end()) return it->second;
  NormalizerSpec spec;
  spec.dataset = dataset;
  spec.kind = NormalizerKind::verbatim;
  return spec;
}

}  // namespace

int cmd_postprocess(const PostprocessArgs& args) {
  return run_guarded([&]() -> int {
    ToolConfig config = load_config(args.config_path);
    auto rows = read_generations(args.generations_path);

    std::map<std::string, InstructionInstance> by_id;
    if (!args.instances_path.empty()) {
      Corpus gold = read_corpus(args.instances_path);
      for (auto& inst : gold.instances) by_id[inst.id] = std::move(inst);
    }

    std::string out;
    for (const auto& row : rows) {
      ExtractionResult ex = extract_by_style(args.style, row.generation);
      NormalizerSpec spec = normalizer_for(config, row.dataset);

      std::string normalized = ex.cleaned;
      auto it = by_id.find(row.id);
      if (it != by_id.end()) {
        OptionMap options = options_from_meta(it->second, spec.options_key);
        NormalizedPair pair = normalize_pair(ex.cleaned, clean_segment(it->second.output),
                                             spec, options);
        normalized = pair.prediction;
      } else if (spec.kind == NormalizerKind::numeric_extract ||
                 spec.kind == NormalizerKind::verbatim) {
        normalized = normalize_answer(ex.cleaned, spec, {});
      } else {
        throw NormalizeError("instance " + row.id +
                             " needs options; pass --instances with meta." +
                             spec.options_key);
      }

      ordered_json rec;
      rec["id"] = row.id;
      rec["route"] = std::string(route_name(ex.route));
      rec["cleaned"] = ex.cleaned;
      rec["normalized"] = normalized;
      out += rec.dump() + "\n";
    }
    write_file(args.out_path, out);
    std::cout << "postprocessed " << rows.size() << " generations\n";
    return kExitOk;
  });
}

std::vector<EvalRecord> read_eval_records(const std::string& path) {
  std::vector<EvalRecord> records;
  for (const auto& line : split_lines(read_file(path))) {
    if (is_blank(line)) continue;
    json rec = json::parse(line);
    EvalRecord r;
    r.id = rec.at("id").get<std::string>();
    r.dataset = rec.value("dataset", std::string{});
    r.category = rec.value("category", std::string{});
    r.prediction_normalized = rec.value("prediction", std::string{});
    r.gold_normalized = rec.value("gold", std::string{});
    for (auto& [name, value] : rec.value("scores", json::object()).items())
      r.scores[name] = value.get<double>();
    records.push_back(std::move(r));
  }
  return records;
}

void write_eval_records(const std::vector<EvalRecord>& records, const std::string& path) {
  std::string out;
  for (const auto& r : records) {
    ordered_json rec;
    rec["id"] = r.id;
    rec["dataset"] = r.dataset;
    if (!r.category.empty()) rec["category"] = r.category;
    rec["prediction"] = r.prediction_normalized;
    rec["gold"] = r.gold_normalized;
    ordered_json scores;
    for (const auto& [name, value] : r.scores) scores[name] = value;
    rec["scores"] = std::move(scores);
    out += rec.dump() + "\n";
  }
  write_file(path, out);
}

int cmd_score(const ScoreArgs& args) {
  return run_guarded([&]() -> int {
    ToolConfig config = load_config(args.config_path);
    auto rows = read_generations(args.generations_path);
    Corpus gold = read_corpus(args.gold_path);
    std::map<std::string, const InstructionInstance*> by_id;
    for (const auto& inst : gold.instances) by_id[inst.id] = &inst;

    std::vector<EvalRecord> records;
    for (const auto& row : rows) {
      auto it = by_id.find(row.id);
      if (it == by_id.end()) throw ScoreError("no gold instance for id " + row.id);
      const InstructionInstance& inst = *it->second;

      ExtractionResult ex = extract_by_style(args.style, row.generation);
      NormalizerSpec spec = normalizer_for(config, row.dataset.empty() ? inst.dataset
                                                                       : row.dataset);
      OptionMap options = options_from_meta(inst, spec.options_key);
      NormalizedPair pair =
          normalize_pair(ex.cleaned, clean_segment(inst.output), spec, options);

      EvalRecord rec;
      rec.id = row.id;
      rec.dataset = inst.dataset;
      auto cat = inst.meta.find("category");
      rec.category = cat != inst.meta.end() ? cat->second : inst.dataset;
      rec.prediction_normalized = pair.prediction;
      rec.gold_normalized = pair.gold;

      const std::string gold_text = trim(inst.output);
      rec.scores["em"] = exact_match(pair.prediction, pair.gold);
      rec.scores["f1"] = token_f1(ex.cleaned, gold_text);
      rec.scores["rouge_l_full"] = rouge_l(trim(row.generation), gold_text);
      rec.scores["rouge_l_answer"] = rouge_l(ex.cleaned, gold_text);
      records.push_back(std::move(rec));
    }
    write_eval_records(records, args.out_path);
    std::cout << "scored " << records.size() << " generations\n";
    return kExitOk;
  });
}

int cmd_significance(const SignificanceArgs& args) {
  return run_guarded([&]() -> int {
    auto a = read_eval_records(args.records_a_path);
    auto b = read_eval_records(args.records_b_path);

    std::map<std::string, double> scores_a, scores_b;
    for (const auto& r : a) {
      auto it = r.scores.find(args.metric);
      if (it != r.scores.end()) scores_a[r.id] = it->second;
    }
    for (const auto& r : b) {
      auto it = r.scores.find(args.metric);
      if (it != r.scores.end()) scores_b[r.id] = it->second;
    }
    if (scores_a.size() != scores_b.size())
      throw ScoreError("record files cover different instance sets");

    std::vector<double> va, vb;
    for (const auto& [id, score] : scores_a) {
      auto it = scores_b.find(id);
      if (it == scores_b.end()) throw ScoreError("id missing from second file: " + id);
      va.push_back(score);
      vb.push_back(it->second);
    }

    SignificanceResult res =
        paired_subsample_ttest(va, vb, args.fraction, args.trials, args.seed);

    ordered_json doc;
    doc["trials"] = res.trials;
    doc["fraction"] = res.fraction;
    doc["metric"] = args.metric;
    doc["mean_a"] = res.mean_a;
    doc["mean_b"] = res.mean_b;
    doc["t_statistic"] = res.t_statistic;
    doc["p_value"] = res.p_value;
    write_file(args.out_path, doc.dump(2) + "\n");

    char line[160];
    std::snprintf(line, sizeof(line), "mean_a=%.6f mean_b=%.6f t=%.6f p=%.3e\n", res.mean_a,
                  res.mean_b, res.t_statistic, res.p_value);
    std::cout << line;
    return kExitOk;
  });
}

int cmd_report(const ReportArgs& args) {
  return run_guarded([&]() -> int {
    auto records = read_eval_records(args.records_path);
    auto group_of = [&](const EvalRecord& r) {
      return args.group_by == "dataset" ? r.dataset : r.category;
    };
    auto agg = aggregate(records, args.metric, group_of);

    std::map<std::string, Delta> deltas;
    if (args.baseline) deltas = delta_vs_baseline(agg, *args.baseline);

    std::string tsv = "group\tmean\tcount";
    if (args.baseline) tsv += "\tdelta";
    tsv += "\n";
    std::string txt;
    for (const auto& [group, stat] : agg) {
      char buf[256];
      std::snprintf(buf, sizeof(buf), "%s\t%.6f\t%zu", group.c_str(), stat.mean, stat.count);
      tsv += buf;
      std::string delta_text;
      if (args.baseline && deltas.count(group)) delta_text = format_delta(deltas.at(group));
      if (args.baseline) tsv += "\t" + delta_text;
      tsv += "\n";
      std::snprintf(buf, sizeof(buf), "%-24s %8.4f  n=%-6zu %s\n", group.c_str(), stat.mean,
                    stat.count, delta_text.c_str());
      txt += buf;
    }
    write_file(args.out_dir + "/report.tsv", tsv);
    write_file(args.out_dir + "/report.txt", txt);
    std::cout << txt;
    return kExitOk;
  });
}

}  // namespace pcpipe
