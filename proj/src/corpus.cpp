#include "pcpipe/corpus.hpp"

#include <cmath>
#include <unordered_map>

#include <json.hpp>

namespace pcpipe {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string synth_id(const std::string& dataset, const std::optional<std::string>& task_id,
                     size_t ordinal) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06zu", ordinal);
  return dataset + "/" + (task_id ? *task_id : "_") + "/" + buf;
}

[[noreturn]] void fail(size_t line_no, const std::string& what) {
  throw CorpusError("line " + std::to_string(line_no) + ": " + what);
}

}  // namespace

Corpus parse_corpus(std::string_view text, const std::string& source_path,
                    const ReadOptions& opts) {
  Corpus corpus;
  corpus.source_path = source_path;

  std::unordered_map<std::string, size_t> seen_ids;  // id -> line number
  std::map<std::pair<std::string, std::string>, size_t> synth_counters;

  auto lines = split_lines(text);
  // A single trailing newline yields one empty tail entry; it is not a record.
  if (!lines.empty() && lines.back().empty()) lines.pop_back();

  for (size_t i = 0; i < lines.size(); ++i) {
    const size_t line_no = i + 1;
    const std::string& line = lines[i];
    if (is_blank(line)) fail(line_no, "blank line is not a record");

    nlohmann::json rec = nlohmann::json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.is_object())
      fail(line_no, "malformed JSON record");

    // Determine dataset first so the right adapter can be applied.
    std::string dataset;
    if (rec.contains("dataset") && rec["dataset"].is_string())
      dataset = rec["dataset"].get<std::string>();
    else if (opts.default_dataset)
      dataset = *opts.default_dataset;

    auto adapter_it = opts.adapters.find(dataset);
    if (adapter_it != opts.adapters.end()) {
      nlohmann::json mapped = nlohmann::json::object();
      for (auto& [key, value] : rec.items()) {
        auto ren = adapter_it->second.find(key);
        mapped[ren != adapter_it->second.end() ? ren->second : key] = value;
      }
      rec = std::move(mapped);
    }

    auto get_string = [&](const char* field, bool required) -> std::optional<std::string> {
      if (!rec.contains(field)) {
        if (required) fail(line_no, std::string("missing required field: ") + field);
        return std::nullopt;
      }
      if (!rec[field].is_string())
        fail(line_no, std::string("field is not a string: ") + field);
      return rec[field].get<std::string>();
    };

    InstructionInstance inst;
    inst.dataset = dataset.empty() ? get_string("dataset", true).value() : dataset;
    inst.input = get_string("input", true).value();
    inst.output = get_string("output", true).value();
    if (auto t = get_string("task_id", false)) inst.task_id = *t;

    if (trim_view(inst.input).empty()) fail(line_no, "empty field after trimming: input");
    if (trim_view(inst.output).empty()) fail(line_no, "empty field after trimming: output");
    if (opts.task_structured.count(inst.dataset) && !inst.task_id)
      fail(line_no, "missing required field: task_id (dataset '" + inst.dataset +
                        "' is task-structured)");

    if (rec.contains("meta")) {
      if (!rec["meta"].is_object()) fail(line_no, "field is not an object: meta");
      for (auto& [k, v] : rec["meta"].items()) {
        if (v.is_string())
          inst.meta[k] = v.get<std::string>();
        else
          inst.meta[k] = v.dump();
      }
    }

    if (auto given = get_string("id", false)) {
      inst.id = *given;
    } else {
      auto key = std::make_pair(inst.dataset, inst.task_id.value_or("_"));
      inst.id = synth_id(inst.dataset, inst.task_id, synth_counters[key]++);
    }

    auto [it, fresh] = seen_ids.emplace(inst.id, line_no);
    if (!fresh)
      fail(line_no, "duplicate id '" + inst.id + "' (first seen on line " +
                        std::to_string(it->second) + ")");

    corpus.instances.push_back(std::move(inst));
  }
  return corpus;
}

Corpus read_corpus(const std::string& path, const ReadOptions& opts) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const IoError& e) {
    throw CorpusError(e.what());
  }
  try {
    return parse_corpus(text, path, opts);
  } catch (const CorpusError& e) {
    throw CorpusError(path + ": " + e.what());
  }
}

Corpus read_corpus(const std::string& path) { return read_corpus(path, ReadOptions{}); }

std::string serialize_instance(const InstructionInstance& inst) {
  // Canonical field order: id, dataset, task_id, input, output, meta.
  ordered_json rec;
  rec["id"] = inst.id;
  rec["dataset"] = inst.dataset;
  if (inst.task_id) rec["task_id"] = *inst.task_id;
  rec["input"] = inst.input;
  rec["output"] = inst.output;
  if (!inst.meta.empty()) {
    ordered_json meta;
    for (const auto& [k, v] : inst.meta) meta[k] = v;
    rec["meta"] = std::move(meta);
  }
  return rec.dump();
}

std::string serialize_corpus(const Corpus& corpus) {
  std::string out;
  for (const auto& inst : corpus.instances) {
    out += serialize_instance(inst);
    out += '\n';
  }
  return out;
}

void write_corpus(const Corpus& corpus, const std::string& path) {
  write_file(path, serialize_corpus(corpus));
}

const MixtureSpec& validate_mixture_spec(const MixtureSpec& spec) {
  if (spec.entries.empty()) throw CorpusError("mixture spec has no entries");
  double sum = 0.0;
  for (const auto& e : spec.entries) {
    if (e.proportion < 0.0 || e.proportion > 1.0)
      throw CorpusError("proportion out of [0,1] for dataset '" + e.dataset + "'");
    if (e.per_task_cap && *e.per_task_cap < 1)
      throw CorpusError("per-task cap must be >= 1 for dataset '" + e.dataset + "'");
    sum += e.proportion;
  }
  if (std::fabs(sum - 1.0) > 1e-9)
    throw CorpusError("proportions sum " + std::to_string(sum) + " != 1.0");
  if (spec.budget <= 0) throw CorpusError("budget must be positive");
  return spec;
}

}  // namespace pcpipe
