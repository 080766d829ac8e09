#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pcpipe/util.hpp"

namespace pcpipe {

// One natural-language instruction/input/output record.
struct InstructionInstance {
  std::string id;
  std::string dataset;
  std::optional<std::string> task_id;
  std::string input;
  std::string output;
  std::map<std::string, std::string> meta;

  bool operator==(const InstructionInstance&) const = default;
};

struct MixtureEntry {
  std::string dataset;
  double proportion = 0.0;
  std::optional<int64_t> per_task_cap;
};

struct MixtureSpec {
  std::vector<MixtureEntry> entries;
  int64_t budget = 0;
  uint64_t seed = 0;
};

struct Corpus {
  std::vector<InstructionInstance> instances;
  std::string source_path;
};

struct CorpusError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Maps a foreign source schema onto the canonical field names, e.g.
// {"instruction": "input", "response": "output"}.
using FieldAdapter = std::map<std::string, std::string>;

struct ReadOptions {
  // Datasets for which task_id is mandatory (task-structured sources).
  std::set<std::string> task_structured;
  // Applied before canonical-field validation when the record's dataset has one.
  std::map<std::string, FieldAdapter> adapters;
  // Fallback dataset name for records that do not carry one.
  std::optional<std::string> default_dataset;
};

// One instance per line, canonical fields id/dataset/task_id/input/output/meta.
// Errors carry the 1-based line number and offending field.
Corpus read_corpus(const std::string& path);
Corpus read_corpus(const std::string& path, const ReadOptions& opts);
Corpus parse_corpus(std::string_view text, const std::string& source_path,
                    const ReadOptions& opts);

std::string serialize_instance(const InstructionInstance& inst);
std::string serialize_corpus(const Corpus& corpus);
void write_corpus(const Corpus& corpus, const std::string& path);

// Returns the spec unchanged iff proportions sum to 1 (1e-9), budget > 0 and
// caps are >= 1; throws CorpusError otherwise.
const MixtureSpec& validate_mixture_spec(const MixtureSpec& spec);

}  // namespace pcpipe
