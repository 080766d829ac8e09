#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pcpipe/corpus.hpp"
#include "pcpipe/pipeline.hpp"
#include "pcpipe/pseudocode.hpp"

namespace pcpipe {

// Fixed suffix appended to every pseudo-code style training input; training
// and evaluation prompts must agree on it for extraction to work.
inline constexpr std::string_view kDirectiveSentence =
    "Generate pseudocode chain-of-thought reasoning first and then generate the solution.";

enum class SampleStyle { NL, PC };

struct TrainingSample {
  std::string id;
  SampleStyle style = SampleStyle::NL;
  std::string input;
  std::string output;
};

struct MixtureError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// floor(proportion * budget) per dataset, leftovers distributed by largest
// fractional remainder (ties by dataset name).
std::map<std::string, int64_t> allocate_counts(const MixtureSpec& spec);

struct SampleReport {
  std::vector<std::string> ids;
  int64_t shortfall = 0;  // requested minus available after caps
};

// Uniform sampling without replacement, keyed on id hashes so the pick is
// stable under corpus reordering. A per-task cap bounds how many ids any one
// task_id contributes.
SampleReport sample_instances(const Corpus& corpus, int64_t count,
                              std::optional<int64_t> per_task_cap, uint64_t seed);

TrainingSample format_pc_sample(const InstructionInstance& instance,
                                const PseudoProgram& program);
TrainingSample format_nl_sample(const InstructionInstance& instance);

std::string serialize_sample(const TrainingSample& sample);

struct MixtureOutput {
  std::vector<TrainingSample> nl;
  std::vector<TrainingSample> pc;
  std::map<std::string, int64_t> allocated;
  std::map<std::string, int64_t> shortfalls;  // only datasets that came up short
  std::vector<std::string> lint;              // e.g. marker-like text in NL outputs
  std::string manifest_hash;
};

// Samples per the validated spec from the paired corpora (same id sets per
// dataset), emits NL/PC samples sorted by id, and hashes the picks.
MixtureOutput build_mixture(const MixtureSpec& spec,
                            const std::map<std::string, Corpus>& nl_by_dataset,
                            const std::map<std::string, std::vector<PcInstance>>& pc_by_dataset);

// nl.jsonl, pc.jsonl and manifest.json under out_dir.
void write_mixture(const MixtureOutput& out, const MixtureSpec& spec,
                   const std::string& out_dir);

}  // namespace pcpipe
