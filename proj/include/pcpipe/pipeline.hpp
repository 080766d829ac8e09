#pragma once

#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "pcpipe/corpus.hpp"
#include "pcpipe/gateway.hpp"
#include "pcpipe/pseudocode.hpp"

namespace pcpipe {

struct PipelineError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Stage { generated, evaluated, repaired, accepted, rejected };

std::string_view stage_name(Stage s);
Stage stage_from_name(std::string_view name);

enum class StagePolicy { generate_evaluate_repair, generate_only, manual };
enum class UnitKind { task, instance };

// Five handwritten (instruction, pseudo-code) demonstrations per dataset.
struct DemoPool {
  std::string dataset;
  std::vector<std::pair<std::string, std::string>> demos;
};

// JSONL of {"instruction": ..., "pseudocode": ...}; exactly 5 entries.
DemoPool load_demo_pool(const std::string& dataset, const std::string& path);

struct InstanceEval {
  std::string instance_id;
  std::optional<std::string> pc_output;
  std::optional<std::string> nl_output;
  std::optional<double> em;  // absent = unscored (gateway error)
  bool nl_correct = false;
};

struct ScoredCandidate {
  std::string origin;  // "original", "repair@0.7", ...
  PseudoProgram program;
  double task_em = 0.0;
};

// State of one conversion unit (a task for task-structured sources, a single
// instance otherwise) as it moves through the stages.
struct PipelineRecord {
  std::string unit_id;
  std::string dataset;
  Stage stage = Stage::rejected;
  std::vector<std::string> instance_ids;
  std::optional<PseudoProgram> program;
  std::vector<ScoredCandidate> candidate_programs;
  std::vector<InstanceEval> evals;
  std::optional<double> task_em;
  size_t unscored_count = 0;
  std::string reject_reason;
  std::string raw_generation;  // unmodified teacher text, kept before parsing

  bool final_stage() const { return stage == Stage::accepted || stage == Stage::rejected; }
  // Transport rejections are retried on rerun; content rejections are not.
  bool retriable() const {
    return stage == Stage::rejected && reject_reason.rfind("gateway:", 0) == 0;
  }
};

struct RepairConfig {
  std::vector<double> temperatures{0.7, 0.5};
  int max_rounds = 2;
  int max_testcases = 3;
};

struct StageParams {
  double temperature = 0.0;
  int max_tokens = 1024;
};

struct PipelineContext {
  LlmClient* client = nullptr;
  PromptTemplate generate_template;
  PromptTemplate repair_template;
  PromptTemplate eval_pc_template;
  PromptTemplate eval_nl_template;
  uint64_t seed = 0;
  StageParams generate_params{0.7, 1024};
  StageParams eval_params{0.0, 256};
  RepairConfig repair;
  std::function<void(const std::string&)> log;  // optional event sink
};

// Evaluate-stage answer post-processing: first line of the trimmed output.
std::string eval_stage_answer(std::string_view model_output);

// The repair trigger: pseudo-code inference failed where NL inference passed.
bool needs_repair(bool pc_correct, bool nl_correct);
std::vector<bool> needs_repair(const PipelineRecord& record);

// 1-shot teacher generation for one unit; `instance` is the unit's
// representative. The demo choice is a pure function of (seed, instance id).
PipelineRecord generate_program(const PipelineContext& ctx,
                                const InstructionInstance& instance, const DemoPool& pool,
                                uint64_t seed);

// Runs pseudo-code-only inference per instance, scores exact match against
// the ground truth after newline splitting, and records NL-instruction
// outputs for the repair gate.
PipelineRecord evaluate_program(const PipelineContext& ctx, PipelineRecord record,
                                const std::vector<InstructionInstance>& instances);

// Requests one corrected program per configured temperature (each prompted
// against the original program), scores every candidate, and keeps the best
// by task-level exact match; ties go to the earliest-produced program.
PipelineRecord repair_program(const PipelineContext& ctx, PipelineRecord record,
                              const std::vector<InstructionInstance>& instances,
                              const RepairConfig& cfg);

struct PcInstance {
  InstructionInstance instance;
  PseudoProgram program;
};

struct PairedCorpora {
  std::vector<PcInstance> pc;
  Corpus nl;
};

// Keeps only instances of accepted units and drops the same ids from the NL
// side, so the two mixtures stay parallel (equal id multisets).
PairedCorpora filter_and_pair(const std::vector<PipelineRecord>& records,
                              const Corpus& nl_corpus);

// Corpus records extended with a "program" field (the rendered pseudo-code).
std::string serialize_pc_instance(const PcInstance& pc);
std::vector<PcInstance> read_pc_corpus(const std::string& path);

// Append-only stage log: one full record snapshot per transition,
// last-write-wins on replay. Appends are serialized through one writer.
class StateLog {
 public:
  explicit StateLog(std::string path);

  void append(const PipelineRecord& record);
  std::map<std::string, PipelineRecord> replay() const;
  const std::string& path() const { return path_; }

  static std::string serialize_record(const PipelineRecord& record);
  static PipelineRecord deserialize_record(const std::string& line);

 private:
  std::string path_;
  std::mutex mutex_;
};

struct DatasetPolicy {
  std::string dataset;
  StagePolicy policy = StagePolicy::generate_only;
  UnitKind unit = UnitKind::instance;
  std::string demos_path;
  // task_id (or "*" for any) -> pseudo-code program file
  std::map<std::string, std::string> manual_programs;
};

enum class RunPhase { generate, evaluate, repair, all };

struct RunStats {
  size_t accepted = 0;
  size_t rejected = 0;
  size_t skipped = 0;   // already final in the state log
  size_t processed = 0;
};

// Drives every unit of `corpus` through the stages `phase` allows, appending
// each transition to `state` (when given). Units already final in the log
// are skipped, which is what makes interrupted runs resumable.
RunStats run_dataset(const PipelineContext& ctx, const Corpus& corpus,
                     const DatasetPolicy& policy, StateLog* state, int parallelism,
                     RunPhase phase, std::vector<PipelineRecord>* out_records = nullptr);

}  // namespace pcpipe
