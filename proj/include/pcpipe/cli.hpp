#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pcpipe/corpus.hpp"
#include "pcpipe/gateway.hpp"
#include "pcpipe/mixture.hpp"
#include "pcpipe/pipeline.hpp"
#include "pcpipe/postprocess.hpp"
#include "pcpipe/scoring.hpp"

namespace pcpipe {

inline constexpr std::string_view kToolVersion = "0.1.0";

// exit codes
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitConfig = 3;
inline constexpr int kExitIo = 4;
inline constexpr int kExitEndpoint = 5;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DatasetConfig {
  std::string corpus_path;
  DatasetPolicy policy;
  bool task_structured = false;
  FieldAdapter adapter;
};

struct ToolConfig {
  EndpointConfig endpoint;
  std::map<std::string, std::string> template_paths;  // generate/repair/eval_pc/eval_nl
  StageParams generation{0.7, 1024};
  StageParams evaluation{0.0, 256};
  RepairConfig repair;
  std::map<std::string, DatasetConfig> datasets;
  std::optional<MixtureSpec> mixture;
  std::map<std::string, NormalizerSpec> normalizers;
  std::string config_path;
  std::string config_hash;
  std::string base_dir;  // relative paths in the config resolve against this
};

ToolConfig load_config(const std::string& path);

std::string resolve_path(const ToolConfig& config, const std::string& path);

struct RunManifest {
  std::string tool_version{kToolVersion};
  std::string config_hash;
  std::map<std::string, uint64_t> seeds;
  std::map<std::string, std::string> inputs;   // path -> content hash
  std::map<std::string, std::string> outputs;  // path -> content hash
  std::map<std::string, int64_t> counters;
  std::map<std::string, long> timings_ms;
  std::string endpoint_host;  // host only, never the full URL or key
};

void write_manifest(const RunManifest& manifest, const std::string& path);

std::string endpoint_host_only(const std::string& base_url);

// line-delimited event to stderr, human text to stdout
void log_event(const std::string& event, const std::map<std::string, std::string>& fields);

// ---- subcommand entry points (return process exit codes) ----

struct PipelineArgs {
  std::string config_path;
  std::optional<std::string> dataset;  // restrict to one dataset
  std::optional<uint64_t> seed;        // overrides config mixture seed
  int parallelism = 1;
  std::string state_path;
  bool resume = false;
  std::string out_dir;
};

int cmd_pipeline(const PipelineArgs& args, RunPhase phase);
int cmd_filter(const PipelineArgs& args);
int cmd_run_all(const PipelineArgs& args);

struct MixArgs {
  std::string config_path;
  std::optional<std::string> spec_path;  // standalone mixture spec JSON
  std::optional<int64_t> budget;
  std::optional<uint64_t> seed;
  std::string nl_corpus_path;  // filtered parallel corpora
  std::string pc_corpus_path;
  std::string out_dir;
};

int cmd_mix(const MixArgs& args);

struct PostprocessArgs {
  std::string config_path;
  std::string generations_path;  // JSONL: id, dataset, generation
  std::string instances_path;    // gold corpus supplying outputs and options
  std::string style = "pc";      // pc | nl
  std::string out_path;
};

int cmd_postprocess(const PostprocessArgs& args);

struct ScoreArgs {
  std::string config_path;
  std::string generations_path;
  std::string gold_path;
  std::string style = "pc";
  std::string out_path;
};

int cmd_score(const ScoreArgs& args);

struct SignificanceArgs {
  std::string records_a_path;
  std::string records_b_path;
  std::string metric = "em";
  double fraction = 0.10;
  int trials = 500;
  uint64_t seed = 0;
  std::string out_path;
};

int cmd_significance(const SignificanceArgs& args);

struct ReportArgs {
  std::string records_path;
  std::string metric = "em";
  std::string group_by = "category";  // category | dataset
  std::optional<std::string> baseline;
  std::string out_dir;
};

int cmd_report(const ReportArgs& args);

// shared helpers, exposed for the test suites
std::vector<EvalRecord> read_eval_records(const std::string& path);
void write_eval_records(const std::vector<EvalRecord>& records, const std::string& path);
MixtureSpec mixture_spec_from_json(const std::string& json_text);

}  // namespace pcpipe
