#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace pcpipe {

struct GatewayError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PromptTemplate {
  std::string name;
  std::string body;                           // text with {{name}} placeholders
  std::set<std::string> required_placeholders;
};

PromptTemplate template_from_string(const std::string& name, std::string body);
PromptTemplate load_template(const std::string& name, const std::string& path);

// Substitutes every placeholder verbatim. Unbound required placeholders
// throw; bindings without a matching placeholder produce warnings.
std::string render_prompt(const PromptTemplate& tmpl,
                          const std::map<std::string, std::string>& bindings,
                          std::vector<std::string>* warnings = nullptr);

struct RetryPolicy {
  int attempts = 3;
  int base_delay_ms = 1000;  // doubled per attempt: 1s / 2s / 4s
  double jitter = 0.25;
  uint64_t jitter_seed = 0;
};

struct EndpointConfig {
  std::string base_url;        // e.g. http://127.0.0.1:8080/v1
  std::string api = "completions";  // or "chat"
  std::string model;
  std::string api_key;         // usually from the environment
  std::string request_log_path;  // empty disables attempt logging
  RetryPolicy retry;
  int timeout_seconds = 120;
};

struct GenerationRequest {
  std::string model;
  std::string prompt;
  double temperature = 0.0;
  int max_tokens = 1024;
  std::vector<std::string> stop;
  std::string tag;
};

enum class FinishReason { stop, length, error };

struct GenerationResult {
  std::string tag;
  std::string text;
  FinishReason finish_reason = FinishReason::error;
  long latency_ms = 0;
  int attempt_count = 0;
  std::string error_detail;  // set iff finish_reason == error

  bool ok() const { return finish_reason != FinishReason::error; }
};

// Blocking client for an OpenAI-compatible completions endpoint with retry,
// backoff and per-attempt logging. Thread-safe; complete_batch owns its own
// worker pool and keeps results aligned with requests.
class LlmClient {
 public:
  explicit LlmClient(EndpointConfig config);
  ~LlmClient();

  GenerationResult complete(const GenerationRequest& req);
  std::vector<GenerationResult> complete_batch(const std::vector<GenerationRequest>& reqs,
                                               int parallelism);

  const EndpointConfig& config() const { return config_; }

 private:
  struct AttemptOutcome {
    bool ok = false;
    int status = 0;
    std::string text;
    std::string finish;
    std::string error;
  };

  AttemptOutcome attempt_once(const GenerationRequest& req);
  void log_attempt(const GenerationRequest& req, int attempt, const AttemptOutcome& out,
                   long latency_ms);

  EndpointConfig config_;
  std::string origin_;       // scheme://host:port
  std::string path_prefix_;  // path part of base_url, if any
  std::mutex log_mutex_;
  std::mutex jitter_mutex_;
  uint64_t jitter_state_;
};

}  // namespace pcpipe
