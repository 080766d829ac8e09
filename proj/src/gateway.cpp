#include "pcpipe/gateway.hpp"

#include <atomic>
#include <chrono>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "pcpipe/util.hpp"

namespace pcpipe {

namespace {

using nlohmann::json;

std::set<std::string> scan_placeholders(std::string_view body) {
  std::set<std::string> names;
  size_t pos = 0;
  while ((pos = body.find("{{", pos)) != std::string_view::npos) {
    size_t end = body.find("}}", pos + 2);
    if (end == std::string_view::npos) break;
    std::string name(body.substr(pos + 2, end - pos - 2));
    if (!name.empty() && name.find('\n') == std::string::npos) names.insert(name);
    pos = end + 2;
  }
  return names;
}

long now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

}  // namespace

PromptTemplate template_from_string(const std::string& name, std::string body) {
  PromptTemplate t;
  t.name = name;
  t.required_placeholders = scan_placeholders(body);
  t.body = std::move(body);
  return t;
}

PromptTemplate load_template(const std::string& name, const std::string& path) {
  return template_from_string(name, read_file(path));
}

std::string render_prompt(const PromptTemplate& tmpl,
                          const std::map<std::string, std::string>& bindings,
                          std::vector<std::string>* warnings) {
  for (const auto& required : tmpl.required_placeholders) {
    if (!bindings.count(required))
      throw GatewayError("unbound placeholder: " + required + " (template '" + tmpl.name +
                         "')");
  }
  std::string out = tmpl.body;
  for (const auto& [name, value] : bindings) {
    std::string token = "{{" + name + "}}";
    if (out.find(token) == std::string::npos) {
      if (warnings)
        warnings->push_back("binding '" + name + "' has no placeholder in template '" +
                            tmpl.name + "'");
      continue;
    }
    out = replace_all(out, token, value);
  }
  return out;
}

LlmClient::LlmClient(EndpointConfig config)
    : config_(std::move(config)), jitter_state_(config_.retry.jitter_seed) {
  // split base_url into origin and path prefix
  std::string url = config_.base_url;
  size_t scheme = url.find("://");
  size_t path_start =
      scheme == std::string::npos ? url.find('/') : url.find('/', scheme + 3);
  if (path_start == std::string::npos) {
    origin_ = url;
  } else {
    origin_ = url.substr(0, path_start);
    path_prefix_ = url.substr(path_start);
    while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
  }
  if (origin_.empty()) throw GatewayError("endpoint base_url is empty");
}

LlmClient::~LlmClient() = default;

LlmClient::AttemptOutcome LlmClient::attempt_once(const GenerationRequest& req) {
  json body;
  body["model"] = req.model.empty() ? config_.model : req.model;
  body["temperature"] = req.temperature;
  body["max_tokens"] = req.max_tokens;
  if (!req.stop.empty()) body["stop"] = req.stop;

  std::string path;
  if (config_.api == "chat") {
    body["messages"] = json::array({json{{"role", "user"}, {"content", req.prompt}}});
    path = path_prefix_ + "/chat/completions";
  } else {
    body["prompt"] = req.prompt;
    path = path_prefix_ + "/completions";
  }

  httplib::Client client(origin_);
  client.set_connection_timeout(config_.timeout_seconds, 0);
  client.set_read_timeout(config_.timeout_seconds, 0);
  httplib::Headers headers;
  if (!config_.api_key.empty())
    headers.emplace("Authorization", "Bearer " + config_.api_key);

  AttemptOutcome out;
  auto res = client.Post(path, headers, body.dump(), "application/json");
  if (!res) {
    out.error = "transport: " + httplib::to_string(res.error());
    return out;
  }
  out.status = res->status;
  if (res->status < 200 || res->status >= 300) {
    out.error = "http status " + std::to_string(res->status);
    return out;
  }

  json reply = json::parse(res->body, nullptr, false);
  if (reply.is_discarded() || !reply.contains("choices") || reply["choices"].empty()) {
    out.error = "malformed response body";
    return out;
  }
  const json& choice = reply["choices"][0];
  if (config_.api == "chat") {
    if (!choice.contains("message") || !choice["message"].contains("content")) {
      out.error = "malformed response body";
      return out;
    }
    out.text = choice["message"]["content"].get<std::string>();
  } else {
    if (!choice.contains("text")) {
      out.error = "malformed response body";
      return out;
    }
    out.text = choice["text"].get<std::string>();
  }
  out.finish = choice.value("finish_reason", "stop");
  out.ok = true;
  return out;
}

void LlmClient::log_attempt(const GenerationRequest& req, int attempt,
                            const AttemptOutcome& out, long latency_ms) {
  if (config_.request_log_path.empty()) return;
  json line;
  line["ts_ms"] = now_ms();
  line["tag"] = req.tag;
  line["attempt"] = attempt;
  line["status"] = out.status;
  line["ok"] = out.ok;
  line["latency_ms"] = latency_ms;
  line["prompt_fnv"] = to_hex(fnv1a64(req.prompt));
  if (!out.error.empty()) line["error"] = out.error;
  std::lock_guard<std::mutex> lock(log_mutex_);
  append_file(config_.request_log_path, line.dump() + "\n");
}

GenerationResult LlmClient::complete(const GenerationRequest& req) {
  if (req.temperature < 0.0 || req.temperature > 2.0)
    throw GatewayError("temperature out of [0, 2]");
  if (req.max_tokens < 1) throw GatewayError("max_tokens must be >= 1");

  GenerationResult result;
  result.tag = req.tag;

  const int attempts = std::max(1, config_.retry.attempts);
  auto started = std::chrono::steady_clock::now();
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    auto attempt_start = std::chrono::steady_clock::now();
    AttemptOutcome out = attempt_once(req);
    long attempt_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                          std::chrono::steady_clock::now() - attempt_start)
                          .count();
    log_attempt(req, attempt, out, attempt_ms);
    result.attempt_count = attempt;

    if (out.ok) {
      result.text = out.text;
      result.finish_reason =
          out.finish == "length" ? FinishReason::length : FinishReason::stop;
      break;
    }
    result.error_detail = out.error;
    if (attempt == attempts) break;

    long delay = static_cast<long>(config_.retry.base_delay_ms) * (1L << (attempt - 1));
    if (config_.retry.jitter > 0.0 && delay > 0) {
      double u;
      {
        std::lock_guard<std::mutex> lock(jitter_mutex_);
        u = Rng(splitmix64(jitter_state_)).next_double();
      }
      delay = static_cast<long>(delay * (1.0 + config_.retry.jitter * (2.0 * u - 1.0)));
    }
    if (delay > 0) std::this_thread::sleep_for(std::chrono::milliseconds(delay));
  }

  result.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                          std::chrono::steady_clock::now() - started)
                          .count();
  if (result.finish_reason == FinishReason::error) result.text.clear();
  return result;
}

std::vector<GenerationResult> LlmClient::complete_batch(
    const std::vector<GenerationRequest>& reqs, int parallelism) {
  if (parallelism < 1) throw GatewayError("parallelism must be >= 1");
  std::vector<GenerationResult> results(reqs.size());
  if (reqs.empty()) return results;

  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (;;) {
      size_t i = next.fetch_add(1);
      if (i >= reqs.size()) return;
      try {
        results[i] = complete(reqs[i]);
      } catch (const std::exception& e) {
        results[i].tag = reqs[i].tag;
        results[i].finish_reason = FinishReason::error;
        results[i].error_detail = e.what();
      }
    }
  };

  size_t n_workers = std::min<size_t>(static_cast<size_t>(parallelism), reqs.size());
  std::vector<std::thread> pool;
  pool.reserve(n_workers);
  for (size_t i = 0; i < n_workers; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  return results;
}

}  // namespace pcpipe
