#include <doctest.h>

#include <atomic>
#include <chrono>
#include <thread>

#include "pcpipe/gateway.hpp"
#include "pcpipe/util.hpp"
#include "support/mock_server.hpp"
#include "support/temp_dir.hpp"

using namespace pcpipe;
using pcpipe::testing::MockReply;
using pcpipe::testing::MockRequest;
using pcpipe::testing::MockServer;

namespace {

EndpointConfig fast_config(const std::string& base_url) {
  EndpointConfig config;
  config.base_url = base_url;
  config.model = "mock";
  config.retry.attempts = 3;
  config.retry.base_delay_ms = 1;  // keep tests fast
  config.retry.jitter = 0.0;
  return config;
}

}  // namespace

TEST_CASE("render_prompt substitutions") {
  PromptTemplate tmpl = template_from_string(
      "generate", "<Instruction>\n{{instruction}}\n</Instruction>\n<Pseudocode>\n{{demo}}");
  CHECK(tmpl.required_placeholders == std::set<std::string>{"instruction", "demo"});

  std::string out = render_prompt(tmpl, {{"instruction", "do x"}, {"demo", "def f():"}});
  CHECK(out.find("do x") != std::string::npos);
  CHECK(out.find("def f():") != std::string::npos);
  CHECK(out.find("{{") == std::string::npos);

  PromptTemplate empty = template_from_string("plain", "no placeholders");
  CHECK(render_prompt(empty, {}) == "no placeholders");

  try {
    render_prompt(tmpl, {{"instruction", "do x"}});
    FAIL("expected GatewayError");
  } catch (const GatewayError& e) {
    CHECK(std::string(e.what()).find("demo") != std::string::npos);
  }

  std::vector<std::string> warnings;
  render_prompt(tmpl, {{"instruction", "i"}, {"demo", "d"}, {"extra", "?"}}, &warnings);
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("extra") != std::string::npos);
}

TEST_CASE("complete echoes through the mock endpoint") {
  MockServer server([](const MockRequest& req) { return MockReply{200, req.prompt}; });
  LlmClient client(fast_config(server.base_url()));

  GenerationRequest req;
  req.prompt = "echo me";
  req.tag = "t1";
  GenerationResult res = client.complete(req);
  CHECK(res.text == "echo me");
  CHECK(res.finish_reason == FinishReason::stop);
  CHECK(res.attempt_count == 1);
  CHECK(res.tag == "t1");
}

TEST_CASE("two failures then success gives attempt_count 3") {
  std::atomic<int> calls{0};
  MockServer server([&](const MockRequest&) {
    int n = ++calls;
    if (n <= 2) return MockReply{500, ""};
    return MockReply{200, "ok"};
  });
  LlmClient client(fast_config(server.base_url()));
  GenerationResult res = client.complete({"", "p", 0.0, 16, {}, "t"});
  CHECK(res.ok());
  CHECK(res.text == "ok");
  CHECK(res.attempt_count == 3);
}

TEST_CASE("persistent 500 exhausts retries into an error result") {
  MockServer server([](const MockRequest&) { return MockReply{500, ""}; });
  LlmClient client(fast_config(server.base_url()));
  GenerationResult res = client.complete({"", "p", 0.0, 16, {}, "t"});
  CHECK_FALSE(res.ok());
  CHECK(res.attempt_count == 3);
  CHECK(res.text.empty());
  CHECK(res.error_detail.find("500") != std::string::npos);
}

TEST_CASE("request invariants are enforced") {
  MockServer server([](const MockRequest&) { return MockReply{200, "x"}; });
  LlmClient client(fast_config(server.base_url()));
  CHECK_THROWS_AS(client.complete({"", "p", 3.0, 16, {}, ""}), GatewayError);
  CHECK_THROWS_AS(client.complete({"", "p", 0.0, 0, {}, ""}), GatewayError);
}

TEST_CASE("batch keeps request order under parallelism") {
  MockServer server([](const MockRequest& req) {
    // trailing digits of the prompt drive a tiny random-ish delay
    uint64_t h = fnv1a64(req.prompt);
    std::this_thread::sleep_for(std::chrono::milliseconds(h % 7));
    return MockReply{200, "reply to " + req.prompt};
  });
  LlmClient client(fast_config(server.base_url()));

  std::vector<GenerationRequest> reqs;
  for (int i = 0; i < 24; ++i)
    reqs.push_back({"", "prompt " + std::to_string(i), 0.0, 16, {}, "tag" + std::to_string(i)});

  for (int parallelism : {1, 4, 16}) {
    auto results = client.complete_batch(reqs, parallelism);
    REQUIRE(results.size() == reqs.size());
    for (size_t i = 0; i < reqs.size(); ++i) {
      CHECK(results[i].tag == reqs[i].tag);
      CHECK(results[i].text == "reply to " + reqs[i].prompt);
    }
  }
}

TEST_CASE("in-flight requests never exceed the parallelism bound") {
  MockServer server([](const MockRequest&) {
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
    return MockReply{200, "x"};
  });
  LlmClient client(fast_config(server.base_url()));

  std::vector<GenerationRequest> reqs;
  for (int i = 0; i < 20; ++i) reqs.push_back({"", "p" + std::to_string(i), 0.0, 16, {}, ""});
  client.complete_batch(reqs, 4);
  CHECK(server.max_in_flight() <= 4);
  CHECK(server.max_in_flight() >= 2);  // it did actually run concurrently
}

TEST_CASE("one failing request does not poison the batch") {
  MockServer server([](const MockRequest& req) {
    if (req.prompt == "p5") return MockReply{500, ""};
    return MockReply{200, "ok"};
  });
  LlmClient client(fast_config(server.base_url()));

  std::vector<GenerationRequest> reqs;
  for (int i = 0; i < 10; ++i)
    reqs.push_back({"", "p" + std::to_string(i), 0.0, 16, {}, std::to_string(i)});
  auto results = client.complete_batch(reqs, 3);
  for (size_t i = 0; i < results.size(); ++i) {
    if (i == 5) {
      CHECK_FALSE(results[i].ok());
    } else {
      CHECK(results[i].ok());
    }
  }
}

TEST_CASE("request log records one line per attempt") {
  pcpipe::testing::TempDir tmp;
  std::atomic<int> calls{0};
  MockServer server([&](const MockRequest&) {
    return ++calls == 1 ? MockReply{500, ""} : MockReply{200, "fine"};
  });
  EndpointConfig config = fast_config(server.base_url());
  config.request_log_path = tmp.file("requests.jsonl");
  LlmClient client(config);
  client.complete({"", "p", 0.0, 16, {}, "tagged"});

  std::string log = read_file(config.request_log_path);
  auto lines = split_lines(log);
  lines.pop_back();  // trailing empty
  CHECK(lines.size() == 2);
  CHECK(lines[0].find("\"attempt\":1") != std::string::npos);
  CHECK(lines[1].find("\"attempt\":2") != std::string::npos);
  CHECK(lines[0].find("tagged") != std::string::npos);
}
