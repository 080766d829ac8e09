#include <doctest.h>

#include "pcpipe/corpus.hpp"
#include "support/temp_dir.hpp"

using namespace pcpipe;

namespace {

std::string line(const std::string& id, const std::string& io = "x") {
  return R"({"id":")" + id + R"(","dataset":"d","input":")" + io + R"(","output":"y"})";
}

}  // namespace

TEST_CASE("three valid lines ingest in order") {
  std::string text = line("a") + "\n" + line("b") + "\n" + line("c") + "\n";
  Corpus c = parse_corpus(text, "mem", {});
  REQUIRE(c.instances.size() == 3);
  CHECK(c.instances[0].id == "a");
  CHECK(c.instances[1].id == "b");
  CHECK(c.instances[2].id == "c");
}

TEST_CASE("missing output names the line and field") {
  std::string text = line("a") + "\n" + R"({"id":"b","dataset":"d","input":"x"})" + "\n";
  try {
    parse_corpus(text, "mem", {});
    FAIL("expected CorpusError");
  } catch (const CorpusError& e) {
    std::string msg = e.what();
    CHECK(msg.find("line 2") != std::string::npos);
    CHECK(msg.find("output") != std::string::npos);
  }
}

TEST_CASE("duplicate id cites both lines") {
  std::string text;
  for (int i = 1; i <= 7; ++i)
    text += line(i == 7 ? "dup" : (i == 2 ? "dup" : std::to_string(i))) + "\n";
  try {
    parse_corpus(text, "mem", {});
    FAIL("expected CorpusError");
  } catch (const CorpusError& e) {
    std::string msg = e.what();
    CHECK(msg.find("line 7") != std::string::npos);
    CHECK(msg.find("line 2") != std::string::npos);
    CHECK(msg.find("dup") != std::string::npos);
  }
}

TEST_CASE("empty input after trimming is rejected") {
  std::string text = R"({"id":"a","dataset":"d","input":"  ","output":"y"})" "\n";
  CHECK_THROWS_AS(parse_corpus(text, "mem", {}), CorpusError);
}

TEST_CASE("task-structured dataset requires task_id") {
  ReadOptions opts;
  opts.task_structured.insert("d");
  CHECK_THROWS_AS(parse_corpus(line("a") + "\n", "mem", opts), CorpusError);

  std::string with_task =
      R"({"id":"a","dataset":"d","task_id":"t1","input":"x","output":"y"})" "\n";
  Corpus c = parse_corpus(with_task, "mem", opts);
  CHECK(c.instances[0].task_id == "t1");
}

TEST_CASE("adapter renames source fields") {
  ReadOptions opts;
  opts.adapters["d"] = {{"instruction", "input"}, {"response", "output"}};
  std::string text = R"({"id":"a","dataset":"d","instruction":"x","response":"y"})" "\n";
  Corpus c = parse_corpus(text, "mem", opts);
  CHECK(c.instances[0].input == "x");
  CHECK(c.instances[0].output == "y");
}

TEST_CASE("missing ids are synthesized deterministically") {
  ReadOptions opts;
  opts.default_dataset = "sni";
  std::string text = R"({"task_id":"t1","input":"x","output":"y"})" "\n"
                     R"({"task_id":"t1","input":"x2","output":"y2"})" "\n"
                     R"({"input":"x3","output":"y3"})" "\n";
  Corpus c = parse_corpus(text, "mem", opts);
  CHECK(c.instances[0].id == "sni/t1/000000");
  CHECK(c.instances[1].id == "sni/t1/000001");
  CHECK(c.instances[2].id == "sni/_/000000");
}

TEST_CASE("canonical write is a byte-identical round trip") {
  pcpipe::testing::TempDir tmp;
  Corpus c;
  InstructionInstance inst;
  inst.id = "a";
  inst.dataset = "d";
  inst.task_id = "t";
  inst.input = "in";
  inst.output = "out";
  inst.meta["k"] = "v";
  c.instances.push_back(inst);
  inst.id = "b";
  inst.task_id.reset();
  inst.meta.clear();
  c.instances.push_back(inst);

  write_corpus(c, tmp.file("c.jsonl"));
  std::string first = read_file(tmp.file("c.jsonl"));
  Corpus back = read_corpus(tmp.file("c.jsonl"));
  write_corpus(back, tmp.file("c2.jsonl"));
  CHECK(read_file(tmp.file("c2.jsonl")) == first);
  CHECK(back.instances == c.instances);
}

TEST_CASE("mixture spec validation") {
  MixtureSpec table1;
  table1.budget = 250000;
  table1.entries = {{"code_alpaca", 0.15, {}},   {"science", 0.0375, {}},
                    {"sni", 0.325, {}},          {"wizardlm", 0.15, {}},
                    {"gpt4_alpaca", 0.15, {}},   {"cot", 0.1875, {}}};
  CHECK_NOTHROW(validate_mixture_spec(table1));

  MixtureSpec single;
  single.budget = 1;
  single.entries = {{"only", 1.0, {}}};
  CHECK_NOTHROW(validate_mixture_spec(single));

  MixtureSpec bad;
  bad.budget = 10;
  bad.entries = {{"a", 0.5, {}}, {"b", 0.4, {}}};
  try {
    validate_mixture_spec(bad);
    FAIL("expected CorpusError");
  } catch (const CorpusError& e) {
    CHECK(std::string(e.what()).find("0.9") != std::string::npos);
  }

  MixtureSpec zero_budget;
  zero_budget.budget = 0;
  zero_budget.entries = {{"a", 1.0, {}}};
  CHECK_THROWS_AS(validate_mixture_spec(zero_budget), CorpusError);

  MixtureSpec bad_cap;
  bad_cap.budget = 5;
  bad_cap.entries = {{"a", 1.0, int64_t{0}}};
  CHECK_THROWS_AS(validate_mixture_spec(bad_cap), CorpusError);
}
