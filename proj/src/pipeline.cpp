#include "pcpipe/pipeline.hpp"

#include <atomic>
#include <cstdio>
#include <thread>

#include <json.hpp>

#include "pcpipe/util.hpp"

namespace pcpipe {

namespace {

using nlohmann::json;

void emit(const PipelineContext& ctx, const std::string& event) {
  if (ctx.log) ctx.log(event);
}

std::string quote(const std::string& s) { return json(s).dump(); }

// The teacher answers a repair prompt with fenced or marker-wrapped code;
// fall back to the whole reply.
std::string candidate_code_text(const std::string& reply) {
  if (auto block = extract_marked_block(reply)) return block->program_text;
  auto lines = split_lines(reply);
  std::optional<size_t> fence_open;
  for (size_t i = 0; i < lines.size(); ++i) {
    if (trim_view(lines[i]).starts_with("```")) {
      if (!fence_open) {
        fence_open = i;
      } else {
        std::vector<std::string> inner(lines.begin() + static_cast<long>(*fence_open) + 1,
                                       lines.begin() + static_cast<long>(i));
        return join_lines(inner);
      }
    }
  }
  return reply;
}

std::string synthesized_invocation(const PseudoProgram& p) {
  std::string inv = ">>> " + p.name + "(";
  for (size_t i = 0; i < p.params.size(); ++i) {
    if (i) inv += ", ";
    inv += p.params[i].name;
  }
  inv += ")";
  return inv;
}

}  // namespace

std::string_view stage_name(Stage s) {
  switch (s) {
    case Stage::generated: return "generated";
    case Stage::evaluated: return "evaluated";
    case Stage::repaired: return "repaired";
    case Stage::accepted: return "accepted";
    case Stage::rejected: return "rejected";
  }
  return "rejected";
}

Stage stage_from_name(std::string_view name) {
  if (name == "generated") return Stage::generated;
  if (name == "evaluated") return Stage::evaluated;
  if (name == "repaired") return Stage::repaired;
  if (name == "accepted") return Stage::accepted;
  if (name == "rejected") return Stage::rejected;
  throw PipelineError("unknown stage: " + std::string(name));
}

DemoPool load_demo_pool(const std::string& dataset, const std::string& path) {
  DemoPool pool;
  pool.dataset = dataset;
  for (const auto& line : split_lines(read_file(path))) {
    if (is_blank(line)) continue;
    json rec = json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.contains("instruction") || !rec.contains("pseudocode"))
      throw PipelineError("malformed demo record in " + path);
    pool.demos.emplace_back(rec["instruction"].get<std::string>(),
                            rec["pseudocode"].get<std::string>());
  }
  if (pool.demos.size() != 5)
    throw PipelineError("demo pool for '" + dataset + "' has " +
                        std::to_string(pool.demos.size()) + " demos, expected exactly 5");
  return pool;
}

std::string eval_stage_answer(std::string_view model_output) {
  std::string_view t = trim_view(model_output);
  size_t nl = t.find('\n');
  if (nl != std::string_view::npos) t = t.substr(0, nl);
  return trim(t);
}

bool needs_repair(bool pc_correct, bool nl_correct) { return !pc_correct && nl_correct; }

std::vector<bool> needs_repair(const PipelineRecord& record) {
  std::vector<bool> out;
  out.reserve(record.evals.size());
  for (const auto& ev : record.evals) {
    bool pc_ok = ev.em.has_value() && *ev.em == 1.0;
    out.push_back(needs_repair(pc_ok, ev.nl_correct));
  }
  return out;
}

PipelineRecord generate_program(const PipelineContext& ctx,
                                const InstructionInstance& instance, const DemoPool& pool,
                                uint64_t seed) {
  if (pool.dataset != instance.dataset)
    throw PipelineError("demo pool '" + pool.dataset + "' does not match dataset '" +
                        instance.dataset + "'");

  PipelineRecord record;
  record.dataset = instance.dataset;
  record.unit_id = instance.task_id ? *instance.task_id : instance.id;
  record.instance_ids = {instance.id};

  Rng rng(mix_seed(seed, fnv1a64(instance.id)));
  const auto& demo = pool.demos[rng.bounded(pool.demos.size())];

  std::string prompt = render_prompt(ctx.generate_template,
                                     {{"instruction", instance.input},
                                      {"demo_instruction", demo.first},
                                      {"demo_pseudocode", demo.second}});

  GenerationRequest req;
  req.prompt = prompt;
  req.temperature = ctx.generate_params.temperature;
  req.max_tokens = ctx.generate_params.max_tokens;
  req.tag = "gen:" + record.unit_id;
  GenerationResult result = ctx.client->complete(req);

  if (!result.ok()) {
    record.stage = Stage::rejected;
    record.reject_reason = "gateway: " + result.error_detail;
    return record;
  }
  record.raw_generation = result.text;

  auto block = extract_marked_block(result.text);
  ValidationResult valid = validate_for_training(block);
  if (!valid.pass) {
    record.stage = Stage::rejected;
    record.reject_reason = valid.reason;
    return record;
  }
  record.program = parse_program(block->program_text).program;
  record.stage = Stage::generated;
  return record;
}

namespace {

// Scores `program` over the unit's instances via pseudo-code-only prompts.
// nl_correct flags are copied from `nl_by_id` when provided, otherwise NL
// inference runs too.
std::pair<std::vector<InstanceEval>, size_t> run_unit_eval(
    const PipelineContext& ctx, const PseudoProgram& program,
    const std::vector<InstructionInstance>& instances,
    const std::map<std::string, InstanceEval>* nl_by_id) {
  std::vector<InstanceEval> evals;
  size_t unscored = 0;
  const std::string program_text = render_program(program);

  for (const auto& inst : instances) {
    InstanceEval ev;
    ev.instance_id = inst.id;
    const std::string gold = trim(inst.output);

    GenerationRequest pc_req;
    pc_req.prompt = render_prompt(ctx.eval_pc_template,
                                  {{"program", program_text}, {"input", inst.input}});
    pc_req.temperature = ctx.eval_params.temperature;
    pc_req.max_tokens = ctx.eval_params.max_tokens;
    pc_req.tag = "evalpc:" + inst.id;
    GenerationResult pc = ctx.client->complete(pc_req);
    if (pc.ok()) {
      ev.pc_output = pc.text;
      ev.em = eval_stage_answer(pc.text) == gold ? 1.0 : 0.0;
    } else {
      ++unscored;
    }

    if (nl_by_id) {
      auto it = nl_by_id->find(inst.id);
      if (it != nl_by_id->end()) {
        ev.nl_output = it->second.nl_output;
        ev.nl_correct = it->second.nl_correct;
      }
    } else {
      GenerationRequest nl_req;
      nl_req.prompt = render_prompt(ctx.eval_nl_template, {{"input", inst.input}});
      nl_req.temperature = ctx.eval_params.temperature;
      nl_req.max_tokens = ctx.eval_params.max_tokens;
      nl_req.tag = "evalnl:" + inst.id;
      GenerationResult nl = ctx.client->complete(nl_req);
      if (nl.ok()) {
        ev.nl_output = nl.text;
        ev.nl_correct = eval_stage_answer(nl.text) == gold;
      }
    }
    evals.push_back(std::move(ev));
  }
  return {std::move(evals), unscored};
}

double mean_em(const std::vector<InstanceEval>& evals) {
  double sum = 0.0;
  size_t scored = 0;
  for (const auto& ev : evals) {
    if (ev.em) {
      sum += *ev.em;
      ++scored;
    }
  }
  return scored ? sum / static_cast<double>(scored) : 0.0;
}

}  // namespace

PipelineRecord evaluate_program(const PipelineContext& ctx, PipelineRecord record,
                                const std::vector<InstructionInstance>& instances) {
  if (record.stage != Stage::generated && record.stage != Stage::repaired)
    throw PipelineError("evaluate_program needs a generated or repaired record");
  if (!record.program) throw PipelineError("evaluate_program needs a program");

  auto [evals, unscored] = run_unit_eval(ctx, *record.program, instances, nullptr);
  record.evals = std::move(evals);
  record.unscored_count = unscored;
  record.task_em = mean_em(record.evals);
  record.instance_ids.clear();
  for (const auto& inst : instances) record.instance_ids.push_back(inst.id);
  record.stage = Stage::evaluated;
  return record;
}

PipelineRecord repair_program(const PipelineContext& ctx, PipelineRecord record,
                              const std::vector<InstructionInstance>& instances,
                              const RepairConfig& cfg) {
  if (!record.program) throw PipelineError("repair_program needs a program");
  auto flags = needs_repair(record);

  std::map<std::string, InstanceEval> nl_by_id;
  for (const auto& ev : record.evals) nl_by_id[ev.instance_id] = ev;

  // First max_testcases failing instances in instance order.
  std::string testcases;
  int used = 0;
  for (size_t i = 0; i < instances.size() && used < cfg.max_testcases; ++i) {
    if (i >= flags.size() || !flags[i]) continue;
    const auto& inst = instances[i];
    const auto& ev = record.evals[i];
    if (used) testcases += "\n\n";
    testcases += "\"input\": " + quote(inst.input) + "\n";
    testcases += "\"output\": " + quote(trim(inst.output)) + ",\n";
    testcases += "\"generated output\": " +
                 quote(ev.pc_output ? eval_stage_answer(*ev.pc_output) : "");
    ++used;
  }

  const std::string instruction = instances.empty() ? "" : instances.front().input;
  std::string prompt = render_prompt(ctx.repair_template,
                                     {{"instruction", instruction},
                                      {"buggy_code", render_program(*record.program)},
                                      {"testcases", testcases}});

  record.candidate_programs.clear();
  record.candidate_programs.push_back(
      {"original", *record.program, record.task_em.value_or(0.0)});

  size_t rounds = std::min(cfg.temperatures.size(),
                           static_cast<size_t>(std::max(0, cfg.max_rounds)));
  for (size_t r = 0; r < rounds; ++r) {
    double temp = cfg.temperatures[r];
    char temp_buf[32];
    std::snprintf(temp_buf, sizeof(temp_buf), "repair@%g", temp);
    std::string origin = temp_buf;

    GenerationRequest req;
    req.prompt = prompt;  // both repairs condition on the original program
    req.temperature = temp;
    req.max_tokens = ctx.generate_params.max_tokens;
    req.tag = "repair:" + record.unit_id + ":" + origin;
    GenerationResult result = ctx.client->complete(req);
    if (!result.ok()) {
      emit(ctx, "repair candidate " + origin + " for unit " + record.unit_id +
                    " failed: " + result.error_detail);
      continue;
    }

    ParseOptions lenient;
    lenient.require_invocation = false;
    ParseResult parsed = parse_program(candidate_code_text(result.text), lenient);
    if (!parsed.ok()) {
      emit(ctx, "repair candidate " + origin + " for unit " + record.unit_id +
                    " unparsable: " + parsed.error.code);
      continue;
    }
    PseudoProgram candidate = std::move(*parsed.program);
    if (candidate.invocation_form == InvocationForm::none) {
      candidate.invocation_form = InvocationForm::repl;
      candidate.invocation = synthesized_invocation(candidate);
    }

    auto [cand_evals, cand_unscored] = run_unit_eval(ctx, candidate, instances, &nl_by_id);
    (void)cand_unscored;
    record.candidate_programs.push_back({origin, std::move(candidate), mean_em(cand_evals)});
  }

  if (record.candidate_programs.size() == 1)
    emit(ctx, "unit " + record.unit_id + ": no usable repair candidate, keeping original");

  // Highest task-level EM wins; strict inequality keeps the earliest on ties.
  size_t best = 0;
  for (size_t i = 1; i < record.candidate_programs.size(); ++i) {
    if (record.candidate_programs[i].task_em > record.candidate_programs[best].task_em)
      best = i;
  }
  if (best != 0) {
    record.program = record.candidate_programs[best].program;
    record.task_em = record.candidate_programs[best].task_em;
    auto [evals, unscored] = run_unit_eval(ctx, *record.program, instances, &nl_by_id);
    record.evals = std::move(evals);
    record.unscored_count = unscored;
  }
  record.stage = Stage::repaired;
  return record;
}

PairedCorpora filter_and_pair(const std::vector<PipelineRecord>& records,
                              const Corpus& nl_corpus) {
  std::map<std::string, const PipelineRecord*> accepted_by_instance;
  for (const auto& rec : records) {
    if (rec.stage != Stage::accepted) continue;
    for (const auto& id : rec.instance_ids) accepted_by_instance[id] = &rec;
  }

  PairedCorpora out;
  out.nl.source_path = nl_corpus.source_path;
  for (const auto& inst : nl_corpus.instances) {
    auto it = accepted_by_instance.find(inst.id);
    if (it == accepted_by_instance.end()) continue;
    if (!it->second->program) continue;
    out.pc.push_back({inst, *it->second->program});
    out.nl.instances.push_back(inst);
  }
  return out;
}

std::string serialize_pc_instance(const PcInstance& pc) {
  nlohmann::ordered_json rec;
  rec["id"] = pc.instance.id;
  rec["dataset"] = pc.instance.dataset;
  if (pc.instance.task_id) rec["task_id"] = *pc.instance.task_id;
  rec["input"] = pc.instance.input;
  rec["output"] = pc.instance.output;
  rec["program"] = render_program(pc.program);
  if (!pc.instance.meta.empty()) {
    nlohmann::ordered_json meta;
    for (const auto& [k, v] : pc.instance.meta) meta[k] = v;
    rec["meta"] = std::move(meta);
  }
  return rec.dump();
}

std::vector<PcInstance> read_pc_corpus(const std::string& path) {
  std::vector<PcInstance> out;
  ParseOptions lenient;
  lenient.require_invocation = false;
  size_t line_no = 0;
  for (const auto& line : split_lines(read_file(path))) {
    ++line_no;
    if (is_blank(line)) continue;
    json rec = json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.contains("program"))
      throw PipelineError(path + " line " + std::to_string(line_no) +
                          ": not a pc-corpus record");
    PcInstance pc;
    pc.instance.id = rec.at("id").get<std::string>();
    pc.instance.dataset = rec.at("dataset").get<std::string>();
    if (rec.contains("task_id")) pc.instance.task_id = rec["task_id"].get<std::string>();
    pc.instance.input = rec.at("input").get<std::string>();
    pc.instance.output = rec.at("output").get<std::string>();
    if (rec.contains("meta"))
      for (auto& [k, v] : rec["meta"].items())
        pc.instance.meta[k] = v.is_string() ? v.get<std::string>() : v.dump();
    ParseResult p = parse_program(rec["program"].get<std::string>(), lenient);
    if (!p.ok())
      throw PipelineError(path + " line " + std::to_string(line_no) +
                          ": unparsable program: " + p.error.code);
    pc.program = std::move(*p.program);
    out.push_back(std::move(pc));
  }
  return out;
}

// ---- state log ----

StateLog::StateLog(std::string path) : path_(std::move(path)) {}

std::string StateLog::serialize_record(const PipelineRecord& r) {
  json rec;
  rec["unit_id"] = r.unit_id;
  rec["dataset"] = r.dataset;
  rec["stage"] = std::string(stage_name(r.stage));
  rec["instance_ids"] = r.instance_ids;
  if (r.program) rec["program"] = render_program(*r.program);
  if (!r.candidate_programs.empty()) {
    json cands = json::array();
    for (const auto& c : r.candidate_programs) {
      cands.push_back({{"origin", c.origin},
                       {"task_em", c.task_em},
                       {"program", render_program(c.program)}});
    }
    rec["candidates"] = std::move(cands);
  }
  if (!r.evals.empty()) {
    json evals = json::array();
    for (const auto& ev : r.evals) {
      json e;
      e["id"] = ev.instance_id;
      if (ev.pc_output) e["pc"] = *ev.pc_output;
      if (ev.nl_output) e["nl"] = *ev.nl_output;
      if (ev.em) e["em"] = *ev.em;
      e["nl_correct"] = ev.nl_correct;
      evals.push_back(std::move(e));
    }
    rec["evals"] = std::move(evals);
  }
  if (r.task_em) rec["task_em"] = *r.task_em;
  if (r.unscored_count) rec["unscored"] = r.unscored_count;
  if (!r.reject_reason.empty()) rec["reject_reason"] = r.reject_reason;
  if (!r.raw_generation.empty()) rec["raw"] = r.raw_generation;
  return rec.dump();
}

PipelineRecord StateLog::deserialize_record(const std::string& line) {
  json rec = json::parse(line);
  PipelineRecord r;
  r.unit_id = rec.at("unit_id").get<std::string>();
  r.dataset = rec.at("dataset").get<std::string>();
  r.stage = stage_from_name(rec.at("stage").get<std::string>());
  r.instance_ids = rec.value("instance_ids", std::vector<std::string>{});

  ParseOptions lenient;
  lenient.require_invocation = false;
  if (rec.contains("program")) {
    ParseResult p = parse_program(rec["program"].get<std::string>(), lenient);
    if (!p.ok()) throw PipelineError("state log holds unparsable program: " + p.error.code);
    r.program = std::move(*p.program);
  }
  for (const auto& c : rec.value("candidates", json::array())) {
    ParseResult p = parse_program(c.at("program").get<std::string>(), lenient);
    if (!p.ok()) throw PipelineError("state log holds unparsable candidate");
    r.candidate_programs.push_back({c.at("origin").get<std::string>(), std::move(*p.program),
                                    c.at("task_em").get<double>()});
  }
  for (const auto& e : rec.value("evals", json::array())) {
    InstanceEval ev;
    ev.instance_id = e.at("id").get<std::string>();
    if (e.contains("pc")) ev.pc_output = e["pc"].get<std::string>();
    if (e.contains("nl")) ev.nl_output = e["nl"].get<std::string>();
    if (e.contains("em")) ev.em = e["em"].get<double>();
    ev.nl_correct = e.value("nl_correct", false);
    r.evals.push_back(std::move(ev));
  }
  if (rec.contains("task_em")) r.task_em = rec["task_em"].get<double>();
  r.unscored_count = rec.value("unscored", size_t{0});
  r.reject_reason = rec.value("reject_reason", std::string{});
  r.raw_generation = rec.value("raw", std::string{});
  return r;
}

void StateLog::append(const PipelineRecord& record) {
  std::lock_guard<std::mutex> lock(mutex_);
  append_file(path_, serialize_record(record) + "\n");
}

std::map<std::string, PipelineRecord> StateLog::replay() const {
  std::map<std::string, PipelineRecord> out;
  if (!file_exists(path_)) return out;
  for (const auto& line : split_lines(read_file(path_))) {
    if (is_blank(line)) continue;
    PipelineRecord r = deserialize_record(line);
    out[r.unit_id] = std::move(r);
  }
  return out;
}

// ---- orchestration ----

namespace {

struct Unit {
  std::string unit_id;
  std::vector<InstructionInstance> instances;
};

std::vector<Unit> collect_units(const Corpus& corpus, const DatasetPolicy& policy) {
  std::vector<Unit> units;
  if (policy.unit == UnitKind::instance) {
    for (const auto& inst : corpus.instances) units.push_back({inst.id, {inst}});
    return units;
  }
  std::map<std::string, size_t> index;
  for (const auto& inst : corpus.instances) {
    if (!inst.task_id)
      throw PipelineError("task-unit dataset '" + policy.dataset +
                          "' has an instance without task_id: " + inst.id);
    auto [it, fresh] = index.emplace(*inst.task_id, units.size());
    if (fresh) units.push_back({*inst.task_id, {}});
    units[it->second].instances.push_back(inst);
  }
  return units;
}

PipelineRecord inject_manual_program(const PipelineContext& ctx, const Unit& unit,
                                     const DatasetPolicy& policy) {
  PipelineRecord record;
  record.unit_id = unit.unit_id;
  record.dataset = policy.dataset;
  for (const auto& inst : unit.instances) record.instance_ids.push_back(inst.id);

  auto it = policy.manual_programs.find(unit.unit_id);
  if (it == policy.manual_programs.end()) it = policy.manual_programs.find("*");
  if (it == policy.manual_programs.end()) {
    record.stage = Stage::rejected;
    record.reject_reason = "no manual program configured for unit " + unit.unit_id;
    return record;
  }

  ParseOptions lenient;
  lenient.require_invocation = false;
  ParseResult parsed = parse_program(read_file(it->second), lenient);
  if (!parsed.ok()) {
    record.stage = Stage::rejected;
    record.reject_reason = parsed.error.code;
    emit(ctx, "manual program " + it->second + " failed to parse: " + parsed.error.message);
    return record;
  }
  record.program = std::move(*parsed.program);
  record.stage = Stage::accepted;
  return record;
}

}  // namespace

RunStats run_dataset(const PipelineContext& ctx, const Corpus& corpus,
                     const DatasetPolicy& policy, StateLog* state, int parallelism,
                     RunPhase phase, std::vector<PipelineRecord>* out_records) {
  if (parallelism < 1) throw PipelineError("parallelism must be >= 1");

  std::map<std::string, PipelineRecord> prior;
  if (state) prior = state->replay();

  std::vector<Unit> units = collect_units(corpus, policy);
  std::optional<DemoPool> pool;
  if (policy.policy != StagePolicy::manual && !policy.demos_path.empty())
    pool = load_demo_pool(policy.dataset, policy.demos_path);

  std::vector<std::optional<PipelineRecord>> results(units.size());
  std::atomic<size_t> cursor{0};
  std::atomic<size_t> skipped{0};
  std::mutex error_mutex;
  std::optional<std::string> first_error;

  auto record_stage = [&](const PipelineRecord& r) {
    if (state) state->append(r);
  };

  auto process_unit = [&](const Unit& unit) -> std::optional<PipelineRecord> {
    auto it = prior.find(unit.unit_id);
    PipelineRecord record;
    bool have_prior = it != prior.end();
    if (have_prior) record = it->second;

    if (have_prior && record.final_stage() && !record.retriable()) {
      ++skipped;
      return record;
    }

    if (policy.policy == StagePolicy::manual) {
      if (phase != RunPhase::generate && phase != RunPhase::all) return std::nullopt;
      record = inject_manual_program(ctx, unit, policy);
      record_stage(record);
      return record;
    }

    bool fresh = !have_prior || record.retriable();
    if (fresh) {
      if (phase != RunPhase::generate && phase != RunPhase::all) return std::nullopt;
      if (!pool) throw PipelineError("dataset '" + policy.dataset + "' has no demo pool");
      record = generate_program(ctx, unit.instances.front(), *pool, ctx.seed);
      record.instance_ids.clear();
      for (const auto& inst : unit.instances) record.instance_ids.push_back(inst.id);
      if (record.stage == Stage::rejected) {
        record_stage(record);
        return record;
      }
      if (policy.policy == StagePolicy::generate_only) {
        record.stage = Stage::accepted;
        record_stage(record);
        return record;
      }
      record_stage(record);
      if (phase == RunPhase::generate) return record;
    }

    if (record.stage == Stage::generated) {
      if (phase != RunPhase::evaluate && phase != RunPhase::all) return record;
      record = evaluate_program(ctx, std::move(record), unit.instances);
      record_stage(record);
      if (phase == RunPhase::evaluate) return record;
    }

    if (record.stage == Stage::evaluated) {
      if (phase != RunPhase::repair && phase != RunPhase::all) return record;
      auto flags = needs_repair(record);
      bool any = false;
      for (bool f : flags) any = any || f;
      if (any) {
        record = repair_program(ctx, std::move(record), unit.instances, ctx.repair);
        record_stage(record);
      }
      record.stage = Stage::accepted;
      record_stage(record);
      return record;
    }

    if (record.stage == Stage::repaired) {
      record.stage = Stage::accepted;
      record_stage(record);
      return record;
    }
    return record;
  };

  auto worker = [&] {
    for (;;) {
      size_t i = cursor.fetch_add(1);
      if (i >= units.size()) return;
      try {
        results[i] = process_unit(units[i]);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = e.what();
        return;
      }
    }
  };

  size_t n_workers = std::min<size_t>(static_cast<size_t>(parallelism), units.size());
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(n_workers);
    for (size_t i = 0; i < n_workers; ++i) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (first_error) throw PipelineError(*first_error);

  RunStats stats;
  stats.skipped = skipped.load();
  for (auto& r : results) {
    if (!r) continue;
    ++stats.processed;
    if (r->stage == Stage::accepted) ++stats.accepted;
    if (r->stage == Stage::rejected) ++stats.rejected;
    if (out_records) out_records->push_back(std::move(*r));
  }
  return stats;
}

}  // namespace pcpipe
