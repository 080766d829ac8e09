#include "pcpipe/mixture.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "pcpipe/util.hpp"

namespace pcpipe {

namespace {

using ordered_json = nlohmann::ordered_json;

}  // namespace

std::map<std::string, int64_t> allocate_counts(const MixtureSpec& spec) {
  validate_mixture_spec(spec);

  std::map<std::string, int64_t> counts;
  struct Remainder {
    double frac;
    std::string dataset;
  };
  std::vector<Remainder> remainders;

  int64_t assigned = 0;
  for (const auto& e : spec.entries) {
    double exact = e.proportion * static_cast<double>(spec.budget);
    int64_t base = static_cast<int64_t>(std::floor(exact));
    counts[e.dataset] = base;
    assigned += base;
    remainders.push_back({exact - static_cast<double>(base), e.dataset});
  }

  std::sort(remainders.begin(), remainders.end(), [](const Remainder& a, const Remainder& b) {
    if (a.frac != b.frac) return a.frac > b.frac;
    return a.dataset < b.dataset;
  });
  const int64_t leftover = spec.budget - assigned;
  for (int64_t i = 0; i < leftover; ++i)
    counts[remainders[static_cast<size_t>(i) % remainders.size()].dataset] += 1;
  return counts;
}

SampleReport sample_instances(const Corpus& corpus, int64_t count,
                              std::optional<int64_t> per_task_cap, uint64_t seed) {
  if (count < 0) throw MixtureError("sample count must be >= 0");

  struct Keyed {
    uint64_t key;
    const InstructionInstance* inst;
  };
  std::vector<Keyed> keyed;
  keyed.reserve(corpus.instances.size());
  for (const auto& inst : corpus.instances)
    keyed.push_back({mix_seed(seed, fnv1a64(inst.id)), &inst});
  std::sort(keyed.begin(), keyed.end(), [](const Keyed& a, const Keyed& b) {
    if (a.key != b.key) return a.key < b.key;
    return a.inst->id < b.inst->id;
  });

  SampleReport report;
  std::map<std::string, int64_t> per_task;
  for (const auto& k : keyed) {
    if (static_cast<int64_t>(report.ids.size()) >= count) break;
    if (per_task_cap) {
      const std::string task = k.inst->task_id.value_or("");
      if (per_task[task] >= *per_task_cap) continue;
      ++per_task[task];
    }
    report.ids.push_back(k.inst->id);
  }
  report.shortfall = count - static_cast<int64_t>(report.ids.size());
  return report;
}

TrainingSample format_pc_sample(const InstructionInstance& instance,
                                const PseudoProgram& program) {
  TrainingSample s;
  s.id = instance.id;
  s.style = SampleStyle::PC;
  s.input = instance.input + "\n\n" + std::string(kDirectiveSentence);
  s.output = std::string(kMarkerOpen) + "\n" + render_program(program) + "\n" +
             std::string(kMarkerClose) + "\n" + instance.output;
  return s;
}

TrainingSample format_nl_sample(const InstructionInstance& instance) {
  TrainingSample s;
  s.id = instance.id;
  s.style = SampleStyle::NL;
  s.input = instance.input;
  s.output = instance.output;
  return s;
}

std::string serialize_sample(const TrainingSample& sample) {
  ordered_json rec;
  rec["id"] = sample.id;
  rec["style"] = sample.style == SampleStyle::PC ? "PC" : "NL";
  rec["input"] = sample.input;
  rec["output"] = sample.output;
  return rec.dump();
}

MixtureOutput build_mixture(const MixtureSpec& spec,
                            const std::map<std::string, Corpus>& nl_by_dataset,
                            const std::map<std::string, std::vector<PcInstance>>& pc_by_dataset) {
  MixtureOutput out;
  out.allocated = allocate_counts(spec);

  for (const auto& entry : spec.entries) {
    auto nl_it = nl_by_dataset.find(entry.dataset);
    auto pc_it = pc_by_dataset.find(entry.dataset);
    if (nl_it == nl_by_dataset.end() || pc_it == pc_by_dataset.end())
      throw MixtureError("no corpus for dataset '" + entry.dataset + "'");

    std::map<std::string, const PcInstance*> pc_by_id;
    for (const auto& pc : pc_it->second) pc_by_id[pc.instance.id] = &pc;

    // sample only ids that exist on both sides, keeping the mixtures parallel
    Corpus joint;
    for (const auto& inst : nl_it->second.instances)
      if (pc_by_id.count(inst.id)) joint.instances.push_back(inst);

    SampleReport picks = sample_instances(joint, out.allocated[entry.dataset],
                                          entry.per_task_cap, spec.seed);
    if (picks.shortfall > 0) out.shortfalls[entry.dataset] = picks.shortfall;

    std::map<std::string, const InstructionInstance*> nl_by_id;
    for (const auto& inst : joint.instances) nl_by_id[inst.id] = &inst;

    for (const auto& id : picks.ids) {
      const InstructionInstance& inst = *nl_by_id.at(id);
      const PcInstance& pc = *pc_by_id.at(id);
      if (inst.output.find(kMarkerOpen) != std::string::npos ||
          inst.output.find(kMarkerClose) != std::string::npos)
        out.lint.push_back("instance " + id + ": output contains marker-like text");
      out.nl.push_back(format_nl_sample(inst));
      out.pc.push_back(format_pc_sample(pc.instance, pc.program));
    }
  }

  auto by_id = [](const TrainingSample& a, const TrainingSample& b) { return a.id < b.id; };
  std::sort(out.nl.begin(), out.nl.end(), by_id);
  std::sort(out.pc.begin(), out.pc.end(), by_id);

  std::string pick_digest;
  for (const auto& s : out.nl) {
    pick_digest += s.id;
    pick_digest += '\n';
  }
  out.manifest_hash = content_hash(pick_digest);
  return out;
}

void write_mixture(const MixtureOutput& out, const MixtureSpec& spec,
                   const std::string& out_dir) {
  std::string nl_text, pc_text;
  for (const auto& s : out.nl) nl_text += serialize_sample(s) + "\n";
  for (const auto& s : out.pc) pc_text += serialize_sample(s) + "\n";
  write_file(out_dir + "/nl.jsonl", nl_text);
  write_file(out_dir + "/pc.jsonl", pc_text);

  ordered_json manifest;
  ordered_json entries = ordered_json::array();
  for (const auto& e : spec.entries) {
    ordered_json je;
    je["dataset"] = e.dataset;
    je["proportion"] = e.proportion;
    if (e.per_task_cap) je["per_task_cap"] = *e.per_task_cap;
    entries.push_back(std::move(je));
  }
  manifest["spec"] = {{"entries", std::move(entries)},
                      {"budget", spec.budget},
                      {"seed", spec.seed}};
  manifest["counts"] = out.allocated;
  if (!out.shortfalls.empty()) manifest["shortfalls"] = out.shortfalls;
  manifest["emitted"] = out.nl.size();
  manifest["hash"] = out.manifest_hash;
  if (!out.lint.empty()) manifest["lint"] = out.lint;
  write_file(out_dir + "/manifest.json", manifest.dump(2) + "\n");
}

}  // namespace pcpipe
