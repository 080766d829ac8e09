#include <CLI11.hpp>

#include "pcpipe/cli.hpp"

using namespace pcpipe;

int main(int argc, char** argv) {
  CLI::App app{"pcpipe: pseudo-code instruction data pipeline and eval toolkit"};
  app.require_subcommand(1);

  PipelineArgs pipeline_args;
  auto add_pipeline_flags = [&](CLI::App* cmd, bool needs_endpoint) {
    cmd->add_option("--config", pipeline_args.config_path, "pipeline config JSON")
        ->required();
    cmd->add_option("--dataset", pipeline_args.dataset, "restrict to one dataset");
    cmd->add_option("--seed", pipeline_args.seed, "seed override");
    if (needs_endpoint)
      cmd->add_option("--parallelism", pipeline_args.parallelism, "worker count")
          ->check(CLI::PositiveNumber);
    cmd->add_option("--state", pipeline_args.state_path, "state log path")->required();
    cmd->add_flag("--resume", pipeline_args.resume, "continue from the state log");
    cmd->add_option("--out-dir", pipeline_args.out_dir, "output directory")->required();
  };

  CLI::App* generate = app.add_subcommand("generate", "teacher pseudo-code generation");
  add_pipeline_flags(generate, true);
  CLI::App* evaluate = app.add_subcommand("evaluate", "score generated programs");
  add_pipeline_flags(evaluate, true);
  CLI::App* repair = app.add_subcommand("repair", "repair failing programs");
  add_pipeline_flags(repair, true);
  CLI::App* filter = app.add_subcommand("filter", "emit paired NL/PC corpora");
  add_pipeline_flags(filter, false);
  CLI::App* run_all = app.add_subcommand("run-all", "full conversion pipeline");
  add_pipeline_flags(run_all, true);

  MixArgs mix_args;
  CLI::App* mix = app.add_subcommand("mix", "sample and format training mixtures");
  mix->add_option("--config", mix_args.config_path, "pipeline config JSON")->required();
  mix->add_option("--spec", mix_args.spec_path, "standalone mixture spec JSON");
  mix->add_option("--budget", mix_args.budget, "budget override");
  mix->add_option("--seed", mix_args.seed, "seed override");
  mix->add_option("--nl", mix_args.nl_corpus_path, "filtered NL corpus")->required();
  mix->add_option("--pc", mix_args.pc_corpus_path, "filtered PC corpus")->required();
  mix->add_option("--out-dir", mix_args.out_dir, "output directory")->required();

  PostprocessArgs post_args;
  CLI::App* post = app.add_subcommand("postprocess", "extract and normalize answers");
  post->add_option("--config", post_args.config_path, "pipeline config JSON")->required();
  post->add_option("--generations", post_args.generations_path, "generations JSONL")
      ->required();
  post->add_option("--instances", post_args.instances_path,
                   "gold corpus with options metadata");
  post->add_option("--style", post_args.style, "pc or nl")
      ->check(CLI::IsMember({"pc", "nl"}));
  post->add_option("--out", post_args.out_path, "output JSONL")->required();

  ScoreArgs score_args;
  CLI::App* score = app.add_subcommand("score", "score generations against gold");
  score->add_option("--config", score_args.config_path, "pipeline config JSON")->required();
  score->add_option("--generations", score_args.generations_path, "generations JSONL")
      ->required();
  score->add_option("--gold", score_args.gold_path, "gold corpus JSONL")->required();
  score->add_option("--style", score_args.style, "pc or nl")
      ->check(CLI::IsMember({"pc", "nl"}));
  score->add_option("--out", score_args.out_path, "EvalRecords JSONL")->required();

  SignificanceArgs sig_args;
  CLI::App* sig = app.add_subcommand("significance", "subsample paired t-test");
  sig->add_option("--a", sig_args.records_a_path, "EvalRecords for system A")->required();
  sig->add_option("--b", sig_args.records_b_path, "EvalRecords for system B")->required();
  sig->add_option("--metric", sig_args.metric, "metric name (default em)");
  sig->add_option("--fraction", sig_args.fraction, "subsample fraction (default 0.10)");
  sig->add_option("--trials", sig_args.trials, "trial count (default 500)");
  sig->add_option("--seed", sig_args.seed, "subsampling seed");
  sig->add_option("--out", sig_args.out_path, "result JSON")->required();

  ReportArgs report_args;
  CLI::App* report = app.add_subcommand("report", "aggregate EvalRecords into tables");
  report->add_option("--records", report_args.records_path, "EvalRecords JSONL")->required();
  report->add_option("--metric", report_args.metric, "metric name (default em)");
  report->add_option("--group-by", report_args.group_by, "category or dataset")
      ->check(CLI::IsMember({"category", "dataset"}));
  report->add_option("--baseline", report_args.baseline, "baseline category for deltas");
  report->add_option("--out-dir", report_args.out_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? kExitOk : kExitUsage;
  }

  if (generate->parsed()) return cmd_pipeline(pipeline_args, RunPhase::generate);
  if (evaluate->parsed()) return cmd_pipeline(pipeline_args, RunPhase::evaluate);
  if (repair->parsed()) return cmd_pipeline(pipeline_args, RunPhase::repair);
  if (filter->parsed()) return cmd_filter(pipeline_args);
  if (run_all->parsed()) return cmd_run_all(pipeline_args);
  if (mix->parsed()) return cmd_mix(mix_args);
  if (post->parsed()) return cmd_postprocess(post_args);
  if (score->parsed()) return cmd_score(score_args);
  if (sig->parsed()) return cmd_significance(sig_args);
  if (report->parsed()) return cmd_report(report_args);
  return kExitUsage;
}
