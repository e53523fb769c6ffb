#include "mdg/config.hpp"
#include "mdg/harness.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

namespace {

using namespace mdg;

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> sources;
  std::string target;
  std::string checkpoint;
  std::string kind = "node";
  int shots = 1;
  int tasks = -1;            // -1: take from config
  std::string seeds;         // comma list; empty: take from config
  std::string out;
  std::string variant;
};

ExperimentConfig load_config(const CommonOptions& opt) {
  ExperimentConfig cfg;
  if (!opt.config_path.empty()) cfg = parse_config(opt.config_path);
  if (!opt.variant.empty()) apply_variant(cfg, opt.variant);
  cfg.validate();
  return cfg;
}

std::vector<DomainDataset> load_sources(const std::vector<std::string>& manifests) {
  if (manifests.empty()) throw ConfigError("no --source manifest given");
  std::vector<DomainDataset> datasets;
  datasets.reserve(manifests.size());
  for (const std::string& m : manifests) datasets.push_back(load_dataset(m));
  return datasets;
}

int run_pretrain(const CommonOptions& opt) {
  const ExperimentConfig cfg = load_config(opt);
  if (opt.out.empty()) throw ConfigError("pretrain needs --out <checkpoint>");
  const std::vector<DomainDataset> sources = load_sources(opt.sources);
  const PretrainResult result = pretrain(sources, cfg.pretrain_config());
  for (std::size_t e = 0; e < result.epoch_losses.size(); ++e) {
    std::cout << e << "\t" << format_double(result.epoch_losses[e]) << "\n";
  }
  std::cout << "final\t" << format_double(result.final_loss) << "\n";
  save_checkpoint(result.bundle, opt.out);
  return 0;
}

int run_eval(const CommonOptions& opt) {
  ExperimentConfig cfg = load_config(opt);
  if (opt.checkpoint.empty()) throw ConfigError("eval needs --checkpoint");
  if (opt.target.empty()) throw ConfigError("eval needs --target <manifest>");
  if (opt.out.empty()) throw ConfigError("eval needs --out <report>");
  const TaskKind kind = parse_task_kind(opt.kind);
  const PretrainedBundle bundle = load_checkpoint(opt.checkpoint);
  if (cfg.mixing_prompt && bundle.tokens.empty()) {
    throw ConfigError("checkpoint was pre-trained without domain tokens; "
                      "use --variant 1 or 2 or disable mixing_prompt");
  }
  const DomainDataset target = load_dataset(opt.target);
  const int tasks = opt.tasks > 0 ? opt.tasks : cfg.eval_tasks;
  const std::vector<std::uint64_t> seeds =
      opt.seeds.empty() ? cfg.eval_seeds : parse_seed_list(opt.seeds);
  const EvalReport report =
      evaluate(bundle, target, kind, opt.shots, tasks, seeds, cfg.adapt_config());
  write_report(report, opt.out);
  std::cout << "mean=" << format_fixed(report.mean, 2) << " std=" << format_fixed(report.stddev, 2)
            << " n=" << report.records.size() << "\n";
  std::cout << format_summary(report.mean, report.stddev) << "\n";
  return 0;
}

int run_ablate(const CommonOptions& opt, const std::string& mode) {
  const ExperimentConfig cfg = load_config(opt);
  if (opt.target.empty()) throw ConfigError("ablate needs --target <manifest>");
  if (opt.out.empty()) throw ConfigError("ablate needs --out <table>");
  const TaskKind kind = parse_task_kind(opt.kind);
  const std::vector<DomainDataset> sources = load_sources(opt.sources);
  const DomainDataset target = load_dataset(opt.target);
  const int tasks = opt.tasks > 0 ? opt.tasks : cfg.eval_tasks;
  const std::vector<std::uint64_t> seeds =
      opt.seeds.empty() ? cfg.eval_seeds : parse_seed_list(opt.seeds);

  std::vector<AblationRow> rows;
  if (mode == "data") {
    rows = run_data_ablation(sources, target, kind, opt.shots, cfg.pretrain_config(),
                             cfg.adapt_config(), tasks, seeds);
  } else if (mode == "model") {
    rows = run_model_ablation(sources, target, kind, opt.shots, cfg.pretrain_config(),
                              cfg.adapt_config(), tasks, seeds);
  } else {
    throw ConfigError("unknown ablation mode '" + mode + "' (expected data or model)");
  }
  write_ablation(rows, opt.out);
  for (const AblationRow& row : rows) {
    std::cout << row.label << "\t" << format_summary(row.report.mean, row.report.stddev) << "\n";
  }
  return 0;
}

int run_gensynth(const std::string& spec_path, const std::string& out_dir) {
  if (spec_path.empty()) throw ConfigError("gensynth needs --spec <file>");
  if (out_dir.empty()) throw ConfigError("gensynth needs --out <dir>");
  const SynthSpec spec = parse_synth_spec(spec_path);
  for (std::size_t i = 0; i < spec.domains.size(); ++i) {
    const DomainDataset ds = generate_synthetic_domain(spec, static_cast<int>(i), spec.seed);
    write_dataset_files(ds, out_dir);
    std::cout << ds.domain_id << "\tnodes=" << ds.graphs[0].node_count()
              << "\tedges=" << ds.graphs[0].edges().size() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-domain graph pre-training and prompt-based few-shot adaptation"};
  app.require_subcommand(1);

  CommonOptions opt;
  std::string mode;
  std::string spec_path;

  CLI::App* pre = app.add_subcommand("pretrain", "fit aligners, tokens and encoder on source domains");
  pre->add_option("--config", opt.config_path, "experiment config file");
  pre->add_option("--source", opt.sources, "source domain manifest (repeatable)")->required();
  pre->add_option("--out", opt.out, "checkpoint output path")->required();
  pre->add_option("--variant", opt.variant, "ablation variant: 1|2|3|4|full");

  CLI::App* eval = app.add_subcommand("eval", "episodic few-shot evaluation on a target domain");
  eval->add_option("--config", opt.config_path, "experiment config file");
  eval->add_option("--checkpoint", opt.checkpoint, "pre-trained checkpoint")->required();
  eval->add_option("--target", opt.target, "target domain manifest")->required();
  eval->add_option("--kind", opt.kind, "task kind: node|graph");
  eval->add_option("--shots", opt.shots, "labeled instances per class");
  eval->add_option("--tasks", opt.tasks, "tasks per seed");
  eval->add_option("--seeds", opt.seeds, "comma-separated seed list");
  eval->add_option("--out", opt.out, "report output path")->required();
  eval->add_option("--variant", opt.variant, "ablation variant: 1|2|3|4|full");

  CLI::App* ablate = app.add_subcommand("ablate", "data or model ablation sweep");
  ablate->add_option("--mode", mode, "data|model")->required();
  ablate->add_option("--config", opt.config_path, "experiment config file");
  ablate->add_option("--source", opt.sources, "source domain manifest (repeatable)")->required();
  ablate->add_option("--target", opt.target, "target domain manifest")->required();
  ablate->add_option("--kind", opt.kind, "task kind: node|graph");
  ablate->add_option("--shots", opt.shots, "labeled instances per class");
  ablate->add_option("--tasks", opt.tasks, "tasks per seed");
  ablate->add_option("--seeds", opt.seeds, "comma-separated seed list");
  ablate->add_option("--out", opt.out, "table output path")->required();

  CLI::App* gensynth = app.add_subcommand("gensynth", "generate synthetic multi-domain datasets");
  gensynth->add_option("--spec", spec_path, "synthetic data spec file")->required();
  gensynth->add_option("--out", opt.out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  }

  try {
    if (pre->parsed()) return run_pretrain(opt);
    if (eval->parsed()) return run_eval(opt);
    if (ablate->parsed()) return run_ablate(opt, mode);
    if (gensynth->parsed()) return run_gensynth(spec_path, opt.out);
  } catch (const mdg::ConfigError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
