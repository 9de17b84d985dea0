#include <iostream>

#include "CLI11.hpp"
#include "commands.hpp"

using namespace denoiserank::cli;

namespace {

void add_config_options(CLI::App* cmd, ConfigOptions& o) {
  cmd->add_option("--config", o.config_file, "key = value configuration file");
  cmd->add_option("--preset", o.preset, "web30k | yahoo | istella");
  cmd->add_option("--set", o.overrides, "override a config key (key=value), repeatable");
  cmd->add_option("--seed", o.seed, "random seed");
  cmd->add_option("--reverse-steps", o.reverse_steps, "reverse diffusion steps (0 = all)");
  cmd->add_option("--workers", o.workers, "worker threads");
  cmd->add_option("--out-dir", o.out_dir, "output directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"denoiserank: diffusion-based learning to rank"};
  app.require_subcommand(1);
  int code = kExitOk;

  PrepareOptions prepare;
  auto* p = app.add_subcommand("prepare", "parse, normalize and cache LETOR files");
  p->add_option("--train", prepare.train, "training split (SVMLight)")->required();
  p->add_option("--valid", prepare.valid, "validation split");
  p->add_option("--test", prepare.test, "test split");
  p->add_option("--out-dir", prepare.out_dir, "cache directory")->required();
  p->add_option("--num-features", prepare.num_features, "feature count (default: largest id)");
  p->callback([&] { code = cmd_prepare(prepare, std::cout); });

  ConfigOptions train;
  auto* t = app.add_subcommand("train", "train a model");
  add_config_options(t, train);
  t->callback([&] { code = cmd_train(train, std::cout, std::cerr); });

  EvaluateOptions evaluate;
  auto* e = app.add_subcommand("evaluate", "ranking metrics of a checkpoint on a test split");
  add_config_options(e, evaluate.config);
  e->add_option("--checkpoint", evaluate.checkpoint)->required();
  e->add_option("--test-cache", evaluate.test_cache);
  e->add_option("--cutoffs", evaluate.cutoffs, "e.g. 1,5,10,ALL");
  e->callback([&] { code = cmd_evaluate(evaluate, std::cout, std::cerr); });

  InferOptions infer;
  auto* i = app.add_subcommand("infer", "write per-document scores and ranks");
  add_config_options(i, infer.config);
  i->add_option("--checkpoint", infer.checkpoint)->required();
  i->add_option("--input", infer.input, "prepared cache")->required();
  i->add_option("--output", infer.output, "TSV path (default: stdout)");
  i->callback([&] { code = cmd_infer(infer, std::cout); });

  EvaluateOptions diversity;
  auto* d = app.add_subcommand("diversity", "ranking sequence diversity over repeated inference");
  add_config_options(d, diversity.config);
  d->add_option("--checkpoint", diversity.checkpoint)->required();
  d->add_option("--test-cache", diversity.test_cache);
  d->add_option("--k-list", diversity.cutoffs, "e.g. 1,5,10,20");
  d->add_option("--repeat", diversity.config.repeat, "repetitions M");
  d->callback([&] { code = cmd_diversity(diversity, std::cout, std::cerr); });

  GradcheckOptions gradcheck;
  auto* g = app.add_subcommand("gradcheck", "finite-difference and schedule self checks");
  g->add_option("--trials", gradcheck.trials, "random instances per check");
  g->add_option("--seed", gradcheck.seed);
  g->callback([&] { code = cmd_gradcheck(gradcheck, std::cout); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? 0 : kExitConfig;
  } catch (...) {
    return report_exception(std::cerr);
  }
  return code;
}
