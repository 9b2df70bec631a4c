// rankex: joint bag-level relation extraction with pairwise ranking losses.
// Subcommands: gen, train, eval, inspect, gradcheck.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "rankex/eval.hpp"
#include "rankex/gradcheck.hpp"
#include "rankex/synthgen.hpp"
#include "rankex/trainer.hpp"

namespace fs = std::filesystem;
using namespace rankex;

namespace {

struct GenArgs {
  std::string out_dir;
  SynthConfig cfg;
  std::vector<std::string> ties;     // "src:dst:prob"
  std::vector<std::string> entails;  // "src:dst" (prob 1.0)
};

TiePair parse_tie(const std::string& text, bool entail) {
  TiePair t;
  char extra;
  if (entail) {
    if (std::sscanf(text.c_str(), "%d:%d%c", &t.src, &t.dst, &extra) != 2) {
      throw CLI::ValidationError("--entail expects SRC:DST");
    }
    t.prob = 1.0;
  } else if (std::sscanf(text.c_str(), "%d:%d:%lf%c", &t.src, &t.dst, &t.prob, &extra) != 3) {
    throw CLI::ValidationError("--tie expects SRC:DST:PROB");
  }
  return t;
}

int cmd_gen(const GenArgs& args) {
  SynthConfig cfg = args.cfg;
  for (const auto& s : args.ties) cfg.ties.push_back(parse_tie(s, false));
  for (const auto& s : args.entails) cfg.ties.push_back(parse_tie(s, true));
  const SynthCorpus corpus = generate(cfg);
  fs::create_directories(args.out_dir);
  const fs::path out(args.out_dir);
  write_raw_corpus(out / "train.jsonl", corpus.train);
  write_raw_corpus(out / "test.jsonl", corpus.test);
  write_truth(out / "truth.json", cfg, corpus);
  std::printf("train bags: %d  nr_ratio=%.4f\n", cfg.num_train, nr_ratio(corpus.train));
  std::printf("test bags:  %d  nr_ratio=%.4f\n", cfg.num_test, nr_ratio(corpus.test));
  for (const TiePair& t : cfg.ties) {
    std::printf("tie %s => %s  configured=%.2f  train_cooccurrence=%.4f\n",
                synth_relation_name(t.src).c_str(), synth_relation_name(t.dst).c_str(), t.prob,
                tie_cooccurrence(corpus.train, synth_relation_name(t.src),
                                 synth_relation_name(t.dst)));
  }
  const CeilingReport ceiling = bayes_ceiling(cfg, corpus.test);
  std::printf("test trigger-oracle ceiling: precision=%.4f recall=%.4f max_f=%.4f\n",
              ceiling.precision, ceiling.recall, ceiling.max_f);
  return 0;
}

struct TrainArgs {
  std::string corpus_path;
  std::string dev_path;
  std::string out_dir;
  std::string embeddings_path;
  TrainConfig cfg;
  int min_count = 100;
  bool separated = false;
  bool quiet = false;
};

int cmd_train(const TrainArgs& args) {
  const fs::path corpus_file(args.corpus_path);
  const RelationSchema schema = schema_from_corpus(corpus_file);
  const Vocabulary vocab = build_vocab(count_corpus_tokens(corpus_file), args.min_count);
  std::vector<MentionBag> bags = load_bags(corpus_file, schema, vocab);
  if (args.separated) bags = split_to_separated(bags);

  std::vector<MentionBag> dev;
  if (!args.dev_path.empty()) dev = load_bags(args.dev_path, schema, vocab);

  ModelParams init = init_params(args.cfg.dims, vocab.size(), schema.num_classes(), args.cfg.seed);
  if (!args.embeddings_path.empty()) {
    const int n = load_pretrained_embeddings(args.embeddings_path, vocab, &init.enc.V);
    if (!args.quiet) std::printf("loaded %d pre-trained embedding rows\n", n);
  }
  const TrainResult result = train(bags, schema, vocab.size(), args.cfg,
                                   dev.empty() ? nullptr : &dev,
                                   args.quiet ? nullptr : &std::cout, &init);

  fs::create_directories(args.out_dir);
  const fs::path out(args.out_dir);
  save_checkpoint(out / "checkpoint", result.params, vocab, schema, args.cfg);
  write_metrics_csv(out / "metrics.csv", result.metrics);
  if (!args.quiet && !result.metrics.empty()) {
    const auto& last = result.metrics.back();
    std::printf("final mean_loss=%.6f", last.mean_loss);
    if (last.dev_max_f) std::printf(" dev_max_f=%.4f (best epoch %d)", *last.dev_max_f, result.best_epoch);
    std::printf("\n");
  }
  return 0;
}

struct EvalArgs {
  std::string checkpoint_dir;
  std::string corpus_path;
  std::string out_dir;
  std::string mode;  // "", "ave", "att"
  int top = 2000;
  int threads = 1;
  bool multi_only = false;
};

AggMode pick_mode(const std::string& flag, const TrainConfig& cfg) {
  if (flag == "ave") return AggMode::kAve;
  if (flag == "att") return AggMode::kAtt;
  return cfg.agg_mode();
}

int cmd_eval(const EvalArgs& args) {
  const LoadedCheckpoint ck = load_checkpoint(args.checkpoint_dir);
  const std::vector<MentionBag> bags = load_bags(args.corpus_path, ck.schema, ck.vocab);
  const AggMode mode = pick_mode(args.mode, ck.cfg);
  const PRCurve curve = pr_curve(bags, ck.params, mode, ck.cfg.ranking.att_bias, ck.schema.nr_index,
                                 args.threads, args.multi_only);
  fs::create_directories(args.out_dir);
  const fs::path out(args.out_dir);
  write_pr_csv(out / "pr_curve.csv", curve, ck.schema, args.top);
  write_p_at_n_csv(out / "p_at_n.csv", p_at_n(curve));
  std::printf("max_f=%.6f\n", max_f(curve));
  return 0;
}

struct InspectArgs {
  std::string checkpoint_dir;
  std::string corpus_path;
  std::string tuple_id;
  std::string mode;
  bool rescale = false;
};

int cmd_inspect(const InspectArgs& args) {
  const LoadedCheckpoint ck = load_checkpoint(args.checkpoint_dir);
  const std::vector<MentionBag> bags = load_bags(args.corpus_path, ck.schema, ck.vocab);
  const auto rows = inspect(args.tuple_id, bags, ck.params, ck.schema,
                            pick_mode(args.mode, ck.cfg), ck.cfg.ranking.att_bias, args.rescale);
  write_inspect_csv(std::cout, rows);
  return 0;
}

struct GradcheckArgs {
  GradCheckSpec spec;
  int variant = 0;  // 0 = all three
  int instances = 20;
  double tolerance = 1e-4;
};

int cmd_gradcheck(const GradcheckArgs& args) {
  bool ok = true;
  std::vector<int> variants = args.variant == 0 ? std::vector<int>{1, 2, 3}
                                                : std::vector<int>{args.variant};
  for (int variant : variants) {
    GradCheckSpec spec = args.spec;
    spec.variant = variant;
    std::map<std::string, double> group_worst;
    double worst = 0.0;
    int done = 0;
    uint64_t seed = spec.seed;
    int attempts = 0;
    while (done < args.instances && attempts < args.instances * 50) {
      ++attempts;
      spec.seed = seed++;
      const GradCheckResult r = run_gradcheck_instance(spec);
      if (!r.usable) continue;  // too close to a kink; jitter by reseeding
      ++done;
      worst = std::max(worst, r.max_rel_err);
      for (const auto& g : r.groups) {
        group_worst[g.group] = std::max(group_worst[g.group], g.max_rel_err);
      }
    }
    const bool pass = done == args.instances && worst < args.tolerance;
    ok = ok && pass;
    std::printf("variant %d: %d instances, max_rel_err=%.3e  [%s]\n", variant, done, worst,
                pass ? "PASS" : "FAIL");
    for (const auto& [name, err] : group_worst) {
      std::printf("  %-8s max_rel_err=%.3e\n", name.c_str(), err);
    }
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"joint relation extraction with pairwise ranking losses"};
  app.require_subcommand(1);
  app.set_config("--config", "", "flat key=value settings file ([subcommand] sections); flags override it");

  GenArgs gen;
  auto* sub_gen = app.add_subcommand("gen", "generate a synthetic distant-supervision corpus");
  sub_gen->add_option("--out", gen.out_dir, "output directory")->required();
  sub_gen->add_option("--classes", gen.cfg.num_classes, "relation classes including NR")
      ->capture_default_str();
  sub_gen->add_option("--tie", gen.ties, "co-occurrence tie SRC:DST:PROB (repeatable)");
  sub_gen->add_option("--entail", gen.entails, "entailment tie SRC:DST (prob 1.0, repeatable)");
  sub_gen->add_option("--triggers-per-class", gen.cfg.triggers_per_class)->capture_default_str();
  sub_gen->add_option("--vocab-size", gen.cfg.vocab_size)->capture_default_str();
  sub_gen->add_option("--bag-min", gen.cfg.bag_min)->capture_default_str();
  sub_gen->add_option("--bag-max", gen.cfg.bag_max)->capture_default_str();
  sub_gen->add_option("--sentence-min", gen.cfg.sent_min)->capture_default_str();
  sub_gen->add_option("--sentence-max", gen.cfg.sent_max)->capture_default_str();
  sub_gen->add_option("--train-bags", gen.cfg.num_train)->capture_default_str();
  sub_gen->add_option("--test-bags", gen.cfg.num_test)->capture_default_str();
  sub_gen->add_option("--nr-fraction", gen.cfg.nr_fraction, "NR share of the train split")
      ->capture_default_str();
  sub_gen->add_option("--nr-fraction-test", gen.cfg.nr_fraction_test, "NR share of the test split")
      ->capture_default_str();
  sub_gen->add_option("--noise-rate", gen.cfg.noise_rate)->capture_default_str();
  sub_gen->add_option("--seed", gen.cfg.seed)->capture_default_str();

  TrainArgs tr;
  auto* sub_train = app.add_subcommand("train", "train a model on a corpus");
  sub_train->add_option("--corpus", tr.corpus_path, "training corpus (JSON lines)")->required();
  sub_train->add_option("--dev", tr.dev_path, "held-out corpus for per-epoch max-F tracking");
  sub_train->add_option("--out", tr.out_dir, "output directory")->required();
  sub_train->add_option("--variant", tr.cfg.variant, "loss variant: 1=AVE 2=ATT 3=ExATT")
      ->check(CLI::Range(1, 3))->capture_default_str();
  sub_train->add_flag("--relieve-nr,!--no-relieve-nr", tr.cfg.ranking.relieve_nr,
                      "skip NR positive hinge terms")->capture_default_str();
  sub_train->add_flag("--separated", tr.separated, "split bags into single-label bags");
  sub_train->add_option("--epochs", tr.cfg.epochs)->capture_default_str();
  sub_train->add_option("--batch-size", tr.cfg.batch_size)->capture_default_str();
  sub_train->add_option("--lr", tr.cfg.learning_rate)->capture_default_str();
  sub_train->add_option("--dropout", tr.cfg.dropout_keep, "dropout keep probability")
      ->capture_default_str();
  sub_train->add_option("--seed", tr.cfg.seed)->capture_default_str();
  sub_train->add_option("--threads", tr.cfg.threads)->capture_default_str();
  sub_train->add_option("--min-count", tr.min_count, "vocabulary frequency threshold (strict >)")
      ->capture_default_str();
  sub_train->add_option("--d1", tr.cfg.dims.d1, "word embedding size")->capture_default_str();
  sub_train->add_option("--d2", tr.cfg.dims.d2, "position embedding size")->capture_default_str();
  sub_train->add_option("--ds", tr.cfg.dims.d_s, "number of kernels")->capture_default_str();
  sub_train->add_option("--dwin", tr.cfg.dims.d_win, "convolution window")->capture_default_str();
  sub_train->add_option("--clip", tr.cfg.dims.clip, "position distance clamp")->capture_default_str();
  sub_train->add_flag("--separate-position-tables", tr.cfg.dims.separate_position_tables,
                      "use distinct tables for the two distance channels");
  sub_train->add_option("--rho", tr.cfg.ranking.rho)->capture_default_str();
  sub_train->add_option("--sigma-plus", tr.cfg.ranking.sigma_plus)->capture_default_str();
  sub_train->add_option("--sigma-minus", tr.cfg.ranking.sigma_minus)->capture_default_str();
  sub_train->add_option("--att-bias", tr.cfg.ranking.att_bias)->capture_default_str();
  sub_train->add_option("--embeddings", tr.embeddings_path,
                        "pre-trained word embeddings (word + d1 floats per line)");
  sub_train->add_flag("--quiet", tr.quiet, "suppress progress output");

  EvalArgs ev;
  auto* sub_eval = app.add_subcommand("eval", "held-out evaluation of a checkpoint");
  sub_eval->add_option("--checkpoint", ev.checkpoint_dir)->required();
  sub_eval->add_option("--corpus", ev.corpus_path)->required();
  sub_eval->add_option("--out", ev.out_dir)->required();
  sub_eval->add_option("--mode", ev.mode, "ave|att (default: from checkpoint variant)")
      ->check(CLI::IsMember({"ave", "att"}));
  sub_eval->add_option("--top", ev.top, "PR curve rows written (0 = all)")->capture_default_str();
  sub_eval->add_option("--threads", ev.threads)->capture_default_str();
  sub_eval->add_flag("--multi-only", ev.multi_only, "restrict the pool to bags with >1 mention");

  InspectArgs ins;
  auto* sub_inspect = app.add_subcommand("inspect", "per-class scores for one tuple");
  sub_inspect->add_option("--checkpoint", ins.checkpoint_dir)->required();
  sub_inspect->add_option("--corpus", ins.corpus_path)->required();
  sub_inspect->add_option("--tuple", ins.tuple_id)->required();
  sub_inspect->add_option("--mode", ins.mode)->check(CLI::IsMember({"ave", "att"}));
  sub_inspect->add_flag("--rescale", ins.rescale, "shift scores by +10");

  GradcheckArgs gc;
  auto* sub_gc = app.add_subcommand("gradcheck", "finite-difference verification of all gradients");
  sub_gc->add_option("--variant", gc.variant, "1|2|3, or 0 for all")->check(CLI::Range(0, 3))
      ->capture_default_str();
  sub_gc->add_option("--instances", gc.instances)->capture_default_str();
  sub_gc->add_option("--seed", gc.spec.seed)->capture_default_str();
  sub_gc->add_option("--eps", gc.spec.eps)->capture_default_str();
  sub_gc->add_option("--tolerance", gc.tolerance)->capture_default_str();
  sub_gc->add_option("--ds", gc.spec.dims.d_s)->capture_default_str();
  sub_gc->add_option("--d1", gc.spec.dims.d1)->capture_default_str();
  sub_gc->add_option("--d2", gc.spec.dims.d2)->capture_default_str();
  sub_gc->add_flag("--relieve-nr,!--no-relieve-nr", gc.spec.relieve_nr)->capture_default_str();
  sub_gc->add_flag("--separate-position-tables", gc.spec.dims.separate_position_tables);

  CLI11_PARSE(app, argc, argv);

  try {
    if (sub_gen->parsed()) return cmd_gen(gen);
    if (sub_train->parsed()) return cmd_train(tr);
    if (sub_eval->parsed()) return cmd_eval(ev);
    if (sub_inspect->parsed()) return cmd_inspect(ins);
    if (sub_gc->parsed()) return cmd_gradcheck(gc);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
