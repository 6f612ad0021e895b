// embias command line front end.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <unordered_set>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "embias/debias.hpp"
#include "embias/embedding_store.hpp"
#include "embias/evaluation.hpp"
#include "embias/gender_subspace.hpp"
#include "embias/intrinsic_metrics.hpp"
#include "embias/mab_testgen.hpp"
#include "embias/quality_bench.hpp"
#include "embias/report.hpp"

#ifndef EMBIAS_DATA_DIR
#define EMBIAS_DATA_DIR "data"
#endif

namespace fs = std::filesystem;
using namespace embias;
using nlohmann::json;

namespace {

std::string default_data(const char* name) { return (fs::path(EMBIAS_DATA_DIR) / name).string(); }

// Loads only `keep` (plus lowercase forms) when given, else everything.
Embedding load_space(const std::string& path, const std::vector<const WordList*>& keep,
                     const std::vector<std::string>& extra = {}) {
  if (keep.empty() || std::any_of(keep.begin(), keep.end(), [](auto* w) { return w == nullptr; })) {
    return load_embeddings(path);
  }
  WordList filter{"filter", {}};
  std::unordered_set<std::string> seen;
  auto add = [&](const std::string& w) {
    for (const auto& f : {w, to_lower(w)}) {
      if (seen.insert(f).second) filter.words.push_back(f);
    }
  };
  for (const auto* list : keep) {
    for (const auto& w : list->words) add(w);
  }
  for (const auto& w : extra) add(w);
  LoadOptions opts;
  opts.vocab_filter = &filter;
  return load_embeddings(path, opts);
}

void print_json(const json& j, const std::string& out) {
  if (out.empty() || out == "-") {
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::ofstream f(out);
  if (!f) throw Error(fmt::format("cannot write {}", out));
  f << j.dump(2) << '\n';
}

GenderSubspace build_subspace(const Embedding& emb, const std::string& f, const std::string& m, int d, bool center) {
  const auto diffs = pairwise_differences(load_wordlist(f), load_wordlist(m), emb);
  if (diffs.dropped_female + diffs.dropped_male > 0) {
    warn(fmt::format("{} female and {} male names missing from the embedding", diffs.dropped_female,
                     diffs.dropped_male));
  }
  return principal_subspace(diffs, d, center);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gender bias measurement and mitigation for static word embeddings"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Suppress warnings");

  // testgen
  auto* testgen = app.add_subcommand("testgen", "Generate a marked-attribute NLI test set");
  std::string tg_kind, tg_out, tg_words, tg_data = EMBIAS_DATA_DIR;
  bool tg_strict = false;
  testgen->add_option("--kind", tg_kind, "explicit | names | occupations")->required();
  testgen->add_option("--out", tg_out, "Output file")->required();
  testgen->add_option("--words", tg_words, "Attribute word file (default: shipped set for --kind)");
  testgen->add_option("--data-dir", tg_data, "Directory with the template bank")->capture_default_str();
  testgen->add_flag("--strict", tg_strict, "Fail unless the bank yields exactly 1968 premises");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Score NLI predictions on a test set");
  std::string ev_testset, ev_preds, ev_out;
  EvaluationOptions ev_opts;
  evaluate->add_option("--testset", ev_testset)->required()->check(CLI::ExistingFile);
  evaluate->add_option("--preds", ev_preds, "id N E C per line")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--permutations", ev_opts.permutations)->capture_default_str();
  evaluate->add_option("--seed", ev_opts.seed)->capture_default_str();
  evaluate->add_option("--workers", ev_opts.workers, "0 = hardware threads");
  evaluate->add_flag("--literal-eq2", ev_opts.literal_eq2, "Also report the unnormalised distance form");
  evaluate->add_option("--out", ev_out, "JSON report (default stdout)");

  // subspace
  auto* subspace = app.add_subcommand("subspace", "Build the weighted gender subspace from name pairs");
  std::string ss_emb, ss_out, ss_f = default_data("subspace_names_f.txt"), ss_m = default_data("subspace_names_m.txt");
  int ss_d = kDefaultSubspaceDim;
  bool ss_no_center = false;
  subspace->add_option("--emb", ss_emb)->required()->check(CLI::ExistingFile);
  subspace->add_option("--names-f", ss_f)->capture_default_str();
  subspace->add_option("--names-m", ss_m)->capture_default_str();
  subspace->add_option("-d,--dim", ss_d)->capture_default_str();
  subspace->add_flag("--no-center", ss_no_center, "PCA on uncentred difference rows");
  subspace->add_option("--out", ss_out)->required();

  // debias
  auto* debias = app.add_subcommand("debias", "Apply MISP, MHD or single-direction neutralisation");
  std::string db_emb, db_method = "misp", db_perm, db_subspace, db_exclude, db_out, db_targets;
  std::string db_f = default_data("subspace_names_f.txt"), db_m = default_data("subspace_names_m.txt");
  std::string db_fem = "she", db_masc = "he";
  int db_d = kDefaultSubspaceDim;
  debias->add_option("--emb", db_emb)->required()->check(CLI::ExistingFile);
  debias->add_option("--method", db_method, "misp | mhd | neutralize")->capture_default_str();
  debias->add_option("--perm", db_perm, "Weight permutation digits, e.g. 1243");
  debias->add_option("--subspace", db_subspace, "Saved subspace (default: build from names)");
  debias->add_option("--names-f", db_f)->capture_default_str();
  debias->add_option("--names-m", db_m)->capture_default_str();
  debias->add_option("-d,--dim", db_d)->capture_default_str();
  debias->add_option("--exclude", db_exclude, "Word list left untouched");
  debias->add_option("--targets", db_targets, "neutralize: words to project (default: all not excluded)");
  debias->add_option("--fem", db_fem)->capture_default_str();
  debias->add_option("--masc", db_masc)->capture_default_str();
  debias->add_option("--out", db_out)->required();

  // metrics
  auto* metrics = app.add_subcommand("metrics", "Compute one intrinsic bias measure");
  std::string mt_emb, mt_measure, mt_vocab, mt_orig, mt_classifier = "lr", mt_sembias;
  std::string mt_f = default_data("subspace_names_f.txt"), mt_m = default_data("subspace_names_m.txt");
  std::string mt_fem = "she", mt_masc = "he", mt_subspace;
  double mt_theta = 0.03, mt_train = 0.2;
  std::size_t mt_neighbors = 100, mt_ncluster = 1500, mt_recover_n = 2500;
  std::uint64_t mt_seed = kDefaultSeed;
  int mt_d = kDefaultSubspaceDim;
  unsigned mt_workers = 0;
  bool mt_normalize = false;
  metrics->add_option("--emb", mt_emb)->required()->check(CLI::ExistingFile);
  metrics->add_option("--measure", mt_measure, "db | midb | cluster | recover | gipe | sembias")->required();
  metrics->add_option("--vocab", mt_vocab, "Target vocabulary (default: whole embedding)");
  metrics->add_option("--original", mt_orig, "Space the biased words are picked in (default: --emb)");
  metrics->add_option("--theta", mt_theta)->capture_default_str();
  metrics->add_option("--neighbors", mt_neighbors)->capture_default_str();
  metrics->add_option("--n-cluster", mt_ncluster, "Words per class for clustering")->capture_default_str();
  metrics->add_option("--n-recover", mt_recover_n, "Words per class for recoverability")->capture_default_str();
  metrics->add_option("--train-frac", mt_train)->capture_default_str();
  metrics->add_option("--classifier", mt_classifier, "lr | mlp")->capture_default_str();
  metrics->add_option("--seed", mt_seed)->capture_default_str();
  metrics->add_option("--sembias", mt_sembias, "SemBias tuples (native format)");
  metrics->add_option("--subspace", mt_subspace, "Saved subspace for midb");
  metrics->add_option("--names-f", mt_f)->capture_default_str();
  metrics->add_option("--names-m", mt_m)->capture_default_str();
  metrics->add_option("-d,--dim", mt_d)->capture_default_str();
  metrics->add_option("--fem", mt_fem)->capture_default_str();
  metrics->add_option("--masc", mt_masc)->capture_default_str();
  metrics->add_option("--workers", mt_workers, "0 = hardware threads");
  metrics->add_flag("--normalize", mt_normalize, "Unit-normalise vectors for cluster/recover");

  // bench
  auto* bench = app.add_subcommand("bench", "Word similarity or analogy benchmark");
  std::string bn_emb, bn_task, bn_dataset;
  unsigned bn_workers = 0;
  bench->add_option("--emb", bn_emb)->required()->check(CLI::ExistingFile);
  bench->add_option("--task", bn_task, "similarity | analogy")->required();
  bench->add_option("--dataset", bn_dataset)->required()->check(CLI::ExistingFile);
  bench->add_option("--workers", bn_workers, "0 = hardware threads");

  // run
  auto* run = app.add_subcommand("run", "Run a batch manifest");
  std::string rn_manifest;
  run->add_option("--manifest", rn_manifest)->required()->check(CLI::ExistingFile);

  // vocab
  auto* vocab = app.add_subcommand("vocab", "Build the target vocabulary from two embeddings");
  std::string vc_a, vc_b, vc_gendered, vc_out;
  std::size_t vc_top = 50000;
  vocab->add_option("--emb-a", vc_a)->required()->check(CLI::ExistingFile);
  vocab->add_option("--emb-b", vc_b)->required()->check(CLI::ExistingFile);
  vocab->add_option("--gendered", vc_gendered, "Gender-specific words to remove");
  vocab->add_option("--top-k", vc_top)->capture_default_str();
  vocab->add_option("--out", vc_out)->required();

  // convert
  auto* convert = app.add_subcommand("convert", "Convert published dataset formats");
  std::string cv_format, cv_in, cv_answers, cv_out;
  convert->add_option("--format", cv_format, "sembias | msr")->required();
  convert->add_option("--in", cv_in)->required()->check(CLI::ExistingFile);
  convert->add_option("--answers", cv_answers, "msr: separate answer file");
  convert->add_option("--out", cv_out)->required();

  CLI11_PARSE(app, argc, argv);
  set_warnings_enabled(!quiet);

  try {
    if (testgen->parsed()) {
      const auto kind = parse_set_kind(tg_kind);
      const fs::path dir(tg_data);
      const auto bank = load_templates(dir / "verbs.txt", dir / "objects.tsv", dir / "pairing.tsv", tg_strict);
      std::string words = tg_words;
      if (words.empty()) {
        words = (dir / (kind == SetKind::Explicit ? "gender_words.tsv"
                        : kind == SetKind::Name   ? "names.tsv"
                                                  : "occupations.tsv"))
                    .string();
      }
      ArticleRules rules;
      if (fs::exists(dir / "article_exceptions.tsv")) rules = load_article_rules(dir / "article_exceptions.tsv");
      const auto set = generate(bank, kind, load_attribute_words(words), rules);
      save_testset(set, tg_out);
      std::size_t m = 0;
      for (const auto& p : set.pairs) m += p.group == Group::M;
      fmt::print("{} pairs ({} premises; {} M, {} F) -> {}\n", set.pairs.size(), bank.premise_count(), m,
                 set.pairs.size() - m, tg_out);
    } else if (evaluate->parsed()) {
      const auto set = load_testset(ev_testset);
      PredictionLoadStats stats;
      const PredictionSet preds(set, load_predictions(ev_preds, &stats));
      if (preds.missing() > 0) warn(fmt::format("{} test pairs have no prediction", preds.missing()));
      if (preds.extra() > 0) warn(fmt::format("{} predictions match no test pair", preds.extra()));
      auto report = json::parse(evaluation_report(preds, ev_opts));
      print_json(report, ev_out);
    } else if (subspace->parsed()) {
      const auto f = load_wordlist(ss_f), m = load_wordlist(ss_m);
      const auto emb = load_space(ss_emb, {&f, &m});
      const auto sub = build_subspace(emb, ss_f, ss_m, ss_d, !ss_no_center);
      save_subspace(sub, ss_out);
      for (int i = 0; i < sub.dim(); ++i) fmt::print("g{} weight {:.6f}\n", i + 1, sub.weights[i]);
    } else if (debias->parsed()) {
      const auto method = parse_debias_method(db_method);
      const auto emb = load_embeddings(db_emb);
      std::optional<WordList> exclude;
      if (!db_exclude.empty()) exclude = load_wordlist(db_exclude);
      Embedding out;
      if (method == DebiasMethod::Neutralize) {
        if (!db_perm.empty()) throw Error("--perm applies to misp only");
        const Vector g = gender_direction(emb, db_fem, db_masc);
        WordList targets;
        if (!db_targets.empty()) {
          targets = load_wordlist(db_targets);
        } else {
          std::unordered_set<std::string> skip;
          if (exclude) skip.insert(exclude->words.begin(), exclude->words.end());
          for (const auto& w : emb.vocab()) {
            if (!skip.count(w)) targets.words.push_back(w);
          }
        }
        out = neutralize(emb, g, targets);
      } else {
        const auto sub = db_subspace.empty() ? build_subspace(emb, db_f, db_m, db_d, true) : load_subspace(db_subspace);
        DebiasSpec spec;
        spec.method = method;
        if (!db_perm.empty()) {
          if (method != DebiasMethod::Misp) throw Error("--perm applies to misp only");
          spec.method = DebiasMethod::MispPermuted;
          spec.permutation = parse_permutation(db_perm);
        }
        spec.exclude = exclude;
        spec.validate(sub.dim());
        out = misp(emb, sub, spec);
      }
      save_embeddings(out, db_out);
      fmt::print("{} words x {} dims -> {}\n", out.size(), out.dim(), db_out);
    } else if (metrics->parsed()) {
      std::optional<WordList> target;
      if (!mt_vocab.empty()) target = load_wordlist(mt_vocab);
      const WordList none{"", {}};
      std::vector<std::string> extra{mt_fem, mt_masc};
      std::optional<WordList> names_f, names_m;
      std::vector<SemBiasTuple> tuples;
      if (mt_measure == "midb" && mt_subspace.empty()) {
        names_f = load_wordlist(mt_f);
        names_m = load_wordlist(mt_m);
        extra.insert(extra.end(), names_f->words.begin(), names_f->words.end());
        extra.insert(extra.end(), names_m->words.begin(), names_m->words.end());
      }
      if (mt_measure == "sembias") {
        if (mt_sembias.empty()) throw Error("sembias needs --sembias");
        tuples = load_sembias(mt_sembias);
        for (const auto& t : tuples) {
          for (const auto& [a, b] : t.pairs) {
            extra.push_back(a);
            extra.push_back(b);
          }
        }
      }
      const Embedding emb = load_space(mt_emb, {target ? &*target : nullptr}, extra);
      const WordList vt = target ? *target : WordList{"vocab", emb.vocab()};
      json j{{"measure", mt_measure}, {"embedding", mt_emb}};
      if (mt_measure == "db") {
        const auto r = direct_bias(emb, vt, gender_direction(emb, mt_fem, mt_masc));
        j["value"] = r.value;
        j["covered"] = r.covered;
        j["missing"] = r.missing;
        j["skipped"] = r.skipped;
      } else if (mt_measure == "midb") {
        const auto sub = mt_subspace.empty() ? principal_subspace(pairwise_differences(*names_f, *names_m, emb), mt_d)
                                             : load_subspace(mt_subspace);
        const auto r = midb_average(emb, vt, sub);
        j["value"] = r.value;
        j["covered"] = r.covered;
        j["missing"] = r.missing;
        j["weights"] = sub.weights;
      } else if (mt_measure == "cluster" || mt_measure == "recover") {
        std::optional<Embedding> orig;
        if (!mt_orig.empty()) orig = load_space(mt_orig, {target ? &*target : nullptr}, extra);
        const Embedding& o = orig ? *orig : emb;
        WordList common{"common", {}};
        for (const auto& w : vt.words) {
          if (o.contains(w) && emb.contains(w)) common.words.push_back(w);
        }
        const auto g = gender_direction(o, mt_fem, mt_masc);
        if (mt_measure == "cluster") {
          const auto ws = most_biased_words(o, g, mt_ncluster, common);
          const auto r = clustering_bias(emb, ws, 2, mt_seed, mt_normalize);
          j["v_measure"] = r.v_measure;
          j["accuracy"] = r.accuracy;
          j["n"] = r.n;
        } else {
          const auto ws = most_biased_words(o, g, mt_recover_n, common);
          j["value"] = recoverability(emb, ws, mt_train, parse_classifier(mt_classifier), mt_seed, mt_normalize);
          j["classifier"] = mt_classifier;
          j["n"] = ws.size();
        }
        j["seed"] = mt_seed;
      } else if (mt_measure == "gipe") {
        GipeConfig cfg;
        cfg.theta = mt_theta;
        cfg.n_neighbors = mt_neighbors;
        cfg.vocab = vt;
        const auto r = gipe(emb, cfg, gender_direction(emb, mt_fem, mt_masc), mt_workers);
        j["value"] = r.value;
        j["theta"] = mt_theta;
        j["neighbors"] = mt_neighbors;
        j["covered"] = r.covered;
        j["missing"] = r.missing;
        j["skipped_pairs"] = r.skipped_pairs;
      } else if (mt_measure == "sembias") {
        const auto r = sembias(emb, tuples, mt_fem, mt_masc);
        j["def"] = r.def;
        j["stereo"] = r.stereo;
        j["other"] = r.other;
        j["retained"] = r.retained;
        j["dropped"] = r.dropped;
        j["ties"] = r.ties;
      } else {
        throw Error(fmt::format("unknown measure '{}'", mt_measure));
      }
      print_json(j, "");
    } else if (bench->parsed()) {
      const auto emb = load_embeddings(bn_emb);
      json j{{"task", bn_task}, {"dataset", bn_dataset}};
      if (bn_task == "similarity") {
        const auto r = word_similarity(emb, load_similarity(bn_dataset));
        j["spearman_x100"] = r.score;
        j["covered"] = r.covered;
        j["total"] = r.total;
      } else if (bn_task == "analogy") {
        const auto r = analogy_accuracy(emb, load_analogy(bn_dataset), bn_workers);
        j["accuracy"] = r.total;
        j["by_category"] = r.by_category;
        j["by_section"] = r.by_section;
        j["covered"] = r.covered;
        j["skipped"] = r.skipped;
      } else {
        throw Error(fmt::format("unknown task '{}'", bn_task));
      }
      print_json(j, "");
    } else if (run->parsed()) {
      const auto manifest = load_manifest(rn_manifest);
      const auto result = run_manifest(manifest);
      fmt::print("{} computed, {} cached, {} supplied, {} failed -> {}\n", result.computed, result.cache_hits,
                 result.supplied, result.failures.size(), manifest.output_dir.string());
      for (const auto& f : result.failures) fmt::print(stderr, "NA {} / {}: {}\n", f.embedding, f.metric, f.reason);
    } else if (vocab->parsed()) {
      const auto a = load_embeddings(vc_a), b = load_embeddings(vc_b);
      const WordList gendered = vc_gendered.empty() ? WordList{} : load_wordlist(vc_gendered);
      auto vt = build_target_vocab(a, b, gendered, vc_top);
      save_wordlist(vt, vc_out);
      fmt::print("{} words -> {}\n", vt.size(), vc_out);
    } else if (convert->parsed()) {
      if (cv_format == "sembias") {
        const auto tuples = convert_sembias_release(cv_in);
        save_sembias(tuples, cv_out);
        fmt::print("{} tuples -> {}\n", tuples.size(), cv_out);
      } else if (cv_format == "msr") {
        const auto ds = convert_msr(cv_in, cv_answers.empty() ? std::nullopt : std::optional<fs::path>(cv_answers));
        save_analogy(ds, cv_out);
        fmt::print("{} rows -> {}\n", ds.size(), cv_out);
      } else {
        throw Error(fmt::format("unknown format '{}'", cv_format));
      }
    }
  } catch (const std::exception& e) {
    fmt::print(stderr, "embias: error: {}\n", e.what());
    return 1;
  }
  return 0;
}
