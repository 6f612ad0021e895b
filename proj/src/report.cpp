#include "embias/report.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_set>

#include <fmt/format.h>
#include <json.hpp>

#include "embias/evaluation.hpp"
#include "embias/mab_testgen.hpp"

namespace embias {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void check_keys(const json& obj, std::initializer_list<std::string_view> allowed, std::string_view where) {
  if (!obj.is_object()) throw Error(fmt::format("manifest: {} must be an object", where));
  for (const auto& [k, v] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
      throw Error(fmt::format("manifest: unknown key '{}' in {}", k, where));
    }
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

std::string hash_or_empty(const fs::path& p) { return p.empty() ? std::string("-") : hex64(hash_file(p)); }

bool starts_with(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

enum class Family { DirectBias, Midb, Cluster, Recover, SemBias, Gipe, Prediction };

Family family_of(std::string_view metric) {
  if (metric == "DB" || metric == "DB_vt") return Family::DirectBias;
  if (starts_with(metric, "MIDB")) return Family::Midb;
  if (starts_with(metric, "Clus_")) return Family::Cluster;
  if (starts_with(metric, "Rec_")) return Family::Recover;
  if (starts_with(metric, "SB_")) return Family::SemBias;
  if (starts_with(metric, "GIPE_")) return Family::Gipe;
  return Family::Prediction;
}

double suffix_number(std::string_view metric, std::string_view prefix) {
  double v = 0.0;
  if (!parse_double(metric.substr(prefix.size()), v)) throw Error(fmt::format("bad metric parameter in '{}'", metric));
  return v;
}

// Shared, read-only inputs for every cell.
struct Inputs {
  const RunManifest& m;
  std::optional<WordList> target;
  WordList names_f, names_m;
  std::vector<SemBiasTuple> sembias;
  std::string target_hash, f_hash, m_hash, sembias_hash;
};

WordList whole_vocab(const Embedding& emb) { return {"vocab", emb.vocab()}; }

// Words of `list` present in both spaces, as spelled in the list.
WordList common_words(const WordList& list, const Embedding& a, const Embedding& b) {
  WordList out{list.name, {}};
  for (const auto& w : list.words) {
    if (a.contains(w) && b.contains(w)) out.words.push_back(w);
  }
  return out;
}

struct LoadedSpaces {
  const Embedding* emb = nullptr;
  const Embedding* orig = nullptr;
};

double compute_cell(const std::string& metric, const LoadedSpaces& s, const Inputs& in, unsigned inner_workers) {
  const auto& cfg = in.m.config;
  const Embedding& emb = *s.emb;
  const WordList vocab = in.target ? *in.target : whole_vocab(emb);
  switch (family_of(metric)) {
    case Family::DirectBias: {
      const Vector g = gender_direction(emb, cfg.fem, cfg.masc);
      return direct_bias(emb, vocab, g).value;
    }
    case Family::Midb: {
      const int d = metric == "MIDB" ? cfg.d : static_cast<int>(suffix_number(metric, "MIDB_"));
      const auto sub = principal_subspace(pairwise_differences(in.names_f, in.names_m, emb), d, cfg.center);
      return midb_average(emb, vocab, sub).value;
    }
    case Family::Cluster: {
      const bool acc = starts_with(metric, "Clus_acc");
      const auto n = static_cast<std::size_t>(suffix_number(metric, acc ? "Clus_acc" : "Clus_v"));
      if (!s.orig) throw Error("original embedding unavailable");
      const Vector g = gender_direction(*s.orig, cfg.fem, cfg.masc);
      const auto ws = most_biased_words(*s.orig, g, n, common_words(vocab, *s.orig, emb));
      const auto r = clustering_bias(emb, ws, 2, cfg.seed);
      return acc ? r.accuracy : r.v_measure;
    }
    case Family::Recover: {
      const auto cls = parse_classifier(metric == "Rec_LR" ? "lr" : "mlp");
      if (!s.orig) throw Error("original embedding unavailable");
      const Vector g = gender_direction(*s.orig, cfg.fem, cfg.masc);
      const auto ws = most_biased_words(*s.orig, g, cfg.recover_n, common_words(vocab, *s.orig, emb));
      return recoverability(emb, ws, cfg.train_frac, cls, cfg.seed);
    }
    case Family::SemBias: {
      const auto r = sembias(emb, in.sembias, cfg.fem, cfg.masc);
      if (metric == "SB_def") return r.def;
      if (metric == "SB_stereo") return r.stereo;
      return r.other;
    }
    case Family::Gipe: {
      const Vector g = gender_direction(emb, cfg.fem, cfg.masc);
      GipeConfig gc;
      gc.theta = suffix_number(metric, "GIPE_");
      gc.n_neighbors = cfg.gipe_neighbors;
      gc.vocab = vocab;
      return gipe(emb, gc, g, inner_workers).value;
    }
    case Family::Prediction:
      break;
  }
  throw Error("no predictions or value supplied");
}

// Cache key material beyond (metric, embedding content).
std::string cell_params(const std::string& metric, const ManifestEmbedding& e, const Inputs& in,
                        const std::string& orig_hash) {
  const auto& c = in.m.config;
  switch (family_of(metric)) {
    case Family::DirectBias: return fmt::format("{}|{}|{}", c.fem, c.masc, in.target_hash);
    case Family::Midb: return fmt::format("{}|{}|{}|{}|{}", c.d, c.center, in.f_hash, in.m_hash, in.target_hash);
    case Family::Cluster: return fmt::format("{}|{}|{}|{}|{}", orig_hash, c.fem, c.masc, in.target_hash, c.seed);
    case Family::Recover:
      return fmt::format("{}|{}|{}|{}|{}|{}|{}", orig_hash, c.fem, c.masc, in.target_hash, c.recover_n, c.train_frac,
                         c.seed);
    case Family::SemBias: return fmt::format("{}|{}|{}", c.fem, c.masc, in.sembias_hash);
    case Family::Gipe: return fmt::format("{}|{}|{}|{}", c.fem, c.masc, in.target_hash, c.gipe_neighbors);
    case Family::Prediction: {
      auto it = e.predictions.find(metric);
      if (it == e.predictions.end()) return "-";
      return fmt::format("{}|{}|{}|{}", hash_or_empty(it->second.testset), hash_or_empty(it->second.predictions),
                         c.permutations, c.seed);
    }
  }
  return "-";
}

std::string file_id(const std::string& id) {
  std::string out = id;
  for (auto& ch : out) {
    if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_' || ch == '.')) ch = '_';
  }
  return out;
}

struct Cell {
  std::string metric;
  std::string key;
  std::optional<double> value;
  std::string source;  // supplied, cache, computed, failed
  std::string reason;
  json extra;
};

std::optional<json> read_cache(const fs::path& file, const std::string& key) {
  std::ifstream in(file);
  if (!in) return std::nullopt;
  try {
    json j = json::parse(in);
    if (j.value("key", "") != key || !j.contains("value") || !j["value"].is_number()) return std::nullopt;
    return j;
  } catch (const json::exception&) {
    warn(fmt::format("ignoring unreadable cache entry {}", file.string()));
    return std::nullopt;
  }
}

void write_json(const fs::path& file, const json& j) {
  const fs::path tmp = file.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw Error(fmt::format("cannot write {}", tmp.string()));
    out << j.dump(2) << '\n';
  }
  fs::rename(tmp, file);
}

LoadOptions filter_options(const std::optional<WordList>& filter) {
  LoadOptions o;
  if (filter) o.vocab_filter = &*filter;
  return o;
}

}  // namespace

void RunManifest::validate() const {
  if (embeddings.empty()) throw Error("manifest: no embeddings");
  if (metrics.empty()) throw Error("manifest: no metrics");
  std::unordered_set<std::string> ids;
  auto need_file = [](const fs::path& p, std::string_view what) {
    if (!p.empty() && !fs::exists(p)) throw Error(fmt::format("manifest: {} not found: {}", what, p.string()));
  };
  for (const auto& e : embeddings) {
    if (e.id.empty()) throw Error("manifest: embedding with empty id");
    if (!ids.insert(e.id).second) throw Error(fmt::format("manifest: duplicate embedding id '{}'", e.id));
    need_file(e.path, "embedding");
    need_file(e.original, "original embedding");
    for (const auto& [col, src] : e.predictions) {
      need_file(src.testset, "test set");
      need_file(src.predictions, "predictions");
      if (src.testset.empty() || src.predictions.empty()) {
        throw Error(fmt::format("manifest: {} predictions for '{}' need testset and predictions", col, e.id));
      }
    }
  }
  std::set<std::string> seen;
  bool need_names = false, need_sembias = false;
  for (const auto& m : metrics) {
    if (!is_registered_metric(m)) throw Error(fmt::format("manifest: unknown metric '{}'", m));
    if (!seen.insert(m).second) throw Error(fmt::format("manifest: metric '{}' listed twice", m));
    // word sets are only needed when some row actually computes the cell
    const bool computed = std::any_of(embeddings.begin(), embeddings.end(), [&](const auto& e) { return !e.values.count(m); });
    need_names |= computed && family_of(m) == Family::Midb;
    need_sembias |= computed && family_of(m) == Family::SemBias;
  }
  need_file(wordsets.target_vocab, "target vocabulary");
  need_file(wordsets.subspace_f, "female subspace names");
  need_file(wordsets.subspace_m, "male subspace names");
  need_file(wordsets.sembias, "SemBias file");
  if (need_names && (wordsets.subspace_f.empty() || wordsets.subspace_m.empty())) {
    throw Error("manifest: MIDB needs wordsets.subspace_f and wordsets.subspace_m");
  }
  if (need_sembias && wordsets.sembias.empty()) throw Error("manifest: SemBias metrics need wordsets.sembias");
  if (config.d < 1) throw Error("manifest: config.d must be >= 1");
  if (!(config.train_frac > 0.0 && config.train_frac < 1.0)) throw Error("manifest: config.train_frac must be in (0,1)");
  if (config.gipe_neighbors < 1) throw Error("manifest: config.gipe_neighbors must be >= 1");
  if (config.recover_n < 1) throw Error("manifest: config.recover_n must be >= 1");
  if (output_dir.empty()) throw Error("manifest: output_dir is required");
  if (workers < 1) throw Error("manifest: workers must be >= 1");
}

RunManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(fmt::format("cannot open manifest {}", path.string()));
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(fmt::format("manifest {}: {}", path.string(), e.what()));
  }
  const fs::path base = fs::absolute(path).parent_path();
  RunManifest m;
  try {
    check_keys(j, {"embeddings", "metrics", "config", "wordsets", "output_dir", "cache_dir", "workers"}, "manifest");
    m.output_dir = resolve(base, j.value("output_dir", std::string("embias_out")));
    m.cache_dir = j.contains("cache_dir") ? resolve(base, j["cache_dir"].get<std::string>()) : m.output_dir / "cache";
    m.workers = j.value("workers", 1u);
    m.metrics = j.at("metrics").get<std::vector<std::string>>();
    if (j.contains("config")) {
      const auto& c = j["config"];
      check_keys(c, {"d", "center", "fem", "masc", "gipe_neighbors", "recover_n", "train_frac", "seed", "permutations"},
                 "config");
      m.config.d = c.value("d", m.config.d);
      m.config.center = c.value("center", m.config.center);
      m.config.fem = c.value("fem", m.config.fem);
      m.config.masc = c.value("masc", m.config.masc);
      m.config.gipe_neighbors = c.value("gipe_neighbors", m.config.gipe_neighbors);
      m.config.recover_n = c.value("recover_n", m.config.recover_n);
      m.config.train_frac = c.value("train_frac", m.config.train_frac);
      m.config.seed = c.value("seed", m.config.seed);
      m.config.permutations = c.value("permutations", m.config.permutations);
    }
    if (j.contains("wordsets")) {
      const auto& w = j["wordsets"];
      check_keys(w, {"target_vocab", "subspace_f", "subspace_m", "sembias"}, "wordsets");
      m.wordsets.target_vocab = resolve(base, w.value("target_vocab", std::string()));
      m.wordsets.subspace_f = resolve(base, w.value("subspace_f", std::string()));
      m.wordsets.subspace_m = resolve(base, w.value("subspace_m", std::string()));
      m.wordsets.sembias = resolve(base, w.value("sembias", std::string()));
    }
    for (const auto& e : j.at("embeddings")) {
      check_keys(e, {"id", "path", "original", "notes", "values", "predictions"}, "embedding entry");
      ManifestEmbedding me;
      me.id = e.at("id").get<std::string>();
      me.path = resolve(base, e.value("path", std::string()));
      me.original = resolve(base, e.value("original", std::string()));
      me.notes = e.value("notes", std::string());
      if (e.contains("values")) {
        for (const auto& [k, v] : e["values"].items()) {
          if (!v.is_null()) me.values[k] = v.get<double>();
        }
      }
      if (e.contains("predictions")) {
        for (const auto& [k, v] : e["predictions"].items()) {
          check_keys(v, {"testset", "predictions"}, "predictions entry");
          me.predictions[k] = {resolve(base, v.value("testset", std::string())),
                               resolve(base, v.value("predictions", std::string()))};
        }
      }
      m.embeddings.push_back(std::move(me));
    }
  } catch (const json::exception& e) {
    throw Error(fmt::format("manifest {}: {}", path.string(), e.what()));
  }
  m.validate();
  return m;
}

RunResult run_manifest(const RunManifest& manifest) {
  manifest.validate();
  fs::create_directories(manifest.output_dir);
  fs::create_directories(manifest.cache_dir);

  Inputs in{manifest, std::nullopt, {}, {}, {}, "-", "-", "-", "-"};
  const auto& ws = manifest.wordsets;
  if (!ws.target_vocab.empty()) {
    in.target = load_wordlist(ws.target_vocab);
    in.target_hash = hex64(hash_file(ws.target_vocab));
  }
  if (!ws.subspace_f.empty()) {
    in.names_f = load_wordlist(ws.subspace_f);
    in.f_hash = hex64(hash_file(ws.subspace_f));
  }
  if (!ws.subspace_m.empty()) {
    in.names_m = load_wordlist(ws.subspace_m);
    in.m_hash = hex64(hash_file(ws.subspace_m));
  }
  if (!ws.sembias.empty()) {
    in.sembias = load_sembias(ws.sembias);
    in.sembias_hash = hex64(hash_file(ws.sembias));
  }

  // With a target vocabulary only the words some metric can touch are parsed.
  std::optional<WordList> filter;
  if (in.target) {
    std::vector<std::string> words;
    std::unordered_set<std::string> seen;
    auto add = [&](const std::string& w) {
      for (const auto& form : {w, to_lower(w)}) {
        if (seen.insert(form).second) words.push_back(form);
      }
    };
    for (const auto& w : in.target->words) add(w);
    for (const auto& w : in.names_f.words) add(w);
    for (const auto& w : in.names_m.words) add(w);
    for (const auto& t : in.sembias) {
      for (const auto& [a, b] : t.pairs) {
        add(a);
        add(b);
      }
    }
    add(manifest.config.fem);
    add(manifest.config.masc);
    filter = WordList{"filter", std::move(words)};
  }

  RunResult result;
  result.table = MetricsTable(manifest.metrics);
  const unsigned pool_size = manifest.workers;
  const unsigned inner_workers = pool_size > 1 ? 1 : 0;

  for (const auto& e : manifest.embeddings) {
    result.table.add_row(e.id, std::vector<std::optional<double>>(manifest.metrics.size()));
    std::string emb_hash = "-", orig_hash = "-";
    if (!e.path.empty()) emb_hash = hex64(hash_file(e.path));
    const fs::path orig_path = e.original.empty() ? e.path : e.original;
    if (!orig_path.empty()) orig_hash = orig_path == e.path ? emb_hash : hex64(hash_file(orig_path));

    std::vector<Cell> cells;
    std::vector<std::size_t> pending;
    for (const auto& metric : manifest.metrics) {
      Cell c;
      c.metric = metric;
      if (auto v = e.values.find(metric); v != e.values.end()) {
        c.value = v->second;
        c.source = "supplied";
        cells.push_back(std::move(c));
        continue;
      }
      const bool from_predictions = family_of(metric) == Family::Prediction;
      if (from_predictions && !e.predictions.count(metric)) {
        c.source = "failed";
        c.reason = "no predictions or value supplied";
      } else if (!from_predictions && e.path.empty()) {
        c.source = "failed";
        c.reason = "no embedding path and no value supplied";
      } else {
        c.key = hex64(fnv1a(fmt::format("{}|{}|{}", metric, from_predictions ? "-" : emb_hash,
                                        cell_params(metric, e, in, orig_hash))));
        if (auto hit = read_cache(manifest.cache_dir / (c.key + ".json"), c.key)) {
          c.value = (*hit)["value"].get<double>();
          c.extra = hit->value("extra", json());
          c.source = "cache";
        } else {
          pending.push_back(cells.size());
        }
      }
      cells.push_back(std::move(c));
    }

    std::optional<Embedding> emb, orig;
    std::string load_error;
    const bool need_emb = std::any_of(pending.begin(), pending.end(),
                                      [&](auto i) { return family_of(cells[i].metric) != Family::Prediction; });
    const bool need_orig = std::any_of(pending.begin(), pending.end(), [&](auto i) {
      const auto f = family_of(cells[i].metric);
      return f == Family::Cluster || f == Family::Recover;
    });
    if (need_emb) {
      try {
        emb = load_embeddings(e.path, filter_options(filter));
        if (need_orig && orig_path != e.path) orig = load_embeddings(orig_path, filter_options(filter));
      } catch (const std::exception& ex) {
        load_error = ex.what();
      }
    }
    LoadedSpaces spaces;
    if (emb) {
      spaces.emb = &*emb;
      spaces.orig = orig ? &*orig : &*emb;
    }

    std::atomic<std::size_t> next{0};
    std::mutex collect;
    auto work = [&]() {
      while (true) {
        const std::size_t k = next.fetch_add(1);
        if (k >= pending.size()) return;
        Cell& c = cells[pending[k]];
        std::optional<double> value;
        json extra;
        std::string reason;
        try {
          if (family_of(c.metric) == Family::Prediction) {
            const auto& src = e.predictions.at(c.metric);
            const auto set = load_testset(src.testset);
            const PredictionSet preds(set, load_predictions(src.predictions));
            value = marked_attribute_error(preds);
            EvaluationOptions opts;
            opts.permutations = manifest.config.permutations;
            opts.seed = manifest.config.seed;
            opts.workers = inner_workers;
            extra = json::parse(evaluation_report(preds, opts));
          } else if (!spaces.emb) {
            throw Error(load_error.empty() ? "embedding not loaded" : load_error);
          } else {
            value = compute_cell(c.metric, spaces, in, inner_workers);
          }
          if (!std::isfinite(*value)) throw Error("non-finite result");
        } catch (const std::exception& ex) {
          value.reset();
          reason = ex.what();
        }
        std::lock_guard lock(collect);
        if (value) {
          c.value = value;
          c.extra = std::move(extra);
          c.source = "computed";
        } else {
          c.source = "failed";
          c.reason = std::move(reason);
        }
      }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < std::min<std::size_t>(pool_size, pending.size()); ++t) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();

    json per;
    per["id"] = e.id;
    per["path"] = e.path.string();
    per["notes"] = e.notes;
    per["content_hash"] = emb_hash;
    json cells_json = json::object();
    for (const auto& c : cells) {
      result.table.set(e.id, c.metric, c.value);
      if (c.source == "supplied") ++result.supplied;
      if (c.source == "cache") ++result.cache_hits;
      if (c.source == "computed") {
        ++result.computed;
        json entry{{"key", c.key}, {"metric", c.metric}, {"embedding", e.id}, {"value", *c.value}};
        if (!c.extra.is_null()) entry["extra"] = c.extra;
        write_json(manifest.cache_dir / (c.key + ".json"), entry);
      }
      if (c.source == "failed") result.failures.push_back({e.id, c.metric, c.reason});
      json cj{{"value", c.value ? json(*c.value) : json(nullptr)}, {"source", c.source}};
      if (!c.reason.empty()) cj["reason"] = c.reason;
      if (!c.extra.is_null()) cj["evaluation"] = c.extra;
      cells_json[c.metric] = cj;
    }
    per["cells"] = cells_json;
    write_json(manifest.output_dir / (file_id(e.id) + ".json"), per);
  }

  result.correlation = pearson_matrix(result.table);
  save_metrics_table(result.table, manifest.output_dir / "metrics.tsv");
  save_correlation_matrix(result.correlation, manifest.output_dir / "correlation.tsv");
  std::ofstream md(manifest.output_dir / "report.md");
  md << format_report(result);
  return result;
}

std::string format_report(const RunResult& result) {
  std::ostringstream out;
  const auto& cols = result.table.columns();
  out << "# Metrics\n\n| embedding |";
  for (const auto& c : cols) out << ' ' << c << " |";
  out << "\n|---|";
  for (std::size_t i = 0; i < cols.size(); ++i) out << "---:|";
  out << '\n';
  for (const auto& id : result.table.row_ids()) {
    out << "| " << id << " |";
    for (const auto& c : cols) {
      const auto v = result.table.get(id, c);
      out << ' ' << (v ? fmt::format("{:.4f}", *v) : std::string("NA")) << " |";
    }
    out << '\n';
  }

  const auto& m = result.correlation;
  out << "\n# Pearson correlation\n\n|   |";
  for (const auto& c : m.columns) out << ' ' << c << " |";
  out << "\n|---|";
  for (std::size_t i = 0; i < m.columns.size(); ++i) out << "---:|";
  out << '\n';
  for (std::size_t i = 0; i < m.columns.size(); ++i) {
    out << "| " << m.columns[i] << " |";
    for (std::size_t j = 0; j < m.columns.size(); ++j) {
      const double v = m.r(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      out << ' ' << (j < i ? std::string() : std::isnan(v) ? std::string("NA") : fmt::format("{:.3f}", v)) << " |";
    }
    out << '\n';
  }
  if (!m.flags.empty()) {
    out << '\n';
    for (const auto& f : m.flags) out << "- " << f << '\n';
  }

  out << fmt::format("\n{} computed, {} cached, {} supplied, {} failed\n", result.computed, result.cache_hits,
                     result.supplied, result.failures.size());
  if (!result.failures.empty()) {
    out << "\n# Failed cells\n\n";
    for (const auto& f : result.failures) out << "- " << f.embedding << " / " << f.metric << ": " << f.reason << '\n';
  }
  return out.str();
}

}  // namespace embias
