#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "embias/gender_subspace.hpp"
#include "embias/intrinsic_metrics.hpp"

namespace embias {

struct PredictionSource {
  std::filesystem::path testset;
  std::filesystem::path predictions;
};

struct ManifestEmbedding {
  std::string id;
  /// Empty when the row only carries precomputed values.
  std::filesystem::path path;
  /// Space the biased word sets are drawn from; defaults to `path`.
  std::filesystem::path original;
  std::string notes;
  /// Precomputed cells; they take precedence over computation.
  std::map<std::string, double> values;
  /// Marked-attribute error columns (E, E_names, ...) from prediction files.
  std::map<std::string, PredictionSource> predictions;
};

struct ManifestConfig {
  int d = kDefaultSubspaceDim;
  bool center = true;
  std::string fem = "she";
  std::string masc = "he";
  std::size_t gipe_neighbors = 100;
  std::size_t recover_n = 2500;
  double train_frac = 0.2;
  std::uint64_t seed = kDefaultSeed;
  std::size_t permutations = 10000;
};

struct ManifestWordSets {
  std::filesystem::path target_vocab;  // optional; whole vocabulary if empty
  std::filesystem::path subspace_f;
  std::filesystem::path subspace_m;
  std::filesystem::path sembias;
};

struct RunManifest {
  std::vector<ManifestEmbedding> embeddings;
  std::vector<std::string> metrics;
  ManifestConfig config;
  ManifestWordSets wordsets;
  std::filesystem::path output_dir;
  std::filesystem::path cache_dir;  // defaults to output_dir/cache
  unsigned workers = 1;

  /// Ids unique, metrics registered, referenced files exist, and every
  /// computed metric has the word sets it needs.
  void validate() const;
};

/// JSON manifest; relative paths resolve against the manifest's directory.
RunManifest load_manifest(const std::filesystem::path& path);

struct CellFailure {
  std::string embedding;
  std::string metric;
  std::string reason;
};

struct RunResult {
  MetricsTable table;
  CorrelationMatrix correlation;
  std::vector<CellFailure> failures;
  std::size_t computed = 0;
  std::size_t cache_hits = 0;
  std::size_t supplied = 0;
};

/// Runs every (embedding, metric) cell, reusing cached cells, and writes
/// metrics.tsv, correlation.tsv, report.md and one JSON file per embedding
/// into output_dir. A failing cell becomes NA and the run continues.
RunResult run_manifest(const RunManifest& manifest);

/// Markdown rendering of the table and correlation matrix.
std::string format_report(const RunResult& result);

}  // namespace embias
