#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "embias/mab_testgen.hpp"

namespace embias {

/// (N, E, C) probabilities.
using Probs = std::array<double, 3>;

struct PredictionRecord {
  std::string id;
  Probs probs{};
};

struct PredictionLoadStats {
  std::size_t records = 0;
  std::size_t renormalized = 0;
  double max_deviation = 0.0;
};

/// `id N E C` per line (tabs or spaces); an optional header whose first
/// field is `id` and `#` comments are skipped. Rows are renormalised to sum
/// to one; a row more than 0.01 off the simplex is an error.
std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path,
                                               PredictionLoadStats* stats = nullptr);

/// Predictions joined 1:1 to test-set pairs.
class PredictionSet {
 public:
  struct Entry {
    const SentencePair* pair;
    Probs probs;
  };

  PredictionSet(const TestSet& set, const std::vector<PredictionRecord>& records);

  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t missing() const { return missing_; }
  std::size_t extra() const { return extra_; }

 private:
  std::vector<Entry> entries_;
  std::size_t missing_ = 0;
  std::size_t extra_ = 0;
};

using Selector = std::function<bool(const SentencePair&)>;

Selector select_group(Group g);
Selector select_category(std::string category);
Selector select_word(std::string word);
Selector select_all(std::vector<Selector> parts);

/// Mean Euclidean distance of each record from (1, 0, 0).
double marked_attribute_error(const PredictionSet& preds, const Selector& filter = {});

/// Distance between the mean probability vectors of the two groups.
double group_distance(const PredictionSet& preds, const Selector& a, const Selector& b);

/// ||sum_a - sum_b|| / (2 (|a| + |b|)), the unnormalised form kept for audit.
double group_distance_literal(const PredictionSet& preds, const Selector& a, const Selector& b);

double distance(const Probs& a, const Probs& b);

enum class GroupBy { Group, AttributeWord, WordCategory };

struct GroupMean {
  Probs mean{};
  std::size_t count = 0;
};

std::map<std::string, GroupMean> group_means(const PredictionSet& preds, GroupBy by);

struct PermutationResult {
  double distance = 0.0;
  double significance = 0.0;
  std::size_t exceed = 0;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
};

/// Word-level permutation test. Each sample re-partitions the attribute
/// words into groups of the original sizes; significance is the fraction of
/// samples whose distance strictly exceeds the observed one. Identical for
/// any worker count.
PermutationResult permutation_test(const PredictionSet& preds, const std::vector<std::pair<std::string, Group>>& partition,
                                   std::size_t n_samples, std::uint64_t seed, unsigned workers = 0);

/// The partition implied by the test set's own group labels.
std::vector<std::pair<std::string, Group>> attribute_partition(const PredictionSet& preds);

struct EvaluationOptions {
  std::size_t permutations = 10000;
  std::uint64_t seed = kDefaultSeed;
  bool literal_eq2 = false;
  unsigned workers = 0;
};

/// Full report as JSON text: error, distances, group and per-category means,
/// per-word means, significance.
std::string evaluation_report(const PredictionSet& preds, const EvaluationOptions& options);

}  // namespace embias
