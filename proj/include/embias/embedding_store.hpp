#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "embias/common.hpp"

namespace embias {

/// Ordered, duplicate-free list of words with a name for reporting.
struct WordList {
  std::string name;
  std::vector<std::string> words;

  std::size_t size() const { return words.size(); }
  bool empty() const { return words.empty(); }
};

/// Reads one word per line; `#` lines and blank lines are skipped and
/// duplicates are dropped with a warning.
WordList load_wordlist(const std::filesystem::path& path);
void save_wordlist(const WordList& list, const std::filesystem::path& path);

/// Immutable vocabulary-indexed matrix of word vectors.
///
/// Lookups are exact-match first, then fall back to the lowercased word.
class Embedding {
 public:
  Embedding() = default;
  /// Throws if the vocabulary has duplicates, the row count disagrees with
  /// the vocabulary, or any component is non-finite.
  Embedding(std::vector<std::string> vocab, Matrix matrix);

  std::size_t size() const { return vocab_.size(); }
  Eigen::Index dim() const { return matrix_.cols(); }
  bool empty() const { return vocab_.empty(); }

  const std::vector<std::string>& vocab() const { return vocab_; }
  const Matrix& matrix() const { return matrix_; }
  const std::string& word(std::size_t i) const { return vocab_[i]; }

  std::optional<std::size_t> index_of(std::string_view word) const;
  bool contains(std::string_view word) const { return index_of(word).has_value(); }

  auto row(std::size_t i) const { return matrix_.row(static_cast<Eigen::Index>(i)); }
  /// Copy of the vector for `word`; throws NotFoundError on a miss.
  Vector vector(std::string_view word) const;

  /// Rows scaled to unit norm; zero rows stay zero.
  Matrix normalized_matrix() const;

 private:
  std::vector<std::string> vocab_;
  Matrix matrix_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct LoadStats {
  std::size_t lines = 0;
  std::size_t duplicates = 0;
  bool had_header = false;
};

struct LoadOptions {
  /// Keep only these words (file order preserved). Other lines are still
  /// checked for token count but their numbers are not parsed.
  const WordList* vocab_filter = nullptr;
  /// An empty file is an error unless this is set (save of an empty
  /// embedding produces one).
  bool allow_empty = false;
};

/// Loads whitespace-separated text embeddings (`word c1 ... cD` per line).
/// A leading word2vec-style `<count> <dim>` header line is accepted.
/// Duplicate words keep the first occurrence.
Embedding load_embeddings(const std::filesystem::path& path, const LoadOptions& options = {},
                          LoadStats* stats = nullptr);

/// Writes with 9 significant digits per component.
void save_embeddings(const Embedding& emb, const std::filesystem::path& path);

/// True for tokens that contain a digit or contain no alphabetic character.
bool is_punct_or_numeric(std::string_view token);

/// Intersection of the top_k prefixes of both vocabularies, minus
/// punctuation/numeric tokens and `gendered`, in emb_a order.
WordList build_target_vocab(const Embedding& emb_a, const Embedding& emb_b,
                            const WordList& gendered, std::size_t top_k);

/// Words of `list` present in `emb` (with the lowercase fallback).
/// `missing` receives the count of dropped words when non-null.
std::vector<std::size_t> present_indices(const Embedding& emb, const WordList& list,
                                         std::size_t* missing = nullptr);

}  // namespace embias
