#include "embias/embedding_store.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <unordered_set>

#include <fmt/format.h>

namespace embias {

namespace {

// Splits on runs of spaces/tabs without allocating.
template <typename F>
std::size_t for_each_token(std::string_view line, F&& f) {
  std::size_t n = 0;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    if (i >= line.size()) break;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    f(n, line.substr(i, j - i));
    ++n;
    i = j;
  }
  return n;
}

bool is_word2vec_header(std::string_view line) {
  std::size_t count = 0;
  bool numeric = true;
  for_each_token(line, [&](std::size_t, std::string_view tok) {
    ++count;
    for (char c : tok) {
      if (!std::isdigit(static_cast<unsigned char>(c))) numeric = false;
    }
  });
  return count == 2 && numeric;
}

}  // namespace

WordList load_wordlist(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(fmt::format("cannot open word list {}", path.string()));
  WordList list;
  list.name = path.stem().string();
  std::unordered_set<std::string> seen;
  std::size_t dups = 0;
  std::string line;
  while (std::getline(in, line)) {
    auto word = trim(line);
    if (word.empty() || word.front() == '#') continue;
    if (!seen.emplace(word).second) {
      ++dups;
      continue;
    }
    list.words.emplace_back(word);
  }
  if (dups > 0) warn(fmt::format("{}: dropped {} duplicate words", path.string(), dups));
  return list;
}

void save_wordlist(const WordList& list, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(fmt::format("cannot write {}", path.string()));
  for (const auto& w : list.words) out << w << '\n';
  if (!out) throw Error(fmt::format("write failed: {}", path.string()));
}

Embedding::Embedding(std::vector<std::string> vocab, Matrix matrix)
    : vocab_(std::move(vocab)), matrix_(std::move(matrix)) {
  if (static_cast<Eigen::Index>(vocab_.size()) != matrix_.rows()) {
    throw Error(fmt::format("embedding has {} words but {} rows", vocab_.size(), matrix_.rows()));
  }
  if (!matrix_.allFinite()) throw Error("embedding contains non-finite components");
  index_.reserve(vocab_.size());
  for (std::size_t i = 0; i < vocab_.size(); ++i) {
    if (!index_.emplace(vocab_[i], i).second) {
      throw Error(fmt::format("duplicate word '{}' in embedding", vocab_[i]));
    }
  }
}

std::optional<std::size_t> Embedding::index_of(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it != index_.end()) return it->second;
  it = index_.find(to_lower(word));
  if (it != index_.end()) return it->second;
  return std::nullopt;
}

Vector Embedding::vector(std::string_view word) const {
  auto idx = index_of(word);
  if (!idx) throw NotFoundError(fmt::format("word '{}' not in embedding", word));
  return matrix_.row(static_cast<Eigen::Index>(*idx)).transpose();
}

Matrix Embedding::normalized_matrix() const {
  Matrix out = matrix_;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double n = out.row(i).norm();
    if (n > 0.0) out.row(i) /= n;
  }
  return out;
}

Embedding load_embeddings(const std::filesystem::path& path, const LoadOptions& options,
                          LoadStats* stats) {
  std::ifstream in(path);
  if (!in) throw Error(fmt::format("cannot open embedding file {}", path.string()));
  const std::string source = path.string();

  std::unordered_set<std::string> keep;
  if (options.vocab_filter) keep.insert(options.vocab_filter->words.begin(), options.vocab_filter->words.end());

  std::vector<std::string> vocab;
  std::vector<double> values;
  std::unordered_set<std::string> seen;
  LoadStats local;
  std::size_t dim = 0;
  std::size_t lineno = 0;
  std::size_t data_lines = 0;
  std::string line;

  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string_view view(line);
    if (trim(view).empty()) continue;
    if (data_lines == 0 && !local.had_header && is_word2vec_header(view)) {
      local.had_header = true;
      continue;
    }
    ++data_lines;

    std::string_view word;
    const std::size_t ntok = for_each_token(view, [&](std::size_t k, std::string_view tok) {
      if (k == 0) word = tok;
    });
    if (ntok < 2) throw ParseError(source, lineno, "expected a word followed by numbers");
    if (dim == 0) {
      dim = ntok - 1;
    } else if (ntok - 1 != dim) {
      throw ParseError(source, lineno, fmt::format("expected {} components, found {}", dim, ntok - 1));
    }

    const std::string w(word);
    if (options.vocab_filter && !keep.count(w)) continue;
    if (!seen.insert(w).second) {
      ++local.duplicates;
      continue;
    }
    const std::size_t base = values.size();
    values.resize(base + dim);
    bool ok = true;
    std::string_view bad;
    for_each_token(view, [&](std::size_t k, std::string_view tok) {
      if (k == 0 || !ok) return;
      if (!parse_double(tok, values[base + k - 1])) {
        ok = false;
        bad = tok;
      }
    });
    if (!ok) throw ParseError(source, lineno, fmt::format("non-numeric token '{}'", bad));
    vocab.push_back(w);
  }
  local.lines = data_lines;
  if (data_lines == 0 && !options.allow_empty) throw ParseError(source, 0, "empty embedding file");
  if (local.duplicates > 0) warn(fmt::format("{}: {} duplicate words ignored (first kept)", source, local.duplicates));
  if (stats) *stats = local;

  Matrix m(static_cast<Eigen::Index>(vocab.size()), static_cast<Eigen::Index>(dim));
  if (!values.empty()) std::copy(values.begin(), values.end(), m.data());
  return Embedding(std::move(vocab), std::move(m));
}

void save_embeddings(const Embedding& emb, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(fmt::format("cannot write {}", path.string()));
  fmt::memory_buffer buf;
  for (std::size_t i = 0; i < emb.size(); ++i) {
    buf.clear();
    fmt::format_to(std::back_inserter(buf), "{}", emb.word(i));
    auto row = emb.row(i);
    for (Eigen::Index j = 0; j < row.size(); ++j) fmt::format_to(std::back_inserter(buf), " {:.9g}", row(j));
    buf.push_back('\n');
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  }
  if (!out) throw Error(fmt::format("write failed: {}", path.string()));
}

bool is_punct_or_numeric(std::string_view token) {
  bool has_alpha = false;
  for (unsigned char c : token) {
    if (std::isdigit(c)) return true;
    // Non-ASCII bytes belong to letters in UTF-8 words.
    if (std::isalpha(c) || c >= 0x80) has_alpha = true;
  }
  return !has_alpha;
}

WordList build_target_vocab(const Embedding& emb_a, const Embedding& emb_b, const WordList& gendered,
                            std::size_t top_k) {
  std::size_t k_a = top_k, k_b = top_k;
  if (top_k > emb_a.size() || top_k > emb_b.size()) {
    warn(fmt::format("top_k={} exceeds a vocabulary size ({}, {}); clamping", top_k, emb_a.size(), emb_b.size()));
    k_a = std::min(top_k, emb_a.size());
    k_b = std::min(top_k, emb_b.size());
  }
  std::unordered_set<std::string> prefix_b(emb_b.vocab().begin(), emb_b.vocab().begin() + static_cast<long>(k_b));
  std::unordered_set<std::string> excluded(gendered.words.begin(), gendered.words.end());

  WordList out;
  out.name = "target_vocab";
  for (std::size_t i = 0; i < k_a; ++i) {
    const auto& w = emb_a.word(i);
    if (!prefix_b.count(w) || excluded.count(w) || is_punct_or_numeric(w)) continue;
    out.words.push_back(w);
  }
  return out;
}

std::vector<std::size_t> present_indices(const Embedding& emb, const WordList& list, std::size_t* missing) {
  std::vector<std::size_t> idx;
  idx.reserve(list.size());
  std::size_t miss = 0;
  for (const auto& w : list.words) {
    if (auto i = emb.index_of(w)) {
      idx.push_back(*i);
    } else {
      ++miss;
    }
  }
  if (missing) *missing = miss;
  return idx;
}

}  // namespace embias
