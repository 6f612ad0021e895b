#pragma once

#include <filesystem>
#include <string_view>
#include <vector>

#include "embias/common.hpp"
#include "embias/embedding_store.hpp"

namespace embias {

/// All pairwise differences f_j - m_k, j outer, k inner.
struct DifferenceMatrix {
  Matrix rows;
  std::size_t n_female = 0;
  std::size_t n_male = 0;
  std::size_t dropped_female = 0;
  std::size_t dropped_male = 0;
};

/// Orthonormal basis of the gender subspace with per-direction weights.
///
/// `basis` holds one basis vector per row, ordered by explained variance.
/// `weights[i]` is the proportion of total variance explained by row i, so
/// weights are non-increasing and sum to at most one.
struct GenderSubspace {
  Matrix basis;
  std::vector<double> weights;
  double total_variance = 0.0;

  int dim() const { return static_cast<int>(basis.rows()); }
  Eigen::Index embedding_dim() const { return basis.cols(); }
};

inline constexpr int kDefaultSubspaceDim = 4;

DifferenceMatrix pairwise_differences(const WordList& f_names, const WordList& m_names, const Embedding& emb);

/// Top-d principal directions of the (optionally mean-centred) difference
/// rows. Each direction is signed so that its inner product with the mean
/// difference vector is non-negative.
GenderSubspace principal_subspace(const DifferenceMatrix& diffs, int d, bool center = true);

/// Unit vector along emb[fem] - emb[masc]. Throws DegenerateDirectionError
/// when the difference norm is below 1e-10.
Vector gender_direction(const Embedding& emb, std::string_view fem, std::string_view masc);

/// Signed weighted projection sum_i a_i <g_i, w>.
double midb_word(const Eigen::Ref<const Vector>& w, const GenderSubspace& sub);

struct AverageResult {
  double value = 0.0;
  std::size_t covered = 0;
  std::size_t missing = 0;
  std::size_t skipped = 0;  // zero-norm words (direct bias only)
};

AverageResult midb_average(const Embedding& emb, const WordList& vocab, const GenderSubspace& sub);

/// Mean |cos(w, g)| over vocab words present in emb.
AverageResult direct_bias(const Embedding& emb, const WordList& vocab, const Eigen::Ref<const Vector>& g);

void save_subspace(const GenderSubspace& sub, const std::filesystem::path& path);
GenderSubspace load_subspace(const std::filesystem::path& path);

}  // namespace embias
