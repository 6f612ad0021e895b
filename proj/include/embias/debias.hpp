#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "embias/embedding_store.hpp"
#include "embias/gender_subspace.hpp"

namespace embias {

enum class DebiasMethod { Misp, Mhd, MispPermuted, Neutralize };

DebiasMethod parse_debias_method(std::string_view name);
std::string_view to_string(DebiasMethod m);

/// 1-based permutation. Position i names the weight applied to basis
/// vector g_i, so {1,2,4,3} applies a_4 to g_3 and a_3 to g_4.
using Permutation = std::vector<int>;

Permutation parse_permutation(std::string_view digits);
std::string format_permutation(const Permutation& p);

struct DebiasSpec {
  DebiasMethod method = DebiasMethod::Misp;
  std::optional<Permutation> permutation;
  std::optional<WordList> exclude;

  /// Throws unless the permutation is a valid ordering of 1..d and only
  /// present for MispPermuted.
  void validate(int d) const;
};

/// Per-basis-vector weights for a DebiasSpec: a_i, all ones, or a_{pi(i)}.
std::vector<double> effective_weights(const GenderSubspace& sub, const DebiasSpec& spec);

/// w - sum_i a'_i <g_i, w> g_i for every non-excluded word. Returns a new
/// embedding; vocabulary and order are unchanged.
Embedding misp(const Embedding& emb, const GenderSubspace& sub, const DebiasSpec& spec);

/// w - <g, w> g for each target word; all other rows are copied.
Embedding neutralize(const Embedding& emb, const Eigen::Ref<const Vector>& g, const WordList& targets);

/// All d! orderings of 1..d in lexicographic order (identity first).
/// d > 8 is rejected.
std::vector<Permutation> enumerate_permutations(int d);

}  // namespace embias
