#include "embias/debias.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <unordered_set>

#include <fmt/format.h>

namespace embias {

namespace {

// Removes weights[i] * <basis_i, row> * basis_i from each selected row.
void project_rows(Matrix& m, const Matrix& basis, const std::vector<double>& weights,
                  const std::vector<bool>& selected) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    if (!selected[static_cast<std::size_t>(r)]) continue;
    const Eigen::RowVectorXd w = m.row(r);
    Eigen::RowVectorXd delta = Eigen::RowVectorXd::Zero(m.cols());
    for (Eigen::Index i = 0; i < basis.rows(); ++i) {
      delta += (weights[static_cast<std::size_t>(i)] * basis.row(i).dot(w)) * basis.row(i);
    }
    m.row(r) = w - delta;
  }
}

}  // namespace

DebiasMethod parse_debias_method(std::string_view name) {
  if (name == "misp") return DebiasMethod::Misp;
  if (name == "mhd") return DebiasMethod::Mhd;
  if (name == "misp_permuted") return DebiasMethod::MispPermuted;
  if (name == "neutralize") return DebiasMethod::Neutralize;
  throw Error(fmt::format("unknown debias method '{}'", name));
}

std::string_view to_string(DebiasMethod m) {
  switch (m) {
    case DebiasMethod::Misp: return "misp";
    case DebiasMethod::Mhd: return "mhd";
    case DebiasMethod::MispPermuted: return "misp_permuted";
    case DebiasMethod::Neutralize: return "neutralize";
  }
  return "?";
}

Permutation parse_permutation(std::string_view digits) {
  Permutation p;
  for (char c : digits) {
    if (!std::isdigit(static_cast<unsigned char>(c)) || c == '0') {
      throw Error(fmt::format("invalid permutation '{}': digits 1-9 expected", digits));
    }
    p.push_back(c - '0');
  }
  return p;
}

std::string format_permutation(const Permutation& p) {
  std::string s;
  for (int v : p) s += static_cast<char>('0' + v);
  return s;
}

void DebiasSpec::validate(int d) const {
  if (permutation && method != DebiasMethod::MispPermuted) {
    throw Error("a permutation is only valid with method misp_permuted");
  }
  if (method == DebiasMethod::MispPermuted) {
    if (!permutation) throw Error("misp_permuted requires a permutation");
    if (static_cast<int>(permutation->size()) != d) {
      throw Error(fmt::format("permutation '{}' has length {}, subspace has d={}",
                              format_permutation(*permutation), permutation->size(), d));
    }
    std::vector<int> sorted = *permutation;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < d; ++i) {
      if (sorted[static_cast<std::size_t>(i)] != i + 1) {
        throw Error(fmt::format("'{}' is not a permutation of 1..{}", format_permutation(*permutation), d));
      }
    }
  }
}

std::vector<double> effective_weights(const GenderSubspace& sub, const DebiasSpec& spec) {
  spec.validate(sub.dim());
  switch (spec.method) {
    case DebiasMethod::Misp:
      return sub.weights;
    case DebiasMethod::Mhd:
    case DebiasMethod::Neutralize:
      return std::vector<double>(sub.weights.size(), 1.0);
    case DebiasMethod::MispPermuted: {
      std::vector<double> w(sub.weights.size());
      for (std::size_t i = 0; i < w.size(); ++i) {
        w[i] = sub.weights[static_cast<std::size_t>((*spec.permutation)[i] - 1)];
      }
      return w;
    }
  }
  return sub.weights;
}

Embedding misp(const Embedding& emb, const GenderSubspace& sub, const DebiasSpec& spec) {
  if (emb.dim() != sub.embedding_dim()) {
    throw Error(fmt::format("misp: embedding dim {} vs subspace dim {}", emb.dim(), sub.embedding_dim()));
  }
  const auto weights = effective_weights(sub, spec);
  std::vector<bool> selected(emb.size(), true);
  if (spec.exclude) {
    for (auto i : present_indices(emb, *spec.exclude)) selected[i] = false;
  }
  Matrix m = emb.matrix();
  project_rows(m, sub.basis, weights, selected);
  return Embedding(emb.vocab(), std::move(m));
}

Embedding neutralize(const Embedding& emb, const Eigen::Ref<const Vector>& g, const WordList& targets) {
  if (g.size() != emb.dim()) throw Error("neutralize: dimension mismatch");
  if (std::abs(g.norm() - 1.0) > 1e-6) throw Error("neutralize: direction must be unit norm");
  std::size_t missing = 0;
  std::vector<bool> selected(emb.size(), false);
  for (auto i : present_indices(emb, targets, &missing)) selected[i] = true;
  if (missing > 0) warn(fmt::format("neutralize: {} target words not in the embedding", missing));
  Matrix m = emb.matrix();
  project_rows(m, Matrix(g.transpose()), {1.0}, selected);
  return Embedding(emb.vocab(), std::move(m));
}

std::vector<Permutation> enumerate_permutations(int d) {
  if (d < 1) throw Error("enumerate_permutations: d must be >= 1");
  if (d > 8) throw Error("enumerate_permutations: d > 8 rejected");
  Permutation p(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) p[static_cast<std::size_t>(i)] = i + 1;
  std::vector<Permutation> out;
  do {
    out.push_back(p);
  } while (std::next_permutation(p.begin(), p.end()));
  return out;
}

}  // namespace embias
