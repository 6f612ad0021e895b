#include "embias/gender_subspace.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

namespace embias {

DifferenceMatrix pairwise_differences(const WordList& f_names, const WordList& m_names, const Embedding& emb) {
  DifferenceMatrix out;
  const auto fi = present_indices(emb, f_names, &out.dropped_female);
  const auto mi = present_indices(emb, m_names, &out.dropped_male);
  if (out.dropped_female + out.dropped_male > 0) {
    warn(fmt::format("pairwise_differences: dropped {} female and {} male names missing from the embedding",
                     out.dropped_female, out.dropped_male));
  }
  if (fi.empty() || mi.empty()) throw Error("pairwise_differences: a name list is empty after lookup");

  out.n_female = fi.size();
  out.n_male = mi.size();
  out.rows.resize(static_cast<Eigen::Index>(fi.size() * mi.size()), emb.dim());
  Eigen::Index r = 0;
  for (auto j : fi) {
    for (auto k : mi) out.rows.row(r++) = emb.row(j) - emb.row(k);
  }
  return out;
}

GenderSubspace principal_subspace(const DifferenceMatrix& diffs, int d, bool center) {
  if (d < 1) throw Error("principal_subspace: d must be >= 1");
  const Matrix& x = diffs.rows;
  if (x.rows() == 0) throw Error("principal_subspace: empty difference matrix");

  const Eigen::RowVectorXd mean = x.colwise().mean();
  Eigen::MatrixXd work = x;
  if (center) work.rowwise() -= mean;

  Eigen::BDCSVD<Eigen::MatrixXd> svd(work, Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  // Centering identical rows leaves only rounding noise.
  if (s.size() == 0 || s(0) <= 1e-12 * std::max(1.0, x.norm())) throw Error("principal_subspace: difference matrix is zero after centering");

  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) >= 1e-10 * s(0)) ++rank;
  }
  if (d > rank) {
    throw Error(fmt::format("principal_subspace: d={} exceeds numerical rank {}", d, rank));
  }

  const double denom = x.rows() > 1 ? static_cast<double>(x.rows() - 1) : 1.0;
  const Eigen::VectorXd lambda = s.array().square() / denom;
  const double total = lambda.sum();

  GenderSubspace sub;
  sub.total_variance = total;
  sub.basis.resize(d, x.cols());
  sub.weights.resize(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) {
    Eigen::VectorXd g = svd.matrixV().col(i);
    if (g.dot(mean.transpose()) < 0.0) g = -g;
    sub.basis.row(i) = g.transpose();
    sub.weights[static_cast<std::size_t>(i)] = lambda(i) / total;
  }
  return sub;
}

Vector gender_direction(const Embedding& emb, std::string_view fem, std::string_view masc) {
  const Vector diff = emb.vector(fem) - emb.vector(masc);
  const double n = diff.norm();
  if (n < 1e-10) {
    throw DegenerateDirectionError(
        fmt::format("direction {} - {} is degenerate (norm {:.3g})", fem, masc, n));
  }
  return diff / n;
}

double midb_word(const Eigen::Ref<const Vector>& w, const GenderSubspace& sub) {
  if (w.size() != sub.embedding_dim()) {
    throw Error(fmt::format("midb_word: dimension {} vs subspace {}", w.size(), sub.embedding_dim()));
  }
  double total = 0.0;
  for (int i = 0; i < sub.dim(); ++i) total += sub.weights[static_cast<std::size_t>(i)] * sub.basis.row(i).dot(w);
  return total;
}

AverageResult midb_average(const Embedding& emb, const WordList& vocab, const GenderSubspace& sub) {
  AverageResult r;
  const auto idx = present_indices(emb, vocab, &r.missing);
  if (idx.empty()) throw Error("midb_average: no vocabulary words present in the embedding");
  double sum = 0.0;
  for (auto i : idx) sum += midb_word(emb.row(i).transpose(), sub);
  r.covered = idx.size();
  r.value = sum / static_cast<double>(idx.size());
  return r;
}

AverageResult direct_bias(const Embedding& emb, const WordList& vocab, const Eigen::Ref<const Vector>& g) {
  if (std::abs(g.norm() - 1.0) > 1e-6) throw Error("direct_bias: direction must be unit norm");
  AverageResult r;
  const auto idx = present_indices(emb, vocab, &r.missing);
  double sum = 0.0;
  for (auto i : idx) {
    const double n = emb.row(i).norm();
    if (n == 0.0) {
      ++r.skipped;
      continue;
    }
    sum += std::abs(emb.row(i).dot(g)) / n;
    ++r.covered;
  }
  if (r.skipped > 0) warn(fmt::format("direct_bias: skipped {} zero-norm words", r.skipped));
  if (r.covered == 0) throw Error("direct_bias: no usable vocabulary words");
  r.value = sum / static_cast<double>(r.covered);
  return r;
}

void save_subspace(const GenderSubspace& sub, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(fmt::format("cannot write {}", path.string()));
  out << fmt::format("{} {} {:.17g}\n", sub.dim(), sub.embedding_dim(), sub.total_variance);
  for (std::size_t i = 0; i < sub.weights.size(); ++i) out << (i ? " " : "") << fmt::format("{:.17g}", sub.weights[i]);
  out << '\n';
  for (int i = 0; i < sub.dim(); ++i) {
    out << 'g' << (i + 1);
    for (Eigen::Index j = 0; j < sub.basis.cols(); ++j) out << fmt::format(" {:.17g}", sub.basis(i, j));
    out << '\n';
  }
  if (!out) throw Error(fmt::format("write failed: {}", path.string()));
}

GenderSubspace load_subspace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(fmt::format("cannot open subspace file {}", path.string()));
  const std::string src = path.string();
  int d = 0;
  long d_emb = 0;
  GenderSubspace sub;
  if (!(in >> d >> d_emb >> sub.total_variance) || d < 1 || d_emb < 1) {
    throw ParseError(src, 1, "expected header '<d> <d_emb> <total_variance>'");
  }
  sub.weights.resize(static_cast<std::size_t>(d));
  for (auto& w : sub.weights) {
    if (!(in >> w)) throw ParseError(src, 2, "expected d weights");
  }
  sub.basis.resize(d, d_emb);
  for (int i = 0; i < d; ++i) {
    std::string label;
    in >> label;
    for (long j = 0; j < d_emb; ++j) {
      if (!(in >> sub.basis(i, j))) throw ParseError(src, static_cast<std::size_t>(3 + i), "short basis row");
    }
  }
  return sub;
}

}  // namespace embias
