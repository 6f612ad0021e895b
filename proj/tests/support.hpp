#pragma once
// Shared fixtures and independent reference implementations for the tests.
// Nothing here calls the library routine it is used to check.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "embias/common.hpp"
#include "embias/embedding_store.hpp"
#include "embias/evaluation.hpp"
#include "embias/intrinsic_metrics.hpp"
#include "embias/mab_testgen.hpp"
#include "embias/quality_bench.hpp"
#include "embias/rng.hpp"

namespace support {

using embias::Embedding;
using embias::Matrix;
using embias::Vector;

inline std::filesystem::path data_dir() { return EMBIAS_DATA_DIR; }
inline std::filesystem::path fixture_dir() { return EMBIAS_FIXTURE_DIR; }

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    embias::Rng rng(reinterpret_cast<std::uintptr_t>(this) ^ static_cast<std::uint64_t>(++counter));
    path_ = std::filesystem::temp_directory_path() / ("embias_test_" + embias::hex64(rng.next()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline Matrix random_matrix(embias::Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
  }
  return m;
}

inline Embedding random_embedding(embias::Rng& rng, std::size_t n, Eigen::Index dim, const std::string& prefix = "w") {
  std::vector<std::string> vocab;
  for (std::size_t i = 0; i < n; ++i) vocab.push_back(prefix + std::to_string(i));
  return Embedding(std::move(vocab), random_matrix(rng, static_cast<Eigen::Index>(n), dim));
}

inline embias::WordList words_of(const Embedding& emb) { return {"all", emb.vocab()}; }

/// Orthogonal matrix from modified Gram-Schmidt on Gaussian columns.
inline Eigen::MatrixXd random_orthogonal(embias::Rng& rng, int d) {
  Eigen::MatrixXd q(d, d);
  for (int j = 0; j < d; ++j) {
    Eigen::VectorXd v(d);
    for (int i = 0; i < d; ++i) v(i) = rng.normal();
    for (int k = 0; k < j; ++k) v -= q.col(k).dot(v) * q.col(k);
    q.col(j) = v / v.norm();
  }
  return q;
}

// ---------------------------------------------------------------------------
// Cyclic Jacobi eigensolver for symmetric matrices.

struct SymEigen {
  std::vector<double> values;  // descending
  Eigen::MatrixXd vectors;     // column j pairs with values[j]
};

inline SymEigen jacobi_eigen(Eigen::MatrixXd a) {
  const int n = static_cast<int>(a.rows());
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0, total = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        total += a(i, j) * a(i, j);
        if (i != j) off += a(i, j) * a(i, j);
      }
    }
    if (off <= 1e-30 * std::max(total, 1e-300)) break;
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int x, int y) { return a(x, x) > a(y, y); });
  SymEigen out;
  out.vectors.resize(n, n);
  for (int j = 0; j < n; ++j) {
    out.values.push_back(a(order[j], order[j]));
    out.vectors.col(j) = v.col(order[j]);
  }
  return out;
}

struct PcaOracle {
  Matrix basis;  // d rows
  std::vector<double> ratios;  // all components, descending
};

/// Covariance eigendecomposition of (optionally centred) rows.
inline PcaOracle pca_oracle(const Matrix& x, int d, bool center) {
  Eigen::MatrixXd xc = x;
  if (center) xc.rowwise() -= xc.colwise().mean();
  const Eigen::MatrixXd cov = xc.transpose() * xc / static_cast<double>(x.rows() - 1);
  const auto eig = jacobi_eigen(cov);
  double total = 0.0;
  for (double v : eig.values) total += std::max(v, 0.0);
  PcaOracle out;
  out.basis.resize(d, x.cols());
  for (int i = 0; i < d; ++i) out.basis.row(i) = eig.vectors.col(i).transpose();
  for (double v : eig.values) out.ratios.push_back(std::max(v, 0.0) / total);
  return out;
}

/// sin of the largest principal angle between the row spaces of two
/// orthonormal row bases: the spectral norm of P_a - P_b.
inline double max_principal_angle_sin(const Matrix& a, const Matrix& b) {
  const Eigen::MatrixXd diff = a.transpose() * a - b.transpose() * b;
  const auto eig = jacobi_eigen(diff);
  double m = 0.0;
  for (double v : eig.values) m = std::max(m, std::abs(v));
  return std::min(1.0, m);
}

// ---------------------------------------------------------------------------
// Brute-force metric references.

inline Vector unit(const Vector& v) {
  const double n = v.norm();
  return n > 0 ? Vector(v / n) : v;
}

/// All-pairs GIPE with explicit perpendicular vectors and a full sort.
inline double gipe_bruteforce(const Embedding& emb, const std::vector<std::string>& vocab, const Vector& g,
                              double theta, std::size_t k) {
  std::vector<Vector> u;
  for (const auto& w : vocab) u.push_back(unit(emb.vector(w)));
  double total = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    std::vector<std::pair<double, std::size_t>> sims;
    for (std::size_t j = 0; j < u.size(); ++j) {
      if (j == i) continue;
      double s = 0.0;
      for (Eigen::Index c = 0; c < u[i].size(); ++c) s += u[i](c) * u[j](c);
      sims.emplace_back(s, j);
    }
    std::sort(sims.begin(), sims.end(), [](const auto& a, const auto& b) {
      return a.first > b.first || (a.first == b.first && a.second < b.second);
    });
    std::size_t hits = 0;
    for (std::size_t n = 0; n < k; ++n) {
      const auto& w = u[i];
      const auto& v = u[sims[n].second];
      const double wv = w.dot(v);
      const Vector wp = w - w.dot(g) * g, vp = v - v.dot(g) * g;
      if (std::abs(wv) < 1e-15 || wp.norm() < 1e-12 || vp.norm() < 1e-12) continue;
      const double beta = (wv - wp.dot(vp) / (wp.norm() * vp.norm())) / wv;
      if (beta >= theta) ++hits;
    }
    total += static_cast<double>(hits) / static_cast<double>(k);
  }
  return total / static_cast<double>(u.size());
}

inline double cosine(const Vector& a, const Vector& b) {
  const double na = a.norm(), nb = b.norm();
  return na > 0 && nb > 0 ? a.dot(b) / (na * nb) : 0.0;
}

/// Index of the chosen pair per tuple (first maximum).
inline std::vector<int> sembias_choices(const Embedding& emb, const std::vector<embias::SemBiasTuple>& tuples,
                                        const std::string& fem, const std::string& masc) {
  const Vector dir = emb.vector(masc) - emb.vector(fem);
  std::vector<int> out;
  for (const auto& t : tuples) {
    int best = 0;
    double best_c = -2.0;
    for (int p = 0; p < 4; ++p) {
      const double c = cosine(dir, emb.vector(t.pairs[p].first) - emb.vector(t.pairs[p].second));
      if (c > best_c) {
        best_c = c;
        best = p;
      }
    }
    out.push_back(best);
  }
  return out;
}

/// 3CosAdd by scanning every vocabulary word with explicit cosines.
inline double analogy_bruteforce(const Embedding& emb, const embias::AnalogyDataset& ds) {
  std::size_t hits = 0, covered = 0;
  for (const auto& r : ds) {
    if (!emb.contains(r.a) || !emb.contains(r.b) || !emb.contains(r.c) || !emb.contains(r.d)) continue;
    ++covered;
    const Vector target = unit(emb.vector(r.b)) - unit(emb.vector(r.a)) + unit(emb.vector(r.c));
    const auto ia = *emb.index_of(r.a), ib = *emb.index_of(r.b), ic = *emb.index_of(r.c);
    std::size_t best = 0;
    double best_s = -1e300;
    for (std::size_t i = 0; i < emb.size(); ++i) {
      if (i == ia || i == ib || i == ic) continue;
      const double s = unit(Vector(emb.row(i).transpose())).dot(target);
      if (s > best_s) {
        best_s = s;
        best = i;
      }
    }
    hits += best == *emb.index_of(r.d);
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(covered);
}

// ---------------------------------------------------------------------------
// Prediction fixtures.

struct WordPredictions {
  std::string word;
  embias::Group group;
  std::string category;
  std::vector<embias::Probs> probs;
};

/// Builds a test set with one pair per listed probability vector and the
/// matching prediction records.
inline std::pair<embias::TestSet, std::vector<embias::PredictionRecord>> make_predictions(
    const std::vector<WordPredictions>& words) {
  embias::TestSet set;
  std::vector<embias::PredictionRecord> records;
  for (const auto& w : words) {
    for (std::size_t i = 0; i < w.probs.size(); ++i) {
      embias::SentencePair p;
      p.id = w.word + "/" + std::to_string(i);
      p.premise = "A person did thing" + std::to_string(i) + ".";
      p.hypothesis = w.word + " did thing" + std::to_string(i) + ".";
      p.group = w.group;
      p.attribute_word = w.word;
      p.word_category = w.category;
      set.pairs.push_back(p);
      records.push_back({p.id, w.probs[i]});
    }
  }
  return {std::move(set), std::move(records)};
}

/// Random point on the probability simplex.
inline embias::Probs random_probs(embias::Rng& rng) {
  double a = -std::log(1.0 - rng.uniform()), b = -std::log(1.0 - rng.uniform()), c = -std::log(1.0 - rng.uniform());
  const double s = a + b + c;
  return {a / s, b / s, c / s};
}

// ---------------------------------------------------------------------------
// Statistics helpers.

/// Asymptotic Kolmogorov-Smirnov p-value against Uniform(0, 1).
inline double ks_uniform_pvalue(std::vector<double> x) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    d = std::max(d, std::max(static_cast<double>(i + 1) / n - x[i], x[i] - static_cast<double>(i) / n));
  }
  const double lambda = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k) {
    p += 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
  }
  return std::clamp(p, 0.0, 1.0);
}

/// Table rows of published (N, E, C) group means and the printed distance.
struct PublishedRow {
  std::string table;
  std::string embedding;
  std::string rows;  // "MF" or "he/she" on explicit-word rows
  embias::Probs m;
  embias::Probs f;
  double d;
  double error;  // explicit-word rows only; NaN elsewhere
};

inline std::vector<PublishedRow> load_published_rows(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw embias::Error("cannot open " + path.string());
  std::vector<PublishedRow> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto f = embias::split(line, '\t');
    if (f.size() != 11) throw embias::Error("bad fixture line: " + line);
    PublishedRow r;
    r.table = f[0];
    r.embedding = f[1];
    r.rows = f[2];
    for (int i = 0; i < 3; ++i) {
      embias::parse_double(f[3 + i], r.m[i]);
      embias::parse_double(f[6 + i], r.f[i]);
    }
    embias::parse_double(f[9], r.d);
    if (!embias::parse_double(f[10], r.error)) r.error = std::nan("");
    rows.push_back(r);
  }
  return rows;
}

}  // namespace support
