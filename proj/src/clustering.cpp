#include <cmath>
#include <limits>
#include <map>

#include <fmt/format.h>

#include "embias/intrinsic_metrics.hpp"
#include "embias/rng.hpp"

namespace embias {

namespace {

struct Run {
  std::vector<int> assignment;
  Matrix centroids;
  double inertia = 0.0;
  int iterations = 0;
  bool empty_cluster = false;
};

Matrix seed_plus_plus(const Matrix& x, int k, Rng& rng) {
  const Eigen::Index n = x.rows();
  Matrix c(k, x.cols());
  c.row(0) = x.row(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n))));
  Eigen::VectorXd d2 = (x.rowwise() - c.row(0)).rowwise().squaredNorm();
  for (int j = 1; j < k; ++j) {
    const double total = d2.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      double r = rng.uniform() * total;
      for (pick = 0; pick < n - 1; ++pick) {
        r -= d2(pick);
        if (r < 0.0) break;
      }
    } else {
      pick = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
    }
    c.row(j) = x.row(pick);
    d2 = d2.cwiseMin((x.rowwise() - c.row(j)).rowwise().squaredNorm());
  }
  return c;
}

Run lloyd(const Matrix& x, Matrix centroids, int max_iterations) {
  const Eigen::Index n = x.rows();
  const int k = static_cast<int>(centroids.rows());
  Run run;
  run.assignment.assign(static_cast<std::size_t>(n), -1);
  for (int it = 0; it < max_iterations; ++it) {
    bool changed = false;
    run.inertia = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int j = 0; j < k; ++j) {
        const double d = (x.row(i) - centroids.row(j)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = j;
        }
      }
      run.inertia += best_d;
      if (run.assignment[static_cast<std::size_t>(i)] != best) {
        run.assignment[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    run.iterations = it + 1;
    if (!changed) break;
    Matrix sums = Matrix::Zero(k, x.cols());
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const int a = run.assignment[static_cast<std::size_t>(i)];
      sums.row(a) += x.row(i);
      ++counts[static_cast<std::size_t>(a)];
    }
    for (int j = 0; j < k; ++j) {
      if (counts[static_cast<std::size_t>(j)] > 0) centroids.row(j) = sums.row(j) / counts[static_cast<std::size_t>(j)];
    }
  }
  std::vector<int> counts(static_cast<std::size_t>(k), 0);
  for (int a : run.assignment) ++counts[static_cast<std::size_t>(a)];
  for (int c : counts) {
    if (c == 0) run.empty_cluster = true;
  }
  run.centroids = std::move(centroids);
  return run;
}

// Number of distinct rows, capped at `cap`.
int distinct_rows(const Matrix& x, int cap) {
  std::vector<Eigen::Index> reps;
  for (Eigen::Index i = 0; i < x.rows() && static_cast<int>(reps.size()) < cap; ++i) {
    bool seen = false;
    for (auto r : reps) {
      if (x.row(i) == x.row(r)) {
        seen = true;
        break;
      }
    }
    if (!seen) reps.push_back(i);
  }
  return static_cast<int>(reps.size());
}

double entropy(const std::vector<double>& counts, double total) {
  double h = 0.0;
  for (double c : counts) {
    if (c > 0.0) h -= (c / total) * std::log(c / total);
  }
  return h;
}

}  // namespace

KMeansResult kmeans(const Matrix& points, const KMeansOptions& options) {
  if (options.k < 1) throw Error("kmeans: k must be >= 1");
  if (points.rows() < options.k) throw Error("kmeans: fewer points than clusters");
  const bool degenerate = distinct_rows(points, options.k) < options.k;

  Rng rng(options.seed);
  Run best;
  best.inertia = std::numeric_limits<double>::infinity();
  bool have = false;
  int reseeds = 0;
  for (int r = 0; r < options.restarts; ++r) {
    Run run = lloyd(points, seed_plus_plus(points, options.k, rng), options.max_iterations);
    if (run.empty_cluster && !degenerate && reseeds < 10 * options.restarts) {
      ++reseeds;
      --r;
      continue;
    }
    if (!have || run.inertia < best.inertia) {
      best = std::move(run);
      have = true;
    }
  }
  return {std::move(best.assignment), std::move(best.centroids), best.inertia, best.iterations};
}

VMeasure v_measure(std::span<const int> labels, std::span<const int> clusters) {
  if (labels.size() != clusters.size() || labels.empty()) throw Error("v_measure: size mismatch or empty input");
  std::map<int, double> nc, nk;
  std::map<std::pair<int, int>, double> nck;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    nc[labels[i]] += 1;
    nk[clusters[i]] += 1;
    nck[{labels[i], clusters[i]}] += 1;
  }
  const double n = static_cast<double>(labels.size());
  std::vector<double> vc, vk;
  for (auto& [_, c] : nc) vc.push_back(c);
  for (auto& [_, c] : nk) vk.push_back(c);
  const double hc = entropy(vc, n);
  const double hk = entropy(vk, n);
  double hc_given_k = 0.0, hk_given_c = 0.0;
  for (auto& [key, c] : nck) {
    hc_given_k -= (c / n) * std::log(c / nk[key.second]);
    hk_given_c -= (c / n) * std::log(c / nc[key.first]);
  }
  VMeasure v;
  v.homogeneity = hc == 0.0 ? 1.0 : 1.0 - hc_given_k / hc;
  v.completeness = hk == 0.0 ? 1.0 : 1.0 - hk_given_c / hk;
  const double s = v.homogeneity + v.completeness;
  v.v_measure = s == 0.0 ? 0.0 : 2.0 * v.homogeneity * v.completeness / s;
  return v;
}

ClusteringResult clustering_bias(const Embedding& deb, const LabeledWordSet& wordset, int k, std::uint64_t seed,
                                 bool normalize) {
  if (k != 2) throw Error("clustering_bias: only k = 2 is supported");
  std::vector<int> labels;
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < wordset.size(); ++i) {
    auto idx = deb.index_of(wordset.words.words[i]);
    if (!idx) throw NotFoundError(fmt::format("clustering_bias: '{}' missing from debiased embedding", wordset.words.words[i]));
    rows.push_back(*idx);
    labels.push_back(wordset.labels[i] == Group::F ? 1 : 0);
  }
  Matrix x(static_cast<Eigen::Index>(rows.size()), deb.dim());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) = deb.row(rows[i]);
    if (normalize) {
      const double n = x.row(static_cast<Eigen::Index>(i)).norm();
      if (n > 0.0) x.row(static_cast<Eigen::Index>(i)) /= n;
    }
  }
  KMeansOptions opts;
  opts.k = k;
  opts.seed = seed;
  const auto km = kmeans(x, opts);

  std::size_t agree = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) agree += (labels[i] == km.assignment[i]);
  const double acc = static_cast<double>(agree) / static_cast<double>(labels.size());

  ClusteringResult out;
  out.n = labels.size();
  out.accuracy = std::max(acc, 1.0 - acc);
  out.v_measure = v_measure(labels, km.assignment).v_measure;
  return out;
}

}  // namespace embias
