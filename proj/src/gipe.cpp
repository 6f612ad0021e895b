#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <thread>
#include <unordered_set>

#include <fmt/format.h>

#include "embias/intrinsic_metrics.hpp"

namespace embias {

namespace {

constexpr double kZeroNorm = 1e-12;
constexpr double kZeroInner = 1e-15;
constexpr Eigen::Index kBlock = 256;

}  // namespace

IndirectBias indirect_bias(const Eigen::Ref<const Vector>& w, const Eigen::Ref<const Vector>& v,
                           const Eigen::Ref<const Vector>& g) {
  IndirectBias out;
  const double wv = w.dot(v);
  if (std::abs(wv) < kZeroInner) {
    out.status = IndirectBias::Status::ZeroInner;
    return out;
  }
  const Vector w_perp = w - w.dot(g) * g;
  const Vector v_perp = v - v.dot(g) * g;
  const double nw = w_perp.norm();
  const double nv = v_perp.norm();
  if (nw < kZeroNorm || nv < kZeroNorm) {
    out.status = IndirectBias::Status::ZeroPerpendicular;
    return out;
  }
  out.value = (wv - w_perp.dot(v_perp) / (nw * nv)) / wv;
  return out;
}

void GipeConfig::validate() const {
  if (!(theta > 0.0 && theta < 1.0)) throw Error("gipe: theta must be in (0, 1)");
  if (n_neighbors < 1) throw Error("gipe: n_neighbors must be >= 1");
}

GipeResult gipe(const Embedding& emb, const GipeConfig& cfg, const Eigen::Ref<const Vector>& g, unsigned workers) {
  cfg.validate();
  if (std::abs(g.norm() - 1.0) > 1e-6) throw Error("gipe: direction must be unit norm");

  GipeResult result;
  std::vector<std::size_t> rows;
  {
    std::unordered_set<std::size_t> seen;
    for (const auto& w : cfg.vocab.words) {
      auto i = emb.index_of(w);
      if (!i) {
        ++result.missing;
      } else if (seen.insert(*i).second) {
        rows.push_back(*i);
      }
    }
  }
  if (result.missing > 0) warn(fmt::format("gipe: {} vocabulary words missing from the embedding", result.missing));
  const auto n = static_cast<Eigen::Index>(rows.size());
  if (rows.size() < cfg.n_neighbors + 1) {
    throw Error(fmt::format("gipe: vocabulary of {} words is smaller than n_neighbors + 1 = {}", rows.size(),
                            cfg.n_neighbors + 1));
  }

  Matrix unit(n, emb.dim());
  for (Eigen::Index i = 0; i < n; ++i) {
    unit.row(i) = emb.row(rows[static_cast<std::size_t>(i)]);
    const double norm = unit.row(i).norm();
    if (norm > 0.0) unit.row(i) /= norm;
  }
  // <w_perp, v_perp> = <w, v> - p_w p_v and |w_perp|^2 = |w|^2 - p_w^2.
  const Eigen::VectorXd proj = unit * g;
  Eigen::VectorXd perp_norm(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    perp_norm(i) = std::sqrt(std::max(0.0, unit.row(i).squaredNorm() - proj(i) * proj(i)));
  }

  std::vector<double> eta(static_cast<std::size_t>(n), 0.0);
  std::vector<std::size_t> skipped(static_cast<std::size_t>(n), 0);
  const std::size_t k = cfg.n_neighbors;
  std::atomic<Eigen::Index> next{0};

  auto work = [&]() {
    std::vector<Eigen::Index> cand(static_cast<std::size_t>(n));
    while (true) {
      const Eigen::Index start = next.fetch_add(kBlock);
      if (start >= n) return;
      const Eigen::Index len = std::min(kBlock, n - start);
      const Eigen::MatrixXd sims = unit.middleRows(start, len) * unit.transpose();
      for (Eigen::Index q = 0; q < len; ++q) {
        const Eigen::Index w = start + q;
        std::iota(cand.begin(), cand.end(), Eigen::Index{0});
        std::swap(cand[static_cast<std::size_t>(w)], cand.back());
        auto better = [&](Eigen::Index a, Eigen::Index b) {
          const double sa = sims(q, a), sb = sims(q, b);
          return sa > sb || (sa == sb && a < b);
        };
        auto last = cand.end() - 1;  // excludes w itself
        std::nth_element(cand.begin(), cand.begin() + static_cast<long>(k - 1), last, better);

        std::size_t hits = 0;
        for (std::size_t j = 0; j < k; ++j) {
          const Eigen::Index v = cand[j];
          const double wv = sims(q, v);
          if (std::abs(wv) < kZeroInner || perp_norm(w) < kZeroNorm || perp_norm(v) < kZeroNorm) {
            ++skipped[static_cast<std::size_t>(w)];
            continue;
          }
          const double perp_cos = (wv - proj(w) * proj(v)) / (perp_norm(w) * perp_norm(v));
          if ((wv - perp_cos) / wv >= cfg.theta) ++hits;
        }
        eta[static_cast<std::size_t>(w)] = static_cast<double>(hits) / static_cast<double>(k);
      }
    }
  };

  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < workers; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  double sum = 0.0;
  for (std::size_t i = 0; i < eta.size(); ++i) {
    sum += eta[i];
    result.skipped_pairs += skipped[i];
  }
  result.covered = rows.size();
  result.value = sum / static_cast<double>(rows.size());
  return result;
}

}  // namespace embias
