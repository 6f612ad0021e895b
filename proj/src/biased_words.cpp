#include <algorithm>
#include <numeric>

#include <fmt/format.h>

#include "embias/intrinsic_metrics.hpp"

namespace embias {

LabeledWordSet most_biased_words(const Embedding& orig, const Eigen::Ref<const Vector>& g, std::size_t n_per_class,
                                 const WordList& vocab) {
  std::vector<std::size_t> idx;
  std::vector<double> proj;
  for (const auto& w : vocab.words) {
    auto i = orig.index_of(w);
    if (!i) continue;
    const double n = orig.row(*i).norm();
    idx.push_back(*i);
    proj.push_back(n > 0.0 ? orig.row(*i).dot(g) / n : 0.0);
  }
  if (2 * n_per_class > idx.size()) {
    throw Error(fmt::format("most_biased_words: need {} words, only {} available", 2 * n_per_class, idx.size()));
  }

  std::vector<std::size_t> order(idx.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::size_t> desc = order;
  std::stable_sort(desc.begin(), desc.end(), [&](auto a, auto b) { return proj[a] > proj[b]; });
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return proj[a] < proj[b]; });

  LabeledWordSet out;
  out.words.name = "most_biased";
  std::vector<bool> taken(idx.size(), false);
  for (std::size_t k = 0; k < n_per_class; ++k) {
    const auto j = desc[k];
    taken[j] = true;
    out.words.words.push_back(orig.word(idx[j]));
    out.labels.push_back(Group::F);
    out.projections.push_back(proj[j]);
  }
  std::size_t added = 0;
  for (std::size_t k = 0; k < order.size() && added < n_per_class; ++k) {
    const auto j = order[k];
    if (taken[j]) continue;
    out.words.words.push_back(orig.word(idx[j]));
    out.labels.push_back(Group::M);
    out.projections.push_back(proj[j]);
    ++added;
  }
  return out;
}

}  // namespace embias
