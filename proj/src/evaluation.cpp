#include "embias/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>
#include <json.hpp>

#include "embias/rng.hpp"

namespace embias {

namespace {

struct Accum {
  Probs sum{};
  std::size_t count = 0;

  void add(const Probs& p) {
    for (int i = 0; i < 3; ++i) sum[static_cast<std::size_t>(i)] += p[static_cast<std::size_t>(i)];
    ++count;
  }
  Probs mean() const {
    Probs m{};
    for (std::size_t i = 0; i < 3; ++i) m[i] = sum[i] / static_cast<double>(count);
    return m;
  }
};

Accum accumulate(const PredictionSet& preds, const Selector& sel) {
  Accum a;
  for (const auto& e : preds.entries()) {
    if (!sel || sel(*e.pair)) a.add(e.probs);
  }
  return a;
}

nlohmann::json to_json(const Probs& p) { return nlohmann::json::array({p[0], p[1], p[2]}); }

}  // namespace

double distance(const Probs& a, const Probs& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < 3; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path, PredictionLoadStats* stats) {
  std::ifstream in(path);
  if (!in) throw Error(fmt::format("cannot open predictions {}", path.string()));
  const std::string src = path.string();
  std::vector<PredictionRecord> out;
  PredictionLoadStats st;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    std::istringstream ss{std::string(t)};
    std::vector<std::string> f;
    for (std::string tok; ss >> tok;) f.push_back(tok);
    if (out.empty() && !f.empty() && f[0] == "id") continue;
    if (f.size() != 4) throw ParseError(src, lineno, fmt::format("expected 'id N E C', found {} fields", f.size()));
    PredictionRecord r;
    r.id = f[0];
    double sum = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
      if (!parse_double(f[i + 1], r.probs[i])) throw ParseError(src, lineno, fmt::format("bad probability '{}'", f[i + 1]));
      if (r.probs[i] < -1e-6 || r.probs[i] > 1.0 + 1e-6) {
        throw ParseError(src, lineno, fmt::format("probability {} outside [0, 1]", r.probs[i]));
      }
      r.probs[i] = std::clamp(r.probs[i], 0.0, 1.0);
      sum += r.probs[i];
    }
    const double dev = std::abs(sum - 1.0);
    if (dev > 0.01) throw ParseError(src, lineno, fmt::format("probabilities sum to {}", sum));
    if (dev > 0.0) {
      for (auto& p : r.probs) p /= sum;
      ++st.renormalized;
    }
    st.max_deviation = std::max(st.max_deviation, dev);
    out.push_back(std::move(r));
  }
  st.records = out.size();
  if (st.max_deviation > 1e-4) {
    warn(fmt::format("{}: {} rows renormalised, max deviation {:.3g}", src, st.renormalized, st.max_deviation));
  }
  if (stats) *stats = st;
  return out;
}

PredictionSet::PredictionSet(const TestSet& set, const std::vector<PredictionRecord>& records) {
  std::unordered_map<std::string, const PredictionRecord*> by_id;
  for (const auto& r : records) {
    if (!by_id.emplace(r.id, &r).second) throw Error(fmt::format("duplicate prediction id '{}'", r.id));
  }
  std::size_t matched = 0;
  for (const auto& p : set.pairs) {
    auto it = by_id.find(p.id);
    if (it == by_id.end()) {
      ++missing_;
      continue;
    }
    entries_.push_back({&p, it->second->probs});
    ++matched;
  }
  extra_ = records.size() - matched;
  if (missing_ > 0 || extra_ > 0) {
    warn(fmt::format("predictions: {} test pairs without a prediction, {} unmatched prediction ids", missing_, extra_));
  }
}

Selector select_group(Group g) {
  return [g](const SentencePair& p) { return p.group == g; };
}

Selector select_category(std::string category) {
  return [c = std::move(category)](const SentencePair& p) { return p.word_category == c; };
}

Selector select_word(std::string word) {
  return [w = std::move(word)](const SentencePair& p) { return p.attribute_word == w; };
}

Selector select_all(std::vector<Selector> parts) {
  return [parts = std::move(parts)](const SentencePair& p) {
    return std::all_of(parts.begin(), parts.end(), [&](const Selector& s) { return !s || s(p); });
  };
}

double marked_attribute_error(const PredictionSet& preds, const Selector& filter) {
  const Probs ideal{1.0, 0.0, 0.0};
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& e : preds.entries()) {
    if (filter && !filter(*e.pair)) continue;
    sum += distance(ideal, e.probs);
    ++n;
  }
  if (n == 0) throw Error("marked_attribute_error: empty prediction set");
  return sum / static_cast<double>(n);
}

double group_distance(const PredictionSet& preds, const Selector& a, const Selector& b) {
  const auto ga = accumulate(preds, a);
  const auto gb = accumulate(preds, b);
  if (ga.count == 0 || gb.count == 0) throw Error("group_distance: empty group");
  return distance(ga.mean(), gb.mean());
}

double group_distance_literal(const PredictionSet& preds, const Selector& a, const Selector& b) {
  const auto ga = accumulate(preds, a);
  const auto gb = accumulate(preds, b);
  if (ga.count == 0 || gb.count == 0) throw Error("group_distance: empty group");
  return distance(ga.sum, gb.sum) / (2.0 * static_cast<double>(ga.count + gb.count));
}

std::map<std::string, GroupMean> group_means(const PredictionSet& preds, GroupBy by) {
  std::map<std::string, Accum> acc;
  for (const auto& e : preds.entries()) {
    std::string key;
    switch (by) {
      case GroupBy::Group: key = std::string(to_string(e.pair->group)); break;
      case GroupBy::AttributeWord: key = e.pair->attribute_word; break;
      case GroupBy::WordCategory: key = e.pair->word_category; break;
    }
    acc[key].add(e.probs);
  }
  std::map<std::string, GroupMean> out;
  for (const auto& [k, a] : acc) out[k] = {a.mean(), a.count};
  return out;
}

std::vector<std::pair<std::string, Group>> attribute_partition(const PredictionSet& preds) {
  std::vector<std::pair<std::string, Group>> out;
  std::unordered_set<std::string> seen;
  for (const auto& e : preds.entries()) {
    if (seen.insert(e.pair->attribute_word).second) out.emplace_back(e.pair->attribute_word, e.pair->group);
  }
  return out;
}

PermutationResult permutation_test(const PredictionSet& preds, const std::vector<std::pair<std::string, Group>>& partition,
                                   std::size_t n_samples, std::uint64_t seed, unsigned workers) {
  if (partition.size() < 2) throw Error("permutation_test: need at least 2 attribute words");
  if (n_samples < 1) throw Error("permutation_test: n_samples must be >= 1");

  std::unordered_map<std::string, std::size_t> word_index;
  for (std::size_t i = 0; i < partition.size(); ++i) {
    if (!word_index.emplace(partition[i].first, i).second) {
      throw Error(fmt::format("permutation_test: word '{}' listed twice", partition[i].first));
    }
  }
  std::vector<Accum> words(partition.size());
  for (const auto& e : preds.entries()) {
    auto it = word_index.find(e.pair->attribute_word);
    if (it != word_index.end()) words[it->second].add(e.probs);
  }
  std::size_t size_a = 0;
  for (std::size_t i = 0; i < partition.size(); ++i) {
    if (words[i].count == 0) throw Error(fmt::format("permutation_test: no predictions for '{}'", partition[i].first));
    if (partition[i].second == Group::M) ++size_a;
  }
  if (size_a == 0 || size_a == partition.size()) throw Error("permutation_test: both groups must be non-empty");

  // Group sums are always accumulated in word order so that re-drawing the
  // observed partition reproduces the observed distance exactly.
  auto split_distance = [&](const std::vector<char>& in_a) {
    Accum a, b;
    for (std::size_t i = 0; i < words.size(); ++i) {
      Accum& dst = in_a[i] ? a : b;
      for (std::size_t c = 0; c < 3; ++c) dst.sum[c] += words[i].sum[c];
      dst.count += words[i].count;
    }
    return distance(a.mean(), b.mean());
  };

  std::vector<char> observed(words.size());
  for (std::size_t i = 0; i < words.size(); ++i) observed[i] = partition[i].second == Group::M;
  const double d = split_distance(observed);

  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> exceed{0};
  auto work = [&]() {
    std::vector<std::size_t> perm(words.size());
    std::vector<char> in_a(words.size());
    std::size_t local = 0;
    while (true) {
      const std::size_t s = next.fetch_add(1);
      if (s >= n_samples) break;
      Rng rng = Rng::stream(seed, s);
      for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
      for (std::size_t i = 0; i < size_a; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.below(perm.size() - i));
        std::swap(perm[i], perm[j]);
      }
      std::fill(in_a.begin(), in_a.end(), 0);
      for (std::size_t i = 0; i < size_a; ++i) in_a[perm[i]] = 1;
      if (split_distance(in_a) > d) ++local;
    }
    exceed += local;
  };
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < workers; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  PermutationResult r;
  r.distance = d;
  r.exceed = exceed.load();
  r.samples = n_samples;
  r.seed = seed;
  r.significance = static_cast<double>(r.exceed) / static_cast<double>(n_samples);
  return r;
}

std::string evaluation_report(const PredictionSet& preds, const EvaluationOptions& options) {
  using nlohmann::json;
  json j;
  j["records"] = preds.size();
  j["missing"] = preds.missing();
  j["extra"] = preds.extra();
  j["error"] = marked_attribute_error(preds);

  auto m = select_group(Group::M);
  auto f = select_group(Group::F);
  j["distance"] = group_distance(preds, m, f);
  if (options.literal_eq2) j["distance_literal"] = group_distance_literal(preds, m, f);

  json groups = json::object();
  for (const auto& [k, g] : group_means(preds, GroupBy::Group)) groups[k] = {{"mean", to_json(g.mean)}, {"count", g.count}};
  j["group_means"] = groups;

  json cats = json::object();
  for (const auto& [cat, g] : group_means(preds, GroupBy::WordCategory)) {
    json c;
    auto in_cat = select_category(cat);
    c["count"] = g.count;
    c["error"] = marked_attribute_error(preds, in_cat);
    auto cm = select_all({in_cat, m});
    auto cf = select_all({in_cat, f});
    const auto am = accumulate(preds, cm);
    const auto af = accumulate(preds, cf);
    if (am.count > 0) c["M"] = {{"mean", to_json(am.mean())}, {"count", am.count}};
    if (af.count > 0) c["F"] = {{"mean", to_json(af.mean())}, {"count", af.count}};
    if (am.count > 0 && af.count > 0) {
      c["distance"] = distance(am.mean(), af.mean());
      if (options.literal_eq2) c["distance_literal"] = group_distance_literal(preds, cm, cf);
    }
    cats[cat] = c;
  }
  j["categories"] = cats;

  json words = json::object();
  for (const auto& [w, g] : group_means(preds, GroupBy::AttributeWord)) words[w] = {{"mean", to_json(g.mean)}, {"count", g.count}};
  j["words"] = words;

  if (options.permutations > 0) {
    const auto partition = attribute_partition(preds);
    std::size_t nm = 0;
    for (const auto& [_, g] : partition) nm += g == Group::M;
    if (nm > 0 && nm < partition.size()) {
      const auto p = permutation_test(preds, partition, options.permutations, options.seed, options.workers);
      j["permutation"] = {{"distance", p.distance}, {"significance", p.significance}, {"exceed", p.exceed},
                          {"samples", p.samples}, {"seed", p.seed}};
    }
  }
  return j.dump(2);
}

}  // namespace embias
