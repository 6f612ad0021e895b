#include <doctest.h>

#include <fstream>
#include <set>

#include "embias/debias.hpp"
#include "embias/quality_bench.hpp"
#include "support.hpp"

using namespace embias;

namespace {

void write(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

// Similarity items over words w0..w(n-1) scored by their actual cosine.
SimilarityDataset cosine_scored(const Embedding& emb, Rng& rng, std::size_t items) {
  SimilarityDataset ds;
  std::set<std::pair<std::size_t, std::size_t>> seen;
  while (ds.size() < items) {
    const auto i = rng.below(emb.size()), j = rng.below(emb.size());
    if (i == j || !seen.insert({std::min(i, j), std::max(i, j)}).second) continue;
    ds.push_back({emb.word(i), emb.word(j), support::cosine(emb.row(i).transpose(), emb.row(j).transpose())});
  }
  return ds;
}

AnalogyDataset random_analogies(const Embedding& emb, Rng& rng, std::size_t n) {
  AnalogyDataset ds;
  for (std::size_t k = 0; k < n; ++k) {
    AnalogyItem it;
    it.a = emb.word(rng.below(emb.size()));
    it.b = emb.word(rng.below(emb.size()));
    it.c = emb.word(rng.below(emb.size()));
    it.d = emb.word(rng.below(emb.size()));
    it.section = k % 2 ? "gram1" : "capital";
    it.category = k % 2 ? "syntactic" : "semantic";
    ds.push_back(it);
  }
  return ds;
}

}  // namespace

TEST_CASE("spearman examples") {
  const std::vector<double> x{1, 2, 3, 4}, neg{-1, -2, -3, -4};
  CHECK(*spearman(x, x) == doctest::Approx(1.0));
  CHECK(*spearman(x, neg) == doctest::Approx(-1.0));
  CHECK(*spearman(std::vector<double>{1, 2, 3}, std::vector<double>{1, 3, 2}) == doctest::Approx(0.5));
  CHECK_FALSE(spearman(x, std::vector<double>{2, 2, 2, 2}).has_value());
  CHECK(average_ranks(std::vector<double>{10, 20, 20, 5}) == std::vector<double>{2, 3.5, 3.5, 1});
}

TEST_CASE("word similarity: perfect and reversed") {
  Rng rng(3);
  const auto emb = support::random_embedding(rng, 20, 5);
  auto ds = cosine_scored(emb, rng, 30);
  const auto r = word_similarity(emb, ds);
  CHECK(r.score == doctest::Approx(100.0));
  CHECK(r.covered == 30);
  for (auto& it : ds) it.score = -it.score;
  CHECK(word_similarity(emb, ds).score == doctest::Approx(-100.0));

  ds.push_back({"w1", "absent", 5.0});
  const auto partial = word_similarity(emb, ds);
  CHECK(partial.covered == 30);
  CHECK(partial.total == 31);
}

TEST_CASE("word similarity is invariant under monotone transforms (property)") {
  Rng rng(12);
  for (int trial = 0; trial < 30; ++trial) {
    const auto emb = support::random_embedding(rng, 25, 6);
    SimilarityDataset ds = cosine_scored(emb, rng, 20);
    for (auto& it : ds) it.score = rng.uniform() * 10.0;
    const double base = word_similarity(emb, ds).score;
    auto transformed = ds;
    for (auto& it : transformed) it.score = std::exp(it.score) + 3.0;
    CHECK(word_similarity(emb, transformed).score == doctest::Approx(base).epsilon(1e-12));
    Matrix scaled = emb.matrix();
    for (Eigen::Index i = 0; i < scaled.rows(); ++i) scaled.row(i) *= 0.1 + rng.uniform();
    CHECK(word_similarity(Embedding(emb.vocab(), scaled), ds).score == doctest::Approx(base).epsilon(1e-9));
  }
}

TEST_CASE("similarity loader") {
  support::TempDir dir;
  write(dir / "s.txt", "tiger cat 7.35\nbook\tpaper 7.46\n# x\ntiger cat 1.0\n");
  const auto ds = load_similarity(dir / "s.txt");
  CHECK(ds.size() == 2);
  CHECK(ds[1].score == 7.46);
  write(dir / "bad.txt", "a b c\n");
  CHECK_THROWS_AS(load_similarity(dir / "bad.txt"), ParseError);
}

TEST_CASE("analogy: constructed space is solved") {
  Matrix m = Matrix::Zero(6, 5);
  m.row(0) << 1, 0, 0, 0, 0;                                  // a
  m.row(1) << 0, 1, 0, 0, 0;                                  // b
  m.row(2) << 0, 0, 1, 0, 0;                                  // c
  m.row(3) << -1 / std::sqrt(3.0), 1 / std::sqrt(3.0), 1 / std::sqrt(3.0), 0, 0;  // d
  m.row(4) << 0, 0, 0, 1, 0;
  m.row(5) << 0, 0, 0, 0, 1;
  const Embedding emb({"a", "b", "c", "d", "x", "y"}, m);
  AnalogyDataset ds{{"a", "b", "c", "d", "capital", "semantic"}, {"a", "b", "c", "d", "gram2", "syntactic"}};
  const auto r = analogy_accuracy(emb, ds, 1);
  CHECK(r.total == 100.0);
  CHECK(r.by_category.at("semantic") == 100.0);
  CHECK(r.by_section.at("gram2") == 100.0);

  ds.push_back({"a", "b", "c", "zz", "capital", "semantic"});
  const auto partial = analogy_accuracy(emb, ds, 1);
  CHECK(partial.covered == 2);
  CHECK(partial.skipped == 1);
  CHECK(partial.total == 100.0);
}

TEST_CASE("analogy matches brute force and ignores worker count (property)") {
  Rng rng(71);
  for (int trial = 0; trial < 20; ++trial) {
    const auto emb = support::random_embedding(rng, 30 + rng.below(200), 2 + static_cast<int>(rng.below(8)));
    const auto ds = random_analogies(emb, rng, 10 + rng.below(300));
    const auto r1 = analogy_accuracy(emb, ds, 1);
    const auto r3 = analogy_accuracy(emb, ds, 3);
    CHECK(r1.total == r3.total);
    CHECK(r1.total == doctest::Approx(support::analogy_bruteforce(emb, ds)).epsilon(1e-12));
  }
}

TEST_CASE("analogy accuracy is rotation invariant (property)") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const int dim = 2 + static_cast<int>(rng.below(9));
    const auto emb = support::random_embedding(rng, 60, dim);
    const auto ds = random_analogies(emb, rng, 80);
    const Matrix q = support::random_orthogonal(rng, dim);
    const Embedding rotated(emb.vocab(), emb.matrix() * q);
    CHECK(analogy_accuracy(emb, ds, 1).total == doctest::Approx(analogy_accuracy(rotated, ds, 1).total));
  }
}

TEST_CASE("analogy file round trip and sections") {
  support::TempDir dir;
  write(dir / "q.txt", ": capital-common-countries\nAthens Greece Baghdad Iraq\n: gram3-comparative\nbad worse big bigger\n");
  const auto ds = load_analogy(dir / "q.txt");
  REQUIRE(ds.size() == 2);
  CHECK(ds[0].category == "semantic");
  CHECK(ds[1].category == "syntactic");
  CHECK(ds[1].section == "gram3-comparative");
  save_analogy(ds, dir / "out.txt");
  const auto back = load_analogy(dir / "out.txt");
  CHECK(back[1].d == "bigger");
  CHECK(back[0].section == ds[0].section);
}

TEST_CASE("MSR conversion") {
  support::TempDir dir;
  write(dir / "joint.txt", "good better rough rougher\nbig bigger small smaller\n");
  const auto joint = convert_msr(dir / "joint.txt");
  REQUIRE(joint.size() == 2);
  CHECK(joint[0].d == "rougher");
  CHECK(joint[0].category == "syntactic");
  CHECK(joint[0].section == "msr");

  write(dir / "q.txt", "good better rough\nbig bigger small\n");
  write(dir / "a.txt", "rougher\nsmaller\n");
  const auto split = convert_msr(dir / "q.txt", dir / "a.txt");
  REQUIRE(split.size() == 2);
  CHECK(split[1].d == "smaller");
  write(dir / "short.txt", "rougher\n");
  CHECK_THROWS_AS(convert_msr(dir / "q.txt", dir / "short.txt"), Error);
}

TEST_CASE("tiny misp weights leave benchmark scores unchanged") {
  Rng rng(44);
  const auto emb = support::random_embedding(rng, 80, 8);
  GenderSubspace sub;
  sub.basis = Matrix::Zero(2, 8);
  sub.basis(0, 0) = 1.0;
  sub.basis(1, 1) = 1.0;
  sub.weights = {1e-12, 1e-12};
  const auto deb = misp(emb, sub, DebiasSpec{});
  const auto ds = random_analogies(emb, rng, 100);
  CHECK(analogy_accuracy(deb, ds, 1).total == analogy_accuracy(emb, ds, 1).total);
  const auto sim = cosine_scored(emb, rng, 40);
  CHECK(word_similarity(deb, sim).score == doctest::Approx(word_similarity(emb, sim).score).epsilon(1e-9));
}
