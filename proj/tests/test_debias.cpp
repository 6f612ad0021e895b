#include <doctest.h>

#include <cstring>

#include "embias/debias.hpp"
#include "support.hpp"

using namespace embias;

namespace {

GenderSubspace random_subspace(Rng& rng, int dim, int d) {
  DifferenceMatrix diffs;
  diffs.rows = support::random_matrix(rng, 4 * dim, dim);
  for (Eigen::Index j = 0; j < dim; ++j) diffs.rows.col(j) *= 1.0 + static_cast<double>(j);
  return principal_subspace(diffs, d, true);
}

GenderSubspace axis_subspace(int dim, std::vector<double> weights) {
  GenderSubspace sub;
  sub.basis = Matrix::Zero(static_cast<Eigen::Index>(weights.size()), dim);
  for (std::size_t i = 0; i < weights.size(); ++i) sub.basis(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = 1.0;
  sub.weights = std::move(weights);
  return sub;
}

DebiasSpec spec_for(DebiasMethod m) {
  DebiasSpec s;
  s.method = m;
  return s;
}

bool bit_identical(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

}  // namespace

TEST_CASE("hand-worked misp and mhd") {
  const auto sub = axis_subspace(3, {0.5});
  Matrix m(2, 3);
  m << 1, 0, 0,   // = g1
      0, 2, -1;   // orthogonal
  Embedding emb({"g", "o"}, m);
  const auto soft = misp(emb, sub, spec_for(DebiasMethod::Misp));
  CHECK(soft.row(0)(0) == 0.5);
  CHECK(soft.row(1) == emb.row(1));
  const auto hard = misp(emb, sub, spec_for(DebiasMethod::Mhd));
  CHECK(hard.row(0).norm() == 0.0);
  CHECK(hard.row(1) == emb.row(1));
}

TEST_CASE("exclude list leaves words byte-identical") {
  Rng rng(1);
  const auto emb = support::random_embedding(rng, 10, 6);
  const auto sub = random_subspace(rng, 6, 3);
  DebiasSpec spec;
  spec.exclude = WordList{"x", {"w2", "w7", "missing"}};
  const auto out = misp(emb, sub, spec);
  CHECK(out.vocab() == emb.vocab());
  for (std::size_t i : {2u, 7u}) {
    CHECK(std::memcmp(out.row(i).data(), emb.row(i).data(), sizeof(double) * 6) == 0);
  }
  CHECK(out.row(0) != emb.row(0));
}

TEST_CASE("debias options validation") {
  DebiasSpec s;
  s.method = DebiasMethod::Misp;
  s.permutation = Permutation{1, 2};
  CHECK_THROWS_AS(s.validate(2), Error);
  s.method = DebiasMethod::MispPermuted;
  CHECK_NOTHROW(s.validate(2));
  CHECK_THROWS_AS(s.validate(3), Error);
  s.permutation = Permutation{1, 1};
  CHECK_THROWS_AS(s.validate(2), Error);
  s.permutation.reset();
  CHECK_THROWS_AS(s.validate(2), Error);
  CHECK_THROWS_AS(parse_permutation("1203"), Error);
  CHECK(parse_permutation("1243") == Permutation{1, 2, 4, 3});
  CHECK(format_permutation({3, 1, 2}) == "312");
  CHECK_THROWS_AS(parse_debias_method("hd"), Error);
}

TEST_CASE("permuted weights follow position-names-weight labelling") {
  const auto sub = axis_subspace(4, {0.4, 0.3, 0.2, 0.1});
  DebiasSpec spec;
  spec.method = DebiasMethod::MispPermuted;
  spec.permutation = parse_permutation("1243");
  const auto w = effective_weights(sub, spec);
  CHECK(w == std::vector<double>{0.4, 0.3, 0.1, 0.2});

  Matrix m = Matrix::Identity(4, 4);
  Embedding emb({"a", "b", "c", "d"}, m);
  const auto out = misp(emb, sub, spec);
  CHECK(out.row(2)(2) == doctest::Approx(0.9));  // g3 got a4
  CHECK(out.row(3)(3) == doctest::Approx(0.8));  // g4 got a3
}

TEST_CASE("enumerate permutations") {
  CHECK(enumerate_permutations(1).size() == 1);
  const auto p3 = enumerate_permutations(3);
  std::vector<std::string> s3;
  for (const auto& p : p3) s3.push_back(format_permutation(p));
  CHECK(s3 == std::vector<std::string>{"123", "132", "213", "231", "312", "321"});
  const auto p4 = enumerate_permutations(4);
  CHECK(p4.size() == 24);
  CHECK(format_permutation(p4.front()) == "1234");
  CHECK(format_permutation(p4[1]) == "1243");
  CHECK_THROWS_AS(enumerate_permutations(9), Error);
  CHECK_THROWS_AS(enumerate_permutations(0), Error);
}

TEST_CASE("identity permutation is bit-identical to misp") {
  Rng rng(21);
  for (int d = 1; d <= 5; ++d) {
    const auto emb = support::random_embedding(rng, 40, 9);
    const auto sub = random_subspace(rng, 9, d);
    DebiasSpec spec;
    spec.method = DebiasMethod::MispPermuted;
    spec.permutation = enumerate_permutations(d).front();
    CHECK(bit_identical(misp(emb, sub, spec).matrix(), misp(emb, sub, spec_for(DebiasMethod::Misp)).matrix()));
  }
}

TEST_CASE("neutralize") {
  Matrix m(3, 2);
  m << 3, 0, 0, 2, 1, 1;
  Embedding emb({"par", "orth", "keep"}, m);
  const Vector g = Vector::Unit(2, 0);
  const auto out = neutralize(emb, g, WordList{"t", {"par", "orth"}});
  CHECK(out.row(0).norm() == 0.0);
  CHECK(out.row(1) == emb.row(1));
  CHECK(out.row(2) == emb.row(2));
  CHECK_THROWS_AS(neutralize(emb, Vector::Constant(2, 1.0), WordList{"t", {"par"}}), Error);
}

TEST_CASE("projection properties on random instances (property)") {
  Rng rng(1000);
  for (int trial = 0; trial < 100; ++trial) {
    const int dim = 3 + static_cast<int>(rng.below(10));
    const int d = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(std::min(dim - 1, 5))));
    const auto emb = support::random_embedding(rng, 30, dim);
    const auto sub = random_subspace(rng, dim, d);

    const auto hard = misp(emb, sub, spec_for(DebiasMethod::Mhd));
    const auto twice = misp(hard, sub, spec_for(DebiasMethod::Mhd));
    CHECK((twice.matrix() - hard.matrix()).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((hard.matrix() * sub.basis.transpose()).cwiseAbs().maxCoeff() < 1e-8);

    const auto soft = misp(emb, sub, spec_for(DebiasMethod::Misp));
    const Matrix before = emb.matrix() * sub.basis.transpose();
    const Matrix after = soft.matrix() * sub.basis.transpose();
    for (int i = 0; i < d; ++i) {
      const double a = sub.weights[static_cast<std::size_t>(i)];
      CHECK((after.col(i) - (1.0 - a) * before.col(i)).cwiseAbs().maxCoeff() < 1e-9);
    }
    for (std::size_t r = 0; r < emb.size(); ++r) CHECK(soft.row(r).norm() <= emb.row(r).norm() + 1e-12);

    GenderSubspace one;
    one.basis = sub.basis.topRows(1);
    one.weights = {sub.weights[0]};
    const Vector g = one.basis.row(0).transpose();
    const auto n1 = neutralize(emb, g, support::words_of(emb));
    const auto h1 = misp(emb, one, spec_for(DebiasMethod::Mhd));
    CHECK((n1.matrix() - h1.matrix()).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("misp rejects dimension mismatch") {
  Rng rng(2);
  const auto emb = support::random_embedding(rng, 5, 4);
  const auto sub = axis_subspace(3, {0.5});
  CHECK_THROWS_AS(misp(emb, sub, spec_for(DebiasMethod::Misp)), Error);
}
