#include <doctest.h>

#include <fstream>

#include "embias/embedding_store.hpp"
#include "support.hpp"

using namespace embias;

namespace {

void write(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

}  // namespace

TEST_CASE("load three 2-dim vectors") {
  support::TempDir dir;
  write(dir / "e.txt", "cat 0.5 1\ndog -1 2e-3\nfish 3 4\n");
  LoadStats stats;
  const auto emb = load_embeddings(dir / "e.txt", {}, &stats);
  CHECK(emb.size() == 3);
  CHECK(emb.dim() == 2);
  CHECK(emb.word(1) == "dog");
  CHECK(emb.vector("dog")(1) == doctest::Approx(0.002));
  CHECK(*emb.index_of("fish") == 2);
  CHECK(stats.lines == 3);
  CHECK_FALSE(stats.had_header);
}

TEST_CASE("vocab filter keeps only listed words in file order") {
  support::TempDir dir;
  write(dir / "e.txt", "cat 0.5 1\ndog -1 2\nfish 3 4\n");
  WordList keep{"k", {"fish"}};
  LoadOptions opts;
  opts.vocab_filter = &keep;
  const auto one = load_embeddings(dir / "e.txt", opts);
  CHECK(one.size() == 1);
  CHECK(one.word(0) == "fish");

  WordList two{"k", {"fish", "cat", "zebra"}};
  opts.vocab_filter = &two;
  const auto e2 = load_embeddings(dir / "e.txt", opts);
  REQUIRE(e2.size() == 2);
  CHECK(e2.word(0) == "cat");
  CHECK(e2.word(1) == "fish");
}

TEST_CASE("malformed line is reported with its line number") {
  support::TempDir dir;
  std::string text;
  for (int i = 0; i < 10; ++i) text += (i == 6 ? "w6 1.0 abc\n" : "w" + std::to_string(i) + " 1.0 2.0\n");
  write(dir / "bad.txt", text);
  try {
    load_embeddings(dir / "bad.txt");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 7);
    CHECK(std::string(e.what()).find(":7:") != std::string::npos);
  }

  write(dir / "dim.txt", "a 1 2\nb 1 2 3\n");
  try {
    load_embeddings(dir / "dim.txt");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("dimension is checked even on filtered-out lines") {
  support::TempDir dir;
  write(dir / "e.txt", "a 1 2\nb 1 2 3\n");
  WordList keep{"k", {"a"}};
  LoadOptions opts;
  opts.vocab_filter = &keep;
  CHECK_THROWS_AS(load_embeddings(dir / "e.txt", opts), ParseError);
}

TEST_CASE("empty file, duplicates, header, non-finite") {
  support::TempDir dir;
  write(dir / "empty.txt", "");
  CHECK_THROWS_AS(load_embeddings(dir / "empty.txt"), Error);

  write(dir / "dup.txt", "a 1 2\nb 3 4\na 5 6\n");
  LoadStats stats;
  const auto emb = load_embeddings(dir / "dup.txt", {}, &stats);
  CHECK(emb.size() == 2);
  CHECK(stats.duplicates == 1);
  CHECK(emb.vector("a")(0) == 1.0);

  write(dir / "hdr.txt", "2 3\na 1 2 3\nb 4 5 6\n");
  const auto h = load_embeddings(dir / "hdr.txt", {}, &stats);
  CHECK(stats.had_header);
  CHECK(h.size() == 2);
  CHECK(h.dim() == 3);

  write(dir / "nan.txt", "a 1 nan\n");
  CHECK_THROWS_AS(load_embeddings(dir / "nan.txt"), ParseError);
}

TEST_CASE("lookup falls back to lowercase") {
  Matrix m(2, 1);
  m << 1, 2;
  Embedding emb({"he", "Paris"}, m);
  CHECK(*emb.index_of("He") == 0);
  CHECK(*emb.index_of("Paris") == 1);
  CHECK_FALSE(emb.index_of("paris").has_value());
  CHECK_THROWS_AS(emb.vector("nobody"), NotFoundError);
}

TEST_CASE("constructor rejects duplicates and non-finite values") {
  Matrix m(2, 1);
  m << 1, 2;
  CHECK_THROWS_AS(Embedding({"a", "a"}, m), Error);
  CHECK_THROWS_AS(Embedding({"a"}, m), Error);
  m(1, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(Embedding({"a", "b"}, m), Error);
}

TEST_CASE("save/load round trip") {
  support::TempDir dir;
  Rng rng(11);
  auto emb = support::random_embedding(rng, 25, 7);
  save_embeddings(emb, dir / "rt.txt");
  const auto back = load_embeddings(dir / "rt.txt");
  REQUIRE(back.vocab() == emb.vocab());
  CHECK((back.matrix() - emb.matrix()).cwiseAbs().maxCoeff() <= 1e-6);

  SUBCASE("tiny components survive") {
    Matrix m = Matrix::Zero(1, 300);
    m(0, 17) = 1e-12;
    m(0, 299) = -3.25e-12;
    save_embeddings(Embedding({"tiny"}, m), dir / "tiny.txt");
    const auto t = load_embeddings(dir / "tiny.txt");
    CHECK(t.row(0)(17) == doctest::Approx(1e-12).epsilon(1e-8));
    CHECK(t.row(0)(299) == doctest::Approx(-3.25e-12).epsilon(1e-8));
  }

  SUBCASE("empty embedding") {
    save_embeddings(Embedding({}, Matrix(0, 0)), dir / "empty.txt");
    CHECK(std::filesystem::file_size(dir / "empty.txt") == 0);
    LoadOptions opts;
    opts.allow_empty = true;
    CHECK(load_embeddings(dir / "empty.txt", opts).size() == 0);
  }
}

TEST_CASE("word lists") {
  support::TempDir dir;
  write(dir / "w.txt", "# comment\nalpha\n\nbeta\nalpha\n  gamma  \n");
  const auto wl = load_wordlist(dir / "w.txt");
  CHECK(wl.words == std::vector<std::string>{"alpha", "beta", "gamma"});
  save_wordlist(wl, dir / "w2.txt");
  CHECK(load_wordlist(dir / "w2.txt").words == wl.words);
}

TEST_CASE("punctuation and numeric filter") {
  CHECK(is_punct_or_numeric("3"));
  CHECK(is_punct_or_numeric("c!") == false);
  CHECK(is_punct_or_numeric("..."));
  CHECK(is_punct_or_numeric("mp3"));
  CHECK_FALSE(is_punct_or_numeric("don't"));
  CHECK_FALSE(is_punct_or_numeric("caf\xc3\xa9"));
}

TEST_CASE("build_target_vocab") {
  auto make = [](std::vector<std::string> words) {
    return Embedding(words, Matrix::Ones(static_cast<Eigen::Index>(words.size()), 2));
  };
  SUBCASE("toy digit/punct/gendered filter") {
    // "c!" has an alphabetic byte, so only digit-bearing and letterless tokens go.
    const auto a = make({"a", "b", "3", "c!"});
    const auto b = make({"a", "b", "3", "c!"});
    const auto vt = build_target_vocab(a, b, WordList{"g", {"b"}}, 4);
    CHECK(vt.words == std::vector<std::string>{"a", "c!"});
  }
  SUBCASE("pure punctuation") {
    const auto a = make({"a", "b", "3", "!!"});
    const auto vt = build_target_vocab(a, a, WordList{"g", {"b"}}, 4);
    CHECK(vt.words == std::vector<std::string>{"a"});
  }
  SUBCASE("disjoint vocabularies") {
    CHECK(build_target_vocab(make({"a", "b"}), make({"c", "d"}), {}, 2).empty());
  }
  SUBCASE("prefixes are taken per embedding, order follows the first") {
    const auto a = make({"x", "y", "z", "w"});
    const auto b = make({"z", "x", "w", "y"});
    CHECK(build_target_vocab(a, b, {}, 2).words == std::vector<std::string>{"x"});
    CHECK(build_target_vocab(a, b, {}, 3).words == std::vector<std::string>{"x", "z"});
    CHECK(build_target_vocab(a, b, {}, 10).words.size() == 4);  // clamped
  }
}

TEST_CASE("target vocab never contains excluded tokens (property)") {
  Rng rng(5);
  const std::vector<std::string> pool{"he", "she", "nurse", "x1", "!?", "doctor", "tree", "42", "it's", "king"};
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::string> va = pool, vb = pool;
    rng.shuffle(va);
    rng.shuffle(vb);
    WordList gendered{"g", {"he", "she", "king"}};
    const auto vt = build_target_vocab(Embedding(va, Matrix::Zero(10, 1)), Embedding(vb, Matrix::Zero(10, 1)),
                                       gendered, 1 + rng.below(10));
    for (const auto& w : vt.words) {
      CHECK_FALSE(is_punct_or_numeric(w));
      CHECK(std::find(gendered.words.begin(), gendered.words.end(), w) == gendered.words.end());
    }
  }
}
