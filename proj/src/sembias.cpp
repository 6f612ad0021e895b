#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "embias/intrinsic_metrics.hpp"

namespace embias {

namespace {

std::pair<std::string, std::string> parse_pair(const std::string& src, std::size_t line, std::string_view field) {
  const auto colon = field.find(':');
  if (colon == std::string_view::npos || colon == 0 || colon + 1 == field.size()) {
    throw ParseError(src, line, fmt::format("expected 'a:b' pair, got '{}'", field));
  }
  return {std::string(field.substr(0, colon)), std::string(field.substr(colon + 1))};
}

}  // namespace

SemBiasTag parse_sembias_tag(std::string_view s) {
  if (s == "def" || s == "definition" || s == "definitional") return SemBiasTag::Definitional;
  if (s == "stereo" || s == "stereotype" || s == "stereotypical") return SemBiasTag::Stereotypical;
  if (s == "other" || s == "none") return SemBiasTag::Other;
  throw Error(fmt::format("unknown SemBias tag '{}'", s));
}

std::string_view to_string(SemBiasTag t) {
  switch (t) {
    case SemBiasTag::Definitional: return "def";
    case SemBiasTag::Stereotypical: return "stereo";
    case SemBiasTag::Other: return "other";
  }
  return "?";
}

std::vector<SemBiasTuple> load_sembias(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(fmt::format("cannot open SemBias file {}", path.string()));
  const std::string src = path.string();
  std::vector<SemBiasTuple> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty() || trim(line).front() == '#') continue;
    auto fields = split(trim(line), '\t');
    if (fields.size() != 5) throw ParseError(src, lineno, "expected 4 pairs and a tag field");
    SemBiasTuple t;
    for (std::size_t i = 0; i < 4; ++i) t.pairs[i] = parse_pair(src, lineno, trim(fields[i]));
    auto tags = split(trim(fields[4]), ',');
    if (tags.size() != 4) throw ParseError(src, lineno, "expected 4 comma-separated tags");
    try {
      for (std::size_t i = 0; i < 4; ++i) t.tags[i] = parse_sembias_tag(trim(tags[i]));
    } catch (const Error& e) {
      throw ParseError(src, lineno, e.what());
    }
    out.push_back(std::move(t));
  }
  return out;
}

void save_sembias(const std::vector<SemBiasTuple>& tuples, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(fmt::format("cannot write {}", path.string()));
  for (const auto& t : tuples) {
    for (const auto& [a, b] : t.pairs) out << a << ':' << b << '\t';
    for (std::size_t i = 0; i < 4; ++i) out << (i ? "," : "") << to_string(t.tags[i]);
    out << '\n';
  }
}

std::vector<SemBiasTuple> convert_sembias_release(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(fmt::format("cannot open {}", path.string()));
  const std::string src = path.string();
  std::vector<SemBiasTuple> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::istringstream ss(line);
    std::vector<std::string> fields;
    for (std::string f; ss >> f;) fields.push_back(f);
    if (fields.size() != 4) throw ParseError(src, lineno, fmt::format("expected 4 pairs, found {}", fields.size()));
    SemBiasTuple t;
    for (std::size_t i = 0; i < 4; ++i) t.pairs[i] = parse_pair(src, lineno, fields[i]);
    t.tags = {SemBiasTag::Definitional, SemBiasTag::Stereotypical, SemBiasTag::Other, SemBiasTag::Other};
    out.push_back(std::move(t));
  }
  return out;
}

SemBiasResult sembias(const Embedding& emb, const std::vector<SemBiasTuple>& tuples, std::string_view fem,
                      std::string_view masc) {
  const Vector dir = emb.vector(masc) - emb.vector(fem);
  const double dir_norm = dir.norm();
  if (dir_norm < 1e-10) throw DegenerateDirectionError("sembias: masc - fem direction is degenerate");

  SemBiasResult r;
  std::size_t counts[3] = {0, 0, 0};
  for (const auto& t : tuples) {
    bool ok = true;
    std::array<double, 4> cos{};
    for (std::size_t i = 0; i < 4 && ok; ++i) {
      auto a = emb.index_of(t.pairs[i].first);
      auto b = emb.index_of(t.pairs[i].second);
      if (!a || !b) {
        ok = false;
        break;
      }
      const Vector diff = (emb.row(*a) - emb.row(*b)).transpose();
      const double n = diff.norm();
      cos[i] = n > 0.0 ? diff.dot(dir) / (n * dir_norm) : 0.0;
    }
    if (!ok) {
      ++r.dropped;
      continue;
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < 4; ++i) {
      if (cos[i] > cos[best]) best = i;
    }
    for (std::size_t i = 0; i < 4; ++i) {
      if (i != best && cos[i] == cos[best]) {
        ++r.ties;
        break;
      }
    }
    ++counts[static_cast<int>(t.tags[best])];
    ++r.retained;
  }
  if (r.dropped > 0) warn(fmt::format("sembias: dropped {} tuples with missing words", r.dropped));
  if (r.retained == 0) throw Error("sembias: no tuples retained");
  const double n = static_cast<double>(r.retained);
  r.def = counts[0] / n;
  r.stereo = counts[1] / n;
  r.other = counts[2] / n;
  return r;
}

}  // namespace embias
