#include "embias/mab_testgen.hpp"

#include <cctype>
#include <fstream>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>

namespace embias {

namespace {

constexpr std::string_view kHeader = "id\tpremise\thypothesis\tgroup\tattribute_word\tset_kind\tword_category";

// Yields (line number, trimmed content) for non-blank, non-comment lines.
template <typename F>
void for_each_data_line(const std::filesystem::path& path, F&& f) {
  std::ifstream in(path);
  if (!in) throw Error(fmt::format("cannot open {}", path.string()));
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    f(lineno, t);
  }
}

std::string capitalize(std::string_view s) {
  std::string out(s);
  if (!out.empty()) out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  return out;
}

bool is_pronoun(const AttributeWord& w) {
  if (w.category == "pronoun") return true;
  if (!w.category.empty()) return false;
  const auto l = to_lower(w.word);
  return l == "he" || l == "she" || l == "they";
}

}  // namespace

SetKind parse_set_kind(std::string_view s) {
  if (s == "explicit") return SetKind::Explicit;
  if (s == "name" || s == "names") return SetKind::Name;
  if (s == "occupation" || s == "occupations") return SetKind::Occupation;
  throw Error(fmt::format("unknown set kind '{}'", s));
}

std::string_view to_string(SetKind k) {
  switch (k) {
    case SetKind::Explicit: return "explicit";
    case SetKind::Name: return "name";
    case SetKind::Occupation: return "occupation";
  }
  return "?";
}

std::size_t TemplateBank::premise_count() const {
  std::size_t n = 0;
  for (const auto& objs : pairing) n += objs.size();
  return n;
}

std::vector<std::pair<std::string, std::string>> TemplateBank::premises() const {
  std::vector<std::pair<std::string, std::string>> out;
  out.reserve(premise_count());
  for (std::size_t v = 0; v < verbs.size(); ++v) {
    for (const auto& o : pairing[v]) out.emplace_back(verbs[v], o);
  }
  return out;
}

TemplateBank load_templates(const std::filesystem::path& verbs_path, const std::filesystem::path& objects_path,
                            const std::filesystem::path& pairing_path, bool strict) {
  TemplateBank bank;
  std::unordered_map<std::string, std::size_t> verb_index;
  for_each_data_line(verbs_path, [&](std::size_t line, std::string_view t) {
    if (!verb_index.emplace(std::string(t), bank.verbs.size()).second) {
      throw ParseError(verbs_path.string(), line, fmt::format("duplicate verb '{}'", t));
    }
    bank.verbs.emplace_back(t);
  });

  std::unordered_map<std::string, std::size_t> object_index;
  std::unordered_map<std::string, std::vector<std::size_t>> categories;
  for_each_data_line(objects_path, [&](std::size_t line, std::string_view t) {
    auto fields = split(t, '\t');
    const std::string obj(trim(fields[0]));
    if (!object_index.emplace(obj, bank.objects.size()).second) {
      throw ParseError(objects_path.string(), line, fmt::format("duplicate object '{}'", obj));
    }
    if (fields.size() > 1) categories[std::string(trim(fields[1]))].push_back(bank.objects.size());
    bank.objects.push_back(obj);
  });

  bank.pairing.resize(bank.verbs.size());
  std::vector<bool> seen_verb(bank.verbs.size(), false);
  for_each_data_line(pairing_path, [&](std::size_t line, std::string_view t) {
    auto fields = split(t, '\t');
    const std::string verb(trim(fields[0]));
    auto v = verb_index.find(verb);
    if (v == verb_index.end()) throw ParseError(pairing_path.string(), line, fmt::format("unknown verb '{}'", verb));
    if (seen_verb[v->second]) throw ParseError(pairing_path.string(), line, fmt::format("verb '{}' paired twice", verb));
    seen_verb[v->second] = true;
    std::set<std::size_t> allowed;
    for (std::size_t i = 1; i < fields.size(); ++i) {
      const std::string item(trim(fields[i]));
      if (item.empty()) continue;
      if (item.front() == '@') {
        auto c = categories.find(item.substr(1));
        if (c == categories.end()) {
          throw ParseError(pairing_path.string(), line, fmt::format("unknown object category '{}'", item));
        }
        allowed.insert(c->second.begin(), c->second.end());
      } else {
        auto o = object_index.find(item);
        if (o == object_index.end()) {
          throw ParseError(pairing_path.string(), line, fmt::format("unknown object '{}'", item));
        }
        allowed.insert(o->second);
      }
    }
    for (auto o : allowed) bank.pairing[v->second].push_back(bank.objects[o]);
  });

  const auto n = bank.premise_count();
  if (n != kPaperPremiseCount) {
    const auto msg = fmt::format("template bank yields {} premises, expected {}", n, kPaperPremiseCount);
    if (strict) throw Error(msg);
    warn(msg);
  }
  return bank;
}

std::vector<AttributeWord> load_attribute_words(const std::filesystem::path& path) {
  std::vector<AttributeWord> out;
  std::unordered_set<std::string> seen;
  for_each_data_line(path, [&](std::size_t line, std::string_view t) {
    auto fields = split(t, '\t');
    AttributeWord w;
    w.word = std::string(trim(fields[0]));
    if (!seen.insert(w.word).second) throw ParseError(path.string(), line, fmt::format("duplicate word '{}'", w.word));
    if (fields.size() > 1 && !trim(fields[1]).empty()) {
      try {
        w.group = parse_group(trim(fields[1]));
      } catch (const Error& e) {
        throw ParseError(path.string(), line, e.what());
      }
    }
    if (fields.size() > 2) w.category = std::string(trim(fields[2]));
    out.push_back(std::move(w));
  });
  return out;
}

std::string ArticleRules::indefinite(std::string_view phrase) const {
  const auto space = phrase.find(' ');
  const auto first = to_lower(phrase.substr(0, space));
  if (auto it = exceptions.find(first); it != exceptions.end()) return capitalize(it->second);
  if (first.empty()) return "A";
  switch (first.front()) {
    case 'a': case 'e': case 'i': case 'o': case 'u': return "An";
    default: return "A";
  }
}

ArticleRules load_article_rules(const std::filesystem::path& path) {
  ArticleRules rules;
  for_each_data_line(path, [&](std::size_t line, std::string_view t) {
    auto fields = split(t, '\t');
    if (fields.size() != 2) throw ParseError(path.string(), line, "expected word<TAB>article");
    const auto article = to_lower(trim(fields[1]));
    if (article != "a" && article != "an") throw ParseError(path.string(), line, "article must be 'a' or 'an'");
    rules.exceptions[to_lower(trim(fields[0]))] = article;
  });
  return rules;
}

std::string make_pair_id(SetKind kind, std::string_view attribute_word, std::string_view verb, std::string_view object) {
  auto slug = [](std::string_view s) {
    std::string out(s);
    for (auto& c : out) {
      if (c == ' ' || c == '\t' || c == '/') c = '_';
    }
    return out;
  };
  return fmt::format("{}/{}/{}/{}", to_string(kind), slug(attribute_word), slug(verb), slug(object));
}

TestSet generate(const TemplateBank& bank, SetKind kind, const std::vector<AttributeWord>& attribute_words,
                 const ArticleRules& articles) {
  std::size_t n_m = 0, n_f = 0;
  for (const auto& w : attribute_words) {
    if (!w.group) throw Error(fmt::format("attribute word '{}' has no group label", w.word));
    (*w.group == Group::M ? n_m : n_f) += 1;
  }
  if ((kind == SetKind::Explicit || kind == SetKind::Name) && n_m != n_f) {
    throw Error(fmt::format("{} set needs balanced groups, got {} M and {} F", to_string(kind), n_m, n_f));
  }

  const auto premises = bank.premises();
  TestSet set;
  set.kind = kind;
  set.pairs.reserve(premises.size() * attribute_words.size());
  for (const auto& w : attribute_words) {
    std::string subject;
    std::string category = w.category;
    switch (kind) {
      case SetKind::Explicit:
        if (is_pronoun(w)) {
          subject = capitalize(w.word);
          if (category.empty()) category = "pronoun";
        } else {
          subject = "A " + w.word;
          if (category.empty()) category = "noun";
        }
        break;
      case SetKind::Name:
        subject = capitalize(w.word);
        if (category.empty()) category = "name";
        break;
      case SetKind::Occupation:
        subject = articles.indefinite(w.word) + " " + w.word;
        if (category.empty()) category = "occupation";
        break;
    }
    for (const auto& [verb, object] : premises) {
      SentencePair p;
      p.id = make_pair_id(kind, w.word, verb, object);
      p.premise = fmt::format("A person {} {}.", verb, object);
      p.hypothesis = fmt::format("{} {} {}.", subject, verb, object);
      p.group = *w.group;
      p.attribute_word = w.word;
      p.kind = kind;
      p.word_category = category;
      set.pairs.push_back(std::move(p));
    }
  }
  return set;
}

void save_testset(const TestSet& set, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(fmt::format("cannot write {}", path.string()));
  out << kHeader << '\n';
  for (const auto& p : set.pairs) {
    out << p.id << '\t' << p.premise << '\t' << p.hypothesis << '\t' << to_string(p.group) << '\t'
        << p.attribute_word << '\t' << to_string(p.kind) << '\t' << p.word_category << '\n';
  }
  if (!out) throw Error(fmt::format("write failed: {}", path.string()));
}

TestSet load_testset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(fmt::format("cannot open test set {}", path.string()));
  const std::string src = path.string();
  TestSet set;
  std::string line;
  std::size_t lineno = 0;
  bool first = true;
  std::unordered_set<std::string> ids;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line != kHeader) throw ParseError(src, lineno, "unexpected test-set header");
      continue;
    }
    auto f = split(line, '\t');
    if (f.size() != 7) throw ParseError(src, lineno, fmt::format("expected 7 fields, found {}", f.size()));
    SentencePair p;
    p.id = f[0];
    p.premise = f[1];
    p.hypothesis = f[2];
    try {
      p.group = parse_group(f[3]);
      p.kind = parse_set_kind(f[5]);
    } catch (const Error& e) {
      throw ParseError(src, lineno, e.what());
    }
    p.attribute_word = f[4];
    p.word_category = f[6];
    if (!ids.insert(p.id).second) throw ParseError(src, lineno, fmt::format("duplicate id '{}'", p.id));
    if (set.pairs.empty()) set.kind = p.kind;
    set.pairs.push_back(std::move(p));
  }
  return set;
}

}  // namespace embias
