#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "embias/common.hpp"

namespace embias {

enum class SetKind { Explicit, Name, Occupation };

/// Accepts "explicit", "name"/"names", "occupation"/"occupations".
SetKind parse_set_kind(std::string_view s);
std::string_view to_string(SetKind k);

inline constexpr std::size_t kPaperPremiseCount = 1968;

/// Verbs, objects, and which objects each verb may take.
struct TemplateBank {
  std::vector<std::string> verbs;
  std::vector<std::string> objects;
  /// Allowed objects per verb, in object-file order. Same order as `verbs`.
  std::vector<std::vector<std::string>> pairing;

  std::size_t premise_count() const;
  /// (verb, object) pairs in verb order, then object order.
  std::vector<std::pair<std::string, std::string>> premises() const;
};

/// Verbs: one per line. Objects: `object[<TAB>category]` per line.
/// Pairing: `verb<TAB>item<TAB>item...` where an item is an object or
/// `@category`. Unknown verbs, objects, or categories are located errors.
/// A premise count other than 1968 warns, or throws when `strict`.
TemplateBank load_templates(const std::filesystem::path& verbs_path, const std::filesystem::path& objects_path,
                            const std::filesystem::path& pairing_path, bool strict = false);

struct AttributeWord {
  std::string word;
  std::optional<Group> group;
  /// noun, pronoun, name, occupation, ...
  std::string category;
};

/// `word<TAB>group[<TAB>category]` per line; `#` comments.
std::vector<AttributeWord> load_attribute_words(const std::filesystem::path& path);

/// Exceptions to the vowel-initial "An" rule, keyed by lowercase first word.
struct ArticleRules {
  std::map<std::string, std::string> exceptions;

  /// "A" or "An" for the given noun phrase.
  std::string indefinite(std::string_view phrase) const;
};

/// `word<TAB>a|an` per line.
ArticleRules load_article_rules(const std::filesystem::path& path);

struct SentencePair {
  std::string id;
  std::string premise;
  std::string hypothesis;
  Group group = Group::M;
  std::string attribute_word;
  SetKind kind = SetKind::Explicit;
  std::string word_category;
};

struct TestSet {
  SetKind kind = SetKind::Explicit;
  std::vector<SentencePair> pairs;
};

/// Stable id from (kind, attribute word, verb, object).
std::string make_pair_id(SetKind kind, std::string_view attribute_word, std::string_view verb,
                         std::string_view object);

/// Cross product of premises and attribute words, attribute-word major.
/// Explicit and name sets must have equally many M and F words.
TestSet generate(const TemplateBank& bank, SetKind kind, const std::vector<AttributeWord>& attribute_words,
                 const ArticleRules& articles = {});

/// Tab-separated with a header row: id, premise, hypothesis, group,
/// attribute_word, set_kind, word_category.
void save_testset(const TestSet& set, const std::filesystem::path& path);
TestSet load_testset(const std::filesystem::path& path);

}  // namespace embias
