#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace humorgen {

/// Placeholder names a template may use, written `{name}` in the body.
inline const std::set<std::string>& known_placeholders() {
  static const std::set<std::string> names{"topic", "associations", "policy", "joke",
                                           "decompositions"};
  return names;
}

/// A named prompt body with `{placeholder}` slots. Every placeholder that occurs in the
/// body is required; unknown `{name}` markers are rejected at construction.
class PromptTemplate {
 public:
  static PromptTemplate make(std::string name, std::string body);

  const std::string& name() const noexcept { return name_; }
  const std::string& body() const noexcept { return body_; }
  const std::set<std::string>& required_placeholders() const noexcept { return required_; }
  /// SHA-256 of the body; recorded in manifests so generated corpora can be traced to prompts.
  const std::string& fingerprint() const noexcept { return fingerprint_; }

 private:
  PromptTemplate() = default;

  std::string name_;
  std::string body_;
  std::set<std::string> required_;
  std::string fingerprint_;
};

/// A list binding renders as "1. first\n2. second\n...".
using Binding = std::variant<std::string, std::vector<std::string>>;
using Bindings = std::map<std::string, Binding>;

std::string numbered_list(const std::vector<std::string>& items);

/// Literal single-pass substitution; substituted values are never rescanned.
/// Throws ConfigError("unbound placeholder: <name>") for a missing binding.
std::string render(const PromptTemplate& t, const Bindings& bindings);

/// Templates loaded from `<dir>/<name>.txt`.
class TemplateLibrary {
 public:
  static TemplateLibrary load(const std::filesystem::path& dir);
  static TemplateLibrary bundled();

  void add(PromptTemplate t);
  const PromptTemplate& get(const std::string& name) const;
  bool contains(const std::string& name) const { return templates_.contains(name); }
  std::map<std::string, std::string> fingerprints() const;

 private:
  std::map<std::string, PromptTemplate> templates_;
};

/// Names of the bundled templates.
namespace templates {
inline constexpr const char* kDecompose = "decompose_joke_v1";
inline constexpr const char* kDistill = "distill_policy_v1";
inline constexpr const char* kAssociations = "associations_v1";
inline constexpr const char* kExpand = "expand_associations_v1";
inline constexpr const char* kRefine = "refine_associations_v1";
inline constexpr const char* kJokes = "jokes_v1";
inline constexpr const char* kJokesNoAssoc = "jokes_no_assoc_v1";
inline constexpr const char* kZeroShot = "zero_shot_v1";
}  // namespace templates

/// Root of the bundled data directory (templates, word lists, schemas).
std::filesystem::path bundled_data_dir();

}  // namespace humorgen
