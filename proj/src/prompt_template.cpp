#include "humorgen/prompt_template.hpp"

#include <cstdlib>

#include "humorgen/error.hpp"
#include "humorgen/hash.hpp"
#include "humorgen/records.hpp"

namespace humorgen {

namespace {

bool placeholder_char(char c) { return (c >= 'a' && c <= 'z') || c == '_'; }

// Calls on_text(literal) and on_slot(name) in body order.
template <class Text, class Slot>
void scan(const std::string& body, Text&& on_text, Slot&& on_slot) {
  std::size_t pos = 0;
  std::size_t literal_start = 0;
  while (pos < body.size()) {
    if (body[pos] == '{') {
      std::size_t end = pos + 1;
      while (end < body.size() && placeholder_char(body[end])) ++end;
      if (end < body.size() && body[end] == '}' && end > pos + 1) {
        on_text(std::string_view(body).substr(literal_start, pos - literal_start));
        on_slot(body.substr(pos + 1, end - pos - 1));
        pos = end + 1;
        literal_start = pos;
        continue;
      }
    }
    ++pos;
  }
  on_text(std::string_view(body).substr(literal_start));
}

}  // namespace

PromptTemplate PromptTemplate::make(std::string name, std::string body) {
  if (name.empty()) throw ConfigError("template name is empty");
  PromptTemplate t;
  scan(
      body, [](std::string_view) {},
      [&](const std::string& slot) {
        if (!known_placeholders().contains(slot)) {
          throw ConfigError("template '" + name + "' uses unknown placeholder {" + slot + "}");
        }
        t.required_.insert(slot);
      });
  t.fingerprint_ = sha256_hex(body);
  t.name_ = std::move(name);
  t.body_ = std::move(body);
  return t;
}

std::string numbered_list(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += '\n';
    out += std::to_string(i + 1) + ". " + items[i];
  }
  return out;
}

std::string render(const PromptTemplate& t, const Bindings& bindings) {
  for (const auto& name : t.required_placeholders()) {
    if (!bindings.contains(name)) throw ConfigError("unbound placeholder: " + name);
  }
  std::string out;
  out.reserve(t.body().size() * 2);
  scan(
      t.body(), [&](std::string_view text) { out += text; },
      [&](const std::string& slot) {
        const Binding& b = bindings.at(slot);
        if (const auto* s = std::get_if<std::string>(&b)) {
          out += *s;
        } else {
          out += numbered_list(std::get<std::vector<std::string>>(b));
        }
      });
  return out;
}

TemplateLibrary TemplateLibrary::load(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw ConfigError("template directory not found: " + dir.string());
  }
  TemplateLibrary lib;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
    std::string body = read_text_file(entry.path());
    if (!body.empty() && body.back() == '\n') body.pop_back();
    lib.add(PromptTemplate::make(entry.path().stem().string(), std::move(body)));
  }
  return lib;
}

TemplateLibrary TemplateLibrary::bundled() { return load(bundled_data_dir() / "templates"); }

void TemplateLibrary::add(PromptTemplate t) {
  auto name = t.name();
  templates_.insert_or_assign(std::move(name), std::move(t));
}

const PromptTemplate& TemplateLibrary::get(const std::string& name) const {
  auto it = templates_.find(name);
  if (it == templates_.end()) throw ConfigError("template not found: " + name);
  return it->second;
}

std::map<std::string, std::string> TemplateLibrary::fingerprints() const {
  std::map<std::string, std::string> out;
  for (const auto& [name, t] : templates_) out[name] = t.fingerprint();
  return out;
}

std::filesystem::path bundled_data_dir() {
  if (const char* env = std::getenv("HUMORGEN_DATA_DIR"); env && *env) return env;
  return HUMORGEN_DATA_DIR;
}

}  // namespace humorgen
