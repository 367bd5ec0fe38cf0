#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dgpg {

// Minimal "key = value" text format with [section] headers and '#' comments.
// Keys appearing before any header belong to the section "".
struct KvEntry {
  std::string key;
  std::string value;
  int line = 0;
};

struct KvSection {
  std::string name;
  int line = 0;
  std::vector<KvEntry> entries;
};

class KvDocument {
 public:
  static KvDocument parse(const std::string& text, const std::string& source = "<string>");
  static KvDocument load(const std::filesystem::path& path);

  const std::vector<KvSection>& sections() const noexcept { return sections_; }
  const KvSection* find(const std::string& name) const;
  const std::string& source() const noexcept { return source_; }

 private:
  std::string source_;
  std::vector<KvSection> sections_;
};

// Value conversions; throw std::invalid_argument naming the key on failure.
double parse_double(const std::string& key, const std::string& value);
long parse_long(const std::string& key, const std::string& value);
bool parse_bool(const std::string& key, const std::string& value);
std::vector<std::string> split_list(const std::string& value, char sep = ',');

}  // namespace dgpg
