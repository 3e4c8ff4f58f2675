#include "cbct/keyvalue.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "cbct/error.hpp"

namespace cbct {
namespace {

std::string trim(const std::string& text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = text.find_last_not_of(" \t\r\n");
  return text.substr(first, last - first + 1);
}

double parse_double(const std::string& text, const std::string& key, const std::string& source) {
  double value = 0.0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError(source + ": key '" + key + "' expects a number, got '" + text + "'");
  }
  return value;
}

}  // namespace

std::string format_double(double value) {
  char buffer[64];
  auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, ptr);
}

KeyValueMap KeyValueMap::parse(std::istream& in, const std::string& source) {
  KeyValueMap map;
  map.source_ = source;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const std::string content = trim(line);
    if (content.empty() || content.front() == '#') continue;
    const auto eq = content.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source + ":" + std::to_string(line_number) + ": expected 'key = value'");
    }
    const std::string key = trim(content.substr(0, eq));
    const std::string value = trim(content.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError(source + ":" + std::to_string(line_number) + ": empty key");
    }
    if (!map.entries_.emplace(key, value).second) {
      throw ConfigError(source + ":" + std::to_string(line_number) + ": duplicate key '" + key + "'");
    }
  }
  return map;
}

KeyValueMap KeyValueMap::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse(in, path.string());
}

void KeyValueMap::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write(out);
  if (!out) throw IoError("write failed for " + path.string());
}

void KeyValueMap::write(std::ostream& out) const {
  for (const auto& [key, value] : entries_) out << key << " = " << value << '\n';
}

bool KeyValueMap::contains(const std::string& key) const { return entries_.count(key) > 0; }

void KeyValueMap::set(const std::string& key, const std::string& value) { entries_[key] = value; }
void KeyValueMap::set(const std::string& key, double value) { entries_[key] = format_double(value); }
void KeyValueMap::set(const std::string& key, long long value) { entries_[key] = std::to_string(value); }

std::string KeyValueMap::get_string(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError(source_ + ": missing key '" + key + "'");
  return it->second;
}

double KeyValueMap::get_double(const std::string& key) const {
  return parse_double(get_string(key), key, source_);
}

long long KeyValueMap::get_int(const std::string& key) const {
  const std::string text = get_string(key);
  long long value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError(source_ + ": key '" + key + "' expects an integer, got '" + text + "'");
  }
  return value;
}

std::vector<double> KeyValueMap::get_doubles(const std::string& key) const {
  std::string text = get_string(key);
  for (char& c : text) {
    if (c == ',') c = ' ';
  }
  std::istringstream in(text);
  std::vector<double> values;
  std::string token;
  while (in >> token) values.push_back(parse_double(token, key, source_));
  return values;
}

std::optional<double> KeyValueMap::find_double(const std::string& key) const {
  if (!contains(key)) return std::nullopt;
  return get_double(key);
}

std::optional<long long> KeyValueMap::find_int(const std::string& key) const {
  if (!contains(key)) return std::nullopt;
  return get_int(key);
}

std::optional<std::string> KeyValueMap::find_string(const std::string& key) const {
  if (!contains(key)) return std::nullopt;
  return get_string(key);
}

}  // namespace cbct
