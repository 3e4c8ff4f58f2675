#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace cbct {

/// Plain-text `key = value` configuration. Blank lines and lines starting
/// with '#' are ignored. Keys are case-sensitive and unique.
class KeyValueMap {
 public:
  static KeyValueMap parse(std::istream& in, const std::string& source = "<stream>");
  static KeyValueMap load(const std::filesystem::path& path);

  void save(const std::filesystem::path& path) const;
  void write(std::ostream& out) const;

  bool contains(const std::string& key) const;
  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, double value);
  void set(const std::string& key, long long value);

  std::string get_string(const std::string& key) const;
  double get_double(const std::string& key) const;
  long long get_int(const std::string& key) const;
  std::vector<double> get_doubles(const std::string& key) const;

  std::optional<double> find_double(const std::string& key) const;
  std::optional<long long> find_int(const std::string& key) const;
  std::optional<std::string> find_string(const std::string& key) const;

  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
  std::string source_ = "<memory>";
};

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

}  // namespace cbct
