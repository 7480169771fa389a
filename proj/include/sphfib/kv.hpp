#pragma once

#include "sphfib/ring.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace sphfib {

// Structured text: "key = value" lines, '#' comments, values are integers,
// strings, or (nested) lists of values. Emission order is insertion order,
// so files round-trip byte for byte.
class KvValue {
 public:
  using List = std::vector<KvValue>;

  KvValue() : v_(Integer(0)) {}
  KvValue(Integer i) : v_(std::move(i)) {}
  KvValue(long long i) : v_(Integer(i)) {}
  KvValue(std::string s) : v_(std::move(s)) {}
  KvValue(const char* s) : v_(std::string(s)) {}
  KvValue(List l) : v_(std::move(l)) {}

  bool is_int() const { return std::holds_alternative<Integer>(v_); }
  bool is_str() const { return std::holds_alternative<std::string>(v_); }
  bool is_list() const { return std::holds_alternative<List>(v_); }

  const Integer& as_int() const;
  const std::string& as_str() const;
  const List& as_list() const;

  // Conversion helpers for the common shapes.
  IntVec as_int_vec() const;
  IntMatrix as_int_matrix() const;
  static KvValue from_int_vec(const IntVec& v);
  static KvValue from_int_matrix(const IntMatrix& m);

  std::string str() const;

 private:
  std::variant<Integer, std::string, List> v_;
};

class KvFile {
 public:
  void add(const std::string& key, KvValue v);
  bool has(const std::string& key) const;
  // First entry with the key; throws std::out_of_range when missing.
  const KvValue& get(const std::string& key) const;
  const KvValue* find(const std::string& key) const;
  std::vector<const KvValue*> get_all(const std::string& key) const;
  const std::vector<std::pair<std::string, KvValue>>& entries() const { return entries_; }

  std::string serialize() const;
  static KvFile parse(const std::string& text);
  static KvFile load(const std::string& path);
  void save(const std::string& path) const;

 private:
  std::vector<std::pair<std::string, KvValue>> entries_;
};

// FNV-1a 64-bit over raw bytes, reported as fixed-width hex.
std::string fnv1a_hex(const std::string& bytes);
std::string file_checksum(const std::string& path);

}  // namespace sphfib
