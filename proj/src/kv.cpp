#include "sphfib/kv.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace sphfib {

const Integer& KvValue::as_int() const {
  if (!is_int()) throw std::invalid_argument("kv: expected integer, got " + str());
  return std::get<Integer>(v_);
}

const std::string& KvValue::as_str() const {
  if (!is_str()) throw std::invalid_argument("kv: expected string, got " + str());
  return std::get<std::string>(v_);
}

const KvValue::List& KvValue::as_list() const {
  if (!is_list()) throw std::invalid_argument("kv: expected list, got " + str());
  return std::get<List>(v_);
}

IntVec KvValue::as_int_vec() const {
  IntVec out;
  for (const auto& e : as_list()) out.push_back(e.as_int());
  return out;
}

IntMatrix KvValue::as_int_matrix() const {
  const List& rows = as_list();
  std::size_t r = rows.size();
  std::size_t c = r ? rows[0].as_list().size() : 0;
  IntMatrix m(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    const List& row = rows[i].as_list();
    if (row.size() != c) throw std::invalid_argument("kv: ragged matrix");
    for (std::size_t j = 0; j < c; ++j) m.at(i, j) = row[j].as_int();
  }
  return m;
}

KvValue KvValue::from_int_vec(const IntVec& v) {
  List l;
  for (const auto& x : v) l.emplace_back(x);
  return KvValue(std::move(l));
}

KvValue KvValue::from_int_matrix(const IntMatrix& m) {
  List rows;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    List row;
    for (std::size_t j = 0; j < m.cols(); ++j) row.emplace_back(m.at(i, j));
    rows.emplace_back(std::move(row));
  }
  return KvValue(std::move(rows));
}

namespace {

bool bare_ok(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '-' ||
          c == '\'' || c == '/'))
      return false;
  // Bare strings must not parse as integers.
  bool digits = true;
  for (std::size_t i = (s[0] == '-' ? 1 : 0); i < s.size(); ++i)
    digits = digits && std::isdigit(static_cast<unsigned char>(s[i]));
  return !digits;
}

}  // namespace

std::string KvValue::str() const {
  if (is_int()) return as_int().str();
  if (is_str()) {
    const std::string& s = as_str();
    if (bare_ok(s)) return s;
    std::string out = "\"";
    for (char c : s) {
      if (c == '"' || c == '\\') out += '\\';
      out += c;
    }
    return out + "\"";
  }
  std::string out = "[";
  const List& l = as_list();
  for (std::size_t i = 0; i < l.size(); ++i) out += (i ? ", " : "") + l[i].str();
  return out + "]";
}

void KvFile::add(const std::string& key, KvValue v) { entries_.emplace_back(key, std::move(v)); }

bool KvFile::has(const std::string& key) const { return find(key) != nullptr; }

const KvValue* KvFile::find(const std::string& key) const {
  for (const auto& [k, v] : entries_)
    if (k == key) return &v;
  return nullptr;
}

const KvValue& KvFile::get(const std::string& key) const {
  const KvValue* v = find(key);
  if (!v) throw std::out_of_range("kv: missing key '" + key + "'");
  return *v;
}

std::vector<const KvValue*> KvFile::get_all(const std::string& key) const {
  std::vector<const KvValue*> out;
  for (const auto& [k, v] : entries_)
    if (k == key) out.push_back(&v);
  return out;
}

std::string KvFile::serialize() const {
  std::ostringstream os;
  for (const auto& [k, v] : entries_) os << k << " = " << v.str() << "\n";
  return os.str();
}

namespace {

struct Cursor {
  const std::string& s;
  std::size_t i = 0;
  int line = 1;
  bool eof() const { return i >= s.size(); }
  char peek() const { return s[i]; }
  void skip_ws() {
    while (!eof() && (s[i] == ' ' || s[i] == '\t')) ++i;
  }
  [[noreturn]] void fail(const std::string& why) const {
    throw std::invalid_argument("kv parse error (line " + std::to_string(line) + "): " + why);
  }
};

KvValue parse_value(Cursor& c);

KvValue parse_scalar(Cursor& c) {
  c.skip_ws();
  if (c.eof()) c.fail("expected value");
  if (c.peek() == '"') {
    ++c.i;
    std::string out;
    while (!c.eof() && c.peek() != '"') {
      if (c.peek() == '\\') ++c.i;
      if (c.eof()) c.fail("unterminated string");
      out += c.s[c.i++];
    }
    if (c.eof()) c.fail("unterminated string");
    ++c.i;
    return KvValue(out);
  }
  std::string tok;
  while (!c.eof()) {
    char ch = c.peek();
    if (ch == ',' || ch == ']' || ch == '\n' || ch == '#' || ch == ' ' || ch == '\t') break;
    tok += ch;
    ++c.i;
  }
  if (tok.empty()) c.fail("empty value token");
  bool numeric = true;
  for (std::size_t i = (tok[0] == '-' ? 1 : 0); i < tok.size(); ++i)
    numeric = numeric && std::isdigit(static_cast<unsigned char>(tok[i]));
  numeric = numeric && !(tok == "-");
  if (numeric) return KvValue(Integer(tok));
  return KvValue(tok);
}

KvValue parse_value(Cursor& c) {
  c.skip_ws();
  if (c.eof()) c.fail("expected value");
  if (c.peek() != '[') return parse_scalar(c);
  ++c.i;
  KvValue::List items;
  for (;;) {
    c.skip_ws();
    if (c.eof()) c.fail("unterminated list");
    if (c.peek() == ']') {
      ++c.i;
      break;
    }
    items.push_back(parse_value(c));
    c.skip_ws();
    if (c.eof()) c.fail("unterminated list");
    if (c.peek() == ',') {
      ++c.i;
      continue;
    }
    if (c.peek() == ']') {
      ++c.i;
      break;
    }
    c.fail("expected ',' or ']' in list");
  }
  return KvValue(std::move(items));
}

}  // namespace

KvFile KvFile::parse(const std::string& text) {
  KvFile f;
  Cursor c{text};
  while (!c.eof()) {
    c.skip_ws();
    if (c.eof()) break;
    if (c.peek() == '\n') {
      ++c.i;
      ++c.line;
      continue;
    }
    if (c.peek() == '#') {
      while (!c.eof() && c.peek() != '\n') ++c.i;
      continue;
    }
    std::string key;
    while (!c.eof() && c.peek() != '=' && c.peek() != '\n') key += c.s[c.i++];
    while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
    if (c.eof() || c.peek() != '=') c.fail("expected '=' after key '" + key + "'");
    ++c.i;
    KvValue v = parse_value(c);
    c.skip_ws();
    if (!c.eof() && c.peek() == '#')
      while (!c.eof() && c.peek() != '\n') ++c.i;
    if (!c.eof()) {
      if (c.peek() != '\n') c.fail("trailing characters after value for key '" + key + "'");
      ++c.i;
      ++c.line;
    }
    f.add(key, std::move(v));
  }
  return f;
}

KvFile KvFile::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void KvFile::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << serialize();
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

std::string file_checksum(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return fnv1a_hex(ss.str());
}

}  // namespace sphfib
