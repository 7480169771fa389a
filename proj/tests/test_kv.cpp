#include "doctest.h"

#include "sphfib/kv.hpp"

using namespace sphfib;

TEST_CASE("kv round trip") {
  KvFile f;
  f.add("version", KvValue(1));
  f.add("name", KvValue("hello world"));
  f.add("vec", KvValue::from_int_vec({Integer(1), Integer(-2), Integer(3)}));
  f.add("mat", KvValue::from_int_matrix(IntMatrix{{1, 2}, {3, 4}}));
  f.add("nested", KvValue(KvValue::List{KvValue("a"), KvValue(KvValue::List{KvValue(1)})}));
  std::string text = f.serialize();
  KvFile g = KvFile::parse(text);
  CHECK(g.serialize() == text);
  CHECK(g.get("version").as_int() == 1);
  CHECK(g.get("name").as_str() == "hello world");
  CHECK(g.get("vec").as_int_vec()[1] == -2);
  CHECK(g.get("mat").as_int_matrix().at(1, 0) == 3);
}

TEST_CASE("kv parses comments, bare tokens and big integers") {
  std::string text =
      "# a comment line\n"
      "big = 123456789012345678901234567890\n"
      "word = nu'   # trailing comment\n"
      "list = [1, -2,3]\n";
  KvFile f = KvFile::parse(text);
  CHECK(f.get("big").as_int() == Integer("123456789012345678901234567890"));
  CHECK(f.get("word").as_str() == "nu'");
  CHECK(f.get("list").as_int_vec().size() == 3);
}

TEST_CASE("kv rejects malformed input") {
  CHECK_THROWS(KvFile::parse("novalue\n"));
  CHECK_THROWS(KvFile::parse("x = [1, 2\n"));
  CHECK_THROWS(KvFile::parse("x = \"unterminated\n"));
}

TEST_CASE("repeated keys are preserved in order") {
  KvFile f = KvFile::parse("a = 1\nb = 2\na = 3\n");
  auto all = f.get_all("a");
  REQUIRE(all.size() == 2);
  CHECK(all[0]->as_int() == 1);
  CHECK(all[1]->as_int() == 3);
}

TEST_CASE("checksums are stable") {
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
}
