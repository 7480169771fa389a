#include "doctest.h"

#include "sphfib/kv.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

namespace {

const std::string kCli = SPHFIB_CLI_PATH;
const std::string kTables = SPHFIB_TABLE_DIR;
const std::string kTmp = std::string(SPHFIB_BINARY_DIR) + "/cli_tmp";

struct RunResult {
  int exit_code;
  std::string out;
};

RunResult run(const std::string& args) {
  std::string outfile = kTmp + "_stdout.txt";
  std::string cmd = kCli + " --table-dir " + kTables + " " + args + " > " + outfile + " 2>/dev/null";
  int rc = std::system(cmd.c_str());
  std::ifstream in(outfile, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  int code = (rc == -1) ? -1 : WEXITSTATUS(rc);
  return {code, ss.str()};
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

}  // namespace

TEST_CASE("construct: hyperbolic 4-manifold data succeeds") {
  std::string prob = kTmp + "_n2.prob";
  write_file(prob,
             "problem_version = 1\nn = 2\nk = 2\nregime = auto\n"
             "matrix_kind = inverse\nmatrix = [[0, 1], [1, 0]]\n");
  std::string cert = kTmp + "_n2.cert";
  RunResult r = run("construct --input " + prob + " --out " + cert);
  CHECK(r.exit_code == 0);
  RunResult v = run("construct --verify --input " + cert);
  CHECK(v.exit_code == 0);
  CHECK(v.out.find("byte-identical") != std::string::npos);
}

TEST_CASE("construct: rank-2 even 8-manifold row with torsion (1,1)") {
  std::string prob = kTmp + "_n4.prob";
  write_file(prob,
             "problem_version = 1\nn = 4\nk = 2\nregime = auto\n"
             "matrix_kind = intersection\nmatrix = [[0, 1], [1, 0]]\n"
             "torsion = [1, 1]\n");
  std::string cert = kTmp + "_n4.cert";
  RunResult r = run("construct --input " + prob + " --out " + cert);
  CHECK(r.exit_code == 0);
  // row five of the rank-2 table: mu = 2 a1 + a2
  std::ifstream in(cert);
  std::ostringstream ss;
  ss << in.rdbuf();
  CHECK(ss.str().find("beta_mu1 = [2, 1]") != std::string::npos);
  RunResult v = run("construct --verify --input " + cert);
  CHECK(v.exit_code == 0);
}

TEST_CASE("construct: k = 1 is an input error") {
  std::string prob = kTmp + "_k1.prob";
  write_file(prob,
             "problem_version = 1\nn = 4\nk = 1\nregime = auto\n"
             "matrix_kind = inverse\nmatrix = [[1]]\n");
  RunResult r = run("construct --input " + prob);
  CHECK(r.exit_code == 1);
}

TEST_CASE("construct output is deterministic byte for byte") {
  std::string prob = kTmp + "_det.prob";
  write_file(prob,
             "problem_version = 1\nn = 2\nk = 3\nregime = auto\n"
             "matrix_kind = inverse\nmatrix = [[1,0,0],[0,1,0],[0,0,1]]\n");
  RunResult a = run("construct --input " + prob);
  RunResult b = run("construct --input " + prob);
  CHECK(a.exit_code == 0);
  CHECK(a.out == b.out);
}

TEST_CASE("hilbert: order 0 prints the constant term") {
  RunResult r = run("hilbert --n 2 --k 3 --order 0");
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("enveloping series (quotient algebra): 1\n") != std::string::npos);
}

TEST_CASE("hilbert: k = 3, n = 2 begins 1, 3, 8, 21, 55") {
  RunResult r = run("hilbert --n 2 --k 3 --order 4");
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("quotient algebra): 1 3 8 21 55") != std::string::npos);
}

TEST_CASE("hilbert: coefficient at t^6 for n = 4, k = 2 is 3") {
  RunResult r = run("hilbert --n 4 --k 2 --order 12");
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("quotient algebra): 1 0 0 2 0 0 3") != std::string::npos);
  CHECK(r.out.find("factorization identity: ok; rank relation: ok") != std::string::npos);
}

TEST_CASE("hilbert: order guard") {
  RunResult r = run("hilbert --n 2 --k 2 --order 100");
  CHECK(r.exit_code == 1);
}

TEST_CASE("search-n8 small bounds are empty") {
  RunResult r0 = run("search-n8 --bound 0");
  CHECK(r0.exit_code == 0);
  CHECK(r0.out.find("0 solution(s)") != std::string::npos);
  RunResult r1 = run("search-n8 --bound 1");
  CHECK(r1.exit_code == 0);
  RunResult guard = run("search-n8 --bound 25");
  CHECK(guard.exit_code == 1);
}

TEST_CASE("paper-examples all pass on a fresh checkout") {
  RunResult r = run("paper-examples");
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("FAIL") == std::string::npos);
  CHECK(r.out.find("0 failed") != std::string::npos);
}

TEST_CASE("paper-examples skips cleanly when a table is missing") {
  // point at an empty table dir: everything skips, nothing fails
  std::string dir = kTmp + "_notables";
  int rc_mkdir = std::system(("mkdir -p " + dir).c_str());
  (void)rc_mkdir;
  std::string cmd = kCli + " --table-dir " + dir + " paper-examples > " + kTmp +
                    "_skip.txt 2>/dev/null";
  int rc_run = std::system(cmd.c_str());
  (void)rc_run;
  std::ifstream in(kTmp + "_skip.txt");
  std::ostringstream ss;
  ss << in.rdbuf();
  CHECK(ss.str().find("SKIP  table n2") != std::string::npos);
  CHECK(ss.str().find("SKIP  n4 identities") != std::string::npos);
}

TEST_CASE("form-tools subcommands") {
  std::string mat = kTmp + "_form.kv";
  write_file(mat, "matrix = [[1,0,0],[0,1,0],[0,0,1]]\n");
  RunResult prim = run("form-tools primitive-divisible --input " + mat + " --m 3");
  CHECK(prim.exit_code == 0);
  CHECK(prim.out.find("v = 1 1 1") != std::string::npos);
  RunResult ext = run("form-tools extend-basis --vector 2,3");
  CHECK(ext.exit_code == 0);
  RunResult diag = run("form-tools diagonalize --input " + mat + " --p 3");
  CHECK(diag.exit_code == 0);
  RunResult chr = run("form-tools characteristic --input " + mat);
  CHECK(chr.exit_code == 0);
  CHECK(chr.out.find("characteristic = 1 1 1") != std::string::npos);
}

TEST_CASE("selftest") {
  RunResult r = run("selftest");
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("selftest: ok") != std::string::npos);
}
