#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

const fs::path kScratch = fs::temp_directory_path() / "litechain_cli_test";

struct Outcome {
  int status = -1;
  std::string err;
};

Outcome cli(const std::string& args) {
  fs::create_directories(kScratch);
  const auto err = kScratch / "stderr.txt";
  const std::string cmd = std::string(LITECHAIN_CLI) + " " + args + " > /dev/null 2> " + err.string();
  const int raw = std::system(cmd.c_str());
  Outcome o;
  o.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  std::ifstream in(err);
  std::stringstream ss;
  ss << in.rdbuf();
  o.err = ss.str();
  return o;
}

std::string scenario(const char* name) { return std::string(LITECHAIN_SCENARIOS) + "/" + name; }

}  // namespace

TEST_CASE("missing or malformed config exits 2") {
  auto o = cli("run --config /nonexistent.json --out " + (kScratch / "x").string());
  CHECK(o.status == 2);
  CHECK(o.err.find("cannot open") != std::string::npos);

  const auto bad = kScratch / "bad.json";
  std::ofstream(bad) << R"({"devices": 20, "fl": {"learning_rate": "fast"}})";
  o = cli("run --config " + bad.string());
  CHECK(o.status == 2);
  CHECK(o.err.find("fl.learning_rate: expected a number") != std::string::npos);

  std::ofstream(bad) << R"({"devices": 20,)";
  CHECK(cli("run --config " + bad.string()).status == 2);

  o = cli("run --config " + scenario("desk20.json") + " --set fl.nope=1");
  CHECK(o.status == 2);
  CHECK(o.err.find("fl.nope: unknown field") != std::string::npos);
}

TEST_CASE("run writes metrics and a summary") {
  const auto out = kScratch / "run";
  fs::remove_all(out);
  const auto o = cli("run --config " + scenario("desk20.json") + " --seed 3 --out " + out.string());
  REQUIRE(o.status == 0);
  for (const char* f : {"metrics.csv", "summary.json", "accuracy_grid.csv", "ledger.txt"}) {
    CHECK(fs::exists(out / f));
  }

  SUBCASE("verify-ledger accepts the export and names a corrupted height") {
    CHECK(cli("verify-ledger " + (out / "ledger.txt").string()).status == 0);

    std::ifstream in(out / "ledger.txt");
    std::string header, line;
    std::getline(in, header);
    std::vector<std::string> lines;
    while (std::getline(in, line)) lines.push_back(line);
    REQUIRE(lines.size() > 3);
    // Flip one hex digit of block 2's model id (third space-separated field onward).
    auto& victim = lines[2];
    std::size_t pos = 0;
    for (int spaces = 0; spaces < 3; ++pos) spaces += victim[pos] == ' ';
    victim[pos + 5] = victim[pos + 5] == '0' ? '1' : '0';
    const auto height = victim.substr(0, victim.find(' '));
    const auto corrupt = kScratch / "corrupt.txt";
    std::ofstream outf(corrupt);
    outf << header << '\n';
    for (const auto& l : lines) outf << l << '\n';
    outf.close();
    const auto v = cli("verify-ledger " + corrupt.string());
    CHECK(v.status == 1);
    CHECK(v.err.find("height " + height) != std::string::npos);
  }
}

TEST_CASE("LITECHAIN_OUT_DIR overrides --out") {
  const auto env = kScratch / "env";
  fs::remove_all(env);
  const auto o = cli("run --config " + scenario("desk20.json") + " --set stop.max_rounds=2 --out " +
                     (kScratch / "ignored").string());
  REQUIRE(o.status == 0);
  ::setenv("LITECHAIN_OUT_DIR", env.string().c_str(), 1);
  CHECK(cli("run --config " + scenario("desk20.json") + " --set stop.max_rounds=2").status == 0);
  ::unsetenv("LITECHAIN_OUT_DIR");
  CHECK(fs::exists(env / "metrics.csv"));
}

TEST_CASE("sweep, security and storage subcommands") {
  const auto out = kScratch / "sweep";
  fs::remove_all(out);
  auto o = cli("sweep --config " + scenario("desk20.json") +
               " --field fl.learning_rate --values 0.02,0.05 --jobs 2 --set stop.max_rounds=5 --out " + out.string());
  REQUIRE(o.status == 0);
  CHECK(fs::exists(out / "sweep.csv"));
  CHECK(fs::exists(out / "fl.learning_rate=0.02" / "metrics.csv"));
  CHECK(fs::exists(out / "fl.learning_rate=0.05" / "summary.json"));

  CHECK(cli("sweep --config " + scenario("desk20.json") + " --field fl.bogus --values 1").status == 2);

  const auto sec = kScratch / "security.csv";
  o = cli("security --config " + scenario("desk20.json") + " --range medium --trials 3 --devices 12 --csv " +
          sec.string());
  CHECK(o.status == 0);
  std::ifstream s(sec);
  std::string line;
  int n = 0;
  while (std::getline(s, line)) ++n;
  CHECK(n == 4);
  CHECK(cli("security --config " + scenario("desk20.json") + " --range extreme").status == 2);

  const auto st = kScratch / "storage.csv";
  CHECK(cli("storage --config " + scenario("desk20.json") + " --rounds 3 --csv " + st.string()).status == 0);
  std::ifstream t(st);
  std::getline(t, line);
  CHECK(line == "round,litechain,flc_hash,flc_model");
}
