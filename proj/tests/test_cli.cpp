#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "nrl/cli.hpp"
#include "nrl/error.hpp"

using namespace nrl;
using nlohmann::json;

namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("nrl_cli_test_" + name);
  fs::remove_all(p);
  return p;
}

// file content minus the leading timestamp comment
std::string body(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  const std::string s = ss.str();
  REQUIRE(s.rfind("# generated ", 0) == 0);
  return s.substr(s.find('\n') + 1);
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<std::string> store{"nrl_lab"};
  store.insert(store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : store) argv.push_back(a.data());
  return cli_main(static_cast<int>(argv.size()), argv.data());
}

fs::path write_config(const fs::path& dir, const json& j) {
  fs::create_directories(dir);
  const fs::path p = dir / "config.json";
  std::ofstream(p) << j.dump();
  return p;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::ConfigInvalid;
}

}  // namespace

TEST_CASE("command list") {
  CHECK(command_names().size() == 14);
  for (const auto& c : command_names()) CHECK_NOTHROW(parse_config({{"schema_version", 1}}, c));
}

TEST_CASE("config validation") {
  const json ok{{"schema_version", 1}};
  CHECK(code_of([&] { parse_config(json::array(), "star"); }) == ErrorCode::ConfigInvalid);
  CHECK(code_of([&] { parse_config(json::object(), "star"); }) == ErrorCode::ConfigInvalid);
  CHECK(code_of([&] { parse_config({{"schema_version", 2}}, "star"); }) == ErrorCode::ConfigInvalid);
  CHECK(code_of([&] { parse_config(ok, "nope"); }) == ErrorCode::ConfigInvalid);
  CHECK(code_of([&] { parse_config({{"schema_version", 1}, {"extra", 0}}, "star"); }) == ErrorCode::ConfigInvalid);
  CHECK(code_of([&] { parse_config({{"schema_version", 1}, {"command", "flow"}}, "star"); }) ==
        ErrorCode::ConfigInvalid);
  CHECK(code_of([&] { parse_config({{"schema_version", 1}, {"seed", -3}}, "star"); }) == ErrorCode::ConfigInvalid);
  CHECK(code_of([&] { parse_config({{"schema_version", 1}, {"metric", {{"d", "two"}}}}, "flow"); }) ==
        ErrorCode::ConfigInvalid);

  const auto c = parse_config({{"schema_version", 1}, {"seed", 7}, {"out", "x"}}, "star");
  CHECK(c.seed == 7);
  CHECK(c.out_dir == "x");
  CHECK(parse_config({{"schema_version", 1}, {"seed", 7}}, "star", 9).seed == 9);
}

TEST_CASE("unknown params and tolerances are rejected") {
  ExperimentConfig c = parse_config({{"schema_version", 1}, {"params", {{"bogus", 1}}}}, "b-order");
  CHECK(code_of([&] { run_experiment(c); }) == ErrorCode::ConfigInvalid);
  c = parse_config({{"schema_version", 1}, {"tolerances", {{"bogus", 1}}}}, "b-order");
  CHECK(code_of([&] { run_experiment(c); }) == ErrorCode::ConfigInvalid);
  c = parse_config({{"schema_version", 1}, {"params", {{"samples", "many"}}}}, "b-order");
  CHECK(code_of([&] { run_experiment(c); }) == ErrorCode::ConfigInvalid);
}

TEST_CASE("star command reports the x xi - i entry") {
  const Outcome o = run_experiment(parse_config({{"schema_version", 1}}, "star"));
  CHECK(o.passed());
  REQUIRE(o.tables.size() == 1);
  CHECK(o.tables[0].file == "star.csv");
  bool found = false;
  for (const auto& r : o.tables[0].rows) found |= r[0].find("x xi - i") != std::string::npos;
  CHECK(found);
}

TEST_CASE("tolerances drive the verdict") {
  const json small{{"samples", 2000}};
  ExperimentConfig c =
      parse_config({{"schema_version", 1}, {"params", small}, {"tolerances", {{"p0", 1e-20}}}}, "charset");
  CHECK_FALSE(run_experiment(c).passed());
  c = parse_config({{"schema_version", 1}, {"params", small}}, "charset");
  CHECK(run_experiment(c).passed());
}

TEST_CASE("experiment errors become failed checks") {
  // a zero-amplitude family member has P u = 0
  const json fam = json::array({{{"carrier", 0}, {"amplitude", 0.0}, {"center", {0.0, 0.0}}, {"width", {1.0, 1.0}},
                                 {"velocity", {0.0}}}});
  const Outcome o = run_experiment(
      parse_config({{"schema_version", 1}, {"params", {{"cs", {4.0}}, {"family", fam}}}}, "uniform-ratio"));
  CHECK_FALSE(o.passed());
  REQUIRE_FALSE(o.checks.empty());
  CHECK(o.checks.back().name.find("DegenerateFamily") != std::string::npos);
}

TEST_CASE("csv numbers") {
  CHECK(csv_number(0.1) == "0.1");
  CHECK(csv_number(1.0 / 3.0) == "0.333333333333333");
  CHECK(csv_number(-2.5e-300) == "-2.5e-300");
  CHECK(csv_number(std::nan("")) == "nan");
  CHECK(csv_number(-INFINITY) == "-inf");
}

TEST_CASE("cli exit codes and byte-identical reruns") {
  const fs::path dir = scratch("exit");
  const fs::path cfg = write_config(dir, {{"schema_version", 1}, {"params", {{"samples", 2000}}}});
  CHECK(run_cli({"charset", "--config", cfg.string(), "--out", (dir / "a").string()}) == 0);
  CHECK(run_cli({"charset", "--config", cfg.string(), "--out", (dir / "b").string()}) == 0);
  CHECK(body(dir / "a" / "charset.csv") == body(dir / "b" / "charset.csv"));
  CHECK(run_cli({"charset", "--config", cfg.string(), "--out", (dir / "c").string(), "--seed", "5"}) == 0);
  CHECK(body(dir / "a" / "charset.csv") != body(dir / "c" / "charset.csv"));
  CHECK(fs::exists(dir / "a" / "summary.json"));

  const auto bad = write_config(dir / "bad", {{"schema_version", 1}, {"metric", {{"d", 1}, {"beta", "x"}}}});
  CHECK(run_cli({"flow", "--config", bad.string(), "--out", (dir / "d").string()}) == 2);
  {
    std::ofstream(dir / "broken.json") << "{\"schema_version\": 1,";
  }
  CHECK(run_cli({"star", "--config", (dir / "broken.json").string()}) == 2);
  CHECK(run_cli({"star", "--config", (dir / "missing.json").string()}) == 2);
  CHECK(run_cli({"star"}) == 2);

  const auto strict = write_config(
      dir / "strict", {{"schema_version", 1}, {"params", {{"samples", 2000}}}, {"tolerances", {{"p0", 1e-20}}}});
  CHECK(run_cli({"charset", "--config", strict.string(), "--out", (dir / "e").string()}) == 1);
  CHECK(fs::exists(dir / "e" / "charset.csv"));  // artifacts still written on failure
  const json s = json::parse(std::ifstream(dir / "e" / "summary.json"));
  CHECK(s.at("passed") == false);
  fs::remove_all(dir);
}

TEST_CASE("csv layout") {
  const fs::path dir = scratch("layout");
  Outcome o;
  o.command = "star";
  o.tables.push_back({"t.csv", {"a", "b"}, {{"1", "x,y"}, {"2", "say \"hi\""}}});
  write_artifacts(o, dir.string());
  CHECK(body(dir / "t.csv") == "a,b\n1,\"x,y\"\n2,\"say \"\"hi\"\"\"\n");
  fs::remove_all(dir);
}
