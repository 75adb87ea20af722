#include <doctest.h>

#include <set>

#include "cli_harness.hpp"
#include "stub_server.hpp"
#include "temp_dir.hpp"

using namespace aigt;
using testing::run_cli;

namespace {

const testing::Step& find(const std::vector<testing::Step>& steps, const std::string& name) {
  for (const auto& s : steps) {
    if (s.name == name) return s;
  }
  FAIL("no step " << name);
  throw std::logic_error("unreachable");
}

json read_json_file(const std::filesystem::path& p) { return json::parse(testing::read_file(p)); }

std::vector<json> read_jsonl_file(const std::filesystem::path& p) {
  std::vector<json> out;
  std::istringstream in(testing::read_file(p));
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) out.push_back(json::parse(line));
  }
  return out;
}

}  // namespace

TEST_CASE("usage errors exit 1") {
  CHECK(run_cli({}).code == 1);
  CHECK(run_cli({"frobnicate"}).code == 1);
  CHECK(run_cli({"tune"}).code == 1);
  CHECK(run_cli({"--help"}).code == 0);
  const auto r = run_cli({"ingest", "--input", "/nonexistent/in.jsonl"});
  CHECK(r.code == 1);
}

TEST_CASE("a missing endpoint names the flags to set") {
  testing::TempDir tmp;
  testing::write_file(tmp / "c.jsonl", testing::toy_corpus_jsonl(2, 1));
  const auto r = run_cli({"--out", (tmp / "runs").string(), "detect", "--input", (tmp / "c.jsonl").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("--chat-url") != std::string::npos);
}

TEST_CASE("filter on the shipped fixtures") {
  testing::TempDir tmp;
  const std::string fx = std::string(AIGT_SOURCE_DIR) + "/data/fixtures/filter_examples/";
  const auto r = run_cli({"--out", (tmp / "runs").string(), "filter", "--texts", fx + "texts.jsonl", "--completions",
                          fx + "completions.jsonl"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("RETAINED 1 WRONG_PREDICTION 1 PARSE_ERROR 4") != std::string::npos);
  const auto dir = r.run_dir();
  CHECK(read_jsonl_file(dir / "sft.jsonl").size() == 1);
  const auto grpo = read_jsonl_file(dir / "grpo.jsonl");
  CHECK(grpo.size() == 5);
  for (const auto& g : grpo) CHECK_FALSE(g.contains("rationale"));
  CHECK(read_json_file(dir / "filter_report.json").at("counts").at("PARSE_ERROR") == 4);
  CHECK(read_json_file(dir / "manifest.json").at("subcommand") == "filter");
}

TEST_CASE("the full pipeline against the stub, then again from cache with the stub stopped") {
  testing::TempDir tmp;
  toy::StubServer server;
  const auto steps = testing::run_pipeline(tmp.path(), server.url());
  for (const auto& s : steps) {
    INFO(s.name, "\n", s.result.err);
    CHECK(s.result.code == 0);
    CHECK(std::filesystem::exists(s.result.run_dir() / "manifest.json"));
  }

  const auto scores = read_jsonl_file(find(steps, "score").result.run_dir() / "scores.jsonl");
  std::set<std::string> scorers;
  for (const auto& s : scores) scorers.insert(s.at("scorer").get<std::string>());
  CHECK(scorers.size() == 9);

  const auto eval = read_json_file(find(steps, "eval-domain").result.run_dir() / "eval.json");
  CHECK(eval.at("scorers").size() == 9);
  const auto cmp = testing::read_file(find(steps, "report").result.run_dir() / "comparison.md");
  CHECK(cmp.find("likelihood") != std::string::npos);

  const auto stats = read_json_file(find(steps, "detect").result.run_dir() / "stats.json");
  CHECK(stats.dump().find("\"fer\"") != std::string::npos);
  const auto diag = read_json_file(find(steps, "diagnose").result.run_dir() / "diagnose.json");
  CHECK(diag.dump().find("consistency") != std::string::npos);
  CHECK(std::filesystem::exists(find(steps, "diagnose").result.run_dir() / "probe.csv"));
  CHECK(diag.contains("probe"));
  CHECK_FALSE(diag.contains("probe_skipped"));
  const auto judged = read_jsonl_file(find(steps, "teach").result.run_dir() / "judge.jsonl");
  CHECK_FALSE(judged.empty());
  const auto adv = read_jsonl_file(find(steps, "trainmath").result.run_dir() / "advantages.jsonl");
  REQUIRE(adv.size() == 3);
  CHECK(adv[0].at("advantage").get<double>() > adv[2].at("advantage").get<double>());

  const auto attacked = read_jsonl_file(find(steps, "attack-paraphrase").result.run_dir() / "attacked.jsonl");
  bool changed = false;
  for (const auto& a : attacked) changed |= a.contains("attack");
  CHECK(changed);

  std::map<std::string, std::map<std::string, std::string>> first;
  for (const auto& s : steps) first[s.name] = testing::snapshot(s.result.run_dir());
  const auto before = server.requests();
  server.stop();

  for (const auto& s : steps) {
    const auto again = run_cli(s.args);
    INFO(s.name, "\n", again.err);
    CHECK(again.code == 0);
    CHECK(again.run_dir() == s.result.run_dir());
    CHECK(testing::snapshot(again.run_dir()) == first[s.name]);
  }
  CHECK(server.requests() == before);
}

TEST_CASE("an unreachable endpoint with a cold cache exits 2 after writing outputs") {
  testing::TempDir tmp;
  testing::write_file(tmp / "c.jsonl", testing::toy_corpus_jsonl(2, 1));
  toy::StubServer server;
  const auto url = server.url();
  server.stop();
  const auto r = run_cli({"--out", (tmp / "runs").string(), "--cache-dir", (tmp / "cache").string(), "--chat-url", url,
                          "--chat-model", "m", "detect", "--input", (tmp / "c.jsonl").string()});
  CHECK(r.code == 2);
  const auto verdicts = read_jsonl_file(r.run_dir() / "verdicts.jsonl");
  REQUIRE(verdicts.size() == 4);
  for (const auto& v : verdicts) CHECK(v.at("outcome") == "TRANSPORT_FAILED");
}

TEST_CASE("serial and parallel scoring name the same run and write the same bytes") {
  testing::TempDir tmp;
  toy::StubServer server;
  testing::write_file(tmp / "c.jsonl", testing::toy_corpus_jsonl(6, 3));
  auto go = [&](const std::string& exec) {
    return run_cli({"--out", (tmp / "runs").string(), "--cache-dir", (tmp / "cache").string(), "--score-url",
                    server.url(), "--score-model", "m", "score", "--input", (tmp / "c.jsonl").string(), "--scorer",
                    "likelihood,entropy,fast-detectgpt", "--exec", exec});
  };
  const auto a = go("serial");
  REQUIRE(a.code == 0);
  const auto snap = testing::snapshot(a.run_dir());
  const auto b = go("parallel");
  REQUIRE(b.code == 0);
  CHECK(b.run_dir() == a.run_dir());
  CHECK(testing::snapshot(b.run_dir()) == snap);
}
