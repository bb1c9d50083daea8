#include <doctest.h>

#include <sstream>

#include "ctcalign/cli.hpp"
#include "ctcalign/filter.hpp"
#include "ctcalign/serialize.hpp"
#include "ctcalign/synth.hpp"
#include "test_util.hpp"

using namespace ctcalign;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "ctc-align");
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

// Writes a synthetic letter through the CLI and returns its directory.
std::filesystem::path make_letter(const test::TempDir& dir, const std::string& id, const std::vector<std::string>& lines,
                                  double noise, std::uint64_t seed) {
  Json spec{{"letter_id", id}, {"lines", lines}, {"noise", noise}, {"seed", seed}, {"steps_per_char", 2}};
  const auto spec_path = dir / (id + "_spec.json");
  write_file(spec_path, spec.dump());
  const auto letter_dir = dir / id;
  const auto r = run({"synth", "--spec", spec_path.string(), "--alphabet", CTCALIGN_TEST_DATA "/alphabet79.txt",
                      "--out-dir", letter_dir.string()});
  REQUIRE(r.code == 0);
  CHECK(r.out == (letter_dir / "manifest.json").generic_string() + "\n");
  return letter_dir;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("synth, align, eval and filter") {
    test::TempDir dir;
    const auto letter = make_letter(dir, "A1", {"Lieber Herr Bruder", "ich danke Euch", "", "fuer den Brief"}, 0.0, 1);
    std::filesystem::create_directories(dir / "aligned");
    const auto aligned = dir / "aligned" / "A1.json";
    auto r = run({"align", "--manifest", (letter / "manifest.json").string(), "--transcription",
                  (letter / "transcription.txt").string(), "--out", aligned.string()});
    REQUIRE(r.code == 0);
    CHECK(r.err.find("letter=A1 lines=4") != std::string::npos);
    const auto result = load_alignment(aligned);
    CHECK(result.letter_id == "A1");
    REQUIRE(result.lines.size() == 4);
    CHECK(result.lines[0].text == "Lieber Herr Bruder");
    CHECK(result.lines[0].line_id == "A1_l000");
    CHECK(result.lines[2].text.empty());

    const auto keys = Json::parse(read_file(aligned));
    std::vector<std::string> order;
    for (const auto& [k, v] : keys.items()) order.push_back(k);
    CHECK(order == std::vector<std::string>{"letter_id", "total_log_prob", "runtime_seconds", "lines"});

    r = run({"eval", "--gt", (letter / "ground_truth.json").string(), "--pred", aligned.string(), "--per-letter"});
    REQUIRE(r.code == 0);
    const auto report = Json::parse(r.out);
    CHECK(report.at("line_accuracy") == 1.0);
    CHECK(report.at("cer") == 0.0);
    CHECK(report.contains("confidence_buckets"));
    CHECK(report.at("letters").size() == 1);

    const auto manifest = dir / "train.jsonl";
    r = run({"filter", "--alignments", (dir / "aligned" / "*.json").string(), "--threshold", "0.5", "--out", manifest.string()});
    REQUIRE(r.code == 0);
    CHECK(r.err.find("kept 3 of 4 lines") != std::string::npos);
    const auto m = manifest_from_jsonl(read_file(manifest));
    CHECK(m.entries.size() == 3);
    REQUIRE(m.sources.size() == 1);
    CHECK(m.sources[0].sha256 == sha256_hex(read_file(aligned)));

    r = run({"filter", "--alignments", aligned.string(), "--sweep", "0:1:0.1"});
    REQUIRE(r.code == 0);
    std::istringstream rows(r.out);
    std::string row;
    std::size_t count = 0;
    std::getline(rows, row);
    CHECK(row == "threshold\tkept");
    while (std::getline(rows, row)) ++count;
    CHECK(count == 10);

    r = run({"filter", "--alignments", aligned.string(), "--previous", manifest.string(), "--out",
             (dir / "next.jsonl").string()});
    REQUIRE(r.code == 0);
    CHECK(r.err.find("iteration 1: added=0 removed=0 modified=0") != std::string::npos);

    r = run({"stats", "--manifest", (letter / "manifest.json").string(), "--alignments", aligned.string()});
    REQUIRE(r.code == 0);
    const auto stats = Json::parse(r.out);
    CHECK(stats.at("summary").at("letters") == 1);
    CHECK(stats.at("summary").at("ratio").get<double>() >= 1.0);
  }

  TEST_CASE("eval on plain line sets") {
    test::TempDir dir;
    write_file(dir / "gt.json", R"({"letter_id": "L", "lines": ["one", "two", "three", "four"]})");
    write_file(dir / "pred.json", R"({"letter_id": "L", "lines": ["one", "two", "thre", "four"]})");
    const auto r = run({"eval", "--gt", (dir / "gt.json").string(), "--pred", (dir / "pred.json").string(), "--out",
                        (dir / "report.json").string()});
    REQUIRE(r.code == 0);
    const auto report = Json::parse(read_file(dir / "report.json"));
    CHECK(report.at("line_accuracy") == 0.75);
    CHECK_FALSE(report.contains("confidence_buckets"));
  }

  TEST_CASE("input errors exit with 1") {
    test::TempDir dir;
    const auto letter = make_letter(dir, "E", {"abc"}, 0.0, 1);
    std::filesystem::remove(letter / "line_000.ctcp");
    auto r = run({"align", "--manifest", (letter / "manifest.json").string(), "--transcription",
                  (letter / "transcription.txt").string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("line_000.ctcp") != std::string::npos);

    write_file(dir / "bad.json", "{\"letter_id\": ");
    r = run({"eval", "--gt", (dir / "bad.json").string(), "--pred", (dir / "bad.json").string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("bad.json") != std::string::npos);
    CHECK(r.err.find("parse error") != std::string::npos);

    r = run({"filter", "--alignments", (dir / "nothing*.json").string()});
    CHECK(r.code == 1);
    r = run({"align", "--manifest", "a.json"});
    CHECK(r.code == 1);
    r = run({"frobnicate"});
    CHECK(r.code == 1);
    r = run({"--help"});
    CHECK(r.code == 0);
    CHECK(r.out.find("align") != std::string::npos);
  }

  TEST_CASE("infeasible letters exit with 2") {
    test::TempDir dir;
    const auto letter = make_letter(dir, "I", {"ab"}, 0.0, 1);
    write_file(dir / "long.txt", "abababababababab\n");
    const auto r = run({"align", "--manifest", (letter / "manifest.json").string(), "--transcription",
                        (dir / "long.txt").string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("error:") != std::string::npos);
  }

  TEST_CASE("outputs do not depend on the worker count") {
    test::TempDir dir;
    std::vector<std::string> args_base{"align"};
    for (int k = 0; k < 6; ++k) {
      const auto id = "W" + std::to_string(k);
      const auto letter = make_letter(dir, id, {"das ist Zeile eins", "und Zeile zwei", "und drei"}, 0.4, k);
      args_base.insert(args_base.end(), {"--manifest", (letter / "manifest.json").string(), "--transcription",
                                         (letter / "transcription.txt").string()});
    }
    std::vector<std::string> snapshots;
    for (const char* workers : {"1", "4"}) {
      auto args = args_base;
      const auto out = dir / (std::string("out") + workers);
      args.insert(args.end(), {"--out-dir", out.string(), "--workers", workers, "--omit-runtime"});
      REQUIRE(run(args).code == 0);
      std::string all;
      for (int k = 0; k < 6; ++k) all += read_file(out / ("W" + std::to_string(k) + ".json"));
      const auto manifest = dir / (std::string("m") + workers + ".jsonl");
      REQUIRE(run({"filter", "--alignments", (out / "*.json").string(), "--out", manifest.string()}).code == 0);
      const auto m = read_file(manifest);
      all += m.substr(m.find('\n'));
      snapshots.push_back(all);
    }
    CHECK(snapshots[0] == snapshots[1]);
  }
}
