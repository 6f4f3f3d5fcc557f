#include <doctest.h>

#include <sstream>

#include "dipsent/corpus.hpp"
#include "dipsent/engine.hpp"
#include "support.hpp"

using namespace dipsent;

namespace {

std::string dump_of(std::span<const int> design, std::string_view prefix) {
  std::ostringstream out;
  serialize_dump(test::synthetic_corpus(design, prefix), out);
  return out.str();
}

struct PipelineOutput {
  std::string ingest;
  std::string score;
  std::string run;
  std::string corpus;
  std::string dataset;
  std::string log;
  std::string report;
};

PipelineOutput pipeline(const std::filesystem::path& dump, std::string_view name) {
  const auto dir = test::fresh_dir(name);
  const auto s = [&](const char* f) { return (dir / f).string(); };
  PipelineOutput o;
  auto r = test::cli({"ingest", "--dump", dump.string(), "--out", s("corpus.jsonl")});
  REQUIRE(r.code == 0);
  o.ingest = r.out;
  r = test::cli({"score", "--corpus", s("corpus.jsonl"), "--out", s("dataset.jsonl")});
  REQUIRE(r.code == 0);
  o.score = r.out;
  r = test::cli({"run", "--dataset", s("dataset.jsonl"), "--log", s("runs.jsonl"), "--dry-run"});
  REQUIRE(r.code == 0);
  o.run = r.out;
  r = test::cli({"report", "--breakdown", s("runs.jsonl"), "--format", "delimited"});
  REQUIRE(r.code == 0);
  o.report = r.out;
  o.corpus = test::read_file(dir / "corpus.jsonl");
  o.dataset = test::read_file(dir / "dataset.jsonl");
  o.log = test::read_file(dir / "runs.jsonl");
  return o;
}

}  // namespace

TEST_CASE("usage errors and help") {
  CHECK(test::cli({}).code == 2);
  CHECK(test::cli({"frobnicate"}).code == 2);
  CHECK(test::cli({"--help"}).code == 0);
  CHECK(test::cli({"ingest"}).code == 2);
  const auto r = test::cli({"report", "--format", "plain"});
  CHECK(r.code == 2);
  CHECK(r.err.find("report needs") != std::string::npos);
  CHECK(test::cli({"--tau", "0", "ingest", "--dump", test::data_path("mock_table.txt").string()})
            .code == 2);
  CHECK(test::cli({"--selection", "greedy", "report", "--breakdown",
                   test::data_path("mock_table.txt").string()})
            .code == 2);
}

TEST_CASE("committed example dumps match the synthetic designs") {
  CHECK(test::read_file(test::data_path("examples/desk_scale_dump.jsonl")) ==
        dump_of(test::desk_scale_design(), "desk"));
  CHECK(test::read_file(test::data_path("examples/three_event_dump.jsonl")) ==
        dump_of(test::three_event_design(), "evt"));
}

TEST_CASE("ingest reports counts and writes the linked corpus") {
  const auto dir = test::fresh_dir("cli-ingest");
  test::write_file(dir / "dump.jsonl",
                   dump_of(test::three_event_design(), "evt") +
                       R"({"kind":"post","id":"lonely","title":"No replies","body":"","event_type":"Summit","actor_tags":[],"theme_tags":[]})"
                       "\n");
  const auto r = test::cli({"ingest", "--dump", (dir / "dump.jsonl").string(), "--skipped",
                            (dir / "skipped.jsonl").string()});
  CHECK(r.code == 0);
  CHECK(r.out == "posts=4 comments=9 skipped=1\n");
  CHECK(test::read_file(dir / "skipped.jsonl").find("lonely") != std::string::npos);
}

TEST_CASE("orphan comments fail the item with exit code 1") {
  const auto dir = test::fresh_dir("cli-orphan");
  test::write_file(dir / "dump.jsonl",
                   R"({"kind":"comment","id":"c1","post_id":"ghost","text":"x","vote_score":1})"
                   "\n");
  const auto r = test::cli({"score", "--corpus", (dir / "dump.jsonl").string(), "--out",
                            (dir / "dataset.jsonl").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("orphan_comment") != std::string::npos);
  CHECK(r.err.find("ghost") != std::string::npos);
}

TEST_CASE("three-event pipeline is byte deterministic") {
  const auto dump = test::data_path("examples/three_event_dump.jsonl");
  const auto a = pipeline(dump, "cli-pipe-a");
  const auto b = pipeline(dump, "cli-pipe-b");
  CHECK(a.ingest == "posts=3 comments=9 skipped=0\n");
  CHECK(a.score == "events=3 skipped=0 negative=3 neutral=0 positive=0\n");
  CHECK(a.run == "mode=sequential matched=3 already_logged=0 written=3 success=2 failure=1 "
                 "error=0\n");
  CHECK(a.corpus == test::read_file(dump));
  CHECK(a.dataset == b.dataset);
  CHECK(a.log == b.log);
  CHECK(a.report == b.report);
  CHECK(a.log.find(R"("run_id":"run-evt-001")") != std::string::npos);
  CHECK(a.report.find("\nTotal,2,100.00,66.67\n") != std::string::npos);
  CHECK(a.report.find("\nfailure_share,33.33\n") != std::string::npos);
}

TEST_CASE("run resumes without rewriting logged events") {
  const auto dir = test::fresh_dir("cli-resume");
  const auto dataset = (dir / "dataset.jsonl").string();
  const auto log = (dir / "runs.jsonl").string();
  REQUIRE(test::cli({"score", "--corpus", test::data_path("examples/three_event_dump.jsonl").string(),
                     "--out", dataset})
              .code == 0);
  REQUIRE(test::cli({"run", "--dataset", dataset, "--log", log, "--dry-run"}).code == 0);
  const auto before = test::read_file(log);
  const auto r = test::cli({"run", "--dataset", dataset, "--log", log, "--dry-run"});
  CHECK(r.code == 0);
  CHECK(r.out.find("already_logged=3 written=0") != std::string::npos);
  CHECK(test::read_file(log) == before);
}

TEST_CASE("desk-scale run reports 35 of 50") {
  const auto dir = test::fresh_dir("cli-desk");
  const auto dataset = (dir / "dataset.jsonl").string();
  REQUIRE(test::cli({"score", "--corpus", test::data_path("examples/desk_scale_dump.jsonl").string(),
                     "--out", dataset, "--matrix-dir", (dir / "matrix").string()})
              .code == 0);
  CHECK(std::filesystem::exists(dir / "matrix" / "actor_matrix.csv"));
  CHECK(std::filesystem::exists(dir / "matrix" / "theme_matrix.csv"));
  const auto r = test::cli({"--concurrency", "4", "run", "--dataset", dataset, "--log",
                            (dir / "runs.jsonl").string(), "--dry-run"});
  CHECK(r.code == 0);
  CHECK(r.out.find("matched=50") != std::string::npos);
  CHECK(r.out.find("success=35 failure=15 error=0") != std::string::npos);
}

TEST_CASE("ablate and report") {
  const auto dir = test::fresh_dir("cli-ablate");
  const auto dataset = (dir / "dataset.jsonl").string();
  const auto log = (dir / "ablation.jsonl").string();
  REQUIRE(test::cli({"score", "--corpus", test::data_path("examples/three_event_dump.jsonl").string(),
                     "--out", dataset})
              .code == 0);
  const auto r = test::cli({"ablate", "--dataset", dataset, "--log", log, "--dry-run",
                            "--modifications", "communication.tone,context.location"});
  CHECK(r.code == 0);
  CHECK(r.out.find("mode=ablation matched=3") != std::string::npos);
  CHECK(r.out.find("written=6") != std::string::npos);
  const auto rep = test::cli({"report", "--ablation", log, "--format", "structured"});
  CHECK(rep.code == 0);
  CHECK(rep.out.find("communication.tone") != std::string::npos);

  CHECK(test::cli({"ablate", "--dataset", dataset, "--log", log, "--modifications", "bogus.key"})
            .code == 2);
}

TEST_CASE("report on the fixture run log") {
  const auto dir = test::fresh_dir("cli-report");
  {
    RunLog log(dir / "runs.jsonl");
    for (const auto& run : test::expand_breakdown(
             test::load_breakdown_counts(test::data_path("fixtures/breakdown_counts.csv")))) {
      log.append(run);
    }
  }
  const auto r = test::cli({"report", "--breakdown", (dir / "runs.jsonl").string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("Participants         577          30.19%      20.91%") != std::string::npos);
  CHECK(r.out.find("Total Successes     1911         100.00%      69.24%") != std::string::npos);
  CHECK(r.out.find("30.76%") != std::string::npos);

  const auto file = dir / "report.txt";
  CHECK(test::cli({"report", "--breakdown", (dir / "runs.jsonl").string(), "--out", file.string()})
            .out.empty());
  CHECK(test::read_file(file) == r.out);
}
