#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "memotr/cli.hpp"
#include "memotr/io.hpp"
#include "memotr/metrics.hpp"

using namespace memotr;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "memotr");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path workdir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "memotr_cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string value_of(const std::string& report, const std::string& key) {
  const std::size_t at = report.find("\n" + key + " = ");
  if (at == std::string::npos) return {};
  const std::size_t begin = at + key.size() + 4;
  return report.substr(begin, report.find('\n', begin) - begin);
}

}  // namespace

TEST_CASE("usage errors") {
  CHECK(run({}).code == 1);
  CHECK(run({"dance"}).code == 1);
  CHECK(run({"simulate", "--out-dir", "x", "--frames", "0"}).code == 1);
  CHECK(run({"simulate", "--out-dir", "x", "--kind", "ballet"}).code == 1);
  CHECK(run({"simulate", "--out-dir", "x", "--bogus", "1"}).code == 1);
  CHECK(run({"ablate", "--variants", "full,turbo", "--seeds", "1", "--frames", "5"}).code == 1);
  CHECK(run({"track", "--fixture", "f.bin"}).code == 1);
}

TEST_CASE("help") {
  const Result r = run({"--help"});
  CHECK(r.code == 0);
  CHECK(r.out.find("simulate") != std::string::npos);
  const Result t = run({"track", "--help"});
  CHECK(t.code == 0);
  for (const char* flag : {"--lambda", "--tau-det", "--tau-tck", "--tau-next", "--t-miss", "--l-det", "--l-joint"})
    CHECK(t.out.find(flag) != std::string::npos);
  CHECK(t.out.find("0.01") != std::string::npos);
  CHECK(t.out.find("30") != std::string::npos);
}

TEST_CASE("simulate, track, eval") {
  const fs::path dir = workdir("pipeline");
  const Result sim = run({"simulate", "--kind", "dance", "--targets", "4", "--frames", "40", "--seed", "42",
                          "--out-dir", dir.string()});
  REQUIRE(sim.code == 0);
  CHECK(sim.out.find("# memotr simulate") == 0);
  CHECK(sim.out.find("seed = 42") != std::string::npos);
  CHECK(fs::exists(dir / "fixture.bin"));
  CHECK(fs::exists(dir / "gt.txt"));

  const Result trk = run({"track", "--fixture", (dir / "fixture.bin").string(), "--out", (dir / "pred.txt").string()});
  REQUIRE(trk.code == 0);
  CHECK(trk.out.find("lambda = 0.01") != std::string::npos);

  const Result self = run({"eval", "--gt", (dir / "gt.txt").string(), "--pred", (dir / "gt.txt").string(),
                           "--report", (dir / "self.txt").string()});
  REQUIRE(self.code == 0);
  const std::string report = read_text(dir / "self.txt");
  for (const char* key : {"HOTA", "DetA", "AssA", "MOTA", "IDF1"}) CHECK(value_of(report, key) == "1.000000");
  CHECK(report.find("\nHOTA") < report.find("\nDetA"));
  CHECK(report.find("\nDetA") < report.find("\nAssA"));
  CHECK(report.find("\nAssA") < report.find("\nMOTA"));
  CHECK(report.find("\nMOTA") < report.find("\nIDF1"));

  const Result ev = run({"eval", "--gt", (dir / "gt.txt").string(), "--pred", (dir / "pred.txt").string()});
  CHECK(ev.code == 0);
  CHECK(ev.out.find("HOTA = ") != std::string::npos);
}

TEST_CASE("repeated runs are identical") {
  std::vector<std::string> outputs;
  for (int i = 0; i < 2; ++i) {
    const fs::path dir = workdir("repeat" + std::to_string(i));
    REQUIRE(run({"simulate", "--frames", "30", "--seed", "7", "--out-dir", dir.string()}).code == 0);
    REQUIRE(run({"track", "--fixture", (dir / "fixture.bin").string(), "--out", (dir / "pred.txt").string()}).code ==
            0);
    outputs.push_back(read_text(dir / "gt.txt") + read_text(dir / "pred.txt"));
    const auto bytes = read_bytes(dir / "fixture.bin");
    outputs.back().append(bytes.begin(), bytes.end());
  }
  CHECK(outputs[0] == outputs[1]);
}

TEST_CASE("input errors") {
  const fs::path dir = workdir("errors");
  CHECK(run({"track", "--fixture", (dir / "missing.bin").string(), "--out", (dir / "o.txt").string()}).code == 2);
  write_text(dir / "junk.bin", "not a fixture");
  CHECK(run({"track", "--fixture", (dir / "junk.bin").string(), "--out", (dir / "o.txt").string()}).code == 2);
  CHECK(run({"eval", "--gt", (dir / "missing.txt").string(), "--pred", (dir / "missing.txt").string()}).code == 2);
  write_text(dir / "bad.txt", "1,1,2,3\n");
  CHECK(run({"eval", "--gt", (dir / "bad.txt").string(), "--pred", (dir / "bad.txt").string()}).code == 2);
  write_text(dir / "bad.cfg", "config_version = 1\nlambda = 3\n");
  REQUIRE(run({"simulate", "--frames", "3", "--out-dir", dir.string()}).code == 0);
  CHECK(run({"track", "--fixture", (dir / "fixture.bin").string(), "--config", (dir / "bad.cfg").string(), "--out",
             (dir / "o.txt").string()})
            .code == 2);
}

TEST_CASE("width mismatch") {
  const fs::path dir = workdir("width");
  REQUIRE(run({"simulate", "--frames", "3", "--width", "32", "--out-dir", dir.string()}).code == 0);
  const Result r = run({"track", "--fixture", (dir / "fixture.bin").string(), "--out", (dir / "o.txt").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("width") != std::string::npos);
}

TEST_CASE("empty fixture") {
  const fs::path dir = workdir("empty");
  write_fixture(dir / "fixture.bin", {}, 64);
  REQUIRE(run({"track", "--fixture", (dir / "fixture.bin").string(), "--out", (dir / "o.txt").string()}).code == 0);
  CHECK(fs::exists(dir / "o.txt"));
  CHECK(read_text(dir / "o.txt").empty());
}

TEST_CASE("association-trivial scenario") {
  const fs::path dir = workdir("trivial");
  REQUIRE(run({"simulate", "--kind", "linear", "--targets", "3", "--frames", "60", "--seed", "3", "--similarity", "0",
               "--noise", "0", "--distractors", "0", "--random-occlusions", "0", "--out-dir", dir.string()})
              .code == 0);
  REQUIRE(run({"track", "--fixture", (dir / "fixture.bin").string(), "--similarity", "0", "--out",
               (dir / "pred.txt").string()})
              .code == 0);
  const Result ev = run({"eval", "--gt", (dir / "gt.txt").string(), "--pred", (dir / "pred.txt").string()});
  REQUIRE(ev.code == 0);
  CHECK(value_of(ev.out, "IDSW") == "0");
  std::set<int> gt_ids, pred_ids;
  for (const MotRow& r : read_mot(dir / "gt.txt")) gt_ids.insert(r.id);
  for (const MotRow& r : read_mot(dir / "pred.txt")) pred_ids.insert(r.id);
  CHECK(pred_ids.size() == gt_ids.size());
  // Every predicted id overlaps exactly one gt id, and no two share one.
  const std::vector<MotRow> gt_rows = read_mot(dir / "gt.txt"), pred_rows = read_mot(dir / "pred.txt");
  const TrackSequence gt = to_sequence(gt_rows, FrameSize{}, 1, 60), pred = to_sequence(pred_rows, FrameSize{}, 1, 60);
  std::map<int, std::set<int>> partners;
  for (std::size_t t = 0; t < gt.size(); ++t)
    for (const LabeledBox& p : pred[t])
      for (const LabeledBox& g : gt[t])
        if (iou(p.box, g.box) >= 0.5) partners[p.id].insert(g.id);
  std::set<int> claimed;
  for (const auto& [id, gts] : partners) {
    CHECK(gts.size() == 1);
    CHECK(claimed.insert(*gts.begin()).second);
  }
  CHECK(claimed.size() == gt_ids.size());
}

TEST_CASE("single-variant ablation") {
  const Result r = run({"ablate", "--variants", "naive", "--no-sweep", "--seeds", "1", "--frames", "20"});
  REQUIRE(r.code == 0);
  std::size_t rows = 0;
  std::istringstream lines(r.out);
  for (std::string line; std::getline(lines, line);)
    if (line.rfind("naive", 0) == 0) ++rows;
  CHECK(rows == 1);
  CHECK(r.out.find("variant") != std::string::npos);
}

TEST_CASE("selftest subset") {
  const Result r = run({"selftest", "--only", "1,4"});
  CHECK(r.code == 0);
  CHECK(r.out.find("PASS  1") != std::string::npos);
  CHECK(r.out.find("PASS  4") != std::string::npos);
}
