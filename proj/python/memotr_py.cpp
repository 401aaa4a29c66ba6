#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "memotr/cli.hpp"
#include "memotr/io.hpp"
#include "memotr/memory.hpp"
#include "memotr/metrics.hpp"
#include "memotr/pipeline.hpp"
#include "memotr/scenario.hpp"

namespace py = pybind11;
using namespace memotr;

namespace {

using Row = std::tuple<int, int, double, double, double, double>;

std::vector<Row> to_rows(const std::vector<MotRow>& rows) {
  std::vector<Row> out;
  out.reserve(rows.size());
  for (const MotRow& r : rows) out.emplace_back(r.frame, r.id, r.left, r.top, r.width, r.height);
  return out;
}

std::vector<MotRow> from_rows(const std::vector<Row>& rows) {
  std::vector<MotRow> out;
  out.reserve(rows.size());
  for (const auto& [frame, id, left, top, width, height] : rows) {
    if (frame < 1) throw ValidationError("frame must be >= 1");
    out.push_back({frame, id, left, top, width, height, 1.0});
  }
  return out;
}

ScenarioConfig scenario(const std::string& kind, int targets, int frames, std::uint64_t seed, double similarity) {
  ScenarioConfig cfg = suite_config(kind, seed, frames);
  cfg.kind = parse_scenario_kind(kind);
  cfg.targets = targets;
  cfg.similarity = similarity;
  return cfg;
}

py::dict report_dict(const MetricsReport& r) {
  py::dict d;
  d["HOTA"] = r.hota.hota;
  d["DetA"] = r.hota.deta;
  d["AssA"] = r.hota.assa;
  d["MOTA"] = r.clear.mota;
  d["IDF1"] = r.id.idf1;
  d["IDSW"] = r.clear.idsw;
  d["FP"] = r.clear.fp;
  d["FN"] = r.clear.fn;
  d["TP"] = r.clear.tp;
  return d;
}

}  // namespace

PYBIND11_MODULE(memotr, m) {
  m.doc() = "Memory-augmented multi-object tracking runtime";

  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const InputError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const UsageError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const Error& e) {
      PyErr_SetString(PyExc_RuntimeError, e.what());
    }
  });

  m.def(
      "ema",
      [](const std::vector<double>& memory, const std::vector<double>& output, double lam) {
        return ema_update(init_memory(memory), output, MemoryConfig{lam}).value;
      },
      py::arg("memory"), py::arg("output"), py::arg("lam") = 0.01, "(1 - lam) * memory + lam * output");

  m.def(
      "hungarian",
      [](const std::vector<std::vector<double>>& cost) {
        const std::size_t rows = cost.size(), cols = rows ? cost[0].size() : 0;
        Tensor2 t(rows, cols);
        for (std::size_t r = 0; r < rows; ++r) {
          if (cost[r].size() != cols) throw ShapeError("hungarian: ragged cost matrix");
          for (std::size_t c = 0; c < cols; ++c) t(r, c) = cost[r][c];
        }
        const Assignment a = hungarian(t);
        return py::make_tuple(a.pairs, a.cost);
      },
      py::arg("cost"), "Minimum-cost assignment: (pairs, total cost)");

  m.def(
      "generate",
      [](const std::string& kind, int targets, int frames, std::uint64_t seed, double similarity) {
        return to_rows(to_mot_rows(generate(scenario(kind, targets, frames, seed, similarity)).truth, FrameSize{}));
      },
      py::arg("kind") = "dance", py::arg("targets") = 8, py::arg("frames") = 200, py::arg("seed") = 0,
      py::arg("similarity") = 0.9, "Ground-truth rows (frame, id, left, top, width, height) in 1920x1080 pixels");

  m.def(
      "track",
      [](const std::string& kind, int targets, int frames, std::uint64_t seed, double similarity,
         const std::string& variant, double lam) {
        const Scenario s = generate(scenario(kind, targets, frames, seed, similarity));
        const InferenceConfig cfg =
            structured_config(parse_tim_variant(variant), lam, StructuredGains::for_similarity(similarity));
        std::vector<FrameResult> results;
        {
          py::gil_scoped_release release;
          results = run_sequence(s.frames, cfg);
        }
        return py::make_tuple(to_rows(to_mot_rows(s.truth, FrameSize{})), to_rows(to_mot_rows(results, FrameSize{})));
      },
      py::arg("kind") = "dance", py::arg("targets") = 8, py::arg("frames") = 200, py::arg("seed") = 0,
      py::arg("similarity") = 0.9, py::arg("variant") = "full", py::arg("lam") = 0.01,
      "Generates a scenario and tracks it: (gt rows, predicted rows)");

  m.def(
      "evaluate",
      [](const std::vector<Row>& gt, const std::vector<Row>& pred, double iou_threshold) {
        const std::vector<MotRow> g = from_rows(gt), p = from_rows(pred);
        int last = 0;
        for (const MotRow& r : g) last = std::max(last, r.frame);
        for (const MotRow& r : p) last = std::max(last, r.frame);
        const FrameSize size;
        return report_dict(evaluate(to_sequence(g, size, 1, last), to_sequence(p, size, 1, last), iou_threshold));
      },
      py::arg("gt"), py::arg("pred"), py::arg("iou_threshold") = 0.5,
      "HOTA, DetA, AssA, MOTA, IDF1 and CLEAR counts over frames 1..max frame");

  m.def(
      "cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "memotr");
        std::ostringstream out, err;
        const int code = cli::run(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command-line tool in-process: (exit code, stdout, stderr)");
}
