#include "memotr/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

#include "memotr/acceptance.hpp"
#include "memotr/io.hpp"
#include "memotr/pipeline.hpp"

namespace memotr::cli {

namespace {

namespace fs = std::filesystem;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

void print_header(std::ostream& out, const std::string& command, const std::string& body) {
  out << "# memotr " << command << "\n";
  std::istringstream lines(body);
  for (std::string line; std::getline(lines, line);) out << "# " << line << "\n";
}

// ---- simulate ----------------------------------------------------------------

struct SimulateArgs {
  std::string kind = "dance";
  int targets = 8;
  int frames = 200;
  std::uint64_t seed = 0;
  std::string out_dir;
  double similarity = 0.9;
  double noise = 0.05;
  int distractors = 4;
  int random_occlusions = -1;
  int max_occlusion = 20;
  std::vector<std::string> occlude;
  std::size_t width = 64;
  double frame_width = 1920.0;
  double frame_height = 1080.0;
};

OcclusionInterval parse_interval(const std::string& text) {
  OcclusionInterval o;
  char tail = 0;
  if (std::sscanf(text.c_str(), "%d:%d:%d%c", &o.target, &o.begin, &o.end, &tail) != 3) {
    throw UsageError("--occlude expects target:begin:end, got '" + text + "'");
  }
  return o;
}

int simulate(const SimulateArgs& a, std::ostream& out) {
  ScenarioConfig cfg = suite_config(a.kind, a.seed, a.frames);
  cfg.targets = a.targets;
  cfg.similarity = a.similarity;
  cfg.noise = a.noise;
  cfg.distractors = a.distractors;
  if (cfg.kind == ScenarioKind::occlusion_stress) cfg.random_occlusions = cfg.targets;
  if (a.random_occlusions >= 0) cfg.random_occlusions = a.random_occlusions;
  cfg.max_occlusion = a.max_occlusion;
  for (const std::string& o : a.occlude) cfg.occlusions.push_back(parse_interval(o));
  cfg.width = a.width;
  cfg.validate();

  std::ostringstream resolved;
  resolved << "kind = " << to_string(cfg.kind) << "\ntargets = " << cfg.targets << "\nframes = " << cfg.frames
           << "\nseed = " << cfg.seed << "\nsimilarity = " << num(cfg.similarity) << "\nnoise = " << num(cfg.noise)
           << "\ndrift = " << num(cfg.drift) << "\nspeed = " << num(cfg.speed) << "\ndistractors = " << cfg.distractors
           << "\nrandom_occlusions = " << cfg.random_occlusions << "\nmax_occlusion = " << cfg.max_occlusion
           << "\nwidth = " << cfg.width << "\nframe_width = " << num(a.frame_width)
           << "\nframe_height = " << num(a.frame_height) << "\n";
  print_header(out, "simulate", resolved.str());

  const Scenario s = generate(cfg);
  fs::create_directories(a.out_dir);
  const fs::path fixture = fs::path(a.out_dir) / "fixture.bin";
  const fs::path gt = fs::path(a.out_dir) / "gt.txt";
  write_fixture(fixture, s.frames, cfg.width);
  export_gt(s.truth, gt, FrameSize{a.frame_width, a.frame_height});
  for (const OcclusionInterval& o : s.occlusions) {
    out << "occlusion target=" << o.target << " frames=" << o.begin << "-" << o.end << "\n";
  }
  out << "wrote " << fixture.string() << "\nwrote " << gt.string() << "\n";
  return 0;
}

// ---- track -------------------------------------------------------------------

struct TrackArgs {
  std::string fixture;
  std::string config;
  std::string out;
  RunConfig overrides;
};

int track(const TrackArgs& a, const CLI::App& sub, std::ostream& out) {
  RunConfig cfg;
  fs::path base;
  if (!a.config.empty()) {
    cfg = read_run_config(a.config);
    base = fs::path(a.config).parent_path();
  }
  const RunConfig& o = a.overrides;
  auto given = [&](const char* name) { return sub.count(name) > 0; };
  if (given("--seed")) cfg.seed = o.seed;
  if (given("--similarity")) cfg.similarity = o.similarity;
  if (given("--lambda")) cfg.lambda = o.lambda;
  if (given("--tau-det")) cfg.tau_det = o.tau_det;
  if (given("--tau-tck")) cfg.tau_tck = o.tau_tck;
  if (given("--tau-next")) cfg.tau_next = o.tau_next;
  if (given("--t-miss")) cfg.t_miss = o.t_miss;
  if (given("--l-det")) cfg.shape.det_layers = o.shape.det_layers;
  if (given("--l-joint")) cfg.shape.joint_layers = o.shape.joint_layers;
  if (given("--variant")) cfg.variant = o.variant;
  if (given("--model")) cfg.model = o.model;
  print_header(out, "track", cfg.to_text());

  std::size_t width = 0;
  const std::vector<FrameFeatures> frames = read_fixture(a.fixture, &width);
  if (!frames.empty() && width != cfg.shape.width) {
    throw ConfigError("fixture width " + std::to_string(width) + " does not match config width " +
                      std::to_string(cfg.shape.width));
  }
  const InferenceConfig inference = cfg.inference(base);
  if (!frames.empty() && inference.model.decoder.width() != width) {
    throw ConfigError("fixture width " + std::to_string(width) + " does not match model width " +
                      std::to_string(inference.model.decoder.width()));
  }
  const auto start = std::chrono::steady_clock::now();
  const std::vector<FrameResult> results = run_sequence(frames, inference);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const std::vector<MotRow> rows = to_mot_rows(results, cfg.frame);
  write_mot(a.out, rows);
  out << "tracked " << frames.size() << " frames, " << rows.size() << " boxes in " << num(secs) << " s\n";
  out << "wrote " << a.out << "\n";
  return 0;
}

// ---- eval --------------------------------------------------------------------

struct EvalArgs {
  std::string gt;
  std::string pred;
  std::string report;
  double iou = 0.5;
  double frame_width = 1920.0;
  double frame_height = 1080.0;
};

std::optional<std::pair<int, int>> frame_range(const std::vector<MotRow>& rows) {
  if (rows.empty()) return std::nullopt;
  int lo = rows.front().frame;
  int hi = lo;
  for (const MotRow& r : rows) {
    lo = std::min(lo, r.frame);
    hi = std::max(hi, r.frame);
  }
  return std::pair{lo, hi};
}

int eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  if (!(a.iou > 0.0 && a.iou <= 1.0)) throw UsageError("--iou must lie in (0,1]");
  std::ostringstream resolved;
  resolved << "gt = " << a.gt << "\npred = " << a.pred << "\niou = " << num(a.iou)
           << "\nframe_width = " << num(a.frame_width) << "\nframe_height = " << num(a.frame_height)
           << "\nseed = none\n";
  print_header(out, "eval", resolved.str());

  const std::vector<MotRow> gt_rows = read_mot(a.gt);
  const std::vector<MotRow> pred_rows = read_mot(a.pred);
  const auto g = frame_range(gt_rows);
  const auto p = frame_range(pred_rows);
  // An empty file covers whatever the other one covers.
  std::pair<int, int> range{1, 0};
  if (g && p) {
    range = {std::max(g->first, p->first), std::min(g->second, p->second)};
    if (*g != *p) {
      err << "warning: frame ranges differ (gt " << g->first << "-" << g->second << ", pred " << p->first << "-"
          << p->second << "); evaluating the intersection " << range.first << "-" << range.second << "\n";
    }
  } else if (g) {
    range = *g;
  } else if (p) {
    range = *p;
  }
  const FrameSize size{a.frame_width, a.frame_height};
  const MetricsReport report = evaluate(to_sequence(gt_rows, size, range.first, range.second),
                                        to_sequence(pred_rows, size, range.first, range.second), a.iou);
  const std::string text = format_report(report);
  if (!a.report.empty()) {
    write_text(a.report, text);
    out << "wrote " << a.report << "\n";
  }
  out << text;
  return 0;
}

// ---- ablate ------------------------------------------------------------------

struct AblateArgs {
  std::string suite = "dance";
  std::vector<std::string> variants{"full", "memory-off", "attn-off", "naive"};
  std::vector<double> lambdas{0.005, 0.01, 0.02, 0.04, 1.0};
  double lambda = 0.01;
  int seeds = 20;
  std::uint64_t first_seed = 1;
  int frames = 200;
  unsigned jobs = 1;
  std::string out;
};

int ablate(const AblateArgs& a, std::ostream& out) {
  std::vector<SuiteCase> variant_cases;
  for (const std::string& v : a.variants) variant_cases.push_back({parse_tim_variant(v), a.lambda});
  std::vector<SuiteCase> sweep_cases;
  for (double l : a.lambdas) {
    if (!(l >= 0.0 && l <= 1.0)) throw UsageError("lambda values must lie in [0,1]");
    sweep_cases.push_back({TimVariant::full, l});
  }
  const SuiteSpec spec = default_suite(a.suite, a.seeds, a.first_seed, a.frames);

  std::ostringstream resolved;
  resolved << "suite = " << a.suite << "\nseeds = " << a.first_seed << ".." << a.first_seed + a.seeds - 1
           << "\nseed = " << a.first_seed << "\nframes = " << a.frames << "\ntargets = " << spec.scenario.targets
           << "\nsimilarity = " << num(spec.scenario.similarity) << "\nrandom_occlusions = "
           << spec.scenario.random_occlusions << "\nmax_occlusion = " << spec.scenario.max_occlusion
           << "\nlambda = " << num(a.lambda) << "\njobs = " << a.jobs << "\n";
  print_header(out, "ablate", resolved.str());

  std::string table = "## variants (lambda = " + num(a.lambda) + ", means over " + std::to_string(a.seeds) +
                      " sequences)\n";
  table += format_suite_table(run_suite(spec, variant_cases, std::nullopt, a.jobs));
  if (!sweep_cases.empty()) {
    table += "\n## lambda sweep (variant full)\n";
    table += format_suite_table(run_suite(spec, sweep_cases, std::nullopt, a.jobs));
  }
  if (!a.out.empty()) write_text(a.out, table);
  out << table;
  return 0;
}

// ---- selftest ----------------------------------------------------------------

struct SelftestArgs {
  std::vector<int> only;
  std::string work_dir;
};

int selftest(const SelftestArgs& a, std::ostream& out) {
  fs::path work = a.work_dir;
  if (work.empty()) {
    std::random_device rd;
    work = fs::temp_directory_path() / ("memotr-selftest-" + std::to_string(rd()));
  }
  fs::create_directories(work);
  print_header(out, "selftest", "work_dir = " + work.string() + "\nseed = fixed per criterion\n");
  std::vector<int> ids = a.only;
  if (ids.empty()) {
    for (int i = 1; i <= acceptance::kCriteria; ++i) ids.push_back(i);
  }
  bool ok = true;
  for (int id : ids) {
    const acceptance::Outcome o = acceptance::run_criterion(id, work);
    out << acceptance::format(o) << "\n" << std::flush;
    ok = ok && o.pass;
  }
  if (a.work_dir.empty()) fs::remove_all(work);
  out << (ok ? "selftest passed" : "selftest FAILED") << "\n";
  return ok ? 0 : 3;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Memory-augmented query tracker: simulate, track, evaluate, ablate."};
  app.require_subcommand(1);
  app.fallthrough(false);

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Generate a synthetic scenario: fixture stream and ground truth");
  s->add_option("--kind", sim.kind, "linear, dance, crossing or occlusion")->capture_default_str();
  s->add_option("--targets", sim.targets, "number of targets")->check(CLI::PositiveNumber)->capture_default_str();
  s->add_option("--frames", sim.frames, "sequence length")->check(CLI::PositiveNumber)->capture_default_str();
  s->add_option("--seed", sim.seed, "scenario seed")->capture_default_str();
  s->add_option("--out-dir", sim.out_dir, "directory for fixture.bin and gt.txt")->required();
  s->add_option("--similarity", sim.similarity, "pairwise cosine of identity signatures")->capture_default_str();
  s->add_option("--noise", sim.noise, "per-frame signature noise")->capture_default_str();
  s->add_option("--distractors", sim.distractors, "background tokens per frame")->capture_default_str();
  s->add_option("--random-occlusions", sim.random_occlusions, "scheduled occlusions drawn from the seed (default: per kind)");
  s->add_option("--max-occlusion", sim.max_occlusion, "longest drawn occlusion, frames")->capture_default_str();
  s->add_option("--occlude", sim.occlude, "explicit occlusion target:begin:end (repeatable)");
  s->add_option("--width", sim.width, "token width d")->capture_default_str();
  s->add_option("--frame-width", sim.frame_width, "pixel width for gt.txt")->capture_default_str();
  s->add_option("--frame-height", sim.frame_height, "pixel height for gt.txt")->capture_default_str();

  TrackArgs trk;
  RunConfig& o = trk.overrides;
  auto* t = app.add_subcommand("track", "Run the tracker over a fixture stream and write MOT rows");
  t->add_option("--fixture", trk.fixture, "fixture stream")->required();
  t->add_option("--config", trk.config, "run configuration file (flags below override it)");
  t->add_option("--out", trk.out, "output MOT file")->required();
  const std::map<std::string, ModelSource> sources{
      {"structured", ModelSource::structured}, {"random", ModelSource::random}, {"file", ModelSource::file}};
  t->add_option("--model", o.model, "structured, random or file")
      ->transform(CLI::CheckedTransformer(sources, CLI::ignore_case))
      ->default_str("structured");
  t->add_option("--seed", o.seed, "random model seed")->capture_default_str();
  t->add_option("--similarity", o.similarity, "scenario similarity the structured model is calibrated to")
      ->capture_default_str();
  t->add_option("--lambda", o.lambda, "memory update rate")->capture_default_str();
  t->add_option("--tau-det", o.tau_det, "newborn confidence threshold")->capture_default_str();
  t->add_option("--tau-tck", o.tau_tck, "tracked confidence threshold")->capture_default_str();
  t->add_option("--tau-next", o.tau_next, "state commit threshold")->capture_default_str();
  t->add_option("--t-miss", o.t_miss, "frames a lost track survives")->capture_default_str();
  t->add_option("--l-det", o.shape.det_layers, "detection decoder layers")->capture_default_str();
  t->add_option("--l-joint", o.shape.joint_layers, "joint decoder layers")->capture_default_str();
  std::string variant_name = "full";
  t->add_option("--variant", variant_name, "full, memory-off, attn-off or naive")->capture_default_str();

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Score predicted MOT rows against ground truth");
  e->add_option("--gt", ev.gt, "ground-truth MOT file")->required();
  e->add_option("--pred", ev.pred, "predicted MOT file")->required();
  e->add_option("--report", ev.report, "write the report here as well");
  e->add_option("--iou", ev.iou, "IoU threshold for CLEAR and identity metrics")->capture_default_str();
  e->add_option("--frame-width", ev.frame_width, "pixel width of both files")->capture_default_str();
  e->add_option("--frame-height", ev.frame_height, "pixel height of both files")->capture_default_str();

  AblateArgs ab;
  auto* b = app.add_subcommand("ablate", "Compare TIM variants and memory rates over a seeded suite");
  b->add_option("--suite", ab.suite, "scenario kind of the suite")->capture_default_str();
  b->add_option("--variants", ab.variants, "comma-separated variants")->delimiter(',')->capture_default_str();
  b->add_option("--lambdas", ab.lambdas, "comma-separated memory rates for the sweep (full variant)")
      ->delimiter(',')
      ->capture_default_str();
  b->add_flag("--no-sweep", "skip the lambda sweep");
  b->add_option("--lambda", ab.lambda, "memory rate for the variant table")->capture_default_str();
  b->add_option("--seeds", ab.seeds, "number of sequences")->check(CLI::PositiveNumber)->capture_default_str();
  b->add_option("--first-seed", ab.first_seed, "seed of the first sequence")->capture_default_str();
  b->add_option("--frames", ab.frames, "frames per sequence")->check(CLI::PositiveNumber)->capture_default_str();
  b->add_option("--jobs", ab.jobs, "cases run in parallel")->check(CLI::PositiveNumber)->capture_default_str();
  b->add_option("--out", ab.out, "write the tables here as well");

  SelftestArgs st;
  auto* c = app.add_subcommand("selftest", "Run the acceptance checks and oracle suites");
  c->add_option("--only", st.only, "criterion numbers to run")->delimiter(',');
  c->add_option("--work-dir", st.work_dir, "keep intermediate files here");

  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& ex) {
    err << "usage error: " << ex.what() << "\n";
    if (auto* sub = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front()) {
      err << "see '" << args.front() << " " << sub->get_name() << " --help'\n";
    }
    return 1;
  }

  try {
    if (*s) return simulate(sim, out);
    if (*t) {
      if (t->count("--variant")) o.variant = parse_tim_variant(variant_name);
      return track(trk, *t, out);
    }
    if (*e) return eval(ev, out, err);
    if (*b) {
      if (b->count("--no-sweep")) ab.lambdas.clear();
      return ablate(ab, out);
    }
    if (*c) return selftest(st, out);
  } catch (const Error& ex) {
    err << "error: " << ex.what() << "\n";
    return ex.exit_code();
  } catch (const fs::filesystem_error& ex) {
    err << "error: " << ex.what() << "\n";
    return 2;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return 3;
  }
  return 1;
}

}  // namespace memotr::cli
