#include "memotr/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <thread>

namespace memotr {

TrackSequence to_sequence(const GroundTruth& truth) {
  TrackSequence seq(truth.frames.size());
  for (std::size_t t = 0; t < truth.frames.size(); ++t) {
    for (const GtObject& o : truth.frames[t]) {
      if (o.visible) seq[t].push_back({o.id, o.box});
    }
  }
  return seq;
}

TrackSequence to_sequence(std::span<const FrameResult> results) {
  TrackSequence seq;
  for (const FrameResult& r : results) {
    if (r.frame < 1) throw ValidationError("frame numbers start at 1");
    const auto t = static_cast<std::size_t>(r.frame - 1);
    if (seq.size() <= t) seq.resize(t + 1);
    for (const TrackOutput& o : r.tracks) seq[t].push_back({static_cast<int>(o.id), o.box});
  }
  return seq;
}

InferenceConfig structured_config(TimVariant variant, double lambda, const StructuredGains& gains) {
  InferenceConfig cfg;
  cfg.variant = variant;
  cfg.memory.lambda = lambda;
  cfg.model = structured_model(ModelShape{}, variant, gains);
  return cfg;
}

SuiteSpec default_suite(const std::string& suite, int count, std::uint64_t first_seed, int frames) {
  SuiteSpec spec;
  spec.suite = suite;
  spec.scenario = suite_config(suite, first_seed, frames);
  for (int i = 0; i < count; ++i) spec.seeds.push_back(first_seed + static_cast<std::uint64_t>(i));
  return spec;
}

namespace {

template <class F>
double mean_of(const std::vector<MetricsReport>& reports, F f) {
  if (reports.empty()) return 0.0;
  double s = 0.0;
  for (const MetricsReport& r : reports) s += f(r);
  return s / static_cast<double>(reports.size());
}

}  // namespace

double SuiteRow::mean_hota() const { return mean_of(sequences, [](const MetricsReport& r) { return r.hota.hota; }); }
double SuiteRow::mean_assa() const { return mean_of(sequences, [](const MetricsReport& r) { return r.hota.assa; }); }
double SuiteRow::mean_idf1() const { return mean_of(sequences, [](const MetricsReport& r) { return r.id.idf1; }); }
double SuiteRow::mean_idsw() const {
  return mean_of(sequences, [](const MetricsReport& r) { return static_cast<double>(r.clear.idsw); });
}

std::vector<SuiteRow> run_suite(const SuiteSpec& spec, std::span<const SuiteCase> cases,
                                const std::optional<StructuredGains>& gains, unsigned jobs) {
  const StructuredGains g = gains.value_or(StructuredGains::for_similarity(spec.scenario.similarity));
  std::vector<Scenario> scenarios;
  scenarios.reserve(spec.seeds.size());
  for (std::uint64_t seed : spec.seeds) {
    ScenarioConfig sc = spec.scenario;
    sc.seed = seed;
    scenarios.push_back(generate(sc));
  }
  auto run_case = [&](const SuiteCase& c) {
    SuiteRow row;
    row.variant = c.variant;
    row.lambda = c.lambda;
    char lam[32];
    std::snprintf(lam, sizeof lam, "%g", c.lambda);
    row.label = to_string(c.variant) + " lambda=" + lam;
    const InferenceConfig cfg = structured_config(c.variant, c.lambda, g);
    for (const Scenario& s : scenarios) {
      const std::vector<FrameResult> results = run_sequence(s.frames, cfg);
      row.sequences.push_back(evaluate(to_sequence(s.truth), to_sequence(results)));
    }
    row.combined = aggregate(row.sequences);
    return row;
  };
  std::vector<SuiteRow> rows(cases.size());
  if (jobs <= 1) {
    for (std::size_t i = 0; i < cases.size(); ++i) rows[i] = run_case(cases[i]);
    return rows;
  }
  // Cases share only the read-only scenarios.
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(cases.size());
  std::vector<std::thread> workers;
  for (unsigned w = 0; w < std::min<std::size_t>(jobs, cases.size()); ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < cases.size(); i = next++) {
        try {
          rows[i] = run_case(cases[i]);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return rows;
}

std::string format_suite_table(std::span<const SuiteRow> rows) {
  std::string out = "variant     lambda     HOTA    DetA    AssA    MOTA    IDF1    IDSW\n";
  for (const SuiteRow& r : rows) {
    double deta = 0.0;
    double mota = 0.0;
    for (const MetricsReport& m : r.sequences) {
      deta += m.hota.deta;
      mota += m.clear.mota;
    }
    const double n = std::max<double>(1.0, static_cast<double>(r.sequences.size()));
    char line[160];
    std::snprintf(line, sizeof line, "%-11s %-8g %7.2f %7.2f %7.2f %7.2f %7.2f %7.2f\n", to_string(r.variant).c_str(),
                  r.lambda, 100.0 * r.mean_hota(), 100.0 * deta / n, 100.0 * r.mean_assa(), 100.0 * mota / n,
                  100.0 * r.mean_idf1(), r.mean_idsw());
    out += line;
  }
  return out;
}

}  // namespace memotr
