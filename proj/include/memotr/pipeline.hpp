#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "memotr/lifecycle.hpp"
#include "memotr/metrics.hpp"
#include "memotr/scenario.hpp"

namespace memotr {

/// Visible ground-truth objects, frame-aligned.
TrackSequence to_sequence(const GroundTruth& truth);
/// Tracker output placed at index frame-1.
TrackSequence to_sequence(std::span<const FrameResult> results);

/// Structured-mode tracker for one TIM variant and memory rate.
InferenceConfig structured_config(TimVariant variant, double lambda = 0.01,
                                  const StructuredGains& gains = {});

struct SuiteSpec {
  std::string suite = "dance";
  ScenarioConfig scenario;  // template; the seed is replaced per sequence
  std::vector<std::uint64_t> seeds;
};

/// Default seeded suite: seeds first_seed .. first_seed+count-1.
SuiteSpec default_suite(const std::string& suite, int count = 20, std::uint64_t first_seed = 1,
                        int frames = 200);

struct SuiteRow {
  std::string label;
  TimVariant variant = TimVariant::full;
  double lambda = 0.01;
  std::vector<MetricsReport> sequences;
  MetricsReport combined;  // counts summed over sequences

  double mean_hota() const;
  double mean_assa() const;
  double mean_idf1() const;
  double mean_idsw() const;
};

struct SuiteCase {
  TimVariant variant = TimVariant::full;
  double lambda = 0.01;
};

/// Runs every case over every scenario of the suite. Scenarios are generated
/// once and shared; each case uses a fresh tracker per sequence. Without
/// explicit gains the structured model is calibrated to the suite similarity.
/// With jobs > 1 cases run on separate threads; results do not depend on it.
std::vector<SuiteRow> run_suite(const SuiteSpec& spec, std::span<const SuiteCase> cases,
                                const std::optional<StructuredGains>& gains = std::nullopt, unsigned jobs = 1);

/// One row per case: per-sequence means, scores in percent, IDSW per sequence.
std::string format_suite_table(std::span<const SuiteRow> rows);

}  // namespace memotr
