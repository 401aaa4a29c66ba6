#pragma once

#include <filesystem>
#include <string>

// The numbered acceptance checks, shared by the acceptance binary and the
// `selftest` command.
namespace memotr::acceptance {

inline constexpr int kCriteria = 11;

struct Outcome {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

/// Runs criterion `id` (1..kCriteria). Intermediate files go under work_dir.
/// Exceptions inside a check are reported as a failure, not thrown.
Outcome run_criterion(int id, const std::filesystem::path& work_dir);

/// "PASS  4 hungarian optimality: ... (0.04 s)"
std::string format(const Outcome& outcome);

}  // namespace memotr::acceptance
