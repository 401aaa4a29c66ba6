#include "memotr/memory.hpp"

#include <cmath>
#include <string>

namespace memotr {

void MemoryConfig::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw ValidationError("memory: lambda must lie in [0,1], got " + std::to_string(lambda));
  }
}

LongTermMemory init_memory(std::span<const double> output) {
  for (double v : output) {
    if (!std::isfinite(v)) throw NumericError("init_memory: non-finite output");
  }
  return LongTermMemory{std::vector<double>(output.begin(), output.end()), true};
}

LongTermMemory ema_update(const LongTermMemory& m, std::span<const double> output,
                          const MemoryConfig& cfg) {
  if (!m.initialized) throw StateError("ema_update: memory not initialized");
  if (output.size() != m.value.size()) throw ShapeError("ema_update: width mismatch");
  cfg.validate();
  LongTermMemory next = m;
  for (std::size_t i = 0; i < output.size(); ++i) {
    next.value[i] = (1.0 - cfg.lambda) * m.value[i] + cfg.lambda * output[i];
  }
  return next;
}

TrackState commit_gate(const TrackState& old_state, const TrackState& candidate,
                       double confidence, double tau_next) {
  return confidence > tau_next ? candidate : old_state;
}

}  // namespace memotr
