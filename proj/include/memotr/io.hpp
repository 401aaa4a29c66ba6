#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "memotr/decoder.hpp"
#include "memotr/lifecycle.hpp"
#include "memotr/metrics.hpp"
#include "memotr/model.hpp"
#include "memotr/scenario.hpp"

namespace memotr {

// ---- MOTChallenge text -------------------------------------------------------

/// frame,id,bb_left,bb_top,bb_width,bb_height,conf,-1,-1,-1 in pixel units.
struct MotRow {
  int frame = 1;
  int id = 0;
  double left = 0.0;
  double top = 0.0;
  double width = 0.0;
  double height = 0.0;
  double conf = 1.0;

  friend bool operator==(const MotRow&, const MotRow&) = default;
};

/// Canonical form: integers, then six-decimal fixed floats, then -1,-1,-1.
std::string format_mot_row(const MotRow& row);
/// Accepts 7 to 10 comma-separated fields; fields past the seventh are
/// checked to be numeric and otherwise ignored. `line` is 1-based.
MotRow parse_mot_row(std::string_view text, std::size_t line);

std::vector<MotRow> parse_mot(std::string_view text);
std::string format_mot(std::span<const MotRow> rows);
std::vector<MotRow> read_mot(const std::filesystem::path& path);
void write_mot(const std::filesystem::path& path, std::span<const MotRow> rows);

/// Pixel extent used to map normalized boxes to file coordinates.
struct FrameSize {
  double width = 1920.0;
  double height = 1080.0;
};

std::vector<MotRow> to_mot_rows(std::span<const FrameResult> results, const FrameSize& size);
std::vector<MotRow> to_mot_rows(const GroundTruth& truth, const FrameSize& size);

/// Frames first..last (inclusive) of a MOT file as normalized boxes;
/// element 0 is frame `first`. Rows outside the range are dropped; an id
/// repeated within one frame is a ValidationError.
TrackSequence to_sequence(std::span<const MotRow> rows, const FrameSize& size, int first, int last);

/// Ground truth as a MOTChallenge file: visible objects only, conf 1.
void export_gt(const GroundTruth& truth, const std::filesystem::path& path, const FrameSize& size = {});

// ---- Fixture streams ---------------------------------------------------------

/// Little-endian binary:
///   "MEMOFIX1" | u32 width | u32 frames | u32 count[frames] |
///   per frame: f32 tokens[count*width], f32 positions[count*2]
/// Frame numbers are 1..frames in file order.
std::vector<std::uint8_t> encode_fixture(std::span<const FrameFeatures> frames, std::size_t width);
std::vector<FrameFeatures> decode_fixture(std::span<const std::uint8_t> bytes, std::size_t* width = nullptr);
void write_fixture(const std::filesystem::path& path, std::span<const FrameFeatures> frames, std::size_t width);
std::vector<FrameFeatures> read_fixture(const std::filesystem::path& path, std::size_t* width = nullptr);

// ---- Parameter snapshots -----------------------------------------------------

/// Little-endian binary:
///   "MEMOPAR1" | u32 count | per tensor: u32 name_len, name, u32 rows, u32 cols, f64 values
/// Tensors are stored in name order.
using NamedTensors = std::map<std::string, Tensor2>;

std::vector<std::uint8_t> encode_params(const NamedTensors& tensors);
NamedTensors decode_params(std::span<const std::uint8_t> bytes);
void write_params(const std::filesystem::path& path, const NamedTensors& tensors);
NamedTensors read_params(const std::filesystem::path& path);

NamedTensors flatten(const ModelParams& model);
ModelParams unflatten(const NamedTensors& tensors);

// ---- Run configuration -------------------------------------------------------

enum class ModelSource { structured, random, file };

/// Flat key=value text, '#' comments. config_version is required.
struct RunConfig {
  static constexpr int kVersion = 1;

  ModelSource model = ModelSource::structured;
  std::string params_file;
  std::uint64_t seed = 0;  // random model seed
  ModelShape shape;
  double similarity = 0.9;  // structured model calibration
  double lambda = 0.01;
  double tau_det = 0.5;
  double tau_tck = 0.5;
  double tau_next = 0.5;
  int t_miss = 30;
  double iou_suppress = 0.7;
  TimVariant variant = TimVariant::full;
  bool ffn_residual = false;
  PrevOutputPolicy prev_output = PrevOutputPolicy::on_commit;
  FrameSize frame;

  /// Builds the tracker configuration; loads the parameter file if needed.
  InferenceConfig inference(const std::filesystem::path& base_dir = {}) const;
  std::string to_text() const;
};

RunConfig parse_run_config(std::string_view text);
RunConfig read_run_config(const std::filesystem::path& path);

// ---- Metrics report ----------------------------------------------------------

inline constexpr int kReportVersion = 1;

/// Versioned key = value text. Headline scores come first in the order
/// HOTA, DetA, AssA, MOTA, IDF1.
std::string format_report(const MetricsReport& report, std::size_t sequences = 1);

// ---- Files -------------------------------------------------------------------

std::string read_text(const std::filesystem::path& path);
std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);
void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace memotr
