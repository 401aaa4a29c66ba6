#include "memotr/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace memotr {

// ---- Files -------------------------------------------------------------------

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return text;
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  return {text.begin(), text.end()};
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  write_text(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

template <class Int>
bool parse_int(std::string_view s, Int& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  if (std::strcmp(buf, "-0.000000") == 0) return "0.000000";
  return buf;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      parts.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return parts;
}

// Lines of a text file without terminators; a final newline does not add a line.
std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> lines = split(text, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

}  // namespace

// ---- MOTChallenge text -------------------------------------------------------

std::string format_mot_row(const MotRow& r) {
  return std::to_string(r.frame) + "," + std::to_string(r.id) + "," + fixed6(r.left) + "," + fixed6(r.top) +
         "," + fixed6(r.width) + "," + fixed6(r.height) + "," + fixed6(r.conf) + ",-1,-1,-1";
}

MotRow parse_mot_row(std::string_view text, std::size_t line) {
  const auto f = split(trim(text), ',');
  if (f.size() < 7 || f.size() > 10) {
    throw ParseError("expected 7 to 10 comma-separated fields, got " + std::to_string(f.size()), line);
  }
  MotRow r;
  double frame = 0.0;
  double id = 0.0;
  // Some tools write integral fields as floats ("1.0").
  if (!parse_int(f[0], r.frame)) {
    if (!parse_double(f[0], frame) || frame != std::floor(frame) || std::abs(frame) > 2e9) {
      throw ParseError("frame is not an integer", line);
    }
    r.frame = static_cast<int>(frame);
  }
  if (!parse_int(f[1], r.id)) {
    if (!parse_double(f[1], id) || id != std::floor(id) || std::abs(id) > 2e9) throw ParseError("id is not an integer", line);
    r.id = static_cast<int>(id);
  }
  double* fields[] = {&r.left, &r.top, &r.width, &r.height, &r.conf};
  static const char* names[] = {"bb_left", "bb_top", "bb_width", "bb_height", "conf"};
  for (std::size_t i = 0; i < 5; ++i) {
    if (!parse_double(f[2 + i], *fields[i])) throw ParseError(std::string(names[i]) + " is not a finite number", line);
  }
  for (std::size_t i = 7; i < f.size(); ++i) {
    double ignored = 0.0;
    if (!parse_double(f[i], ignored)) throw ParseError("trailing field is not numeric", line);
  }
  if (r.frame < 1) throw ValidationError("line " + std::to_string(line) + ": frame must be >= 1");
  if (r.width < 0.0 || r.height < 0.0) {
    throw ValidationError("line " + std::to_string(line) + ": negative box size");
  }
  return r;
}

std::vector<MotRow> parse_mot(std::string_view text) {
  std::vector<MotRow> rows;
  const auto lines = lines_of(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) throw ParseError("blank line", i + 1);
    rows.push_back(parse_mot_row(lines[i], i + 1));
  }
  return rows;
}

std::string format_mot(std::span<const MotRow> rows) {
  std::string out;
  for (const MotRow& r : rows) {
    out += format_mot_row(r);
    out += '\n';
  }
  return out;
}

std::vector<MotRow> read_mot(const std::filesystem::path& path) { return parse_mot(read_text(path)); }

void write_mot(const std::filesystem::path& path, std::span<const MotRow> rows) {
  write_text(path, format_mot(rows));
}

namespace {

MotRow to_row(int frame, int id, const BoundingBox& b, double conf, const FrameSize& size) {
  return MotRow{frame, id, b.left() * size.width, b.top() * size.height, b.w * size.width, b.h * size.height, conf};
}

}  // namespace

std::vector<MotRow> to_mot_rows(std::span<const FrameResult> results, const FrameSize& size) {
  std::vector<MotRow> rows;
  for (const FrameResult& r : results) {
    for (const TrackOutput& t : r.tracks) rows.push_back(to_row(r.frame, static_cast<int>(t.id), t.box, t.confidence, size));
  }
  return rows;
}

std::vector<MotRow> to_mot_rows(const GroundTruth& truth, const FrameSize& size) {
  std::vector<MotRow> rows;
  for (std::size_t t = 0; t < truth.frames.size(); ++t) {
    for (const GtObject& o : truth.frames[t]) {
      if (o.visible) rows.push_back(to_row(static_cast<int>(t) + 1, o.id, o.box, 1.0, size));
    }
  }
  return rows;
}

TrackSequence to_sequence(std::span<const MotRow> rows, const FrameSize& size, int first, int last) {
  if (last < first) return {};
  TrackSequence seq(static_cast<std::size_t>(last - first + 1));
  for (const MotRow& r : rows) {
    if (r.frame < first || r.frame > last) continue;
    const BoundingBox b{(r.left + 0.5 * r.width) / size.width, (r.top + 0.5 * r.height) / size.height,
                        r.width / size.width, r.height / size.height};
    auto& frame = seq[static_cast<std::size_t>(r.frame - first)];
    for (const LabeledBox& x : frame) {
      if (x.id == r.id) {
        throw ValidationError("id " + std::to_string(r.id) + " appears twice in frame " + std::to_string(r.frame));
      }
    }
    frame.push_back({r.id, b});
  }
  return seq;
}

void export_gt(const GroundTruth& truth, const std::filesystem::path& path, const FrameSize& size) {
  write_mot(path, to_mot_rows(truth, size));
}

// ---- Binary helpers ----------------------------------------------------------

namespace {

class Writer {
 public:
  void bytes(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  Reader(std::span<const std::uint8_t> in, const char* what) : in_(in), what_(what) {}

  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) {
      throw LengthError(std::string(what_) + ": truncated at byte " + std::to_string(pos_));
    }
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::size_t remaining() const { return in_.size() - pos_; }
  void finish() const {
    if (remaining() != 0) {
      throw LengthError(std::string(what_) + ": " + std::to_string(remaining()) + " trailing bytes");
    }
  }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
  const char* what_;
};

constexpr std::string_view kFixtureMagic = "MEMOFIX1";
constexpr std::string_view kParamsMagic = "MEMOPAR1";

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > 0xffffffffULL) throw ValidationError(std::string(what) + " exceeds 32 bits");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

// ---- Fixture streams ---------------------------------------------------------

std::vector<std::uint8_t> encode_fixture(std::span<const FrameFeatures> frames, std::size_t width) {
  if (width == 0) throw ValidationError("fixture width must be >= 1");
  Writer w;
  w.bytes(kFixtureMagic);
  w.u32(checked_u32(width, "width"));
  w.u32(checked_u32(frames.size(), "frame count"));
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const FrameFeatures& f = frames[i];
    if (f.size() > 0 && f.tokens.cols() != width) throw ShapeError("fixture frame width mismatch");
    if (f.positions.rows() != f.size() || (f.size() > 0 && f.positions.cols() != 2)) {
      throw ShapeError("fixture positions must be N x 2");
    }
    if (f.frame != static_cast<int>(i) + 1) throw ValidationError("fixture frames must be numbered 1..n");
    w.u32(checked_u32(f.size(), "token count"));
  }
  for (const FrameFeatures& f : frames) {
    for (double v : f.tokens.values()) w.f32(static_cast<float>(v));
    for (double v : f.positions.values()) w.f32(static_cast<float>(v));
  }
  return w.take();
}

std::vector<FrameFeatures> decode_fixture(std::span<const std::uint8_t> bytes, std::size_t* width_out) {
  Reader r(bytes, "fixture");
  if (bytes.size() < kFixtureMagic.size() ||
      std::memcmp(bytes.data(), kFixtureMagic.data(), kFixtureMagic.size()) != 0) {
    throw FormatError("fixture: bad magic");
  }
  r.bytes(kFixtureMagic.size());
  const std::uint32_t width = r.u32();
  const std::uint32_t count = r.u32();
  if (width == 0) throw FormatError("fixture: width is zero");
  // Every frame needs at least its 4-byte count; reject absurd headers early.
  if (static_cast<std::uint64_t>(count) * 4 > r.remaining()) throw LengthError("fixture: truncated frame table");
  std::vector<std::uint32_t> counts(count);
  std::uint64_t payload = 0;
  for (auto& c : counts) {
    c = r.u32();
    payload += static_cast<std::uint64_t>(c) * (width + 2) * 4;
  }
  if (payload > r.remaining()) throw LengthError("fixture: payload shorter than declared");
  if (payload < r.remaining()) throw LengthError("fixture: trailing bytes after payload");
  std::vector<FrameFeatures> frames;
  frames.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    FrameFeatures f;
    f.frame = static_cast<int>(i) + 1;
    f.tokens = Tensor2(counts[i], width);
    f.positions = Tensor2(counts[i], 2);
    for (double& v : f.tokens.values()) v = r.f32();
    for (double& v : f.positions.values()) v = r.f32();
    if (!f.tokens.all_finite() || !f.positions.all_finite()) {
      throw FormatError("fixture: non-finite value in frame " + std::to_string(i + 1));
    }
    frames.push_back(std::move(f));
  }
  r.finish();
  if (width_out) *width_out = width;
  return frames;
}

void write_fixture(const std::filesystem::path& path, std::span<const FrameFeatures> frames, std::size_t width) {
  write_bytes(path, encode_fixture(frames, width));
}

std::vector<FrameFeatures> read_fixture(const std::filesystem::path& path, std::size_t* width) {
  return decode_fixture(read_bytes(path), width);
}

// ---- Parameter snapshots -----------------------------------------------------

std::vector<std::uint8_t> encode_params(const NamedTensors& tensors) {
  Writer w;
  w.bytes(kParamsMagic);
  w.u32(checked_u32(tensors.size(), "tensor count"));
  for (const auto& [name, t] : tensors) {
    w.u32(checked_u32(name.size(), "name length"));
    w.bytes(name);
    w.u32(checked_u32(t.rows(), "rows"));
    w.u32(checked_u32(t.cols(), "cols"));
    for (double v : t.values()) w.f64(v);
  }
  return w.take();
}

NamedTensors decode_params(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kParamsMagic.size() ||
      std::memcmp(bytes.data(), kParamsMagic.data(), kParamsMagic.size()) != 0) {
    throw FormatError("params: bad magic");
  }
  Reader r(bytes, "params");
  r.bytes(kParamsMagic.size());
  const std::uint32_t count = r.u32();
  NamedTensors out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t len = r.u32();
    std::string name = r.bytes(len);
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    r.need(static_cast<std::size_t>(rows) * cols * 8);
    Tensor2 t(rows, cols);
    for (double& v : t.values()) v = r.f64();
    if (!t.all_finite()) throw FormatError("params: non-finite value in " + name);
    if (!out.emplace(std::move(name), std::move(t)).second) throw FormatError("params: duplicate tensor name");
  }
  r.finish();
  return out;
}

void write_params(const std::filesystem::path& path, const NamedTensors& tensors) {
  write_bytes(path, encode_params(tensors));
}

NamedTensors read_params(const std::filesystem::path& path) { return decode_params(read_bytes(path)); }

namespace {

Tensor2 scalar(double v) { return Tensor2(1, 1, v); }

void put_mlp(NamedTensors& out, const std::string& p, const MlpParams& m) {
  out[p + ".w1"] = m.w1;
  out[p + ".b1"] = m.b1;
  out[p + ".w2"] = m.w2;
  out[p + ".b2"] = m.b2;
}

void put_attn(NamedTensors& out, const std::string& p, const AttentionParams& a) {
  out[p + ".wq"] = a.wq;
  out[p + ".wk"] = a.wk;
  out[p + ".wv"] = a.wv;
  out[p + ".wo"] = a.wo;
  out[p + ".heads"] = scalar(static_cast<double>(a.heads));
}

const Tensor2& get(const NamedTensors& in, const std::string& name) {
  const auto it = in.find(name);
  if (it == in.end()) throw FormatError("params: missing tensor " + name);
  return it->second;
}

std::size_t get_count(const NamedTensors& in, const std::string& name) {
  const Tensor2& t = get(in, name);
  if (t.rows() != 1 || t.cols() != 1 || t(0, 0) < 0.0 || t(0, 0) != std::floor(t(0, 0)) || t(0, 0) > 1e6) {
    throw FormatError("params: " + name + " must be a non-negative integer scalar");
  }
  return static_cast<std::size_t>(t(0, 0));
}

MlpParams get_mlp(const NamedTensors& in, const std::string& p) {
  return MlpParams{get(in, p + ".w1"), get(in, p + ".b1"), get(in, p + ".w2"), get(in, p + ".b2")};
}

AttentionParams get_attn(const NamedTensors& in, const std::string& p) {
  return AttentionParams{get(in, p + ".wq"), get(in, p + ".wk"), get(in, p + ".wv"), get(in, p + ".wo"),
                         get_count(in, p + ".heads")};
}

}  // namespace

NamedTensors flatten(const ModelParams& m) {
  NamedTensors out;
  out["decoder.width"] = scalar(static_cast<double>(m.decoder.width()));
  const std::pair<const char*, const std::vector<DecoderLayerParams>*> groups[] = {
      {"decoder.det", &m.decoder.det_layers}, {"decoder.joint", &m.decoder.joint_layers}};
  for (const auto& [prefix, layers] : groups) {
    out[std::string(prefix) + ".count"] = scalar(static_cast<double>(layers->size()));
    for (std::size_t i = 0; i < layers->size(); ++i) {
      const std::string p = std::string(prefix) + "." + std::to_string(i);
      const DecoderLayerParams& l = (*layers)[i];
      put_attn(out, p + ".self_attn", l.self_attn);
      put_attn(out, p + ".cross_attn", l.cross_attn);
      put_mlp(out, p + ".ffn", l.ffn);
      out[p + ".post_norm"] = scalar(l.post_norm ? 1.0 : 0.0);
    }
  }
  put_mlp(out, "decoder.box_head", m.decoder.box_head);
  put_mlp(out, "decoder.conf_head", m.decoder.conf_head);
  out["decoder.null_token"] = m.decoder.null_token;
  put_mlp(out, "tim.weight_mlp", m.tim.weight_mlp);
  put_mlp(out, "tim.fuse_mlp", m.tim.fuse_mlp);
  put_attn(out, "tim.attn", m.tim.attn);
  put_mlp(out, "tim.ffn", m.tim.ffn);
  const std::size_t d = m.decoder.width();
  Tensor2 emb(m.queries.size(), d);
  Tensor2 anchors(m.queries.size(), 2);
  for (std::size_t i = 0; i < m.queries.size(); ++i) {
    if (m.queries[i].embedding.size() != d) throw ShapeError("detect query width mismatch");
    std::copy(m.queries[i].embedding.begin(), m.queries[i].embedding.end(), emb.row(i).begin());
    anchors(i, 0) = m.queries[i].anchor.x;
    anchors(i, 1) = m.queries[i].anchor.y;
  }
  out["queries.embeddings"] = emb;
  out["queries.anchors"] = anchors;
  return out;
}

ModelParams unflatten(const NamedTensors& in) {
  ModelParams m;
  m.decoder.layout = TokenLayout::for_width(get_count(in, "decoder.width"));
  for (auto [prefix, layers] : {std::pair{"decoder.det", &m.decoder.det_layers},
                                std::pair{"decoder.joint", &m.decoder.joint_layers}}) {
    const std::size_t n = get_count(in, std::string(prefix) + ".count");
    for (std::size_t i = 0; i < n; ++i) {
      const std::string p = std::string(prefix) + "." + std::to_string(i);
      layers->push_back(DecoderLayerParams{get_attn(in, p + ".self_attn"), get_attn(in, p + ".cross_attn"),
                                           get_mlp(in, p + ".ffn"), get_count(in, p + ".post_norm") != 0});
    }
  }
  m.decoder.box_head = get_mlp(in, "decoder.box_head");
  m.decoder.conf_head = get_mlp(in, "decoder.conf_head");
  m.decoder.null_token = get(in, "decoder.null_token");
  m.tim.weight_mlp = get_mlp(in, "tim.weight_mlp");
  m.tim.fuse_mlp = get_mlp(in, "tim.fuse_mlp");
  m.tim.attn = get_attn(in, "tim.attn");
  m.tim.ffn = get_mlp(in, "tim.ffn");
  const Tensor2& emb = get(in, "queries.embeddings");
  const Tensor2& anchors = get(in, "queries.anchors");
  if (anchors.rows() != emb.rows() || (anchors.rows() > 0 && anchors.cols() != 2)) {
    throw FormatError("params: query anchors do not match embeddings");
  }
  for (std::size_t i = 0; i < emb.rows(); ++i) {
    m.queries.push_back(DetectQuery{std::vector<double>(emb.row(i).begin(), emb.row(i).end()),
                                    Point{anchors(i, 0), anchors(i, 1)}});
  }
  m.decoder.validate();
  validate(m.tim, m.decoder.width());
  return m;
}

// ---- Run configuration -------------------------------------------------------

namespace {

std::string to_string(ModelSource s) {
  switch (s) {
    case ModelSource::structured: return "structured";
    case ModelSource::random: return "random";
    case ModelSource::file: return "file";
  }
  return "?";
}

std::string to_string(PrevOutputPolicy p) { return p == PrevOutputPolicy::on_commit ? "on_commit" : "every_frame"; }

// Shortest text that parses back to the same double.
std::string num(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

InferenceConfig RunConfig::inference(const std::filesystem::path& base_dir) const {
  InferenceConfig cfg;
  cfg.tau_det = tau_det;
  cfg.tau_tck = tau_tck;
  cfg.tau_next = tau_next;
  cfg.t_miss = t_miss;
  cfg.memory.lambda = lambda;
  cfg.iou_suppress = iou_suppress;
  cfg.variant = variant;
  cfg.ffn_residual = ffn_residual;
  cfg.prev_output = prev_output;
  switch (model) {
    case ModelSource::structured:
      cfg.model = structured_model(shape, variant, StructuredGains::for_similarity(similarity));
      break;
    case ModelSource::random:
      cfg.model = random_model(shape, seed);
      break;
    case ModelSource::file: {
      if (params_file.empty()) throw ConfigError("model = file requires params_file");
      std::filesystem::path p(params_file);
      if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
      cfg.model = unflatten(read_params(p));
      break;
    }
  }
  cfg.validate();
  return cfg;
}

std::string RunConfig::to_text() const {
  std::ostringstream o;
  o << "config_version = " << kVersion << "\n"
    << "model = " << to_string(model) << "\n";
  if (!params_file.empty()) o << "params_file = " << params_file << "\n";
  o << "seed = " << seed << "\n"
    << "width = " << shape.width << "\n"
    << "heads = " << shape.heads << "\n"
    << "l_det = " << shape.det_layers << "\n"
    << "l_joint = " << shape.joint_layers << "\n"
    << "det_queries = " << shape.det_queries << "\n"
    << "similarity = " << num(similarity) << "\n"
    << "lambda = " << num(lambda) << "\n"
    << "tau_det = " << num(tau_det) << "\n"
    << "tau_tck = " << num(tau_tck) << "\n"
    << "tau_next = " << num(tau_next) << "\n"
    << "t_miss = " << t_miss << "\n"
    << "iou_suppress = " << num(iou_suppress) << "\n"
    << "variant = " << memotr::to_string(variant) << "\n"
    << "ffn_residual = " << (ffn_residual ? "true" : "false") << "\n"
    << "prev_output = " << to_string(prev_output) << "\n"
    << "frame_width = " << num(frame.width) << "\n"
    << "frame_height = " << num(frame.height) << "\n";
  return o.str();
}

RunConfig parse_run_config(std::string_view text) {
  RunConfig c;
  bool versioned = false;
  std::map<std::string, std::size_t> seen;
  const auto lines = lines_of(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t line = i + 1;
    std::string_view s = lines[i];
    if (const auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected key = value", line);
    const std::string key(trim(s.substr(0, eq)));
    const std::string_view value = trim(s.substr(eq + 1));
    if (!seen.emplace(key, line).second) throw ParseError("duplicate key '" + key + "'", line);
    auto real = [&](double& out) {
      if (!parse_double(value, out)) throw ParseError(key + " must be a finite number", line);
    };
    auto count = [&](auto& out) {
      if (!parse_int(value, out)) throw ParseError(key + " must be a non-negative integer", line);
    };
    if (key == "config_version") {
      int v = 0;
      if (!parse_int(value, v)) throw ParseError("config_version must be an integer", line);
      if (v != RunConfig::kVersion) throw ConfigError("unsupported config_version " + std::to_string(v));
      versioned = true;
    } else if (key == "model") {
      if (value == "structured") c.model = ModelSource::structured;
      else if (value == "random") c.model = ModelSource::random;
      else if (value == "file") c.model = ModelSource::file;
      else throw ParseError("model must be structured, random or file", line);
    } else if (key == "params_file") {
      c.params_file = std::string(value);
    } else if (key == "seed") {
      count(c.seed);
    } else if (key == "width") {
      count(c.shape.width);
    } else if (key == "heads") {
      count(c.shape.heads);
    } else if (key == "l_det") {
      count(c.shape.det_layers);
    } else if (key == "l_joint") {
      count(c.shape.joint_layers);
    } else if (key == "det_queries") {
      count(c.shape.det_queries);
    } else if (key == "similarity") {
      real(c.similarity);
    } else if (key == "lambda") {
      real(c.lambda);
    } else if (key == "tau_det") {
      real(c.tau_det);
    } else if (key == "tau_tck") {
      real(c.tau_tck);
    } else if (key == "tau_next") {
      real(c.tau_next);
    } else if (key == "t_miss") {
      count(c.t_miss);
    } else if (key == "iou_suppress") {
      real(c.iou_suppress);
    } else if (key == "variant") {
      try {
        c.variant = parse_tim_variant(std::string(value));
      } catch (const UsageError& e) {
        throw ParseError(e.what(), line);
      }
    } else if (key == "ffn_residual") {
      if (value == "true") c.ffn_residual = true;
      else if (value == "false") c.ffn_residual = false;
      else throw ParseError("ffn_residual must be true or false", line);
    } else if (key == "prev_output") {
      if (value == "on_commit") c.prev_output = PrevOutputPolicy::on_commit;
      else if (value == "every_frame") c.prev_output = PrevOutputPolicy::every_frame;
      else throw ParseError("prev_output must be on_commit or every_frame", line);
    } else if (key == "frame_width") {
      real(c.frame.width);
    } else if (key == "frame_height") {
      real(c.frame.height);
    } else {
      throw ParseError("unknown key '" + key + "'", line);
    }
  }
  if (!versioned) throw ConfigError("config_version is required");
  if (!(c.frame.width > 0.0) || !(c.frame.height > 0.0)) throw ConfigError("frame size must be positive");
  if (c.t_miss < 1) throw ConfigError("t_miss must be >= 1");
  return c;
}

RunConfig read_run_config(const std::filesystem::path& path) { return parse_run_config(read_text(path)); }

// ---- Metrics report ----------------------------------------------------------

std::string format_report(const MetricsReport& r, std::size_t sequences) {
  std::string o;
  auto line = [&](const std::string& key, const std::string& value) { o += key + " = " + value + "\n"; };
  auto curve = [&](const std::string& key, const std::array<double, kAlphaCount>& v) {
    std::string s;
    for (std::size_t k = 0; k < v.size(); ++k) s += (k ? " " : "") + fixed6(v[k]);
    line(key, s);
  };
  o += "# memotr metrics report\n";
  line("report_version", std::to_string(kReportVersion));
  line("sequences", std::to_string(sequences));
  line("HOTA", fixed6(r.hota.hota));
  line("DetA", fixed6(r.hota.deta));
  line("AssA", fixed6(r.hota.assa));
  line("MOTA", fixed6(r.clear.mota));
  line("IDF1", fixed6(r.id.idf1));
  line("IDSW", std::to_string(r.clear.idsw));
  line("FP", std::to_string(r.clear.fp));
  line("FN", std::to_string(r.clear.fn));
  line("TP", std::to_string(r.clear.tp));
  line("IDTP", std::to_string(r.id.idtp));
  line("gt_dets", std::to_string(r.id.gt_dets));
  line("pred_dets", std::to_string(r.id.pred_dets));
  curve("alpha", hota_alphas());
  curve("HOTA_alpha", r.hota.hota_alpha);
  curve("DetA_alpha", r.hota.deta_alpha);
  curve("AssA_alpha", r.hota.assa_alpha);
  return o;
}

}  // namespace memotr
