#include "memotr/acceptance.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <thread>

#include "memotr/cli.hpp"
#include "memotr/io.hpp"
#include "memotr/oracles.hpp"
#include "memotr/pipeline.hpp"

namespace memotr::acceptance {

namespace {

namespace fs = std::filesystem;

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Tensor2 uniform_tensor(Rng& rng, std::size_t r, std::size_t c, double lo, double hi) {
  Tensor2 t(r, c);
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

double max_abs_diff(const Tensor2& a, const Tensor2& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a.values()[i] - b.values()[i]));
  return worst;
}

// ---- 1 ------------------------------------------------------------------------

Outcome ema_closed_form() {
  Outcome o{1, "memory update closed form", false, {}, 0.0};
  Rng rng(1);
  double worst = 0.0;
  for (double lambda : {0.005, 0.01, 0.02, 0.04}) {
    const Tensor2 m0 = uniform_tensor(rng, 1, 64, -1.0, 1.0);
    const Tensor2 out = uniform_tensor(rng, 1, 64, -1.0, 1.0);
    LongTermMemory m = init_memory(m0.values());
    for (int k = 0; k < 100; ++k) m = ema_update(m, out.values(), MemoryConfig{lambda});
    const double f = 1.0 - std::pow(1.0 - lambda, 100);
    double scale = 0.0;
    double diff = 0.0;
    for (std::size_t i = 0; i < 64; ++i) {
      const double closed = m0(0, i) + f * (out(0, i) - m0(0, i));
      scale = std::max(scale, std::abs(closed));
      diff = std::max(diff, std::abs(m.value[i] - closed));
    }
    worst = std::max(worst, diff / scale);
  }
  o.pass = worst < 1e-12;
  o.detail = "max relative error " + fmt("%.2e", worst) + " over lambda {0.005,0.01,0.02,0.04}, 100 steps";
  return o;
}

// ---- 2 ------------------------------------------------------------------------

std::vector<Tensor2*> blocks(TimParams& p) {
  std::vector<Tensor2*> out;
  for (MlpParams* m : {&p.weight_mlp, &p.fuse_mlp}) {
    out.insert(out.end(), {&m->w1, &m->b1, &m->w2, &m->b2});
  }
  out.insert(out.end(), {&p.attn.wq, &p.attn.wk, &p.attn.wv, &p.attn.wo});
  out.insert(out.end(), {&p.ffn.w1, &p.ffn.b1, &p.ffn.w2, &p.ffn.b2});
  return out;
}

TimParamsT<Var> params_from(std::span<const Var> v, std::size_t heads) {
  TimParamsT<Var> p;
  p.weight_mlp = {v[0], v[1], v[2], v[3]};
  p.fuse_mlp = {v[4], v[5], v[6], v[7]};
  p.attn = {v[8], v[9], v[10], v[11], heads};
  p.ffn = {v[12], v[13], v[14], v[15]};
  return p;
}

Outcome tim_gradients() {
  Outcome o{2, "tim_forward gradient check", false, {}, 0.0};
  GradReport worst;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    TimParams params = random_tim(16, 4, seed);
    Rng rng(1000 + seed);
    std::vector<Tensor2> inputs{rng.normal_tensor(4, 16, 1.0), rng.normal_tensor(4, 16, 1.0),
                                rng.normal_tensor(4, 16, 1.0)};
    for (Tensor2* b : blocks(params)) inputs.push_back(*b);
    const Tensor2 w_embed = rng.normal_tensor(4, 16, 1.0);
    const Tensor2 w_memory = rng.normal_tensor(4, 16, 1.0);
    const TapedFunction f = [&](Tape& tape, std::span<const Var> in) {
      const TimParamsT<Var> p = params_from(in.subspan(3), 4);
      const TimOutputT<Var> out = tim_forward(in[0], in[1], in[2], p, TimOptions{});
      return add(sum(mul(out.embeddings, tape.constant(w_embed))), sum(mul(out.memories, tape.constant(w_memory))));
    };
    const GradReport r = grad_report(f, inputs, 1e-5);
    worst.entrywise = std::max(worst.entrywise, r.entrywise);
    worst.normwise = std::max(worst.normwise, r.normwise);
  }
  o.pass = worst.entrywise < 1e-5;
  o.detail = "max relative error " + fmt("%.2e", worst.entrywise) + " (normwise " + fmt("%.2e", worst.normwise) +
             ") over 10 seeds, d=16, 4 tracks, all inputs and weights";
  return o;
}

// ---- 3 ------------------------------------------------------------------------

Outcome attention_invariants() {
  Outcome o{3, "attention invariants", false, {}, 0.0};
  Rng rng(3);
  double sum_err = 0.0;
  double perm_err = 0.0;
  bool single_exact = true;
  for (int c = 0; c < 100; ++c) {
    const double spread = std::pow(10.0, rng.uniform(-2.0, 3.0));
    const Tensor2 logits = uniform_tensor(rng, 1 + rng.below(8), 1 + rng.below(12), -spread, spread);
    const Tensor2 sm = softmax_rows(logits);
    for (std::size_t r = 0; r < sm.rows(); ++r) {
      double s = 0.0;
      for (double v : sm.row(r)) s += v;
      sum_err = std::max(sum_err, std::abs(s - 1.0));
    }

    const std::size_t heads = std::size_t{1} << rng.below(3);
    const AttentionParams p = random_tim(16, heads, 500 + static_cast<std::uint64_t>(c)).attn;
    const std::size_t nq = 1 + rng.below(6);
    const std::size_t nk = 1 + rng.below(9);
    const Tensor2 q = rng.normal_tensor(nq, 16, 1.0);
    const Tensor2 k = rng.normal_tensor(nk, 16, 1.0);
    const Tensor2 v = rng.normal_tensor(nk, 16, 1.0);
    std::vector<std::size_t> perm(nk);
    for (std::size_t i = 0; i < nk; ++i) perm[i] = i;
    for (std::size_t i = nk; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    Tensor2 kp(nk, 16);
    Tensor2 vp(nk, 16);
    for (std::size_t i = 0; i < nk; ++i) {
      std::copy(k.row(perm[i]).begin(), k.row(perm[i]).end(), kp.row(i).begin());
      std::copy(v.row(perm[i]).begin(), v.row(perm[i]).end(), vp.row(i).begin());
    }
    perm_err = std::max(perm_err, max_abs_diff(mha(q, k, v, p), mha(q, kp, vp, p)));

    const Tensor2 k1 = slice_rows(k, 0, 1);
    const Tensor2 v1 = slice_rows(v, 0, 1);
    const Tensor2 single = mha(q, k1, v1, p);
    const Tensor2 expected = matmul(matmul(v1, p.wv), p.wo);
    for (std::size_t r = 0; r < nq; ++r) {
      single_exact = single_exact && std::equal(single.row(r).begin(), single.row(r).end(), expected.row(0).begin());
    }
  }
  o.pass = sum_err <= 1e-12 && perm_err <= 1e-12 && single_exact;
  o.detail = "100 cases: softmax row-sum error " + fmt("%.2e", sum_err) + ", permutation error " +
             fmt("%.2e", perm_err) + ", single key " + (single_exact ? "exact" : "NOT exact");
  return o;
}

// ---- 4 ------------------------------------------------------------------------

Outcome hungarian_optimality() {
  Outcome o{4, "hungarian optimality", false, {}, 0.0};
  Rng rng(4);
  int mismatches = 0;
  for (int c = 0; c < 200; ++c) {
    const std::size_t n = 1 + rng.below(7);
    const std::size_t m = 1 + rng.below(7);
    Tensor2 cost(n, m);
    // Half the instances are integer-valued so ties are common.
    const bool integral = c % 2 == 0;
    for (double& v : cost.values()) v = integral ? static_cast<double>(rng.below(10)) : rng.uniform(-10.0, 10.0);
    const Assignment a = hungarian(cost);
    bool valid = a.pairs.size() == std::min(n, m);
    std::vector<bool> row_used(n, false);
    std::vector<bool> col_used(m, false);
    for (auto [r, col] : a.pairs) {
      valid = valid && !row_used[r] && !col_used[col];
      row_used[r] = true;
      col_used[col] = true;
    }
    if (!valid || a.cost != oracle::brute_assignment_cost(cost)) ++mismatches;
  }
  o.pass = mismatches == 0;
  o.detail = "200 instances up to 7x7, " + std::to_string(mismatches) + " differ from enumeration";
  return o;
}

// ---- 5 ------------------------------------------------------------------------

Outcome metrics_oracles() {
  Outcome o{5, "metrics match brute-force oracles", false, {}, 0.0};
  Rng rng(5);
  double worst = 0.0;
  int count_mismatch = 0;
  for (int c = 0; c < 100; ++c) {
    const oracle::MetricsCase mc = oracle::random_metrics_case(rng);
    const MetricsReport r = evaluate(mc.gt, mc.pred);
    const HotaResult h = oracle::brute_hota(mc.gt, mc.pred);
    const ClearResult cl = oracle::brute_clear(mc.gt, mc.pred);
    const IdResult id = oracle::brute_idf1(mc.gt, mc.pred);
    for (double d : {r.hota.hota - h.hota, r.hota.deta - h.deta, r.hota.assa - h.assa, r.clear.mota - cl.mota,
                     r.id.idf1 - id.idf1}) {
      worst = std::max(worst, std::abs(d));
    }
    for (std::size_t k = 0; k < kAlphaCount; ++k) worst = std::max(worst, std::abs(r.hota.hota_alpha[k] - h.hota_alpha[k]));
    if (r.clear.idsw != cl.idsw || r.clear.tp != cl.tp || r.id.idtp != id.idtp) ++count_mismatch;
  }
  bool perfect = true;
  for (int c = 0; c < 20; ++c) {
    oracle::MetricsCase mc = oracle::random_metrics_case(rng);
    TrackSequence pred = mc.gt;
    for (auto& f : pred) {
      for (auto& b : f) b.id += 1000;
    }
    if (std::all_of(mc.gt.begin(), mc.gt.end(), [](const FrameBoxes& f) { return f.empty(); })) continue;
    const MetricsReport r = evaluate(mc.gt, pred);
    perfect = perfect && r.hota.hota == 1.0 && r.hota.deta == 1.0 && r.hota.assa == 1.0 && r.clear.mota == 1.0 &&
              r.id.idf1 == 1.0;
  }
  o.pass = worst <= 1e-9 && count_mismatch == 0 && perfect;
  o.detail = "100 instances: max score difference " + fmt("%.2e", worst) + ", " + std::to_string(count_mismatch) +
             " count mismatches; perfect tracking " + (perfect ? "scores exactly 1" : "does NOT score 1");
  return o;
}

// ---- 6 ------------------------------------------------------------------------

std::uint64_t state_hash(const Track& t) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&](const std::vector<double>& v) {
    for (double x : v) {
      const auto bits = std::bit_cast<std::uint64_t>(x);
      for (int i = 0; i < 8; ++i) {
        h ^= (bits >> (8 * i)) & 0xff;
        h *= 1099511628211ULL;
      }
    }
  };
  mix(t.embedding);
  mix(t.memory.value);
  return h;
}

Outcome commit_gating() {
  Outcome o{6, "confidence-gated commit", false, {}, 0.0};
  ScenarioConfig sc = suite_config("dance", 6, 200);
  const Scenario s = generate(sc);
  const InferenceConfig cfg = structured_config(TimVariant::full, 0.01, StructuredGains::for_similarity(sc.similarity));
  Tracker tracker(cfg);
  std::size_t gated = 0;
  std::size_t committed = 0;
  std::size_t violations = 0;
  for (const FrameFeatures& f : s.frames) {
    std::map<std::uint64_t, std::uint64_t> before;
    for (const Track& t : tracker.tracks()) before[t.id] = state_hash(t);
    tracker.step(f);
    std::map<std::uint64_t, std::uint64_t> after;
    for (const Track& t : tracker.tracks()) after[t.id] = state_hash(t);
    for (const StepTrace& tr : tracker.last_trace()) {
      if (tr.newborn) continue;
      const bool changed = before.at(tr.id) != after.at(tr.id);
      const bool should = tr.confidence > cfg.tau_next;
      (should ? committed : gated) += 1;
      if (changed != should) ++violations;
    }
  }
  o.pass = violations == 0 && gated > 0 && committed > 0;
  o.detail = "200 frames: " + std::to_string(committed) + " commits, " + std::to_string(gated) +
             " gated steps, " + std::to_string(violations) + " violations";
  return o;
}

// ---- 7 ------------------------------------------------------------------------

// Tracker id matched to gt target `target` in `frame`, if any.
std::optional<std::uint64_t> matched_id(const Scenario& s, const std::vector<FrameResult>& results, int target,
                                        int frame) {
  const auto& objs = s.truth.frames[static_cast<std::size_t>(frame - 1)];
  const auto it = std::find_if(objs.begin(), objs.end(), [&](const GtObject& g) { return g.id == target; });
  if (it == objs.end() || !it->visible) return std::nullopt;
  std::optional<std::uint64_t> best;
  double best_iou = 0.5;
  for (const TrackOutput& t : results[static_cast<std::size_t>(frame - 1)].tracks) {
    const double v = iou(t.box, it->box);
    if (v >= best_iou) {
      best_iou = v;
      best = t.id;
    }
  }
  return best;
}

struct OcclusionProbe {
  bool kept = false;
  bool removed = false;
  bool fresh = false;
};

OcclusionProbe probe_occlusion(std::uint64_t seed, int length, int t_miss) {
  ScenarioConfig sc = suite_config("occlusion", seed, 40 + length + 30);
  sc.random_occlusions = 0;
  sc.occlusions = {{1, 40, 40 + length - 1}};
  const Scenario s = generate(sc);
  InferenceConfig cfg = structured_config(TimVariant::full, 0.01, StructuredGains::for_similarity(sc.similarity));
  cfg.t_miss = t_miss;
  Tracker tracker(cfg);
  std::vector<FrameResult> results;
  for (const FrameFeatures& f : s.frames) results.push_back(tracker.step(f));
  OcclusionProbe p;
  const auto before = matched_id(s, results, 1, 39);
  std::optional<std::uint64_t> after;
  for (int f = 40 + length; f < 40 + length + 5 && !after; ++f) after = matched_id(s, results, 1, f);
  if (!before || !after) return p;
  const auto& removed = tracker.removed_ids();
  p.removed = std::find(removed.begin(), removed.end(), *before) != removed.end();
  p.kept = *after == *before && !p.removed;
  p.fresh = *after != *before;
  return p;
}

Outcome lifecycle_occlusion() {
  Outcome o{7, "lifecycle under occlusion", false, {}, 0.0};
  const int t_miss = InferenceConfig{}.t_miss;
  int kept = 0;
  int replaced = 0;
  const int seeds = 5;
  for (std::uint64_t seed = 1; seed <= seeds; ++seed) {
    if (probe_occlusion(seed, t_miss - 1, t_miss).kept) ++kept;
    const OcclusionProbe p = probe_occlusion(seed, t_miss + 1, t_miss);
    if (p.removed && p.fresh) ++replaced;
  }
  o.pass = kept == seeds && replaced == seeds;
  o.detail = "occlusion of " + std::to_string(t_miss - 1) + " frames keeps the id in " + std::to_string(kept) + "/" +
             std::to_string(seeds) + " scenarios; " + std::to_string(t_miss + 1) +
             " frames removes it and assigns a fresh id in " + std::to_string(replaced) + "/" + std::to_string(seeds);
  return o;
}

// ---- 8, 9 ---------------------------------------------------------------------

unsigned worker_count(std::size_t cases) {
  return static_cast<unsigned>(std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, cases));
}

Outcome ablation_direction() {
  Outcome o{8, "ablation directionality", false, {}, 0.0};
  const SuiteSpec spec = default_suite("dance", 20);
  const std::vector<SuiteCase> cases{{TimVariant::full, 0.01},
                                     {TimVariant::memory_off, 0.01},
                                     {TimVariant::attn_off, 0.01},
                                     {TimVariant::naive, 0.01}};
  const auto rows = run_suite(spec, cases, std::nullopt, worker_count(cases.size()));
  const double assa_full = rows[0].mean_assa();
  const double assa_off = rows[1].mean_assa();
  const double idsw_full = rows[0].mean_idsw();
  const double idsw_naive = rows[3].mean_idsw();
  o.pass = assa_full >= assa_off + 0.05 && idsw_full <= 0.8 * idsw_naive;
  o.detail = "AssA full " + fmt("%.1f", 100 * assa_full) + " vs memory-off " + fmt("%.1f", 100 * assa_off) +
             "; IDSW/seq full " + fmt("%.2f", idsw_full) + " vs naive " + fmt("%.2f", idsw_naive) + "\n" +
             format_suite_table(rows);
  return o;
}

Outcome lambda_sweep() {
  Outcome o{9, "memory rate sweep", false, {}, 0.0};
  const SuiteSpec spec = default_suite("dance", 20);
  std::vector<SuiteCase> cases;
  for (double l : {0.005, 0.01, 0.02, 0.04, 1.0}) cases.push_back({TimVariant::full, l});
  const auto rows = run_suite(spec, cases, std::nullopt, worker_count(cases.size()));
  const double at_001 = rows[1].mean_assa();
  const double at_1 = rows[4].mean_assa();
  o.pass = at_001 > at_1;
  o.detail = "AssA lambda=0.01 " + fmt("%.1f", 100 * at_001) + " vs lambda=1 " + fmt("%.1f", 100 * at_1) + "\n" +
             format_suite_table(rows);
  return o;
}

// ---- 10 -----------------------------------------------------------------------

int run_cli(const std::vector<std::string>& args, std::string& log) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(args, out, err);
  log += err.str();
  return code;
}

Outcome determinism(const fs::path& work) {
  Outcome o{10, "end-to-end determinism", false, {}, 0.0};
  std::string log;
  std::vector<std::string> outputs[2];
  for (int pass = 0; pass < 2; ++pass) {
    const fs::path dir = work / ("determinism-" + std::to_string(pass));
    fs::remove_all(dir);
    const std::string d = dir.string();
    int code = run_cli({"memotr", "simulate", "--kind", "dance", "--seed", "42", "--out-dir", d}, log);
    if (code == 0) code = run_cli({"memotr", "track", "--fixture", d + "/fixture.bin", "--out", d + "/pred.txt"}, log);
    if (code == 0) {
      code = run_cli({"memotr", "eval", "--gt", d + "/gt.txt", "--pred", d + "/pred.txt", "--report", d + "/report.txt"},
                     log);
    }
    if (code != 0) {
      o.detail = "pipeline exited with code " + std::to_string(code) + ": " + log;
      return o;
    }
    for (const char* name : {"fixture.bin", "gt.txt", "pred.txt", "report.txt"}) outputs[pass].push_back(read_text(dir / name));
  }
  o.pass = outputs[0] == outputs[1] && !outputs[0][2].empty();
  o.detail = std::string("seed 42 twice: fixture, gt, MOT output and report ") +
             (o.pass ? "byte-identical" : "DIFFER") + " (" + std::to_string(outputs[0][2].size()) + " output bytes)";
  return o;
}

// ---- 11 -----------------------------------------------------------------------

Outcome throughput() {
  Outcome o{11, "throughput", false, {}, 0.0};
  const ScenarioConfig sc = suite_config("dance", 42, 200);
  const Scenario s = generate(sc);
  auto timed = [&](const InferenceConfig& cfg) {
    const auto start = std::chrono::steady_clock::now();
    (void)run_sequence(s.frames, cfg);
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };
  const double structured = timed(structured_config(TimVariant::full, 0.01, StructuredGains::for_similarity(sc.similarity)));
  InferenceConfig random_cfg;
  random_cfg.model = random_model(ModelShape{}, 42);
  const double random = timed(random_cfg);
  o.pass = structured < 5.0 && random < 5.0;
  o.detail = "200 frames, 8 targets, d=64: structured model " + fmt("%.2f", structured) + " s, random model " +
             fmt("%.2f", random) + " s (limit 5 s)";
  return o;
}

const char* const kNames[] = {"",
                              "memory update closed form",
                              "tim_forward gradient check",
                              "attention invariants",
                              "hungarian optimality",
                              "metrics match brute-force oracles",
                              "confidence-gated commit",
                              "lifecycle under occlusion",
                              "ablation directionality",
                              "memory rate sweep",
                              "end-to-end determinism",
                              "throughput"};

// Wall-clock budgets; a check that is right but too slow still fails.
const double kBudget[] = {0, 1.0, 10.0, 1e9, 5.0, 1e9, 1e9, 1e9, 120.0, 120.0, 1e9, 1e9};

}  // namespace

Outcome run_criterion(int id, const fs::path& work_dir) {
  if (id < 1 || id > kCriteria) throw UsageError("criterion numbers run from 1 to " + std::to_string(kCriteria));
  const auto start = std::chrono::steady_clock::now();
  Outcome o{id, kNames[id], false, {}, 0.0};
  try {
    switch (id) {
      case 1: o = ema_closed_form(); break;
      case 2: o = tim_gradients(); break;
      case 3: o = attention_invariants(); break;
      case 4: o = hungarian_optimality(); break;
      case 5: o = metrics_oracles(); break;
      case 6: o = commit_gating(); break;
      case 7: o = lifecycle_occlusion(); break;
      case 8: o = ablation_direction(); break;
      case 9: o = lambda_sweep(); break;
      case 10: o = determinism(work_dir); break;
      case 11: o = throughput(); break;
    }
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail = std::string("exception: ") + e.what();
  }
  o.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (o.seconds > kBudget[id]) {
    o.pass = false;
    o.detail += "; over the " + fmt("%g", kBudget[id]) + " s budget";
  }
  return o;
}

std::string format(const Outcome& o) {
  std::string first = o.detail.substr(0, o.detail.find('\n'));
  std::string rest = o.detail.find('\n') == std::string::npos ? "" : o.detail.substr(o.detail.find('\n') + 1);
  char head[64];
  std::snprintf(head, sizeof head, "%s %2d ", o.pass ? "PASS" : "FAIL", o.id);
  std::string line = head + o.name + ": " + first + " (" + fmt("%.2f", o.seconds) + " s)";
  std::istringstream extra(rest);
  for (std::string l; std::getline(extra, l);) line += "\n        " + l;
  return line;
}

}  // namespace memotr::acceptance
