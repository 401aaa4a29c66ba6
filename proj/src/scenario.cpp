#include "memotr/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "memotr/errors.hpp"
#include "memotr/layout.hpp"
#include "memotr/rng.hpp"

namespace memotr {

std::string to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::linear: return "linear";
    case ScenarioKind::dance: return "dance";
    case ScenarioKind::crossing: return "crossing";
    case ScenarioKind::occlusion_stress: return "occlusion";
  }
  return "?";
}

ScenarioKind parse_scenario_kind(const std::string& name) {
  for (ScenarioKind k : {ScenarioKind::linear, ScenarioKind::dance, ScenarioKind::crossing,
                         ScenarioKind::occlusion_stress}) {
    if (to_string(k) == name) return k;
  }
  throw UsageError("unknown scenario '" + name + "' (expected linear, dance, crossing, occlusion)");
}

void ScenarioConfig::validate() const {
  if (targets < 1) throw ConfigError("scenario needs at least one target");
  if (frames < 1) throw ConfigError("scenario needs at least one frame");
  if (!(similarity >= 0.0 && similarity <= 1.0)) throw ConfigError("similarity must lie in [0,1]");
  if (!(noise >= 0.0) || !std::isfinite(noise)) throw ConfigError("noise must be >= 0");
  if (!(drift >= 0.0) || !std::isfinite(drift)) throw ConfigError("drift must be >= 0");
  if (!(speed >= 0.0 && speed < 0.5)) throw ConfigError("speed must lie in [0,0.5)");
  if (distractors < 0) throw ConfigError("distractors must be >= 0");
  if (!(blend >= 0.0 && blend <= 1.0)) throw ConfigError("blend must lie in [0,1]");
  if (!(hide_coverage > 0.0 && hide_coverage <= 1.0)) throw ConfigError("hide_coverage must lie in (0,1]");
  if (random_occlusions < 0) throw ConfigError("random_occlusions must be >= 0");
  if (max_occlusion < 1) throw ConfigError("max_occlusion must be >= 1");
  for (const OcclusionInterval& o : occlusions) {
    if (o.target < 1 || o.target > targets || o.begin < 1 || o.end < o.begin) {
      throw ConfigError("invalid occlusion interval");
    }
  }
  (void)TokenLayout::for_width(width);
}

std::size_t GroundTruth::visible_count() const {
  std::size_t n = 0;
  for (const auto& f : frames) {
    n += static_cast<std::size_t>(std::count_if(f.begin(), f.end(), [](const GtObject& o) { return o.visible; }));
  }
  return n;
}

namespace {

using Vec = std::vector<double>;

double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void normalize(Vec& v) {
  const double n = std::sqrt(dot(v, v));
  if (n > 0.0) {
    for (double& x : v) x /= n;
  }
}

// Random unit vector orthogonal to every vector in `basis` (assumed orthonormal).
Vec random_orthogonal(Rng& rng, std::size_t dim, const std::vector<const Vec*>& basis) {
  for (;;) {
    Vec v(dim);
    for (double& x : v) x = rng.normal();
    for (const Vec* b : basis) {
      const double p = dot(v, *b);
      for (std::size_t i = 0; i < dim; ++i) v[i] -= p * (*b)[i];
    }
    if (dot(v, v) > 1e-12) {
      normalize(v);
      return v;
    }
  }
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 step so nearby seeds give unrelated streams
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

struct Body {
  BoundingBox box;
  Point velocity;
};

void reflect(double& x, double& v, double lo, double hi) {
  if (hi <= lo) {
    x = 0.5 * (lo + hi);
    v = 0.0;
    return;
  }
  for (int i = 0; i < 4 && (x < lo || x > hi); ++i) {
    if (x < lo) {
      x = 2 * lo - x;
      v = std::abs(v);
    } else if (x > hi) {
      x = 2 * hi - x;
      v = -std::abs(v);
    }
  }
  x = std::clamp(x, lo, hi);
}

void advance(Body& b) {
  b.box.cx += b.velocity.x;
  b.box.cy += b.velocity.y;
  reflect(b.box.cx, b.velocity.x, 0.5 * b.box.w, 1.0 - 0.5 * b.box.w);
  reflect(b.box.cy, b.velocity.y, 0.5 * b.box.h, 1.0 - 0.5 * b.box.h);
}

std::vector<Body> initial_bodies(const ScenarioConfig& cfg, Rng& rng) {
  const auto n = static_cast<std::size_t>(cfg.targets);
  std::vector<Body> bodies(n);
  for (Body& b : bodies) {
    b.box.w = rng.uniform(0.05, 0.08);
    b.box.h = rng.uniform(0.12, 0.18);
  }
  auto random_direction = [&](double speed) {
    const double a = rng.uniform(0.0, 2.0 * std::numbers::pi);
    return Point{speed * std::cos(a), speed * std::sin(a)};
  };
  switch (cfg.kind) {
    case ScenarioKind::linear:
      for (Body& b : bodies) {
        b.box.cx = rng.uniform(0.15, 0.85);
        b.box.cy = rng.uniform(0.15, 0.85);
        b.velocity = random_direction(cfg.speed);
      }
      break;
    case ScenarioKind::dance: {
      const double sd = cfg.speed / std::numbers::sqrt2;
      for (Body& b : bodies) {
        b.box.cx = rng.uniform(0.25, 0.75);
        b.box.cy = rng.uniform(0.25, 0.75);
        b.velocity = {sd * rng.normal(), sd * rng.normal()};
      }
      break;
    }
    case ScenarioKind::crossing: {
      const std::size_t pairs = (n + 1) / 2;
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t pair = i / 2;
        const bool left = i % 2 == 0;
        Body& b = bodies[i];
        b.box.cy = 0.15 + 0.7 * (static_cast<double>(pair) + 0.5) / static_cast<double>(pairs) +
                   (left ? -0.01 : 0.01);
        b.box.cx = left ? 0.1 : 0.9;
        b.velocity = {left ? cfg.speed : -cfg.speed, 0.0};
      }
      break;
    }
    case ScenarioKind::occlusion_stress: {
      const auto side = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
      for (std::size_t i = 0; i < n; ++i) {
        Body& b = bodies[i];
        b.box.cx = (static_cast<double>(i % side) + 0.5) / static_cast<double>(side);
        b.box.cy = (static_cast<double>(i / side) + 0.5) / static_cast<double>(side);
        b.velocity = random_direction(0.25 * cfg.speed);
      }
      break;
    }
  }
  for (Body& b : bodies) {
    b.box.cx = std::clamp(b.box.cx, 0.5 * b.box.w, 1.0 - 0.5 * b.box.w);
    b.box.cy = std::clamp(b.box.cy, 0.5 * b.box.h, 1.0 - 0.5 * b.box.h);
  }
  return bodies;
}

void step_motion(const ScenarioConfig& cfg, std::vector<Body>& bodies, Rng& rng) {
  if (cfg.kind == ScenarioKind::dance) {
    // Ornstein-Uhlenbeck velocity with stationary per-axis spread speed/sqrt(2).
    constexpr double theta = 0.05;
    const double kick = cfg.speed / std::numbers::sqrt2 * std::sqrt(1.0 - (1.0 - theta) * (1.0 - theta));
    for (Body& b : bodies) {
      b.velocity.x = (1.0 - theta) * b.velocity.x + kick * rng.normal();
      b.velocity.y = (1.0 - theta) * b.velocity.y + kick * rng.normal();
    }
  }
  for (Body& b : bodies) advance(b);
}

std::vector<OcclusionInterval> resolve_occlusions(const ScenarioConfig& cfg, Rng& rng) {
  std::vector<OcclusionInterval> out = cfg.occlusions;
  for (int k = 0; k < cfg.random_occlusions; ++k) {
    const int longest = std::max(1, std::min(cfg.max_occlusion, cfg.frames - 2));
    const int shortest = std::max(1, longest / 4);
    OcclusionInterval o;
    o.target = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.targets)));
    const int length = shortest + static_cast<int>(rng.below(static_cast<std::uint64_t>(longest - shortest + 1)));
    const int last_begin = std::max(2, cfg.frames - length);
    o.begin = 2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(last_begin - 1)));
    o.end = o.begin + length - 1;
    out.push_back(o);
  }
  return out;
}

double quantize(double v) { return static_cast<double>(static_cast<float>(v)); }

}  // namespace

Scenario generate(const ScenarioConfig& cfg) {
  cfg.validate();
  const TokenLayout L = TokenLayout::for_width(cfg.width);
  const std::size_t dim = L.signature_dim;
  const auto n = static_cast<std::size_t>(cfg.targets);

  // Separate streams so that, for a fixed seed, identity directions do not
  // depend on the similarity, motion or noise settings.
  Rng sig_rng(stream_seed(cfg.seed, 0));
  Rng motion_rng(stream_seed(cfg.seed, 1));
  Rng noise_rng(stream_seed(cfg.seed, 2));
  Rng scene_rng(stream_seed(cfg.seed, 3));

  const Vec common = random_orthogonal(sig_rng, dim, {});
  std::vector<Vec> unique;
  unique.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<const Vec*> basis{&common};
    if (i + 1 < dim) {
      for (const Vec& u : unique) basis.push_back(&u);
    }
    unique.push_back(random_orthogonal(sig_rng, dim, basis));
  }
  const double a = std::sqrt(cfg.similarity);
  const double b = std::sqrt(1.0 - cfg.similarity);
  auto signature = [&](std::size_t i) {
    Vec s(dim);
    for (std::size_t k = 0; k < dim; ++k) s[k] = a * common[k] + b * unique[i][k];
    return s;
  };

  Scenario out;
  for (std::size_t i = 0; i < n; ++i) out.signatures.push_back(signature(i));
  out.occlusions = resolve_occlusions(cfg, scene_rng);

  struct Background {
    Vec signature;
    BoundingBox box;
  };
  std::vector<Background> background(static_cast<std::size_t>(cfg.distractors));
  for (Background& bg : background) {
    bg.signature = random_orthogonal(scene_rng, dim, {});
    bg.box = {scene_rng.uniform(0.05, 0.95), scene_rng.uniform(0.05, 0.95), scene_rng.uniform(0.03, 0.1),
              scene_rng.uniform(0.03, 0.1)};
  }

  std::vector<Body> bodies = initial_bodies(cfg, motion_rng);
  const double noise_sd = cfg.noise / std::sqrt(static_cast<double>(dim));

  auto scheduled_hidden = [&](std::size_t i, int frame) {
    return std::any_of(out.occlusions.begin(), out.occlusions.end(), [&](const OcclusionInterval& o) {
      return o.target == static_cast<int>(i) + 1 && frame >= o.begin && frame <= o.end;
    });
  };

  for (int frame = 1; frame <= cfg.frames; ++frame) {
    if (frame > 1) {
      step_motion(cfg, bodies, motion_rng);
      if (cfg.drift > 0.0) {
        const double c = std::cos(cfg.drift);
        const double s = std::sin(cfg.drift);
        for (Vec& u : unique) {
          const Vec r = random_orthogonal(sig_rng, dim, {&common, &u});
          for (std::size_t k = 0; k < dim; ++k) u[k] = c * u[k] + s * r[k];
          normalize(u);
        }
      }
    }

    std::vector<bool> present(n);
    for (std::size_t i = 0; i < n; ++i) present[i] = !scheduled_hidden(i, frame);

    struct Emit {
      Vec signature;
      BoundingBox box;
      double objectness;
    };
    std::vector<Emit> emits;
    std::vector<GtObject> gt;
    for (std::size_t i = 0; i < n; ++i) {
      GtObject obj{static_cast<int>(i) + 1, bodies[i].box, false};
      if (present[i]) {
        // The occluder is whichever present target in front (lower bottom
        // edge) covers the most of this one.
        double worst = 0.0;
        std::size_t front = n;
        for (std::size_t j = 0; j < n; ++j) {
          if (j == i || !present[j] || bodies[j].box.bottom() <= bodies[i].box.bottom()) continue;
          const double cov = coverage(bodies[i].box, bodies[j].box);
          if (cov > worst) {
            worst = cov;
            front = j;
          }
        }
        if (worst < cfg.hide_coverage) {
          obj.visible = true;
          Vec sig = signature(i);
          if (front < n) {
            const double m = cfg.blend * worst / cfg.hide_coverage;
            const Vec other = signature(front);
            for (std::size_t k = 0; k < dim; ++k) sig[k] = (1.0 - m) * sig[k] + m * other[k];
          }
          emits.push_back({std::move(sig), bodies[i].box, 1.0});
        }
      }
      gt.push_back(obj);
    }
    for (const Background& bg : background) emits.push_back({bg.signature, bg.box, 0.0});

    FrameFeatures f;
    f.frame = frame;
    f.tokens = Tensor2(emits.size(), cfg.width);
    f.positions = Tensor2(emits.size(), 2);
    for (std::size_t r = 0; r < emits.size(); ++r) {
      const Emit& e = emits[r];
      for (std::size_t k = 0; k < dim; ++k) f.tokens(r, k) = quantize(e.signature[k] + noise_sd * noise_rng.normal());
      f.tokens(r, L.pos_x) = quantize(e.box.cx);
      f.tokens(r, L.pos_y) = quantize(e.box.cy);
      f.tokens(r, L.box_begin) = quantize(logit(e.box.cx));
      f.tokens(r, L.box_begin + 1) = quantize(logit(e.box.cy));
      f.tokens(r, L.box_begin + 2) = quantize(logit(e.box.w));
      f.tokens(r, L.box_begin + 3) = quantize(logit(e.box.h));
      f.tokens(r, L.objectness) = e.objectness;
      f.positions(r, 0) = quantize(e.box.cx);
      f.positions(r, 1) = quantize(e.box.cy);
    }
    out.frames.push_back(std::move(f));
    out.truth.frames.push_back(std::move(gt));
  }
  return out;
}

double max_pairwise_cosine(const std::vector<std::vector<double>>& signatures) {
  double best = 0.0;
  bool any = false;
  for (std::size_t i = 0; i < signatures.size(); ++i) {
    for (std::size_t j = i + 1; j < signatures.size(); ++j) {
      const double na = std::sqrt(dot(signatures[i], signatures[i]));
      const double nb = std::sqrt(dot(signatures[j], signatures[j]));
      if (na == 0.0 || nb == 0.0) continue;
      const double c = dot(signatures[i], signatures[j]) / (na * nb);
      best = any ? std::max(best, c) : c;
      any = true;
    }
  }
  return best;
}

ScenarioConfig suite_config(const std::string& suite, std::uint64_t seed, int frames) {
  ScenarioConfig cfg;
  cfg.kind = parse_scenario_kind(suite);
  cfg.seed = seed;
  cfg.frames = frames;
  switch (cfg.kind) {
    case ScenarioKind::dance:
      cfg.random_occlusions = 4;
      break;
    case ScenarioKind::occlusion_stress:
      cfg.random_occlusions = cfg.targets;
      cfg.max_occlusion = 20;
      break;
    case ScenarioKind::linear:
    case ScenarioKind::crossing:
      break;
  }
  return cfg;
}

}  // namespace memotr
