#include "hoidet/synthworld.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "hoidet/util.hpp"

namespace hoidet {

namespace {

// COCO-style 18-joint layout.
enum Joint {
  kNose = 0, kNeck, kRSho, kRElb, kRWri, kLSho, kLElb, kLWri,
  kRHip, kRKnee, kRAnk, kLHip, kLKnee, kLAnk, kREye, kLEye, kREar, kLEar
};

struct Pt {
  double x = 0, y = 0;
};

struct Figure {
  std::array<Pt, kPoseJoints> joints;
  Pt head_center;
  double head_radius = 0;
  double torso = 0;
};

double urand(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Figure sample_figure(std::mt19937_64& rng, int size) {
  Figure f;
  const double s = size;
  f.torso = urand(rng, 0.18, 0.26) * s;
  const double L = f.torso;
  const double lean = urand(rng, -0.12, 0.12);
  const Pt up{std::sin(lean), -std::cos(lean)};
  const Pt perp{-up.y, up.x};
  const Pt center{urand(rng, 0.30, 0.70) * s, urand(rng, 0.34, 0.58) * s};

  auto add = [](Pt a, Pt b, double k) { return Pt{a.x + b.x * k, a.y + b.y * k}; };
  const Pt neck = add(center, up, L / 2);
  const Pt midhip = add(center, up, -L / 2);
  f.head_center = add(neck, up, 0.32 * L);
  f.head_radius = 0.17 * L;

  f.joints[kNeck] = neck;
  f.joints[kNose] = f.head_center;
  f.joints[kREye] = add(add(f.head_center, up, 0.05 * L), perp, 0.07 * L);
  f.joints[kLEye] = add(add(f.head_center, up, 0.05 * L), perp, -0.07 * L);
  f.joints[kREar] = add(f.head_center, perp, 0.15 * L);
  f.joints[kLEar] = add(f.head_center, perp, -0.15 * L);
  f.joints[kRSho] = add(neck, perp, 0.20 * L);
  f.joints[kLSho] = add(neck, perp, -0.20 * L);
  f.joints[kRHip] = add(midhip, perp, 0.12 * L);
  f.joints[kLHip] = add(midhip, perp, -0.12 * L);

  auto limb = [&](Pt from, double len, double base_angle, double jitter) {
    const double a = base_angle + urand(rng, -jitter, jitter);
    return Pt{from.x + len * std::sin(a), from.y + len * std::cos(a)};
  };
  // angles measured from straight down (y+)
  f.joints[kRElb] = limb(f.joints[kRSho], 0.28 * L, 0.35, 1.2);
  f.joints[kRWri] = limb(f.joints[kRElb], 0.26 * L, 0.0, 1.5);
  f.joints[kLElb] = limb(f.joints[kLSho], 0.28 * L, -0.35, 1.2);
  f.joints[kLWri] = limb(f.joints[kLElb], 0.26 * L, 0.0, 1.5);
  f.joints[kRKnee] = limb(f.joints[kRHip], 0.35 * L, 0.12, 0.45);
  f.joints[kRAnk] = limb(f.joints[kRKnee], 0.35 * L, 0.0, 0.5);
  f.joints[kLKnee] = limb(f.joints[kLHip], 0.35 * L, -0.12, 0.45);
  f.joints[kLAnk] = limb(f.joints[kLKnee], 0.35 * L, 0.0, 0.5);
  return f;
}

bool figure_in_bounds(const Figure& f, int size) {
  const double m = 3.0;
  for (const auto& j : f.joints)
    if (j.x < m || j.x > size - m || j.y < m || j.y > size - m) return false;
  if (f.head_center.y - f.head_radius < m) return false;
  return true;
}

void draw_figure(Image& img, const Figure& f) {
  const Color body{45, 45, 55};
  const double t = std::max(2.0, f.torso * 0.06);
  auto seg = [&](int a, int b) {
    draw_line(img, f.joints[a].x, f.joints[a].y, f.joints[b].x, f.joints[b].y,
              body, t);
  };
  seg(kNeck, kRSho); seg(kNeck, kLSho);
  seg(kRSho, kRElb); seg(kRElb, kRWri);
  seg(kLSho, kLElb); seg(kLElb, kLWri);
  seg(kRHip, kRKnee); seg(kRKnee, kRAnk);
  seg(kLHip, kLKnee); seg(kLKnee, kLAnk);
  seg(kRHip, kLHip);
  draw_line(img, f.joints[kNeck].x, f.joints[kNeck].y,
            0.5 * (f.joints[kRHip].x + f.joints[kLHip].x),
            0.5 * (f.joints[kRHip].y + f.joints[kLHip].y), body, t);
  draw_disk(img, f.head_center.x, f.head_center.y, f.head_radius, body);
}

// Draws the shape so that its tight bounding box is exactly `box`.
void draw_shape(Image& img, const std::string& shape, const BoundingBox& box,
                Color color) {
  const double cx = box.center_x(), cy = box.center_y();
  const double w = box.width(), h = box.height();
  if (shape == "circle") {
    draw_disk(img, cx, cy, w / 2, color);
  } else if (shape == "square" || shape == "hbar" || shape == "vbar") {
    fill_rect(img, box.x_min, box.y_min, box.x_max, box.y_max, color);
  } else if (shape == "triangle") {
    fill_triangle(img, cx, box.y_min, box.x_min, box.y_max, box.x_max,
                  box.y_max, color);
  } else if (shape == "diamond") {
    fill_triangle(img, cx, box.y_min, box.x_min, cy, box.x_max, cy, color);
    fill_triangle(img, cx, box.y_max, box.x_min, cy, box.x_max, cy, color);
  } else if (shape == "ring") {
    draw_disk(img, cx, cy, w / 2, color);
    const double hole = w / 5;
    // punch a background-colored hole; sample the corner pixel for the
    // current background
    draw_disk(img, cx, cy, hole, img.get(0, 0));
  } else if (shape == "cross") {
    fill_rect(img, box.x_min, cy - h / 6, box.x_max, cy + h / 6, color);
    fill_rect(img, cx - w / 6, box.y_min, cx + w / 6, box.y_max, color);
  } else {
    fail("unknown shape '" + shape + "'");
  }
}

BoundingBox box_around(double cx, double cy, double w, double h) {
  return {cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2};
}

BoundingBox shape_box(const std::string& shape, double cx, double cy,
                      double s) {
  if (shape == "hbar") return box_around(cx, cy, s, 0.4 * s);
  if (shape == "vbar") return box_around(cx, cy, 0.4 * s, s);
  return box_around(cx, cy, s, s);
}

const ShapeClass& find_class(const SceneSpec& spec, const std::string& label) {
  for (const auto& c : spec.object_classes)
    if (c.label == label) return c;
  fail("object class '" + label + "' not in the scene spec");
}

Pt rule_anchor(std::mt19937_64& rng, const std::string& verb,
               const Figure& f) {
  if (verb == "hold")
    return f.joints[urand(rng, 0, 1) < 0.5 ? kRWri : kLWri];
  if (verb == "kick")
    return f.joints[urand(rng, 0, 1) < 0.5 ? kRAnk : kLAnk];
  if (verb == "ride" || verb == "sit_on")
    return Pt{0.5 * (f.joints[kRHip].x + f.joints[kLHip].x),
              0.5 * (f.joints[kRHip].y + f.joints[kLHip].y)};
  if (verb == "wear") return f.head_center;
  fail("verb '" + verb + "' has no placement rule");
}

Pt place_object(std::mt19937_64& rng, const std::string& verb,
                const Figure& f, const Pt& anchor) {
  auto in_disk = [&](double radius) {
    const double a = urand(rng, 0, 2 * M_PI);
    const double r = radius * std::sqrt(urand(rng, 0, 1));
    return Pt{anchor.x + r * std::cos(a), anchor.y + r * std::sin(a)};
  };
  if (verb == "hold") return in_disk(12.0);
  if (verb == "kick") return in_disk(14.0);
  if (verb == "wear") return in_disk(0.5 * f.head_radius);
  const double L = f.torso;
  const double drop = verb == "ride" ? urand(rng, 0.40, 0.70)
                                     : urand(rng, 0.20, 0.45);
  return Pt{anchor.x + urand(rng, -0.12, 0.12) * L, anchor.y + drop * L};
}

}  // namespace

bool verb_has_placement_rule(const std::string& verb) {
  return verb == "hold" || verb == "ride" || verb == "sit_on" ||
         verb == "kick" || verb == "wear";
}

void validate_scene_spec(const SceneSpec& spec) {
  check(spec.image_size >= 64, "scene spec: image_size must be >= 64");
  check(spec.object_classes.size() >= 2,
        "scene spec: need at least 2 object classes");
  check(!spec.verbs.empty(), "scene spec: no verbs");
  for (const auto& v : spec.verbs)
    check(verb_has_placement_rule(v),
          "scene spec: verb '" + v + "' has no placement rule");
  std::set<std::string> labels;
  for (const auto& c : spec.object_classes)
    check(labels.insert(c.label).second,
          "scene spec: duplicate class label '" + c.label + "'");
  check(!spec.counts.empty(), "scene spec: no tuple counts");
  for (const auto& tc : spec.counts) {
    check(tc.verb_index >= 0 && tc.verb_index < int(spec.verbs.size()),
          "scene spec: count entry with bad verb index");
    check(tc.class_index >= 0 &&
              tc.class_index < int(spec.object_classes.size()),
          "scene spec: count entry with bad class index");
    check(tc.count >= 1, "scene spec: counts must be >= 1");
  }
}

std::vector<ShapeClass> default_shape_classes(int n) {
  static const std::vector<std::pair<std::string, Color>> colors = {
      {"red", {220, 40, 40}},     {"green", {40, 170, 70}},
      {"blue", {50, 90, 220}},    {"yellow", {230, 200, 40}},
      {"magenta", {200, 60, 200}}, {"cyan", {60, 195, 205}},
      {"orange", {240, 140, 40}}, {"purple", {130, 60, 200}}};
  static const std::vector<std::string> shapes = {
      "circle", "square", "triangle", "diamond",
      "ring",   "cross",  "hbar",     "vbar"};
  check(n >= 1 && n <= 64, "default_shape_classes: n must be in [1, 64]");
  std::vector<ShapeClass> out;
  for (int i = 0; i < n; ++i) {
    const auto& shape = shapes[i % 8];
    const auto& [cname, color] = colors[(i + i / 8) % 8];
    out.push_back({cname + "_" + shape, shape, color});
  }
  return out;
}

SceneSpec make_scene_spec(int image_size, int n_source, int n_target,
                          int tuples_per_source_class,
                          int tuples_per_target_class, std::uint64_t seed,
                          const std::vector<std::string>& verbs) {
  check(n_source >= 1 && n_target >= 1, "make_scene_spec: need both sides");
  check(tuples_per_source_class >= 10 * tuples_per_target_class,
        "make_scene_spec: source classes need >= 10x the tuples of target "
        "classes");
  SceneSpec spec;
  spec.image_size = image_size;
  spec.seed = seed;
  spec.verbs = verbs;
  spec.object_classes = default_shape_classes(n_source + n_target);
  const int nv = int(verbs.size());
  for (int ci = 0; ci < n_source + n_target; ++ci) {
    const int total =
        ci < n_source ? tuples_per_source_class : tuples_per_target_class;
    const int base = total / nv, rem = total % nv;
    for (int vi = 0; vi < nv; ++vi) {
      const int cnt = base + (vi < rem ? 1 : 0);
      if (cnt > 0) spec.counts.push_back({vi, ci, cnt});
    }
  }
  validate_scene_spec(spec);
  return spec;
}

Scene generate_scene(std::mt19937_64& rng, const std::string& verb,
                     const std::string& object_class, const SceneSpec& spec) {
  check(std::find(spec.verbs.begin(), spec.verbs.end(), verb) !=
            spec.verbs.end(),
        "generate_scene: verb '" + verb + "' not in the scene spec");
  const ShapeClass& cls = find_class(spec, object_class);
  const int s = spec.image_size;

  for (int attempt = 0; attempt < 100; ++attempt) {
    Figure fig = sample_figure(rng, s);
    if (!figure_in_bounds(fig, s)) continue;
    const Pt anchor = rule_anchor(rng, verb, fig);
    const Pt center = place_object(rng, verb, fig, anchor);
    const double size = urand(rng, 0.16, 0.28) * s;
    const BoundingBox box = shape_box(cls.shape, center.x, center.y, size);
    if (!(box.x_min >= 1 && box.y_min >= 1 && box.x_max <= s - 1 &&
          box.y_max <= s - 1))
      continue;

    const int tint = int(urand(rng, -12, 12));
    const auto bg = std::uint8_t(235 + tint);
    Scene scene;
    scene.image = Image(s, s, Color{bg, bg, bg});
    draw_figure(scene.image, fig);

    // distractors: other classes, away from both the object and the anchor
    const int n_distractors = int(urand(rng, 0, 2.9999));
    for (int d = 0; d < n_distractors; ++d) {
      const auto& dcls = spec.object_classes[std::uniform_int_distribution<int>(
          0, int(spec.object_classes.size()) - 1)(rng)];
      if (dcls.label == cls.label) continue;
      const double dsize = urand(rng, 0.16, 0.28) * s;
      const double min_gap = 0.25 * s;
      for (int tries = 0; tries < 40; ++tries) {
        const Pt dc{urand(rng, dsize / 2 + 1, s - dsize / 2 - 1),
                    urand(rng, dsize / 2 + 1, s - dsize / 2 - 1)};
        if (std::hypot(dc.x - center.x, dc.y - center.y) < min_gap) continue;
        if (std::hypot(dc.x - anchor.x, dc.y - anchor.y) < min_gap) continue;
        draw_shape(scene.image, dcls.shape,
                   shape_box(dcls.shape, dc.x, dc.y, dsize), dcls.color);
        break;
      }
    }

    draw_shape(scene.image, cls.shape, box, cls.color);
    for (int j = 0; j < kPoseJoints; ++j)
      scene.keypoints[j] = Keypoint{fig.joints[j].x, fig.joints[j].y};
    scene.object_box = box;
    return scene;
  }
  fail("generate_scene: placement infeasible for verb '" + verb +
       "' after bounded retries");
}

EmbeddingTable::Vector synth_word_vector(const std::string& word) {
  EmbeddingTable::Vector vec{};
  std::uint64_t state = fnv1a64(word.data(), word.size());
  for (int i = 0; i < kVerbDim; ++i) {
    state = mix64(state);
    vec[i] = float(double(state >> 11) / double(1ULL << 53) * 2.0 - 1.0);
  }
  return vec;
}

void write_synth_embeddings(const std::vector<std::string>& verbs,
                            const std::filesystem::path& path) {
  std::map<std::string, EmbeddingTable::Vector> rows;
  for (const auto& verb : verbs) {
    std::string word;
    auto flush = [&]() {
      if (!word.empty()) rows[word] = synth_word_vector(word);
      word.clear();
    };
    for (char ch : verb) {
      if (ch == '_' || ch == ' ')
        flush();
      else
        word += ch;
    }
    flush();
  }
  EmbeddingTable::save(rows, path);
}

SynthDataset generate_dataset(const SceneSpec& spec,
                              const std::filesystem::path& out_dir) {
  validate_scene_spec(spec);
  namespace fs = std::filesystem;
  fs::create_directories(out_dir / "images");

  std::mt19937_64 rng(spec.seed);
  std::vector<ImageRecord> records;
  long counter = 0;
  for (const auto& tc : spec.counts) {
    const auto& verb = spec.verbs[tc.verb_index];
    const auto& cls = spec.object_classes[tc.class_index];
    for (int i = 0; i < tc.count; ++i) {
      Scene scene = generate_scene(rng, verb, cls.label, spec);
      char id[32];
      std::snprintf(id, sizeof(id), "synth_%06ld", counter++);
      ImageRecord rec;
      rec.image_id = id;
      rec.image_path = std::string("images/") + id + ".bmp";
      rec.width = spec.image_size;
      rec.height = spec.image_size;
      HoiTuple tup;
      tup.verb = verb;
      tup.object_class = cls.label;
      tup.object_box = scene.object_box;
      tup.keypoints = scene.keypoints;
      rec.tuples.push_back(std::move(tup));
      write_bmp(scene.image, out_dir / rec.image_path);
      records.push_back(std::move(rec));
    }
  }

  SynthDataset out;
  out.annotations = out_dir / "annotations.json";
  out.embeddings = out_dir / "embeddings.txt";
  out.tuples = counter;
  out.images = counter;
  save_dataset(records, out.annotations);
  write_synth_embeddings(spec.verbs, out.embeddings);
  return out;
}

}  // namespace hoidet
