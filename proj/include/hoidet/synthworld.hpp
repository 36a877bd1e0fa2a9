#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "hoidet/annotations.hpp"
#include "hoidet/features.hpp"
#include "hoidet/image.hpp"

namespace hoidet {

// A shape-plus-color object class.
struct ShapeClass {
  std::string label;  // e.g. "red_circle"
  std::string shape;  // circle|square|triangle|diamond|ring|cross|hbar|vbar
  Color color;
};

struct TupleCount {
  int verb_index = 0;
  int class_index = 0;
  int count = 0;
};

// Deterministic synthetic HOI world: stick-figure humans with 18 joints and
// shape objects placed according to the verb's spatial rule:
//   hold    object center within 12 px of a wrist
//   ride    object centered below the hips (far)
//   sit_on  object centered below the hips (near)
//   kick    object center within 14 px of an ankle
//   wear    object overlapping the head
struct SceneSpec {
  int image_size = 320;
  std::vector<std::string> verbs;
  std::vector<ShapeClass> object_classes;
  std::vector<TupleCount> counts;
  std::uint64_t seed = 0;
};

bool verb_has_placement_rule(const std::string& verb);
void validate_scene_spec(const SceneSpec& spec);

// Convenience builder used by the config layer: the first n_source classes
// get tuples_per_source_class tuples spread over all verbs, the remaining
// n_target classes get tuples_per_target_class. A >= 10x frequency gap is
// enforced so frequency splitting reproduces the intended sides.
SceneSpec make_scene_spec(int image_size, int n_source, int n_target,
                          int tuples_per_source_class,
                          int tuples_per_target_class, std::uint64_t seed,
                          const std::vector<std::string>& verbs = {
                              "hold", "ride", "sit_on", "kick", "wear"});

std::vector<ShapeClass> default_shape_classes(int n);

struct Scene {
  Image image;
  Keypoints keypoints;
  BoundingBox object_box;
};

// Renders a randomly posed figure, places the object per the verb rule plus
// 0-2 distractor objects of other classes away from the rule position.
// Throws if placement stays infeasible after bounded retries.
Scene generate_scene(std::mt19937_64& rng, const std::string& verb,
                     const std::string& object_class, const SceneSpec& spec);

// Stable per-word synthetic embeddings (independent of the dataset seed).
EmbeddingTable::Vector synth_word_vector(const std::string& word);
void write_synth_embeddings(const std::vector<std::string>& verbs,
                            const std::filesystem::path& path);

struct SynthDataset {
  std::filesystem::path annotations;   // <out_dir>/annotations.json
  std::filesystem::path embeddings;    // <out_dir>/embeddings.txt
  long tuples = 0;
  long images = 0;
};

// Writes images/, annotations.json and embeddings.txt under out_dir; byte
// deterministic for a fixed spec.
SynthDataset generate_dataset(const SceneSpec& spec,
                              const std::filesystem::path& out_dir);

}  // namespace hoidet
