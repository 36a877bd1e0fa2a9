#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "hoidet/geometry.hpp"

namespace hoidet {

inline constexpr int kPoseJoints = 18;
inline constexpr const char* kNoInteractionVerb = "no_interaction";

struct Keypoint {
  double x = 0, y = 0;
  bool operator==(const Keypoint&) const = default;
};

using Keypoints = std::array<std::optional<Keypoint>, kPoseJoints>;

// One human-object interaction annotation: the atom of supervision.
// object_box is present in ground-truth data and absent in unlabeled
// target-side data (the pipeline fills it with a pseudo box).
struct HoiTuple {
  std::string verb;
  std::string object_class;
  std::optional<BoundingBox> object_box;
  Keypoints keypoints;
  bool operator==(const HoiTuple&) const = default;
};

struct ImageRecord {
  std::string image_id;
  std::string image_path;
  int width = 0, height = 0;
  std::vector<HoiTuple> tuples;
  Dims dims() const { return {width, height}; }
  bool operator==(const ImageRecord&) const = default;
};

// Class-level partition of a dataset. Target verbs must all occur on the
// source side, otherwise the second phase sees verbs it never trained on.
struct SplitSpec {
  std::set<std::string> source_classes;
  std::set<std::string> target_classes;
  std::set<std::string> verbs;
  bool operator==(const SplitSpec&) const = default;
};

enum class Side { Source, Target };
Side side_from_string(const std::string& s);
std::string side_to_string(Side side);

std::vector<ImageRecord> load_dataset(const std::filesystem::path& path);
void save_dataset(const std::vector<ImageRecord>& records,
                  const std::filesystem::path& path);
nlohmann::json dataset_to_json(const std::vector<ImageRecord>& records);
std::vector<ImageRecord> dataset_from_json(const nlohmann::json& doc);

// Validates one record against the schema invariants; throws naming the
// image_id and the offending field.
void validate_record(const ImageRecord& record);

// image_path entries may be relative to the annotation file's directory.
std::filesystem::path resolve_image_path(
    const std::filesystem::path& annotation_file, const ImageRecord& record);

std::vector<ImageRecord> filter_no_interaction(
    const std::vector<ImageRecord>& records,
    const std::string& excluded_verb = kNoInteractionVerb);

// The n_target least-frequent object classes (by tuple count) become the
// target side; frequency ties are broken by lexicographic class label.
SplitSpec split_by_frequency(const std::vector<ImageRecord>& records,
                             int n_target);

nlohmann::json split_to_json(const SplitSpec& spec);
SplitSpec split_from_json(const nlohmann::json& doc);

struct TupleRef {
  const ImageRecord* record = nullptr;
  int tuple_index = 0;
  const HoiTuple& tuple() const { return record->tuples[tuple_index]; }
};

// One entry per tuple whose object class belongs to the requested side;
// an image with M matching tuples appears M times. Ordered by
// (image_id, tuple index).
std::vector<TupleRef> enumerate_tuples(const std::vector<ImageRecord>& records,
                                       const SplitSpec& spec, Side side);

}  // namespace hoidet
