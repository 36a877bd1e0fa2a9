#include "hoidet/annotations.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <unordered_set>

#include "hoidet/util.hpp"

namespace hoidet {

using nlohmann::json;

Side side_from_string(const std::string& s) {
  if (s == "source") return Side::Source;
  if (s == "target") return Side::Target;
  fail("unknown side '" + s + "' (expected 'source' or 'target')");
}

std::string side_to_string(Side side) {
  return side == Side::Source ? "source" : "target";
}

void validate_record(const ImageRecord& record) {
  const std::string who = "image '" + record.image_id + "'";
  check(!record.image_id.empty(), "image with empty image_id");
  check(record.width > 0 && record.height > 0,
        who + ": width/height must be positive");
  for (std::size_t t = 0; t < record.tuples.size(); ++t) {
    const auto& tup = record.tuples[t];
    const std::string where = who + " tuple " + std::to_string(t);
    check(!tup.verb.empty(), where + ": verb is empty");
    check(!tup.object_class.empty(), where + ": object_class is empty");
    if (tup.object_box) {
      const auto& b = *tup.object_box;
      check(b.ordered(), where + ": object_box has x_max < x_min or "
                                 "y_max < y_min");
      check(b.inside(record.dims()),
            where + ": object_box lies outside the image");
    }
    for (int j = 0; j < kPoseJoints; ++j) {
      if (!tup.keypoints[j]) continue;
      const auto& kp = *tup.keypoints[j];
      check(kp.x >= 0 && kp.x <= record.width && kp.y >= 0 &&
                kp.y <= record.height,
            where + ": keypoint " + std::to_string(j) + " outside the image");
    }
  }
}

namespace {

json box_to_json(const BoundingBox& b) {
  return json::array({b.x_min, b.y_min, b.x_max, b.y_max});
}

BoundingBox box_from_json(const json& a, const std::string& where) {
  check(a.is_array() && a.size() == 4,
        where + ": object_box must be [x_min,y_min,x_max,y_max]");
  for (const auto& x : a)
    check(x.is_number(), where + ": object_box entries must be numbers");
  return BoundingBox{a[0].get<double>(), a[1].get<double>(), a[2].get<double>(),
                     a[3].get<double>()};
}

}  // namespace

json dataset_to_json(const std::vector<ImageRecord>& records) {
  json images = json::array();
  for (const auto& rec : records) {
    json tuples = json::array();
    for (const auto& tup : rec.tuples) {
      json kps = json::array();
      for (const auto& kp : tup.keypoints) {
        if (kp)
          kps.push_back(json::array({kp->x, kp->y}));
        else
          kps.push_back(nullptr);
      }
      tuples.push_back({{"verb", tup.verb},
                        {"object_class", tup.object_class},
                        {"object_box", tup.object_box
                                           ? box_to_json(*tup.object_box)
                                           : json(nullptr)},
                        {"keypoints", kps}});
    }
    images.push_back({{"image_id", rec.image_id},
                      {"image_path", rec.image_path},
                      {"width", rec.width},
                      {"height", rec.height},
                      {"tuples", tuples}});
  }
  return json{{"images", images}};
}

std::vector<ImageRecord> dataset_from_json(const json& doc) {
  check(doc.is_object() && doc.contains("images") && doc["images"].is_array(),
        "annotation document must be {\"images\": [...]}");
  std::vector<ImageRecord> records;
  std::unordered_set<std::string> seen_ids;
  for (const auto& jrec : doc["images"]) {
    ImageRecord rec;
    for (const char* field : {"image_id", "image_path", "width", "height",
                              "tuples"})
      check(jrec.contains(field),
            std::string("image entry missing field '") + field + "'");
    rec.image_id = jrec["image_id"].get<std::string>();
    rec.image_path = jrec["image_path"].get<std::string>();
    const std::string who = "image '" + rec.image_id + "'";
    check(jrec["width"].is_number_integer() &&
              jrec["height"].is_number_integer(),
          who + ": width/height must be integers");
    rec.width = jrec["width"].get<int>();
    rec.height = jrec["height"].get<int>();
    check(seen_ids.insert(rec.image_id).second,
          "duplicate image_id '" + rec.image_id + "'");
    for (std::size_t t = 0; t < jrec["tuples"].size(); ++t) {
      const auto& jtup = jrec["tuples"][t];
      const std::string where = who + " tuple " + std::to_string(t);
      for (const char* field : {"verb", "object_class", "object_box",
                                "keypoints"})
        check(jtup.contains(field),
              where + ": missing field '" + field + "'");
      HoiTuple tup;
      tup.verb = jtup["verb"].get<std::string>();
      tup.object_class = jtup["object_class"].get<std::string>();
      if (!jtup["object_box"].is_null())
        tup.object_box = box_from_json(jtup["object_box"], where);
      const auto& jkps = jtup["keypoints"];
      check(jkps.is_array() && int(jkps.size()) == kPoseJoints,
            where + ": keypoints must have exactly " +
                std::to_string(kPoseJoints) + " entries, got " +
                std::to_string(jkps.size()));
      for (int j = 0; j < kPoseJoints; ++j) {
        if (jkps[j].is_null()) continue;
        check(jkps[j].is_array() && jkps[j].size() == 2,
              where + ": keypoint " + std::to_string(j) +
                  " must be [x,y] or null");
        tup.keypoints[j] =
            Keypoint{jkps[j][0].get<double>(), jkps[j][1].get<double>()};
      }
      rec.tuples.push_back(std::move(tup));
    }
    validate_record(rec);
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<ImageRecord> load_dataset(const std::filesystem::path& path) {
  std::ifstream f(path);
  check(bool(f), "annotation file not found: " + path.string());
  json doc;
  try {
    f >> doc;
  } catch (const json::exception& e) {
    fail(path.string() + ": JSON parse error: " + e.what());
  }
  return dataset_from_json(doc);
}

void save_dataset(const std::vector<ImageRecord>& records,
                  const std::filesystem::path& path) {
  std::ofstream f(path);
  check(bool(f), "cannot open " + path.string() + " for writing");
  f << dataset_to_json(records).dump(1) << "\n";
  check(bool(f), "short write to " + path.string());
}

std::filesystem::path resolve_image_path(
    const std::filesystem::path& annotation_file, const ImageRecord& record) {
  std::filesystem::path p(record.image_path);
  if (p.is_absolute()) return p;
  return annotation_file.parent_path() / p;
}

std::vector<ImageRecord> filter_no_interaction(
    const std::vector<ImageRecord>& records, const std::string& excluded_verb) {
  std::vector<ImageRecord> out;
  for (const auto& rec : records) {
    ImageRecord kept = rec;
    kept.tuples.clear();
    for (const auto& tup : rec.tuples)
      if (tup.verb != excluded_verb) kept.tuples.push_back(tup);
    if (!kept.tuples.empty()) out.push_back(std::move(kept));
  }
  return out;
}

SplitSpec split_by_frequency(const std::vector<ImageRecord>& records,
                             int n_target) {
  std::map<std::string, long> counts;  // class -> tuple count
  std::map<std::string, std::set<std::string>> class_verbs;
  for (const auto& rec : records)
    for (const auto& tup : rec.tuples) {
      ++counts[tup.object_class];
      class_verbs[tup.object_class].insert(tup.verb);
    }
  const int n_classes = int(counts.size());
  check(n_target >= 1 && n_target < n_classes,
        "n_target out of range: " + std::to_string(n_target) + " with " +
            std::to_string(n_classes) + " object classes");

  std::vector<std::pair<std::string, long>> order(counts.begin(), counts.end());
  std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second < b.second;
    return a.first < b.first;
  });

  SplitSpec spec;
  for (int i = 0; i < n_classes; ++i) {
    if (i < n_target)
      spec.target_classes.insert(order[i].first);
    else
      spec.source_classes.insert(order[i].first);
  }
  std::set<std::string> source_verbs;
  for (const auto& cls : spec.source_classes)
    source_verbs.insert(class_verbs[cls].begin(), class_verbs[cls].end());
  for (const auto& rec : records)
    for (const auto& tup : rec.tuples) spec.verbs.insert(tup.verb);
  for (const auto& cls : spec.target_classes)
    for (const auto& verb : class_verbs[cls])
      check(source_verbs.count(verb),
            "verb coverage violation: verb '" + verb +
                "' appears on target class '" + cls +
                "' but on no source class");
  return spec;
}

json split_to_json(const SplitSpec& spec) {
  return json{{"source_classes", spec.source_classes},
              {"target_classes", spec.target_classes},
              {"verbs", spec.verbs}};
}

SplitSpec split_from_json(const json& doc) {
  SplitSpec spec;
  for (const char* field : {"source_classes", "target_classes", "verbs"})
    check(doc.contains(field) && doc[field].is_array(),
          std::string("split document missing array field '") + field + "'");
  for (const auto& c : doc["source_classes"])
    spec.source_classes.insert(c.get<std::string>());
  for (const auto& c : doc["target_classes"])
    spec.target_classes.insert(c.get<std::string>());
  for (const auto& v : doc["verbs"]) spec.verbs.insert(v.get<std::string>());
  std::vector<std::string> both;
  std::set_intersection(spec.source_classes.begin(), spec.source_classes.end(),
                        spec.target_classes.begin(), spec.target_classes.end(),
                        std::back_inserter(both));
  check(both.empty(), "split: source and target classes overlap");
  return spec;
}

std::vector<TupleRef> enumerate_tuples(const std::vector<ImageRecord>& records,
                                       const SplitSpec& spec, Side side) {
  std::vector<const ImageRecord*> ordered;
  ordered.reserve(records.size());
  for (const auto& rec : records) ordered.push_back(&rec);
  std::sort(ordered.begin(), ordered.end(),
            [](const ImageRecord* a, const ImageRecord* b) {
              return a->image_id < b->image_id;
            });
  const auto& wanted =
      side == Side::Source ? spec.source_classes : spec.target_classes;
  const auto& other =
      side == Side::Source ? spec.target_classes : spec.source_classes;
  std::vector<TupleRef> out;
  for (const ImageRecord* rec : ordered)
    for (int t = 0; t < int(rec->tuples.size()); ++t) {
      const auto& cls = rec->tuples[t].object_class;
      if (wanted.count(cls)) {
        out.push_back({rec, t});
      } else {
        check(other.count(cls) > 0,
              "image '" + rec->image_id + "': object class '" + cls +
                  "' belongs to neither side of the split");
      }
    }
  return out;
}

}  // namespace hoidet
