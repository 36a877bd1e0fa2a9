#include "hoidet/pseudolabel.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "hoidet/util.hpp"

namespace hoidet {

BoxPolicy box_policy_from_string(const std::string& s) {
  if (s == "hull") return BoxPolicy::Hull;
  if (s == "largest_component") return BoxPolicy::LargestComponent;
  fail("unknown box policy '" + s + "' (expected 'hull' or 'largest_component')");
}

std::string box_policy_to_string(BoxPolicy p) {
  return p == BoxPolicy::Hull ? "hull" : "largest_component";
}

BinaryMask threshold_map(const AttentionMap& map, double delta) {
  check(delta >= 0 && delta < 1, "threshold_map: delta must be in [0,1)");
  BinaryMask mask(map.h, map.w);
  for (std::size_t i = 0; i < map.v.size(); ++i)
    mask.v[i] = map.v[i] > delta ? 1 : 0;
  return mask;
}

namespace {

std::optional<GridBox> hull_box(const BinaryMask& mask) {
  int c0 = mask.w, r0 = mask.h, c1 = -1, r1 = -1;
  for (int r = 0; r < mask.h; ++r)
    for (int c = 0; c < mask.w; ++c)
      if (mask.at(r, c)) {
        c0 = std::min(c0, c);
        c1 = std::max(c1, c);
        r0 = std::min(r0, r);
        r1 = std::max(r1, r);
      }
  if (c1 < 0) return std::nullopt;
  return GridBox{c0, r0, c1, r1};
}

std::optional<GridBox> largest_component_box(const BinaryMask& mask) {
  std::vector<int> label(mask.size(), -1);
  int best_size = 0;
  GridBox best{};
  int next = 0;
  std::vector<int> stack;
  for (int r = 0; r < mask.h; ++r)
    for (int c = 0; c < mask.w; ++c) {
      const int idx = r * mask.w + c;
      if (!mask.v[idx] || label[idx] >= 0) continue;
      // flood fill the 4-connected component rooted here; the root is its
      // topmost-then-leftmost cell because of the scan order
      int size = 0;
      GridBox box{c, r, c, r};
      stack.assign(1, idx);
      label[idx] = next;
      while (!stack.empty()) {
        const int cur = stack.back();
        stack.pop_back();
        ++size;
        const int cr = cur / mask.w, cc = cur % mask.w;
        box.c_min = std::min(box.c_min, cc);
        box.c_max = std::max(box.c_max, cc);
        box.r_min = std::min(box.r_min, cr);
        box.r_max = std::max(box.r_max, cr);
        const int nbr[4][2] = {{cr - 1, cc}, {cr + 1, cc}, {cr, cc - 1},
                               {cr, cc + 1}};
        for (auto [nr, nc] : nbr) {
          if (nr < 0 || nr >= mask.h || nc < 0 || nc >= mask.w) continue;
          const int nidx = nr * mask.w + nc;
          if (mask.v[nidx] && label[nidx] < 0) {
            label[nidx] = next;
            stack.push_back(nidx);
          }
        }
      }
      if (size > best_size) {  // strict: ties keep the earlier (topmost) root
        best_size = size;
        best = box;
      }
      ++next;
    }
  if (best_size == 0) return std::nullopt;
  return best;
}

}  // namespace

std::optional<GridBox> extract_box(const BinaryMask& mask, BoxPolicy policy) {
  return policy == BoxPolicy::Hull ? hull_box(mask)
                                   : largest_component_box(mask);
}

BoundingBox to_image_coords(const GridBox& grid_box, Dims grid, Dims image) {
  check(grid_box.c_min >= 0 && grid_box.r_min >= 0 &&
            grid_box.c_min <= grid_box.c_max &&
            grid_box.r_min <= grid_box.r_max && grid_box.c_max < grid.width &&
            grid_box.r_max < grid.height,
        "to_image_coords: grid box outside the grid");
  const double sx = double(image.width) / grid.width;
  const double sy = double(image.height) / grid.height;
  auto half_up = [](double v) { return std::floor(v + 0.5); };
  BoundingBox b;
  b.x_min = half_up(grid_box.c_min * sx);
  b.x_max = half_up((grid_box.c_max + 1) * sx);
  b.y_min = half_up(grid_box.r_min * sy);
  b.y_max = half_up((grid_box.r_max + 1) * sy);
  return b.clipped(image);
}

nlohmann::json pseudo_report_to_json(const PseudoLabelReport& report) {
  return nlohmann::json{{"tuples_in", report.tuples_in},
                        {"tuples_out", report.tuples_out},
                        {"skipped_empty_mask", report.skipped_empty_mask},
                        {"delta", report.delta},
                        {"policy", box_policy_to_string(report.policy)}};
}

std::optional<PseudoBox> pseudo_box_for_tuple(const ImageRecord& record,
                                              int tuple_index,
                                              const Image& image,
                                              const PseudoLabelContext& ctx) {
  check(ctx.backbone && ctx.rrpn && ctx.embeddings,
        "pseudo_box_for_tuple: context is incomplete");
  check(image.width == ctx.image.width && image.height == ctx.image.height,
        "pseudo_box_for_tuple: image '" + record.image_id + "' is " +
            std::to_string(image.width) + "x" + std::to_string(image.height) +
            ", pipeline expects " + std::to_string(ctx.image.width) + "x" +
            std::to_string(ctx.image.height));
  const HoiTuple& tup = record.tuples[tuple_index];

  FeatureGrid image_grid, pose_grid, verb_grid;
  const FeatureGrid* gi = nullptr;
  const FeatureGrid* gp = nullptr;
  const FeatureGrid* gv = nullptr;
  Backbone::Cache cache;
  if (ctx.active.image) {
    image_grid = extract_image_features(image, *ctx.backbone, cache);
    gi = &image_grid;
  }
  if (ctx.active.pose) {
    pose_grid = render_pose_heatmaps(tup.keypoints, ctx.image, ctx.grid,
                                     ctx.pose_sigma);
    gp = &pose_grid;
  }
  if (ctx.active.verb) {
    verb_grid = broadcast_verb(embed_verb(tup.verb, *ctx.embeddings), ctx.grid);
    gv = &verb_grid;
  }
  FeatureVolume vol = fuse(gi, gp, gv, ctx.active,
                           FuseSpec{ctx.backbone->c_img, ctx.grid});
  AttentionMap map = rrpn_forward(vol.values, *ctx.rrpn);
  BinaryMask mask = threshold_map(map, ctx.delta);
  auto grid_box = extract_box(mask, ctx.policy);
  if (!grid_box) return std::nullopt;
  PseudoBox out;
  out.box = to_image_coords(*grid_box, ctx.grid, ctx.image);
  out.image_id = record.image_id;
  out.tuple_index = tuple_index;
  out.max_activation = *std::max_element(map.v.begin(), map.v.end());
  return out;
}

std::vector<ImageRecord> generate_pseudo_annotations(
    const std::vector<ImageRecord>& records, const SplitSpec& split,
    const PseudoLabelContext& ctx,
    const std::function<Image(const ImageRecord&)>& load_image,
    PseudoLabelReport& report) {
  report = PseudoLabelReport{};
  report.delta = ctx.delta;
  report.policy = ctx.policy;

  const std::vector<TupleRef> refs =
      enumerate_tuples(records, split, Side::Target);
  report.tuples_in = long(refs.size());

  std::vector<std::optional<PseudoBox>> results(refs.size());
  parallel_for(int(refs.size()), ctx.threads, [&](int i) {
    const Image img = load_image(*refs[i].record);
    results[i] = pseudo_box_for_tuple(*refs[i].record, refs[i].tuple_index,
                                      img, ctx);
  });

  // merge deterministically by (image_id, tuple index) — refs are already
  // in that order
  std::map<std::string, ImageRecord> out_by_id;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    if (!results[i]) {
      ++report.skipped_empty_mask;
      continue;
    }
    const ImageRecord& src = *refs[i].record;
    auto [it, fresh] = out_by_id.try_emplace(src.image_id);
    if (fresh) {
      it->second = src;
      it->second.tuples.clear();
    }
    HoiTuple tup = src.tuples[refs[i].tuple_index];
    tup.object_box = results[i]->box;
    it->second.tuples.push_back(std::move(tup));
    ++report.tuples_out;
  }
  std::vector<ImageRecord> out;
  out.reserve(out_by_id.size());
  for (auto& [id, rec] : out_by_id) {
    validate_record(rec);
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace hoidet
