#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hoidet/annotations.hpp"
#include "hoidet/features.hpp"
#include "hoidet/rrpn.hpp"
#include "hoidet/tensor.hpp"

namespace hoidet {

// How "the box containing the super-threshold cells" is read: the tight hull
// of all of them, or the tight box of the largest 4-connected component.
enum class BoxPolicy { Hull, LargestComponent };
BoxPolicy box_policy_from_string(const std::string& s);
std::string box_policy_to_string(BoxPolicy p);

// mask = map > delta (strict).
BinaryMask threshold_map(const AttentionMap& map, double delta);

// Tight grid box over the mask per the policy; absent for an all-zero mask.
// Component ties break by topmost-then-leftmost component origin.
std::optional<GridBox> extract_box(const BinaryMask& mask,
                                   BoxPolicy policy = BoxPolicy::Hull);

// Maps a grid-cell box to its pixel extent: cell c covers
// [c*W_img/W_grid, (c+1)*W_img/W_grid). Rounded to nearest pixel (half up)
// and clipped to the image.
BoundingBox to_image_coords(const GridBox& grid_box, Dims grid, Dims image);

struct PseudoBox {
  BoundingBox box;
  std::string image_id;
  int tuple_index = 0;
  double max_activation = 0;
};

struct PseudoLabelReport {
  long tuples_in = 0;
  long tuples_out = 0;
  long skipped_empty_mask = 0;
  double delta = 0;
  BoxPolicy policy = BoxPolicy::Hull;
};

nlohmann::json pseudo_report_to_json(const PseudoLabelReport& report);

struct PseudoLabelContext {
  const Backbone* backbone = nullptr;
  const Rrpn* rrpn = nullptr;
  const EmbeddingTable* embeddings = nullptr;
  FeatureSet active;
  Dims grid;
  Dims image;       // expected image dims (grid * backbone stride)
  double pose_sigma = 2.0;
  double delta = 0.1;
  BoxPolicy policy = BoxPolicy::Hull;
  int threads = 1;
};

// Runs features -> attention -> threshold -> box for one tuple; absent when
// the thresholded mask is empty.
std::optional<PseudoBox> pseudo_box_for_tuple(const ImageRecord& record,
                                              int tuple_index,
                                              const Image& image,
                                              const PseudoLabelContext& ctx);

// Fills object_box for every target-side tuple. Tuples whose mask comes out
// empty are dropped and counted; images left with no tuples are dropped.
// load_image must return the decoded image for a record.
std::vector<ImageRecord> generate_pseudo_annotations(
    const std::vector<ImageRecord>& records, const SplitSpec& split,
    const PseudoLabelContext& ctx,
    const std::function<Image(const ImageRecord&)>& load_image,
    PseudoLabelReport& report);

}  // namespace hoidet
