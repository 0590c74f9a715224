#pragma once

#include <optional>
#include <vector>

#include "fishtrack/detection.hpp"
#include "fishtrack/regions.hpp"
#include "fishtrack/tracker.hpp"

namespace fishtrack {

// A prediction for detection scoring: box plus ranking confidence.
struct ScoredBox {
    int frame = 0;
    BBox box;
    double confidence = 0.0;
};

struct ApResult {
    double overall = 0.0;
    // One entry per ring when a RegionSpec is supplied; a ring without
    // ground truth reports no value.
    std::vector<std::optional<double>> per_ring;
};

// Average precision at IoU >= 0.5 with all-point interpolation of the
// precision-recall curve. Predictions are consumed in descending confidence
// order and greedily matched to unmatched ground truth in their frame.
// Ground truth must be pre-filtered to moving cars; an empty ground-truth
// set is an error, not a zero. Per-ring values partition ground truth and
// predictions by the ring of their own box center.
ApResult ap50(const std::vector<ScoredBox>& predictions, const std::vector<GroundTruthBox>& gt,
              const RegionSpec* ring_spec, const ImageGeometry& g);

struct MotCounts {
    long tp = 0;
    long fp = 0;
    long fn = 0;
    long id_switches = 0;
    long gt_total = 0;
};

struct MotResult {
    double mota = 0.0;
    std::optional<double> motp; // mean matched IoU; empty when tp == 0
    MotCounts counts;
};

// CLEAR MOT at IoU >= 0.5: correspondences from the previous frame are kept
// while they still overlap, the rest are matched greedily by IoU. MOTA =
// 1 - (FN + FP + IDSW) / GT. Ground truth must be pre-filtered to moving
// cars and must be non-empty.
MotResult clear_mot(const std::vector<Track>& tracks, const std::vector<GroundTruthBox>& gt);

} // namespace fishtrack
