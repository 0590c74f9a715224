#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "fishtrack/detection.hpp"
#include "fishtrack/geometry.hpp"

namespace fishtrack {

enum class SceneClass { night, day, both };

std::string to_string(SceneClass s);
SceneClass scene_class_from_string(const std::string& s);

struct AreaLimits {
    double min_area = 0.0;
    double max_area = 0.0;
};

// Concentric ring partition of the fisheye image with the per-ring priors:
// an IoU gate for frame-to-frame association and a bbox area band for the
// size filter. Area bands can differ per scene class.
struct RegionSpec {
    std::vector<double> boundaries;     // ascending ring outer radii, px
    std::vector<double> iou_thresholds; // one per ring
    std::map<SceneClass, std::vector<AreaLimits>> area_limits;

    std::size_t ring_count() const { return boundaries.size(); }
    const std::vector<AreaLimits>& limits_for(SceneClass scene) const;

    void validate() const; // throws std::invalid_argument on broken invariants
};

// Built-in spec: ring radii 180/320/512 on a 1024x1024 image, IoU gates
// 0.2/0.3/0.4 from inner to outer, and the published per-scene area bands.
RegionSpec icip2020_preset();

struct Ckmeans1dResult {
    std::vector<std::vector<double>> clusters; // k contiguous groups, ascending
    double total_sse = 0.0;
};

// Optimal 1-D k-means: partition of the sorted values into k contiguous
// groups minimizing total within-cluster sum of squared deviations. Exact
// dynamic program, deterministic. Throws std::invalid_argument when the
// input is empty or k exceeds the number of distinct values.
Ckmeans1dResult ckmeans_1d(std::vector<double> values, std::size_t k);

// Derive a RegionSpec from ground-truth boxes: cluster center radii into k
// rings, put boundaries at midpoints between adjacent cluster extremes
// (last boundary covers the whole image), and set each ring's area band to
// mean_area * (1 -/+ margin). Bands are computed per scene class present in
// the input, plus the "both" pool over all boxes. A ring that receives no
// boxes for a computed class is an error.
RegionSpec fit_region_spec(const std::vector<std::pair<BBox, SceneClass>>& ground_truth_boxes,
                           const ImageGeometry& g, std::size_t k, double margin);

// Ring index of a box center: first ring whose outer boundary >= radius
// (boundary radii belong to the inner ring); anything beyond the last
// boundary maps to the last ring.
std::size_t classify_region(const BBox& b, const RegionSpec& spec, const ImageGeometry& g);

std::size_t classify_radius(double r, const RegionSpec& spec);

struct SizeFilterResult {
    std::vector<Detection> kept;
    std::vector<Detection> removed;
};

// Drop detections whose box area falls outside the area band of their ring.
// Exhaustive, order-preserving partition of the input.
SizeFilterResult size_filter(const std::vector<Detection>& dets, const RegionSpec& spec,
                             SceneClass scene, const ImageGeometry& g);

} // namespace fishtrack
