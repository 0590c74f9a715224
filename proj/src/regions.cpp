#include "fishtrack/regions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "fishtrack/errors.hpp"

namespace fishtrack {

std::string to_string(SceneClass s) {
    switch (s) {
    case SceneClass::night: return "night";
    case SceneClass::day: return "day";
    case SceneClass::both: return "both";
    }
    return "both";
}

SceneClass scene_class_from_string(const std::string& s) {
    if (s == "night") return SceneClass::night;
    if (s == "day") return SceneClass::day;
    if (s == "both") return SceneClass::both;
    throw ConfigError("unknown scene class: " + s);
}

const std::vector<AreaLimits>& RegionSpec::limits_for(SceneClass scene) const {
    auto it = area_limits.find(scene);
    if (it == area_limits.end())
        throw ConfigError("region spec carries no area limits for scene class '" + to_string(scene) + "'");
    return it->second;
}

void RegionSpec::validate() const {
    if (boundaries.empty())
        throw std::invalid_argument("region spec: no ring boundaries");
    for (std::size_t i = 0; i + 1 < boundaries.size(); ++i)
        if (boundaries[i] >= boundaries[i + 1])
            throw std::invalid_argument("region spec: boundaries not strictly ascending");
    if (iou_thresholds.size() != boundaries.size())
        throw std::invalid_argument("region spec: need one IoU threshold per ring");
    for (double t : iou_thresholds)
        if (t <= 0.0 || t >= 1.0)
            throw std::invalid_argument("region spec: IoU threshold outside (0,1)");
    for (const auto& [scene, limits] : area_limits) {
        if (limits.size() != boundaries.size())
            throw std::invalid_argument("region spec: need one area band per ring (scene " + to_string(scene) + ")");
        for (const auto& lim : limits)
            if (!(0.0 < lim.min_area && lim.min_area < lim.max_area))
                throw std::invalid_argument("region spec: area band must satisfy 0 < min < max");
    }
}

RegionSpec icip2020_preset() {
    RegionSpec spec;
    spec.boundaries = {180.0, 320.0, 512.0};
    spec.iou_thresholds = {0.2, 0.3, 0.4};
    spec.area_limits[SceneClass::night] = {{113.0, 162.0}, {92.0, 132.0}, {53.0, 76.0}};
    spec.area_limits[SceneClass::day] = {{217.0, 311.0}, {166.0, 238.0}, {94.0, 135.0}};
    spec.area_limits[SceneClass::both] = {{211.0, 302.0}, {133.0, 191.0}, {88.0, 127.0}};
    return spec;
}

namespace {

// Within-cluster sum of squared deviations over an inclusive index range of
// the sorted values, via prefix sums.
class IntervalSse {
public:
    explicit IntervalSse(const std::vector<double>& sorted)
        : sum_(sorted.size() + 1, 0.0), sumsq_(sorted.size() + 1, 0.0) {
        for (std::size_t i = 0; i < sorted.size(); ++i) {
            sum_[i + 1] = sum_[i] + sorted[i];
            sumsq_[i + 1] = sumsq_[i] + sorted[i] * sorted[i];
        }
    }

    double operator()(std::size_t i, std::size_t j) const {
        const double n = static_cast<double>(j - i + 1);
        const double s = sum_[j + 1] - sum_[i];
        const double sq = sumsq_[j + 1] - sumsq_[i];
        return std::max(0.0, sq - s * s / n);
    }

private:
    std::vector<double> sum_;
    std::vector<double> sumsq_;
};

// One DP layer with divide-and-conquer optimization. The optimal split
// index is monotone in the right endpoint, which keeps the whole layer at
// O(n log n). Computes cost[j] = min over i of prev[i-1] + ssq(i, j) for
// all j in [jlo, jhi], with the split index constrained to [ilo, ihi].
void solve_layer(const IntervalSse& ssq, const std::vector<double>& prev,
                 std::vector<double>& cost, std::vector<std::size_t>& split,
                 std::size_t jlo, std::size_t jhi, std::size_t ilo, std::size_t ihi) {
    if (jlo > jhi)
        return;
    const std::size_t j = jlo + (jhi - jlo) / 2;
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_i = ilo;
    const std::size_t hi = std::min(ihi, j);
    for (std::size_t i = ilo; i <= hi; ++i) {
        const double c = prev[i - 1] + ssq(i, j);
        if (c < best) {
            best = c;
            best_i = i;
        }
    }
    cost[j] = best;
    split[j] = best_i;
    if (j > jlo)
        solve_layer(ssq, prev, cost, split, jlo, j - 1, ilo, best_i);
    if (j < jhi)
        solve_layer(ssq, prev, cost, split, j + 1, jhi, best_i, ihi);
}

} // namespace

Ckmeans1dResult ckmeans_1d(std::vector<double> values, std::size_t k) {
    if (values.empty())
        throw std::invalid_argument("ckmeans_1d: empty input");
    if (k == 0)
        throw std::invalid_argument("ckmeans_1d: k must be at least 1");
    std::sort(values.begin(), values.end());
    std::size_t distinct = 1;
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] != values[i - 1])
            ++distinct;
    if (k > distinct)
        throw std::invalid_argument("ckmeans_1d: k exceeds the number of distinct values");

    const std::size_t n = values.size();
    const IntervalSse ssq(values);

    std::vector<double> prev(n), cost(n);
    std::vector<std::vector<std::size_t>> splits(k, std::vector<std::size_t>(n, 0));
    for (std::size_t j = 0; j < n; ++j)
        prev[j] = ssq(0, j);
    for (std::size_t m = 1; m < k; ++m) {
        solve_layer(ssq, prev, cost, splits[m], m, n - 1, m, n - 1);
        std::swap(prev, cost);
    }

    // Backtrack cluster start indices.
    std::vector<std::size_t> starts(k);
    std::size_t end = n - 1;
    for (std::size_t m = k; m-- > 1;) {
        starts[m] = splits[m][end];
        end = starts[m] - 1;
    }
    starts[0] = 0;

    Ckmeans1dResult result;
    result.clusters.resize(k);
    for (std::size_t m = 0; m < k; ++m) {
        const std::size_t lo = starts[m];
        const std::size_t hi = (m + 1 < k) ? starts[m + 1] - 1 : n - 1;
        result.clusters[m].assign(values.begin() + lo, values.begin() + hi + 1);
        result.total_sse += ssq(lo, hi);
    }
    return result;
}

std::size_t classify_radius(double r, const RegionSpec& spec) {
    for (std::size_t i = 0; i < spec.boundaries.size(); ++i)
        if (r <= spec.boundaries[i])
            return i;
    return spec.boundaries.size() - 1;
}

std::size_t classify_region(const BBox& b, const RegionSpec& spec, const ImageGeometry& g) {
    return classify_radius(radius(b, g), spec);
}

RegionSpec fit_region_spec(const std::vector<std::pair<BBox, SceneClass>>& ground_truth_boxes,
                           const ImageGeometry& g, std::size_t k, double margin) {
    if (ground_truth_boxes.empty())
        throw std::invalid_argument("fit_region_spec: no ground-truth boxes");
    if (k < 1)
        throw std::invalid_argument("fit_region_spec: k must be at least 1");
    if (!(margin > 0.0 && margin < 1.0))
        throw std::invalid_argument("fit_region_spec: margin must be in (0,1)");

    std::vector<double> radii;
    radii.reserve(ground_truth_boxes.size());
    for (const auto& [box, scene] : ground_truth_boxes)
        radii.push_back(radius(box, g));

    const Ckmeans1dResult clustering = ckmeans_1d(radii, k);

    RegionSpec spec;
    spec.boundaries.resize(k);
    for (std::size_t i = 0; i + 1 < k; ++i)
        spec.boundaries[i] = (clustering.clusters[i].back() + clustering.clusters[i + 1].front()) / 2.0;
    // The outermost boundary closes the partition; box centers can sit a bit
    // outside the inscribed circle (image corners), so take the max.
    spec.boundaries[k - 1] = std::max(g.max_radius, *std::max_element(radii.begin(), radii.end()));

    // IoU gates grow with radius (cars cover less image area per frame step
    // toward the rim). Linear ladder from 0.2 to 0.4 reproduces the
    // published 3-ring values.
    spec.iou_thresholds.resize(k);
    for (std::size_t i = 0; i < k; ++i)
        spec.iou_thresholds[i] =
            (k == 1) ? 0.3
                     : static_cast<double>(2 * (k - 1 - i) + 4 * i) /
                           static_cast<double>(10 * (k - 1));

    std::set<SceneClass> classes{SceneClass::both};
    for (const auto& [box, scene] : ground_truth_boxes)
        classes.insert(scene);

    for (SceneClass scene : classes) {
        std::vector<double> area_sum(k, 0.0);
        std::vector<std::size_t> count(k, 0);
        for (const auto& [box, tag] : ground_truth_boxes) {
            if (scene != SceneClass::both && tag != scene)
                continue;
            const std::size_t ring = classify_region(box, spec, g);
            area_sum[ring] += area(box);
            count[ring] += 1;
        }
        std::vector<AreaLimits> limits(k);
        for (std::size_t ring = 0; ring < k; ++ring) {
            if (count[ring] == 0)
                throw DataError("fit_region_spec: ring " + std::to_string(ring) +
                                " has no boxes for scene class '" + to_string(scene) + "'");
            const double mean = area_sum[ring] / static_cast<double>(count[ring]);
            limits[ring] = AreaLimits{(1.0 - margin) * mean, (1.0 + margin) * mean};
        }
        spec.area_limits[scene] = std::move(limits);
    }

    spec.validate();
    return spec;
}

SizeFilterResult size_filter(const std::vector<Detection>& dets, const RegionSpec& spec,
                             SceneClass scene, const ImageGeometry& g) {
    const std::vector<AreaLimits>& limits = spec.limits_for(scene);
    SizeFilterResult out;
    for (const Detection& det : dets) {
        const AreaLimits& lim = limits[classify_region(det.box, spec, g)];
        const double a = area(det.box);
        if (lim.min_area <= a && a <= lim.max_area)
            out.kept.push_back(det);
        else
            out.removed.push_back(det);
    }
    return out;
}

} // namespace fishtrack
