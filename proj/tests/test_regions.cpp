#include <doctest.h>

#include <random>

#include "fishtrack/errors.hpp"
#include "fishtrack/regions.hpp"
#include "testutil.hpp"

using namespace fishtrack;

TEST_CASE("ckmeans_1d trivial and hand-checked partitions") {
    const auto one = ckmeans_1d({5, 5, 5}, 1);
    CHECK(one.clusters.size() == 1);
    CHECK(one.total_sse == doctest::Approx(0.0));

    // brute force over the 3 contiguous splits picks {1,2} | {11,12}
    const auto two = ckmeans_1d({1, 2, 11, 12}, 2);
    REQUIRE(two.clusters.size() == 2);
    CHECK(two.clusters[0] == std::vector<double>{1, 2});
    CHECK(two.clusters[1] == std::vector<double>{11, 12});

    const auto three = ckmeans_1d({1, 2, 3, 10, 11, 12, 20, 21}, 3);
    REQUIRE(three.clusters.size() == 3);
    CHECK(three.clusters[0] == std::vector<double>{1, 2, 3});
    CHECK(three.clusters[1] == std::vector<double>{10, 11, 12});
    CHECK(three.clusters[2] == std::vector<double>{20, 21});
}

TEST_CASE("ckmeans_1d rejects infeasible k") {
    CHECK_THROWS_AS(ckmeans_1d({}, 1), std::invalid_argument);
    CHECK_THROWS_AS(ckmeans_1d({1, 1, 1}, 2), std::invalid_argument);
    CHECK_THROWS_AS(ckmeans_1d({1, 2}, 0), std::invalid_argument);
}

TEST_CASE("ckmeans_1d equals exhaustive search on random instances") {
    std::mt19937_64 rng(1234);
    std::uniform_int_distribution<std::size_t> n_dist(2, 12);
    std::uniform_real_distribution<double> value(0.0, 100.0);
    for (int it = 0; it < 300; ++it) {
        const std::size_t n = n_dist(rng);
        std::vector<double> values(n);
        for (double& v : values)
            v = value(rng);
        std::uniform_int_distribution<std::size_t> k_dist(1, std::min<std::size_t>(4, n));
        const std::size_t k = k_dist(rng);

        const auto dp = ckmeans_1d(values, k);
        const auto brute = testutil::brute_force_ckmeans(values, k);
        // evaluate the DP partition with the oracle's own arithmetic
        CHECK(testutil::partition_sse(dp.clusters) == brute.sse);
    }
}

TEST_CASE("ckmeans_1d SSE is non-increasing in k") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> value(0.0, 50.0);
    std::vector<double> values(40);
    for (double& v : values)
        v = value(rng);
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k <= 6; ++k) {
        const double sse = ckmeans_1d(values, k).total_sse;
        CHECK(sse <= prev + 1e-9);
        prev = sse;
    }
}

TEST_CASE("icip2020 preset carries the published numbers") {
    const RegionSpec spec = icip2020_preset();
    CHECK(spec.boundaries == std::vector<double>{180.0, 320.0, 512.0});
    CHECK(spec.iou_thresholds == std::vector<double>{0.2, 0.3, 0.4});
    const auto& night = spec.limits_for(SceneClass::night);
    CHECK(night[2].min_area == 53.0);
    CHECK(night[2].max_area == 76.0);
    const auto& day = spec.limits_for(SceneClass::day);
    CHECK(day[0].min_area == 217.0);
    CHECK(day[0].max_area == 311.0);
    spec.validate();
}

TEST_CASE("fit_region_spec single ring arithmetic") {
    // all boxes at radius 100 with area 140 -> one ring, band 98..182
    const ImageGeometry g = ImageGeometry::square(1024.0);
    std::vector<std::pair<BBox, SceneClass>> boxes;
    for (int i = 0; i < 10; ++i)
        boxes.push_back({BBox{612, 512, 14, 10}, SceneClass::both});
    const RegionSpec spec = fit_region_spec(boxes, g, 1, 0.3);
    REQUIRE(spec.boundaries.size() == 1);
    CHECK(spec.boundaries[0] == doctest::Approx(512.0));
    const auto& lim = spec.limits_for(SceneClass::both);
    CHECK(lim[0].min_area == doctest::Approx(98.0));
    CHECK(lim[0].max_area == doctest::Approx(182.0));
}

TEST_CASE("fit_region_spec recovers three synthetic radius clusters") {
    const ImageGeometry g = ImageGeometry::square(1024.0);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> wobble(-15.0, 15.0);
    std::vector<std::pair<BBox, SceneClass>> boxes;
    std::vector<double> radii;
    for (int i = 0; i < 60; ++i) {
        const double r = (i % 3 == 0 ? 90.0 : i % 3 == 1 ? 250.0 : 400.0) + wobble(rng);
        radii.push_back(r);
        boxes.push_back({BBox{512.0 + r, 512.0, 12, 12}, SceneClass::both});
    }
    const RegionSpec spec = fit_region_spec(boxes, g, 3, 0.3);
    REQUIRE(spec.boundaries.size() == 3);
    CHECK(spec.boundaries[2] == doctest::Approx(512.0));

    // boundaries must split the same way the brute-force clustering does
    const auto brute = testutil::brute_force_ckmeans(radii, 3);
    std::vector<double> sorted(radii);
    std::sort(sorted.begin(), sorted.end());
    const double b0 = (sorted[brute.starts[1] - 1] + sorted[brute.starts[1]]) / 2.0;
    const double b1 = (sorted[brute.starts[2] - 1] + sorted[brute.starts[2]]) / 2.0;
    CHECK(spec.boundaries[0] == doctest::Approx(b0));
    CHECK(spec.boundaries[1] == doctest::Approx(b1));
    CHECK(spec.iou_thresholds == std::vector<double>{0.2, 0.3, 0.4});
}

TEST_CASE("fit_region_spec errors on an empty ring") {
    const ImageGeometry g = ImageGeometry::square(1024.0);
    // two tight radius clusters cannot fill three rings for scene tagging
    std::vector<std::pair<BBox, SceneClass>> boxes;
    boxes.push_back({BBox{600, 512, 10, 10}, SceneClass::night});
    boxes.push_back({BBox{601, 512, 10, 10}, SceneClass::day});
    boxes.push_back({BBox{900, 512, 10, 10}, SceneClass::night});
    // day boxes exist only in the inner cluster: outer ring empty for day
    CHECK_THROWS_AS(fit_region_spec(boxes, g, 2, 0.3), DataError);
}

TEST_CASE("classify_region ring selection and tie rule") {
    const RegionSpec spec = icip2020_preset();
    const ImageGeometry g = ImageGeometry::square(1024.0);
    CHECK(classify_region(BBox{612, 512, 4, 4}, spec, g) == 0);  // radius 100
    CHECK(classify_region(BBox{762, 512, 4, 4}, spec, g) == 1);  // radius 250
    CHECK(classify_region(BBox{692, 512, 4, 4}, spec, g) == 0);  // radius 180, boundary -> inner
    CHECK(classify_region(BBox{512, 1100, 4, 4}, spec, g) == 2); // past the last boundary
}

TEST_CASE("classify_region is monotone in radius") {
    const RegionSpec spec = icip2020_preset();
    std::size_t prev = 0;
    for (double r = 0.0; r <= 700.0; r += 3.7) {
        const std::size_t ring = classify_radius(r, spec);
        CHECK(ring >= prev);
        prev = ring;
    }
}

TEST_CASE("size_filter keeps in-band boxes and partitions the input") {
    const RegionSpec spec = icip2020_preset();
    const ImageGeometry g = ImageGeometry::square(1024.0);

    // night outer ring band is 53..76
    std::vector<Detection> dets;
    dets.push_back(Detection{1, BBox{912, 512, 8, 8}, 0.9, Modality::full, 0});    // 64, kept
    dets.push_back(Detection{1, BBox{912, 512, 10, 10}, 0.9, Modality::full, 1});  // 100, removed
    dets.push_back(Detection{2, BBox{912, 512, 7.3, 7.3}, 0.5, Modality::full, 0}); // 53.29, kept

    const SizeFilterResult split = size_filter(dets, spec, SceneClass::night, g);
    REQUIRE(split.kept.size() == 2);
    REQUIRE(split.removed.size() == 1);
    CHECK(split.kept[0].det_id == 0);
    CHECK(split.kept[1].frame == 2);
    CHECK(split.removed[0].det_id == 1);

    const SizeFilterResult empty = size_filter({}, spec, SceneClass::night, g);
    CHECK(empty.kept.empty());
    CHECK(empty.removed.empty());
}

TEST_CASE("size_filter partition is exhaustive and respects the bands") {
    const RegionSpec spec = icip2020_preset();
    const ImageGeometry g = ImageGeometry::square(1024.0);
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> pos(0.0, 1024.0);
    std::uniform_real_distribution<double> side(1.0, 25.0);
    std::vector<Detection> dets;
    for (int i = 0; i < 400; ++i)
        dets.push_back(Detection{1 + i % 7, BBox{pos(rng), pos(rng), side(rng), side(rng)}, 0.5,
                                 Modality::full, i});
    const SizeFilterResult split = size_filter(dets, spec, SceneClass::both, g);
    CHECK(split.kept.size() + split.removed.size() == dets.size());
    const auto& limits = spec.limits_for(SceneClass::both);
    for (const Detection& d : split.kept) {
        const auto& lim = limits[classify_region(d.box, spec, g)];
        CHECK(area(d.box) >= lim.min_area);
        CHECK(area(d.box) <= lim.max_area);
    }
    for (const Detection& d : split.removed) {
        const auto& lim = limits[classify_region(d.box, spec, g)];
        CHECK((area(d.box) < lim.min_area || area(d.box) > lim.max_area));
    }
}
