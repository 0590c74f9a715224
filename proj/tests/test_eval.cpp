#include <doctest.h>

#include <random>

#include "fishtrack/errors.hpp"
#include "fishtrack/eval.hpp"
#include "testutil.hpp"

using namespace fishtrack;

namespace {

GroundTruthBox gt_box(int frame, int car, double cx, double cy, double side) {
    return GroundTruthBox{frame, car, BBox{cx, cy, side, side}, true};
}

ScoredBox pred(int frame, double cx, double cy, double side, double conf) {
    return ScoredBox{frame, BBox{cx, cy, side, side}, conf};
}

Track track_from(int id, const std::vector<std::tuple<int, double, double, double>>& rows) {
    Track t;
    t.id = id;
    for (const auto& [frame, cx, cy, side] : rows)
        t.boxes.emplace(frame, TrackBox{BBox{cx, cy, side, side}, BoxSource::detected, 1.0});
    return t;
}

const ImageGeometry kGeom = ImageGeometry::square(1024.0);

} // namespace

TEST_CASE("ap50 frozen fixtures") {
    // one ground-truth box, one overlapping prediction: AP = 1
    {
        std::vector<GroundTruthBox> gt{gt_box(1, 1, 100, 100, 10)};
        std::vector<ScoredBox> preds{pred(1, 102, 100, 10, 0.9)}; // IoU 0.667
        CHECK(ap50(preds, gt, nullptr, kGeom).overall == doctest::Approx(1.0).epsilon(1e-9));
    }
    // two ground-truth boxes, one matched: area under PR = 0.5
    {
        std::vector<GroundTruthBox> gt{gt_box(1, 1, 100, 100, 10), gt_box(1, 2, 300, 300, 10)};
        std::vector<ScoredBox> preds{pred(1, 100.5, 100, 10, 0.9)}; // IoU 0.9 on car 1
        CHECK(ap50(preds, gt, nullptr, kGeom).overall == doctest::Approx(0.5).epsilon(1e-9));
    }
    // a trailing false positive does not dent the interpolated curve
    {
        std::vector<GroundTruthBox> gt{gt_box(1, 1, 100, 100, 10)};
        std::vector<ScoredBox> preds{pred(1, 100, 100, 10, 0.9), pred(1, 500, 500, 10, 0.8)};
        CHECK(ap50(preds, gt, nullptr, kGeom).overall == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("ap50 empty ground truth is an error, not zero") {
    std::vector<ScoredBox> preds{pred(1, 100, 100, 10, 0.9)};
    CHECK_THROWS_AS(ap50(preds, {}, nullptr, kGeom), DataError);
}

TEST_CASE("ap50 is invariant under order-preserving confidence rescaling") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> place(100.0, 900.0);
    std::uniform_real_distribution<double> conf(0.05, 0.95);
    std::vector<GroundTruthBox> gt;
    std::vector<ScoredBox> preds;
    for (int i = 0; i < 40; ++i) {
        const double cx = place(rng), cy = place(rng);
        gt.push_back(gt_box(1 + i % 5, 1 + i, cx, cy, 14));
        if (i % 3 != 0)
            preds.push_back(pred(1 + i % 5, cx + (i % 2 ? 2.0 : -1.0), cy, 14, conf(rng)));
        if (i % 4 == 0)
            preds.push_back(pred(1 + i % 5, place(rng), place(rng), 14, conf(rng)));
    }
    const double base = ap50(preds, gt, nullptr, kGeom).overall;
    std::vector<ScoredBox> rescaled = preds;
    for (ScoredBox& p : rescaled)
        p.confidence = 0.1 + 0.5 * p.confidence; // strictly monotone map
    CHECK(ap50(rescaled, gt, nullptr, kGeom).overall == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("ap50 on ground truth as predictions is exactly one") {
    std::vector<GroundTruthBox> gt;
    std::vector<ScoredBox> preds;
    for (int f = 1; f <= 10; ++f)
        for (int c = 1; c <= 3; ++c) {
            gt.push_back(gt_box(f, c, 100.0 * c, 50.0 + 3.0 * f, 12));
            preds.push_back(pred(f, 100.0 * c, 50.0 + 3.0 * f, 12, 1.0));
        }
    CHECK(ap50(preds, gt, nullptr, kGeom).overall == 1.0);
}

TEST_CASE("ap50 per-ring partitions by box center") {
    const RegionSpec spec = icip2020_preset();
    // one car in the inner circle (recovered), one at the rim (missed)
    std::vector<GroundTruthBox> gt{gt_box(1, 1, 512, 512, 20), gt_box(1, 2, 950, 512, 20)};
    std::vector<ScoredBox> preds{pred(1, 512, 512, 20, 0.9)};
    const ApResult ap = ap50(preds, gt, &spec, kGeom);
    REQUIRE(ap.per_ring.size() == 3);
    CHECK(*ap.per_ring[0] == doctest::Approx(1.0));
    CHECK_FALSE(ap.per_ring[1].has_value()); // no ground truth there
    CHECK(*ap.per_ring[2] == doctest::Approx(0.0));
    CHECK(ap.overall == doctest::Approx(0.5));
}

TEST_CASE("clear_mot perfect tracks score one") {
    std::vector<GroundTruthBox> gt;
    std::vector<Track> tracks;
    for (int c = 1; c <= 2; ++c) {
        std::vector<std::tuple<int, double, double, double>> rows;
        for (int f = 1; f <= 10; ++f) {
            gt.push_back(gt_box(f, c, 200.0 * c + 4.0 * f, 300, 16));
            rows.push_back({f, 200.0 * c + 4.0 * f, 300, 16});
        }
        tracks.push_back(track_from(c, rows));
    }
    const MotResult mot = clear_mot(tracks, gt);
    CHECK(mot.mota == doctest::Approx(1.0).epsilon(1e-9));
    REQUIRE(mot.motp.has_value());
    CHECK(*mot.motp == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(mot.counts.fn == 0);
    CHECK(mot.counts.fp == 0);
    CHECK(mot.counts.id_switches == 0);
    CHECK(mot.counts.tp + mot.counts.fn == mot.counts.gt_total);
}

TEST_CASE("clear_mot frozen fixture: one miss and one false positive") {
    // 10 ground-truth boxes, 1 FN, 1 FP, 0 IDSW -> MOTA 0.8
    std::vector<GroundTruthBox> gt;
    for (int f = 1; f <= 10; ++f)
        gt.push_back(gt_box(f, 1, 100.0 + 4.0 * f, 200, 16));
    std::vector<std::tuple<int, double, double, double>> rows;
    for (int f = 1; f <= 9; ++f) // frame 10 missed
        rows.push_back({f, 100.0 + 4.0 * f, 200, 16});
    Track t = track_from(1, rows);
    Track fp = track_from(2, {{3, 700.0, 700.0, 16}}); // stray hypothesis
    const MotResult mot = clear_mot({t, fp}, gt);
    CHECK(mot.counts.fn == 1);
    CHECK(mot.counts.fp == 1);
    CHECK(mot.counts.id_switches == 0);
    CHECK(mot.mota == doctest::Approx(0.8).epsilon(1e-9));
}

TEST_CASE("clear_mot frozen fixture: mid-sequence identity swap") {
    // two cars, ten frames, hypotheses swap at frame 6 -> IDSW 2, MOTA 0.9
    std::vector<GroundTruthBox> gt;
    for (int f = 1; f <= 10; ++f) {
        gt.push_back(gt_box(f, 1, 100.0 + 4.0 * f, 200, 16));
        gt.push_back(gt_box(f, 2, 100.0 + 4.0 * f, 600, 16));
    }
    Track h1, h2;
    h1.id = 1;
    h2.id = 2;
    for (int f = 1; f <= 10; ++f) {
        const double top = 200.0, bottom = 600.0;
        const double y1 = f <= 5 ? top : bottom;
        const double y2 = f <= 5 ? bottom : top;
        h1.boxes.emplace(f, TrackBox{BBox{100.0 + 4.0 * f, y1, 16, 16}, BoxSource::detected, 1.0});
        h2.boxes.emplace(f, TrackBox{BBox{100.0 + 4.0 * f, y2, 16, 16}, BoxSource::detected, 1.0});
    }
    const MotResult mot = clear_mot({h1, h2}, gt);
    CHECK(mot.counts.id_switches == 2);
    CHECK(mot.counts.fn == 0);
    CHECK(mot.counts.fp == 0);
    CHECK(mot.mota == doctest::Approx(0.9).epsilon(1e-9));
}

TEST_CASE("clear_mot empty ground truth is an error") {
    CHECK_THROWS_AS(clear_mot({}, {}), DataError);
}

TEST_CASE("mota never exceeds one and equals one only for flawless input") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> place(100.0, 900.0);
    for (int it = 0; it < 30; ++it) {
        std::vector<GroundTruthBox> gt;
        std::vector<Track> tracks;
        for (int c = 1; c <= 3; ++c) {
            const double cx = place(rng), cy = place(rng);
            std::vector<std::tuple<int, double, double, double>> rows;
            for (int f = 1; f <= 6; ++f) {
                gt.push_back(gt_box(f, c, cx + 3.0 * f, cy, 15));
                if ((it + f + c) % 5 != 0)
                    rows.push_back({f, cx + 3.0 * f + ((it + c) % 2), cy, 15.0});
            }
            if (!rows.empty())
                tracks.push_back(track_from(c, rows));
        }
        const MotResult mot = clear_mot(tracks, gt);
        CHECK(mot.mota <= 1.0 + 1e-12);
        if (mot.mota >= 1.0 - 1e-12) {
            CHECK(mot.counts.fn == 0);
            CHECK(mot.counts.fp == 0);
            CHECK(mot.counts.id_switches == 0);
        }
    }
}
