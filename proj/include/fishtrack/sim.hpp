#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "fishtrack/detection.hpp"
#include "fishtrack/geometry.hpp"
#include "fishtrack/tracker.hpp"

namespace fishtrack {

// Ground-plane line segment (meters, camera at the origin) that cars drive
// along at constant speed.
struct Route {
    double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;

    double length() const;
};

struct CarSpec {
    int route = 0;
    double speed_mps = 10.0;
    int spawn_frame = 1;
    double footprint_m = 4.5;
    // Closed frame intervals during which the car stands still (red light).
    std::vector<std::pair<int, int>> dwells;
};

// Synthetic intersection scene under an overhead fisheye camera with the
// equidistant lens model r = focal * theta.
struct SceneSpec {
    ImageGeometry geometry = ImageGeometry::square(1024.0);
    double camera_height_m = 8.0;
    double focal_px_per_rad = 1024.0 / 3.14159265358979323846; // theta = pi/2 at the rim
    double fps = 15.0;
    int n_frames = 0;
    std::vector<Route> routes;
    std::vector<CarSpec> cars;
};

struct ProjectedPoint {
    double u = 0.0;
    double v = 0.0;
    double image_radius = 0.0;
    double apparent_side = 0.0; // box side in pixels for a unit 1 m footprint
};

// Equidistant fisheye projection of a ground point: theta = atan(d/H),
// image radius r = focal * theta, azimuth preserved. The apparent size uses
// the tangential scale focal * theta / d, which shrinks strictly with
// ground distance. Points the model cannot see are an error.
ProjectedPoint project_fisheye(double ground_x, double ground_y, const SceneSpec& spec);

// Per-frame ground truth for every alive car; cars enter at their route
// start on spawn_frame, stop during dwell intervals, and despawn past the
// route end. A car whose position never changes over its whole life has
// moving = false on all of its boxes.
std::vector<GroundTruthBox> generate_scene(const SceneSpec& spec);

struct ConfidenceModel {
    double mean = 0.85;
    double sigma = 0.1;
};

struct NoiseSpec {
    std::uint64_t seed = 0;
    std::vector<double> miss_full;        // per-ring miss prob, full-modality frames
    std::vector<double> miss_motion;      // per-ring miss prob, motion-only frames
    bool motion_only_ifs = true;          // false -> every frame is full modality
    std::vector<double> fp_rate;          // expected false positives per frame per ring
    std::vector<std::pair<double, double>> fp_area; // per-ring FP area range, px^2
    double center_jitter_px = 0.0;
    double size_jitter_frac = 0.0;
    ConfidenceModel tp_confidence{0.85, 0.1};
    ConfidenceModel fp_confidence{0.4, 0.15};
    std::vector<double> ring_boundaries = {180.0, 320.0, 512.0};
};

// Degrade ground truth into a detection list: ring/modality dependent
// misses (cars standing still are never seen on motion-only frames), center
// and size jitter, confidence draws and per-ring false positives. Fully
// determined by the seed.
std::vector<Detection> corrupt_detections(const std::vector<GroundTruthBox>& gt,
                                          const NoiseSpec& noise, const SegmentPlan& plan,
                                          const ImageGeometry& g);

// Canonical synthetic intersection: `n_cars` cars over `n_frames` frames on
// an 8-lane star of routes, speeds and spawn times drawn from `seed`. Used
// by the simulate presets.
SceneSpec reference_scene(int n_cars, int n_frames, std::uint64_t seed);

// Difficulty presets for the noise model. "night" echoes the weak
// outer-ring detection rate of dark footage (keyframe miss 0.45), "day" is
// the milder counterpart (0.25), "clean" is lossless full-modality
// detection. fp_area ranges are derived from the scene's own ground truth.
NoiseSpec noise_preset(const std::string& name, const std::vector<GroundTruthBox>& gt,
                       const ImageGeometry& g, std::uint64_t seed);

SceneSpec read_scene_spec(const std::filesystem::path& path);
void write_scene_spec(const SceneSpec& spec, const std::filesystem::path& path);
NoiseSpec read_noise_spec(const std::filesystem::path& path);
void write_noise_spec(const NoiseSpec& noise, const std::filesystem::path& path);

} // namespace fishtrack
