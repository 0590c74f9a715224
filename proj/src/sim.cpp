#include "fishtrack/sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>

#include <json.hpp>

#include "fishtrack/errors.hpp"

namespace fishtrack {

namespace {

using nlohmann::json;

constexpr double kPi = 3.14159265358979323846;

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

} // namespace

double Route::length() const { return std::hypot(x1 - x0, y1 - y0); }

ProjectedPoint project_fisheye(double ground_x, double ground_y, const SceneSpec& spec) {
    const double d = std::hypot(ground_x, ground_y);
    const double theta = std::atan2(d, spec.camera_height_m);
    if (theta >= kPi / 2.0)
        throw std::domain_error("project_fisheye: point behind the camera horizon");

    ProjectedPoint out;
    out.image_radius = spec.focal_px_per_rad * theta;
    if (out.image_radius > spec.geometry.max_radius * std::sqrt(2.0))
        throw std::domain_error("project_fisheye: point maps outside the image");
    if (d > 0.0) {
        out.u = spec.geometry.center_x + out.image_radius * (ground_x / d);
        out.v = spec.geometry.center_y + out.image_radius * (ground_y / d);
        out.apparent_side = spec.focal_px_per_rad * theta / d;
    } else {
        out.u = spec.geometry.center_x;
        out.v = spec.geometry.center_y;
        out.apparent_side = spec.focal_px_per_rad / spec.camera_height_m;
    }
    return out;
}

std::vector<GroundTruthBox> generate_scene(const SceneSpec& spec) {
    if (spec.n_frames < 1)
        throw std::invalid_argument("generate_scene: n_frames must be positive");
    for (const CarSpec& car : spec.cars) {
        if (car.route < 0 || car.route >= static_cast<int>(spec.routes.size()))
            throw std::invalid_argument("generate_scene: car references an unknown route");
        if (car.speed_mps < 0.0)
            throw std::invalid_argument("generate_scene: negative speed");
        if (car.spawn_frame < 1)
            throw std::invalid_argument("generate_scene: spawn frame must be >= 1");
        if (car.footprint_m <= 0.0)
            throw std::invalid_argument("generate_scene: footprint must be positive");
    }

    std::vector<GroundTruthBox> gt;
    for (std::size_t ci = 0; ci < spec.cars.size(); ++ci) {
        const CarSpec& car = spec.cars[ci];
        const Route& route = spec.routes[static_cast<std::size_t>(car.route)];
        const double len = route.length();
        const double ux = (route.x1 - route.x0) / len;
        const double uy = (route.y1 - route.y0) / len;
        const double step = car.speed_mps / spec.fps;

        auto dwelling = [&](int frame) {
            for (const auto& [a, b] : car.dwells)
                if (a <= frame && frame <= b)
                    return true;
            return false;
        };

        std::vector<GroundTruthBox> boxes;
        bool moved = false;
        double progress = 0.0;
        double prev_progress = 0.0;
        for (int f = car.spawn_frame; f <= spec.n_frames; ++f) {
            if (f > car.spawn_frame)
                progress += dwelling(f) ? 0.0 : step;
            if (progress > len)
                break; // left the monitored area
            if (progress != prev_progress && f > car.spawn_frame)
                moved = true;
            prev_progress = progress;

            const double gx = route.x0 + ux * progress;
            const double gy = route.y0 + uy * progress;
            const ProjectedPoint p = project_fisheye(gx, gy, spec);
            const double side = std::max(kMinBoxSide, car.footprint_m * p.apparent_side);
            GroundTruthBox box;
            box.frame = f;
            box.car_id = static_cast<int>(ci) + 1;
            box.box = BBox{p.u, p.v, side, side};
            boxes.push_back(box);
        }
        for (GroundTruthBox& box : boxes)
            box.moving = moved;
        gt.insert(gt.end(), boxes.begin(), boxes.end());
    }

    std::stable_sort(gt.begin(), gt.end(), [](const GroundTruthBox& a, const GroundTruthBox& b) {
        if (a.frame != b.frame) return a.frame < b.frame;
        return a.car_id < b.car_id;
    });
    return gt;
}

namespace {

std::size_t ring_of(double radius, const std::vector<double>& boundaries) {
    for (std::size_t i = 0; i < boundaries.size(); ++i)
        if (radius <= boundaries[i])
            return i;
    return boundaries.size() - 1;
}

void check_ring_table(const std::vector<double>& v, std::size_t rings, const char* name) {
    if (v.size() != rings)
        throw std::invalid_argument(std::string("corrupt_detections: ") + name + " needs one entry per ring");
}

} // namespace

std::vector<Detection> corrupt_detections(const std::vector<GroundTruthBox>& gt,
                                          const NoiseSpec& noise, const SegmentPlan& plan,
                                          const ImageGeometry& g) {
    const std::size_t rings = noise.ring_boundaries.size();
    check_ring_table(noise.miss_full, rings, "miss_full");
    check_ring_table(noise.miss_motion, rings, "miss_motion");
    check_ring_table(noise.fp_rate, rings, "fp_rate");
    if (noise.fp_area.size() != rings)
        throw std::invalid_argument("corrupt_detections: fp_area needs one entry per ring");

    std::mt19937_64 rng(noise.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    // Previous-frame center per car, to decide frame-difference visibility.
    std::map<int, std::pair<double, double>> prev_center;

    std::vector<std::vector<const GroundTruthBox*>> by_frame(static_cast<std::size_t>(plan.n_frames) + 1);
    for (const GroundTruthBox& box : gt)
        if (box.frame >= 1 && box.frame <= plan.n_frames)
            by_frame[static_cast<std::size_t>(box.frame)].push_back(&box);

    std::vector<Detection> dets;
    for (int f = 1; f <= plan.n_frames; ++f) {
        const bool motion_frame = noise.motion_only_ifs && !plan.is_keyframe(f);
        const Modality modality = motion_frame ? Modality::motion_only : Modality::full;
        int det_id = 0;

        for (const GroundTruthBox* box : by_frame[static_cast<std::size_t>(f)]) {
            const double cx = box->box.cx;
            const double cy = box->box.cy;
            bool still = false;
            auto prev = prev_center.find(box->car_id);
            if (prev != prev_center.end())
                still = std::abs(prev->second.first - cx) < 1e-9 &&
                        std::abs(prev->second.second - cy) < 1e-9;
            prev_center[box->car_id] = {cx, cy};

            if (motion_frame && still)
                continue; // invisible on a frame-difference input, no draw spent

            const std::size_t ring = ring_of(std::hypot(cx - g.center_x, cy - g.center_y),
                                             noise.ring_boundaries);
            const double miss_p = motion_frame ? noise.miss_motion[ring] : noise.miss_full[ring];
            if (unit(rng) < miss_p)
                continue;

            Detection det;
            det.frame = f;
            det.modality = modality;
            det.box = box->box;
            if (noise.center_jitter_px > 0.0) {
                det.box.cx += noise.center_jitter_px * gauss(rng);
                det.box.cy += noise.center_jitter_px * gauss(rng);
            }
            if (noise.size_jitter_frac > 0.0) {
                det.box.w = std::max(kMinBoxSide, det.box.w * (1.0 + noise.size_jitter_frac * gauss(rng)));
                det.box.h = std::max(kMinBoxSide, det.box.h * (1.0 + noise.size_jitter_frac * gauss(rng)));
            }
            det.confidence = noise.tp_confidence.sigma > 0.0
                                 ? clamp01(noise.tp_confidence.mean +
                                           noise.tp_confidence.sigma * gauss(rng))
                                 : clamp01(noise.tp_confidence.mean);
            det.det_id = det_id++;
            dets.push_back(det);
        }

        for (std::size_t ring = 0; ring < rings; ++ring) {
            if (noise.fp_rate[ring] <= 0.0)
                continue;
            std::poisson_distribution<int> count(noise.fp_rate[ring]);
            const int n_fp = count(rng);
            const double r_lo = ring == 0 ? 0.0 : noise.ring_boundaries[ring - 1];
            const double r_hi = noise.ring_boundaries[ring];
            for (int i = 0; i < n_fp; ++i) {
                const double r = r_lo + (r_hi - r_lo) * unit(rng);
                const double az = 2.0 * kPi * unit(rng);
                const auto& [a_lo, a_hi] = noise.fp_area[ring];
                const double side = std::sqrt(a_lo + (a_hi - a_lo) * unit(rng));
                Detection det;
                det.frame = f;
                det.modality = modality;
                det.box = BBox{g.center_x + r * std::cos(az), g.center_y + r * std::sin(az),
                               std::max(kMinBoxSide, side), std::max(kMinBoxSide, side)};
                det.confidence = noise.fp_confidence.sigma > 0.0
                                     ? clamp01(noise.fp_confidence.mean +
                                               noise.fp_confidence.sigma * gauss(rng))
                                     : clamp01(noise.fp_confidence.mean);
                det.det_id = det_id++;
                dets.push_back(det);
            }
        }
    }
    return dets;
}

SceneSpec reference_scene(int n_cars, int n_frames, std::uint64_t seed) {
    if (n_cars < 1 || n_frames < 2)
        throw std::invalid_argument("reference_scene: need at least 1 car and 2 frames");

    SceneSpec spec;
    spec.n_frames = n_frames;

    // Two-way star of 8 lanes through the intersection, each offset 2.5 m
    // to its right so opposite directions do not collide.
    const double reach = 35.0;
    const double lane_offset = 2.5;
    for (int k = 0; k < 8; ++k) {
        const double az = static_cast<double>(k) * kPi / 4.0;
        const double ux = std::cos(az), uy = std::sin(az);
        const double nx = -uy, ny = ux;
        Route r;
        r.x0 = -reach * ux + lane_offset * nx;
        r.y0 = -reach * uy + lane_offset * ny;
        r.x1 = reach * ux + lane_offset * nx;
        r.y1 = reach * uy + lane_offset * ny;
        spec.routes.push_back(r);
    }

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> speed_dist(7.0, 13.0);
    std::uniform_real_distribution<double> footprint_dist(4.2, 4.8);
    std::uniform_int_distribution<int> spawn_jitter(0, 6);
    std::uniform_int_distribution<int> dwell_len(20, 45);

    const int spawn_span = std::max(1, (n_frames * 3) / 4);
    for (int j = 0; j < n_cars; ++j) {
        CarSpec car;
        car.route = j % 8;
        car.speed_mps = speed_dist(rng);
        car.footprint_m = footprint_dist(rng);
        car.spawn_frame = 1 + (j * spawn_span) / n_cars + spawn_jitter(rng);
        if (j % 10 == 7) {
            // Drives in, then parks for a long stretch.
            const int start = car.spawn_frame + 25;
            car.dwells.push_back({start, start + 90});
        } else if (j % 7 == 5) {
            // Waiting at the red light first, then drives off.
            car.dwells.push_back({car.spawn_frame, car.spawn_frame + dwell_len(rng)});
        } else if (j % 3 == 1) {
            // Stops mid-route for a while.
            const int start = car.spawn_frame + 15;
            car.dwells.push_back({start, start + dwell_len(rng)});
        }
        spec.cars.push_back(car);
    }
    return spec;
}

NoiseSpec noise_preset(const std::string& name, const std::vector<GroundTruthBox>& gt,
                       const ImageGeometry& g, std::uint64_t seed) {
    NoiseSpec noise;
    noise.seed = seed;
    const std::size_t rings = noise.ring_boundaries.size();

    // Size false positives like the cars actually seen in each ring.
    std::vector<double> area_sum(rings, 0.0);
    std::vector<std::size_t> count(rings, 0);
    double global_sum = 0.0;
    for (const GroundTruthBox& box : gt) {
        const std::size_t ring =
            ring_of(std::hypot(box.box.cx - g.center_x, box.box.cy - g.center_y), noise.ring_boundaries);
        area_sum[ring] += area(box.box);
        count[ring] += 1;
        global_sum += area(box.box);
    }
    const double global_mean = gt.empty() ? 100.0 : global_sum / static_cast<double>(gt.size());
    noise.fp_area.resize(rings);
    for (std::size_t r = 0; r < rings; ++r) {
        const double mean = count[r] ? area_sum[r] / static_cast<double>(count[r]) : global_mean;
        noise.fp_area[r] = {0.6 * mean, 1.4 * mean};
    }

    if (name == "night") {
        noise.miss_full = {0.05, 0.04, 0.45};
        noise.miss_motion = {0.06, 0.05, 0.35};
        noise.fp_rate = {0.02, 0.03, 0.06};
        noise.center_jitter_px = 0.4;
        noise.size_jitter_frac = 0.05;
        noise.tp_confidence = {0.87, 0.08};
        noise.fp_confidence = {0.40, 0.15};
    } else if (name == "day") {
        noise.miss_full = {0.04, 0.03, 0.25};
        noise.miss_motion = {0.05, 0.04, 0.20};
        noise.fp_rate = {0.01, 0.015, 0.03};
        noise.center_jitter_px = 0.35;
        noise.size_jitter_frac = 0.04;
        noise.tp_confidence = {0.88, 0.07};
        noise.fp_confidence = {0.40, 0.15};
    } else if (name == "clean") {
        noise.miss_full = {0.0, 0.0, 0.0};
        noise.miss_motion = {0.0, 0.0, 0.0};
        noise.fp_rate = {0.0, 0.0, 0.0};
        noise.motion_only_ifs = false;
        noise.tp_confidence = {1.0, 0.0};
        noise.fp_confidence = {0.0, 0.0};
    } else {
        throw ConfigError("unknown noise preset: " + name);
    }
    return noise;
}

namespace {

json geometry_to_json(const ImageGeometry& g) {
    return json{{"width", g.width}, {"height", g.height}};
}

ImageGeometry geometry_from_json(const json& doc) {
    ImageGeometry g = ImageGeometry::square(1024.0);
    if (doc.contains("width")) {
        const double w = doc.at("width").get<double>();
        const double h = doc.value("height", w);
        g = ImageGeometry{w, h, w / 2.0, h / 2.0, w / 2.0};
    }
    return g;
}

} // namespace

SceneSpec read_scene_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open scene spec: " + path.string());
    json doc;
    try {
        in >> doc;
        SceneSpec spec;
        spec.geometry = geometry_from_json(doc.value("image", json::object()));
        spec.camera_height_m = doc.value("camera_height_m", spec.camera_height_m);
        spec.focal_px_per_rad = doc.value("focal_px_per_rad", spec.focal_px_per_rad);
        spec.fps = doc.value("fps", spec.fps);
        spec.n_frames = doc.at("n_frames").get<int>();
        for (const auto& r : doc.at("routes"))
            spec.routes.push_back(Route{r.at("x0").get<double>(), r.at("y0").get<double>(),
                                        r.at("x1").get<double>(), r.at("y1").get<double>()});
        for (const auto& c : doc.at("cars")) {
            CarSpec car;
            car.route = c.at("route").get<int>();
            car.speed_mps = c.at("speed_mps").get<double>();
            car.spawn_frame = c.value("spawn_frame", 1);
            car.footprint_m = c.value("footprint_m", 4.5);
            if (c.contains("dwells"))
                for (const auto& d : c["dwells"])
                    car.dwells.push_back({d.at(0).get<int>(), d.at(1).get<int>()});
            spec.cars.push_back(car);
        }
        return spec;
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

void write_scene_spec(const SceneSpec& spec, const std::filesystem::path& path) {
    json doc;
    doc["image"] = geometry_to_json(spec.geometry);
    doc["camera_height_m"] = spec.camera_height_m;
    doc["focal_px_per_rad"] = spec.focal_px_per_rad;
    doc["fps"] = spec.fps;
    doc["n_frames"] = spec.n_frames;
    doc["routes"] = json::array();
    for (const Route& r : spec.routes)
        doc["routes"].push_back(json{{"x0", r.x0}, {"y0", r.y0}, {"x1", r.x1}, {"y1", r.y1}});
    doc["cars"] = json::array();
    for (const CarSpec& car : spec.cars) {
        json c{{"route", car.route},
               {"speed_mps", car.speed_mps},
               {"spawn_frame", car.spawn_frame},
               {"footprint_m", car.footprint_m}};
        if (!car.dwells.empty()) {
            c["dwells"] = json::array();
            for (const auto& [a, b] : car.dwells)
                c["dwells"].push_back(json::array({a, b}));
        }
        doc["cars"].push_back(c);
    }
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out)
        throw ConfigError("cannot write scene spec: " + path.string());
    out << doc.dump(2) << '\n';
}

NoiseSpec read_noise_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open noise spec: " + path.string());
    json doc;
    try {
        in >> doc;
        NoiseSpec noise;
        noise.seed = doc.at("seed").get<std::uint64_t>();
        noise.miss_full = doc.at("miss_full").get<std::vector<double>>();
        noise.miss_motion = doc.at("miss_motion").get<std::vector<double>>();
        noise.motion_only_ifs = doc.value("motion_only_ifs", true);
        noise.fp_rate = doc.at("fp_rate").get<std::vector<double>>();
        for (const auto& pair : doc.at("fp_area"))
            noise.fp_area.push_back({pair.at(0).get<double>(), pair.at(1).get<double>()});
        noise.center_jitter_px = doc.value("center_jitter_px", 0.0);
        noise.size_jitter_frac = doc.value("size_jitter_frac", 0.0);
        if (doc.contains("tp_confidence"))
            noise.tp_confidence = {doc["tp_confidence"].at("mean").get<double>(),
                                   doc["tp_confidence"].at("sigma").get<double>()};
        if (doc.contains("fp_confidence"))
            noise.fp_confidence = {doc["fp_confidence"].at("mean").get<double>(),
                                   doc["fp_confidence"].at("sigma").get<double>()};
        if (doc.contains("ring_boundaries"))
            noise.ring_boundaries = doc["ring_boundaries"].get<std::vector<double>>();
        return noise;
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

void write_noise_spec(const NoiseSpec& noise, const std::filesystem::path& path) {
    json doc;
    doc["seed"] = noise.seed;
    doc["miss_full"] = noise.miss_full;
    doc["miss_motion"] = noise.miss_motion;
    doc["motion_only_ifs"] = noise.motion_only_ifs;
    doc["fp_rate"] = noise.fp_rate;
    doc["fp_area"] = json::array();
    for (const auto& [lo, hi] : noise.fp_area)
        doc["fp_area"].push_back(json::array({lo, hi}));
    doc["center_jitter_px"] = noise.center_jitter_px;
    doc["size_jitter_frac"] = noise.size_jitter_frac;
    doc["tp_confidence"] = json{{"mean", noise.tp_confidence.mean}, {"sigma", noise.tp_confidence.sigma}};
    doc["fp_confidence"] = json{{"mean", noise.fp_confidence.mean}, {"sigma", noise.fp_confidence.sigma}};
    doc["ring_boundaries"] = noise.ring_boundaries;
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out)
        throw ConfigError("cannot write noise spec: " + path.string());
    out << doc.dump(2) << '\n';
}

} // namespace fishtrack
