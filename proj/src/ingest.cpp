#include "fishtrack/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>

#include <json.hpp>

#include "fishtrack/errors.hpp"

namespace fishtrack {

namespace {

using nlohmann::json;

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

double parse_double(const std::string& s, const std::filesystem::path& path, int line_no) {
    double v = 0.0;
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    while (begin < end && *begin == ' ')
        ++begin;
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end)
        throw DataError(path.string() + ":" + std::to_string(line_no) + ": bad number '" + s + "'");
    return v;
}

int parse_int(const std::string& s, const std::filesystem::path& path, int line_no) {
    int v = 0;
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    while (begin < end && *begin == ' ')
        ++begin;
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end)
        throw DataError(path.string() + ":" + std::to_string(line_no) + ": bad integer '" + s + "'");
    return v;
}

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open file: " + path.string());
    return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out)
        throw ConfigError("cannot write file: " + path.string());
    return out;
}

BBox corner_to_center(double x, double y, double w, double h, const std::filesystem::path& path,
                      int line_no) {
    if (w <= 0.0 || h <= 0.0)
        throw DataError(path.string() + ":" + std::to_string(line_no) +
                        ": box width/height must be positive");
    return BBox{x + w / 2.0, y + h / 2.0, w, h};
}

// Fixed-point decimal rendering, always '.' as separator.
std::string fixed(double v, int precision) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, precision);
    return std::string(buf, ptr);
}

Modality modality_from_string(const std::string& s) {
    if (s == "full") return Modality::full;
    if (s == "motion-only") return Modality::motion_only;
    throw DataError("unknown modality: " + s);
}

std::string to_string(Modality m) {
    return m == Modality::full ? "full" : "motion-only";
}

void sort_and_default_modality(std::vector<Detection>& dets,
                               const std::vector<bool>& modality_explicit, const SegmentPlan* plan) {
    for (std::size_t i = 0; i < dets.size(); ++i) {
        if (modality_explicit[i])
            continue;
        dets[i].modality = (plan && !plan->is_keyframe(dets[i].frame)) ? Modality::motion_only
                                                                       : Modality::full;
    }
    std::stable_sort(dets.begin(), dets.end(), [](const Detection& a, const Detection& b) {
        if (a.frame != b.frame) return a.frame < b.frame;
        return a.det_id < b.det_id;
    });
}

} // namespace

DetectionFormat detection_format_from_string(const std::string& s) {
    if (s == "mot-csv") return DetectionFormat::mot_csv;
    if (s == "jsonl") return DetectionFormat::jsonl;
    throw ConfigError("unknown detection format: " + s);
}

std::vector<Detection> read_detections(const std::filesystem::path& path, DetectionFormat format,
                                       const SegmentPlan* plan) {
    std::ifstream in = open_input(path);
    std::vector<Detection> dets;
    std::vector<bool> modality_explicit;
    std::map<int, int> next_det_id;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r")
            continue;
        Detection det;
        bool explicit_modality = false;
        if (format == DetectionFormat::mot_csv) {
            const auto fields = split_csv(line);
            if (fields.size() < 7)
                throw DataError(path.string() + ":" + std::to_string(line_no) +
                                ": expected at least 7 fields (frame,id,x,y,w,h,conf)");
            det.frame = parse_int(fields[0], path, line_no);
            const double x = parse_double(fields[2], path, line_no);
            const double y = parse_double(fields[3], path, line_no);
            const double w = parse_double(fields[4], path, line_no);
            const double h = parse_double(fields[5], path, line_no);
            det.box = corner_to_center(x, y, w, h, path, line_no);
            det.confidence = parse_double(fields[6], path, line_no);
        } else {
            json row;
            try {
                row = json::parse(line);
            } catch (const json::exception& e) {
                throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
            }
            try {
                det.frame = row.at("frame").get<int>();
                det.box = corner_to_center(row.at("x").get<double>(), row.at("y").get<double>(),
                                           row.at("w").get<double>(), row.at("h").get<double>(),
                                           path, line_no);
                det.confidence = row.at("confidence").get<double>();
                if (row.contains("modality")) {
                    det.modality = modality_from_string(row["modality"].get<std::string>());
                    explicit_modality = true;
                }
            } catch (const json::exception& e) {
                throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
            }
        }
        if (det.frame < 1)
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": frame must be >= 1");
        if (det.confidence < 0.0 || det.confidence > 1.0)
            throw DataError(path.string() + ":" + std::to_string(line_no) +
                            ": confidence outside [0,1]");
        det.det_id = next_det_id[det.frame]++;
        dets.push_back(det);
        modality_explicit.push_back(explicit_modality);
    }
    sort_and_default_modality(dets, modality_explicit, plan);
    return dets;
}

std::vector<GroundTruthBox> read_ground_truth(const std::filesystem::path& path) {
    std::ifstream in = open_input(path);
    std::vector<GroundTruthBox> gt;
    std::set<std::pair<int, int>> seen;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r")
            continue;
        const auto fields = split_csv(line);
        if (fields.size() < 6)
            throw DataError(path.string() + ":" + std::to_string(line_no) +
                            ": expected at least 6 fields (frame,id,x,y,w,h)");
        GroundTruthBox box;
        box.frame = parse_int(fields[0], path, line_no);
        box.car_id = parse_int(fields[1], path, line_no);
        const double x = parse_double(fields[2], path, line_no);
        const double y = parse_double(fields[3], path, line_no);
        const double w = parse_double(fields[4], path, line_no);
        const double h = parse_double(fields[5], path, line_no);
        box.box = corner_to_center(x, y, w, h, path, line_no);
        if (fields.size() >= 8)
            box.moving = parse_int(fields[7], path, line_no) != 0;
        if (box.frame < 1)
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": frame must be >= 1");
        if (!seen.emplace(box.frame, box.car_id).second)
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": duplicate (frame " +
                            std::to_string(box.frame) + ", car " + std::to_string(box.car_id) + ")");
        gt.push_back(box);
    }
    std::stable_sort(gt.begin(), gt.end(), [](const GroundTruthBox& a, const GroundTruthBox& b) {
        if (a.frame != b.frame) return a.frame < b.frame;
        return a.car_id < b.car_id;
    });
    return gt;
}

void write_detections(const std::vector<Detection>& dets, const std::filesystem::path& path,
                      DetectionFormat format) {
    std::ofstream out = open_output(path);
    for (const Detection& det : dets) {
        const double x = det.box.cx - det.box.w / 2.0;
        const double y = det.box.cy - det.box.h / 2.0;
        if (format == DetectionFormat::mot_csv) {
            out << det.frame << ",-1," << fixed(x, 2) << ',' << fixed(y, 2) << ','
                << fixed(det.box.w, 2) << ',' << fixed(det.box.h, 2) << ','
                << fixed(det.confidence, 6) << '\n';
        } else {
            json row{{"frame", det.frame},       {"x", x},
                     {"y", y},                   {"w", det.box.w},
                     {"h", det.box.h},           {"confidence", det.confidence},
                     {"modality", to_string(det.modality)}};
            out << row.dump() << '\n';
        }
    }
}

void write_ground_truth(const std::vector<GroundTruthBox>& gt, const std::filesystem::path& path) {
    std::ofstream out = open_output(path);
    for (const GroundTruthBox& box : gt) {
        const double x = box.box.cx - box.box.w / 2.0;
        const double y = box.box.cy - box.box.h / 2.0;
        out << box.frame << ',' << box.car_id << ',' << fixed(x, 2) << ',' << fixed(y, 2) << ','
            << fixed(box.box.w, 2) << ',' << fixed(box.box.h, 2) << ",1,"
            << (box.moving ? 1 : 0) << '\n';
    }
}

void write_tracks(const std::vector<Track>& tracks, const std::filesystem::path& path) {
    struct Row {
        int frame;
        int track_id;
        const TrackBox* box;
        const char* status;
    };
    std::vector<Row> rows;
    for (const Track& track : tracks) {
        const char* status = track.status == TrackStatus::stationary ? "stationary" : "moving";
        for (const auto& [frame, box] : track.boxes)
            rows.push_back(Row{frame, track.id, &box, status});
    }
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        if (a.frame != b.frame) return a.frame < b.frame;
        return a.track_id < b.track_id;
    });

    std::ofstream out = open_output(path);
    out << "frame,track_id,x,y,w,h,status,source\n";
    for (const Row& row : rows) {
        const BBox& b = row.box->box;
        out << row.frame << ',' << row.track_id << ',' << fixed(b.cx - b.w / 2.0, 2) << ','
            << fixed(b.cy - b.h / 2.0, 2) << ',' << fixed(b.w, 2) << ',' << fixed(b.h, 2) << ','
            << row.status << ',' << to_string(row.box->source) << '\n';
    }
}

std::vector<Track> read_tracks(const std::filesystem::path& path) {
    std::ifstream in = open_input(path);
    std::map<int, Track> tracks;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r")
            continue;
        if (line_no == 1 && line.rfind("frame,", 0) == 0)
            continue;
        const auto fields = split_csv(line);
        if (fields.size() != 8)
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected 8 fields");
        const int frame = parse_int(fields[0], path, line_no);
        const int id = parse_int(fields[1], path, line_no);
        const double x = parse_double(fields[2], path, line_no);
        const double y = parse_double(fields[3], path, line_no);
        const double w = parse_double(fields[4], path, line_no);
        const double h = parse_double(fields[5], path, line_no);

        Track& track = tracks[id];
        track.id = id;
        track.status = fields[6] == "stationary" ? TrackStatus::stationary : TrackStatus::moving;
        TrackBox tb;
        tb.box = corner_to_center(x, y, w, h, path, line_no);
        if (fields[7] == "interpolated") tb.source = BoxSource::interpolated;
        else if (fields[7] == "extrapolated") tb.source = BoxSource::extrapolated;
        else if (fields[7] == "hcc") tb.source = BoxSource::hcc;
        else tb.source = BoxSource::detected;
        if (!track.boxes.emplace(frame, tb).second)
            throw DataError(path.string() + ":" + std::to_string(line_no) +
                            ": duplicate (frame, track) row");
    }
    std::vector<Track> out;
    out.reserve(tracks.size());
    for (auto& [id, track] : tracks)
        out.push_back(std::move(track));
    return out;
}

RegionSpec read_region_spec(const std::filesystem::path& path) {
    std::ifstream in = open_input(path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    RegionSpec spec;
    try {
        spec.boundaries = doc.at("boundaries").get<std::vector<double>>();
        spec.iou_thresholds = doc.at("iou_thresholds").get<std::vector<double>>();
        for (const auto& [key, rings] : doc.at("area_limits").items()) {
            std::vector<AreaLimits> limits;
            for (const auto& pair : rings)
                limits.push_back(AreaLimits{pair.at(0).get<double>(), pair.at(1).get<double>()});
            spec.area_limits[scene_class_from_string(key)] = std::move(limits);
        }
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    try {
        spec.validate();
    } catch (const std::invalid_argument& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    return spec;
}

void write_region_spec(const RegionSpec& spec, const std::filesystem::path& path) {
    json doc;
    doc["boundaries"] = spec.boundaries;
    doc["iou_thresholds"] = spec.iou_thresholds;
    json limits = json::object();
    for (const auto& [scene, rings] : spec.area_limits) {
        json arr = json::array();
        for (const AreaLimits& lim : rings)
            arr.push_back(json::array({lim.min_area, lim.max_area}));
        limits[to_string(scene)] = arr;
    }
    doc["area_limits"] = limits;
    std::ofstream out = open_output(path);
    out << doc.dump(2) << '\n';
}

} // namespace fishtrack
