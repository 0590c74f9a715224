#pragma once

#include <filesystem>
#include <vector>

#include "fishtrack/detection.hpp"
#include "fishtrack/regions.hpp"
#include "fishtrack/tracker.hpp"

namespace fishtrack {

enum class DetectionFormat { mot_csv, jsonl };

DetectionFormat detection_format_from_string(const std::string& s);

// Read detections from a MOT-style CSV (frame,id,x,y,w,h,conf with x,y the
// top-left corner) or JSON lines ({"frame","x","y","w","h","confidence"}
// plus optional "modality"). Output is sorted by (frame, det_id) with boxes
// in center form. When a row carries no explicit modality, frames take the
// schedule of `plan` (keyframes full, intermediate frames motion-only);
// without a plan everything defaults to full.
std::vector<Detection> read_detections(const std::filesystem::path& path, DetectionFormat format,
                                       const SegmentPlan* plan = nullptr);

// MOT-style ground truth: frame,id,x,y,w,h[,conf[,moving]]. The trailing
// moving flag defaults to 1. (frame, car_id) pairs must be unique.
std::vector<GroundTruthBox> read_ground_truth(const std::filesystem::path& path);

void write_detections(const std::vector<Detection>& dets, const std::filesystem::path& path,
                      DetectionFormat format);

void write_ground_truth(const std::vector<GroundTruthBox>& gt, const std::filesystem::path& path);

// Track CSV contract: header `frame,track_id,x,y,w,h,status,source`, one
// row per (frame, track), x,y top-left, coordinates with 2 decimal places,
// rows sorted by (frame, track_id). This layout is bit-exact.
void write_tracks(const std::vector<Track>& tracks, const std::filesystem::path& path);

std::vector<Track> read_tracks(const std::filesystem::path& path);

RegionSpec read_region_spec(const std::filesystem::path& path);

void write_region_spec(const RegionSpec& spec, const std::filesystem::path& path);

} // namespace fishtrack
