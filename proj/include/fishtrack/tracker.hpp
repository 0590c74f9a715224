#pragma once

#include <map>
#include <string>
#include <vector>

#include "fishtrack/detection.hpp"
#include "fishtrack/regions.hpp"

namespace fishtrack {

// Overlapping segment layout: keyframes at 1, 1+(s-1), 1+2(s-1), ... and
// consecutive segments sharing one keyframe. A short remainder promotes the
// last frame to keyframe.
struct SegmentPlan {
    int segment_size = 3;
    int n_frames = 0;
    std::vector<int> keyframes;
    std::vector<std::pair<int, int>> segments; // (start_kf, end_kf)

    bool is_keyframe(int frame) const;
};

SegmentPlan plan_segments(int n_frames, int segment_size);

// How a track box came to exist.
enum class BoxSource { detected, interpolated, extrapolated, hcc };

std::string to_string(BoxSource s);

enum class TrackStatus { moving, stationary_candidate, stationary };

struct TrackBox {
    BBox box;
    BoxSource source = BoxSource::detected;
    double confidence = 0.0;
};

// One car identity: at most one box per frame, frames strictly increasing
// by construction of the map.
struct Track {
    int id = 0;
    std::map<int, TrackBox> boxes; // keyed by frame
    TrackStatus status = TrackStatus::moving;

    int first_frame() const { return boxes.begin()->first; }
    int last_frame() const { return boxes.rbegin()->first; }
};

struct Association {
    std::vector<std::pair<int, int>> matches; // (prev index, curr index)
    std::vector<int> unmatched_prev;          // indices into prev
    std::vector<int> unmatched_curr;          // indices into curr
};

struct PrevBox {
    int track_id = 0;
    BBox box;
};

// Greedy best-first IoU matching between the previous frame's track boxes
// and the current frame's detections. A pair is admissible when its IoU
// reaches the ring threshold of the detection; the globally best pair wins
// each round, ties broken by (lower track id, lower det_id).
Association associate_frames(const std::vector<PrevBox>& prev, const std::vector<Detection>& curr,
                             const RegionSpec& spec, const ImageGeometry& g);

// Mutable set of tracks under construction. Iteration order is id order,
// which keeps every pass deterministic.
struct TrackStore {
    std::map<int, Track> tracks;
    int next_id = 1;

    int new_track(int frame, const TrackBox& box);
    void add_box(int track_id, int frame, const TrackBox& box);
    // Move every box of src into dst; the frames must be disjoint.
    void merge_into(int dst_id, int src_id);
    std::vector<PrevBox> boxes_at(int frame) const;
    std::vector<Track> sorted_tracks() const;
};

// Advance the baseline tracker over frames [first, last]: frame 1 opens a
// track per detection, every later frame is associated against the boxes of
// its predecessor, and unmatched detections open fresh tracks.
void track_frames(TrackStore& store, const std::vector<std::vector<Detection>>& dets_by_frame,
                  int first, int last, const RegionSpec& spec, const ImageGeometry& g);

// Baseline tracker over the whole sequence. Detections must be grouped per
// frame (index = frame number, 1-based; entry 0 unused).
std::vector<Track> run_segment_tracking(const std::vector<std::vector<Detection>>& dets_by_frame,
                                        const SegmentPlan& plan, const RegionSpec& spec,
                                        const ImageGeometry& g);

// Group a flat detection list by frame; result[f] holds frame f, entry 0 is
// empty. n_frames caps the table size (detections past it are an error).
std::vector<std::vector<Detection>> group_by_frame(const std::vector<Detection>& dets, int n_frames);

} // namespace fishtrack
