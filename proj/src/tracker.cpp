#include "fishtrack/tracker.hpp"

#include <algorithm>
#include <stdexcept>

#include "fishtrack/errors.hpp"

namespace fishtrack {

bool SegmentPlan::is_keyframe(int frame) const {
    return std::binary_search(keyframes.begin(), keyframes.end(), frame);
}

SegmentPlan plan_segments(int n_frames, int segment_size) {
    if (n_frames < 2)
        throw std::invalid_argument("plan_segments: need at least 2 frames");
    if (segment_size < 2)
        throw std::invalid_argument("plan_segments: segment size must be at least 2");

    SegmentPlan plan;
    plan.segment_size = segment_size;
    plan.n_frames = n_frames;
    plan.keyframes.push_back(1);
    int f = 1;
    while (f < n_frames) {
        const int next = std::min(f + segment_size - 1, n_frames);
        plan.keyframes.push_back(next);
        plan.segments.emplace_back(f, next);
        f = next;
    }
    return plan;
}

std::string to_string(BoxSource s) {
    switch (s) {
    case BoxSource::detected: return "detected";
    case BoxSource::interpolated: return "interpolated";
    case BoxSource::extrapolated: return "extrapolated";
    case BoxSource::hcc: return "hcc";
    }
    return "detected";
}

Association associate_frames(const std::vector<PrevBox>& prev, const std::vector<Detection>& curr,
                             const RegionSpec& spec, const ImageGeometry& g) {
    struct Candidate {
        double score;
        std::size_t prev_index;
        std::size_t curr_index;
        int track_id;
        int det_id;
    };
    std::vector<Candidate> candidates;
    for (std::size_t i = 0; i < prev.size(); ++i) {
        for (std::size_t j = 0; j < curr.size(); ++j) {
            const double score = iou(prev[i].box, curr[j].box);
            const double gate = spec.iou_thresholds[classify_region(curr[j].box, spec, g)];
            if (score >= gate)
                candidates.push_back({score, i, j, prev[i].track_id, curr[j].det_id});
        }
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.track_id != b.track_id) return a.track_id < b.track_id;
        return a.det_id < b.det_id;
    });

    Association out;
    std::vector<bool> prev_used(prev.size(), false), curr_used(curr.size(), false);
    for (const Candidate& c : candidates) {
        if (prev_used[c.prev_index] || curr_used[c.curr_index])
            continue;
        prev_used[c.prev_index] = true;
        curr_used[c.curr_index] = true;
        out.matches.emplace_back(static_cast<int>(c.prev_index), static_cast<int>(c.curr_index));
    }
    for (std::size_t i = 0; i < prev.size(); ++i)
        if (!prev_used[i])
            out.unmatched_prev.push_back(static_cast<int>(i));
    for (std::size_t j = 0; j < curr.size(); ++j)
        if (!curr_used[j])
            out.unmatched_curr.push_back(static_cast<int>(j));
    return out;
}

int TrackStore::new_track(int frame, const TrackBox& box) {
    Track t;
    t.id = next_id++;
    t.boxes.emplace(frame, box);
    tracks.emplace(t.id, std::move(t));
    return next_id - 1;
}

void TrackStore::add_box(int track_id, int frame, const TrackBox& box) {
    Track& t = tracks.at(track_id);
    if (!t.boxes.emplace(frame, box).second)
        throw std::logic_error("TrackStore: track already holds a box for this frame");
}

void TrackStore::merge_into(int dst_id, int src_id) {
    if (dst_id == src_id)
        return;
    Track& dst = tracks.at(dst_id);
    Track& src = tracks.at(src_id);
    for (const auto& [frame, box] : src.boxes)
        if (dst.boxes.count(frame))
            throw std::logic_error("TrackStore: merge would duplicate a frame");
    dst.boxes.insert(src.boxes.begin(), src.boxes.end());
    tracks.erase(src_id);
}

std::vector<PrevBox> TrackStore::boxes_at(int frame) const {
    std::vector<PrevBox> out;
    for (const auto& [id, track] : tracks) {
        auto it = track.boxes.find(frame);
        if (it != track.boxes.end())
            out.push_back(PrevBox{id, it->second.box});
    }
    return out;
}

std::vector<Track> TrackStore::sorted_tracks() const {
    std::vector<Track> out;
    out.reserve(tracks.size());
    for (const auto& [id, track] : tracks)
        out.push_back(track);
    return out;
}

void track_frames(TrackStore& store, const std::vector<std::vector<Detection>>& dets_by_frame,
                  int first, int last, const RegionSpec& spec, const ImageGeometry& g) {
    for (int f = first; f <= last; ++f) {
        const std::vector<Detection>& dets = dets_by_frame[static_cast<std::size_t>(f)];
        if (f == 1) {
            for (const Detection& det : dets)
                store.new_track(f, TrackBox{det.box, BoxSource::detected, det.confidence});
            continue;
        }
        const std::vector<PrevBox> prev = store.boxes_at(f - 1);
        const Association assoc = associate_frames(prev, dets, spec, g);
        for (const auto& [pi, ci] : assoc.matches) {
            const Detection& det = dets[static_cast<std::size_t>(ci)];
            store.add_box(prev[static_cast<std::size_t>(pi)].track_id, f,
                          TrackBox{det.box, BoxSource::detected, det.confidence});
        }
        for (int ci : assoc.unmatched_curr) {
            const Detection& det = dets[static_cast<std::size_t>(ci)];
            store.new_track(f, TrackBox{det.box, BoxSource::detected, det.confidence});
        }
    }
}

std::vector<Track> run_segment_tracking(const std::vector<std::vector<Detection>>& dets_by_frame,
                                        const SegmentPlan& plan, const RegionSpec& spec,
                                        const ImageGeometry& g) {
    TrackStore store;
    track_frames(store, dets_by_frame, 1, plan.n_frames, spec, g);
    return store.sorted_tracks();
}

std::vector<std::vector<Detection>> group_by_frame(const std::vector<Detection>& dets, int n_frames) {
    std::vector<std::vector<Detection>> out(static_cast<std::size_t>(n_frames) + 1);
    for (const Detection& det : dets) {
        if (det.frame < 1 || det.frame > n_frames)
            throw DataError("detection frame " + std::to_string(det.frame) + " outside [1," +
                            std::to_string(n_frames) + "]");
        out[static_cast<std::size_t>(det.frame)].push_back(det);
    }
    return out;
}

} // namespace fishtrack
