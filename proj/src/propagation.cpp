#include "fishtrack/propagation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

namespace fishtrack {

namespace {

// Disjoint frame coverage is the precondition for merging two identities.
bool frames_disjoint(const Track& a, const Track& b) {
    for (const auto& [frame, box] : a.boxes)
        if (b.boxes.count(frame))
            return false;
    return true;
}

double lerp(double a, double b, double t) { return a + (b - a) * t; }

// Hypothesized boxes inherit the confidence of the detections they were
// built from, discounted so they rank behind real detector output.
constexpr double kPropagatedConfidenceScale = 0.5;

// Linear continuation of a track beyond one of its ends. The velocity is
// taken over a window of up to 3 frames, which damps detector jitter that
// would otherwise compound with every extrapolated step.
BBox edge_extrapolate(const Track& t, bool backward, int target) {
    constexpr int kVelocityWindow = 3;
    if (backward) {
        auto anchor = t.boxes.begin();
        auto partner = anchor;
        for (int i = 0; i < kVelocityWindow && std::next(partner) != t.boxes.end(); ++i)
            ++partner;
        if (partner == anchor)
            return anchor->second.box;
        return extrapolate_box_at(partner->second.box, partner->first, anchor->second.box,
                                  anchor->first, target);
    }
    auto anchor = t.boxes.rbegin();
    auto partner = anchor;
    for (int i = 0; i < kVelocityWindow && std::next(partner) != t.boxes.rend(); ++i)
        ++partner;
    if (partner == anchor)
        return anchor->second.box;
    return extrapolate_box_at(partner->second.box, partner->first, anchor->second.box,
                              anchor->first, target);
}

} // namespace

struct OracleValidator::Impl {
    std::map<int, std::vector<BBox>> gt_by_frame;
    double iou_floor;
    double flip_probability;
    std::mt19937_64 rng;
    std::uniform_real_distribution<double> unit{0.0, 1.0};
};

OracleValidator::OracleValidator(const std::vector<GroundTruthBox>& gt, double iou_floor,
                                 double flip_probability, std::uint64_t seed)
    : impl_(std::make_shared<Impl>()) {
    for (const GroundTruthBox& box : gt)
        impl_->gt_by_frame[box.frame].push_back(box.box);
    impl_->iou_floor = iou_floor;
    impl_->flip_probability = flip_probability;
    impl_->rng.seed(seed);
}

bool OracleValidator::contains_car(int frame, const BBox& box) {
    bool verdict = false;
    auto it = impl_->gt_by_frame.find(frame);
    if (it != impl_->gt_by_frame.end()) {
        for (const BBox& gt_box : it->second) {
            if (iou(box, gt_box) >= impl_->iou_floor) {
                verdict = true;
                break;
            }
        }
    }
    if (impl_->flip_probability > 0.0 && impl_->unit(impl_->rng) < impl_->flip_probability)
        verdict = !verdict;
    return verdict;
}

double PropagationConfig::consistency_gate(std::size_t ring, const RegionSpec& spec) const {
    if (consistency_thresholds.empty())
        return spec.iou_thresholds[ring];
    return consistency_thresholds[std::min(ring, consistency_thresholds.size() - 1)];
}

double path_iou(const BBox& start, const BBox& end,
                const std::vector<std::vector<Detection>>& if_detections) {
    const std::size_t m = if_detections.size();
    if (m == 0)
        return iou(start, end);
    double sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double t = static_cast<double>(i + 1) / static_cast<double>(m + 1);
        const BBox interp = interpolate_box(start, end, t);
        double score = 0.0;
        for (const Detection& det : if_detections[i])
            score = std::max(score, iou(interp, det.box));
        if (score == 0.0) {
            // No detection touches the path on this frame. Absence is not
            // counter-evidence (motion-only frames cannot see stationary
            // cars), so fall back to the nearer endpoint box.
            const bool nearer_start = (i + 1) * 2 <= m + 1;
            score = iou(interp, nearer_start ? start : end);
        }
        sum += score;
    }
    return sum / static_cast<double>(m);
}

void propagate_kf_to_if(TrackStore& store, const std::vector<std::vector<Detection>>& dets_by_frame,
                        int start_kf, int end_kf, const RegionSpec& spec,
                        const PropagationConfig& cfg, const ImageGeometry& g) {
    if (end_kf - start_kf < 2)
        return; // no intermediate frames
    const std::vector<PrevBox> starts = store.boxes_at(start_kf);
    const std::vector<PrevBox> ends = store.boxes_at(end_kf);
    if (starts.empty() || ends.empty())
        return;

    std::vector<std::vector<Detection>> if_dets;
    for (int f = start_kf + 1; f < end_kf; ++f)
        if_dets.push_back(dets_by_frame[static_cast<std::size_t>(f)]);

    struct Candidate {
        double score;
        std::size_t si, ei;
    };
    std::vector<Candidate> candidates;
    for (std::size_t si = 0; si < starts.size(); ++si) {
        for (std::size_t ei = 0; ei < ends.size(); ++ei) {
            const double score = path_iou(starts[si].box, ends[ei].box, if_dets);
            const BBox mid = interpolate_box(starts[si].box, ends[ei].box, 0.5);
            const double gate = cfg.consistency_gate(classify_region(mid, spec, g), spec);
            if (score >= gate)
                candidates.push_back({score, si, ei});
        }
    }
    std::sort(candidates.begin(), candidates.end(), [&](const Candidate& a, const Candidate& b) {
        if (a.score != b.score) return a.score > b.score;
        if (starts[a.si].track_id != starts[b.si].track_id)
            return starts[a.si].track_id < starts[b.si].track_id;
        return ends[a.ei].track_id < ends[b.ei].track_id;
    });

    std::vector<bool> start_used(starts.size(), false), end_used(ends.size(), false);
    for (const Candidate& c : candidates) {
        if (start_used[c.si] || end_used[c.ei])
            continue;
        const int s_id = starts[c.si].track_id;
        const int e_id = ends[c.ei].track_id;
        if (!store.tracks.count(s_id) || !store.tracks.count(e_id))
            continue; // consumed by an earlier merge
        if (s_id != e_id) {
            if (!frames_disjoint(store.tracks.at(s_id), store.tracks.at(e_id)))
                continue;
            store.merge_into(s_id, e_id);
        }
        start_used[c.si] = true;
        end_used[c.ei] = true;

        // Fill the intermediate frames of the validated path: absorb the
        // matched fragment when one exists, interpolate otherwise.
        Track& track = store.tracks.at(s_id);
        const BBox start_box = starts[c.si].box;
        const BBox end_box = ends[c.ei].box;
        const double start_conf = track.boxes.at(start_kf).confidence;
        const double end_conf = track.boxes.at(end_kf).confidence;
        for (int f = start_kf + 1; f < end_kf; ++f) {
            if (track.boxes.count(f))
                continue;
            const double t = static_cast<double>(f - start_kf) / static_cast<double>(end_kf - start_kf);
            const BBox interp = interpolate_box(start_box, end_box, t);

            int absorb_id = 0;
            double absorb_score = -1.0;
            for (const auto& [id, other] : store.tracks) {
                if (id == s_id || other.first_frame() <= start_kf || other.last_frame() >= end_kf)
                    continue;
                auto it = other.boxes.find(f);
                if (it == other.boxes.end())
                    continue;
                const double score = iou(interp, it->second.box);
                const double gate =
                    cfg.consistency_gate(classify_region(it->second.box, spec, g), spec);
                if (score >= gate && score > absorb_score && frames_disjoint(track, other)) {
                    absorb_score = score;
                    absorb_id = id;
                }
            }
            if (absorb_id != 0)
                store.merge_into(s_id, absorb_id);
            else
                store.add_box(s_id, f,
                              TrackBox{interp, BoxSource::interpolated,
                                       kPropagatedConfidenceScale * lerp(start_conf, end_conf, t)});
        }
    }
}

namespace {

// Extrapolate a fragment's trajectory into a keyframe and either adopt an
// existing co-located candidate box, add the validated extrapolated box, or
// give up on this side. Returns the id of a fragment to absorb (>0), -1 for
// "add the box", or 0 for nothing.
struct KfLanding {
    int absorb_id = 0;
    bool add_box = false;
    BBox box;
};

KfLanding land_on_keyframe(const TrackStore& store, const Track& fragment, const BBox& ebox,
                           int kf_frame, int start_kf, int end_kf, const RegionSpec& spec,
                           BoxValidator& validator, const ImageGeometry& g) {
    KfLanding landing;
    landing.box = ebox;
    const double gate = spec.iou_thresholds[classify_region(ebox, spec, g)];

    int best_id = 0;
    double best_score = -1.0;
    for (const auto& [id, other] : store.tracks) {
        auto it = other.boxes.find(kf_frame);
        if (it == other.boxes.end())
            continue;
        const double score = iou(ebox, it->second.box);
        if (score > best_score) {
            best_score = score;
            best_id = id;
        }
    }
    if (best_score >= gate) {
        const Track& other = store.tracks.at(best_id);
        const bool absorbable = other.first_frame() >= start_kf && other.last_frame() <= end_kf &&
                                frames_disjoint(fragment, other);
        if (absorbable)
            landing.absorb_id = best_id;
        // Co-located with a live track: the car is already covered there,
        // adding the extrapolated box would duplicate it.
        return landing;
    }
    if (validator.contains_car(kf_frame, ebox))
        landing.add_box = true;
    return landing;
}

} // namespace

void propagate_if_to_kf(TrackStore& store, const std::vector<std::vector<Detection>>& dets_by_frame,
                        int start_kf, int end_kf, const RegionSpec& spec,
                        const PropagationConfig& cfg, BoxValidator& validator,
                        const ImageGeometry& g) {
    (void)dets_by_frame;
    const int n_if = end_kf - start_kf - 1;
    if (n_if < 1)
        return;

    // Track fragments living strictly inside the segment: candidate cars the
    // keyframes missed.
    std::vector<int> fragment_ids;
    for (const auto& [id, track] : store.tracks)
        if (track.first_frame() > start_kf && track.last_frame() < end_kf)
            fragment_ids.push_back(id);
    if (fragment_ids.empty())
        return;

    if (n_if >= 2) {
        // Chain fragments across adjacent intermediate frames by path IoU.
        struct PairCandidate {
            double score;
            int a_id, b_id;
        };
        std::vector<PairCandidate> pairs;
        for (int a_id : fragment_ids) {
            for (int b_id : fragment_ids) {
                if (a_id == b_id)
                    continue;
                const Track& a = store.tracks.at(a_id);
                const Track& b = store.tracks.at(b_id);
                if (a.last_frame() + 1 != b.first_frame())
                    continue;
                const BBox& abox = a.boxes.rbegin()->second.box;
                const BBox& bbox = b.boxes.begin()->second.box;
                const double score = path_iou(abox, bbox, {});
                const BBox mid = interpolate_box(abox, bbox, 0.5);
                if (score >= cfg.consistency_gate(classify_region(mid, spec, g), spec))
                    pairs.push_back({score, a_id, b_id});
            }
        }
        std::sort(pairs.begin(), pairs.end(), [](const PairCandidate& x, const PairCandidate& y) {
            if (x.score != y.score) return x.score > y.score;
            if (x.a_id != y.a_id) return x.a_id < y.a_id;
            return x.b_id < y.b_id;
        });
        std::map<int, int> redirect;
        auto resolve = [&](int id) {
            while (redirect.count(id))
                id = redirect[id];
            return id;
        };
        for (const PairCandidate& p : pairs) {
            const int a = resolve(p.a_id);
            const int b = resolve(p.b_id);
            if (a == b || !store.tracks.count(a) || !store.tracks.count(b))
                continue;
            if (store.tracks.at(a).last_frame() + 1 != store.tracks.at(b).first_frame())
                continue;
            store.merge_into(a, b);
            redirect[b] = a;
        }
        fragment_ids.clear();
        for (const auto& [id, track] : store.tracks)
            if (track.first_frame() > start_kf && track.last_frame() < end_kf &&
                track.boxes.size() >= 2)
                fragment_ids.push_back(id);

        for (int fid : fragment_ids) {
            if (!store.tracks.count(fid))
                continue;
            const Track& frag = store.tracks.at(fid);
            auto first = frag.boxes.begin();
            auto last = frag.boxes.rbegin();
            const BBox back = edge_extrapolate(frag, true, start_kf);
            const BBox fwd = edge_extrapolate(frag, false, end_kf);
            const KfLanding back_land =
                land_on_keyframe(store, frag, back, start_kf, start_kf, end_kf, spec, validator, g);
            const KfLanding fwd_land =
                land_on_keyframe(store, frag, fwd, end_kf, start_kf, end_kf, spec, validator, g);
            const bool any = back_land.absorb_id || back_land.add_box || fwd_land.absorb_id ||
                             fwd_land.add_box;
            if (!any)
                continue;

            // Promote the fragment to a car under a fresh id.
            const double conf_back = kPropagatedConfidenceScale * first->second.confidence;
            const double conf_fwd = kPropagatedConfidenceScale * last->second.confidence;
            const int new_id = store.next_id++;
            Track promoted;
            promoted.id = new_id;
            promoted.boxes = std::move(store.tracks.at(fid).boxes);
            store.tracks.erase(fid);
            store.tracks.emplace(new_id, std::move(promoted));
            if (back_land.absorb_id)
                store.merge_into(new_id, back_land.absorb_id);
            else if (back_land.add_box)
                store.add_box(new_id, start_kf, TrackBox{back, BoxSource::extrapolated, conf_back});
            if (fwd_land.absorb_id)
                store.merge_into(new_id, fwd_land.absorb_id);
            else if (fwd_land.add_box)
                store.add_box(new_id, end_kf, TrackBox{fwd, BoxSource::extrapolated, conf_fwd});
        }
        return;
    }

    // One intermediate frame: a lone detection cannot form an IF-IF pair.
    // Pair it with a same-ring keyframe candidate and extrapolate to the
    // opposite keyframe.
    const int mid = start_kf + 1;
    struct KfCandidate {
        double score;
        int frag_id;
        int cand_id;
        int kf_frame;
    };
    std::vector<KfCandidate> cands;
    for (int fid : fragment_ids) {
        const Track& frag = store.tracks.at(fid);
        const BBox& fbox = frag.boxes.at(mid).box;
        const std::size_t fring = classify_region(fbox, spec, g);
        for (const auto& [cid, other] : store.tracks) {
            if (cid == fid || other.first_frame() < start_kf || other.last_frame() > end_kf)
                continue;
            if (!frames_disjoint(frag, other))
                continue;
            for (int kf_frame : {start_kf, end_kf}) {
                auto it = other.boxes.find(kf_frame);
                if (it == other.boxes.end())
                    continue;
                if (classify_region(it->second.box, spec, g) != fring)
                    continue;
                const double score = path_iou(it->second.box, fbox, {});
                const BBox midbox = interpolate_box(it->second.box, fbox, 0.5);
                if (score >= cfg.consistency_gate(classify_region(midbox, spec, g), spec))
                    cands.push_back({score, fid, cid, kf_frame});
            }
        }
    }
    std::sort(cands.begin(), cands.end(), [](const KfCandidate& a, const KfCandidate& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.frag_id != b.frag_id) return a.frag_id < b.frag_id;
        if (a.cand_id != b.cand_id) return a.cand_id < b.cand_id;
        return a.kf_frame < b.kf_frame;
    });
    std::set<int> used;
    for (const KfCandidate& c : cands) {
        if (used.count(c.frag_id) || used.count(c.cand_id))
            continue;
        if (!store.tracks.count(c.frag_id) || !store.tracks.count(c.cand_id))
            continue;
        const Track& frag = store.tracks.at(c.frag_id);
        const Track& cand = store.tracks.at(c.cand_id);
        const int opposite = (c.kf_frame == start_kf) ? end_kf : start_kf;
        const BBox& kf_box = cand.boxes.at(c.kf_frame).box;
        const BBox& if_box = frag.boxes.at(mid).box;
        const BBox ebox = extrapolate_box_at(kf_box, c.kf_frame, if_box, mid, opposite);
        const KfLanding landing =
            land_on_keyframe(store, frag, ebox, opposite, start_kf, end_kf, spec, validator, g);
        if (!landing.absorb_id && !landing.add_box)
            continue;
        if (landing.absorb_id == c.cand_id)
            continue; // degenerate; the candidate already sits there

        used.insert(c.frag_id);
        used.insert(c.cand_id);
        const double conf = kPropagatedConfidenceScale * frag.boxes.at(mid).confidence;
        const int new_id = store.next_id++;
        Track promoted;
        promoted.id = new_id;
        promoted.boxes = std::move(store.tracks.at(c.frag_id).boxes);
        store.tracks.erase(c.frag_id);
        store.tracks.emplace(new_id, std::move(promoted));
        store.merge_into(new_id, c.cand_id);
        if (landing.absorb_id)
            store.merge_into(new_id, landing.absorb_id);
        else
            store.add_box(new_id, opposite, TrackBox{ebox, BoxSource::extrapolated, conf});
    }
}

void propagate_hcc(TrackStore& store, const SegmentPlan& plan, const RegionSpec& spec,
                   const PropagationConfig& cfg, BoxValidator& validator, const ImageGeometry& g,
                   std::vector<HccTraceEntry>* trace) {
    std::vector<int> ids;
    ids.reserve(store.tracks.size());
    for (const auto& [id, track] : store.tracks)
        ids.push_back(id);

    for (int id : ids) {
        const Track& track = store.tracks.at(id);
        bool eligible = false;
        for (const auto& [ks, ke] : plan.segments) {
            auto a = track.boxes.find(ks);
            auto b = track.boxes.find(ke);
            if (a != track.boxes.end() && b != track.boxes.end() &&
                a->second.source == BoxSource::detected && b->second.source == BoxSource::detected &&
                a->second.confidence >= cfg.hcc_threshold &&
                b->second.confidence >= cfg.hcc_threshold) {
                eligible = true;
                break;
            }
        }
        if (!eligible)
            continue;

        for (const bool backward : {true, false}) {
            int existing = 0;
            int failures = 0;
            while (existing < cfg.attempt_limit_existing && failures < cfg.attempt_limit_failure) {
                Track& t = store.tracks.at(id);
                const int target = backward ? t.first_frame() - 1 : t.last_frame() + 1;
                if (target < 1 || target > plan.n_frames)
                    break;

                const BBox ebox = edge_extrapolate(t, backward, target);
                const double conf = kPropagatedConfidenceScale *
                                    (backward ? t.boxes.begin()->second.confidence
                                              : t.boxes.rbegin()->second.confidence);

                const double gate = spec.iou_thresholds[classify_region(ebox, spec, g)];
                double best = -1.0;
                for (const auto& [oid, other] : store.tracks) {
                    if (oid == id)
                        continue;
                    auto it = other.boxes.find(target);
                    if (it != other.boxes.end())
                        best = std::max(best, iou(ebox, it->second.box));
                }

                HccTraceEntry entry;
                entry.track_id = id;
                entry.backward = backward;
                entry.frame = target;
                if (best >= gate) {
                    ++existing;
                    entry.outcome = HccTraceEntry::Outcome::existing;
                } else if (validator.contains_car(target, ebox)) {
                    store.add_box(id, target, TrackBox{ebox, BoxSource::hcc, conf});
                    entry.outcome = HccTraceEntry::Outcome::accepted;
                } else {
                    ++failures;
                    entry.outcome = HccTraceEntry::Outcome::rejected;
                }
                if (trace)
                    trace->push_back(entry);
            }
        }
    }
}

double default_stationary_eps(const RegionSpec& spec, SceneClass scene, std::size_t ring) {
    const std::vector<AreaLimits>& limits = spec.limits_for(scene);
    const AreaLimits& lim = limits[std::min(ring, limits.size() - 1)];
    return 0.1 * std::sqrt((lim.min_area + lim.max_area) / 2.0);
}

StationarySplit stationary_filter(const std::vector<Track>& tracks, const SegmentPlan& plan,
                                  const PropagationConfig& cfg, const RegionSpec& spec,
                                  SceneClass scene, const ImageGeometry& g) {
    const double nominal_gap = static_cast<double>(plan.segment_size - 1);

    StationarySplit out;
    for (Track track : tracks) {
        int pairs = 0;
        bool all_still = true;
        for (std::size_t m = 0; m + 1 < plan.keyframes.size(); ++m) {
            auto a = track.boxes.find(plan.keyframes[m]);
            auto b = track.boxes.find(plan.keyframes[m + 1]);
            if (a == track.boxes.end() || b == track.boxes.end())
                continue;
            ++pairs;
            // The eps is size-relative (box scale shrinks toward the rim)
            // unless the config pins one value.
            const double eps =
                cfg.stationary_center_eps
                    ? *cfg.stationary_center_eps
                    : default_stationary_eps(spec, scene,
                                             classify_region(a->second.box, spec, g));
            const double gap = static_cast<double>(plan.keyframes[m + 1] - plan.keyframes[m]);
            const double threshold = eps * gap / nominal_gap;
            const double disp = std::hypot(a->second.box.cx - b->second.box.cx,
                                           a->second.box.cy - b->second.box.cy);
            if (disp >= threshold)
                all_still = false;
        }
        if (pairs > 0 && all_still) {
            track.status = TrackStatus::stationary;
            out.stationary.push_back(std::move(track));
        } else {
            track.status = TrackStatus::moving;
            out.moving.push_back(std::move(track));
        }
    }
    return out;
}

} // namespace fishtrack
