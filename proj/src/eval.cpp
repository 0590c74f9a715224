#include "fishtrack/eval.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "fishtrack/errors.hpp"

namespace fishtrack {

namespace {

double ap50_single(const std::vector<ScoredBox>& predictions,
                   const std::vector<GroundTruthBox>& gt) {
    struct GtSlot {
        const GroundTruthBox* box;
        bool used = false;
    };
    std::map<int, std::vector<GtSlot>> gt_by_frame;
    for (const GroundTruthBox& g : gt)
        gt_by_frame[g.frame].push_back(GtSlot{&g});

    std::vector<std::size_t> order(predictions.size());
    for (std::size_t i = 0; i < order.size(); ++i)
        order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (predictions[a].confidence != predictions[b].confidence)
            return predictions[a].confidence > predictions[b].confidence;
        if (predictions[a].frame != predictions[b].frame)
            return predictions[a].frame < predictions[b].frame;
        return a < b;
    });

    std::vector<bool> is_tp(order.size(), false);
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        const ScoredBox& pred = predictions[order[rank]];
        auto frame_it = gt_by_frame.find(pred.frame);
        if (frame_it == gt_by_frame.end())
            continue;
        double best = -1.0;
        GtSlot* best_slot = nullptr;
        for (GtSlot& slot : frame_it->second) {
            if (slot.used)
                continue;
            const double overlap = iou(pred.box, slot.box->box);
            if (overlap < 0.5)
                continue;
            if (overlap > best ||
                (overlap == best && best_slot && slot.box->car_id < best_slot->box->car_id)) {
                best = overlap;
                best_slot = &slot;
            }
        }
        if (best_slot) {
            best_slot->used = true;
            is_tp[rank] = true;
        }
    }

    // All-point interpolated area under the precision-recall curve. Recall
    // steps by exactly 1/n_gt at every true positive, so the area is the
    // sum of the interpolated precisions at those ranks.
    std::vector<double> precision(order.size());
    long tp = 0, fp = 0;
    for (std::size_t i = 0; i < order.size(); ++i) {
        is_tp[i] ? ++tp : ++fp;
        precision[i] = static_cast<double>(tp) / static_cast<double>(tp + fp);
    }
    double sum = 0.0;
    double max_prec = 0.0;
    for (std::size_t i = order.size(); i-- > 0;) {
        max_prec = std::max(max_prec, precision[i]);
        if (is_tp[i])
            sum += max_prec;
    }
    return sum / static_cast<double>(gt.size());
}

} // namespace

ApResult ap50(const std::vector<ScoredBox>& predictions, const std::vector<GroundTruthBox>& gt,
              const RegionSpec* ring_spec, const ImageGeometry& g) {
    if (gt.empty())
        throw DataError("ap50: empty ground truth; AP is undefined");

    ApResult result;
    result.overall = ap50_single(predictions, gt);
    if (!ring_spec)
        return result;

    const std::size_t rings = ring_spec->ring_count();
    std::vector<std::vector<ScoredBox>> preds_by_ring(rings);
    std::vector<std::vector<GroundTruthBox>> gt_by_ring(rings);
    for (const ScoredBox& p : predictions)
        preds_by_ring[classify_region(p.box, *ring_spec, g)].push_back(p);
    for (const GroundTruthBox& box : gt)
        gt_by_ring[classify_region(box.box, *ring_spec, g)].push_back(box);

    result.per_ring.resize(rings);
    for (std::size_t r = 0; r < rings; ++r) {
        if (!gt_by_ring[r].empty())
            result.per_ring[r] = ap50_single(preds_by_ring[r], gt_by_ring[r]);
    }
    return result;
}

MotResult clear_mot(const std::vector<Track>& tracks, const std::vector<GroundTruthBox>& gt) {
    if (gt.empty())
        throw DataError("clear_mot: empty ground truth");

    struct Hyp {
        int track_id;
        BBox box;
    };
    std::map<int, std::vector<const GroundTruthBox*>> gt_by_frame;
    std::map<int, std::vector<Hyp>> hyp_by_frame;
    std::set<int> frames;
    for (const GroundTruthBox& box : gt) {
        gt_by_frame[box.frame].push_back(&box);
        frames.insert(box.frame);
    }
    for (const Track& track : tracks) {
        for (const auto& [frame, tb] : track.boxes) {
            hyp_by_frame[frame].push_back(Hyp{track.id, tb.box});
            frames.insert(frame);
        }
    }

    MotCounts counts;
    counts.gt_total = static_cast<long>(gt.size());
    double iou_sum = 0.0;
    std::map<int, int> prev_corr;  // car_id -> track_id active in the previous frame
    std::map<int, int> last_known; // car_id -> last matched track_id ever

    for (int frame : frames) {
        const auto& gts = gt_by_frame.count(frame) ? gt_by_frame.at(frame)
                                                   : std::vector<const GroundTruthBox*>{};
        const auto& hyps =
            hyp_by_frame.count(frame) ? hyp_by_frame.at(frame) : std::vector<Hyp>{};
        std::vector<bool> gt_used(gts.size(), false), hyp_used(hyps.size(), false);
        std::map<int, int> corr;

        auto commit = [&](std::size_t gi, std::size_t hi) {
            gt_used[gi] = true;
            hyp_used[hi] = true;
            ++counts.tp;
            iou_sum += iou(gts[gi]->box, hyps[hi].box);
            const int car = gts[gi]->car_id;
            const int tid = hyps[hi].track_id;
            auto known = last_known.find(car);
            if (known != last_known.end() && known->second != tid)
                ++counts.id_switches;
            last_known[car] = tid;
            corr[car] = tid;
        };

        // Keep still-valid correspondences from the previous frame.
        for (std::size_t gi = 0; gi < gts.size(); ++gi) {
            auto it = prev_corr.find(gts[gi]->car_id);
            if (it == prev_corr.end())
                continue;
            for (std::size_t hi = 0; hi < hyps.size(); ++hi) {
                if (!hyp_used[hi] && hyps[hi].track_id == it->second &&
                    iou(gts[gi]->box, hyps[hi].box) >= 0.5) {
                    commit(gi, hi);
                    break;
                }
            }
        }

        // Greedy IoU for the rest.
        struct Pair {
            double score;
            std::size_t gi, hi;
            int car_id, track_id;
        };
        std::vector<Pair> pairs;
        for (std::size_t gi = 0; gi < gts.size(); ++gi) {
            if (gt_used[gi])
                continue;
            for (std::size_t hi = 0; hi < hyps.size(); ++hi) {
                if (hyp_used[hi])
                    continue;
                const double overlap = iou(gts[gi]->box, hyps[hi].box);
                if (overlap >= 0.5)
                    pairs.push_back({overlap, gi, hi, gts[gi]->car_id, hyps[hi].track_id});
            }
        }
        std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
            if (a.score != b.score) return a.score > b.score;
            if (a.car_id != b.car_id) return a.car_id < b.car_id;
            return a.track_id < b.track_id;
        });
        for (const Pair& p : pairs) {
            if (!gt_used[p.gi] && !hyp_used[p.hi])
                commit(p.gi, p.hi);
        }

        for (std::size_t gi = 0; gi < gts.size(); ++gi)
            if (!gt_used[gi])
                ++counts.fn;
        for (std::size_t hi = 0; hi < hyps.size(); ++hi)
            if (!hyp_used[hi])
                ++counts.fp;
        prev_corr = std::move(corr);
    }

    MotResult result;
    result.counts = counts;
    result.mota = 1.0 - static_cast<double>(counts.fn + counts.fp + counts.id_switches) /
                            static_cast<double>(counts.gt_total);
    if (counts.tp > 0)
        result.motp = iou_sum / static_cast<double>(counts.tp);
    return result;
}

} // namespace fishtrack
