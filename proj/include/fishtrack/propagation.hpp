#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "fishtrack/detection.hpp"
#include "fishtrack/regions.hpp"
#include "fishtrack/tracker.hpp"

namespace fishtrack {

// Decides whether a hypothesized box contains a car. Stand-in for the
// binary image classifier; implementations must be deterministic given
// their construction parameters.
class BoxValidator {
public:
    virtual ~BoxValidator() = default;
    virtual bool contains_car(int frame, const BBox& box) = 0;
};

// Accepts a box iff some ground-truth car overlaps it with IoU >= iou_floor,
// then flips the verdict with probability flip_probability (classifier
// error model). Draws come from a private seeded generator, so runs are
// reproducible given identical call order.
class OracleValidator : public BoxValidator {
public:
    OracleValidator(const std::vector<GroundTruthBox>& gt, double iou_floor,
                    double flip_probability, std::uint64_t seed);
    bool contains_car(int frame, const BBox& box) override;

private:
    struct Impl;
    std::shared_ptr<Impl> impl_;
};

class ConstantValidator : public BoxValidator {
public:
    explicit ConstantValidator(bool verdict) : verdict_(verdict) {}
    bool contains_car(int, const BBox&) override { return verdict_; }

private:
    bool verdict_;
};

struct PropagationConfig {
    double hcc_threshold = 0.8;
    int attempt_limit_existing = 3;
    int attempt_limit_failure = 3;
    // Consistency-check gates per ring; empty means "reuse the region IoU
    // thresholds".
    std::vector<double> consistency_thresholds;
    // Max center displacement (px per keyframe gap) below which a KF pair
    // counts as stationary. Unset -> derived from the region area bands.
    std::optional<double> stationary_center_eps;
    bool kf_to_if = true;
    bool if_to_kf = true;
    bool hcc = true;

    double consistency_gate(std::size_t ring, const RegionSpec& spec) const;
};

// Aggregate overlap between the straight box path start->end and the
// detections observed in the frames strictly between the two endpoint
// frames. Every intermediate frame contributes the IoU of its interpolated
// box against its best detection (or against the nearer endpoint box when
// the frame has none); the score is the mean contribution. Endpoints in
// adjacent frames degenerate to plain IoU.
double path_iou(const BBox& start, const BBox& end,
                const std::vector<std::vector<Detection>>& if_detections);

// First propagation pass of a segment: pair start-KF boxes with end-KF
// boxes by best path IoU, validate pairs against the consistency gate of
// the path midpoint ring, merge validated pairs into one identity and fill
// intermediate frames (matched detections are absorbed, gaps take the
// interpolated box). Invalid candidates are left untouched.
void propagate_kf_to_if(TrackStore& store, const std::vector<std::vector<Detection>>& dets_by_frame,
                        int start_kf, int end_kf, const RegionSpec& spec,
                        const PropagationConfig& cfg, const ImageGeometry& g);

// Second pass: track fragments living strictly between the two KFs are
// extended outward. Fragments are chained across adjacent intermediate
// frames by path IoU, extrapolated into both KFs, and each extrapolated box
// faces a validation check; a fragment that lands at least one accepted KF
// box becomes a new track covering everything. One-IF segments pair the
// lone detection with a same-ring KF candidate instead.
void propagate_if_to_kf(TrackStore& store, const std::vector<std::vector<Detection>>& dets_by_frame,
                        int start_kf, int end_kf, const RegionSpec& spec,
                        const PropagationConfig& cfg, BoxValidator& validator,
                        const ImageGeometry& g);

struct HccTraceEntry {
    int track_id = 0;
    bool backward = false;
    int frame = 0;
    enum class Outcome { existing, accepted, rejected } outcome;
};

// High-confidence-car propagation: tracks detected with confidence >=
// hcc_threshold at both KFs of some segment are extended one frame at a
// time beyond each end. An extrapolated box co-located with any existing
// box counts toward the existing-car limit; otherwise it faces a validation
// check, where success extends the track and failure counts toward the
// failure limit. Counters are cumulative per pass. Optional trace records
// one entry per attempt.
void propagate_hcc(TrackStore& store, const SegmentPlan& plan, const RegionSpec& spec,
                   const PropagationConfig& cfg, BoxValidator& validator, const ImageGeometry& g,
                   std::vector<HccTraceEntry>* trace = nullptr);

struct StationarySplit {
    std::vector<Track> moving;
    std::vector<Track> stationary;
};

// Classify each finalized track: a track whose center displacement stays
// under the eps threshold for every adjacent-keyframe pair it covers is
// stationary; one moving pair makes the whole track moving. Tracks covering
// fewer than two keyframes stay moving (no pair to judge). Statuses are set
// on the returned copies.
StationarySplit stationary_filter(const std::vector<Track>& tracks, const SegmentPlan& plan,
                                  const PropagationConfig& cfg, const RegionSpec& spec,
                                  SceneClass scene, const ImageGeometry& g);

// Default eps for one ring: 0.1 * sqrt(mean ring area) of the scene's area
// band, so the displacement test tracks the local box scale.
double default_stationary_eps(const RegionSpec& spec, SceneClass scene, std::size_t ring);

} // namespace fishtrack
