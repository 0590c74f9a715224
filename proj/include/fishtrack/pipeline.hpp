#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fishtrack/eval.hpp"
#include "fishtrack/ingest.hpp"
#include "fishtrack/propagation.hpp"
#include "fishtrack/sim.hpp"

namespace fishtrack {

struct ValidatorConfig {
    std::string kind = "oracle"; // oracle | always-accept | always-reject
    double iou_floor = 0.5;
    double flip_probability = 0.0;
};

// Fully resolved run configuration: config file first, CLI flags override.
struct RunConfig {
    std::filesystem::path detections;
    std::filesystem::path ground_truth;
    std::filesystem::path tracks; // eval input
    std::filesystem::path output_dir = "out";
    DetectionFormat format = DetectionFormat::mot_csv;

    // Region spec source; exactly one wins: fitted > file > preset.
    std::string region_preset = "icip2020";
    std::filesystem::path region_file;
    bool fit_regions = false;
    int fit_k = 3;
    double fit_margin = 0.3;

    SceneClass scene_class = SceneClass::both;
    int segment_size = 3;
    int n_frames = 0; // 0 -> derived from the data
    PropagationConfig prop;
    ValidatorConfig validator;
    std::uint64_t seed = 1;

    // simulate
    std::string sim_preset = "night";
    int sim_cars = 24;
    int sim_frames = 600;
    std::filesystem::path scene_file;
    std::filesystem::path noise_file;
};

RunConfig load_run_config(const std::filesystem::path& path);

std::unique_ptr<BoxValidator> make_validator(const ValidatorConfig& cfg,
                                             const std::vector<GroundTruthBox>& gt,
                                             std::uint64_t seed);

struct PipelineOutput {
    std::vector<Track> tracks; // statuses resolved, sorted by id
    std::map<std::string, long> source_histogram;
    double stationary_eps = 0.0;
    double wall_ms = 0.0;
};

// The full post-detection pipeline: size filter, per-segment IoU tracking
// interleaved with the enabled propagation passes, the cross-segment
// high-confidence pass, then stationary classification. A validator is
// required up front whenever a pass that performs validation checks is
// enabled.
PipelineOutput run_pipeline(const std::vector<Detection>& dets, int n_frames,
                            const RegionSpec& spec, SceneClass scene, int segment_size,
                            const PropagationConfig& cfg, BoxValidator* validator,
                            const ImageGeometry& g, std::vector<HccTraceEntry>* hcc_trace = nullptr);

// Boxes of moving tracks as scored predictions (stationary tracks are
// excluded from the output list).
std::vector<ScoredBox> predictions_from_tracks(const std::vector<Track>& tracks);

// Ground truth restricted to moving cars.
std::vector<GroundTruthBox> moving_ground_truth(const std::vector<GroundTruthBox>& gt);

struct AblationRow {
    bool kf_to_if = false;
    bool if_to_kf = false;
    bool hcc = false;
    double ap50_overall = 0.0;
    std::vector<std::optional<double>> ap50_per_ring;
    double wall_ms = 0.0;
    double fps = 0.0;
};

// Run the pipeline under all 8 propagation toggle combinations on one
// dataset and score each against the ground truth.
std::vector<AblationRow> ablation_grid(const std::vector<Detection>& dets, int n_frames,
                                       const std::vector<GroundTruthBox>& gt,
                                       const RegionSpec& spec, SceneClass scene, int segment_size,
                                       const PropagationConfig& base, const ValidatorConfig& vcfg,
                                       const ImageGeometry& g, std::uint64_t seed);

// CLI entry points; they throw ConfigError / DataError on bad input.
void cmd_track(const RunConfig& cfg);
void cmd_eval(const RunConfig& cfg);
void cmd_simulate(const RunConfig& cfg);
void cmd_ablate(const RunConfig& cfg);
void cmd_regions(const RunConfig& cfg);

} // namespace fishtrack
