// Command-line front end: track | eval | simulate | ablate | regions.
// Options from --config (JSON) first, explicit flags win.

#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "fishtrack/errors.hpp"
#include "fishtrack/pipeline.hpp"

namespace {

using fishtrack::RunConfig;

struct FlagState {
    std::string config_path;
    std::string detections, ground_truth, tracks, out_dir, format;
    std::string preset, regions_file, scene_class, validator;
    std::string scene_file, noise_file;
    int segment_size = 0, n_frames = 0, fit_k = 0, cars = 0, frames = 0;
    int limit_existing = 0, limit_failure = 0;
    double fit_margin = -1.0, flip_prob = -1.0, hcc_threshold = -1.0, stationary_eps = -1.0;
    std::uint64_t seed = 0;
    bool fit_regions = false;
    bool no_kf_if = false, no_if_kf = false, no_hcc = false;
};

void add_common(CLI::App* cmd, FlagState& f) {
    cmd->add_option("--config", f.config_path, "JSON run configuration");
    cmd->add_option("--out", f.out_dir, "output directory");
    cmd->add_option("--seed", f.seed, "RNG seed");
}

void add_region_options(CLI::App* cmd, FlagState& f) {
    cmd->add_option("--regions-file", f.regions_file, "region spec JSON");
    cmd->add_flag("--fit-regions", f.fit_regions, "fit the region spec from ground truth");
    cmd->add_option("--fit-k", f.fit_k, "ring count for fitting");
    cmd->add_option("--fit-margin", f.fit_margin, "area margin for fitting");
    cmd->add_option("--scene-class", f.scene_class, "night|day|both");
}

void add_pipeline_options(CLI::App* cmd, FlagState& f) {
    cmd->add_option("--detections", f.detections, "detections file");
    cmd->add_option("--ground-truth", f.ground_truth, "ground-truth file");
    cmd->add_option("--format", f.format, "mot-csv|jsonl");
    cmd->add_option("--preset", f.preset, "region spec preset (icip2020)");
    cmd->add_option("--segment-size", f.segment_size, "frames per segment");
    cmd->add_option("--n-frames", f.n_frames, "sequence length override");
    cmd->add_option("--validator", f.validator, "oracle|always-accept|always-reject");
    cmd->add_option("--flip-prob", f.flip_prob, "oracle validator error rate");
    cmd->add_option("--hcc-threshold", f.hcc_threshold, "high-confidence-car threshold");
    cmd->add_option("--limit-existing", f.limit_existing, "HCC existing-car attempt limit");
    cmd->add_option("--limit-failure", f.limit_failure, "HCC failure attempt limit");
    cmd->add_option("--stationary-eps", f.stationary_eps, "stationary center displacement, px per KF gap");
    cmd->add_flag("--no-kf-if", f.no_kf_if, "disable KF->IF propagation");
    cmd->add_flag("--no-if-kf", f.no_if_kf, "disable IF->KF propagation");
    cmd->add_flag("--no-hcc", f.no_hcc, "disable high-confidence-car propagation");
    add_region_options(cmd, f);
}

bool given(const CLI::App* cmd, const std::string& name) {
    const CLI::Option* opt = cmd->get_option_no_throw(name);
    return opt && opt->count() > 0;
}

RunConfig build_config(const CLI::App* cmd, const FlagState& f) {
    RunConfig cfg;
    if (given(cmd, "--config"))
        cfg = fishtrack::load_run_config(f.config_path);
    if (given(cmd, "--detections")) cfg.detections = f.detections;
    if (given(cmd, "--ground-truth")) cfg.ground_truth = f.ground_truth;
    if (given(cmd, "--tracks")) cfg.tracks = f.tracks;
    if (given(cmd, "--out")) cfg.output_dir = f.out_dir;
    if (given(cmd, "--format")) cfg.format = fishtrack::detection_format_from_string(f.format);
    if (given(cmd, "--seed")) cfg.seed = f.seed;
    if (given(cmd, "--segment-size")) cfg.segment_size = f.segment_size;
    if (given(cmd, "--n-frames")) cfg.n_frames = f.n_frames;
    if (given(cmd, "--scene-class")) cfg.scene_class = fishtrack::scene_class_from_string(f.scene_class);
    if (given(cmd, "--preset")) cfg.region_preset = f.preset;
    if (given(cmd, "--regions-file")) cfg.region_file = f.regions_file;
    if (given(cmd, "--fit-regions")) cfg.fit_regions = true;
    if (given(cmd, "--fit-k")) cfg.fit_k = f.fit_k;
    if (given(cmd, "--fit-margin")) cfg.fit_margin = f.fit_margin;
    if (given(cmd, "--validator")) cfg.validator.kind = f.validator;
    if (given(cmd, "--flip-prob")) cfg.validator.flip_probability = f.flip_prob;
    if (given(cmd, "--hcc-threshold")) cfg.prop.hcc_threshold = f.hcc_threshold;
    if (given(cmd, "--limit-existing")) cfg.prop.attempt_limit_existing = f.limit_existing;
    if (given(cmd, "--limit-failure")) cfg.prop.attempt_limit_failure = f.limit_failure;
    if (given(cmd, "--stationary-eps")) cfg.prop.stationary_center_eps = f.stationary_eps;
    if (f.no_kf_if) cfg.prop.kf_to_if = false;
    if (f.no_if_kf) cfg.prop.if_to_kf = false;
    if (f.no_hcc) cfg.prop.hcc = false;
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fisheye vehicle track post-processing"};
    app.require_subcommand(1);

    FlagState f;

    CLI::App* track = app.add_subcommand("track", "run the tracking pipeline");
    add_common(track, f);
    add_pipeline_options(track, f);

    CLI::App* eval = app.add_subcommand("eval", "score tracks or detections against ground truth");
    add_common(eval, f);
    eval->add_option("--tracks", f.tracks, "track file to score");
    eval->add_option("--detections", f.detections, "detections file to score");
    eval->add_option("--ground-truth", f.ground_truth, "ground-truth file");
    eval->add_option("--format", f.format, "mot-csv|jsonl");
    eval->add_option("--preset", f.preset, "region spec preset");
    add_region_options(eval, f);

    CLI::App* simulate = app.add_subcommand("simulate", "generate a synthetic scene");
    add_common(simulate, f);
    simulate->add_option("--preset", f.preset, "noise preset: night|day|clean");
    simulate->add_option("--cars", f.cars, "car count");
    simulate->add_option("--frames", f.frames, "frame count");
    simulate->add_option("--segment-size", f.segment_size, "frames per segment (modality schedule)");
    simulate->add_option("--format", f.format, "detection output format");
    simulate->add_option("--scene-file", f.scene_file, "scene spec JSON");
    simulate->add_option("--noise-file", f.noise_file, "noise spec JSON");

    CLI::App* ablate = app.add_subcommand("ablate", "run all propagation toggle combinations");
    add_common(ablate, f);
    add_pipeline_options(ablate, f);

    CLI::App* regions = app.add_subcommand("regions", "fit a region spec from ground truth");
    add_common(regions, f);
    regions->add_option("--ground-truth", f.ground_truth, "ground-truth file");
    regions->add_option("--k", f.fit_k, "ring count");
    regions->add_option("--margin", f.fit_margin, "area margin");
    regions->add_option("--scene-class", f.scene_class, "night|day|both");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (track->parsed()) {
            fishtrack::cmd_track(build_config(track, f));
        } else if (eval->parsed()) {
            fishtrack::cmd_eval(build_config(eval, f));
        } else if (simulate->parsed()) {
            RunConfig cfg = build_config(simulate, f);
            if (given(simulate, "--preset")) cfg.sim_preset = f.preset;
            if (given(simulate, "--cars")) cfg.sim_cars = f.cars;
            if (given(simulate, "--frames")) cfg.sim_frames = f.frames;
            if (given(simulate, "--scene-file")) cfg.scene_file = f.scene_file;
            if (given(simulate, "--noise-file")) cfg.noise_file = f.noise_file;
            fishtrack::cmd_simulate(cfg);
        } else if (ablate->parsed()) {
            fishtrack::cmd_ablate(build_config(ablate, f));
        } else if (regions->parsed()) {
            RunConfig cfg = build_config(regions, f);
            if (given(regions, "--k")) cfg.fit_k = f.fit_k;
            if (given(regions, "--margin")) cfg.fit_margin = f.fit_margin;
            fishtrack::cmd_regions(cfg);
        }
    } catch (const fishtrack::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const fishtrack::DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
