#include "fishtrack/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>

#include <json.hpp>

#include "fishtrack/errors.hpp"

namespace fishtrack {

namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

int max_frame(const std::vector<Detection>& dets) {
    int n = 0;
    for (const Detection& d : dets)
        n = std::max(n, d.frame);
    return n;
}

int max_frame(const std::vector<GroundTruthBox>& gt) {
    int n = 0;
    for (const GroundTruthBox& b : gt)
        n = std::max(n, b.frame);
    return n;
}

json validator_to_json(const ValidatorConfig& v) {
    return json{{"kind", v.kind},
                {"iou_floor", v.iou_floor},
                {"flip_probability", v.flip_probability}};
}

json propagation_to_json(const PropagationConfig& p, const RegionSpec& spec, SceneClass scene) {
    std::vector<double> gates;
    for (std::size_t r = 0; r < spec.ring_count(); ++r)
        gates.push_back(p.consistency_gate(r, spec));
    std::vector<double> eps;
    for (std::size_t r = 0; r < spec.ring_count(); ++r)
        eps.push_back(p.stationary_center_eps ? *p.stationary_center_eps
                                              : default_stationary_eps(spec, scene, r));
    return json{{"hcc_threshold", p.hcc_threshold},
                {"attempt_limit_existing", p.attempt_limit_existing},
                {"attempt_limit_failure", p.attempt_limit_failure},
                {"consistency_thresholds", gates},
                {"stationary_center_eps_per_ring", eps},
                {"kf_to_if", p.kf_to_if},
                {"if_to_kf", p.if_to_kf},
                {"hcc", p.hcc}};
}

json region_spec_to_json(const RegionSpec& spec) {
    json limits = json::object();
    for (const auto& [scene, rings] : spec.area_limits) {
        json arr = json::array();
        for (const AreaLimits& lim : rings)
            arr.push_back(json::array({lim.min_area, lim.max_area}));
        limits[to_string(scene)] = arr;
    }
    return json{{"boundaries", spec.boundaries},
                {"iou_thresholds", spec.iou_thresholds},
                {"area_limits", limits}};
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out)
        throw ConfigError("cannot write file: " + path.string());
    out << text;
}

void write_json_file(const std::filesystem::path& path, const json& doc) {
    write_text_file(path, doc.dump(2) + "\n");
}

void require_file(const std::filesystem::path& path, const char* what) {
    if (path.empty())
        throw ConfigError(std::string(what) + " path not set");
    if (!std::filesystem::exists(path))
        throw ConfigError(std::string(what) + " file does not exist: " + path.string());
}

// Region spec per the configured source. Fitting consumes the ground truth,
// tagging every box with the run's scene class.
RegionSpec resolve_region_spec(const RunConfig& cfg, const std::vector<GroundTruthBox>* gt,
                               const ImageGeometry& g) {
    if (cfg.fit_regions) {
        if (!gt || gt->empty())
            throw ConfigError("region fitting requested but no ground truth available");
        std::vector<std::pair<BBox, SceneClass>> tagged;
        tagged.reserve(gt->size());
        for (const GroundTruthBox& box : *gt)
            tagged.emplace_back(box.box, cfg.scene_class);
        return fit_region_spec(tagged, g, static_cast<std::size_t>(cfg.fit_k), cfg.fit_margin);
    }
    if (!cfg.region_file.empty()) {
        require_file(cfg.region_file, "region spec");
        return read_region_spec(cfg.region_file);
    }
    if (cfg.region_preset == "icip2020")
        return icip2020_preset();
    throw ConfigError("unknown region preset: " + cfg.region_preset);
}

} // namespace

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file: " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }

    RunConfig cfg;
    try {
        cfg.detections = doc.value("detections", std::string());
        cfg.ground_truth = doc.value("ground_truth", std::string());
        cfg.tracks = doc.value("tracks", std::string());
        cfg.output_dir = doc.value("output_dir", std::string("out"));
        cfg.format = detection_format_from_string(doc.value("format", std::string("mot-csv")));
        if (doc.contains("regions")) {
            const json& r = doc["regions"];
            if (r.contains("preset"))
                cfg.region_preset = r["preset"].get<std::string>();
            if (r.contains("file"))
                cfg.region_file = r["file"].get<std::string>();
            if (r.contains("fit")) {
                cfg.fit_regions = true;
                cfg.fit_k = r["fit"].value("k", 3);
                cfg.fit_margin = r["fit"].value("margin", 0.3);
            }
        }
        cfg.scene_class = scene_class_from_string(doc.value("scene_class", std::string("both")));
        cfg.segment_size = doc.value("segment_size", 3);
        cfg.n_frames = doc.value("n_frames", 0);
        if (doc.contains("propagation")) {
            const json& p = doc["propagation"];
            cfg.prop.hcc_threshold = p.value("hcc_threshold", cfg.prop.hcc_threshold);
            cfg.prop.attempt_limit_existing =
                p.value("attempt_limit_existing", cfg.prop.attempt_limit_existing);
            cfg.prop.attempt_limit_failure =
                p.value("attempt_limit_failure", cfg.prop.attempt_limit_failure);
            if (p.contains("consistency_thresholds"))
                cfg.prop.consistency_thresholds =
                    p["consistency_thresholds"].get<std::vector<double>>();
            if (p.contains("stationary_center_eps"))
                cfg.prop.stationary_center_eps = p["stationary_center_eps"].get<double>();
            cfg.prop.kf_to_if = p.value("kf_to_if", cfg.prop.kf_to_if);
            cfg.prop.if_to_kf = p.value("if_to_kf", cfg.prop.if_to_kf);
            cfg.prop.hcc = p.value("hcc", cfg.prop.hcc);
        }
        if (doc.contains("validator")) {
            const json& v = doc["validator"];
            cfg.validator.kind = v.value("kind", cfg.validator.kind);
            cfg.validator.iou_floor = v.value("iou_floor", cfg.validator.iou_floor);
            cfg.validator.flip_probability =
                v.value("flip_probability", cfg.validator.flip_probability);
        }
        cfg.seed = doc.value("seed", std::uint64_t{1});
        if (doc.contains("simulate")) {
            const json& s = doc["simulate"];
            cfg.sim_preset = s.value("preset", cfg.sim_preset);
            cfg.sim_cars = s.value("cars", cfg.sim_cars);
            cfg.sim_frames = s.value("frames", cfg.sim_frames);
            cfg.scene_file = s.value("scene_file", std::string());
            cfg.noise_file = s.value("noise_file", std::string());
        }
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return cfg;
}

std::unique_ptr<BoxValidator> make_validator(const ValidatorConfig& cfg,
                                             const std::vector<GroundTruthBox>& gt,
                                             std::uint64_t seed) {
    if (cfg.kind == "oracle") {
        if (gt.empty())
            throw ConfigError("oracle validator requires ground truth");
        // Decorrelate the validator stream from the detection noise stream.
        return std::make_unique<OracleValidator>(gt, cfg.iou_floor, cfg.flip_probability,
                                                 seed ^ 0x9e3779b97f4a7c15ULL);
    }
    if (cfg.kind == "always-accept")
        return std::make_unique<ConstantValidator>(true);
    if (cfg.kind == "always-reject")
        return std::make_unique<ConstantValidator>(false);
    throw ConfigError("unknown validator kind: " + cfg.kind);
}

PipelineOutput run_pipeline(const std::vector<Detection>& dets, int n_frames,
                            const RegionSpec& spec, SceneClass scene, int segment_size,
                            const PropagationConfig& cfg, BoxValidator* validator,
                            const ImageGeometry& g, std::vector<HccTraceEntry>* hcc_trace) {
    if ((cfg.if_to_kf || cfg.hcc) && !validator)
        throw ConfigError("the enabled propagation passes require a validator");
    if (n_frames < 2)
        throw DataError("pipeline needs at least 2 frames");

    const auto t0 = Clock::now();
    const SizeFilterResult filtered = size_filter(dets, spec, scene, g);
    const auto by_frame = group_by_frame(filtered.kept, n_frames);
    const SegmentPlan plan = plan_segments(n_frames, segment_size);

    TrackStore store;
    for (const auto& [ks, ke] : plan.segments) {
        track_frames(store, by_frame, ks == 1 ? 1 : ks + 1, ke, spec, g);
        if (cfg.kf_to_if)
            propagate_kf_to_if(store, by_frame, ks, ke, spec, cfg, g);
        if (cfg.if_to_kf)
            propagate_if_to_kf(store, by_frame, ks, ke, spec, cfg, *validator, g);
    }
    if (cfg.hcc)
        propagate_hcc(store, plan, spec, cfg, *validator, g, hcc_trace);

    const StationarySplit split =
        stationary_filter(store.sorted_tracks(), plan, cfg, spec, scene, g);

    PipelineOutput out;
    out.stationary_eps = cfg.stationary_center_eps ? *cfg.stationary_center_eps
                                                   : default_stationary_eps(spec, scene, 0);
    out.tracks.reserve(split.moving.size() + split.stationary.size());
    for (const Track& t : split.moving)
        out.tracks.push_back(t);
    for (const Track& t : split.stationary)
        out.tracks.push_back(t);
    std::sort(out.tracks.begin(), out.tracks.end(),
              [](const Track& a, const Track& b) { return a.id < b.id; });

    out.source_histogram = {{"detected", 0}, {"interpolated", 0}, {"extrapolated", 0}, {"hcc", 0}};
    for (const Track& t : out.tracks)
        for (const auto& [frame, box] : t.boxes)
            out.source_histogram[to_string(box.source)] += 1;
    out.wall_ms = ms_since(t0);
    return out;
}

std::vector<ScoredBox> predictions_from_tracks(const std::vector<Track>& tracks) {
    std::vector<ScoredBox> preds;
    for (const Track& t : tracks) {
        if (t.status == TrackStatus::stationary)
            continue;
        for (const auto& [frame, box] : t.boxes)
            preds.push_back(ScoredBox{frame, box.box, box.confidence});
    }
    return preds;
}

std::vector<GroundTruthBox> moving_ground_truth(const std::vector<GroundTruthBox>& gt) {
    std::vector<GroundTruthBox> out;
    for (const GroundTruthBox& box : gt)
        if (box.moving)
            out.push_back(box);
    return out;
}

std::vector<AblationRow> ablation_grid(const std::vector<Detection>& dets, int n_frames,
                                       const std::vector<GroundTruthBox>& gt,
                                       const RegionSpec& spec, SceneClass scene, int segment_size,
                                       const PropagationConfig& base, const ValidatorConfig& vcfg,
                                       const ImageGeometry& g, std::uint64_t seed) {
    // Table layout: none, each pass alone, each pair, all three.
    static constexpr bool kRows[8][3] = {{false, false, false}, {true, false, false},
                                         {false, true, false},  {false, false, true},
                                         {true, true, false},   {true, false, true},
                                         {false, true, true},   {true, true, true}};
    const std::vector<GroundTruthBox> gt_moving = moving_ground_truth(gt);

    std::vector<AblationRow> rows;
    for (const auto& toggles : kRows) {
        PropagationConfig cfg = base;
        cfg.kf_to_if = toggles[0];
        cfg.if_to_kf = toggles[1];
        cfg.hcc = toggles[2];
        std::unique_ptr<BoxValidator> validator;
        if (cfg.if_to_kf || cfg.hcc)
            validator = make_validator(vcfg, gt, seed);
        const PipelineOutput out =
            run_pipeline(dets, n_frames, spec, scene, segment_size, cfg, validator.get(), g);
        const ApResult ap = ap50(predictions_from_tracks(out.tracks), gt_moving, &spec, g);

        AblationRow row;
        row.kf_to_if = cfg.kf_to_if;
        row.if_to_kf = cfg.if_to_kf;
        row.hcc = cfg.hcc;
        row.ap50_overall = ap.overall;
        row.ap50_per_ring = ap.per_ring;
        row.wall_ms = out.wall_ms;
        row.fps = out.wall_ms > 0.0 ? 1000.0 * n_frames / out.wall_ms : 0.0;
        rows.push_back(row);
    }
    return rows;
}

namespace {

struct LoadedRun {
    std::vector<Detection> dets;
    std::vector<GroundTruthBox> gt;
    int n_frames = 0;
    RegionSpec spec;
    ImageGeometry geometry = ImageGeometry::square(1024.0);
};

LoadedRun load_run_inputs(const RunConfig& cfg) {
    LoadedRun run;
    require_file(cfg.detections, "detections");
    if (!cfg.ground_truth.empty()) {
        require_file(cfg.ground_truth, "ground truth");
        run.gt = read_ground_truth(cfg.ground_truth);
    }
    // First pass to learn the sequence length, second to stamp the
    // modality schedule onto rows that do not carry one.
    run.n_frames = cfg.n_frames;
    if (run.n_frames == 0) {
        const auto probe = read_detections(cfg.detections, cfg.format);
        run.n_frames = std::max(max_frame(probe), max_frame(run.gt));
    }
    if (run.n_frames < 2)
        throw DataError("sequence too short: need at least 2 frames");
    const SegmentPlan plan = plan_segments(run.n_frames, cfg.segment_size);
    run.dets = read_detections(cfg.detections, cfg.format, &plan);
    run.spec = resolve_region_spec(cfg, &run.gt, run.geometry);
    return run;
}

json run_config_echo(const RunConfig& cfg, const LoadedRun& run) {
    return json{{"detections", cfg.detections.string()},
                {"ground_truth", cfg.ground_truth.string()},
                {"output_dir", cfg.output_dir.string()},
                {"format", cfg.format == DetectionFormat::mot_csv ? "mot-csv" : "jsonl"},
                {"region_spec", region_spec_to_json(run.spec)},
                {"scene_class", to_string(cfg.scene_class)},
                {"segment_size", cfg.segment_size},
                {"n_frames", run.n_frames},
                {"propagation", propagation_to_json(cfg.prop, run.spec, cfg.scene_class)},
                {"validator", validator_to_json(cfg.validator)},
                {"seed", cfg.seed}};
}

std::string format_eval_text(const ApResult& ap, const MotResult* mot) {
    std::string text;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-18s %8.4f\n", "AP50 overall", ap.overall);
    text += buf;
    static const char* kRingNames[] = {"inner circle", "middle ring", "outer ring"};
    for (std::size_t r = 0; r < ap.per_ring.size(); ++r) {
        const std::string label =
            r < 3 ? std::string("AP50 ") + kRingNames[r] : "AP50 ring " + std::to_string(r);
        if (ap.per_ring[r])
            std::snprintf(buf, sizeof(buf), "%-18s %8.4f\n", label.c_str(), *ap.per_ring[r]);
        else
            std::snprintf(buf, sizeof(buf), "%-18s %8s\n", label.c_str(), "n/a");
        text += buf;
    }
    if (mot) {
        std::snprintf(buf, sizeof(buf), "%-18s %8.4f\n", "MOTA", mot->mota);
        text += buf;
        if (mot->motp)
            std::snprintf(buf, sizeof(buf), "%-18s %8.4f\n", "MOTP", *mot->motp);
        else
            std::snprintf(buf, sizeof(buf), "%-18s %8s\n", "MOTP", "n/a");
        text += buf;
        std::snprintf(buf, sizeof(buf), "TP %ld  FP %ld  FN %ld  IDSW %ld  GT %ld\n",
                      mot->counts.tp, mot->counts.fp, mot->counts.fn, mot->counts.id_switches,
                      mot->counts.gt_total);
        text += buf;
    }
    return text;
}

json ap_to_json(const ApResult& ap) {
    json per_ring = json::array();
    for (const auto& v : ap.per_ring)
        per_ring.push_back(v ? json(*v) : json(nullptr));
    return json{{"overall", ap.overall}, {"per_ring", per_ring}};
}

json mot_to_json(const MotResult& mot) {
    return json{{"mota", mot.mota},
                {"motp", mot.motp ? json(*mot.motp) : json(nullptr)},
                {"tp", mot.counts.tp},
                {"fp", mot.counts.fp},
                {"fn", mot.counts.fn},
                {"id_switches", mot.counts.id_switches},
                {"gt_total", mot.counts.gt_total}};
}

} // namespace

void cmd_track(const RunConfig& cfg) {
    const LoadedRun run = load_run_inputs(cfg);
    std::unique_ptr<BoxValidator> validator;
    if (cfg.prop.if_to_kf || cfg.prop.hcc)
        validator = make_validator(cfg.validator, run.gt, cfg.seed);

    const PipelineOutput out = run_pipeline(run.dets, run.n_frames, run.spec, cfg.scene_class,
                                            cfg.segment_size, cfg.prop, validator.get(),
                                            run.geometry);
    write_tracks(out.tracks, cfg.output_dir / "tracks.csv");

    long moving = 0, stationary = 0;
    for (const Track& t : out.tracks)
        (t.status == TrackStatus::stationary ? stationary : moving) += 1;

    json summary;
    summary["config"] = run_config_echo(cfg, run);
    summary["box_sources"] = out.source_histogram;
    summary["tracks"] = json{{"moving", moving}, {"stationary", stationary}};
    summary["stationary_eps"] = out.stationary_eps;
    summary["timings_ms"] = json{{"pipeline", out.wall_ms}};
    write_json_file(cfg.output_dir / "run_summary.json", summary);
}

void cmd_eval(const RunConfig& cfg) {
    require_file(cfg.ground_truth, "ground truth");
    const std::vector<GroundTruthBox> gt = read_ground_truth(cfg.ground_truth);
    const std::vector<GroundTruthBox> gt_moving = moving_ground_truth(gt);
    const ImageGeometry geometry = ImageGeometry::square(1024.0);
    RunConfig spec_cfg = cfg;
    const RegionSpec spec = resolve_region_spec(spec_cfg, &gt, geometry);

    json report;
    std::string text;
    if (!cfg.tracks.empty()) {
        require_file(cfg.tracks, "tracks");
        const std::vector<Track> tracks = read_tracks(cfg.tracks);
        std::vector<Track> moving;
        for (const Track& t : tracks)
            if (t.status != TrackStatus::stationary)
                moving.push_back(t);
        // The track file carries no confidence column; rank uniformly.
        std::vector<ScoredBox> preds;
        for (const Track& t : moving)
            for (const auto& [frame, box] : t.boxes)
                preds.push_back(ScoredBox{frame, box.box, 1.0});
        const ApResult ap = ap50(preds, gt_moving, &spec, geometry);
        const MotResult mot = clear_mot(moving, gt_moving);
        report["ap50"] = ap_to_json(ap);
        report["mot"] = mot_to_json(mot);
        text = format_eval_text(ap, &mot);
    } else if (!cfg.detections.empty()) {
        require_file(cfg.detections, "detections");
        const std::vector<Detection> dets = read_detections(cfg.detections, cfg.format);
        std::vector<ScoredBox> preds;
        for (const Detection& d : dets)
            preds.push_back(ScoredBox{d.frame, d.box, d.confidence});
        const ApResult ap = ap50(preds, gt_moving, &spec, geometry);
        report["ap50"] = ap_to_json(ap);
        text = format_eval_text(ap, nullptr);
    } else {
        throw ConfigError("eval needs a tracks file or a detections file");
    }

    write_json_file(cfg.output_dir / "eval.json", report);
    write_text_file(cfg.output_dir / "eval.txt", text);
}

void cmd_simulate(const RunConfig& cfg) {
    SceneSpec scene;
    if (!cfg.scene_file.empty()) {
        require_file(cfg.scene_file, "scene spec");
        scene = read_scene_spec(cfg.scene_file);
    } else {
        scene = reference_scene(cfg.sim_cars, cfg.sim_frames, cfg.seed);
    }
    const std::vector<GroundTruthBox> gt = generate_scene(scene);

    NoiseSpec noise;
    if (!cfg.noise_file.empty()) {
        require_file(cfg.noise_file, "noise spec");
        noise = read_noise_spec(cfg.noise_file);
    } else {
        noise = noise_preset(cfg.sim_preset, gt, scene.geometry, cfg.seed);
    }

    const SegmentPlan plan = plan_segments(scene.n_frames, cfg.segment_size);
    const std::vector<Detection> dets = corrupt_detections(gt, noise, plan, scene.geometry);

    write_ground_truth(gt, cfg.output_dir / "gt.csv");
    write_detections(dets, cfg.output_dir / (cfg.format == DetectionFormat::mot_csv
                                                 ? "detections.csv"
                                                 : "detections.jsonl"),
                     cfg.format);
    write_scene_spec(scene, cfg.output_dir / "scene.json");
    write_noise_spec(noise, cfg.output_dir / "noise.json");
}

void cmd_ablate(const RunConfig& cfg) {
    const LoadedRun run = load_run_inputs(cfg);
    if (run.gt.empty())
        throw ConfigError("ablate needs ground truth for scoring");
    const std::vector<AblationRow> rows =
        ablation_grid(run.dets, run.n_frames, run.gt, run.spec, cfg.scene_class, cfg.segment_size,
                      cfg.prop, cfg.validator, run.geometry, cfg.seed);

    json doc;
    doc["config"] = run_config_echo(cfg, run);
    doc["rows"] = json::array();
    std::string text = "K->I  I->K  HCC   AP50     fps\n";
    for (const AblationRow& row : rows) {
        json per_ring = json::array();
        for (const auto& v : row.ap50_per_ring)
            per_ring.push_back(v ? json(*v) : json(nullptr));
        doc["rows"].push_back(json{{"kf_to_if", row.kf_to_if},
                                   {"if_to_kf", row.if_to_kf},
                                   {"hcc", row.hcc},
                                   {"ap50", row.ap50_overall},
                                   {"ap50_per_ring", per_ring},
                                   {"wall_ms", row.wall_ms},
                                   {"fps", row.fps}});
        char buf[120];
        std::snprintf(buf, sizeof(buf), "%-5s %-5s %-5s %6.4f %7.0f\n",
                      row.kf_to_if ? "x" : "-", row.if_to_kf ? "x" : "-", row.hcc ? "x" : "-",
                      row.ap50_overall, row.fps);
        text += buf;
    }
    write_json_file(cfg.output_dir / "ablation.json", doc);
    write_text_file(cfg.output_dir / "ablation.txt", text);
}

void cmd_regions(const RunConfig& cfg) {
    require_file(cfg.ground_truth, "ground truth");
    const std::vector<GroundTruthBox> gt = read_ground_truth(cfg.ground_truth);
    const ImageGeometry geometry = ImageGeometry::square(1024.0);
    std::vector<std::pair<BBox, SceneClass>> tagged;
    tagged.reserve(gt.size());
    for (const GroundTruthBox& box : gt)
        tagged.emplace_back(box.box, cfg.scene_class);
    const RegionSpec spec =
        fit_region_spec(tagged, geometry, static_cast<std::size_t>(cfg.fit_k), cfg.fit_margin);
    write_region_spec(spec, cfg.output_dir / "regions.json");
}

} // namespace fishtrack
