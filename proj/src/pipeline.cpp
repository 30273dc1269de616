#include "crownfuse/pipeline.hpp"

#include "crownfuse/integrate.hpp"
#include "crownfuse/io.hpp"
#include "crownfuse/probmap.hpp"
#include "crownfuse/traditional.hpp"
#include "crownfuse/wbf.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <iostream>

namespace crownfuse::pipeline {

namespace {

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw io::InputError(dir.string(), "", "cannot create output directory: " + ec.message());
}

void same_size(const io::ImageHeader& h, const fs::path& file, int width, int height, const fs::path& reference) {
    if (h.width != width || h.height != height)
        throw io::InputError(file.string(), h.width != width ? "width" : "height",
                             "dimension mismatch: " + std::to_string(h.width) + "x" + std::to_string(h.height) +
                                 " vs " + std::to_string(width) + "x" + std::to_string(height) + " of " +
                                 reference.string());
}

// Runs a library call on one input file, tagging library errors with it.
template <typename Fn>
auto on_file(const fs::path& file, Fn&& fn) {
    try {
        return fn();
    } catch (const io::InputError&) {
        throw;
    } catch (const Error& e) {
        throw io::InputError(file.string(), "", e.what());
    }
}

}  // namespace

void detect_traditional(const PipelineConfig& config, const fs::path& image, const fs::path& out_dir) {
    const RgbRaster rgb = io::read_rgb(image);
    const auto result = on_file(image, [&] { return traditional::detect(rgb, config.traditional()); });
    ensure_dir(out_dir);
    io::write_mask_png(out_dir / "mask.png", result.mask);
    io::write_labels_png(out_dir / "labels.png", result.segmentation.labels);
    io::write_unit_png(out_dir / "jmap.png", result.joint.values);
    io::write_centers(out_dir / "centers.json",
                      {{image.stem().string(), rgb.width(), rgb.height()}, result.segmentation.centers});
}

void fuse(const PipelineConfig& config, const std::vector<fs::path>& detections, const fs::path& out_dir) {
    if (detections.empty()) throw io::InputError("", "detections", "no detection files given");
    io::DetectionFile merged;
    for (std::size_t i = 0; i < detections.size(); ++i) {
        auto file = io::read_detections(detections[i]);
        if (i == 0)
            merged.image = file.image;
        else
            same_size(file.image, detections[i], merged.image.width, merged.image.height, detections[0]);
        merged.boxes.insert(merged.boxes.end(), file.boxes.begin(), file.boxes.end());
    }
    int n_models = config.n_models;
    if (n_models == 0) {
        n_models = 1;
        for (const auto& d : merged.boxes) n_models = std::max(n_models, d.model_id + 1);
    }
    for (std::size_t i = 0; i < merged.boxes.size(); ++i)
        if (merged.boxes[i].model_id >= n_models)
            throw io::InputError(detections.front().string(), "boxes[" + std::to_string(i) + "].model_id",
                                 "exceeds wbf.n_models");
    auto fused = wbf::fuse(merged.boxes, n_models, config.wbf);
    ensure_dir(out_dir);
    io::write_fused(out_dir / "fused.json", {merged.image, n_models, std::move(fused)});
}

void integrate(const PipelineConfig& config, const fs::path& image, const fs::path& fused, const fs::path& centers,
               const fs::path& labels, const fs::path& out_dir) {
    const RgbRaster rgb = io::read_rgb(image);
    const int width = rgb.width(), height = rgb.height();
    const auto fused_file = io::read_fused(fused);
    same_size(fused_file.image, fused, width, height, image);
    const auto centers_file = io::read_centers(centers);
    same_size(centers_file.image, centers, width, height, image);
    LabelMap label_map = io::read_labels_png(labels);
    same_size({"", label_map.width(), label_map.height()}, labels, width, height, image);

    // Every mask pixel carries a label, so the segmentation is rebuilt exactly from the label image.
    SegmentationResult seg;
    seg.segments = on_file(labels, [&] {
        return segmentation::describe_segments(label_map,
                                               raster::distance_transform(segmentation::foreground(label_map)));
    });
    seg.labels = std::move(label_map);
    seg.centers = centers_file.centers;

    const auto maps = on_file(image, [&] { return traditional::compute_features(rgb, config.traditional()); });
    const auto result = on_file(fused, [&] {
        return integrate::integrate(fused_file.boxes, seg, maps.color, maps.texture, config.integration());
    });

    ensure_dir(out_dir);
    io::IntegratedFile out;
    out.image = {image.stem().string(), width, height};
    out.centers = result.centers;
    out.dropped_segments = result.refinement.dropped_segments;
    out.crown_size = result.crown_size;
    out.crown_size_fallback = result.crown_size_fallback;
    io::write_integrated(out_dir / "integrated.json", out);
    io::write_labels_png(out_dir / "refined_labels.png", result.refinement.segmentation.labels);
    io::write_rgb_png(out_dir / "overlay.png", io::render_overlay(rgb, result.accepted_boxes, result.centers));
}

eval::EvalReport evaluate(const PipelineConfig& config, const std::vector<fs::path>& results,
                          const std::vector<fs::path>& ground_truth, const fs::path& out_dir) {
    if (results.empty()) throw io::InputError("", "results", "no result files given");
    if (results.size() != ground_truth.size())
        throw io::InputError("", "ground_truth", "expected one ground-truth file per result file");
    std::vector<eval::EvalReport> reports;
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto gt = io::read_ground_truth(ground_truth[i]);
        if (config.eval_mode == EvalMode::Center) {
            const auto pred = io::read_centers(results[i]);
            same_size(pred.image, results[i], gt.image.width, gt.image.height, ground_truth[i]);
            reports.push_back(on_file(ground_truth[i], [&] {
                return eval::match_and_rate(pred.centers, gt.boxes, gt.image.width, gt.image.height, gt.image.image_id);
            }));
        } else {
            const auto pred = io::read_fused(results[i]);
            same_size(pred.image, results[i], gt.image.width, gt.image.height, ground_truth[i]);
            std::vector<BoxExtent> boxes;
            for (const auto& b : pred.boxes)
                if (b.score >= config.integrate.tau_a) boxes.push_back(b.box);
            reports.push_back(on_file(ground_truth[i], [&] {
                return eval::match_boxes(boxes, gt.boxes, config.eval_iou, gt.image.image_id);
            }));
        }
    }
    const auto report = eval::combine(reports);
    ensure_dir(out_dir);
    io::write_report(out_dir / "report.json", out_dir / "report.txt", report,
                     config.eval_mode == EvalMode::Center ? "center" : "box");
    return report;
}

SynthOutput make_synthetic(const SynthSettings& s) {
    synth::SceneSpec spec;
    spec.width = s.width;
    spec.height = s.height;
    spec.background = s.background;
    spec.clutter = s.clutter;
    spec.seed = s.seed + 1;
    if (!s.crowns.empty()) {
        spec.crowns = s.crowns;
    } else {
        synth::LayoutSpec layout;
        layout.width = s.width;
        layout.height = s.height;
        layout.count = s.crown_count;
        layout.radius_min = s.radius_min;
        layout.radius_max = s.radius_max;
        layout.separation_margin = s.separation_margin;
        layout.green_min = s.green_min;
        layout.green_max = s.green_max;
        layout.seed = s.seed;
        spec.crowns = synth::random_layout(layout);
    }
    SynthOutput out{synth::render_scene(spec), {}};
    out.detections = synth::simulate_detections(out.scene.ground_truth, s.n_models, s.drop_rate, s.jitter, s.seed + 2);
    return out;
}

void synth(const PipelineConfig& config, const fs::path& out_dir) {
    const auto out = on_file("config", [&] { return make_synthetic(config.synth); });
    const io::ImageHeader header{"scene", config.synth.width, config.synth.height};
    ensure_dir(out_dir);
    io::write_rgb_png(out_dir / "scene.png", out.scene.image);
    io::write_ground_truth(out_dir / "gt.json", {header, out.scene.ground_truth});
    io::write_detections(out_dir / "detections.json", {header, out.detections});
}

void all(const PipelineConfig& config, const fs::path& image, const std::vector<fs::path>& detections,
         const std::optional<fs::path>& ground_truth, const fs::path& out_dir) {
    detect_traditional(config, image, out_dir);
    fuse(config, detections, out_dir);
    integrate(config, image, out_dir / "fused.json", out_dir / "centers.json", out_dir / "labels.png", out_dir);
    if (ground_truth) {
        const fs::path result = out_dir / (config.eval_mode == EvalMode::Center ? "integrated.json" : "fused.json");
        evaluate(config, {result}, {*ground_truth}, out_dir);
    }
}

namespace {

void print_error(const std::string& file, const std::string& field, const std::string& reason) {
    nlohmann::json record;
    record["error"] = {{"file", file}, {"field", field}, {"reason", reason}};
    std::cerr << record.dump() << '\n';
}

}  // namespace

int run_cli(int argc, char** argv) {
    CLI::App app{"Tree crown detection: traditional segmentation fused with detector boxes"};
    app.require_subcommand(1);
    app.fallthrough();

    std::optional<std::string> config_file;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> workers;
    std::optional<std::string> out_dir;
    std::vector<std::string> sets;
    Overrides flags;
    app.add_option("--config", config_file, "JSON configuration file");
    app.add_option("--seed", seed, "synth.seed");
    app.add_option("--workers", workers, "io.workers (0 = hardware concurrency)");
    app.add_option("--out-dir", out_dir, "io.out_dir");
    app.add_option("--set", sets, "section.key=value override (repeatable)");
    const std::vector<std::pair<std::string, std::string>> threshold_flags{
        {"--tau-a", "integrate.tau_a"},        {"--tau-d", "integrate.tau_d"},
        {"--tau-c", "integrate.tau_c"},        {"--n-neighbors", "integrate.n_neighbors"},
        {"--iou-cluster", "wbf.iou_cluster"},  {"--n-models", "wbf.n_models"},
        {"--th-area", "segmentation.th_area"}, {"--th-dist", "segmentation.th_dist"},
        {"--w1", "probmap.w1"},                {"--w2", "probmap.w2"},
        {"--eval-mode", "eval.mode"}};
    std::map<std::string, std::optional<std::string>> threshold_values;
    for (const auto& [flag, key] : threshold_flags) app.add_option(flag, threshold_values[key], key);

    std::string image, fused_path, centers_path, labels_path;
    std::vector<std::string> detections, results, gts;
    std::optional<std::string> gt;

    auto* detect = app.add_subcommand("detect-traditional", "Segmentation-based crown centres of one image");
    detect->add_option("--image", image, "RGB image")->required();

    auto* fuse_cmd = app.add_subcommand("fuse", "Weighted boxes fusion of detection files");
    fuse_cmd->add_option("--detections", detections, "detection JSON files")->required();

    auto* integrate_cmd = app.add_subcommand("integrate", "Validate centres against fused boxes and refine");
    integrate_cmd->add_option("--image", image, "RGB image")->required();
    integrate_cmd->add_option("--fused", fused_path, "fused.json")->required();
    integrate_cmd->add_option("--centers", centers_path, "centers.json")->required();
    integrate_cmd->add_option("--labels", labels_path, "labels.png")->required();

    auto* evaluate_cmd = app.add_subcommand("evaluate", "Detection rate against ground truth");
    evaluate_cmd->add_option("--result", results, "result files (centres or fused boxes)")->required();
    evaluate_cmd->add_option("--gt", gts, "ground-truth files, one per result")->required();

    auto* synth_cmd = app.add_subcommand("synth", "Synthetic scene, ground truth and simulated detections");

    auto* all_cmd = app.add_subcommand("all", "detect-traditional, fuse, integrate and evaluate");
    all_cmd->add_option("--image", image, "RGB image")->required();
    all_cmd->add_option("--detections", detections, "detection JSON files")->required();
    all_cmd->add_option("--gt", gt, "ground-truth file");

    auto* config_cmd = app.add_subcommand("config", "Print the effective configuration");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (seed) flags["synth.seed"] = std::to_string(*seed);
        if (workers) flags["io.workers"] = std::to_string(*workers);
        if (out_dir) flags["io.out_dir"] = nlohmann::json(*out_dir).dump();
        for (const auto& [key, value] : threshold_values)
            if (value) flags[key] = *value;
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw io::InputError("flags", s, "expected section.key=value");
            flags[s.substr(0, eq)] = s.substr(eq + 1);
        }
        const std::optional<fs::path> file = config_file ? std::optional<fs::path>(*config_file) : std::nullopt;
        const PipelineConfig config = load_config(file, flags, process_environment());
        const fs::path out = config.out_dir;

        if (*detect) detect_traditional(config, image, out);
        if (*fuse_cmd) fuse(config, {detections.begin(), detections.end()}, out);
        if (*integrate_cmd) integrate(config, image, fused_path, centers_path, labels_path, out);
        if (*evaluate_cmd) {
            const auto report = evaluate(config, {results.begin(), results.end()}, {gts.begin(), gts.end()}, out);
            std::cout << eval::format_table(report);
        }
        if (*synth_cmd) synth(config, out);
        if (*all_cmd) {
            all(config, image, {detections.begin(), detections.end()},
                gt ? std::optional<fs::path>(*gt) : std::nullopt, out);
        }
        if (*config_cmd) std::cout << dump_config(config);
    } catch (const io::InputError& e) {
        print_error(e.file(), e.field(), e.reason());
        return 1;
    } catch (const std::exception& e) {
        print_error("", "", e.what());
        return 1;
    }
    return 0;
}

}  // namespace crownfuse::pipeline
