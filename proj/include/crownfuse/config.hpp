// Pipeline configuration: one JSON file of sections, overridable per key from
// the environment (CROWNFUSE_<SECTION>_<KEY>) and from command-line flags.
// Precedence is flag > environment > file > built-in default. Unknown sections
// or keys are errors.
//
//   {
//     "green":        {"hue_min", "hue_max", "sat_min", "val_min"},
//     "gabor":        {"orientations", "radial_frequencies", "bandwidth", "kernel_truncation", "reference_width"},
//     "probmap":      {"w1", "w2", "open_radius", "open_iterations"},
//     "segmentation": {"th_area", "th_dist"},
//     "wbf":          {"prefilter_score", "iou_cluster", "model_weights", "score_mode", "cluster_count", "n_models"},
//     "integrate":    {"tau_a", "expansion", "n_neighbors", "tau_d", "tau_c", "local_crop",
//                      "refine_open_radius", "fallback_w", "fallback_h"},
//     "synth":        {"width", "height", "crowns", "radius_min", "radius_max", "separation_margin", "clutter",
//                      "background", "green_min", "green_max", "n_models", "drop_rate", "jitter", "seed"},
//     "eval":         {"mode", "iou"},
//     "io":           {"out_dir", "workers"}
//   }
//
// synth.crowns is either a count (random layout) or an explicit list of
// {"cx", "cy", "radius", "green"}. wbf.n_models = 0 infers N from the detections.
#pragma once

#include "crownfuse/features.hpp"
#include "crownfuse/integrate.hpp"
#include "crownfuse/synth.hpp"
#include "crownfuse/traditional.hpp"
#include "crownfuse/wbf.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace crownfuse {

struct SynthSettings {
    int width = 512;
    int height = 512;
    int crown_count = 10;
    std::vector<synth::Crown> crowns;  // explicit layout; overrides crown_count when non-empty
    double radius_min = 5.0;
    double radius_max = 15.0;
    double separation_margin = 4.0;
    int clutter = 0;
    std::array<std::uint8_t, 3> background{128, 104, 72};
    double green_min = 150.0;
    double green_max = 230.0;
    int n_models = 4;
    double drop_rate = 0.15;
    double jitter = 0.05;
    std::uint64_t seed = 1;
};

enum class EvalMode { Center, Box };

struct PipelineConfig {
    features::GreenDominanceSpec green;
    features::GaborBankSpec gabor = features::GaborBankSpec::defaults();
    double w1 = 0.5;
    double w2 = 0.5;
    int open_radius = 1;
    int open_iterations = 2;
    int th_area = 64;
    double th_dist = 8.0;
    wbf::WbfConfig wbf;
    int n_models = 0;
    integrate::IntegrationConfig integrate;
    SynthSettings synth;
    EvalMode eval_mode = EvalMode::Center;
    double eval_iou = 0.5;
    std::filesystem::path out_dir = "out";
    unsigned workers = 0;

    /// Delegates to every component's own checks; throws io::InputError naming the field.
    void validate() const;
    traditional::Config traditional() const;
    integrate::IntegrationConfig integration() const;  // with the probmap weights applied
};

/// "section.key" -> JSON-encoded value (bare words are taken as strings).
using Overrides = std::map<std::string, std::string>;

/// Builds the configuration from defaults, then the file (if any), then
/// CROWNFUSE_* variables from `environment`, then `flags`, and validates it.
PipelineConfig load_config(const std::optional<std::filesystem::path>& file, const Overrides& flags,
                           const std::map<std::string, std::string>& environment);

/// The CROWNFUSE_* variables of the running process.
std::map<std::string, std::string> process_environment();

/// Effective configuration as JSON text (round-trips through load_config).
std::string dump_config(const PipelineConfig& config);

}  // namespace crownfuse
