// Subcommands of the crownfuse tool. Every stage reads its inputs from files
// and writes its outputs into the output directory, so `all` is exactly the
// stages run in sequence.
//
//   detect-traditional  image -> mask.png labels.png jmap.png centers.json
//   fuse                detection files -> fused.json
//   integrate           image + fused.json + centers.json + labels.png
//                         -> integrated.json refined_labels.png overlay.png
//   evaluate            results + ground truth -> report.json report.txt
//   synth               config -> scene.png gt.json detections.json
//   all                 detect-traditional, fuse, integrate, then evaluate when ground truth is given
#pragma once

#include "crownfuse/config.hpp"
#include "crownfuse/eval.hpp"
#include "crownfuse/synth.hpp"

#include <filesystem>
#include <optional>
#include <vector>

namespace crownfuse::pipeline {

namespace fs = std::filesystem;

void detect_traditional(const PipelineConfig& config, const fs::path& image, const fs::path& out_dir);

/// Detections of one image, possibly split over several files. An empty box list gives an empty fused file.
void fuse(const PipelineConfig& config, const std::vector<fs::path>& detections, const fs::path& out_dir);

void integrate(const PipelineConfig& config, const fs::path& image, const fs::path& fused, const fs::path& centers,
               const fs::path& labels, const fs::path& out_dir);

/// Pairs results[i] with ground_truth[i]; center mode reads centre files, box mode fused files.
eval::EvalReport evaluate(const PipelineConfig& config, const std::vector<fs::path>& results,
                          const std::vector<fs::path>& ground_truth, const fs::path& out_dir);

/// Layout (explicit or random), rendered scene and simulated detections of the synth settings.
struct SynthOutput {
    synth::Scene scene;
    std::vector<DetectionBox> detections;
};
SynthOutput make_synthetic(const SynthSettings& settings);
void synth(const PipelineConfig& config, const fs::path& out_dir);

void all(const PipelineConfig& config, const fs::path& image, const std::vector<fs::path>& detections,
         const std::optional<fs::path>& ground_truth, const fs::path& out_dir);

/// Parses flags, runs one subcommand and returns the exit status. Failures
/// print {"error": {"file", "field", "reason"}} on stderr.
int run_cli(int argc, char** argv);

}  // namespace crownfuse::pipeline
