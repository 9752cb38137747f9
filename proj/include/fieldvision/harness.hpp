#pragma once

#include <string>

#include "fieldvision/config.hpp"

namespace fv {

// Each command throws on failure: ConfigError for usage problems (missing
// inputs, bad config), other Error subclasses for runtime failures. The CLI
// maps these to exit codes 2 and 1.

// Renders one scenario into out_dir: frame_NNNN.ppm + mask_NNNN.pgm pairs,
// truth.jsonl, manifest.json. Calib scenarios write observations.jsonl
// instead of images. count_override >= 0 replaces the scenario frame count.
// An empty scenario_name selects the first scenario.
void cmd_render(const RunConfig& cfg, const std::string& scenario_name, int count_override,
                const std::string& out_dir);

// Trains the ball cascade from a rendered dataset. Writes
// ball_classifier.nblc, ball_reference.json, train_metrics.json and
// report.txt into out_dir; prints the holdout confusion matrix.
void cmd_train_ball(const RunConfig& cfg, const std::string& dataset_dir,
                    const std::string& out_dir);

// Runs the full detector over a dataset. classifier_path may be empty to
// skip the ball stage; otherwise ball_reference.json is expected next to it.
// Writes detections.jsonl, metrics.json and report.txt.
void cmd_detect(const RunConfig& cfg, const std::string& dataset_dir,
                const std::string& classifier_path, const std::string& out_dir);

// Runs detector + localizer per frame from an offset initial pose.
// Writes trace.jsonl, metrics.json and report.txt.
void cmd_localize(const RunConfig& cfg, const std::string& dataset_dir,
                  const std::string& out_dir);

// Estimates the extrinsic correction from a calib dataset. Writes
// correction.json and report.txt.
void cmd_calibrate(const RunConfig& cfg, const std::string& dataset_dir,
                   const std::string& out_dir);

// Renders and evaluates every scenario in the config; writes a summary.json
// plus per-scenario subdirectories under out_dir.
void cmd_evaluate(const RunConfig& cfg, const std::string& out_dir);

}  // namespace fv
