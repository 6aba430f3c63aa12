#pragma once

#include "tmpose/eval.hpp"
#include "tmpose/pipeline.hpp"

#include <string>
#include <vector>

namespace tmpose {

/// Detections JSON: {"stage": ..., "nms_radius": ..., "counts": {...},
/// "detections": [{object_id, r_obj, c_obj, d, gamma, alpha, beta,
/// member_count, refined, R, t, fitness, inlier_fraction, phi}]}.
std::string detections_to_json(const DetectResult& result, Stage stage);

/// Reads the object ids and poses back; throws ConfigError on schema errors.
std::vector<Detection> detections_from_json(const std::string& text);

std::string report_to_json(const EvalReport& report);
/// Fixed-width table, one row per object plus a micro-average row.
std::string report_to_table(const EvalReport& report);

}  // namespace tmpose
