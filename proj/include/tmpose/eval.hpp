#pragma once

#include "tmpose/geometry.hpp"
#include "tmpose/mesh.hpp"
#include "tmpose/synth.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace tmpose {

/// Mean distance between corresponding mesh vertices under the two poses.
double add_error(const TriangleMesh& mesh, const Pose& est, const Pose& gt);

/// Mean distance from each gt-posed vertex to the nearest est-posed vertex.
double adi_error(const TriangleMesh& mesh, const Pose& est, const Pose& gt);

/// m < k_m * diameter.
inline bool is_correct(double m, double diameter, double k_m = 0.15) { return m < k_m * diameter; }

struct Detection {
    std::string object_id;
    Pose pose;
};

struct PrfCounts {
    int tp = 0;
    int fp = 0;
    int fn = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Fills precision, recall and f1 from the counts; empty denominators give 0.
void finalize_counts(PrfCounts& c);

struct DetectionResult {
    std::string object_id;
    std::optional<int> matched_gt;
    double add = 0.0;  // against the matched instance, else 0
    double adi = 0.0;
    bool correct = false;
};

struct EvalReport {
    double k_m = 0.15;
    std::map<std::string, PrfCounts> per_object;
    PrfCounts micro;
    std::vector<DetectionResult> detections;
};

struct EvalObject {
    const TriangleMesh* mesh = nullptr;
    double diameter = 0.0;
    bool symmetric = false;  // scored with ADI instead of ADD
};

/// One-to-one matching between detections and ground-truth instances of the
/// same object. All candidate pairs are taken in ascending order of their
/// metric (ties by detection index, then instance index) and a pair is kept
/// when neither side is matched yet. A kept pair below k_m * diameter is a
/// true positive; every other detection is a false positive and every
/// instance without a true positive is a false negative.
EvalReport evaluate(const std::vector<Detection>& detections, const std::vector<SceneInstance>& truth,
                    const std::map<std::string, EvalObject>& objects, double k_m = 0.15);

}  // namespace tmpose
