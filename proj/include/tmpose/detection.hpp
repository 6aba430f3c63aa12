#pragma once

#include "tmpose/matching.hpp"
#include "tmpose/render.hpp"

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace tmpose {

/// A cluster of template matches treated as one object candidate.
struct Hypothesis {
    std::string object_id;
    std::vector<Match> members;
    /// Mean of member top-left positions.
    PixelPos position;
    double train_distance = 0.0;
    double score = 0.0;  // gamma = alpha * beta
    double alpha = 0.0;  // depth similarity
    double beta = 0.0;   // normal similarity
    bool scored = false;
    /// Set when scoring found no valid depth or normal pixel pairs.
    bool no_valid_pairs = false;
};

/// Groups matches by (object, floor(row / s_im), floor(col / s_im)) and then
/// by exact training distance. Groups appear in order of their first match.
std::vector<Hypothesis> cluster_matches(const std::vector<Match>& matches, int s_im);

/// Keeps hypotheses with at least `min_cluster_size` members.
std::vector<Hypothesis> filter_clusters(const std::vector<Hypothesis>& hyps, int min_cluster_size);

/// Depth and normals of a template's training render, cropped to the
/// template rectangle.
struct TemplateView {
    DepthImage depth;
    NormalMap normals;
};

/// Source of template views for scoring.
class TemplateViewSource {
public:
    virtual ~TemplateViewSource() = default;
    virtual std::shared_ptr<const TemplateView> view(const Template& tpl, int template_index) const = 0;
};

/// Renders template views from object meshes and memoizes them.
class MeshTemplateRenderer : public TemplateViewSource {
public:
    MeshTemplateRenderer(std::map<std::string, const TriangleMesh*> meshes, CameraIntrinsics cam,
                         NormalOptions normal_options);

    std::shared_ptr<const TemplateView> view(const Template& tpl, int template_index) const override;

    const TriangleMesh& mesh(const std::string& object_id) const;
    const CameraIntrinsics& camera() const { return cam_; }
    const NormalOptions& normal_options() const { return normal_options_; }

private:
    std::map<std::string, const TriangleMesh*> meshes_;
    CameraIntrinsics cam_;
    NormalOptions normal_options_;
    mutable std::mutex mutex_;
    mutable std::map<std::pair<std::string, int>, std::shared_ptr<const TemplateView>> cache_;
};

/// Renders a template's training view and crops it to the template box.
TemplateView render_template_view(const TriangleMesh& mesh, const CameraIntrinsics& cam,
                                  const NormalOptions& normal_options, const Template& tpl);

/// Per-member mean absolute depth difference (meters) and mean normal angle
/// (radians) against the template-sized scene box whose top-left is the
/// rounded hypothesis position; only pairs valid on both sides count.
/// alpha = exp(-mean eps), beta = exp(-mean theta), gamma = alpha * beta.
Hypothesis score_hypothesis(const Hypothesis& hyp, const DepthImage& scene_depth, const NormalMap& scene_normals,
                            const TemplateStore& store, const TemplateViewSource& views);

/// Strict "better" order used by NMS: higher score, then smaller distance,
/// then smaller row, then smaller column.
bool nms_better(const Hypothesis& a, const Hypothesis& b);

/// A hypothesis survives iff no other hypothesis of the same object within
/// pixel distance <= radius is better. Survivors keep their input order.
std::vector<Hypothesis> nms(const std::vector<Hypothesis>& hyps, double radius);

}  // namespace tmpose
