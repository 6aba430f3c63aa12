#pragma once

#include "tmpose/geometry.hpp"
#include "tmpose/image.hpp"
#include "tmpose/render.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace tmpose {

enum class Modality : std::uint8_t { Gradient = 0, Normal = 1 };

/// Bin index per pixel; -1 where the pixel carries no orientation.
using BinImage = Image<std::int8_t>;

struct QuantizationConfig {
    int gradient_bins = 8;
    /// One fronto-parallel cone plus (normal_bins - 1) cones on a tilted ring.
    int normal_bins = 8;
    /// Maximum features per modality.
    int feature_budget = 63;
    /// Minimum pixel distance between two features of one modality.
    int min_spacing = 2;
    /// Fewer features than this in either modality rejects the view.
    int min_features = 8;
    /// Sobel magnitude below which a pixel has no gradient orientation.
    double gradient_threshold = 40.0;

    bool operator==(const QuantizationConfig&) const = default;
    /// Throws ConfigError when a field is out of range.
    void validate() const;
};

/// Folds `angle` into [0, pi) and maps it to one of `bins` equal half-open
/// intervals [k*pi/bins, (k+1)*pi/bins).
int quantize_gradient(double angle, int bins = 8);

/// Index of the nearest reference cone axis (ties go to the lower index).
int quantize_normal(const Vec3& n, int bins = 8);

/// Unit cone axes used by quantize_normal; axis 0 faces the camera.
const std::vector<Vec3>& normal_cone_axes(int bins);

/// Response of a template feature in bin `feature_bin` to a scene pixel in
/// bin `scene_bin`: 2 exact, 1 adjacent, 0 otherwise.
int response_level(Modality m, int feature_bin, int scene_bin, int bins);

/// Similarity weight of each response level.
inline constexpr double kResponseWeight[3] = {0.0, 0.92387953251128674, 1.0};

struct GradientField {
    Image<double> magnitude;
    Image<double> angle;
};

/// 3x3 Sobel on the intensity image; the one-pixel border is left at zero.
GradientField sobel_gradients(const GrayImage& intensity);

BinImage quantize_gradient_image(const GrayImage& intensity, const QuantizationConfig& cfg);
BinImage quantize_normal_image(const NormalMap& normals, const QuantizationConfig& cfg);

struct Feature {
    Modality modality = Modality::Gradient;
    int row = 0;  // relative to the template's top-left corner
    int col = 0;
    int bin = 0;
    bool operator==(const Feature&) const = default;
};

struct Template {
    std::vector<Feature> features;
    int rows = 0;
    int cols = 0;
    /// Top-left corner of the crop inside the full training render.
    int offset_row = 0;
    int offset_col = 0;
    Pose train_pose;
    double train_distance = 0.0;
    std::string object_id;

    bool operator==(const Template&) const = default;
};

/// Builds a template from one rendered training view. The crop is the mask
/// bounding box grown by one pixel so silhouette gradients just outside the
/// mask are kept.
Template extract_template(const GrayImage& intensity, const DepthImage& depth, const NormalMap& normals,
                          const Mask& mask, const Pose& train_pose, const std::string& object_id,
                          const QuantizationConfig& cfg = {});

struct ObjectTemplates {
    std::string object_id;
    std::vector<Template> templates;
    bool operator==(const ObjectTemplates&) const = default;
};

struct TemplateStore {
    static constexpr std::uint32_t kFormatVersion = 1;

    std::uint32_t version = kFormatVersion;
    QuantizationConfig config;
    /// Camera the training views were rendered with; template offsets and
    /// sizes are only meaningful for this camera.
    CameraIntrinsics camera;
    std::vector<ObjectTemplates> objects;

    const ObjectTemplates* find(const std::string& object_id) const;
    std::size_t template_count() const;
    bool operator==(const TemplateStore&) const = default;
};

void store_save(const TemplateStore& store, const std::string& path);
/// Throws VersionMismatch, CorruptFile or IoError.
TemplateStore store_load(const std::string& path);

}  // namespace tmpose
