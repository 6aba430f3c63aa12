#pragma once

#include "tmpose/templates.hpp"

#include <array>
#include <string>
#include <vector>

namespace tmpose {

/// Quantized scene: raw per-pixel bins, the OR-spread bitmasks, and the
/// per-bin response maps derived from them.
struct QuantizedScene {
    int width = 0;
    int height = 0;
    int spread_radius = 0;
    int gradient_bins = 8;
    int normal_bins = 8;
    std::array<BinImage, 2> bins;                // indexed by Modality
    std::array<Image<std::uint8_t>, 2> spread;   // bit k set = bin k within the neighbourhood
    /// responses[m][b] holds the response level (0/1/2) of a feature with
    /// bin b at every pixel.
    std::array<std::vector<Image<std::uint8_t>>, 2> responses;

    int bin_count(Modality m) const { return m == Modality::Gradient ? gradient_bins : normal_bins; }
};

struct Match {
    std::string object_id;
    int template_index = 0;
    int row = 0;  // template top-left in the scene
    int col = 0;
    double similarity = 0.0;
    /// Training distance of the matched template (meters).
    double train_distance = 0.0;

    bool operator==(const Match&) const = default;
};

/// OR-spreads a bin image over the (2T+1)^2 neighbourhood of every pixel.
Image<std::uint8_t> spread_bins(const BinImage& bins, int spread_radius);

/// Scene pixels with invalid depth contribute no normal bits.
QuantizedScene quantize_scene(const GrayImage& intensity, const DepthImage& depth, const NormalMap& normals,
                              int spread_radius, const QuantizationConfig& cfg);

/// Builds the spread masks and response maps from pre-quantized bins.
QuantizedScene quantize_scene_from_bins(BinImage gradient_bins, BinImage normal_bins, int spread_radius,
                                        const QuantizationConfig& cfg);

/// Fraction of the template's feature response at top-left position
/// (row, col). Exact hits weigh 1, adjacent bins cos(pi/8).
double similarity(const Template& tpl, const QuantizedScene& scene, int row, int col);

/// Every (template, position) pair scoring >= threshold on a stride grid,
/// ordered by (object, template, row, col).
std::vector<Match> match_templates(const QuantizedScene& scene, const TemplateStore& store, double threshold,
                                   int stride, int threads = 1);

}  // namespace tmpose
