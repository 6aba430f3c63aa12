#include "tmpose/templates.hpp"

#include "tmpose/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>

namespace tmpose {

void QuantizationConfig::validate() const {
    if (gradient_bins < 2 || gradient_bins > 8) throw ConfigError("gradient_bins must be in [2, 8]");
    if (normal_bins < 2 || normal_bins > 8) throw ConfigError("normal_bins must be in [2, 8]");
    if (feature_budget < 1 || feature_budget > 1024) throw ConfigError("feature_budget must be in [1, 1024]");
    if (min_spacing < 1) throw ConfigError("min_spacing must be >= 1");
    if (min_features < 1 || min_features > feature_budget) {
        throw ConfigError("min_features must be in [1, feature_budget]");
    }
    if (!(gradient_threshold >= 0.0)) throw ConfigError("gradient_threshold must be >= 0");
}

int quantize_gradient(double angle, int bins) {
    double a = std::fmod(angle, M_PI);
    if (a < 0.0) a += M_PI;
    if (a >= M_PI) a = 0.0;
    int k = static_cast<int>(std::floor(a * bins / M_PI));
    k = std::clamp(k, 0, bins - 1);
    // Settle boundary rounding against the interval edges k*pi/bins.
    while (k > 0 && a < k * M_PI / bins) --k;
    while (k + 1 < bins && a >= (k + 1) * M_PI / bins) ++k;
    return k;
}

const std::vector<Vec3>& normal_cone_axes(int bins) {
    static std::mutex mutex;
    static std::map<int, std::vector<Vec3>> cache;
    std::lock_guard lock(mutex);
    auto it = cache.find(bins);
    if (it != cache.end()) return it->second;
    std::vector<Vec3> axes;
    axes.emplace_back(0.0, 0.0, -1.0);
    const int ring = bins - 1;
    const double tilt = M_PI / 4.0;
    for (int k = 0; k < ring; ++k) {
        const double phi = 2.0 * M_PI * k / ring;
        axes.emplace_back(std::sin(tilt) * std::cos(phi), std::sin(tilt) * std::sin(phi), -std::cos(tilt));
    }
    return cache.emplace(bins, std::move(axes)).first->second;
}

int quantize_normal(const Vec3& n, int bins) {
    const auto& axes = normal_cone_axes(bins);
    int best = 0;
    double best_dot = n.dot(axes[0]);
    for (int k = 1; k < static_cast<int>(axes.size()); ++k) {
        const double d = n.dot(axes[k]);
        if (d > best_dot) {
            best_dot = d;
            best = k;
        }
    }
    return best;
}

int response_level(Modality m, int feature_bin, int scene_bin, int bins) {
    if (scene_bin < 0) return 0;
    if (feature_bin == scene_bin) return 2;
    if (m == Modality::Gradient) {
        const int diff = std::abs(feature_bin - scene_bin);
        return (diff == 1 || diff == bins - 1) ? 1 : 0;
    }
    // Normal cones: the fronto cone touches every ring cone; ring cones touch
    // their two ring neighbours.
    if (feature_bin == 0 || scene_bin == 0) return 1;
    const int ring = bins - 1;
    const int diff = std::abs(feature_bin - scene_bin);
    return (diff == 1 || diff == ring - 1) ? 1 : 0;
}

GradientField sobel_gradients(const GrayImage& img) {
    const int w = img.width();
    const int h = img.height();
    GradientField g{Image<double>(w, h, 0.0), Image<double>(w, h, 0.0)};
    for (int r = 1; r + 1 < h; ++r) {
        for (int c = 1; c + 1 < w; ++c) {
            auto px = [&](int dr, int dc) { return static_cast<double>(img.at(r + dr, c + dc)); };
            const double gx = (px(-1, 1) + 2.0 * px(0, 1) + px(1, 1)) - (px(-1, -1) + 2.0 * px(0, -1) + px(1, -1));
            const double gy = (px(1, -1) + 2.0 * px(1, 0) + px(1, 1)) - (px(-1, -1) + 2.0 * px(-1, 0) + px(-1, 1));
            g.magnitude.at(r, c) = std::hypot(gx, gy);
            g.angle.at(r, c) = std::atan2(gy, gx);
        }
    }
    return g;
}

BinImage quantize_gradient_image(const GrayImage& intensity, const QuantizationConfig& cfg) {
    const GradientField g = sobel_gradients(intensity);
    BinImage out(intensity.width(), intensity.height(), -1);
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (g.magnitude[i] >= cfg.gradient_threshold && g.magnitude[i] > 0.0) {
            out[i] = static_cast<std::int8_t>(quantize_gradient(g.angle[i], cfg.gradient_bins));
        }
    }
    return out;
}

BinImage quantize_normal_image(const NormalMap& normals, const QuantizationConfig& cfg) {
    BinImage out(normals.width, normals.height, -1);
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (normals.valid[i]) out[i] = static_cast<std::int8_t>(quantize_normal(normals.normals[i], cfg.normal_bins));
    }
    return out;
}

namespace {

struct Candidate {
    int row;
    int col;
    int bin;
    double score;
};

// Greedy scattered selection: the largest spacing (down to min_spacing) at
// which the score-ordered greedy pass collects the full budget.
std::vector<Candidate> select_scattered(std::vector<Candidate> cands, int budget, int min_spacing) {
    std::stable_sort(cands.begin(), cands.end(),
                     [](const Candidate& a, const Candidate& b) { return a.score > b.score; });
    if (cands.empty()) return {};

    int spacing = std::max(min_spacing, static_cast<int>(std::sqrt(static_cast<double>(cands.size()))));
    int max_r = 0, max_c = 0;
    for (const auto& c : cands) {
        max_r = std::max(max_r, c.row);
        max_c = std::max(max_c, c.col);
    }
    std::vector<Candidate> chosen;
    for (;; --spacing) {
        chosen.clear();
        const int cell = spacing;
        const int grid_w = max_c / cell + 1;
        const int grid_h = max_r / cell + 1;
        std::vector<std::vector<int>> grid(static_cast<std::size_t>(grid_w) * grid_h);
        const int sq = spacing * spacing;
        for (const auto& c : cands) {
            const int gr = c.row / cell;
            const int gc = c.col / cell;
            bool ok = true;
            for (int dr = -1; dr <= 1 && ok; ++dr) {
                for (int dc = -1; dc <= 1 && ok; ++dc) {
                    const int r = gr + dr;
                    const int q = gc + dc;
                    if (r < 0 || q < 0 || r >= grid_h || q >= grid_w) continue;
                    for (int idx : grid[static_cast<std::size_t>(r) * grid_w + q]) {
                        const int er = chosen[idx].row - c.row;
                        const int ec = chosen[idx].col - c.col;
                        if (er * er + ec * ec < sq) {
                            ok = false;
                            break;
                        }
                    }
                }
            }
            if (!ok) continue;
            grid[static_cast<std::size_t>(gr) * grid_w + gc].push_back(static_cast<int>(chosen.size()));
            chosen.push_back(c);
            if (static_cast<int>(chosen.size()) >= budget) break;
        }
        if (static_cast<int>(chosen.size()) >= budget || spacing <= min_spacing) break;
    }
    if (static_cast<int>(chosen.size()) > budget) chosen.resize(static_cast<std::size_t>(budget));
    return chosen;
}

}  // namespace

Template extract_template(const GrayImage& intensity, const DepthImage& depth, const NormalMap& normals,
                          const Mask& mask, const Pose& train_pose, const std::string& object_id,
                          const QuantizationConfig& cfg) {
    const int w = mask.width();
    const int h = mask.height();
    if (intensity.width() != w || intensity.height() != h || depth.width() != w || depth.height() != h ||
        normals.width != w || normals.height != h) {
        throw DegenerateInput("extract_template: image dimensions differ");
    }
    int r0 = h, r1 = -1, c0 = w, c1 = -1;
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            if (!mask.at(r, c)) continue;
            r0 = std::min(r0, r);
            r1 = std::max(r1, r);
            c0 = std::min(c0, c);
            c1 = std::max(c1, c);
        }
    }
    if (r1 < 0) throw EmptyMask("extract_template: empty mask");
    r0 = std::max(0, r0 - 1);
    c0 = std::max(0, c0 - 1);
    r1 = std::min(h - 1, r1 + 1);
    c1 = std::min(w - 1, c1 + 1);

    auto in_mask = [&](int r, int c) { return mask.contains(r, c) && mask.at(r, c) != 0; };

    const GradientField grad = sobel_gradients(intensity);
    std::vector<Candidate> grad_cands;
    std::vector<Candidate> normal_cands;
    for (int r = r0; r <= r1; ++r) {
        for (int c = c0; c <= c1; ++c) {
            bool near_mask = false;
            for (int dr = -1; dr <= 1 && !near_mask; ++dr) {
                for (int dc = -1; dc <= 1 && !near_mask; ++dc) near_mask = in_mask(r + dr, c + dc);
            }
            const double mag = grad.magnitude.at(r, c);
            if (near_mask && mag >= cfg.gradient_threshold && mag > 0.0) {
                grad_cands.push_back({r - r0, c - c0, quantize_gradient(grad.angle.at(r, c), cfg.gradient_bins), mag});
            }

            const bool interior = in_mask(r, c) && in_mask(r - 1, c) && in_mask(r + 1, c) && in_mask(r, c - 1) &&
                                  in_mask(r, c + 1);
            if (!interior || !normals.is_valid(r, c)) continue;
            const Vec3& n = normals.at(r, c);
            double agreement = 0.0;
            int count = 0;
            for (int dr = -1; dr <= 1; ++dr) {
                for (int dc = -1; dc <= 1; ++dc) {
                    if ((dr == 0 && dc == 0) || !normals.is_valid(r + dr, c + dc)) continue;
                    agreement += n.dot(normals.at(r + dr, c + dc));
                    ++count;
                }
            }
            if (count == 0) continue;
            normal_cands.push_back({r - r0, c - c0, quantize_normal(n, cfg.normal_bins), agreement / count});
        }
    }

    const auto grads = select_scattered(std::move(grad_cands), cfg.feature_budget, cfg.min_spacing);
    const auto norms = select_scattered(std::move(normal_cands), cfg.feature_budget, cfg.min_spacing);
    if (static_cast<int>(grads.size()) < cfg.min_features || static_cast<int>(norms.size()) < cfg.min_features) {
        throw TooFewFeatures("extract_template: " + std::to_string(grads.size()) + " gradient / " +
                             std::to_string(norms.size()) + " normal features");
    }

    Template t;
    t.rows = r1 - r0 + 1;
    t.cols = c1 - c0 + 1;
    t.offset_row = r0;
    t.offset_col = c0;
    t.train_pose = train_pose;
    t.train_distance = train_pose.translation.norm();
    t.object_id = object_id;
    // Interleave the modalities so early features sample both.
    const std::size_t n = std::max(grads.size(), norms.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (i < grads.size()) t.features.push_back({Modality::Gradient, grads[i].row, grads[i].col, grads[i].bin});
        if (i < norms.size()) t.features.push_back({Modality::Normal, norms[i].row, norms[i].col, norms[i].bin});
    }
    return t;
}

const ObjectTemplates* TemplateStore::find(const std::string& object_id) const {
    for (const auto& o : objects) {
        if (o.object_id == object_id) return &o;
    }
    return nullptr;
}

std::size_t TemplateStore::template_count() const {
    std::size_t n = 0;
    for (const auto& o : objects) n += o.templates.size();
    return n;
}

}  // namespace tmpose
