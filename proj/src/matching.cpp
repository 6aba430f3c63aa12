#include "tmpose/matching.hpp"

#include "tmpose/error.hpp"
#include "tmpose/parallel.hpp"

#include <algorithm>

namespace tmpose {

Image<std::uint8_t> spread_bins(const BinImage& bins, int radius) {
    const int w = bins.width();
    const int h = bins.height();
    Image<std::uint8_t> bits(w, h, 0);
    for (std::size_t i = 0; i < bins.size(); ++i) {
        if (bins[i] >= 0) bits[i] = static_cast<std::uint8_t>(1u << bins[i]);
    }
    Image<std::uint8_t> horiz(w, h, 0);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            std::uint8_t acc = 0;
            for (int k = std::max(0, c - radius); k <= std::min(w - 1, c + radius); ++k) acc |= bits.at(r, k);
            horiz.at(r, c) = acc;
        }
    }
    Image<std::uint8_t> out(w, h, 0);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            std::uint8_t acc = 0;
            for (int k = std::max(0, r - radius); k <= std::min(h - 1, r + radius); ++k) acc |= horiz.at(k, c);
            out.at(r, c) = acc;
        }
    }
    return out;
}

QuantizedScene quantize_scene_from_bins(BinImage gradient_bins, BinImage normal_bins, int spread_radius,
                                        const QuantizationConfig& cfg) {
    if (gradient_bins.width() != normal_bins.width() || gradient_bins.height() != normal_bins.height()) {
        throw DegenerateInput("quantize_scene: modality images differ in size");
    }
    QuantizedScene s;
    s.width = gradient_bins.width();
    s.height = gradient_bins.height();
    s.spread_radius = spread_radius;
    s.gradient_bins = cfg.gradient_bins;
    s.normal_bins = cfg.normal_bins;
    s.bins[0] = std::move(gradient_bins);
    s.bins[1] = std::move(normal_bins);
    for (int m = 0; m < 2; ++m) {
        s.spread[m] = spread_bins(s.bins[m], spread_radius);
        const auto modality = static_cast<Modality>(m);
        const int nb = s.bin_count(modality);
        for (int b = 0; b < nb; ++b) {
            std::uint8_t adjacent = 0;
            for (int o = 0; o < nb; ++o) {
                if (response_level(modality, b, o, nb) == 1) adjacent |= static_cast<std::uint8_t>(1u << o);
            }
            Image<std::uint8_t> resp(s.width, s.height, 0);
            const std::uint8_t exact = static_cast<std::uint8_t>(1u << b);
            for (std::size_t i = 0; i < resp.size(); ++i) {
                const std::uint8_t bits = s.spread[m][i];
                resp[i] = (bits & exact) ? 2 : ((bits & adjacent) ? 1 : 0);
            }
            s.responses[m].push_back(std::move(resp));
        }
    }
    return s;
}

QuantizedScene quantize_scene(const GrayImage& intensity, const DepthImage& depth, const NormalMap& normals,
                              int spread_radius, const QuantizationConfig& cfg) {
    if (intensity.width() != depth.width() || intensity.height() != depth.height() ||
        normals.width != depth.width() || normals.height != depth.height()) {
        throw DegenerateInput("quantize_scene: inconsistent image dimensions");
    }
    BinImage g = quantize_gradient_image(intensity, cfg);
    BinImage n = quantize_normal_image(normals, cfg);
    for (std::size_t i = 0; i < n.size(); ++i) {
        if (depth[i] <= 0.0) n[i] = -1;
    }
    return quantize_scene_from_bins(std::move(g), std::move(n), spread_radius, cfg);
}

namespace {

struct FeatureLookup {
    const std::uint8_t* map;
    std::ptrdiff_t offset;
};

std::vector<FeatureLookup> lookups_for(const Template& tpl, const QuantizedScene& scene) {
    std::vector<FeatureLookup> out;
    out.reserve(tpl.features.size());
    for (const auto& f : tpl.features) {
        const auto m = static_cast<int>(f.modality);
        out.push_back({scene.responses[m][static_cast<std::size_t>(f.bin)].data().data(),
                       static_cast<std::ptrdiff_t>(f.row) * scene.width + f.col});
    }
    return out;
}

double score_from_counts(int exact, int adjacent, std::size_t n) {
    return (exact + adjacent * kResponseWeight[1]) / static_cast<double>(n);
}

}  // namespace

double similarity(const Template& tpl, const QuantizedScene& scene, int row, int col) {
    if (tpl.features.empty()) return 0.0;
    if (row < 0 || col < 0 || row + tpl.rows > scene.height || col + tpl.cols > scene.width) {
        throw DegenerateInput("similarity: template does not fit at the requested position");
    }
    int exact = 0;
    int adjacent = 0;
    const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(row) * scene.width + col;
    for (const auto& lk : lookups_for(tpl, scene)) {
        const std::uint8_t level = lk.map[base + lk.offset];
        exact += level == 2;
        adjacent += level == 1;
    }
    return score_from_counts(exact, adjacent, tpl.features.size());
}

std::vector<Match> match_templates(const QuantizedScene& scene, const TemplateStore& store, double threshold,
                                   int stride, int threads) {
    if (!(threshold > 0.0 && threshold <= 1.0)) throw DegenerateInput("match_templates: threshold must be in (0, 1]");
    if (stride < 1) throw DegenerateInput("match_templates: stride must be >= 1");

    struct Job {
        const Template* tpl;
        const std::string* object_id;
        int index;
    };
    std::vector<Job> jobs;
    for (const auto& obj : store.objects) {
        for (std::size_t i = 0; i < obj.templates.size(); ++i) {
            jobs.push_back({&obj.templates[i], &obj.object_id, static_cast<int>(i)});
        }
    }

    std::vector<std::vector<Match>> per_job(jobs.size());
    parallel_for(jobs.size(), threads, [&](std::size_t j) {
        const Template& tpl = *jobs[j].tpl;
        const std::size_t n = tpl.features.size();
        if (n == 0 || tpl.rows > scene.height || tpl.cols > scene.width) return;
        const auto lookups = lookups_for(tpl, scene);
        const double w = kResponseWeight[1];
        // Conservative abort bound; the final comparison uses the exact score.
        const double needed = threshold * static_cast<double>(n) - 1e-9;
        auto& out = per_job[j];
        for (int row = 0; row + tpl.rows <= scene.height; row += stride) {
            for (int col = 0; col + tpl.cols <= scene.width; col += stride) {
                const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(row) * scene.width + col;
                int exact = 0;
                int adjacent = 0;
                std::size_t k = 0;
                for (; k < n; ++k) {
                    const std::uint8_t level = lookups[k].map[base + lookups[k].offset];
                    exact += level == 2;
                    adjacent += level == 1;
                    if (level != 2 && exact + adjacent * w + static_cast<double>(n - k - 1) < needed) break;
                }
                if (k < n) continue;
                const double score = score_from_counts(exact, adjacent, n);
                if (score >= threshold) out.push_back({*jobs[j].object_id, jobs[j].index, row, col, score, tpl.train_distance});
            }
        }
    });

    std::vector<Match> all;
    for (auto& v : per_job) {
        all.insert(all.end(), std::make_move_iterator(v.begin()), std::make_move_iterator(v.end()));
    }
    return all;
}

}  // namespace tmpose
