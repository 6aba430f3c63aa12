#include "tmpose/config.hpp"

#include "tmpose/error.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

namespace tmpose {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// Drops a trailing # comment that is not inside a string.
std::string strip_comment(const std::string& line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '\\' && quoted) {
            ++i;
        } else if (line[i] == '"') {
            quoted = !quoted;
        } else if (line[i] == '#' && !quoted) {
            return line.substr(0, i);
        }
    }
    return line;
}

bool bare_key(const std::string& k) {
    if (k.empty()) return false;
    for (char c : k) {
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) return false;
    }
    return true;
}

double to_double(const std::string& key, const std::string& raw) {
    double v = 0.0;
    const auto* end = raw.data() + raw.size();
    const auto res = std::from_chars(raw.data(), end, v);
    if (res.ec != std::errc() || res.ptr != end) throw ConfigError(key + ": expected a number, got '" + raw + "'");
    return v;
}

long long to_int(const std::string& key, const std::string& raw) {
    long long v = 0;
    const auto* end = raw.data() + raw.size();
    const auto res = std::from_chars(raw.data(), end, v);
    if (res.ec != std::errc() || res.ptr != end) throw ConfigError(key + ": expected an integer, got '" + raw + "'");
    return v;
}

bool to_bool(const std::string& key, const std::string& raw) {
    if (raw == "true") return true;
    if (raw == "false") return false;
    throw ConfigError(key + ": expected true or false, got '" + raw + "'");
}

std::string to_string_value(const std::string& key, const std::string& raw) {
    if (raw.size() < 2 || raw.front() != '"' || raw.back() != '"') {
        throw ConfigError(key + ": expected a quoted string, got '" + raw + "'");
    }
    std::string out;
    for (std::size_t i = 1; i + 1 < raw.size(); ++i) {
        if (raw[i] == '\\') {
            if (i + 2 >= raw.size()) throw ConfigError(key + ": dangling escape");
            const char c = raw[++i];
            if (c == 'n') {
                out += '\n';
            } else if (c == 't') {
                out += '\t';
            } else {
                out += c;
            }
        } else if (raw[i] == '"') {
            throw ConfigError(key + ": unescaped quote in string");
        } else {
            out += raw[i];
        }
    }
    return out;
}

std::vector<double> to_double_list(const std::string& key, const std::string& raw) {
    if (raw.size() < 2 || raw.front() != '[' || raw.back() != ']') {
        throw ConfigError(key + ": expected a [list] of numbers");
    }
    std::vector<double> out;
    std::stringstream ss(raw.substr(1, raw.size() - 2));
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        out.push_back(to_double(key, item));
    }
    return out;
}

std::string fmt(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    std::string s(buf, res.ptr);
    // Keep a decimal point so the value reads back as a float.
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    return s;
}

std::string fmt(long long v) { return std::to_string(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }

std::string quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') {
            out += '\\';
            out += c;
        } else if (c == '\n') {
            out += "\\n";
        } else if (c == '\t') {
            out += "\\t";
        } else {
            out += c;
        }
    }
    return out + "\"";
}

std::string fmt_list(const std::vector<double>& v) {
    std::string out = "[";
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + fmt(v[i]);
    return out + "]";
}

struct Field {
    std::string key;  // "table.name"
    std::function<void(PipelineConfig&, const std::string& key, const std::string& raw)> set;
    std::function<std::string(const PipelineConfig&)> get;
};

#define TM_DOUBLE(path, member)                                                                                \
    Field {                                                                                                    \
        path, [](PipelineConfig& c, const std::string& k, const std::string& r) { c.member = to_double(k, r); }, \
            [](const PipelineConfig& c) { return fmt(static_cast<double>(c.member)); }                         \
    }
#define TM_INT(path, member)                                                                                    \
    Field {                                                                                                     \
        path,                                                                                                   \
            [](PipelineConfig& c, const std::string& k, const std::string& r) {                                 \
                c.member = static_cast<decltype(c.member)>(to_int(k, r));                                       \
            },                                                                                                  \
            [](const PipelineConfig& c) { return fmt(static_cast<long long>(c.member)); }                       \
    }
#define TM_BOOL(path, member)                                                                                   \
    Field {                                                                                                     \
        path, [](PipelineConfig& c, const std::string& k, const std::string& r) { c.member = to_bool(k, r); },  \
            [](const PipelineConfig& c) { return fmt(static_cast<bool>(c.member)); }                            \
    }

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        TM_INT("seed", seed),
        TM_INT("threads", threads),
        TM_DOUBLE("camera.fx", camera.fx),
        TM_DOUBLE("camera.fy", camera.fy),
        TM_DOUBLE("camera.cx", camera.cx),
        TM_DOUBLE("camera.cy", camera.cy),
        TM_INT("camera.width", camera.width),
        TM_INT("camera.height", camera.height),
        TM_INT("training.viewpoints", training.viewpoints),
        TM_DOUBLE("training.inplane_min_deg", training.inplane.min_deg),
        TM_DOUBLE("training.inplane_max_deg", training.inplane.max_deg),
        TM_DOUBLE("training.inplane_step_deg", training.inplane.step_deg),
        Field{"training.radii",
              [](PipelineConfig& c, const std::string& k, const std::string& r) {
                  c.training.radii = to_double_list(k, r);
              },
              [](const PipelineConfig& c) { return fmt_list(c.training.radii); }},
        TM_INT("quantization.gradient_bins", quantization.gradient_bins),
        TM_INT("quantization.normal_bins", quantization.normal_bins),
        TM_INT("quantization.feature_budget", quantization.feature_budget),
        TM_INT("quantization.min_spacing", quantization.min_spacing),
        TM_INT("quantization.min_features", quantization.min_features),
        TM_DOUBLE("quantization.gradient_threshold", quantization.gradient_threshold),
        TM_DOUBLE("normals.discontinuity_threshold", normals.discontinuity_threshold),
        TM_INT("normals.step", normals.step),
        TM_INT("normals.smoothing_radius", normals.smoothing_radius),
        TM_DOUBLE("matching.threshold", matching.threshold),
        TM_INT("matching.spread", matching.spread),
        TM_INT("matching.stride", matching.stride),
        TM_INT("detection.s_im", s_im),
        TM_DOUBLE("detection.nms_radius", nms_radius),
        TM_DOUBLE("pose.orientation_threshold_deg", orientation_threshold_deg),
        TM_DOUBLE("pose.depth_gate", depth_gate),
        TM_INT("pose.orientation_candidates", orientation_candidates),
        TM_INT("refine.rounds", refine_rounds),
        TM_DOUBLE("refine.rough_weight", refine.rough_weight),
        TM_DOUBLE("refine.fine_weight", refine.fine_weight),
        TM_INT("refine.max_iter_rough", refine.max_iter_rough),
        TM_INT("refine.max_iter_fine", refine.max_iter_fine),
        TM_DOUBLE("refine.convergence_eps", refine.convergence_eps),
        TM_DOUBLE("refine.mls_radius", refine.mls_radius),
        TM_INT("refine.mls_order", refine.mls_order),
        TM_DOUBLE("refine.voxel_leaf", refine.voxel_leaf),
        TM_DOUBLE("verify.octree_resolution", octree_resolution),
        TM_DOUBLE("verify.occlusion_margin", occlusion_margin),
        TM_DOUBLE("eval.k_m", k_m),
        TM_DOUBLE("synth.depth_sigma", noise.depth_sigma),
        TM_DOUBLE("synth.dropout", noise.dropout),
        TM_BOOL("synth.quantize_mm", noise.quantize_mm),
        TM_INT("synth.min_instances", sampler.min_instances),
        TM_INT("synth.max_instances", sampler.max_instances),
        TM_DOUBLE("synth.min_distance", sampler.min_distance),
        TM_DOUBLE("synth.max_distance", sampler.max_distance),
        TM_DOUBLE("synth.inplane_min_deg", sampler.inplane_min_deg),
        TM_DOUBLE("synth.inplane_max_deg", sampler.inplane_max_deg),
        TM_INT("synth.border", sampler.border),
        TM_DOUBLE("synth.min_visible_fraction", sampler.min_visible_fraction),
        TM_INT("synth.max_attempts", sampler.max_attempts),
    };
    return table;
}

#undef TM_DOUBLE
#undef TM_INT
#undef TM_BOOL

void set_object_field(PipelineConfig& c, const std::string& id, const std::string& name, const std::string& key,
                      const std::string& raw, const std::string& base_dir) {
    ObjectConfig& o = c.objects[id];
    if (name == "mesh") {
        const std::filesystem::path p(to_string_value(key, raw));
        o.mesh = (p.is_absolute() ? p : std::filesystem::path(base_dir) / p).lexically_normal().string();
    } else if (name == "min_cluster_size") {
        o.min_cluster_size = static_cast<int>(to_int(key, raw));
    } else if (name == "collision_threshold") {
        o.collision_threshold = to_double(key, raw);
    } else if (name == "symmetric") {
        o.symmetric = to_bool(key, raw);
    } else {
        throw ConfigError("unknown config key: " + key);
    }
}

void assign(PipelineConfig& c, const std::string& key, const std::string& raw, const std::string& base_dir) {
    if (key.rfind("objects.", 0) == 0) {
        const std::string rest = key.substr(8);
        const auto dot = rest.rfind('.');
        if (dot == std::string::npos || !bare_key(rest.substr(0, dot))) {
            throw ConfigError("object keys look like objects.<id>.<field>: " + key);
        }
        set_object_field(c, rest.substr(0, dot), rest.substr(dot + 1), key, raw, base_dir);
        return;
    }
    for (const auto& f : fields()) {
        if (f.key == key) {
            f.set(c, key, raw);
            return;
        }
    }
    throw ConfigError("unknown config key: " + key);
}

}  // namespace

void PipelineConfig::validate() const {
    if (!camera.is_valid() || camera.width <= 0 || camera.height <= 0) throw ConfigError("camera intrinsics invalid");
    if (training.viewpoints < 1) throw ConfigError("training.viewpoints must be >= 1");
    if (training.inplane.step_deg < 0.0 || training.inplane.max_deg < training.inplane.min_deg) {
        throw ConfigError("training in-plane range invalid");
    }
    if (training.radii.empty()) throw ConfigError("training.radii must not be empty");
    for (double r : training.radii) {
        if (!(r > 0.0)) throw ConfigError("training.radii must be > 0");
    }
    quantization.validate();
    if (normals.step < 1 || normals.smoothing_radius < 0 || !(normals.discontinuity_threshold > 0.0)) {
        throw ConfigError("normals options invalid");
    }
    if (!(matching.threshold > 0.0 && matching.threshold <= 1.0)) throw ConfigError("matching.threshold must be in (0, 1]");
    if (matching.spread < 0) throw ConfigError("matching.spread must be >= 0");
    if (matching.stride < 1) throw ConfigError("matching.stride must be >= 1");
    if (s_im < 1) throw ConfigError("detection.s_im must be >= 1");
    if (!(nms_radius >= 0.0)) throw ConfigError("detection.nms_radius must be >= 0");
    if (!(orientation_threshold_deg > 0.0)) throw ConfigError("pose.orientation_threshold_deg must be > 0");
    if (!(depth_gate > 0.0)) throw ConfigError("pose.depth_gate must be > 0");
    if (orientation_candidates < 1) throw ConfigError("pose.orientation_candidates must be >= 1");
    if (refine_rounds < 1) throw ConfigError("refine.rounds must be >= 1");
    refine.validate();
    if (!(octree_resolution > 0.0)) throw ConfigError("verify.octree_resolution must be > 0");
    if (!(occlusion_margin > 0.0)) throw ConfigError("verify.occlusion_margin must be > 0");
    if (!(k_m > 0.0)) throw ConfigError("eval.k_m must be > 0");
    if (!(noise.depth_sigma >= 0.0) || !(noise.dropout >= 0.0 && noise.dropout <= 1.0)) {
        throw ConfigError("synth noise parameters invalid");
    }
    if (sampler.min_instances < 0 || sampler.max_instances < sampler.min_instances) {
        throw ConfigError("synth instance count range invalid");
    }
    if (!(sampler.min_distance > 0.0 && sampler.max_distance >= sampler.min_distance)) {
        throw ConfigError("synth distance range invalid");
    }
    if (threads < 0) throw ConfigError("threads must be >= 0");
    for (const auto& [id, o] : objects) {
        if (o.mesh.empty()) throw ConfigError("objects." + id + ".mesh is required");
        if (!std::filesystem::exists(o.mesh)) throw ConfigError("objects." + id + ".mesh not found: " + o.mesh);
        if (o.min_cluster_size < 1) throw ConfigError("objects." + id + ".min_cluster_size must be >= 1");
        if (!(o.collision_threshold >= 0.0 && o.collision_threshold <= 1.0)) {
            throw ConfigError("objects." + id + ".collision_threshold must be in [0, 1]");
        }
    }
}

PipelineConfig parse_config(const std::string& text, const std::string& base_dir,
                            const std::vector<std::string>& overrides) {
    PipelineConfig c;
    std::stringstream in(text);
    std::string line;
    std::string table;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(strip_comment(line));
        if (line.empty()) continue;
        const std::string where = "line " + std::to_string(line_no) + ": ";
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(where + "unterminated table header");
            table = trim(line.substr(1, line.size() - 2));
            std::stringstream parts(table);
            std::string part;
            while (std::getline(parts, part, '.')) {
                if (!bare_key(part)) throw ConfigError(where + "bad table name '" + table + "'");
            }
            if (table.rfind("objects.", 0) == 0) c.objects[table.substr(8)];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
        const std::string name = trim(line.substr(0, eq));
        const std::string raw = trim(line.substr(eq + 1));
        if (!bare_key(name)) throw ConfigError(where + "bad key '" + name + "'");
        try {
            assign(c, table.empty() ? name : table + "." + name, raw, base_dir);
        } catch (const ConfigError& e) {
            throw ConfigError(where + e.what());
        }
    }
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) throw ConfigError("override needs key=value: " + o);
        const std::string key = trim(o.substr(0, eq));
        std::string raw = trim(o.substr(eq + 1));
        // Let string overrides skip the quotes on the command line.
        if (key.size() > 5 && key.compare(key.size() - 5, 5, ".mesh") == 0 && (raw.empty() || raw.front() != '"')) {
            raw = quote(raw);
        }
        assign(c, key, raw, ".");
    }
    return c;
}

PipelineConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    // Absolute base so dumped mesh paths stay valid from any directory.
    const auto dir = std::filesystem::absolute(path).parent_path();
    return parse_config(ss.str(), dir.string(), overrides);
}

std::string dump_config(const PipelineConfig& c) {
    std::string out;
    std::string table;
    for (const auto& f : fields()) {
        const auto dot = f.key.find('.');
        const std::string t = dot == std::string::npos ? "" : f.key.substr(0, dot);
        const std::string name = dot == std::string::npos ? f.key : f.key.substr(dot + 1);
        if (t != table) {
            out += "\n[" + t + "]\n";
            table = t;
        }
        out += name + " = " + f.get(c) + "\n";
    }
    for (const auto& [id, o] : c.objects) {
        out += "\n[objects." + id + "]\n";
        out += "mesh = " + quote(o.mesh) + "\n";
        out += "min_cluster_size = " + fmt(static_cast<long long>(o.min_cluster_size)) + "\n";
        out += "collision_threshold = " + fmt(o.collision_threshold) + "\n";
        out += "symmetric = " + fmt(o.symmetric) + "\n";
    }
    return out;
}

}  // namespace tmpose
