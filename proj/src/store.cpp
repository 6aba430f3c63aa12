// Template store container:
//
//   "TMSTORE\0"                 8 bytes magic
//   u32 format version          little-endian
//   u32 header length
//   header                      UTF-8 JSON: config, object table, record layout, records CRC-32
//   u32 header CRC-32
//   records                     fixed width, see kFixedRecordBytes
//
// A record is: u32 object index, u32 rows, u32 cols, i32 offset_row,
// i32 offset_col, 9 x f64 rotation (row-major), 3 x f64 translation,
// f64 train_distance, u32 feature count, then 2 * feature_budget slots of
// (u8 modality, u8 bin, u16 row, u16 col). Unused slots are zero.

#include "tmpose/error.hpp"
#include "tmpose/templates.hpp"

#include <json.hpp>
#include <zlib.h>

#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace tmpose {

namespace {

constexpr char kMagic[8] = {'T', 'M', 'S', 'T', 'O', 'R', 'E', '\0'};
constexpr std::size_t kFixedRecordBytes = 4 * 5 + 8 * 13 + 4;
constexpr std::size_t kFeatureBytes = 6;

std::size_t record_bytes(const QuantizationConfig& cfg) {
    return kFixedRecordBytes + kFeatureBytes * 2 * static_cast<std::size_t>(cfg.feature_budget);
}

std::uint32_t crc32_of(const std::uint8_t* data, std::size_t n) {
    uLong crc = crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed in chunks.
    while (n > 0) {
        const uInt chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
        crc = crc32(crc, data, chunk);
        data += chunk;
        n -= chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

class Writer {
public:
    explicit Writer(std::vector<std::uint8_t>& buf) : buf_(buf) {}
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u16(std::uint16_t v) {
        for (int i = 0; i < 2; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
    void f64(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        u64(bits);
    }

private:
    std::vector<std::uint8_t>& buf_;
};

class Reader {
public:
    Reader(const std::uint8_t* data, std::size_t n) : p_(data), end_(data + n) {}
    std::uint64_t uint(int bytes) {
        if (static_cast<std::size_t>(end_ - p_) < static_cast<std::size_t>(bytes)) {
            throw CorruptFile("template store: unexpected end of data");
        }
        std::uint64_t v = 0;
        for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(p_[i]) << (8 * i);
        p_ += bytes;
        return v;
    }
    std::uint8_t u8() { return static_cast<std::uint8_t>(uint(1)); }
    std::uint16_t u16() { return static_cast<std::uint16_t>(uint(2)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(uint(4)); }
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    double f64() {
        const std::uint64_t bits = uint(8);
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    void skip(std::size_t n) {
        if (static_cast<std::size_t>(end_ - p_) < n) throw CorruptFile("template store: unexpected end of data");
        p_ += n;
    }

private:
    const std::uint8_t* p_;
    const std::uint8_t* end_;
};

nlohmann::json config_to_json(const QuantizationConfig& c) {
    return {{"gradient_bins", c.gradient_bins},   {"normal_bins", c.normal_bins},
            {"feature_budget", c.feature_budget}, {"min_spacing", c.min_spacing},
            {"min_features", c.min_features},     {"gradient_threshold", c.gradient_threshold}};
}

QuantizationConfig config_from_json(const nlohmann::json& j) {
    QuantizationConfig c;
    c.gradient_bins = j.at("gradient_bins").get<int>();
    c.normal_bins = j.at("normal_bins").get<int>();
    c.feature_budget = j.at("feature_budget").get<int>();
    c.min_spacing = j.at("min_spacing").get<int>();
    c.min_features = j.at("min_features").get<int>();
    c.gradient_threshold = j.at("gradient_threshold").get<double>();
    return c;
}

nlohmann::json camera_to_json(const CameraIntrinsics& c) {
    return {{"fx", c.fx}, {"fy", c.fy}, {"cx", c.cx}, {"cy", c.cy}, {"width", c.width}, {"height", c.height}};
}

CameraIntrinsics camera_from_json(const nlohmann::json& j) {
    CameraIntrinsics c;
    c.fx = j.at("fx").get<double>();
    c.fy = j.at("fy").get<double>();
    c.cx = j.at("cx").get<double>();
    c.cy = j.at("cy").get<double>();
    c.width = j.at("width").get<int>();
    c.height = j.at("height").get<int>();
    return c;
}

}  // namespace

void store_save(const TemplateStore& store, const std::string& path) {
    store.config.validate();
    const std::size_t rec_bytes = record_bytes(store.config);
    const auto slots = static_cast<std::size_t>(2 * store.config.feature_budget);

    std::vector<std::uint8_t> records;
    records.reserve(rec_bytes * store.template_count());
    Writer w(records);
    nlohmann::json objects = nlohmann::json::array();
    for (std::size_t oi = 0; oi < store.objects.size(); ++oi) {
        const auto& obj = store.objects[oi];
        objects.push_back({{"id", obj.object_id}, {"template_count", obj.templates.size()}});
        for (const auto& t : obj.templates) {
            if (t.features.size() > slots) throw Error("template has more features than the store budget allows");
            if (t.object_id != obj.object_id) throw Error("template object_id does not match its object entry");
            w.u32(static_cast<std::uint32_t>(oi));
            w.u32(static_cast<std::uint32_t>(t.rows));
            w.u32(static_cast<std::uint32_t>(t.cols));
            w.i32(t.offset_row);
            w.i32(t.offset_col);
            for (int r = 0; r < 3; ++r) {
                for (int c = 0; c < 3; ++c) w.f64(t.train_pose.rotation(r, c));
            }
            for (int k = 0; k < 3; ++k) w.f64(t.train_pose.translation[k]);
            w.f64(t.train_distance);
            w.u32(static_cast<std::uint32_t>(t.features.size()));
            for (std::size_t k = 0; k < slots; ++k) {
                if (k < t.features.size()) {
                    const auto& f = t.features[k];
                    w.u8(static_cast<std::uint8_t>(f.modality));
                    w.u8(static_cast<std::uint8_t>(f.bin));
                    w.u16(static_cast<std::uint16_t>(f.row));
                    w.u16(static_cast<std::uint16_t>(f.col));
                } else {
                    for (std::size_t b = 0; b < kFeatureBytes; ++b) w.u8(0);
                }
            }
        }
    }

    const nlohmann::json header = {
        {"format", "tmstore"},
        {"version", store.version},
        {"config", config_to_json(store.config)},
        {"camera", camera_to_json(store.camera)},
        {"objects", objects},
        {"record_bytes", rec_bytes},
        {"record_count", store.template_count()},
        {"records_crc32", crc32_of(records.data(), records.size())},
    };
    const std::string header_text = header.dump(2);

    std::vector<std::uint8_t> head;
    Writer hw(head);
    for (char c : kMagic) hw.u8(static_cast<std::uint8_t>(c));
    hw.u32(store.version);
    hw.u32(static_cast<std::uint32_t>(header_text.size()));
    head.insert(head.end(), header_text.begin(), header_text.end());
    hw.u32(crc32_of(reinterpret_cast<const std::uint8_t*>(header_text.data()), header_text.size()));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out.write(reinterpret_cast<const char*>(head.data()), static_cast<std::streamsize>(head.size()));
    out.write(reinterpret_cast<const char*>(records.data()), static_cast<std::streamsize>(records.size()));
    if (!out) throw IoError("write failed: " + path);
}

TemplateStore store_load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    Reader r(bytes.data(), bytes.size());
    for (char c : kMagic) {
        if (r.u8() != static_cast<std::uint8_t>(c)) throw CorruptFile("not a template store: " + path);
    }
    const std::uint32_t version = r.u32();
    if (version != TemplateStore::kFormatVersion) {
        throw VersionMismatch("template store version " + std::to_string(version) + ", expected " +
                              std::to_string(TemplateStore::kFormatVersion));
    }
    const std::uint32_t header_len = r.u32();
    const std::size_t header_pos = 16;
    r.skip(header_len);
    const std::uint32_t header_crc = r.u32();
    const auto* header_ptr = bytes.data() + header_pos;
    if (crc32_of(header_ptr, header_len) != header_crc) throw CorruptFile("template store header checksum mismatch");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_ptr, header_ptr + header_len);
    } catch (const nlohmann::json::exception& e) {
        throw CorruptFile(std::string("template store header: ") + e.what());
    }

    TemplateStore store;
    try {
        store.version = header.at("version").get<std::uint32_t>();
        store.config = config_from_json(header.at("config"));
        store.camera = camera_from_json(header.at("camera"));
        const std::size_t rec_bytes = header.at("record_bytes").get<std::size_t>();
        const std::size_t rec_count = header.at("record_count").get<std::size_t>();
        const auto crc = header.at("records_crc32").get<std::uint32_t>();
        if (rec_bytes != record_bytes(store.config)) throw CorruptFile("template store record size mismatch");

        const std::size_t records_pos = header_pos + header_len + 4;
        if (bytes.size() != records_pos + rec_bytes * rec_count) throw CorruptFile("template store truncated");
        if (crc32_of(bytes.data() + records_pos, rec_bytes * rec_count) != crc) {
            throw CorruptFile("template store records checksum mismatch");
        }
        for (const auto& o : header.at("objects")) {
            ObjectTemplates obj;
            obj.object_id = o.at("id").get<std::string>();
            obj.templates.reserve(o.at("template_count").get<std::size_t>());
            store.objects.push_back(std::move(obj));
        }

        const auto slots = static_cast<std::size_t>(2 * store.config.feature_budget);
        for (std::size_t i = 0; i < rec_count; ++i) {
            Template t;
            const std::uint32_t oi = r.u32();
            if (oi >= store.objects.size()) throw CorruptFile("template store: bad object index");
            t.rows = static_cast<int>(r.u32());
            t.cols = static_cast<int>(r.u32());
            t.offset_row = r.i32();
            t.offset_col = r.i32();
            for (int a = 0; a < 3; ++a) {
                for (int b = 0; b < 3; ++b) t.train_pose.rotation(a, b) = r.f64();
            }
            for (int k = 0; k < 3; ++k) t.train_pose.translation[k] = r.f64();
            t.train_distance = r.f64();
            const std::uint32_t count = r.u32();
            if (count > slots) throw CorruptFile("template store: feature count exceeds budget");
            for (std::size_t k = 0; k < slots; ++k) {
                Feature f;
                const std::uint8_t modality = r.u8();
                f.bin = r.u8();
                f.row = r.u16();
                f.col = r.u16();
                if (k >= count) continue;
                if (modality > 1) throw CorruptFile("template store: bad modality");
                f.modality = static_cast<Modality>(modality);
                t.features.push_back(f);
            }
            t.object_id = store.objects[oi].object_id;
            store.objects[oi].templates.push_back(std::move(t));
        }
        for (const auto& o : header.at("objects")) {
            const auto* obj = store.find(o.at("id").get<std::string>());
            if (!obj || obj->templates.size() != o.at("template_count").get<std::size_t>()) {
                throw CorruptFile("template store: object table does not match records");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw CorruptFile(std::string("template store header: ") + e.what());
    }
    return store;
}

}  // namespace tmpose
