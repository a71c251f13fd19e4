#include "synthal/io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace synthal::io {

namespace {

using json = nlohmann::json;

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint32_t get_u32(std::string_view in, std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
    return v;
}

std::uint8_t quantise(double v) { return static_cast<std::uint8_t>(std::lround(clamp01(v) * 255.0)); }

struct PngPixels {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> data;
};

PngPixels decode_png_file(const fs::path& path, std::uint32_t format, int channels) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.c_str())) {
        throw DatasetError("cannot read PNG '" + path.string() + "': " + image.message);
    }
    image.format = format;
    PngPixels px;
    px.height = static_cast<int>(image.height);
    px.width = static_cast<int>(image.width);
    px.data.resize(static_cast<std::size_t>(px.height) * px.width * channels);
    if (!png_image_finish_read(&image, nullptr, px.data.data(), 0, nullptr)) {
        png_image_free(&image);
        throw DatasetError("cannot decode PNG '" + path.string() + "': " + image.message);
    }
    return px;
}

std::string encode_png_bytes(const std::uint8_t* data, int height, int width, std::uint32_t format) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(width);
    image.height = static_cast<png_uint_32>(height);
    image.format = format;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&image, nullptr, &size, 0, data, 0, nullptr)) {
        throw FormatError(std::string("PNG encode failed: ") + image.message);
    }
    std::string out(size, '\0');
    if (!png_image_write_to_memory(&image, out.data(), &size, 0, data, 0, nullptr)) {
        throw FormatError(std::string("PNG encode failed: ") + image.message);
    }
    out.resize(size);
    return out;
}

Split parse_split(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "test") return Split::test;
    throw DatasetError("unknown split '" + s + "'");
}

}  // namespace

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DatasetError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const fs::path& path, std::string_view bytes) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const auto tag = std::hash<std::thread::id>{}(std::this_thread::get_id());
    fs::path tmp = path;
    tmp += ".tmp" + std::to_string(tag);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DatasetError("cannot write '" + tmp.string() + "'");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw DatasetError("short write to '" + tmp.string() + "'");
    }
    fs::rename(tmp, path);
}

RasterImage read_image(const fs::path& path) {
    const PngPixels px = decode_png_file(path, PNG_FORMAT_RGB, 3);
    RasterImage img(px.height, px.width);
    auto v = img.values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = px.data[i] / 255.0;
    return img;
}

BinaryMask read_mask(const fs::path& path) {
    const PngPixels px = decode_png_file(path, PNG_FORMAT_GRAY, 1);
    BinaryMask mask(px.height, px.width);
    auto v = mask.values();
    for (std::size_t i = 0; i < v.size(); ++i) {
        const auto p = px.data[i];
        if (p != 0 && p != 255) {
            throw DatasetError("non-binary mask '" + path.string() + "' (value " + std::to_string(p) + ")");
        }
        v[i] = p ? 1 : 0;
    }
    return mask;
}

std::string encode_png(const RasterImage& image) {
    std::vector<std::uint8_t> bytes(image.values().size());
    const auto v = image.values();
    for (std::size_t i = 0; i < v.size(); ++i) bytes[i] = quantise(v[i]);
    return encode_png_bytes(bytes.data(), image.height(), image.width(), PNG_FORMAT_RGB);
}

std::string encode_png(const BinaryMask& mask) {
    std::vector<std::uint8_t> bytes(mask.values().size());
    const auto v = mask.values();
    for (std::size_t i = 0; i < v.size(); ++i) bytes[i] = v[i] ? 255 : 0;
    return encode_png_bytes(bytes.data(), mask.height(), mask.width(), PNG_FORMAT_GRAY);
}

void write_image(const fs::path& path, const RasterImage& image) { write_file_atomic(path, encode_png(image)); }

void write_mask(const fs::path& path, const BinaryMask& mask) { write_file_atomic(path, encode_png(mask)); }

std::string encode_stack(const query::ProbabilityStack& stack) {
    std::string out;
    out.reserve(kStackHeaderBytes + stack.values().size() * 4);
    out.append(kStackMagic);
    put_u32(out, kStackVersion);
    put_u32(out, static_cast<std::uint32_t>(stack.members()));
    put_u32(out, static_cast<std::uint32_t>(stack.classes()));
    put_u32(out, static_cast<std::uint32_t>(stack.height()));
    put_u32(out, static_cast<std::uint32_t>(stack.width()));
    for (float f : stack.values()) put_u32(out, std::bit_cast<std::uint32_t>(f));
    return out;
}

query::ProbabilityStack decode_stack(std::string_view bytes) {
    if (bytes.size() < kStackHeaderBytes) throw FormatError("stack header truncated");
    if (bytes.substr(0, 4) != kStackMagic) throw FormatError("bad stack magic");
    const std::uint32_t version = get_u32(bytes, 4);
    if (version != kStackVersion) throw FormatError("unsupported stack version " + std::to_string(version));
    const std::uint32_t t = get_u32(bytes, 8);
    const std::uint32_t c = get_u32(bytes, 12);
    const std::uint32_t h = get_u32(bytes, 16);
    const std::uint32_t w = get_u32(bytes, 20);
    constexpr std::uint64_t kMaxDim = 1u << 20;
    if (t == 0 || c == 0 || h == 0 || w == 0 || t > kMaxDim || c > kMaxDim || h > kMaxDim || w > kMaxDim) {
        throw FormatError("stack header holds invalid dimensions");
    }
    const std::uint64_t count = std::uint64_t{t} * c * h * w;
    const std::uint64_t expected = kStackHeaderBytes + 4 * count;
    if (bytes.size() < expected) throw FormatError("stack payload truncated");
    if (bytes.size() > expected) throw FormatError("stack payload has trailing bytes");
    std::vector<float> data(static_cast<std::size_t>(count));
    for (std::size_t i = 0; i < data.size(); ++i) {
        data[i] = std::bit_cast<float>(get_u32(bytes, kStackHeaderBytes + 4 * i));
    }
    try {
        query::ProbabilityStack stack(static_cast<int>(t), static_cast<int>(c), static_cast<int>(h),
                                      static_cast<int>(w), std::move(data));
        stack.validate();
        return stack;
    } catch (const InvalidStack& e) {
        throw FormatError(e.detail());
    }
}

query::ProbabilityStack read_probability_stack(const fs::path& path) {
    std::string bytes;
    try {
        bytes = read_file(path);
    } catch (const DatasetError& e) {
        throw FormatError(e.detail());
    }
    try {
        return decode_stack(bytes);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.detail());
    }
}

void write_probability_stack(const fs::path& path, const query::ProbabilityStack& stack) {
    write_file_atomic(path, encode_stack(stack));
}

const char* to_string(Split s) noexcept { return s == Split::train ? "train" : "test"; }

std::vector<const DatasetRecord*> DatasetLayout::split(Split s) const {
    std::vector<const DatasetRecord*> out;
    for (const auto& r : records) {
        if (r.split == s) out.push_back(&r);
    }
    return out;
}

const DatasetRecord* DatasetLayout::find(const std::string& id) const {
    for (const auto& r : records) {
        if (r.id == id) return &r;
    }
    return nullptr;
}

std::string encode_manifest(const std::vector<DatasetRecord>& records) {
    std::string out;
    for (const auto& r : records) {
        json j = {{"id", r.id}, {"image_path", r.image_path}, {"mask_path", r.mask_path}, {"split", to_string(r.split)}};
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::vector<DatasetRecord> parse_manifest(std::string_view text) {
    std::vector<DatasetRecord> records;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const json j = json::parse(line);
            records.push_back({j.at("id").get<std::string>(), j.at("image_path").get<std::string>(),
                               j.at("mask_path").get<std::string>(), parse_split(j.at("split").get<std::string>())});
        } catch (const json::exception& e) {
            throw DatasetError("manifest line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return records;
}

std::vector<std::string> list_png(const fs::path& dir) {
    std::vector<std::string> out;
    if (!fs::is_directory(dir)) return out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".png") out.push_back(e.path().filename().string());
    }
    std::sort(out.begin(), out.end());
    return out;
}

namespace {

struct Scan {
    DatasetLayout layout;
    std::vector<std::string> errors;
};

Scan scan_dataset(const fs::path& root) {
    Scan s;
    s.layout.root = root;
    if (!fs::is_directory(root)) {
        s.errors.push_back("dataset root '" + root.string() + "' does not exist");
        return s;
    }
    const fs::path manifest = root / kManifestName;
    if (!fs::exists(manifest)) {
        s.errors.push_back("missing " + std::string(kManifestName) + " in '" + root.string() + "'");
        return s;
    }
    try {
        s.layout.records = parse_manifest(read_file(manifest));
    } catch (const DatasetError& e) {
        s.errors.push_back(e.detail());
        return s;
    }
    if (s.layout.records.empty()) s.errors.push_back("manifest lists no images");

    auto note_size = [&](int h, int w, const std::string& what) {
        if (s.layout.height == 0) {
            s.layout.height = h;
            s.layout.width = w;
        } else if (h != s.layout.height || w != s.layout.width) {
            s.errors.push_back("size mismatch: " + what + " is " + std::to_string(h) + "x" + std::to_string(w) +
                               ", dataset frame is " + std::to_string(s.layout.height) + "x" +
                               std::to_string(s.layout.width));
        }
    };

    std::set<std::string> seen;
    for (const auto& r : s.layout.records) {
        if (!seen.insert(r.id).second) s.errors.push_back("duplicate id '" + r.id + "'");
        const fs::path img = root / r.image_path;
        const fs::path msk = root / r.mask_path;
        bool ok = true;
        if (!fs::exists(img)) {
            s.errors.push_back("missing image for '" + r.id + "': " + r.image_path);
            ok = false;
        }
        if (!fs::exists(msk)) {
            s.errors.push_back("missing mask for '" + r.id + "': " + r.mask_path);
            ok = false;
        }
        if (!ok) continue;
        try {
            const RasterImage image = read_image(img);
            const BinaryMask mask = read_mask(msk);
            if (!image.same_shape(mask)) {
                s.errors.push_back("size mismatch between image and mask of '" + r.id + "'");
            }
            note_size(image.height(), image.width(), "'" + r.id + "'");
        } catch (const DatasetError& e) {
            s.errors.push_back(e.detail());
        }
    }
    for (const auto& name : list_png(root / "backgrounds")) {
        const std::string rel = "backgrounds/" + name;
        try {
            const RasterImage bg = read_image(root / rel);
            note_size(bg.height(), bg.width(), rel);
            s.layout.backgrounds.push_back(rel);
        } catch (const DatasetError& e) {
            s.errors.push_back(e.detail());
        }
    }
    return s;
}

}  // namespace

std::vector<std::string> validate_dataset(const fs::path& root) { return scan_dataset(root).errors; }

DatasetLayout load_dataset(const fs::path& root) {
    Scan s = scan_dataset(root);
    if (!s.errors.empty()) {
        std::string msg = std::to_string(s.errors.size()) + " dataset violation(s):";
        for (const auto& e : s.errors) msg += "\n  " + e;
        throw DatasetError(msg);
    }
    return std::move(s.layout);
}

}  // namespace synthal::io
