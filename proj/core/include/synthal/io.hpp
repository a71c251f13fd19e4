#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "synthal/query.hpp"
#include "synthal/raster.hpp"

/// File formats and dataset layout.
namespace synthal::io {

namespace fs = std::filesystem;

// ---------------------------------------------------------------- files

std::string read_file(const fs::path& path);

/// Writes to a sibling temporary file then renames over `path`, so readers
/// never observe a partial file.
void write_file_atomic(const fs::path& path, std::string_view bytes);

// ---------------------------------------------------------------- PNG

/// 8-bit RGB PNG -> [0,1] image (grey / alpha inputs are converted).
RasterImage read_image(const fs::path& path);

/// 8-bit greyscale PNG with values {0,255} -> binary mask. Any other
/// value raises DatasetError("non-binary mask ...").
BinaryMask read_mask(const fs::path& path);

/// Quantises to 8 bits (round half away from zero).
void write_image(const fs::path& path, const RasterImage& image);
void write_mask(const fs::path& path, const BinaryMask& mask);

std::string encode_png(const RasterImage& image);
std::string encode_png(const BinaryMask& mask);

// ------------------------------------------------------ probability stacks

/// Header: "PMAP", version, T, C, H, W (uint32 LE each); payload
/// T*C*H*W float32 LE, member-major, class-major, row-major.
inline constexpr std::string_view kStackMagic = "PMAP";
inline constexpr std::uint32_t kStackVersion = 1;
inline constexpr std::size_t kStackHeaderBytes = 4 + 5 * 4;

std::string encode_stack(const query::ProbabilityStack& stack);

/// Throws FormatError on bad magic / version, truncated or oversized
/// payload, or probabilities that do not form distributions.
query::ProbabilityStack decode_stack(std::string_view bytes);

query::ProbabilityStack read_probability_stack(const fs::path& path);
void write_probability_stack(const fs::path& path, const query::ProbabilityStack& stack);

// ---------------------------------------------------------------- dataset

enum class Split { train, test };

const char* to_string(Split s) noexcept;

/// One line of manifest.jsonl. Paths are relative to the dataset root.
struct DatasetRecord {
    std::string id;
    std::string image_path;
    std::string mask_path;
    Split split = Split::train;

    friend bool operator==(const DatasetRecord&, const DatasetRecord&) = default;
};

/// root/
///   manifest.jsonl      {"id","image_path","mask_path","split"} per line
///   images/ masks/      8-bit RGB PNG / 8-bit grey PNG (0 or 255)
///   backgrounds/        optional instrument-free PNG frames
struct DatasetLayout {
    fs::path root;
    std::vector<DatasetRecord> records;   ///< manifest order
    std::vector<std::string> backgrounds;  ///< relative paths, sorted
    int height = 0;
    int width = 0;

    fs::path resolve(const std::string& relative) const { return root / relative; }
    std::vector<const DatasetRecord*> split(Split s) const;
    const DatasetRecord* find(const std::string& id) const;
};

inline constexpr std::string_view kManifestName = "manifest.jsonl";

/// Every violation found (missing files, size mismatches, non-binary
/// masks, duplicate ids, malformed lines). Empty means valid.
std::vector<std::string> validate_dataset(const fs::path& root);

/// Validated layout; throws DatasetError listing every violation.
DatasetLayout load_dataset(const fs::path& root);

std::string encode_manifest(const std::vector<DatasetRecord>& records);
std::vector<DatasetRecord> parse_manifest(std::string_view text);

/// Sorted list of *.png files in `dir` (relative names); empty if absent.
std::vector<std::string> list_png(const fs::path& dir);

}  // namespace synthal::io
