#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "psoctseg/types.hpp"

namespace psoctseg {

/// One annotated cross-section as stored on disk.
struct Record {
  PolarImage image;
  std::optional<LabelMap> labels;
  std::string patient_id;
};

/// Record file layout (all integers little-endian):
///   "PSOCTSEG"            8-byte magic
///   0x01                  format version
///   u32                   header length in bytes
///   header                UTF-8 JSON {R, A, channels, pixel_pitch_um, patient_id, has_labels}
///   f32[3][R][A]          image, channel-major then radial-major
///   u8[R][A]              class codes, present iff has_labels
inline constexpr char kRecordMagic[8] = {'P', 'S', 'O', 'C', 'T', 'S', 'E', 'G'};
inline constexpr unsigned char kRecordVersion = 1;

std::vector<unsigned char> encode_record(const Record& rec);
/// Throws FormatError on a bad magic, version, header or channel count and
/// ShapeMismatch when the payload length disagrees with the header.
Record decode_record(const std::vector<unsigned char>& bytes);

void save_record(const std::filesystem::path& path, const Record& rec);
Record load_record(const std::filesystem::path& path);

struct ManifestEntry {
  std::string path;  // relative to the dataset directory
  std::string patient_id;
};

inline constexpr const char* kManifestName = "manifest.txt";

/// Manifest: one "relative_path<TAB>patient_id" line per record; lines
/// starting with '#' are comments.
void write_manifest(const std::filesystem::path& dir, const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& dir);

/// Loads every record listed in a dataset directory's manifest.
std::vector<Record> load_dataset(const std::filesystem::path& dir);

}  // namespace psoctseg
