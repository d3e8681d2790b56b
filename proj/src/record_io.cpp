#include "psoctseg/record_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "json.hpp"

#include "psoctseg/errors.hpp"

namespace psoctseg {

namespace {

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

std::vector<unsigned char> encode_record(const Record& rec) {
  const auto& img = rec.image;
  if (img.data.size() != static_cast<std::size_t>(kNumChannels) * img.R * img.A)
    throw ShapeMismatch("encode_record: image payload does not match shape");
  if (rec.labels && (rec.labels->R != img.R || rec.labels->A != img.A))
    throw ShapeMismatch("encode_record: label shape differs from image shape");

  nlohmann::json header = {
      {"R", img.R},
      {"A", img.A},
      {"channels", kNumChannels},
      {"pixel_pitch_um", img.pixel_pitch_um},
      {"patient_id", rec.patient_id},
      {"has_labels", rec.labels.has_value()},
  };
  const std::string h = header.dump();

  std::vector<unsigned char> out;
  out.reserve(13 + h.size() + img.data.size() * 4 + (rec.labels ? rec.labels->size() : 0));
  out.insert(out.end(), std::begin(kRecordMagic), std::end(kRecordMagic));
  out.push_back(kRecordVersion);
  put_u32(out, static_cast<std::uint32_t>(h.size()));
  out.insert(out.end(), h.begin(), h.end());
  for (float v : img.data) put_u32(out, std::bit_cast<std::uint32_t>(v));
  if (rec.labels) out.insert(out.end(), rec.labels->codes.begin(), rec.labels->codes.end());
  return out;
}

Record decode_record(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < 13 || std::memcmp(bytes.data(), kRecordMagic, 8) != 0)
    throw FormatError("record: bad magic");
  if (bytes[8] != kRecordVersion) throw FormatError("record: unsupported version " + std::to_string(bytes[8]));
  const std::uint32_t hlen = get_u32(bytes.data() + 9);
  if (bytes.size() < 13ull + hlen) throw ShapeMismatch("record: truncated header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 13, bytes.begin() + 13 + hlen);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("record: header is not valid JSON: ") + e.what());
  }

  Record rec;
  bool has_labels = false;
  try {
    if (header.contains("channels") && header.at("channels").get<int>() != kNumChannels)
      throw FormatError("record: " + std::to_string(kNumChannels) + " channels required");
    const int R = header.at("R").get<int>();
    const int A = header.at("A").get<int>();
    if (R <= 0 || A <= 0) throw FormatError("record: non-positive shape");
    rec.image = PolarImage(R, A, header.at("pixel_pitch_um").get<double>());
    rec.patient_id = header.at("patient_id").get<std::string>();
    has_labels = header.at("has_labels").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("record: malformed header: ") + e.what());
  }

  const std::size_t n = rec.image.data.size();
  const std::size_t expected = 13ull + hlen + n * 4 + (has_labels ? n / kNumChannels : 0);
  if (bytes.size() != expected)
    throw ShapeMismatch("record: payload holds " + std::to_string(bytes.size()) + " bytes, header implies " +
                        std::to_string(expected));

  const unsigned char* p = bytes.data() + 13 + hlen;
  for (std::size_t i = 0; i < n; ++i, p += 4) rec.image.data[i] = std::bit_cast<float>(get_u32(p));
  if (has_labels) {
    LabelMap y(rec.image.R, rec.image.A);
    std::copy(p, p + y.size(), y.codes.begin());
    y.validate();
    rec.labels = std::move(y);
  }
  return rec;
}

void save_record(const std::filesystem::path& path, const Record& rec) {
  const auto bytes = encode_record(rec);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Record load_record(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_record(bytes);
}

void write_manifest(const std::filesystem::path& dir, const std::vector<ManifestEntry>& entries) {
  std::ofstream f(dir / kManifestName);
  if (!f) throw std::runtime_error("cannot write manifest in " + dir.string());
  f << "# path\tpatient_id\n";
  for (const auto& e : entries) f << e.path << '\t' << e.patient_id << '\n';
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& dir) {
  std::ifstream f(dir / kManifestName);
  if (!f) throw std::runtime_error("missing manifest in " + dir.string());
  std::vector<ManifestEntry> out;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw FormatError("manifest: expected '<path>\\t<patient_id>': " + line);
    out.push_back({line.substr(0, tab), line.substr(tab + 1)});
  }
  return out;
}

std::vector<Record> load_dataset(const std::filesystem::path& dir) {
  std::vector<Record> out;
  for (const auto& e : read_manifest(dir)) {
    out.push_back(load_record(dir / e.path));
    if (out.back().patient_id != e.patient_id)
      throw FormatError("manifest patient id differs from record header for " + e.path);
  }
  return out;
}

}  // namespace psoctseg
