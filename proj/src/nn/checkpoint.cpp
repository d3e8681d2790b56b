#include "psoctseg/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <span>

#include "psoctseg/errors.hpp"

namespace psoctseg::nn {

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_floats(std::ostream& os, std::span<const float> v) {
  for (float x : v) put_u32(os, std::bit_cast<std::uint32_t>(x));
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, nlohmann::json header,
                     const std::vector<const Parameter<float>*>& params, const std::vector<float>& extra) {
  auto tensors = nlohmann::json::array();
  for (const auto* p : params) tensors.push_back({{"name", p->name}, {"shape", p->shape}});
  header["tensors"] = std::move(tensors);
  header["extra"] = extra.size();
  const std::string h = header.dump();

  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f.write(kCheckpointMagic, 8);
  put_u32(f, static_cast<std::uint32_t>(h.size()));
  f.write(h.data(), static_cast<std::streamsize>(h.size()));
  for (const auto* p : params) put_floats(f, p->value);
  put_floats(f, extra);
  if (!f) throw std::runtime_error("write failed for " + path.string());
}

CheckpointData read_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0)
    throw FormatError("checkpoint: bad magic in " + path.string());
  const std::uint32_t hlen = get_u32(bytes.data() + 8);
  if (bytes.size() < 12ull + hlen) throw ShapeMismatch("checkpoint: truncated header");

  CheckpointData ck;
  std::size_t total = 0;
  try {
    ck.header = nlohmann::json::parse(bytes.begin() + 12, bytes.begin() + 12 + hlen);
    for (const auto& t : ck.header.at("tensors")) {
      Parameter<float> p(t.at("name").get<std::string>(), t.at("shape").get<std::vector<int>>());
      total += p.size();
      ck.tensors.push_back(std::move(p));
    }
    ck.extra.resize(ck.header.at("extra").get<std::size_t>());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: malformed header: ") + e.what());
  }
  total += ck.extra.size();
  if (bytes.size() != 12ull + hlen + 4 * total)
    throw ShapeMismatch("checkpoint: payload length disagrees with header in " + path.string());

  const unsigned char* p = bytes.data() + 12 + hlen;
  for (auto& t : ck.tensors)
    for (auto& v : t.value) {
      v = std::bit_cast<float>(get_u32(p));
      p += 4;
    }
  for (auto& v : ck.extra) {
    v = std::bit_cast<float>(get_u32(p));
    p += 4;
  }
  return ck;
}

void assign_parameters(const CheckpointData& ck, const std::vector<Parameter<float>*>& params) {
  if (ck.tensors.size() != params.size())
    throw ShapeMismatch("checkpoint holds " + std::to_string(ck.tensors.size()) + " tensors, model has " +
                        std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& src = ck.tensors[i];
    auto& dst = *params[i];
    if (src.name != dst.name || src.shape != dst.shape)
      throw ShapeMismatch("checkpoint tensor " + src.name + " does not match model tensor " + dst.name);
    dst.value = src.value;
  }
}

}  // namespace psoctseg::nn
