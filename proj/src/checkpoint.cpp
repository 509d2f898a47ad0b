#include "asymgan/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "asymgan/common.hpp"

namespace asymgan {

namespace {

constexpr char kMagic[4] = {'A', 'S', 'Y', 'M'};

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t get_u32(std::istream& is, const std::string& path,
                      std::uint64_t offset) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) {
    throw format_error(path + ": truncated at offset " +
                       std::to_string(offset));
  }
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(b[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::istream& is, const std::string& path,
                      std::uint64_t offset) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) {
    throw format_error(path + ": truncated at offset " +
                       std::to_string(offset));
  }
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
  return v;
}

static_assert(sizeof(float) == 4);

}  // namespace

void write_checkpoint(
    const std::string& path,
    const std::vector<std::pair<std::string, torch::Tensor>>& tensors,
    const nlohmann::ordered_json& scalars) {
  nlohmann::ordered_json header;
  header["tensors"] = nlohmann::ordered_json::array();
  std::vector<torch::Tensor> blobs;
  blobs.reserve(tensors.size());
  for (const auto& [name, t] : tensors) {
    auto flat = t.detach().to(torch::kF32).contiguous();
    nlohmann::ordered_json entry;
    entry["name"] = name;
    entry["shape"] = std::vector<std::int64_t>(t.sizes().begin(),
                                               t.sizes().end());
    entry["dtype"] = "f32";
    header["tensors"].push_back(entry);
    blobs.push_back(flat);
  }
  header["scalars"] = scalars;
  const std::string header_str = header.dump();

  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw io_error("cannot open for writing: " + tmp);
    os.write(kMagic, 4);
    put_u32(os, kCheckpointVersion);
    put_u64(os, header_str.size());
    os.write(header_str.data(),
             static_cast<std::streamsize>(header_str.size()));
    for (const auto& blob : blobs) {
      os.write(reinterpret_cast<const char*>(blob.data_ptr<float>()),
               static_cast<std::streamsize>(blob.numel() * 4));
    }
    os.flush();
    if (!os) throw io_error("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

CheckpointFile read_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw io_error("cannot open for reading: " + path);

  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw format_error(path + ": bad magic at offset 0");
  }
  std::uint64_t offset = 4;
  const std::uint32_t version = get_u32(is, path, offset);
  offset += 4;
  if (version != kCheckpointVersion) {
    throw format_error(path + ": unsupported format version " +
                       std::to_string(version));
  }
  const std::uint64_t header_len = get_u64(is, path, offset);
  offset += 8;
  std::string header_str(header_len, '\0');
  if (!is.read(header_str.data(), static_cast<std::streamsize>(header_len))) {
    throw format_error(path + ": truncated header at offset " +
                       std::to_string(offset));
  }
  offset += header_len;

  nlohmann::ordered_json header;
  try {
    header = nlohmann::ordered_json::parse(header_str);
  } catch (const std::exception& e) {
    throw format_error(path + ": invalid header JSON: " + e.what());
  }

  CheckpointFile out;
  out.scalars = header.value("scalars", nlohmann::ordered_json::object());
  for (const auto& entry : header.at("tensors")) {
    const std::string name = entry.at("name").get<std::string>();
    const auto shape = entry.at("shape").get<std::vector<std::int64_t>>();
    const std::string dtype = entry.at("dtype").get<std::string>();
    if (dtype != "f32") {
      throw format_error(path + ": unsupported dtype '" + dtype + "' for " +
                         name);
    }
    std::int64_t numel = 1;
    for (auto d : shape) numel *= d;
    auto t = torch::empty(shape, torch::kF32);
    if (!is.read(reinterpret_cast<char*>(t.data_ptr<float>()),
                 static_cast<std::streamsize>(numel * 4))) {
      throw format_error(path + ": truncated tensor '" + name +
                         "' at offset " + std::to_string(offset));
    }
    offset += static_cast<std::uint64_t>(numel) * 4;
    out.order.push_back(name);
    out.tensors.emplace(name, t);
  }
  // Trailing garbage means the file is not one of ours.
  is.peek();
  if (!is.eof()) {
    throw format_error(path + ": trailing bytes at offset " +
                       std::to_string(offset));
  }
  return out;
}

}  // namespace asymgan
