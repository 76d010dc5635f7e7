#include "emf/nn/checkpoint.hpp"

#include "emf/error.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace emf::nn {

static_assert(std::endian::native == std::endian::little,
              "checkpoint encoding assumes a little-endian host");

namespace {

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
  const auto* bytes = reinterpret_cast<const std::uint8_t*>(&value);
  out.insert(out.end(), bytes, bytes + sizeof(T));
}

template <typename T>
T get(const std::vector<std::uint8_t>& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw CheckpointError("checkpoint truncated");
  T value;
  std::memcpy(&value, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return value;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const nlohmann::json& meta,
                                            const std::vector<const Parameter*>& params) {
  nlohmann::json header = meta;
  nlohmann::json directory = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const Parameter* p : params) {
    directory.push_back({{"name", p->name},
                         {"rows", p->value.rows()},
                         {"cols", p->value.cols()},
                         {"offset", offset}});
    offset += static_cast<std::uint64_t>(p->value.size()) * sizeof(double);
  }
  header["tensors"] = std::move(directory);
  const std::string text = header.dump();

  std::vector<std::uint8_t> out;
  out.insert(out.end(), std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
  put<std::uint16_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  for (const Parameter* p : params) {
    const auto* bytes = reinterpret_cast<const std::uint8_t*>(p->value.data());
    out.insert(out.end(), bytes, bytes + p->value.size() * sizeof(double));
  }
  return out;
}

CheckpointData decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
    throw CheckpointError("not an EMFC checkpoint (bad magic)");
  }
  std::size_t pos = 4;
  const auto version = get<std::uint16_t>(bytes, pos);
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto header_len = get<std::uint32_t>(bytes, pos);
  if (pos + header_len > bytes.size()) throw CheckpointError("checkpoint header truncated");

  CheckpointData data;
  try {
    data.header = nlohmann::json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                                        bytes.begin() + static_cast<std::ptrdiff_t>(pos + header_len));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  pos += header_len;
  const std::size_t base = pos;

  if (!data.header.contains("tensors") || !data.header["tensors"].is_array()) {
    throw CheckpointError("checkpoint header lacks a tensor directory");
  }
  for (const auto& entry : data.header["tensors"]) {
    const auto rows = entry.at("rows").get<Eigen::Index>();
    const auto cols = entry.at("cols").get<Eigen::Index>();
    const auto offset = entry.at("offset").get<std::uint64_t>();
    const std::size_t nbytes = static_cast<std::size_t>(rows * cols) * sizeof(double);
    if (rows < 0 || cols < 0 || base + offset + nbytes > bytes.size()) {
      throw CheckpointError("tensor " + entry.at("name").get<std::string>() + " lies outside the file");
    }
    Matrix m(rows, cols);
    std::memcpy(m.data(), bytes.data() + base + offset, nbytes);
    data.tensors.emplace(entry.at("name").get<std::string>(), std::move(m));
  }
  return data;
}

void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& meta,
                     const std::vector<const Parameter*>& params) {
  const auto bytes = encode_checkpoint(meta, params);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("failed writing checkpoint " + path.string());
}

CheckpointData load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot read checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace emf::nn
