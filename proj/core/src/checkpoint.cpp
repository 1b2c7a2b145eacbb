#include "hwgan/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "hwgan/error.hpp"

namespace hwgan {

namespace {

void put_u32_le(std::string& out, uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

uint32_t get_u32_le(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) |
         (static_cast<uint32_t>(p[3]) << 24);
}

}  // namespace

const LoadedTensor& Checkpoint::require(const std::string& name) const {
  const auto it = tensors.find(name);
  if (it == tensors.end())
    throw CheckpointError("checkpoint is missing tensor \"" + name + "\"");
  return it->second;
}

void Checkpoint::load_into(const std::string& name,
                           nn::Mat<float>& dst) const {
  const auto& t = require(name);
  if (t.rows != dst.rows() || t.cols != dst.cols())
    throw CheckpointError(
        "checkpoint tensor \"" + name + "\" has shape " +
        std::to_string(t.rows) + "x" + std::to_string(t.cols) +
        ", expected " + std::to_string(dst.rows()) + "x" +
        std::to_string(dst.cols()));
  std::memcpy(dst.data(), t.data.data(), t.data.size() * sizeof(float));
}

void save_checkpoint(const std::string& path, const CheckpointMeta& meta,
                     const std::vector<CheckpointEntry>& entries) {
  nlohmann::json manifest;
  manifest["version"] = kCheckpointVersion;
  manifest["step"] = meta.step;
  manifest["config"] = meta.config;
  manifest["rng"] = meta.rng_states;
  manifest["order"] = "col";

  uint64_t offset = 0;
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& e : entries) {
    const uint64_t count =
        static_cast<uint64_t>(e.rows) * static_cast<uint64_t>(e.cols);
    tensors.push_back({{"name", e.name},
                       {"shape", {e.rows, e.cols}},
                       {"dtype", "f32"},
                       {"offset", offset},
                       {"count", count}});
    offset += count * sizeof(float);
  }
  manifest["tensors"] = std::move(tensors);
  const std::string manifest_text = manifest.dump();

  std::string header = "HWGN";
  put_u32_le(header, kCheckpointVersion);
  put_u32_le(header, static_cast<uint32_t>(manifest_text.size()));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open for writing: " + path);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(manifest_text.data(),
            static_cast<std::streamsize>(manifest_text.size()));
  for (const auto& e : entries) {
    const std::streamsize bytes = static_cast<std::streamsize>(
        static_cast<uint64_t>(e.rows) * static_cast<uint64_t>(e.cols) *
        sizeof(float));
    out.write(reinterpret_cast<const char*>(e.data), bytes);
  }
  if (!out) throw CheckpointError("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());

  if (bytes.size() < 12 || std::memcmp(bytes.data(), "HWGN", 4) != 0)
    throw CheckpointError("not a checkpoint file (bad magic): " + path);
  const uint32_t version = get_u32_le(bytes.data() + 4);
  if (version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " +
                          std::to_string(version));
  const uint32_t manifest_len = get_u32_le(bytes.data() + 8);
  if (bytes.size() < 12 + static_cast<std::size_t>(manifest_len))
    throw CheckpointError("truncated checkpoint (manifest): " + path);

  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(bytes.begin() + 12,
                                     bytes.begin() + 12 + manifest_len);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("corrupt checkpoint manifest: ") +
                          e.what());
  }

  Checkpoint ckpt;
  try {
    ckpt.meta.step = manifest.value("step", 0L);
    ckpt.meta.config = manifest.value("config", nlohmann::json());
    if (manifest.contains("rng"))
      ckpt.meta.rng_states =
          manifest["rng"].get<std::map<std::string, std::string>>();

    const std::size_t payload_start = 12 + manifest_len;
    const std::size_t payload_size = bytes.size() - payload_start;
    uint64_t expected = 0;
    // Validate the full manifest before touching any tensor so a truncated
    // file never yields a partial load.
    for (const auto& t : manifest.at("tensors")) {
      const uint64_t offset = t.at("offset").get<uint64_t>();
      const uint64_t count = t.at("count").get<uint64_t>();
      if (offset + count * sizeof(float) > payload_size)
        throw CheckpointError("truncated checkpoint (payload): " + path);
      expected = std::max(expected, offset + count * sizeof(float));
    }
    if (expected != payload_size)
      throw CheckpointError("checkpoint payload size mismatch: " + path);

    for (const auto& t : manifest.at("tensors")) {
      const std::string name = t.at("name").get<std::string>();
      const auto shape = t.at("shape");
      if (t.at("dtype").get<std::string>() != "f32")
        throw CheckpointError("unsupported tensor dtype in " + path);
      LoadedTensor tensor;
      tensor.rows = shape.at(0).get<long>();
      tensor.cols = shape.at(1).get<long>();
      const uint64_t offset = t.at("offset").get<uint64_t>();
      const uint64_t count = t.at("count").get<uint64_t>();
      if (static_cast<uint64_t>(tensor.rows) *
              static_cast<uint64_t>(tensor.cols) !=
          count)
        throw CheckpointError("tensor shape/count mismatch in " + path);
      tensor.data.resize(count);
      std::memcpy(tensor.data.data(), bytes.data() + payload_start + offset,
                  count * sizeof(float));
      ckpt.tensors.emplace(name, std::move(tensor));
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("corrupt checkpoint manifest: ") +
                          e.what());
  }
  return ckpt;
}

std::vector<CheckpointEntry> checkpoint_entries(
    const std::vector<nn::Param<float>*>& params) {
  std::vector<CheckpointEntry> entries;
  entries.reserve(params.size());
  for (const auto* p : params)
    entries.push_back({p->name, p->value.rows(), p->value.cols(),
                       p->value.data()});
  return entries;
}

void restore_params(const Checkpoint& ckpt,
                    const std::vector<nn::Param<float>*>& params) {
  for (auto* p : params) ckpt.load_into(p->name, p->value);
}

}  // namespace hwgan
