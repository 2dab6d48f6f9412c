#pragma once
// Checkpoint format: <base>.bin holds the raw parameter values as
// little-endian float32, concatenated in manifest order; <base>.json is the
// manifest, a list of {name, shape, dtype, byte_offset} entries. The byte
// packing is explicit so files round-trip across hosts.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sgan/tensor.hpp"

namespace sgan {

// Ordered name -> tensor registry. Models expose their parameters through one
// of these; order is the registration order and fixes the .bin layout.
template <typename T>
struct NamedTensors {
  std::vector<std::pair<std::string, Tensor<T>>> items;

  void add(const std::string& name, const Tensor<T>& t) {
    require(t.defined(), "named tensors: undefined tensor for '" + name + "'");
    require(find(name) == nullptr, "named tensors: duplicate name '" + name + "'");
    items.emplace_back(name, t);
  }
  const Tensor<T>* find(const std::string& name) const {
    for (const auto& [n, t] : items)
      if (n == name) return &t;
    return nullptr;
  }
  size_t size() const { return items.size(); }
};

namespace detail {

inline void put_le_f32(std::vector<uint8_t>& out, float v) {
  uint32_t u;
  std::memcpy(&u, &v, 4);
  out.push_back(static_cast<uint8_t>(u & 0xff));
  out.push_back(static_cast<uint8_t>((u >> 8) & 0xff));
  out.push_back(static_cast<uint8_t>((u >> 16) & 0xff));
  out.push_back(static_cast<uint8_t>((u >> 24) & 0xff));
}

inline float get_le_f32(const uint8_t* p) {
  uint32_t u = static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
               (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
  float v;
  std::memcpy(&v, &u, 4);
  return v;
}

}  // namespace detail

inline void save_checkpoint(const std::string& base, const NamedTensors<float>& params) {
  nlohmann::ordered_json manifest = nlohmann::ordered_json::array();
  std::vector<uint8_t> blob;
  for (const auto& [name, t] : params.items) {
    nlohmann::ordered_json entry;
    entry["name"] = name;
    entry["shape"] = t.shape();
    entry["dtype"] = "f32";
    entry["byte_offset"] = blob.size();
    manifest.push_back(entry);
    for (float v : t.data()) detail::put_le_f32(blob, v);
  }
  {
    std::ofstream out(base + ".bin", std::ios::binary);
    if (!out) throw std::runtime_error(base + ".bin: cannot open for writing");
    out.write(reinterpret_cast<const char*>(blob.data()),
              static_cast<std::streamsize>(blob.size()));
    if (!out) throw std::runtime_error(base + ".bin: write failed");
  }
  {
    std::ofstream out(base + ".json");
    if (!out) throw std::runtime_error(base + ".json: cannot open for writing");
    out << manifest.dump(2) << '\n';
    if (!out) throw std::runtime_error(base + ".json: write failed");
  }
}

// Loads a checkpoint into fresh tensors (no gradient tracking). Validates the
// manifest against the .bin size entry by entry.
inline NamedTensors<float> load_checkpoint(const std::string& base) {
  std::ifstream jin(base + ".json");
  if (!jin) throw std::runtime_error(base + ".json: cannot open for reading");
  nlohmann::json manifest;
  try {
    jin >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(base + ".json: manifest parse error: " + e.what());
  }
  if (!manifest.is_array())
    throw std::runtime_error(base + ".json: manifest must be a list");

  std::ifstream bin(base + ".bin", std::ios::binary);
  if (!bin) throw std::runtime_error(base + ".bin: cannot open for reading");
  std::vector<uint8_t> blob{std::istreambuf_iterator<char>(bin),
                            std::istreambuf_iterator<char>()};

  NamedTensors<float> out;
  for (const auto& entry : manifest) {
    if (!entry.contains("name") || !entry.contains("shape") ||
        !entry.contains("dtype") || !entry.contains("byte_offset"))
      throw std::runtime_error(base + ".json: manifest entry missing a required field");
    const std::string name = entry["name"].get<std::string>();
    if (entry["dtype"].get<std::string>() != "f32")
      throw std::runtime_error(base + ".json: unsupported dtype '" +
                               entry["dtype"].get<std::string>() + "' for '" + name + "'");
    Shape shape = entry["shape"].get<Shape>();
    const size_t offset = entry["byte_offset"].get<size_t>();
    const size_t count = static_cast<size_t>(shape_numel(shape));
    if (offset + count * 4 > blob.size())
      throw std::runtime_error(base + ".bin: '" + name + "' extends past end of file (offset " +
                               std::to_string(offset) + ", " + std::to_string(count) +
                               " floats, file " + std::to_string(blob.size()) + " bytes)");
    std::vector<float> data(count);
    for (size_t i = 0; i < count; ++i)
      data[i] = detail::get_le_f32(blob.data() + offset + i * 4);
    out.add(name, Tensor<float>::from_data(std::move(shape), std::move(data)));
  }
  return out;
}

// Copies loaded values into a model's live parameter tensors, matching by
// name. Every destination parameter must be present with the same shape.
inline void copy_state(const NamedTensors<float>& src, NamedTensors<float>& dst) {
  for (auto& [name, t] : dst.items) {
    const Tensor<float>* s = src.find(name);
    require(s != nullptr, "checkpoint: missing parameter '" + name + "'");
    require(s->shape() == t.shape(),
            "checkpoint: shape mismatch for '" + name + "': file " +
                shape_str(s->shape()) + " vs model " + shape_str(t.shape()));
    auto& node = *t.node();
    node.value = s->data();
  }
}

}  // namespace sgan
