#pragma once

// Checkpoint format: a JSON manifest plus one little-endian float32 blob.
//
//   <stem>.json  {"format": "lapgsr-tensors", "version": 1, "blob": "<stem>.bin",
//                 "meta": {...}, "tensors": [{"name", "shape": [n,c,h,w],
//                 "offset": <byte offset>, "bytes": <byte count>}, ...]}
//   <stem>.bin   tensors concatenated in manifest order
//
// A generator checkpoint carries {"generator": GeneratorConfig} in meta.

#include <filesystem>

#include "json.hpp"
#include "lapgsr/model.hpp"

namespace lapgsr {

struct TensorBundle {
  nlohmann::json meta = nlohmann::json::object();
  NamedTensors tensors;
};

/// Writes `manifest` and its sibling blob. Throws IoError on failure.
void write_bundle(const std::filesystem::path& manifest, const NamedTensors& tensors,
                  const nlohmann::json& meta);
TensorBundle read_bundle(const std::filesystem::path& manifest);

void save_generator(const std::filesystem::path& manifest, const Generator& generator,
                    const nlohmann::json& extra_meta = nlohmann::json::object());

/// Rebuilds the generator from the stored config and copies every tensor in,
/// failing on a missing, unexpected or mis-shaped tensor.
Generator load_generator(const std::filesystem::path& manifest);

/// Copies `source` into `target` by name with full shape validation.
void assign_tensors(const NamedTensors& target, const NamedTensors& source, const std::string& what);

/// Raw little-endian float32 dump with a one-line "SHAPE n c h w" header.
void dump_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor_dump(const std::filesystem::path& path);

}  // namespace lapgsr
