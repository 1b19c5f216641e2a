#include "lapgsr/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "lapgsr/error.hpp"

namespace lapgsr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

static_assert(sizeof(float) == 4);

void write_floats(std::ostream& os, std::span<const float> values) {
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(values.data()),
             static_cast<std::streamsize>(values.size() * sizeof(float)));
  } else {
    for (float v : values) {
      auto bits = std::bit_cast<uint32_t>(v);
      char bytes[4];
      for (int i = 0; i < 4; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
      os.write(bytes, 4);
    }
  }
}

void read_floats(std::istream& is, std::span<float> values) {
  is.read(reinterpret_cast<char*>(values.data()),
          static_cast<std::streamsize>(values.size() * sizeof(float)));
  if constexpr (std::endian::native != std::endian::little) {
    for (float& v : values) {
      auto bits = std::bit_cast<uint32_t>(v);
      bits = ((bits & 0xFF) << 24) | ((bits & 0xFF00) << 8) | ((bits >> 8) & 0xFF00) | (bits >> 24);
      v = std::bit_cast<float>(bits);
    }
  }
}

json shape_json(const Shape& s) { return json::array({s.n, s.c, s.h, s.w}); }

Shape shape_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4) throw IoError("checkpoint: malformed shape " + j.dump());
  return Shape{j[0].get<int64_t>(), j[1].get<int64_t>(), j[2].get<int64_t>(), j[3].get<int64_t>()};
}

}  // namespace

void write_bundle(const fs::path& manifest, const NamedTensors& tensors, const json& meta) {
  fs::path blob = manifest;
  blob.replace_extension(".bin");
  if (manifest.has_parent_path()) fs::create_directories(manifest.parent_path());

  std::ofstream out(blob, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + blob.string());
  json entries = json::array();
  int64_t offset = 0;
  for (const auto& [name, t] : tensors) {
    const int64_t bytes = t.numel() * 4;
    entries.push_back({{"name", name}, {"shape", shape_json(t.shape())}, {"offset", offset},
                       {"bytes", bytes}});
    write_floats(out, t.data());
    offset += bytes;
  }
  out.close();
  if (!out) throw IoError("failed writing " + blob.string());

  const json doc{{"format", "lapgsr-tensors"}, {"version", 1},
                 {"blob", blob.filename().string()}, {"meta", meta}, {"tensors", entries}};
  std::ofstream mf(manifest, std::ios::trunc);
  if (!mf) throw IoError("cannot write " + manifest.string());
  mf << doc.dump(2) << "\n";
  mf.close();
  if (!mf) throw IoError("failed writing " + manifest.string());
}

TensorBundle read_bundle(const fs::path& manifest) {
  std::ifstream mf(manifest);
  if (!mf) throw IoError("cannot open checkpoint manifest " + manifest.string());
  json doc;
  try {
    mf >> doc;
  } catch (const json::exception& e) {
    throw IoError("malformed checkpoint manifest " + manifest.string() + ": " + e.what());
  }
  if (doc.value("format", "") != "lapgsr-tensors") {
    throw IoError(manifest.string() + " is not a tensor checkpoint manifest");
  }
  const fs::path blob = manifest.parent_path() / doc.at("blob").get<std::string>();
  std::ifstream in(blob, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint blob " + blob.string());
  in.seekg(0, std::ios::end);
  const auto blob_size = static_cast<int64_t>(in.tellg());

  TensorBundle bundle;
  bundle.meta = doc.value("meta", json::object());
  for (const json& e : doc.at("tensors")) {
    const Shape shape = shape_from_json(e.at("shape"));
    const auto offset = e.at("offset").get<int64_t>();
    const auto bytes = e.at("bytes").get<int64_t>();
    if (bytes != shape.numel() * 4 || offset < 0 || offset + bytes > blob_size) {
      throw IoError("checkpoint entry '" + e.at("name").get<std::string>() +
                    "' is inconsistent with " + blob.string());
    }
    Tensor t(shape);
    in.seekg(offset);
    read_floats(in, t.data());
    if (!in) throw IoError("short read in " + blob.string());
    bundle.tensors.emplace_back(e.at("name").get<std::string>(), t);
  }
  return bundle;
}

void assign_tensors(const NamedTensors& target, const NamedTensors& source,
                    const std::string& what) {
  std::map<std::string, Tensor> by_name;
  for (const auto& [name, t] : source) by_name.emplace(name, t);
  for (auto [name, t] : target) {
    const auto it = by_name.find(name);
    if (it == by_name.end()) throw ShapeError(what + ": missing tensor '" + name + "'");
    if (it->second.shape() != t.shape()) {
      throw ShapeError(what + ": tensor '" + name + "' has shape " + it->second.shape().str() +
                       ", expected " + t.shape().str());
    }
    std::copy(it->second.data().begin(), it->second.data().end(), t.data().begin());
    by_name.erase(it);
  }
  if (!by_name.empty()) {
    throw ShapeError(what + ": unexpected tensor '" + by_name.begin()->first + "'");
  }
}

void save_generator(const fs::path& manifest, const Generator& generator,
                    const json& extra_meta) {
  json meta = extra_meta;
  meta["generator"] = generator.config();
  write_bundle(manifest, generator.named_parameters(), meta);
}

Generator load_generator(const fs::path& manifest) {
  TensorBundle bundle = read_bundle(manifest);
  if (!bundle.meta.contains("generator")) {
    throw IoError(manifest.string() + " has no generator config");
  }
  const auto cfg = bundle.meta.at("generator").get<GeneratorConfig>();
  Rng rng(0);
  Generator g(cfg, rng);
  assign_tensors(g.named_parameters(), bundle.tensors, "load_generator(" + manifest.string() + ")");
  return g;
}

void dump_tensor(const fs::path& path, const Tensor& t) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  const Shape& s = t.shape();
  out << "SHAPE " << s.n << ' ' << s.c << ' ' << s.h << ' ' << s.w << '\n';
  write_floats(out, t.data());
  if (!out) throw IoError("failed writing " + path.string());
}

Tensor load_tensor_dump(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string header;
  std::getline(in, header);
  std::istringstream hs(header);
  std::string tag;
  Shape s;
  hs >> tag >> s.n >> s.c >> s.h >> s.w;
  if (!hs || tag != "SHAPE") throw IoError(path.string() + ": missing SHAPE header");
  Tensor t(s);
  read_floats(in, t.data());
  if (!in) throw IoError(path.string() + ": truncated data");
  return t;
}

}  // namespace lapgsr
