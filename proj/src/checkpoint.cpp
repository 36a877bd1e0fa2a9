#include "hoidet/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "hoidet/util.hpp"

namespace hoidet {

namespace {

constexpr char kMagic[8] = {'H', 'O', 'I', 'D', 'E', 'T', 'W', '1'};

nlohmann::json manifest_to_json(const CheckpointManifest& m,
                                const std::vector<ParamView<float>>& params) {
  nlohmann::json blocks = nlohmann::json::object();
  for (const auto& p : params) blocks[p.name] = p.shape;
  nlohmann::json doc{{"format", "hoidet-checkpoint-v1"},
                     {"kind", m.kind},
                     {"blocks", blocks},
                     {"grid_size", {m.grid_w, m.grid_h}},
                     {"image_size", {m.image_w, m.image_h}},
                     {"c_img", m.c_img},
                     {"active_features", m.active_features},
                     {"lambda", m.lambda},
                     {"seed", m.seed},
                     {"anchor_px", m.anchor_px}};
  if (!m.classes.empty()) doc["classes"] = m.classes;
  if (!m.extra.is_null()) doc["extra"] = m.extra;
  return doc;
}

CheckpointManifest manifest_from_json(const nlohmann::json& doc,
                                      const std::string& where) {
  check(doc.value("format", "") == "hoidet-checkpoint-v1",
        where + ": not a checkpoint manifest");
  CheckpointManifest m;
  m.kind = doc.at("kind").get<std::string>();
  m.grid_w = doc.at("grid_size")[0].get<int>();
  m.grid_h = doc.at("grid_size")[1].get<int>();
  m.image_w = doc.at("image_size")[0].get<int>();
  m.image_h = doc.at("image_size")[1].get<int>();
  m.c_img = doc.at("c_img").get<int>();
  m.active_features =
      doc.at("active_features").get<std::vector<std::string>>();
  m.lambda = doc.at("lambda").get<double>();
  m.seed = doc.at("seed").get<std::uint64_t>();
  m.anchor_px = doc.value("anchor_px", 0.0);
  if (doc.contains("classes"))
    m.classes = doc.at("classes").get<std::vector<std::string>>();
  if (doc.contains("extra")) m.extra = doc.at("extra");
  return m;
}

void atomic_write(const std::filesystem::path& path, const std::string& data) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    check(bool(f), "cannot open " + tmp + " for writing");
    f.write(data.data(), std::streamsize(data.size()));
    check(bool(f), "short write to " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

template <typename T>
void append_raw(std::string& out, const T& v) {
  out.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

}  // namespace

std::filesystem::path checkpoint_archive_path(
    const std::filesystem::path& stem) {
  auto p = stem;
  p += ".ckpt";
  return p;
}

void save_checkpoint(const std::filesystem::path& stem,
                     const std::vector<ParamView<float>>& params,
                     const CheckpointManifest& manifest) {
  std::string blob;
  blob.append(kMagic, sizeof(kMagic));
  const std::uint32_t count = std::uint32_t(params.size());
  append_raw(blob, count);
  for (const auto& p : params) {
    const std::uint16_t name_len = std::uint16_t(p.name.size());
    append_raw(blob, name_len);
    blob.append(p.name);
    const std::uint8_t rank = std::uint8_t(p.shape.size());
    append_raw(blob, rank);
    std::size_t expect = 1;
    for (int d : p.shape) {
      append_raw(blob, std::uint32_t(d));
      expect *= std::size_t(d);
    }
    check(expect == p.value->size(),
          "checkpoint: shape of '" + p.name + "' does not match its data");
    blob.append(reinterpret_cast<const char*>(p.value->data()),
                p.value->size() * sizeof(float));
  }
  atomic_write(checkpoint_archive_path(stem), blob);
  auto mpath = stem;
  mpath += ".json";
  atomic_write(mpath, manifest_to_json(manifest, params).dump(1) + "\n");
}

CheckpointManifest read_manifest(const std::filesystem::path& stem) {
  auto mpath = stem;
  mpath += ".json";
  std::ifstream f(mpath);
  check(bool(f), "checkpoint manifest not found: " + mpath.string());
  nlohmann::json doc;
  try {
    f >> doc;
  } catch (const nlohmann::json::exception& e) {
    fail(mpath.string() + ": JSON parse error: " + e.what());
  }
  return manifest_from_json(doc, mpath.string());
}

CheckpointManifest load_checkpoint(const std::filesystem::path& stem,
                                   std::vector<ParamView<float>> params) {
  const auto path = checkpoint_archive_path(stem);
  std::ifstream f(path, std::ios::binary);
  check(bool(f), "checkpoint not found: " + path.string());
  std::string blob((std::istreambuf_iterator<char>(f)),
                   std::istreambuf_iterator<char>());
  check(blob.size() > sizeof(kMagic) + 4 &&
            std::memcmp(blob.data(), kMagic, sizeof(kMagic)) == 0,
        path.string() + ": not a checkpoint archive");
  std::size_t pos = sizeof(kMagic);
  auto read_raw = [&](void* dst, std::size_t n) {
    check(pos + n <= blob.size(), path.string() + ": truncated archive");
    std::memcpy(dst, blob.data() + pos, n);
    pos += n;
  };
  std::uint32_t count = 0;
  read_raw(&count, 4);
  check(count == params.size(),
        path.string() + ": archive has " + std::to_string(count) +
            " tensors, expected " + std::to_string(params.size()));
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint16_t name_len = 0;
    read_raw(&name_len, 2);
    std::string name(name_len, '\0');
    read_raw(name.data(), name_len);
    check(name == params[i].name,
          path.string() + ": tensor '" + name + "' where '" + params[i].name +
              "' was expected");
    std::uint8_t rank = 0;
    read_raw(&rank, 1);
    check(rank == params[i].shape.size(),
          path.string() + ": rank mismatch for '" + name + "'");
    std::size_t n = 1;
    for (int d = 0; d < rank; ++d) {
      std::uint32_t dim = 0;
      read_raw(&dim, 4);
      check(int(dim) == params[i].shape[d],
            path.string() + ": shape mismatch for '" + name + "'");
      n *= dim;
    }
    check(n == params[i].value->size(),
          path.string() + ": size mismatch for '" + name + "'");
    read_raw(params[i].value->data(), n * sizeof(float));
  }
  check(pos == blob.size(), path.string() + ": trailing bytes in archive");
  return read_manifest(stem);
}

}  // namespace hoidet
