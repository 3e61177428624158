#include "proxylab/model/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace proxylab::model {
namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'P', 'L', 'X', 'C', 'K', 'P', 'T', '1'};

static_assert(std::endian::native == std::endian::little,
              "the container format is little-endian; add byte swapping for this target");

template <typename T>
constexpr const char* dtype_name() {
  return sizeof(T) == 4 ? "f32" : "f64";
}

std::size_t dtype_size(const std::string& dtype) {
  if (dtype == "f32") return 4;
  if (dtype == "f64") return 8;
  throw std::runtime_error("unsupported dtype '" + dtype + "'");
}

}  // namespace

template <typename T>
void write_container(const std::filesystem::path& path, const std::string& kind,
                     const std::string& meta_json,
                     const std::vector<std::pair<std::string, const Tensor<T>*>>& tensors) {
  json manifest = json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : tensors) {
    const std::uint64_t nbytes = t->size() * sizeof(T);
    manifest.push_back({{"name", name}, {"shape", t->shape()}, {"offset", offset}, {"nbytes", nbytes}});
    offset += nbytes;
  }
  const json header = {{"kind", kind},
                       {"dtype", dtype_name<T>()},
                       {"meta", json::parse(meta_json)},
                       {"tensors", manifest},
                       {"blob_size", offset}};
  const std::string text = header.dump();
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out.write(kMagic, sizeof kMagic);
    const std::uint64_t len = text.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& [name, t] : tensors) {
      out.write(reinterpret_cast<const char*>(t->data()),
                static_cast<std::streamsize>(t->size() * sizeof(T)));
    }
    if (!out) throw std::runtime_error("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

ContainerHeader read_container_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  char magic[8];
  std::uint64_t len = 0;
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw std::runtime_error(path.string() + " is not a proxylab container");
  }
  const auto file_size = std::filesystem::file_size(path);
  if (len > file_size) throw std::runtime_error(path.string() + ": header length exceeds file");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw std::runtime_error(path.string() + ": truncated header");
  const json j = json::parse(text);
  ContainerHeader h;
  h.kind = j.at("kind").get<std::string>();
  h.dtype = j.at("dtype").get<std::string>();
  h.meta_json = j.at("meta").dump();
  h.blob_size = j.at("blob_size").get<std::uint64_t>();
  h.blob_offset = sizeof kMagic + sizeof len + len;
  const std::size_t elem = dtype_size(h.dtype);
  std::uint64_t expected_offset = 0;
  for (const auto& t : j.at("tensors")) {
    TensorRecord r;
    r.name = t.at("name").get<std::string>();
    r.shape = t.at("shape").get<Shape>();
    r.offset = t.at("offset").get<std::uint64_t>();
    r.nbytes = t.at("nbytes").get<std::uint64_t>();
    if (r.nbytes != shape_size(r.shape) * elem || r.offset != expected_offset) {
      throw std::runtime_error(path.string() + ": manifest entry '" + r.name +
                               "' is inconsistent with its shape");
    }
    expected_offset += r.nbytes;
    h.tensors.push_back(std::move(r));
  }
  if (expected_offset != h.blob_size) {
    throw std::runtime_error(path.string() + ": manifest does not cover blob_size");
  }
  return h;
}

template <typename T>
NamedTensors<T> read_container(const std::filesystem::path& path, ContainerHeader* header_out) {
  ContainerHeader h = read_container_header(path);
  const auto file_size = std::filesystem::file_size(path);
  std::ifstream in(path, std::ios::binary);
  NamedTensors<T> out;
  for (const auto& r : h.tensors) {
    if (h.blob_offset + r.offset + r.nbytes > file_size) {
      throw std::runtime_error(path.string() + ": blob truncated inside tensor '" + r.name + "'");
    }
    in.seekg(static_cast<std::streamoff>(h.blob_offset + r.offset));
    Tensor<T> t(r.shape);
    if (h.dtype == dtype_name<T>()) {
      in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(r.nbytes));
    } else if (h.dtype == "f32") {
      std::vector<float> buf(t.size());
      in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(r.nbytes));
      for (std::size_t i = 0; i < buf.size(); ++i) t[i] = static_cast<T>(buf[i]);
    } else {
      std::vector<double> buf(t.size());
      in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(r.nbytes));
      for (std::size_t i = 0; i < buf.size(); ++i) t[i] = static_cast<T>(buf[i]);
    }
    if (!in) throw std::runtime_error(path.string() + ": failed reading tensor '" + r.name + "'");
    out.emplace_back(r.name, std::move(t));
  }
  if (header_out) *header_out = std::move(h);
  return out;
}

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const ModelParameters<T>& params,
                     std::uint64_t seed, std::size_t step) {
  std::vector<std::pair<std::string, const Tensor<T>*>> tensors;
  params.visit([&](const std::string& name, const Tensor<T>& t) { tensors.emplace_back(name, &t); });
  const json meta = {{"config", json::parse(to_json(params.config))}, {"seed", seed}, {"step", step}};
  write_container(path, "checkpoint", meta.dump(), tensors);
}

CheckpointInfo inspect_checkpoint(const std::filesystem::path& path) {
  CheckpointInfo info;
  info.header = read_container_header(path);
  if (info.header.kind != "checkpoint") {
    throw std::runtime_error(path.string() + " holds a '" + info.header.kind +
                             "', not a checkpoint");
  }
  const json meta = json::parse(info.header.meta_json);
  info.config = model_config_from_json(meta.at("config").dump());
  info.seed = meta.at("seed").get<std::uint64_t>();
  info.step = meta.at("step").get<std::size_t>();
  return info;
}

template <typename T>
LoadedCheckpoint<T> load_checkpoint(const std::filesystem::path& path) {
  const CheckpointInfo info = inspect_checkpoint(path);
  NamedTensors<T> tensors = read_container<T>(path);
  LoadedCheckpoint<T> out;
  out.seed = info.seed;
  out.step = info.step;
  out.params = allocate_model<T>(info.config);
  std::size_t i = 0;
  out.params.visit([&](const std::string& name, Tensor<T>& t) {
    if (i >= tensors.size() || tensors[i].first != name) {
      throw std::runtime_error(path.string() + ": expected tensor '" + name + "'");
    }
    if (tensors[i].second.shape() != t.shape()) {
      throw std::runtime_error(path.string() + ": tensor '" + name + "' has shape " +
                               shape_string(tensors[i].second.shape()) + ", config implies " +
                               shape_string(t.shape()));
    }
    t = std::move(tensors[i].second);
    ++i;
  });
  if (i != tensors.size()) throw std::runtime_error(path.string() + ": unexpected extra tensors");
  return out;
}

template void write_container<float>(const std::filesystem::path&, const std::string&,
                                     const std::string&,
                                     const std::vector<std::pair<std::string, const Tensor<float>*>>&);
template void write_container<double>(const std::filesystem::path&, const std::string&,
                                      const std::string&,
                                      const std::vector<std::pair<std::string, const Tensor<double>*>>&);
template NamedTensors<float> read_container<float>(const std::filesystem::path&, ContainerHeader*);
template NamedTensors<double> read_container<double>(const std::filesystem::path&, ContainerHeader*);
template void save_checkpoint<float>(const std::filesystem::path&, const ModelParameters<float>&,
                                     std::uint64_t, std::size_t);
template void save_checkpoint<double>(const std::filesystem::path&, const ModelParameters<double>&,
                                      std::uint64_t, std::size_t);
template LoadedCheckpoint<float> load_checkpoint<float>(const std::filesystem::path&);
template LoadedCheckpoint<double> load_checkpoint<double>(const std::filesystem::path&);

}  // namespace proxylab::model
