#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "proxylab/model/parameters.hpp"

namespace proxylab::model {

/// File layout: 8-byte magic "PLXCKPT1", u64 little-endian header length,
/// header JSON, then the little-endian tensor blob. Tensor offsets are
/// relative to the start of the blob.
struct TensorRecord {
  std::string name;
  Shape shape;
  std::uint64_t offset = 0;
  std::uint64_t nbytes = 0;
};

struct ContainerHeader {
  std::string kind;       ///< "checkpoint" or "simplifier"
  std::string dtype;      ///< "f32" or "f64"
  std::string meta_json;  ///< kind-specific JSON object
  std::vector<TensorRecord> tensors;
  std::uint64_t blob_offset = 0;  ///< absolute file offset of the blob
  std::uint64_t blob_size = 0;
};

template <typename T>
using NamedTensors = std::vector<std::pair<std::string, Tensor<T>>>;

template <typename T>
void write_container(const std::filesystem::path& path, const std::string& kind,
                     const std::string& meta_json,
                     const std::vector<std::pair<std::string, const Tensor<T>*>>& tensors);

/// Reads only the header; never touches the blob.
ContainerHeader read_container_header(const std::filesystem::path& path);

/// Loads all tensors, converting from the stored dtype. Throws naming the
/// first tensor whose bytes lie outside the file.
template <typename T>
NamedTensors<T> read_container(const std::filesystem::path& path, ContainerHeader* header = nullptr);

struct CheckpointInfo {
  ModelConfig config;
  std::uint64_t seed = 0;
  std::size_t step = 0;
  ContainerHeader header;
};

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const ModelParameters<T>& params,
                     std::uint64_t seed, std::size_t step);

CheckpointInfo inspect_checkpoint(const std::filesystem::path& path);

template <typename T>
struct LoadedCheckpoint {
  ModelParameters<T> params;
  std::uint64_t seed = 0;
  std::size_t step = 0;
};

template <typename T>
LoadedCheckpoint<T> load_checkpoint(const std::filesystem::path& path);

}  // namespace proxylab::model
