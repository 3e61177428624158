#pragma once

#include <filesystem>
#include <string>

#include "proxylab/dyck/splits.hpp"

namespace proxylab::dyck {

/// One JSON object per line:
/// {"tokens":[...],"text":"...","structure":"...","max_depth":n,"length":n}
void write_ndjson(const std::filesystem::path& path, const Dataset& dataset);

/// Reads a dataset file, re-deriving all annotations from the tokens. Throws
/// with the line number when a record is malformed or disagrees with its own
/// structure/depth/length fields.
Dataset read_ndjson(const std::filesystem::path& path, const std::string& name, int bracket_types);

/// Writes <dir>/<split>.ndjson for every split plus <dir>/manifest.json.
void write_bundle(const std::filesystem::path& dir, const SplitBundle& bundle);

SplitBundle read_bundle(const std::filesystem::path& dir);

}  // namespace proxylab::dyck
