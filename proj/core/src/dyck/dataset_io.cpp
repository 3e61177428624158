#include "proxylab/dyck/dataset_io.hpp"

#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace proxylab::dyck {
namespace {

using nlohmann::json;

json spec_json(const DyckSpec& s) {
  return {{"bracket_types", s.bracket_types}, {"max_depth", s.max_depth}, {"max_len", s.max_len}};
}

DyckSpec spec_from(const json& j) {
  DyckSpec s;
  s.bracket_types = j.at("bracket_types").get<int>();
  s.max_depth = j.at("max_depth").get<int>();
  s.max_len = j.at("max_len").get<int>();
  s.validate();
  return s;
}

}  // namespace

void write_ndjson(const std::filesystem::path& path, const Dataset& dataset) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& s : dataset.samples) {
    json rec = {{"tokens", s.tokens},
                {"text", render(s.tokens, dataset.bracket_types)},
                {"structure", s.structure},
                {"max_depth", s.max_depth()},
                {"length", s.length()}};
    out << rec.dump() << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

Dataset read_ndjson(const std::filesystem::path& path, const std::string& name, int k) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset file " + path.string());
  Dataset ds;
  ds.name = name;
  ds.bracket_types = k;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto where = path.string() + ":" + std::to_string(line_no);
    try {
      const json rec = json::parse(line);
      DyckSample s = annotate(rec.at("tokens").get<std::vector<Token>>(), k);
      if (rec.contains("structure") && rec["structure"].get<std::string>() != s.structure) {
        throw std::runtime_error("structure field disagrees with tokens");
      }
      if (rec.contains("max_depth") && rec["max_depth"].get<int>() != s.max_depth()) {
        throw std::runtime_error("max_depth field disagrees with tokens");
      }
      if (rec.contains("length") && rec["length"].get<std::size_t>() != s.length()) {
        throw std::runtime_error("length field disagrees with tokens");
      }
      ds.samples.push_back(std::move(s));
    } catch (const std::exception& e) {
      throw std::runtime_error(where + ": " + e.what());
    }
  }
  return ds;
}

void write_bundle(const std::filesystem::path& dir, const SplitBundle& bundle) {
  std::filesystem::create_directories(dir);
  json splits = json::array();
  for (const auto& d : bundle.datasets) {
    const std::string file = d.name + ".ndjson";
    write_ndjson(dir / file, d);
    splits.push_back({{"name", d.name},
                      {"file", file},
                      {"size", d.samples.size()},
                      {"seed", d.provenance.seed},
                      {"spec", spec_json(d.provenance.spec)},
                      {"attempts", d.provenance.attempts},
                      {"rejections", d.provenance.rejections}});
  }
  const json manifest = {{"spec", spec_json(bundle.spec)}, {"seed", bundle.seed}, {"splits", splits}};
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  if (!out) throw std::runtime_error("cannot write manifest in " + dir.string());
  out << manifest.dump(2) << '\n';
}

SplitBundle read_bundle(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  std::ifstream in(manifest_path, std::ios::binary);
  if (!in) throw std::runtime_error("missing bundle manifest " + manifest_path.string());
  const json manifest = json::parse(in);
  SplitBundle bundle;
  bundle.spec = spec_from(manifest.at("spec"));
  bundle.seed = manifest.at("seed").get<std::uint64_t>();
  for (const auto& entry : manifest.at("splits")) {
    const auto name = entry.at("name").get<std::string>();
    Dataset d = read_ndjson(dir / entry.at("file").get<std::string>(), name,
                            bundle.spec.bracket_types);
    if (d.samples.size() != entry.at("size").get<std::size_t>()) {
      throw std::runtime_error("split '" + name + "' has " + std::to_string(d.samples.size()) +
                               " records, manifest says " + entry.at("size").dump());
    }
    d.provenance.spec = spec_from(entry.at("spec"));
    d.provenance.seed = entry.at("seed").get<std::uint64_t>();
    d.provenance.attempts = entry.at("attempts").get<std::size_t>();
    d.provenance.rejections = entry.at("rejections").get<std::map<std::string, std::size_t>>();
    bundle.datasets.push_back(std::move(d));
  }
  return bundle;
}

}  // namespace proxylab::dyck
