#include "herdpipe/io/manifest.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "herdpipe/error.hpp"

namespace herdpipe::io {

namespace fs = std::filesystem;

std::string_view to_string(Split s) noexcept {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kValid: return "valid";
    case Split::kTest: return "test";
  }
  return "train";
}

std::string_view to_string(Source s) noexcept {
  switch (s) {
    case Source::kTeacherAuto: return "teacher-auto";
    case Source::kHuman: return "human";
    case Source::kFixture: return "fixture";
  }
  return "human";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "valid") return Split::kValid;
  if (s == "test") return Split::kTest;
  throw ParseError(fmt::format("unknown split '{}' (expected train, valid or test)", s));
}

Source parse_source(std::string_view s) {
  if (s == "teacher-auto") return Source::kTeacherAuto;
  if (s == "human") return Source::kHuman;
  if (s == "fixture") return Source::kFixture;
  throw ParseError(fmt::format("unknown annotation source '{}'", s));
}

const ManifestRecord* DatasetManifest::find(std::string_view id) const {
  for (const auto& r : records) {
    if (r.id == id) return &r;
  }
  return nullptr;
}

bool is_safe_relative_path(std::string_view path) {
  if (path.empty()) return false;
  const fs::path p{std::string(path)};
  if (p.is_absolute() || p.has_root_name() || p.has_root_directory()) return false;
  for (const auto& part : p) {
    if (part == "..") return false;
  }
  return true;
}

void check_image_id(std::string_view id) {
  if (id.empty() || id == "." || id == ".." || id.find_first_of("/\\") != std::string_view::npos ||
      id.find('\0') != std::string_view::npos) {
    throw DatasetError(fmt::format("image id '{}' is not usable as a file name", id));
  }
}

void DatasetManifest::validate() const {
  if (classes.empty() && !records.empty()) throw DatasetError("manifest has no classes");
  std::set<std::string> ids;
  for (const auto& r : records) {
    check_image_id(r.id);
    if (!ids.insert(r.id).second) throw DatasetError("duplicate image id '" + r.id + "'");
    if (!is_safe_relative_path(r.path)) {
      throw DatasetError(fmt::format("image '{}': path '{}' must be relative and stay inside the "
                                     "dataset root",
                                     r.id, r.path));
    }
    if (r.width <= 0 || r.height <= 0) {
      throw DatasetError(fmt::format("image '{}' has no dimensions", r.id));
    }
  }
}

nlohmann::ordered_json to_json(const DatasetManifest& m) {
  nlohmann::ordered_json j;
  j["classes"] = m.classes.names();
  if (m.normalization) {
    j["normalization"] = {{"mean", m.normalization->mean}, {"std", m.normalization->std}};
  }
  auto& images = j["images"] = nlohmann::ordered_json::array();
  for (const auto& r : m.records) {
    nlohmann::ordered_json e;
    e["id"] = r.id;
    e["path"] = r.path;
    e["width"] = r.width;
    e["height"] = r.height;
    e["split"] = to_string(r.split);
    e["source"] = to_string(r.source);
    images.push_back(std::move(e));
  }
  return j;
}

DatasetManifest manifest_from_json(const nlohmann::json& j) {
  DatasetManifest m;
  try {
    auto names = j.at("classes").get<std::vector<std::string>>();
    if (!names.empty()) m.classes = ClassSet(std::move(names));
    if (j.contains("normalization")) {
      Normalization n;
      n.mean = j["normalization"].at("mean").get<std::array<double, 3>>();
      n.std = j["normalization"].at("std").get<std::array<double, 3>>();
      m.normalization = n;
    }
    for (const auto& e : j.at("images")) {
      ManifestRecord r;
      r.id = e.at("id").get<std::string>();
      r.path = e.at("path").get<std::string>();
      r.width = e.at("width").get<int>();
      r.height = e.at("height").get<int>();
      r.split = parse_split(e.at("split").get<std::string>());
      r.source = parse_source(e.at("source").get<std::string>());
      m.records.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("manifest: ") + e.what());
  } catch (const ConfigError& e) {
    throw ParseError(std::string("manifest: ") + e.what());
  }
  m.validate();
  return m;
}

std::string read_text_file(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open '" + file.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error reading '" + file.string() + "'");
  return ss.str();
}

void write_text_file(const fs::path& file, std::string_view text) {
  std::error_code ec;
  if (file.has_parent_path()) fs::create_directories(file.parent_path(), ec);
  if (ec) throw IoError("cannot create directory for '" + file.string() + "': " + ec.message());
  const fs::path tmp = file.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw IoError("error writing '" + tmp.string() + "'");
  }
  fs::rename(tmp, file, ec);
  if (ec) throw IoError("cannot move '" + tmp.string() + "' into place: " + ec.message());
}

DatasetManifest load_manifest(const fs::path& file) {
  const auto text = read_text_file(file);
  try {
    return manifest_from_json(nlohmann::json::parse(text));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(file.string() + ": " + e.what());
  }
}

void save_manifest(const DatasetManifest& m, const fs::path& file) {
  m.validate();
  write_text_file(file, to_json(m).dump(2) + "\n");
}

void Dataset::validate() const {
  manifest.validate();
  if (images.size() != manifest.records.size()) {
    throw DatasetError(fmt::format("{} images for {} manifest records", images.size(),
                                   manifest.records.size()));
  }
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto& r = manifest.records[i];
    const auto& img = images[i];
    if (img.id != r.id) {
      throw DatasetError(fmt::format("image {} is '{}' but the manifest lists '{}'", i, img.id, r.id));
    }
    if (img.width != r.width || img.height != r.height) {
      throw DatasetError(fmt::format("image '{}' is {}x{} but the manifest says {}x{}", img.id,
                                     img.width, img.height, r.width, r.height));
    }
    herdpipe::validate(img, manifest.classes);
  }
}

}  // namespace herdpipe::io
