#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "herdpipe/core/types.hpp"

namespace herdpipe::io {

enum class Split { kTrain, kValid, kTest };
enum class Source { kTeacherAuto, kHuman, kFixture };

std::string_view to_string(Split s) noexcept;
std::string_view to_string(Source s) noexcept;
Split parse_split(std::string_view s);
Source parse_source(std::string_view s);

struct ManifestRecord {
  std::string id;
  std::string path;  // relative to the dataset root
  int width = 0;
  int height = 0;
  Split split = Split::kTrain;
  Source source = Source::kHuman;

  friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

// Per-channel tensor normalization for the trainer; pixel bytes are never
// rewritten with it.
struct Normalization {
  std::array<double, 3> mean{0.5, 0.5, 0.5};
  std::array<double, 3> std{0.5, 0.5, 0.5};

  friend bool operator==(const Normalization&, const Normalization&) = default;
};

struct DatasetManifest {
  ClassSet classes;
  std::vector<ManifestRecord> records;
  std::optional<Normalization> normalization;

  const ManifestRecord* find(std::string_view id) const;
  // Unique ids, positive sizes, relative paths without "..".
  void validate() const;

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

// True for a relative path with no ".." component and no root.
bool is_safe_relative_path(std::string_view path);
// Image ids become file names; they must not contain separators or be "." / "..".
void check_image_id(std::string_view id);

nlohmann::ordered_json to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const nlohmann::json& j);

DatasetManifest load_manifest(const std::filesystem::path& file);
void save_manifest(const DatasetManifest& m, const std::filesystem::path& file);

// A manifest plus one AnnotatedImage per record, in record order.
struct Dataset {
  DatasetManifest manifest;
  std::vector<AnnotatedImage> images;

  // Manifest validity, record/image alignment, and every image against the class set.
  void validate() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

std::string read_text_file(const std::filesystem::path& file);
// Writes via a temporary sibling and renames into place.
void write_text_file(const std::filesystem::path& file, std::string_view text);

}  // namespace herdpipe::io
