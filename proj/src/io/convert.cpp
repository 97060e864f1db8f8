#include "herdpipe/io/convert.hpp"

#include <fmt/format.h>

#include "herdpipe/error.hpp"
#include "herdpipe/io/formats.hpp"

namespace herdpipe::io {

namespace fs = std::filesystem;

namespace {

constexpr const char* kManifestName = "manifest.json";
constexpr const char* kClassesName = "classes.txt";

std::string classes_txt(const ClassSet& classes) {
  std::string out;
  for (const auto& n : classes.names()) out += n + "\n";
  return out;
}

std::string data_yaml(const ClassSet& classes) {
  std::string out = "path: .\ntrain: train\nval: valid\ntest: test\n";
  out += fmt::format("nc: {}\nnames:\n", classes.size());
  for (const auto& n : classes.names()) {
    std::string escaped;
    for (char c : n) escaped += c == '\'' ? std::string("''") : std::string(1, c);
    out += fmt::format("  - '{}'\n", escaped);
  }
  return out;
}

fs::path yolo_label_path(const fs::path& root, const ManifestRecord& r) {
  return root / std::string(to_string(r.split)) / "labels" / (r.id + ".txt");
}

DatasetManifest sidecar_manifest(const fs::path& dir, const fs::path& override_path) {
  const fs::path file = override_path.empty() ? dir / kManifestName : override_path;
  if (!fs::exists(file)) {
    throw IoError(fmt::format("'{}' not found; this format needs a manifest for image sizes",
                              file.string()));
  }
  return load_manifest(file);
}

// Parser errors gain the file that produced them.
template <typename F>
auto with_file(const fs::path& file, F&& f) {
  try {
    return f();
  } catch (const ParseError& e) {
    throw ParseError(fmt::format("{}: {}", file.string(), e.what()));
  }
}

}  // namespace

std::string_view to_string(Format f) noexcept {
  switch (f) {
    case Format::kCocoJson: return "coco-json";
    case Format::kVocXml: return "voc-xml";
    case Format::kYoloTxt: return "yolo-txt";
    case Format::kCsv: return "csv";
  }
  return "coco-json";
}

Format parse_format(std::string_view token) {
  for (auto f : {Format::kCocoJson, Format::kVocXml, Format::kYoloTxt, Format::kCsv}) {
    if (token == to_string(f)) return f;
  }
  throw ConfigError(fmt::format(
      "unknown format '{}' (expected coco-json, voc-xml, yolo-txt or csv)", token));
}

std::string ConvertSummary::describe() const {
  return fmt::format(
      "images: {}\nboxes: {}\nmasks dropped: {}\nscores dropped: {}\nfiles written: {}\n", images,
      boxes, masks_dropped, scores_dropped, files_written);
}

Dataset read_dataset(const fs::path& path, Format format, const fs::path& manifest) {
  switch (format) {
    case Format::kCocoJson: {
      const auto text = read_text_file(path);
      return with_file(path, [&] { return parse_coco_json(text); });
    }
    case Format::kCsv: {
      const auto m = sidecar_manifest(path.parent_path(), manifest);
      const auto text = read_text_file(path);
      return with_file(path, [&] { return parse_csv(text, m); });
    }
    case Format::kYoloTxt:
    case Format::kVocXml: {
      Dataset ds;
      ds.manifest = sidecar_manifest(path, manifest);
      for (const auto& r : ds.manifest.records) {
        AnnotatedImage img;
        if (format == Format::kYoloTxt) {
          const auto file = yolo_label_path(path, r);
          // An image without a label file has no boxes.
          const auto text = fs::exists(file) ? read_text_file(file) : std::string();
          img = with_file(file, [&] {
            return parse_yolo_txt(text, r.width, r.height, ds.manifest.classes);
          });
        } else {
          const auto file = path / (r.id + ".xml");
          const auto text = read_text_file(file);
          img = with_file(file, [&] {
            auto parsed = parse_voc_xml(text, ds.manifest.classes);
            if (parsed.width != r.width || parsed.height != r.height) {
              throw ParseError(fmt::format("size {}x{} disagrees with the manifest ({}x{})",
                                           parsed.width, parsed.height, r.width, r.height));
            }
            return parsed;
          });
        }
        img.id = r.id;
        img.width = r.width;
        img.height = r.height;
        ds.images.push_back(std::move(img));
      }
      ds.validate();
      return ds;
    }
  }
  throw ConfigError("unsupported format");
}

ConvertSummary write_dataset(const Dataset& dataset, const fs::path& path, Format format) {
  dataset.validate();
  ConvertSummary s;
  s.images = dataset.images.size();
  for (const auto& img : dataset.images) {
    s.boxes += img.boxes.size();
    if (format != Format::kCocoJson) s.masks_dropped += img.masks.size();
    if (format == Format::kYoloTxt || format == Format::kVocXml) {
      s.scores_dropped += img.scores.size();
    }
  }
  auto put = [&](const fs::path& file, std::string_view text) {
    write_text_file(file, text);
    ++s.files_written;
  };
  auto box_only = [](AnnotatedImage img) {
    img.masks.clear();
    img.scores.clear();
    return img;
  };

  switch (format) {
    case Format::kCocoJson:
      put(path, write_coco_json(dataset));
      break;
    case Format::kCsv: {
      Dataset stripped = dataset;
      for (auto& img : stripped.images) img.masks.clear();
      put(path, write_csv(stripped));
      put(path.parent_path() / kManifestName, to_json(dataset.manifest).dump(2) + "\n");
      break;
    }
    case Format::kYoloTxt:
      for (std::size_t i = 0; i < dataset.images.size(); ++i) {
        put(yolo_label_path(path, dataset.manifest.records[i]),
            write_yolo_txt(box_only(dataset.images[i])));
      }
      put(path / kClassesName, classes_txt(dataset.manifest.classes));
      put(path / "data.yaml", data_yaml(dataset.manifest.classes));
      put(path / kManifestName, to_json(dataset.manifest).dump(2) + "\n");
      break;
    case Format::kVocXml:
      for (std::size_t i = 0; i < dataset.images.size(); ++i) {
        const auto& r = dataset.manifest.records[i];
        put(path / (r.id + ".xml"),
            write_voc_xml(box_only(dataset.images[i]), dataset.manifest.classes,
                          fs::path(r.path).filename().string()));
      }
      put(path / kClassesName, classes_txt(dataset.manifest.classes));
      put(path / kManifestName, to_json(dataset.manifest).dump(2) + "\n");
      break;
  }
  return s;
}

ConvertSummary convert(const fs::path& in, Format in_format, const fs::path& out,
                       Format out_format, const fs::path& manifest) {
  return write_dataset(read_dataset(in, in_format, manifest), out, out_format);
}

}  // namespace herdpipe::io
