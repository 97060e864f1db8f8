#include <filesystem>
#include <map>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "herdpipe/error.hpp"
#include "herdpipe/io/formats.hpp"

namespace herdpipe::io {

namespace {

using ojson = nlohmann::ordered_json;

// Row-major runs -> column-major runs (COCO's uncompressed RLE order).
std::vector<std::uint32_t> transpose_runs(const std::vector<std::uint32_t>& runs, int rows,
                                          int cols) {
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(rows) * cols, 0);
  std::size_t pos = 0;
  std::uint8_t value = 0;
  for (auto run : runs) {
    for (std::uint32_t k = 0; k < run; ++k) bits[pos++] = value;
    value ^= 1;
  }
  std::vector<std::uint32_t> out;
  std::uint8_t current = 0;
  std::uint32_t count = 0;
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) {
      const auto b = bits[static_cast<std::size_t>(r) * cols + c];
      if (b != current) {
        out.push_back(count);
        count = 0;
        current = b;
      }
      ++count;
    }
  }
  out.push_back(count);
  return out;
}

std::vector<std::uint32_t> row_major_from_column_major(const std::vector<std::uint32_t>& runs,
                                                       int height, int width) {
  // Transposing a column-major raster of height x width is the row-major
  // transform of the width x height raster.
  return transpose_runs(runs, width, height);
}

ojson segmentation_json(const MaskAnnotation& mask) {
  if (const auto* rle = std::get_if<RunLength>(&mask.encoding)) {
    ojson s;
    s["size"] = {mask.height, mask.width};
    s["counts"] = transpose_runs(rle->counts, mask.height, mask.width);
    return s;
  }
  std::vector<double> flat;
  for (const auto& [x, y] : std::get<Polygon>(mask.encoding).vertices) {
    flat.push_back(x);
    flat.push_back(y);
  }
  return ojson::array({flat});
}

MaskAnnotation mask_from_json(const nlohmann::json& s, ClassId cls, int width, int height) {
  MaskAnnotation m{cls, width, height, RunLength{}};
  if (s.is_object()) {
    const auto size = s.at("size").get<std::vector<int>>();
    if (size.size() != 2 || size[0] != height || size[1] != width) {
      throw ParseError("RLE size does not match the image");
    }
    if (!s.at("counts").is_array()) throw ParseError("compressed RLE strings are not supported");
    const auto counts = s.at("counts").get<std::vector<std::uint32_t>>();
    std::uint64_t total = 0;
    for (auto c : counts) total += c;
    if (total != static_cast<std::uint64_t>(width) * height) {
      throw ParseError(fmt::format("RLE counts sum to {} for a {}x{} image", total, width, height));
    }
    m.encoding = RunLength{row_major_from_column_major(counts, height, width)};
  } else if (s.is_array()) {
    if (s.size() != 1) throw ParseError("multi-part polygon segmentations are not supported");
    const auto flat = s[0].get<std::vector<double>>();
    if (flat.size() % 2 != 0) throw ParseError("polygon has an odd number of coordinates");
    Polygon p;
    for (std::size_t i = 0; i < flat.size(); i += 2) p.vertices.emplace_back(flat[i], flat[i + 1]);
    m.encoding = std::move(p);
  } else {
    throw ParseError("segmentation must be a polygon list or an RLE object");
  }
  try {
    validate(m);
  } catch (const ContractError& e) {
    throw ParseError(std::string("segmentation: ") + e.what());
  }
  return m;
}

}  // namespace

std::string write_coco_json(const Dataset& dataset) {
  dataset.validate();
  auto images = ojson::array();
  auto annotations = ojson::array();
  auto categories = ojson::array();

  std::size_t ann_id = 1;
  for (std::size_t i = 0; i < dataset.images.size(); ++i) {
    const auto& rec = dataset.manifest.records[i];
    const auto& img = dataset.images[i];
    ojson ij;
    ij["id"] = i + 1;
    ij["file_name"] = rec.path;
    ij["width"] = rec.width;
    ij["height"] = rec.height;
    ij["image_key"] = rec.id;
    ij["split"] = to_string(rec.split);
    ij["source"] = to_string(rec.source);
    images.push_back(std::move(ij));

    for (std::size_t b = 0; b < img.boxes.size(); ++b) {
      const auto& box = img.boxes[b].bbox;
      ojson aj;
      aj["id"] = ann_id++;
      aj["image_id"] = i + 1;
      aj["category_id"] = img.boxes[b].class_id + 1;
      aj["bbox"] = {box.x_min, box.y_min, box.width(), box.height()};
      aj["area"] = box.area();
      aj["iscrowd"] = 0;
      if (!img.masks.empty()) aj["segmentation"] = segmentation_json(img.masks[b]);
      if (!img.scores.empty()) aj["score"] = img.scores[b];
      annotations.push_back(std::move(aj));
    }
  }
  const auto& names = dataset.manifest.classes.names();
  for (std::size_t c = 0; c < names.size(); ++c) {
    categories.push_back(ojson{{"id", c + 1}, {"name", names[c]}});
  }
  ojson doc;
  doc["images"] = std::move(images);
  doc["annotations"] = std::move(annotations);
  doc["categories"] = std::move(categories);
  return doc.dump(2) + "\n";
}

Dataset parse_coco_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("COCO JSON: ") + e.what());
  }
  Dataset ds;
  try {
    for (const char* key : {"images", "annotations", "categories"}) {
      if (!doc.contains(key) || !doc[key].is_array()) {
        throw ParseError(fmt::format("COCO JSON: missing required array '{}'", key));
      }
    }
    std::map<long long, std::string> category_names;
    for (const auto& c : doc["categories"]) {
      const auto id = c.at("id").get<long long>();
      if (!category_names.emplace(id, c.at("name").get<std::string>()).second) {
        throw ParseError(fmt::format("COCO JSON: duplicate category id {}", id));
      }
    }
    std::map<long long, ClassId> category_index;
    std::vector<std::string> names;
    for (const auto& [id, name] : category_names) {
      category_index[id] = names.size();
      names.push_back(name);
    }
    try {
      if (!names.empty()) ds.manifest.classes = ClassSet(names);
    } catch (const ConfigError& e) {
      throw ParseError(std::string("COCO JSON categories: ") + e.what());
    }

    std::map<long long, std::size_t> image_index;
    for (const auto& ij : doc["images"]) {
      ManifestRecord r;
      const auto id = ij.at("id").get<long long>();
      r.path = ij.at("file_name").get<std::string>();
      r.width = ij.at("width").get<int>();
      r.height = ij.at("height").get<int>();
      r.id = ij.contains("image_key") ? ij["image_key"].get<std::string>()
                                      : std::filesystem::path(r.path).stem().string();
      if (ij.contains("split")) r.split = parse_split(ij["split"].get<std::string>());
      if (ij.contains("source")) r.source = parse_source(ij["source"].get<std::string>());
      if (!image_index.emplace(id, ds.images.size()).second) {
        throw ParseError(fmt::format("COCO JSON: duplicate image id {}", id));
      }
      ds.images.push_back({r.id, r.width, r.height, {}, {}, {}});
      ds.manifest.records.push_back(std::move(r));
    }

    // Per image: whether its annotations carry score / segmentation. Mixed is rejected.
    std::vector<int> has_score(ds.images.size(), -1);
    std::vector<int> has_mask(ds.images.size(), -1);
    for (const auto& aj : doc["annotations"]) {
      const auto ann_id = aj.at("id").get<long long>();
      const auto image_id = aj.at("image_id").get<long long>();
      auto it = image_index.find(image_id);
      if (it == image_index.end()) {
        throw ParseError(fmt::format("COCO JSON: annotation {} refers to unknown image_id {}",
                                     ann_id, image_id));
      }
      auto cit = category_index.find(aj.at("category_id").get<long long>());
      if (cit == category_index.end()) {
        throw ParseError(fmt::format("COCO JSON: annotation {} has unknown category_id", ann_id));
      }
      const auto bbox = aj.at("bbox").get<std::vector<double>>();
      if (bbox.size() != 4) throw ParseError(fmt::format("COCO JSON: annotation {} bbox needs 4 numbers", ann_id));
      auto& img = ds.images[it->second];
      img.boxes.push_back({{bbox[0], bbox[1], bbox[0] + bbox[2], bbox[1] + bbox[3]}, cit->second});

      const int score_flag = aj.contains("score") ? 1 : 0;
      const int mask_flag = aj.contains("segmentation") ? 1 : 0;
      auto& hs = has_score[it->second];
      auto& hm = has_mask[it->second];
      if ((hs != -1 && hs != score_flag) || (hm != -1 && hm != mask_flag)) {
        throw ParseError(fmt::format(
            "COCO JSON: image '{}' mixes annotations with and without score/segmentation", img.id));
      }
      hs = score_flag;
      hm = mask_flag;
      if (score_flag) img.scores.push_back(aj["score"].get<double>());
      if (mask_flag) {
        img.masks.push_back(mask_from_json(aj["segmentation"], cit->second, img.width, img.height));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("COCO JSON: ") + e.what());
  }
  try {
    ds.validate();
  } catch (const ContractError& e) {
    throw ParseError(std::string("COCO JSON: ") + e.what());
  } catch (const DatasetError& e) {
    throw ParseError(std::string("COCO JSON: ") + e.what());
  }
  return ds;
}

}  // namespace herdpipe::io
