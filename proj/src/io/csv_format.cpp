#include <algorithm>
#include <map>
#include <numeric>

#include <fmt/format.h>

#include "herdpipe/core/csv.hpp"
#include "herdpipe/error.hpp"
#include "herdpipe/io/formats.hpp"
#include "text_util.hpp"

namespace herdpipe::io {

namespace {
constexpr std::string_view kHeader = "image_id,class,x_min,y_min,x_max,y_max,confidence,split";
}

std::string write_csv(const Dataset& dataset) {
  dataset.validate();
  std::vector<std::size_t> order(dataset.images.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](auto a, auto b) { return dataset.images[a].id < dataset.images[b].id; });

  std::string out(kHeader);
  out += '\n';
  for (std::size_t i : order) {
    const auto& img = dataset.images[i];
    const auto split = to_string(dataset.manifest.records[i].split);
    for (std::size_t b = 0; b < img.boxes.size(); ++b) {
      const auto& box = img.boxes[b].bbox;
      const std::string conf = img.scores.empty() ? std::string() : fmt::format("{}", img.scores[b]);
      out += fmt::format("{},{},{},{},{},{},{},{}\n", csv::quote(img.id),
                         csv::quote(dataset.manifest.classes.name(img.boxes[b].class_id)), box.x_min,
                         box.y_min, box.x_max, box.y_max, conf, split);
    }
  }
  return out;
}

Dataset parse_csv(std::string_view text, const DatasetManifest& manifest) {
  manifest.validate();
  const auto records = csv::parse(text);
  if (records.empty()) throw ParseError("CSV: missing header", 1);
  const auto& header = records.front().fields;
  std::string joined;
  for (std::size_t i = 0; i < header.size(); ++i) joined += (i ? "," : "") + header[i];
  if (joined != kHeader) throw ParseError(fmt::format("CSV: unexpected header '{}'", joined), 1);

  Dataset ds;
  ds.manifest = manifest;
  std::map<std::string, std::size_t> index;
  for (const auto& r : manifest.records) {
    index.emplace(r.id, ds.images.size());
    ds.images.push_back({r.id, r.width, r.height, {}, {}, {}});
  }
  std::vector<int> scored(ds.images.size(), -1);

  for (std::size_t n = 1; n < records.size(); ++n) {
    const auto& rec = records[n];
    const int line = rec.line;
    const auto& f = rec.fields;
    if (f.size() != 8) throw ParseError(fmt::format("CSV: expected 8 fields, got {}", f.size()), line);
    auto it = index.find(f[0]);
    if (it == index.end()) throw ParseError(fmt::format("CSV: image '{}' not in the manifest", f[0]), line);
    auto cls = manifest.classes.find(f[1]);
    if (!cls) {
      throw ParseError(fmt::format("CSV: unknown class '{}'; known classes: {}", f[1],
                                   fmt::join(manifest.classes.names(), ", ")),
                       line);
    }
    double v[4];
    for (int k = 0; k < 4; ++k) {
      const auto d = detail::parse_double(f[2 + k]);
      if (!d) throw ParseError(fmt::format("CSV: '{}' is not a number", f[2 + k]), line);
      v[k] = *d;
    }
    auto& img = ds.images[it->second];
    const BBox box{v[0], v[1], v[2], v[3]};
    if (!is_valid(box) || box.x_max > img.width || box.y_max > img.height) {
      throw ParseError(fmt::format("CSV: box outside image '{}'", img.id), line);
    }
    const auto split = parse_split(f[7]);
    if (split != manifest.records[it->second].split) {
      throw ParseError(fmt::format("CSV: split '{}' disagrees with the manifest for '{}'", f[7], img.id),
                       line);
    }
    const int has_conf = f[6].empty() ? 0 : 1;
    if (scored[it->second] != -1 && scored[it->second] != has_conf) {
      throw ParseError(fmt::format("CSV: image '{}' mixes rows with and without confidence", img.id),
                       line);
    }
    scored[it->second] = has_conf;
    if (has_conf) {
      const auto c = detail::parse_double(f[6]);
      if (!c || *c < 0.0 || *c > 1.0) {
        throw ParseError(fmt::format("CSV: confidence '{}' is not a number in [0, 1]", f[6]), line);
      }
      img.scores.push_back(*c);
    }
    img.boxes.push_back({box, *cls});
  }
  return ds;
}

}  // namespace herdpipe::io
