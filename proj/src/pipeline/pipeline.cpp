#include "herdpipe/pipeline/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include <fmt/format.h>

#include "herdpipe/core/rng.hpp"
#include "herdpipe/error.hpp"

namespace herdpipe::pipeline {

namespace {

// Stream ids keep split and augmentation draws independent under one seed.
constexpr std::uint32_t kSplitStream = 1;
constexpr std::uint32_t kCropStream = 2;
constexpr std::uint32_t kGrayStream = 3;

std::uint8_t clamp_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp<long>(std::lround(v), 0, 255));
}

}  // namespace

void PipelineConfig::validate() const {
  if (frame_stride < 1) throw ConfigError("frame_stride must be >= 1");
  if (noise_kernel < 1 || noise_kernel % 2 == 0) throw ConfigError("noise_kernel must be odd and >= 1");
  if (!(brightness_factor >= 0.0) || !(contrast_factor >= 0.0)) {
    throw ConfigError("brightness_factor and contrast_factor must be non-negative");
  }
  double sum = 0.0;
  for (double f : split_fractions) {
    if (!(f >= 0.0 && f <= 1.0)) throw ConfigError("split fractions must lie in [0, 1]");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ConfigError(fmt::format("split fractions sum to {}, expected 1", sum));
  }
  for (double s : normalize_std) {
    if (!(s > 0.0)) throw ConfigError("normalize_std entries must be positive");
  }
  if (!(crop_max_zoom >= 0.0 && crop_max_zoom < 1.0)) throw ConfigError("crop_max_zoom must lie in [0, 1)");
  if (!(grayscale_fraction >= 0.0 && grayscale_fraction <= 1.0)) {
    throw ConfigError("grayscale_fraction must lie in [0, 1]");
  }
  if (outputs_per_train_image < 1) throw ConfigError("outputs_per_train_image must be >= 1");
}

PipelineConfig pipeline_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("pipeline config must be a JSON object");
  PipelineConfig cfg;
  static const std::set<std::string> known{
      "frame_stride",       "brightness_factor",       "contrast_factor", "normalize_mean",
      "normalize_std",      "noise_kernel",            "split_fractions", "crop_max_zoom",
      "grayscale_fraction", "outputs_per_train_image", "rng_seed"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ConfigError(fmt::format("unknown pipeline config key '{}'", key));
  }
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j[key].get<std::decay_t<decltype(field)>>();
    };
    get("frame_stride", cfg.frame_stride);
    get("brightness_factor", cfg.brightness_factor);
    get("contrast_factor", cfg.contrast_factor);
    get("normalize_mean", cfg.normalize_mean);
    get("normalize_std", cfg.normalize_std);
    get("noise_kernel", cfg.noise_kernel);
    get("split_fractions", cfg.split_fractions);
    get("crop_max_zoom", cfg.crop_max_zoom);
    get("grayscale_fraction", cfg.grayscale_fraction);
    get("outputs_per_train_image", cfg.outputs_per_train_image);
    get("rng_seed", cfg.rng_seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("pipeline config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

nlohmann::ordered_json to_json(const PipelineConfig& cfg) {
  return {{"frame_stride", cfg.frame_stride},
          {"brightness_factor", cfg.brightness_factor},
          {"contrast_factor", cfg.contrast_factor},
          {"normalize_mean", cfg.normalize_mean},
          {"normalize_std", cfg.normalize_std},
          {"noise_kernel", cfg.noise_kernel},
          {"split_fractions", cfg.split_fractions},
          {"crop_max_zoom", cfg.crop_max_zoom},
          {"grayscale_fraction", cfg.grayscale_fraction},
          {"outputs_per_train_image", cfg.outputs_per_train_image},
          {"rng_seed", cfg.rng_seed}};
}

std::vector<int> frame_indices(int frame_count, int stride) {
  if (stride < 1) throw ConfigError("frame stride must be >= 1");
  std::vector<int> out;
  for (int i = 0; i < frame_count; i += stride) out.push_back(i);
  return out;
}

RasterImage preprocess(const RasterImage& img, const PipelineConfig& cfg) {
  validate(img);
  cfg.validate();
  RasterImage adjusted = img;
  for (auto& s : adjusted.samples) {
    const auto bright = clamp_byte(s * cfg.brightness_factor);
    s = clamp_byte((bright - 128.0) * cfg.contrast_factor + 128.0);
  }
  const int k = cfg.noise_kernel;
  if (k == 1) return adjusted;
  const int r = k / 2;
  const long area = static_cast<long>(k) * k;
  RasterImage out = adjusted;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < img.channels; ++c) {
        long sum = 0;
        for (int dy = -r; dy <= r; ++dy) {
          const int yy = std::clamp(y + dy, 0, img.height - 1);
          for (int dx = -r; dx <= r; ++dx) {
            sum += adjusted.at(std::clamp(x + dx, 0, img.width - 1), yy, c);
          }
        }
        out.at(x, y, c) = static_cast<std::uint8_t>((2 * sum + area) / (2 * area));
      }
    }
  }
  return out;
}

io::Normalization normalization_metadata(const PipelineConfig& cfg) {
  return {cfg.normalize_mean, cfg.normalize_std};
}

std::array<std::size_t, 3> split_counts(std::size_t n, const std::array<double, 3>& fractions) {
  std::array<std::size_t, 3> counts{};
  std::size_t left = n;
  for (std::size_t i = 0; i + 1 < counts.size(); ++i) {
    const auto want = static_cast<std::size_t>(std::floor(static_cast<double>(n) * fractions[i] + 0.5));
    counts[i] = std::min(want, left);
    left -= counts[i];
  }
  counts.back() = left;
  return counts;
}

std::array<std::size_t, 3> SplitAssignment::counts() const {
  std::array<std::size_t, 3> c{};
  for (auto s : splits) ++c[static_cast<std::size_t>(s)];
  return c;
}

SplitAssignment split(const std::vector<std::string>& ids, const std::array<double, 3>& fractions,
                      std::uint64_t seed) {
  PipelineConfig check;
  check.split_fractions = fractions;
  check.validate();
  if (ids.empty()) throw DatasetError("cannot split an empty id list");
  std::set<std::string> seen;
  for (const auto& id : ids) {
    if (!seen.insert(id).second) throw DatasetError(fmt::format("duplicate image id '{}'", id));
  }
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed, kSplitStream);
  rng.shuffle(std::span<std::size_t>(order));

  const auto counts = split_counts(ids.size(), fractions);
  SplitAssignment a;
  a.seed = seed;
  a.ids = ids;
  a.splits.resize(ids.size());
  std::size_t pos = 0;
  for (std::size_t s = 0; s < counts.size(); ++s) {
    for (std::size_t k = 0; k < counts[s]; ++k) a.splits[order[pos++]] = static_cast<io::Split>(s);
  }
  return a;
}

void apply_split(io::DatasetManifest& manifest, const SplitAssignment& assignment) {
  std::map<std::string, io::Split> lookup;
  for (std::size_t i = 0; i < assignment.ids.size(); ++i) lookup[assignment.ids[i]] = assignment.splits[i];
  for (auto& r : manifest.records) {
    auto it = lookup.find(r.id);
    if (it == lookup.end()) throw DatasetError(fmt::format("image '{}' has no split assignment", r.id));
    r.split = it->second;
  }
}

AnnotatedImage crop_annotations(const AnnotatedImage& img, const CropWindow& window) {
  if (img.width <= 0 || img.height <= 0) {
    throw ContractError(fmt::format("image '{}' has no dimensions", img.id));
  }
  if (window.width <= 0 || window.height <= 0 || window.x < 0 || window.y < 0 ||
      window.x + window.width > img.width || window.y + window.height > img.height) {
    throw ContractError("crop window must lie inside the image");
  }
  AnnotatedImage out{img.id, window.width, window.height, {}, {}, {}};
  const double w = window.width;
  const double h = window.height;
  for (std::size_t i = 0; i < img.boxes.size(); ++i) {
    const auto& b = img.boxes[i].bbox;
    const BBox moved{b.x_min - window.x, b.y_min - window.y, b.x_max - window.x, b.y_max - window.y};
    if (moved.x_min > w || moved.y_min > h || moved.x_max < 0.0 || moved.y_max < 0.0) continue;
    const BBox clipped{std::max(moved.x_min, 0.0), std::max(moved.y_min, 0.0),
                       std::min(moved.x_max, w), std::min(moved.y_max, h)};
    if (clipped.area() < 0.1 * b.area()) continue;
    // A degenerate box survives only if it lies wholly inside the window.
    if (b.area() == 0.0 && !(clipped == moved)) continue;
    out.boxes.push_back({clipped, img.boxes[i].class_id});
    if (!img.scores.empty()) out.scores.push_back(img.scores[i]);
  }
  return out;
}

RasterImage apply_augmentation(const RasterImage& img, const AugmentChoice& choice) {
  validate(img);
  const auto& win = choice.window;
  if (win.width <= 0 || win.height <= 0 || win.x < 0 || win.y < 0 ||
      win.x + win.width > img.width || win.y + win.height > img.height) {
    throw ContractError(fmt::format("crop window for '{}' exceeds the {}x{} image", choice.output_id,
                                    img.width, img.height));
  }
  const int channels = choice.grayscale ? 1 : img.channels;
  RasterImage out(win.width, win.height, channels);
  for (int y = 0; y < win.height; ++y) {
    for (int x = 0; x < win.width; ++x) {
      if (!choice.grayscale) {
        for (int c = 0; c < channels; ++c) out.at(x, y, c) = img.at(win.x + x, win.y + y, c);
      } else if (img.channels == 1) {
        out.at(x, y, 0) = img.at(win.x + x, win.y + y, 0);
      } else {
        const double luma = 0.299 * img.at(win.x + x, win.y + y, 0) +
                            0.587 * img.at(win.x + x, win.y + y, 1) +
                            0.114 * img.at(win.x + x, win.y + y, 2);
        out.at(x, y, 0) = clamp_byte(luma);
      }
    }
  }
  return out;
}

AugmentResult augment_train(const io::Dataset& dataset, const PipelineConfig& cfg) {
  cfg.validate();
  dataset.validate();
  const auto& records = dataset.manifest.records;

  std::vector<std::size_t> train;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].split == io::Split::kTrain) train.push_back(i);
  }
  const auto n_gray = std::min(
      train.size(),
      static_cast<std::size_t>(std::floor(cfg.grayscale_fraction * static_cast<double>(train.size()) + 0.5)));
  std::vector<std::size_t> gray_pick = train;
  Rng gray_rng(cfg.rng_seed, kGrayStream);
  gray_rng.shuffle(std::span<std::size_t>(gray_pick));
  const std::set<std::size_t> gray(gray_pick.begin(), gray_pick.begin() + static_cast<std::ptrdiff_t>(n_gray));

  std::set<std::string> existing;
  for (const auto& r : records) existing.insert(r.id);

  Rng crop_rng(cfg.rng_seed, kCropStream);
  AugmentResult result;
  result.dataset.manifest.classes = dataset.manifest.classes;
  result.dataset.manifest.normalization = dataset.manifest.normalization;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& rec = records[i];
    result.dataset.manifest.records.push_back(rec);
    result.dataset.images.push_back(dataset.images[i]);
    if (rec.split != io::Split::kTrain) continue;
    for (int k = 1; k < cfg.outputs_per_train_image; ++k) {
      AugmentChoice choice;
      choice.source_id = rec.id;
      choice.output_id = fmt::format("{}_aug{}", rec.id, k);
      if (existing.count(choice.output_id)) {
        throw DatasetError(fmt::format("augmented id '{}' collides with an existing image", choice.output_id));
      }
      choice.zoom = crop_rng.uniform01() * cfg.crop_max_zoom;
      auto side = [&](int dim) {
        return std::clamp(static_cast<int>(std::lround((1.0 - choice.zoom) * dim)), 1, dim);
      };
      choice.window.width = side(rec.width);
      choice.window.height = side(rec.height);
      choice.window.x = static_cast<int>(crop_rng.below(static_cast<std::uint64_t>(rec.width - choice.window.width) + 1));
      choice.window.y = static_cast<int>(crop_rng.below(static_cast<std::uint64_t>(rec.height - choice.window.height) + 1));
      choice.grayscale = gray.count(i) > 0;

      io::ManifestRecord out = rec;
      out.id = choice.output_id;
      out.path = (std::filesystem::path(rec.path).parent_path() / (choice.output_id + ".png")).generic_string();
      out.width = choice.window.width;
      out.height = choice.window.height;
      auto img = crop_annotations(dataset.images[i], choice.window);
      img.id = out.id;
      result.dataset.manifest.records.push_back(std::move(out));
      result.dataset.images.push_back(std::move(img));
      result.choices.push_back(std::move(choice));
    }
  }
  result.dataset.validate();
  return result;
}

}  // namespace herdpipe::pipeline
