#include "herdpipe/annotate/orchestrator.hpp"

#include <optional>

#include <fmt/format.h>

#include "herdpipe/core/geometry.hpp"
#include "herdpipe/core/parallel.hpp"
#include "herdpipe/error.hpp"
#include "herdpipe/io/formats.hpp"
#include "herdpipe/net/backend.hpp"

namespace herdpipe::annotate {

namespace fs = std::filesystem;

namespace {

ImageRef image_ref(const io::ManifestRecord& rec, const AnnotateOptions& options) {
  const fs::path file = options.image_root / rec.path;
  ImageRef ref;
  if (options.inline_images) {
    ref.b64 = net::base64_encode(io::read_text_file(file));
  } else {
    ref.path = file.string();
  }
  return ref;
}

struct Outcome {
  std::optional<AnnotatedImage> image;
  std::optional<AnnotationFailure> failure;
};

}  // namespace

AnnotateResult annotate_dataset(const io::DatasetManifest& images, const AnnotateOptions& options,
                                Teacher& teacher, Segmenter* segmenter) {
  images.validate();
  if (images.classes.empty() && images.records.empty()) {
    AnnotateResult empty;
    empty.segmented = segmenter != nullptr;
    return empty;
  }
  std::vector<std::string> prompts = options.prompts.empty() ? images.classes.names() : options.prompts;
  if (prompts.size() != images.classes.size()) {
    throw ConfigError(fmt::format("{} prompts for {} classes; prompt i labels class i", prompts.size(),
                                  images.classes.size()));
  }
  TeacherRequest probe{"", ImageRef{"probe", ""}, prompts, options.box_threshold, options.text_threshold};
  try {
    probe.validate();
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }

  const auto& records = images.records;
  const auto fail = [](const std::string& id, const char* stage, const std::exception& e) {
    return AnnotationFailure{id, stage, e.what()};
  };

  // Loop 1: teacher boxes per image, results in input-order slots.
  std::vector<Outcome> detected(records.size());
  parallel_for(records.size(), options.max_concurrent, [&](std::size_t i) {
    const auto& rec = records[i];
    try {
      TeacherRequest req{rec.id, image_ref(rec, options), prompts, options.box_threshold, options.text_threshold};
      const auto resp = teacher.detect(req);
      AnnotatedImage img{rec.id, rec.width, rec.height, {}, {}, {}};
      for (const auto& d : resp.detections) {
        if (d.prompt_index >= prompts.size()) {
          throw ProtocolError(fmt::format("prompt_index {} out of range", d.prompt_index));
        }
        if (d.confidence < options.box_threshold) continue;
        BBox clipped;
        try {
          clipped = clip_to_image(d.bbox, rec.width, rec.height);
        } catch (const ContractError&) {
          continue;  // entirely outside the image
        }
        img.boxes.push_back({clipped, d.prompt_index});
        if (options.keep_scores) img.scores.push_back(d.confidence);
      }
      detected[i].image = std::move(img);
    } catch (const Error& e) {
      detected[i].failure = fail(rec.id, "detect", e);
    }
  });

  AnnotateResult result;
  result.detections.manifest.classes = images.classes;
  result.detections.manifest.normalization = images.normalization;
  result.segmented = segmenter != nullptr;
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (detected[i].failure) {
      result.failures.push_back(*detected[i].failure);
      continue;
    }
    auto rec = records[i];
    rec.source = io::Source::kTeacherAuto;
    result.detections.manifest.records.push_back(std::move(rec));
    result.detections.images.push_back(*detected[i].image);
    kept.push_back(i);
  }

  if (segmenter) {
    // Loop 2: one segmenter call per image with all of its stored boxes.
    std::vector<Outcome> segmented(kept.size());
    parallel_for(kept.size(), options.max_concurrent, [&](std::size_t k) {
      const auto& rec = records[kept[k]];
      AnnotatedImage img = result.detections.images[k];
      try {
        if (!img.boxes.empty()) {
          SegmenterRequest req{rec.id, image_ref(rec, options), {}};
          for (const auto& b : img.boxes) req.boxes.push_back(b.bbox);
          const auto resp = segmenter->segment(req);
          if (resp.masks.size() != img.boxes.size()) {
            throw ProtocolError(fmt::format("segmenter returned {} masks for {} boxes", resp.masks.size(),
                                            img.boxes.size()));
          }
          for (std::size_t b = 0; b < img.boxes.size(); ++b) {
            MaskAnnotation mask{img.boxes[b].class_id, rec.width, rec.height, resp.masks[b]};
            try {
              validate(mask);
            } catch (const ContractError& e) {
              throw ProtocolError(fmt::format("mask {}: {}", b, e.what()));
            }
            img.masks.push_back(std::move(mask));
          }
        }
        segmented[k].image = std::move(img);
      } catch (const Error& e) {
        segmented[k].failure = fail(rec.id, "segment", e);
      }
    });
    result.segmentation.manifest.classes = images.classes;
    result.segmentation.manifest.normalization = images.normalization;
    for (std::size_t k = 0; k < kept.size(); ++k) {
      if (segmented[k].failure) {
        result.failures.push_back(*segmented[k].failure);
        continue;
      }
      result.segmentation.manifest.records.push_back(result.detections.manifest.records[k]);
      result.segmentation.images.push_back(*segmented[k].image);
    }
  }
  result.detections.validate();
  result.segmentation.validate();
  return result;
}

nlohmann::ordered_json to_json(const std::vector<AnnotationFailure>& failures) {
  auto out = nlohmann::ordered_json::array();
  for (const auto& f : failures) {
    out.push_back({{"image_id", f.image_id}, {"stage", f.stage}, {"message", f.message}});
  }
  return out;
}

void persist(const AnnotateResult& result, const fs::path& dir) {
  io::write_text_file(dir / "detections.json", io::write_coco_json(result.detections));
  if (result.segmented) io::write_text_file(dir / "segmentation.json", io::write_coco_json(result.segmentation));
  io::write_text_file(dir / "failures.json", to_json(result.failures).dump(2) + "\n");
}

}  // namespace herdpipe::annotate
