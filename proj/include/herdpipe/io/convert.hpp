#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>

#include "herdpipe/io/manifest.hpp"

namespace herdpipe::io {

enum class Format { kCocoJson, kVocXml, kYoloTxt, kCsv };

std::string_view to_string(Format f) noexcept;
// Throws ConfigError naming the accepted tokens.
Format parse_format(std::string_view token);

// On-disk layouts:
//   coco-json  a single .json file
//   voc-xml    a directory of <id>.xml plus classes.txt and manifest.json
//   yolo-txt   a directory with <split>/labels/<id>.txt, classes.txt, data.yaml, manifest.json
//   csv        a .csv file with manifest.json next to it
// Formats that carry no image sizes read them from `manifest` when given,
// otherwise from the manifest.json stored with the data.
Dataset read_dataset(const std::filesystem::path& path, Format format,
                     const std::filesystem::path& manifest = {});

struct ConvertSummary {
  std::size_t images = 0;
  std::size_t boxes = 0;
  std::size_t masks_dropped = 0;
  std::size_t scores_dropped = 0;
  std::size_t files_written = 0;

  std::string describe() const;
};

ConvertSummary write_dataset(const Dataset& dataset, const std::filesystem::path& path,
                             Format format);

ConvertSummary convert(const std::filesystem::path& in, Format in_format,
                       const std::filesystem::path& out, Format out_format,
                       const std::filesystem::path& manifest = {});

}  // namespace herdpipe::io
