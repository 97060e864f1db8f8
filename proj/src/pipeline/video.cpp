#include <fmt/format.h>
#include <opencv2/core/utils/logger.hpp>
#include <opencv2/videoio.hpp>

#include "herdpipe/error.hpp"
#include "herdpipe/pipeline/pipeline.hpp"
#include "raster_cv.hpp"

namespace herdpipe::pipeline {

void extract_frames(const std::filesystem::path& video, const std::string& video_id, int stride,
                    const std::function<void(ExtractedFrame&&)>& on_frame) {
  if (stride < 1) throw ConfigError("frame stride must be >= 1");
  io::check_image_id(video_id);
  if (!std::filesystem::exists(video)) throw IoError(fmt::format("'{}' does not exist", video.string()));
  // Backend probing logs failed attempts; a failed open is reported below instead.
  const auto level = cv::utils::logging::setLogLevel(cv::utils::logging::LOG_LEVEL_SILENT);
  cv::VideoCapture cap(video.string());
  cv::utils::logging::setLogLevel(level);
  if (!cap.isOpened()) throw IoError(fmt::format("'{}' is not a decodable video", video.string()));
  cv::Mat frame;
  for (int index = 0; cap.read(frame); ++index) {
    if (index % stride != 0) continue;
    ExtractedFrame out;
    out.index = index;
    out.name = fmt::format("{}_{}.png", video_id, index);
    out.image = detail::from_mat(frame, video.string());
    on_frame(std::move(out));
  }
}

}  // namespace herdpipe::pipeline
