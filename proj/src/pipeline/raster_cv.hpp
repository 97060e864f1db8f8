#pragma once

#include <string>

#include <opencv2/core.hpp>

#include "herdpipe/pipeline/raster.hpp"

namespace herdpipe::pipeline::detail {

// BGR(A) or gray 8-bit Mat -> RasterImage in RGB order.
RasterImage from_mat(const cv::Mat& mat, const std::string& what);

}  // namespace herdpipe::pipeline::detail
