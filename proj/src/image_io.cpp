#include "srrn/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "srrn/error.hpp"

namespace srrn {
namespace {

cv::Mat read_raw(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    fail(ErrorCode::file_not_found, fmt::format("no such file: {}", path.string()));
  }
  cv::Mat raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (raw.empty()) fail(ErrorCode::decode_failed, fmt::format("cannot decode raster: {}", path.string()));
  if (raw.depth() != CV_8U) {
    fail(ErrorCode::decode_failed, fmt::format("{}: only 8-bit rasters are supported", path.string()));
  }
  return raw;
}

void write_raw(const cv::Mat& mat, const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), mat);
  } catch (const cv::Exception& e) {
    fail(ErrorCode::io_failure, fmt::format("cannot write {}: {}", path.string(), e.what()));
  }
  if (!ok) fail(ErrorCode::io_failure, fmt::format("cannot write {}", path.string()));
}

}  // namespace

double quantize8(double v) { return std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0; }

ImageTensor quantize8(const ImageTensor& image) {
  Planes p = image.planes();
  for (double& v : p.data()) v = quantize8(v);
  return ImageTensor(std::move(p));
}

ImageTensor load_image(const std::filesystem::path& path) {
  const cv::Mat raw = read_raw(path);
  if (raw.channels() != 3) {
    fail(ErrorCode::channel_mismatch,
         fmt::format("{}: expected 3 channels, found {}", path.string(), raw.channels()));
  }
  Planes p(3, raw.rows, raw.cols);
  for (int y = 0; y < raw.rows; ++y) {
    const auto* row = raw.ptr<cv::Vec3b>(y);
    for (int x = 0; x < raw.cols; ++x) {
      // OpenCV stores BGR.
      p.at(0, y, x) = row[x][2] / 255.0;
      p.at(1, y, x) = row[x][1] / 255.0;
      p.at(2, y, x) = row[x][0] / 255.0;
    }
  }
  return ImageTensor(std::move(p));
}

void save_image(const ImageTensor& image, const std::filesystem::path& path) {
  cv::Mat mat(image.height(), image.width(), CV_8UC3);
  const auto to_byte = [](double v) {
    return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
  };
  for (int y = 0; y < image.height(); ++y) {
    auto* row = mat.ptr<cv::Vec3b>(y);
    for (int x = 0; x < image.width(); ++x) {
      row[x] = cv::Vec3b(to_byte(image.at(2, y, x)), to_byte(image.at(1, y, x)), to_byte(image.at(0, y, x)));
    }
  }
  write_raw(mat, path);
}

SemanticMap load_semantic_map(const std::filesystem::path& path, int class_count) {
  const cv::Mat raw = read_raw(path);
  if (raw.channels() != 1) {
    fail(ErrorCode::channel_mismatch,
         fmt::format("{}: label raster must be single-channel, found {}", path.string(), raw.channels()));
  }
  std::vector<std::uint8_t> labels(static_cast<std::size_t>(raw.rows) * raw.cols);
  for (int y = 0; y < raw.rows; ++y) {
    const auto* row = raw.ptr<unsigned char>(y);
    std::copy(row, row + raw.cols, labels.begin() + static_cast<std::ptrdiff_t>(y) * raw.cols);
  }
  return SemanticMap(raw.rows, raw.cols, std::move(labels), class_count);
}

void save_semantic_map(const SemanticMap& map, const std::filesystem::path& path) {
  cv::Mat mat(map.height(), map.width(), CV_8UC1);
  for (int y = 0; y < map.height(); ++y) {
    auto* row = mat.ptr<unsigned char>(y);
    for (int x = 0; x < map.width(); ++x) row[x] = map.at(y, x);
  }
  write_raw(mat, path);
}

}  // namespace srrn
