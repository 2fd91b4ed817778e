#include "pcvit/image_io.hpp"

#include <png.h>

#include <cstring>
#include <vector>

namespace pcvit {

GrayscaleImage load_png(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (png_image_begin_read_from_file(&image, path.c_str()) == 0) {
    throw IoError("cannot read image " + path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
  if (png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr) == 0) {
    const std::string message = image.message;
    png_image_free(&image);
    throw IoError("cannot decode image " + path.string() + ": " + message);
  }
  GrayscaleImage out{image.height, image.width, {}};
  out.pixels.resize(out.height * out.width);
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    const int sum = buffer[3 * i] + buffer[3 * i + 1] + buffer[3 * i + 2];
    out.pixels[i] = (sum + 1) / 3;
  }
  return out;
}

void save_png(const std::filesystem::path& path, const GrayscaleImage& img) {
  validate(img);
  std::vector<png_byte> buffer(img.pixels.begin(), img.pixels.end());
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = PNG_FORMAT_GRAY;
  if (png_image_write_to_file(&image, path.c_str(), 0, buffer.data(), 0, nullptr) == 0) {
    throw IoError("cannot write image " + path.string() + ": " + image.message);
  }
}

}  // namespace pcvit
