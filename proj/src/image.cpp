#include "fieldvision/image.hpp"

#include <cctype>
#include <fstream>

namespace fv {
namespace {

// Skips whitespace and '#' comment lines between header tokens.
int next_header_int(std::istream& in) {
  for (;;) {
    const int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  int v = -1;
  in >> v;
  if (!in) throw FormatError("pnm: malformed header");
  return v;
}

}  // namespace

void write_pnm(const Image& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("pnm: cannot open for writing: " + path);
  const bool color = img.channels() == 3;
  out << (color ? "P6" : "P5") << "\n" << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data.data()),
            static_cast<std::streamsize>(img.data.size()));
  if (!out) throw IoError("pnm: write failed: " + path);
}

Image read_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("pnm: cannot open: " + path);
  std::string magic;
  in >> magic;
  if (magic != "P6" && magic != "P5") throw FormatError("pnm: unsupported magic " + magic);
  const int w = next_header_int(in);
  const int h = next_header_int(in);
  const int maxval = next_header_int(in);
  if (maxval != 255) throw FormatError("pnm: only maxval 255 supported");
  in.get();  // single whitespace after the header
  Image img(w, h, magic == "P6" ? PixelFormat::rgb8 : PixelFormat::gray8);
  in.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
  if (!in) throw FormatError("pnm: truncated pixel data in " + path);
  return img;
}

}  // namespace fv
