#include "tacmap/records.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <map>
#include <memory>
#include <sstream>

#include <png.h>

namespace tacmap {

static_assert(std::endian::native == std::endian::little, "record I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'T', 'A', 'C', 'T', 'R', 'E', 'C', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T value;
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw RecordError("truncated touch record");
  return value;
}

}  // namespace

void quantize_to_record(TactileObservation& obs) {
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) obs.pose.rotation(r, c) = static_cast<float>(obs.pose.rotation(r, c));
    obs.pose.translation[r] = static_cast<float>(obs.pose.translation[r]);
  }
}

TouchRecordWriter::TouchRecordWriter(const std::string& path) : out_(path, std::ios::binary), path_(path) {
  if (!out_) throw RecordError("cannot write " + path);
  out_.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out_, kVersion);
  put<std::uint32_t>(out_, 0);
}

void TouchRecordWriter::write(const TactileObservation& obs) {
  put<std::int32_t>(out_, obs.timestep);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) put<float>(out_, static_cast<float>(obs.pose.rotation(r, c)));
    put<float>(out_, static_cast<float>(obs.pose.translation[r]));
  }
  put<std::uint32_t>(out_, static_cast<std::uint32_t>(obs.width));
  put<std::uint32_t>(out_, static_cast<std::uint32_t>(obs.height));
  out_.write(reinterpret_cast<const char*>(obs.heightmap.data()),
             static_cast<std::streamsize>(obs.heightmap.size() * sizeof(float)));
  std::vector<std::uint8_t> bits((obs.contact.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < obs.contact.size(); ++i)
    if (obs.contact[i]) bits[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
  out_.write(reinterpret_cast<const char*>(bits.data()), static_cast<std::streamsize>(bits.size()));
  out_.flush();
  if (!out_) throw RecordError("write failed: " + path_);
}

std::vector<TactileObservation> read_touch_records(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RecordError("cannot open " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw RecordError("not a touch record file: " + path);
  if (get<std::uint32_t>(in) != kVersion) throw RecordError("unsupported touch record version");
  get<std::uint32_t>(in);

  std::vector<TactileObservation> records;
  while (in.peek() != std::char_traits<char>::eof()) {
    TactileObservation obs;
    obs.timestep = get<std::int32_t>(in);
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) obs.pose.rotation(r, c) = get<float>(in);
      obs.pose.translation[r] = get<float>(in);
    }
    obs.width = static_cast<int>(get<std::uint32_t>(in));
    obs.height = static_cast<int>(get<std::uint32_t>(in));
    const auto pixels = static_cast<std::size_t>(obs.width) * obs.height;
    if (obs.width <= 0 || obs.height <= 0 || pixels > (1u << 26)) throw RecordError("implausible heightmap size");
    obs.heightmap.resize(pixels);
    in.read(reinterpret_cast<char*>(obs.heightmap.data()), static_cast<std::streamsize>(pixels * sizeof(float)));
    std::vector<std::uint8_t> bits((pixels + 7) / 8);
    in.read(reinterpret_cast<char*>(bits.data()), static_cast<std::streamsize>(bits.size()));
    if (!in) throw RecordError("truncated touch record");
    obs.contact.resize(pixels);
    for (std::size_t i = 0; i < pixels; ++i) obs.contact[i] = (bits[i / 8] >> (i % 8)) & 1u;
    records.push_back(std::move(obs));
  }
  return records;
}

// ---------------------------------------------------------------------------

void save_depth_png(const DepthMap& map, const std::string& png_path, const std::string& sidecar_path) {
  const auto& cam = map.camera;
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(png_path.c_str(), "wb"), &std::fclose);
  if (!fp) throw RecordError("cannot write " + png_path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw RecordError("libpng initialisation failed");
  }
  std::vector<png_byte> row(static_cast<std::size_t>(cam.width) * 2);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw RecordError("PNG encoding failed: " + png_path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(cam.width), static_cast<png_uint_32>(cam.height), 16,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int r = 0; r < cam.height; ++r) {
    for (int c = 0; c < cam.width; ++c) {
      const double mm = std::round(static_cast<double>(map.at(c, r)) * 1000.0);
      const auto v = static_cast<std::uint16_t>(std::clamp(mm, 0.0, 65535.0));
      row[2 * c] = static_cast<png_byte>(v >> 8);  // PNG stores 16-bit samples big-endian
      row[2 * c + 1] = static_cast<png_byte>(v & 0xff);
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);

  std::ofstream side(sidecar_path);
  if (!side) throw RecordError("cannot write " + sidecar_path);
  side.precision(17);
  side << "width=" << cam.width << "\nheight=" << cam.height << "\nfx=" << cam.fx << "\nfy=" << cam.fy
       << "\ncx=" << cam.cx << "\ncy=" << cam.cy << "\ndepth_unit=mm\n";
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) side << "r" << r << c << "=" << cam.pose.rotation(r, c) << "\n";
  side << "tx=" << cam.pose.translation.x() << "\nty=" << cam.pose.translation.y()
       << "\ntz=" << cam.pose.translation.z() << "\n";
  if (!side) throw RecordError("write failed: " + sidecar_path);
}

DepthMap load_depth_png(const std::string& png_path, const std::string& sidecar_path) {
  std::ifstream side(sidecar_path);
  if (!side) throw RecordError("cannot open " + sidecar_path);
  std::map<std::string, std::string> kv;
  for (std::string line; std::getline(side, line);) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto number = [&](const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw RecordError("depth sidecar is missing '" + key + "'");
    return std::stod(it->second);
  };
  DepthMap map;
  auto& cam = map.camera;
  cam.width = static_cast<int>(number("width"));
  cam.height = static_cast<int>(number("height"));
  cam.fx = number("fx");
  cam.fy = number("fy");
  cam.cx = number("cx");
  cam.cy = number("cy");
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) cam.pose.rotation(r, c) = number("r" + std::to_string(r) + std::to_string(c));
  cam.pose.translation = Vec3(number("tx"), number("ty"), number("tz"));

  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(png_path.c_str(), "rb"), &std::fclose);
  if (!fp) throw RecordError("cannot open " + png_path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw RecordError("libpng initialisation failed");
  }
  std::vector<png_byte> row;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw RecordError("PNG decoding failed: " + png_path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  const auto w = static_cast<int>(png_get_image_width(png, info));
  const auto h = static_cast<int>(png_get_image_height(png, info));
  if (png_get_bit_depth(png, info) != 16 || png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY ||
      w != cam.width || h != cam.height) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw RecordError("depth PNG must be 16-bit grayscale matching the sidecar size");
  }
  row.resize(static_cast<std::size_t>(w) * 2);
  map.depth.resize(static_cast<std::size_t>(w) * h);
  for (int r = 0; r < h; ++r) {
    png_read_row(png, row.data(), nullptr);
    for (int c = 0; c < w; ++c) {
      const unsigned v = (static_cast<unsigned>(row[2 * c]) << 8) | row[2 * c + 1];
      map.depth[static_cast<std::size_t>(r) * w + c] = static_cast<float>(v / 1000.0);
    }
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return map;
}

}  // namespace tacmap
