#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "tacmap/depth.hpp"
#include "tacmap/tactile.hpp"

namespace tacmap {

class RecordError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Touch stream layout (little-endian):
//   header:  char[8] "TACTREC1", uint32 version, uint32 reserved
//   record:  int32 timestep, float32[12] pose [R|t] row-major,
//            uint32 width, uint32 height, float32[width*height] heightmap,
//            uint8[ceil(width*height/8)] contact bitset (LSB first, row-major)

/// Rounds the pose and heightmap to the record precision, so a stream replayed
/// from disk reproduces the live run exactly.
void quantize_to_record(TactileObservation& obs);

class TouchRecordWriter {
 public:
  explicit TouchRecordWriter(const std::string& path);
  void write(const TactileObservation& obs);

 private:
  std::ofstream out_;
  std::string path_;
};

std::vector<TactileObservation> read_touch_records(const std::string& path);

/// 16-bit grayscale PNG of depth in millimetres plus a key=value sidecar with
/// intrinsics and the camera pose.
void save_depth_png(const DepthMap& map, const std::string& png_path, const std::string& sidecar_path);
DepthMap load_depth_png(const std::string& png_path, const std::string& sidecar_path);

}  // namespace tacmap
