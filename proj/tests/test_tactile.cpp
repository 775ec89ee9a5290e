#include <cstring>
#include <filesystem>

#include "doctest.h"
#include "tacmap/depth.hpp"
#include "tacmap/records.hpp"
#include "tacmap/tactile.hpp"

using namespace tacmap;
namespace fs = std::filesystem;

namespace {

SensorSpec noiseless_sensor() {
  SensorSpec spec;
  spec.pixel_noise_m = 0.0;
  return spec;
}

double angle_deg(const Vec3& a, const Vec3& b) {
  return std::acos(std::clamp(a.normalized().dot(b.normalized()), -1.0, 1.0)) * 180.0 / M_PI;
}

// Flat slab whose top face is the plane z = 0.01 m.
MeshQuery flat_slab() { return MeshQuery(make_box(Vec3(0.1, 0.1, 0.02))); }
RigidPose press_slab(double depth) { return RigidPose::from_z_axis(Vec3(0, 0, -1), Vec3(0, 0, 0.01 - depth)); }

// 4 mm sphere with its apex at the origin of a downward-pressing sensor.
MeshQuery small_sphere() { return MeshQuery(make_icosphere(0.004, 5, Vec3(0, 0, -0.004))); }
RigidPose press_apex(double depth) { return RigidPose::from_z_axis(Vec3(0, 0, -1), Vec3(0, 0, -depth)); }

fs::path temp_dir() {
  const auto dir = fs::temp_directory_path() / "tacmap_test_tactile";
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("uniform poses sit on the sphere and face into it") {
  const MeshQuery sphere(make_icosphere(0.05, 4));
  ExplorationPolicy policy;
  policy.touch_count = 60;
  policy.seed = 3;
  const auto poses = sample_sensor_poses(sphere, policy, 5e-4);
  REQUIRE(poses.size() == 60);
  for (const auto& p : poses) {
    CHECK(p.is_valid());
    CHECK(std::abs(p.translation.norm() - 0.05) < 1e-3);
    // z points into the object, i.e. against the radial outward normal.
    CHECK(angle_deg(p.z_axis(), -p.translation) < 3.0);
  }
  // Spread: no two touches share a location.
  for (std::size_t i = 0; i < poses.size(); ++i)
    for (std::size_t j = i + 1; j < poses.size(); ++j)
      CHECK((poses[i].translation - poses[j].translation).norm() > 0.005);
}

TEST_CASE("pose sampling is deterministic in the seed") {
  const MeshQuery sphere(make_icosphere(0.05, 3));
  ExplorationPolicy policy;
  policy.touch_count = 1;
  policy.seed = 42;
  const auto a = sample_sensor_poses(sphere, policy);
  const auto b = sample_sensor_poses(sphere, policy);
  REQUIRE(a.size() == 1);
  CHECK(a[0].rotation == b[0].rotation);
  CHECK(a[0].translation == b[0].translation);
  policy.seed = 43;
  CHECK(sample_sensor_poses(sphere, policy)[0].translation != a[0].translation);
  policy.touch_count = 0;
  CHECK_THROWS_AS(sample_sensor_poses(sphere, policy), SimulationError);
}

TEST_CASE("ring-grid poses on a cylinder point horizontally at the axis") {
  const MeshQuery cylinder(make_cylinder(0.03, 0.1, 64));
  ExplorationPolicy policy;
  policy.mode = ExplorationMode::RingGrid;
  policy.ring_angles = 8;
  policy.ring_heights = 5;
  const auto poses = sample_sensor_poses(cylinder, policy);
  REQUIRE(poses.size() == 40);
  for (const auto& p : poses) {
    CHECK(std::abs(p.z_axis().z()) < 1e-12);
    const Vec3 to_axis = -Vec3(p.translation.x(), p.translation.y(), 0.0);
    CHECK(p.z_axis().cross(to_axis.normalized()).norm() < 1e-9);
    CHECK(p.z_axis().dot(to_axis) > 0.0);
  }
}

TEST_CASE("flat indenter gives a uniform heightmap") {
  const auto spec = noiseless_sensor();
  const auto obs = render_tactile(flat_slab(), press_slab(5e-4), spec, 1);
  REQUIRE(obs);
  CHECK(obs->contact_count() == static_cast<std::size_t>(spec.width_px * spec.height_px));
  for (float h : obs->heightmap) CHECK(h == doctest::Approx(5e-4).epsilon(1e-6));
}

TEST_CASE("sphere apex gives a circular contact of the expected radius") {
  const auto spec = noiseless_sensor();
  const auto obs = render_tactile(small_sphere(), press_apex(5e-4), spec, 1);
  REQUIRE(obs);
  const double area = static_cast<double>(obs->contact_count()) * spec.pixel_pitch_x() * spec.pixel_pitch_y();
  const double radius_mm = std::sqrt(area / M_PI) * 1e3;
  // Chord radius sqrt(2 R h - h^2) at the 10 um contact threshold: R = 4 mm, h = 0.49 mm.
  const double expected_mm = std::sqrt(2 * 4.0 * 0.49 - 0.49 * 0.49);
  CHECK(radius_mm == doctest::Approx(expected_mm).epsilon(0.03));
  CHECK(radius_mm == doctest::Approx(1.94).epsilon(0.05));
  for (float h : obs->heightmap) {
    CHECK(h >= 0.0f);
    CHECK(h <= spec.max_depth_m);
  }
}

TEST_CASE("retracted sensor reports a contact miss") {
  CHECK_FALSE(render_tactile(small_sphere(), press_apex(-5e-3), noiseless_sensor(), 1));
}

TEST_CASE("mask agrees with the threshold under noise") {
  SensorSpec spec;
  const auto obs = render_tactile(small_sphere(), press_apex(5e-4), spec, 9);
  REQUIRE(obs);
  for (std::size_t i = 0; i < obs->heightmap.size(); ++i) {
    CHECK((obs->contact[i] != 0) == (obs->heightmap[i] > spec.contact_threshold_m));
    CHECK(obs->heightmap[i] <= spec.max_depth_m);
  }
}

TEST_CASE("flat patch converts to coplanar samples with the plane normal") {
  const auto spec = noiseless_sensor();
  const auto obs = render_tactile(flat_slab(), press_slab(5e-4), spec, 1);
  REQUIRE(obs);
  for (std::size_t budget : {std::size_t{0}, std::size_t{60}}) {
    const auto samples = tactile_to_samples(*obs, spec, {budget}, 5e-4);
    REQUIRE(!samples.empty());
    if (budget) CHECK(samples.size() <= budget);
    for (const auto& s : samples) {
      CHECK((s.normal - Vec3(0, 0, 1)).norm() < 1e-9);
      CHECK(std::abs(s.position.z() - 0.01) < 1e-9);
      CHECK(s.noise_sigma == 5e-4);
    }
  }
}

TEST_CASE("sphere apex normals match the analytic sphere") {
  const auto spec = noiseless_sensor();
  const auto obs = render_tactile(small_sphere(), press_apex(5e-4), spec, 1);
  REQUIRE(obs);
  const Vec3 center(0, 0, -0.004);
  for (std::size_t budget : {std::size_t{0}, std::size_t{60}}) {
    const auto samples = tactile_to_samples(*obs, spec, {budget}, 5e-4);
    REQUIRE(samples.size() > 10);
    for (const auto& s : samples) CHECK(angle_deg(s.normal, s.position - center) < 5.0);
  }
}

TEST_CASE("noise-free samples lie on the mesh with outward unit normals") {
  const auto mesh = small_sphere();
  const auto spec = noiseless_sensor();
  const auto obs = render_tactile(mesh, press_apex(5e-4), spec, 1);
  REQUIRE(obs);
  const auto samples = tactile_to_samples(*obs, spec, {0}, 5e-4);
  std::size_t outward = 0;
  for (const auto& s : samples) {
    CHECK(mesh.unsigned_distance(s.position) < 1e-6);
    CHECK(std::abs(s.normal.norm() - 1.0) < 1e-6);
    if (s.normal.dot(mesh.closest_normal(s.position)) > 0.0) ++outward;
  }
  CHECK(outward >= 0.99 * samples.size());
}

TEST_CASE("noisy samples scatter about the surface at the pixel noise level") {
  SensorSpec spec;
  spec.pixel_noise_m = 5e-5;
  const auto mesh = flat_slab();
  const auto obs = render_tactile(mesh, press_slab(5e-4), spec, 77);
  REQUIRE(obs);
  const auto samples = tactile_to_samples(*obs, spec, {0}, 5e-4);
  double sum2 = 0.0;
  for (const auto& s : samples) sum2 += std::pow(mesh.unsigned_distance(s.position), 2);
  const double rms = std::sqrt(sum2 / samples.size());
  CHECK(rms >= 0.8 * spec.pixel_noise_m);
  CHECK(rms <= 1.2 * spec.pixel_noise_m);
}

TEST_CASE("decimation respects budget and spacing") {
  SensorSpec spec;
  const auto obs = render_tactile(flat_slab(), press_slab(5e-4), spec, 5);
  REQUIRE(obs);
  REQUIRE(obs->contact_count() >= 10000);
  const auto samples = tactile_to_samples(*obs, spec, {60}, 5e-4);
  CHECK(samples.size() <= 60);
  CHECK(samples.size() >= 30);

  std::vector<SurfaceSample> raw;
  for (int r = 0; r < 100; ++r)
    for (int c = 0; c < 100; ++c) raw.push_back({Vec3(c * 1e-4, r * 1e-4, 0), Vec3(0, 0, 1), 1e-3});
  double voxel = 0.0;
  const auto kept = decimate_samples(raw, 60, 0.0, &voxel);
  CHECK(kept.size() <= 60);
  CHECK(voxel > 0.0);
  for (std::size_t i = 0; i < kept.size(); ++i)
    for (std::size_t j = i + 1; j < kept.size(); ++j)
      CHECK((kept[i].position - kept[j].position).norm() >= voxel);
}

TEST_CASE("tactile conversion errors") {
  TactileObservation empty;
  empty.width = 4;
  empty.height = 4;
  empty.heightmap.assign(16, 0.0f);
  empty.contact.assign(16, 0);
  CHECK_THROWS_AS(tactile_to_samples(empty, SensorSpec{}, {60}, 5e-4), SimulationError);
}

TEST_CASE("tactile sample streams are deterministic") {
  SensorSpec spec;
  const auto mesh = small_sphere();
  const auto a = tactile_to_samples(*render_tactile(mesh, press_apex(5e-4), spec, 21), spec, {60}, 5e-4);
  const auto b = tactile_to_samples(*render_tactile(mesh, press_apex(5e-4), spec, 21), spec, {60}, 5e-4);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(std::memcmp(a[i].position.data(), b[i].position.data(), sizeof(double) * 3) == 0);
    CHECK(std::memcmp(a[i].normal.data(), b[i].normal.data(), sizeof(double) * 3) == 0);
  }
}

TEST_CASE("depth map of a cube front face") {
  const MeshQuery cube(make_box(Vec3::Constant(0.1)));
  const auto cam = CameraModel::look_at(Vec3(0, 0, 1), Vec3::Zero());
  const auto map = render_depthmap(cube, cam, 0.0, 1);
  CHECK(map.at(cam.width / 2, cam.height / 2) == doctest::Approx(0.95).epsilon(1e-6));
  CHECK(map.at(0, 0) == 0.0f);
}

TEST_CASE("depth map with nothing in view is empty") {
  const MeshQuery cube(make_box(Vec3::Constant(0.1)));
  const auto cam = CameraModel::look_at(Vec3(0, 0, 1), Vec3(0, 0, 2));
  const auto map = render_depthmap(cube, cam, 0.005, 1);
  CHECK(map.valid_count() == 0);
  CHECK_THROWS_AS(depthmap_to_samples(map, {}, 5e-3), SimulationError);
}

TEST_CASE("depth noise has the configured standard deviation") {
  const MeshQuery cube(make_box(Vec3::Constant(0.1)));
  const auto cam = CameraModel::look_at(Vec3(0.2, 0.1, 0.35), Vec3::Zero());
  const auto clean = render_depthmap(cube, cam, 0.0, 1);
  const auto noisy = render_depthmap(cube, cam, 0.005, 2);
  double sum = 0, sum2 = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < clean.depth.size(); ++i) {
    if (clean.depth[i] <= 0.0f) continue;
    const double r = double(noisy.depth[i]) - double(clean.depth[i]);
    sum += r;
    sum2 += r * r;
    ++n;
  }
  REQUIRE(n >= 10000);
  const double mean = sum / n;
  const double sd = std::sqrt(sum2 / n - mean * mean);
  CHECK(sd >= 0.0045);
  CHECK(sd <= 0.0055);
}

TEST_CASE("fronto-parallel plane gives camera-facing normals") {
  const MeshQuery slab(make_box(Vec3(0.5, 0.5, 0.02)));
  const auto cam = CameraModel::look_at(Vec3(0, 0, 0.5), Vec3::Zero(), 160, 120, 150.0);
  const auto map = render_depthmap(slab, cam, 0.0, 1);
  const auto samples = depthmap_to_samples(map, {500, 2, 0.02, 75.0}, 5e-3);
  REQUIRE(!samples.empty());
  CHECK(samples.size() <= 500);
  for (const auto& s : samples) {
    CHECK(angle_deg(s.normal, -cam.pose.z_axis()) < 1.0);
    CHECK(s.noise_sigma == 5e-3);
  }
}

TEST_CASE("sphere depth map normals match the analytic sphere") {
  const MeshQuery sphere(make_icosphere(0.05, 4));
  const auto cam = CameraModel::look_at(Vec3(0.25, 0.0, 0.25), Vec3::Zero());
  const auto map = render_depthmap(sphere, cam, 0.0, 1);
  for (std::size_t budget : {std::size_t{0}, std::size_t{500}}) {
    const auto samples = depthmap_to_samples(map, {budget, 2, 0.02, 75.0}, 5e-3);
    REQUIRE(samples.size() > 100);
    std::size_t good = 0;
    for (const auto& s : samples)
      if (angle_deg(s.normal, s.position) < 10.0) ++good;
    CHECK(good == samples.size());
  }
}

TEST_CASE("noisy depth normals stay close to the sphere") {
  const MeshQuery sphere(make_icosphere(0.05, 4));
  const auto cam = CameraModel::look_at(Vec3(0.3, 0.0, 0.25), Vec3::Zero());
  const auto map = render_depthmap(sphere, cam, 5e-3, 7);
  const auto samples = depthmap_to_samples(map, {}, 5e-3);
  REQUIRE(samples.size() > 100);
  std::vector<double> err;
  for (const auto& s : samples) err.push_back(angle_deg(s.normal, s.position));
  std::nth_element(err.begin(), err.begin() + err.size() / 2, err.end());
  CHECK(err[err.size() / 2] < 15.0);
}

TEST_CASE("a single valid depth pixel is rejected") {
  DepthMap map;
  map.camera = CameraModel::look_at(Vec3(0, 0, 1), Vec3::Zero(), 8, 8, 10.0);
  map.depth.assign(64, 0.0f);
  map.depth[27] = 1.0f;
  CHECK_THROWS_AS(depthmap_to_samples(map, {}, 5e-3), SimulationError);
}

TEST_CASE("hallucinated base samples") {
  const Aabb box{Vec3(-0.03, -0.03, 0.0), Vec3(0.03, 0.03, 0.12)};
  CHECK(hallucinate_base(box, {}, 0.01).empty());

  const MeshQuery cylinder(make_cylinder(0.03, 0.1, 64, Vec3(0, 0, 0.05)));
  ExplorationPolicy policy;
  policy.mode = ExplorationMode::RingGrid;
  policy.ring_heights = 5;
  const auto poses = sample_sensor_poses(cylinder, policy);
  const std::vector<RigidPose> bottom_ring(poses.begin(), poses.begin() + 8);
  const auto base = hallucinate_base(cylinder.mesh().bounds(), bottom_ring, 0.01);
  REQUIRE(base.size() == 8);
  for (const auto& s : base) {
    CHECK(s.position.z() == doctest::Approx(0.0));
    CHECK(s.normal == Vec3(0, 0, -1));
    CHECK(s.noise_sigma == 0.01);
  }

  const MeshQuery cuboid(make_box(Vec3(0.06, 0.06, 0.12), Vec3(0, 0, 0.06)));
  const auto box_poses = sample_sensor_poses(cuboid, policy);
  const auto box_base = hallucinate_base(cuboid.mesh().bounds(), box_poses, 0.01);
  for (const auto& s : box_base) {
    CHECK(std::abs(s.position.x()) <= 0.03);
    CHECK(std::abs(s.position.y()) <= 0.03);
  }
}

TEST_CASE("touch records round trip") {
  SensorSpec spec;
  spec.width_px = 64;
  spec.height_px = 48;
  const auto mesh = small_sphere();
  auto a = *render_tactile(mesh, press_apex(5e-4), spec, 1, 1);
  auto b = *render_tactile(mesh, RigidPose::from_z_axis(Vec3(0.1, 0, -1), Vec3(0, 0, -4e-4)), spec, 2, 2);
  quantize_to_record(a);
  quantize_to_record(b);
  const auto path = (temp_dir() / "touches.rec").string();
  {
    TouchRecordWriter writer(path);
    writer.write(a);
    writer.write(b);
  }
  const auto loaded = read_touch_records(path);
  REQUIRE(loaded.size() == 2);
  for (int k = 0; k < 2; ++k) {
    const auto& src = k == 0 ? a : b;
    CHECK(loaded[k].timestep == src.timestep);
    CHECK(loaded[k].pose.rotation == src.pose.rotation);
    CHECK(loaded[k].pose.translation == src.pose.translation);
    CHECK(loaded[k].heightmap == src.heightmap);
    CHECK(loaded[k].contact == src.contact);
  }
  CHECK_THROWS_AS(read_touch_records((temp_dir() / "missing.rec").string()), RecordError);
}

TEST_CASE("depth PNG round trip at millimetre resolution") {
  const MeshQuery sphere(make_icosphere(0.05, 3));
  auto map = render_depthmap(sphere, CameraModel::look_at(Vec3(0.3, 0, 0.3), Vec3::Zero(), 64, 48, 60.0), 0.005, 4);
  quantize_to_millimetres(map);
  const auto png = (temp_dir() / "depth.png").string();
  const auto side = (temp_dir() / "depth.txt").string();
  save_depth_png(map, png, side);
  const auto loaded = load_depth_png(png, side);
  CHECK(loaded.depth == map.depth);
  CHECK(loaded.camera.fx == map.camera.fx);
  CHECK(loaded.camera.pose.rotation == map.camera.pose.rotation);
  CHECK(loaded.camera.pose.translation == map.camera.pose.translation);
}
