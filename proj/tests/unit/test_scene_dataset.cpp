#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include <json.hpp>

#include "nerfsteg/scene_dataset.hpp"
#include "reference_render.hpp"
#include "tempdir.hpp"

using namespace nerfsteg;
using nerfsteg::testing::TempDir;

TEST(ProceduralField, CenterAndFarOutside) {
  const auto scene = default_scene();
  for (const auto& s : scene.spheres) {
    const auto f = procedural_field(scene, s.center);
    // The first containing sphere wins, which for its own centre may be an earlier one.
    EXPECT_GT(f.sigma, 0.0);
  }
  const auto& first = scene.spheres.front();
  const auto f = procedural_field(scene, first.center);
  EXPECT_EQ(f.sigma, first.density);
  EXPECT_EQ(f.rgb, first.rgb);

  const auto far = procedural_field(scene, Vec3(50, 50, 50));
  EXPECT_EQ(far.sigma, 0.0);
  EXPECT_EQ(far.rgb, scene.background);
}

TEST(ProceduralField, BoundaryMembershipIsInclusive) {
  SceneSpec scene;
  scene.spheres.push_back({Vec3(0, 0, 0), 0.5, {0.2f, 0.4f, 0.6f}, 10.0});
  EXPECT_EQ(procedural_field(scene, Vec3(0.5, 0, 0)).sigma, 10.0);
  EXPECT_EQ(procedural_field(scene, Vec3(std::nextafter(0.5, 1.0), 0, 0)).sigma, 0.0);
}

TEST(ProceduralField, FirstSphereWinsOverlaps) {
  SceneSpec scene;
  scene.spheres.push_back({Vec3(0, 0, 0), 0.5, {1, 0, 0}, 5.0});
  scene.spheres.push_back({Vec3(0.2, 0, 0), 0.5, {0, 1, 0}, 7.0});
  const auto f = procedural_field(scene, Vec3(0.1, 0, 0));
  EXPECT_EQ(f.sigma, 5.0);
  EXPECT_EQ(f.rgb, (Color{1, 0, 0}));
}

TEST(SceneSpec, ValidateRejectsBadSpheres) {
  SceneSpec s;
  s.spheres.push_back({Vec3(0, 0, 0), -0.1, {1, 1, 1}, 1.0});
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s.spheres[0] = {Vec3(0, 0, 0), 0.3, {1, 1, 1}, -1.0};
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s.spheres[0] = {Vec3(3, 0, 0), 0.3, {1, 1, 1}, 1.0};
  EXPECT_THROW(s.validate(), std::invalid_argument);
  EXPECT_NO_THROW(default_scene().validate());
}

TEST(TrainingViews, EmptySceneIsBackground) {
  SceneSpec empty;
  empty.background = {0.25f, 0.5f, 0.75f};
  ViewSamplingOptions o;
  o.n_views = 1;
  o.height = o.width = 16;
  const auto views = generate_training_views(empty, o);
  ASSERT_EQ(views.size(), 1u);
  const auto& img = views[0].image;
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < 256; ++i) EXPECT_EQ(img[c * 256 + i], empty.background[c]);
}

TEST(TrainingViews, SameSeedSameViews) {
  ViewSamplingOptions o;
  o.n_views = 3;
  o.height = o.width = 16;
  const auto a = generate_training_views(default_scene(), o);
  const auto b = generate_training_views(default_scene(), o);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t v = 0; v < a.size(); ++v) {
    EXPECT_EQ(a[v].camera_to_world, b[v].camera_to_world);
    for (std::size_t i = 0; i < a[v].image.numel(); ++i) ASSERT_EQ(a[v].image[i], b[v].image[i]);
  }
  o.seed = 1;
  const auto c = generate_training_views(default_scene(), o);
  EXPECT_NE(a[0].camera_to_world, c[0].camera_to_world);
}

TEST(TrainingViews, AnglesWithinRanges) {
  ViewSamplingOptions o;
  o.n_views = 500;
  for (const auto& [theta, phi] : training_view_angles(o)) {
    EXPECT_GE(theta, -180.0);
    EXPECT_LT(theta, 180.0);
    EXPECT_GE(phi, -90.0);
    EXPECT_LE(phi, -10.0);
  }
}

TEST(TrainingViews, MatchSingleRayReference) {
  ViewSamplingOptions o;
  const auto scene = default_scene();
  const auto views = generate_training_views(scene, o);
  const auto angles = training_view_angles(o);
  ASSERT_EQ(views.size(), 20u);
  for (std::size_t v = 0; v < views.size(); ++v) {
    ViewKey key;
    key.theta_deg = angles[v].first;
    key.phi_deg = angles[v].second;
    const auto ref = nerfsteg::testing::reference_render(scene, key);
    ASSERT_EQ(views[v].image.shape(), (Shape{3, 64, 64}));
    EXPECT_EQ(views[v].camera_to_world, pose_from_angles(key.theta_deg, key.phi_deg, 4.0));
    std::size_t diff = 0;
    for (std::size_t i = 0; i < ref.numel(); ++i) diff += views[v].image[i] != ref[i];
    EXPECT_EQ(diff, 0u) << "view " << v;
  }
}

TEST(NerfSynthetic, FocalFromCameraAngle) {
  TempDir dir;
  Tensor img({3, 180, 180}, 0.5f);
  write_png(dir / "r_0.png", img);
  nlohmann::json doc;
  doc["camera_angle_x"] = std::numbers::pi / 2;
  nlohmann::json eye = nlohmann::json::array();
  for (int r = 0; r < 4; ++r) eye.push_back({r == 0 ? 1.0 : 0.0, r == 1 ? 1.0 : 0.0, r == 2 ? 1.0 : 0.0, r == 3 ? 1.0 : 0.0});
  doc["frames"] = {{{"file_path", "./r_0"}, {"transform_matrix", eye}}};
  write_file(dir / "transforms_train.json", doc.dump());
  const auto views = load_nerf_synthetic(dir.path(), {});
  ASSERT_EQ(views.size(), 1u);
  EXPECT_NEAR(views[0].focal_px, 90.0, 1e-9);
  EXPECT_EQ(views[0].camera_to_world, Mat4::Identity());
  EXPECT_EQ(views[0].image.shape(), (Shape{3, 180, 180}));
}

TEST(NerfSynthetic, ResizeToTargetWidth) {
  TempDir dir;
  Rng rng(4);
  Tensor img = Tensor::uniform({3, 80, 80}, 0, 1, rng);
  PosedImage v{img, pose_from_angles(10, -20, 4), 70.0};
  save_nerf_synthetic(dir.path(), {v});
  LoadOptions lo;
  lo.target_width = 20;
  const auto views = load_nerf_synthetic(dir.path(), lo);
  ASSERT_EQ(views.size(), 1u);
  EXPECT_EQ(views[0].image.shape(), (Shape{3, 20, 20}));
  EXPECT_NEAR(views[0].focal_px, 70.0 * 20 / 80, 1e-9);
  EXPECT_LT(std::abs(image_mean(views[0].image) - image_mean(img)), 0.02f);
}

TEST(NerfSynthetic, PoseRoundTrip) {
  TempDir dir;
  std::vector<PosedImage> views;
  ViewSamplingOptions o;
  o.n_views = 4;
  o.width = o.height = 8;
  for (auto& v : generate_training_views(default_scene(), o)) views.push_back(v);
  save_nerf_synthetic(dir.path(), views);
  const auto back = load_nerf_synthetic(dir.path(), {});
  ASSERT_EQ(back.size(), views.size());
  for (std::size_t i = 0; i < views.size(); ++i) {
    EXPECT_LT((back[i].camera_to_world - views[i].camera_to_world).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_NEAR(back[i].focal_px, views[i].focal_px, 1e-6);
    for (std::size_t k = 0; k < views[i].image.numel(); ++k)
      EXPECT_NEAR(back[i].image[k], views[i].image[k], 0.5 / 255 + 1e-6);
  }
}

TEST(NerfSynthetic, MissingFieldsAreFormatErrors) {
  TempDir dir;
  write_file(dir / "transforms_train.json", R"({"frames": []})");
  EXPECT_THROW(load_nerf_synthetic(dir.path(), {}), FormatError);
  write_file(dir / "transforms_train.json", R"({"camera_angle_x": 0.7, "frames": [{"file_path": "./nope"}]})");
  EXPECT_THROW(load_nerf_synthetic(dir.path(), {}), FormatError);
  write_file(dir / "transforms_train.json",
             R"({"camera_angle_x": 0.7, "frames": [{"file_path": "./nope", "transform_matrix": [[1,0,0,0],[0,1,0,0],[0,0,1,0],[0,0,0,1]]}]})");
  try {
    load_nerf_synthetic(dir.path(), {});
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("nope"), std::string::npos);
  }
  write_file(dir / "transforms_train.json", "{not json");
  EXPECT_THROW(load_nerf_synthetic(dir.path(), {}), FormatError);
  EXPECT_THROW(load_nerf_synthetic(dir / "missing", {}), FormatError);
}

TEST(ImageIo, PpmRoundTrip) {
  Rng rng(9);
  Tensor img = Tensor::uniform({3, 5, 7}, 0, 1, rng);
  const auto back = decode_ppm(encode_ppm(img));
  ASSERT_EQ(back.shape(), img.shape());
  for (std::size_t i = 0; i < img.numel(); ++i) EXPECT_NEAR(back[i], img[i], 0.5 / 255 + 1e-6);
  EXPECT_EQ(encode_ppm(back), encode_ppm(img));
  EXPECT_THROW(decode_ppm("P3\n1 1\n255\n"), FormatError);
}

TEST(ImageIo, PsnrOfIdenticalIsInfinite) {
  Tensor a({3, 4, 4}, 0.3f), b({3, 4, 4}, 0.4f);
  EXPECT_TRUE(std::isinf(psnr(a, a)));
  EXPECT_NEAR(psnr(a, b), 20.0, 1e-4);
}
