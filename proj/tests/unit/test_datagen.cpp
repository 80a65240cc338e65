#include <set>

#include "datagen.hpp"
#include "errors.hpp"
#include "helpers.hpp"

using namespace mvf::datagen;

namespace {

CameraModelSpec clean_camera() {
  CameraModelSpec spec;
  spec.filter_kernel = {0, 0, 0, 0, 1, 0, 0, 0, 0};
  spec.gamma = 1.0;
  spec.noise_std = 0.0;
  spec.quality = 100;
  return spec;
}

Scene static_scene(uint64_t seed) {
  auto scene = make_scene(64, 64, 7, seed);
  scene.sprites.clear();
  return scene;
}

double mask_fraction(const torch::Tensor& mask) { return mask.to(torch::kFloat64).mean().item<double>(); }

}  // namespace

TEST_SUITE("datagen") {
  TEST_CASE("camera dataset has balanced classes") {
    const auto ds = make_camera_dataset(4, 8, 64, 64, 7);
    CHECK(ds.frames.sizes() == torch::IntArrayRef{32, 3, 64, 64});
    std::vector<int> hist(4, 0);
    for (int id : ds.model_ids) ++hist.at(id);
    CHECK(hist == std::vector<int>{8, 8, 8, 8});
  }

  TEST_CASE("camera dataset is deterministic") {
    const auto a = make_camera_dataset(3, 2, 32, 32, 11);
    const auto b = make_camera_dataset(3, 2, 32, 32, 11);
    CHECK(testing::same(a.frames, b.frames));
    CHECK(a.model_ids == b.model_ids);
    const auto c = make_camera_dataset(3, 2, 32, 32, 12);
    CHECK_FALSE(testing::same(a.frames, c.frames));
  }

  TEST_CASE("a single camera model is rejected") {
    CHECK_THROWS_WITH_AS(make_camera_dataset(1, 8, 64, 64, 7), doctest::Contains("need >=2 camera models"), mvf::Error);
  }

  TEST_CASE("distinct camera models leave distinct traces on the same scene") {
    const auto frame = render_scene(make_scene(64, 64, 1, 5), 0);
    std::set<std::vector<float>> seen;
    for (int id = 0; id < 8; ++id) {
      auto captured = apply_camera(camera_model(id), frame, 3).contiguous();
      seen.emplace(captured.data_ptr<float>(), captured.data_ptr<float>() + captured.numel());
    }
    CHECK(seen.size() == 8);
  }

  TEST_CASE("captured frames lie on the 8-bit grid") {
    const auto frame = apply_camera(camera_model(2), render_scene(make_scene(32, 32, 1, 9), 0), 1);
    CHECK(testing::max_abs(frame * 255.0 - torch::round(frame * 255.0)) < 1e-4);
    CHECK(frame.min().item<float>() >= 0.0f);
    CHECK(frame.max().item<float>() <= 1.0f);
  }

  TEST_CASE("scene flow matches sprite motion") {
    const auto scene = make_scene(64, 64, 5, 21);
    REQUIRE_FALSE(scene.sprites.empty());
    const auto flow = scene_flow(scene, 1, 3);
    const auto& s = scene.sprites.front();
    const int x = s.positions[1][0] + s.width / 2, y = s.positions[1][1] + s.height / 2;
    if (x >= 0 && x < 64 && y >= 0 && y < 64) {
      CHECK(flow[0][y][x].item<float>() == doctest::Approx(s.positions[3][0] - s.positions[1][0]));
      CHECK(flow[1][y][x].item<float>() == doctest::Approx(s.positions[3][1] - s.positions[1][1]));
    }
  }

  TEST_CASE("edit manipulation labels every frame and honors area bounds") {
    const auto base = make_authentic_clip(make_scene(64, 64, 9, 4), camera_model(1), 4);
    ManipulationConfig cfg;
    cfg.tag = ManipulationTag::kEdit;
    cfg.edit_ops = {EditOp::kBlur};
    cfg.area_lo = 0.05;
    cfg.area_hi = 0.2;
    for (uint64_t seed = 0; seed < 5; ++seed) {
      const auto clip = make_manipulated_clip(base, cfg, seed);
      validate_clip(clip);
      for (int t = 0; t < clip.length(); ++t) {
        CHECK(clip.labels[t] == 1);
        const double f = mask_fraction(clip.masks[t]);
        CHECK(f >= 0.05);
        CHECK(f <= 0.2);
      }
    }
  }

  TEST_CASE("labels agree with masks for every tag") {
    const auto base = make_authentic_clip(make_scene(64, 64, 9, 8), camera_model(0), 8);
    for (auto tag : {ManipulationTag::kSplice, ManipulationTag::kEdit, ManipulationTag::kTemporalInpaint}) {
      ManipulationConfig cfg;
      cfg.tag = tag;
      cfg.edit_ops = {EditOp::kNoise, EditOp::kContrast};
      cfg.splice_source = 77;
      cfg.temporal_independence = tag == ManipulationTag::kTemporalInpaint;
      const auto clip = make_manipulated_clip(base, cfg, 2);
      for (int t = 0; t < clip.length(); ++t) CHECK((clip.labels[t] == 1) == clip.masks[t].any().item<bool>());
    }
  }

  TEST_CASE("temporal inpainting changes the masked region between frames of a static clip") {
    const auto base = make_authentic_clip(static_scene(3), clean_camera(), 3);
    REQUIRE(testing::max_abs(base.frames[1] - base.frames[0]) == 0.0);
    ManipulationConfig cfg;
    cfg.tag = ManipulationTag::kTemporalInpaint;
    cfg.temporal_independence = true;
    const auto clip = make_manipulated_clip(base, cfg, 5);
    for (int t = 1; t < clip.length(); ++t) {
      const auto both = (clip.masks[t] * clip.masks[t - 1]).to(torch::kBool);
      REQUIRE(both.any().item<bool>());
      const auto diff = (clip.frames[t] - clip.frames[t - 1]).abs().sum(0);
      CHECK(diff.masked_select(both).sum().item<double>() > 0.0);
    }
  }

  TEST_CASE("unsatisfiable area constraint is an explicit error") {
    const auto base = make_authentic_clip(make_scene(64, 64, 5, 1), camera_model(0), 1);
    ManipulationConfig cfg;
    cfg.area_lo = 0.99;
    cfg.area_hi = 0.995;
    CHECK_THROWS_WITH_AS(make_manipulated_clip(base, cfg, 1), doctest::Contains("area constraint unsatisfiable"),
                         mvf::Error);
  }

  TEST_CASE("manipulation is deterministic in its seed") {
    const auto base = make_authentic_clip(make_scene(64, 64, 5, 2), camera_model(2), 2);
    ManipulationConfig cfg;
    cfg.tag = ManipulationTag::kSplice;
    cfg.splice_source = 9;
    const auto a = make_manipulated_clip(base, cfg, 6), b = make_manipulated_clip(base, cfg, 6);
    CHECK(testing::same(a.frames, b.frames));
    CHECK(testing::same(a.masks, b.masks));
  }

  TEST_CASE("lossless re-encoding is the identity") {
    const auto clip = make_authentic_clip(make_scene(64, 64, 5, 3), camera_model(1), 3);
    CHECK(testing::same(reencode_clip(clip, Quality::kLossless).frames, clip.frames));
  }

  TEST_CASE("stronger compression distorts more") {
    const auto clip = make_authentic_clip(make_scene(64, 64, 5, 3), camera_model(1), 3);
    const double medium = (reencode_clip(clip, Quality::kMedium).frames - clip.frames).abs().mean().item<double>();
    const double strong = (reencode_clip(clip, Quality::kStrong).frames - clip.frames).abs().mean().item<double>();
    CHECK(medium > 0.0);
    CHECK(strong > medium);
  }

  TEST_CASE("clip validation enforces the invariants") {
    auto clip = make_authentic_clip(make_scene(64, 64, 5, 3), camera_model(1), 3);
    validate_clip(clip);
    clip.labels[2] = 1;
    CHECK_THROWS_WITH_AS(validate_clip(clip), doctest::Contains("label/mask mismatch at frame 2"), mvf::Error);
    CHECK_THROWS_AS(make_authentic_clip(make_scene(60, 64, 5, 1), camera_model(0), 1), mvf::Error);
  }

  TEST_CASE("string conversions round-trip") {
    for (auto q : {Quality::kLossless, Quality::kHigh, Quality::kMedium, Quality::kStrong})
      CHECK(quality_from_string(to_string(q)) == q);
    for (auto t : {ManipulationTag::kAuthentic, ManipulationTag::kSplice, ManipulationTag::kEdit,
                   ManipulationTag::kTemporalInpaint})
      CHECK(tag_from_string(to_string(t)) == t);
    CHECK(quality_factor(Quality::kLossless) == 100);
    CHECK_THROWS_AS(quality_from_string("ultra"), mvf::Error);
  }
}
