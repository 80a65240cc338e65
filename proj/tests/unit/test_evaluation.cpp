#include <fstream>
#include <numeric>
#include <random>

#include "dataset.hpp"
#include "errors.hpp"
#include "evaluation.hpp"
#include "helpers.hpp"
#include "image_io.hpp"
#include "oracles.hpp"
#include "plot.hpp"

using namespace mvf;
using namespace mvf::evaluation;

TEST_SUITE("evaluation") {
  TEST_CASE("average precision of hand-checked rankings") {
    CHECK(average_precision({0.9, 0.8, 0.2}, {1, 1, 0}) == doctest::Approx(1.0));
    CHECK(average_precision({0.9, 0.8, 0.2}, {0, 1, 1}) == doctest::Approx((0.5 + 2.0 / 3.0) / 2));
    CHECK(average_precision({0.5, 0.5, 0.5, 0.5}, {1, 0, 1, 0}) == doctest::Approx(0.5));
    CHECK(average_precision({0.1, 0.9}, {1, 0}) == doctest::Approx(0.5));
  }

  TEST_CASE("average precision needs both classes") {
    CHECK_THROWS_AS(average_precision({0.3, 0.4}, {0, 0}), mvf::Error);
    CHECK_THROWS_AS(average_precision({0.3, 0.4}, {1, 1}), mvf::Error);
    CHECK_THROWS_AS(average_precision({0.3}, {1, 0}), mvf::Error);
  }

  TEST_CASE("average precision agrees with the reference and ignores input order") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 200; ++trial) {
      const int n = 2 + static_cast<int>(rng() % 12);
      std::vector<double> s(n);
      std::vector<int> y(n);
      for (int i = 0; i < n; ++i) {
        s[i] = static_cast<double>(rng() % 5) / 4.0;
        y[i] = static_cast<int>(rng() % 2);
      }
      const int pos = static_cast<int>(rng() % n);
      y[pos] = 1;
      y[(pos + 1 + rng() % (n - 1)) % n] = 0;
      const double ap = average_precision(s, y);
      CHECK(ap == doctest::Approx(oracle::average_precision(s, y)).epsilon(1e-12));
      std::vector<int> idx(n);
      std::iota(idx.begin(), idx.end(), 0);
      std::shuffle(idx.begin(), idx.end(), rng);
      std::vector<double> s2;
      std::vector<int> y2;
      for (int i : idx) {
        s2.push_back(s[i]);
        y2.push_back(y[i]);
      }
      CHECK(average_precision(s2, y2) == doctest::Approx(ap).epsilon(1e-12));
    }
  }

  TEST_CASE("pixel F1 edge cases") {
    const auto m = torch::zeros({4, 4});
    m.slice(0, 0, 2).fill_(1.0);
    CHECK(pixel_f1(m, m) == 1.0);
    CHECK(pixel_f1(1 - m, m) == 0.0);
    CHECK(pixel_f1(torch::zeros({4, 4}), torch::zeros({4, 4})) == 1.0);
    const auto half = torch::zeros({4, 4});
    half.slice(0, 1, 3).fill_(1.0);
    CHECK(pixel_f1(half, m) == doctest::Approx(0.5));
    const auto c = confusion(torch::full({2, 2}, 0.5), torch::tensor({{1, 0}, {0, 0}}));
    CHECK(c.tp == 1);
    CHECK(c.fp == 3);
    CHECK(c.fn == 0);
    CHECK(c.tn == 0);
  }

  TEST_CASE("reports recompute from per-frame records and round-trip through CSV") {
    std::vector<FrameRecord> records{
        {"a", 0, 0, 1, "splice", 0.9, 10, 2, 3}, {"a", 0, 1, 0, "authentic", 0.2, 0, 1, 0},
        {"a", 1, 0, 1, "edit", 0.7, 4, 0, 4},    {"b", 0, 0, 0, "authentic", 0.6, 0, 0, 0},
        {"b", 0, 1, 1, "splice", 0.4, 0, 0, 5},
    };
    const auto report = report_from_records(records, 0.5);
    REQUIRE(report.ap_by_dataset.at("a").has_value());
    CHECK(*report.ap_by_dataset.at("a") == doctest::Approx(1.0));
    CHECK(*report.ap_by_dataset.at("b") == doctest::Approx(0.5));
    const double f1_a0 = 20.0 / 25.0, f1_a1 = 8.0 / 12.0;
    REQUIRE(report.f1_mean.has_value());
    CHECK(*report.f1_mean == doctest::Approx((f1_a0 + f1_a1 + 0.0) / 3));
    const auto dir = testing::scratch("report");
    report.write((dir / "report.json").string(), (dir / "records.csv").string());
    const auto back = read_records_csv((dir / "records.csv").string());
    REQUIRE(back.size() == records.size());
    CHECK(back[4].dataset == "b");
    CHECK(back[2].tag == "edit");
    CHECK(back[0].score == doctest::Approx(0.9));
    CHECK(report_from_records(back, 0.5).to_json()["map_pooled"] == report.to_json()["map_pooled"]);
    std::ifstream in(dir / "report.json");
    CHECK(nlohmann::json::parse(in).contains("f1_mean"));
  }

  TEST_CASE("single-class datasets have no AP and empty records are rejected") {
    const auto report = report_from_records({{"a", 0, 0, 0, "authentic", 0.1, 0, 0, 0}}, 0.5);
    CHECK_FALSE(report.ap_by_dataset.at("a").has_value());
    CHECK_THROWS_AS(report_from_records({}, 0.5), mvf::Error);
  }

  TEST_CASE("sweep table rows") {
    std::vector<SweepEntry> entries(2);
    entries[0].quality = datagen::Quality::kLossless;
    entries[0].report.ap_pooled = 0.9;
    entries[0].report.f1_mean = 0.5;
    entries[1].quality = datagen::Quality::kStrong;
    const auto table = sweep_table(entries);
    REQUIRE(table.size() == 2);
    CHECK(table[0]["quality"] == "lossless");
    CHECK(table[0]["map"] == 0.9);
    CHECK(table[1]["map"].is_null());
    const auto plot = plot::sweep_plot(table);
    CHECK(plot.x_ticks.size() == 2);
  }

  TEST_CASE("SVG plots embed their table") {
    const auto path = (testing::scratch("svg") / "p.svg").string();
    plot::LinePlot p;
    p.title = "curve <&>";
    p.x_ticks = {"0", "1", "2"};
    p.series = {{"loss", {0.5, NAN, 0.2}}};
    const nlohmann::json table = {{{"epoch", 0}, {"loss", 0.5}}, {{"epoch", 2}, {"loss", 0.2}}};
    plot::write_svg(path, p, table);
    CHECK(plot::read_svg_table(path) == table);
    std::ifstream in(path);
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(text.rfind("<svg", 0) != std::string::npos);
    CHECK(text.find("<metadata") != std::string::npos);
  }
}

TEST_SUITE("io") {
  TEST_CASE("PNG round trips") {
    const auto dir = testing::scratch("png");
    io::Raster rgb{3, 2, 3, {}};
    for (int i = 0; i < 18; ++i) rgb.pixels.push_back(static_cast<uint8_t>(i * 13));
    io::write_png_rgb((dir / "rgb.png").string(), rgb);
    const auto rgb_back = io::read_png((dir / "rgb.png").string());
    CHECK(rgb_back.channels == 3);
    CHECK(rgb_back.pixels == rgb.pixels);

    io::Raster gray{4, 1, 1, {0, 7, 128, 255}};
    io::write_png_gray((dir / "gray.png").string(), gray);
    CHECK(io::read_png((dir / "gray.png").string()).pixels == gray.pixels);

    io::Raster bits{9, 2, 1, {0, 1, 0, 0, 255, 0, 0, 0, 1, 1, 1, 1, 0, 0, 0, 0, 0, 3}};
    io::write_png_bilevel((dir / "bits.png").string(), bits);
    const auto bits_back = io::read_png((dir / "bits.png").string());
    CHECK(bits_back.width == 9);
    CHECK(bits_back.pixels == std::vector<uint8_t>{0, 1, 0, 0, 1, 0, 0, 0, 1, 1, 1, 1, 0, 0, 0, 0, 0, 1});
    std::ifstream in(dir / "bits.png", std::ios::binary);
    std::vector<unsigned char> header(26);
    in.read(reinterpret_cast<char*>(header.data()), 26);
    CHECK(header[24] == 1);  // IHDR bit depth
    CHECK_THROWS_AS(io::read_png((dir / "none.png").string()), mvf::Error);
  }

  TEST_CASE("clips round-trip through their directory layout") {
    RunConfig cfg;
    cfg.data.height = 32;
    cfg.data.width = 32;
    cfg.data.frames = 5;
    datagen::VideoClip clip;
    for (int i = 0; clip.tag == datagen::ManipulationTag::kAuthentic; ++i) clip = dataset::generate_clip(cfg, i);
    const auto dir = (testing::scratch("clip") / "clip_0000").string();
    dataset::save_clip(dir, clip);
    for (const char* f : {"frame_0000.png", "frame_0004.png", "mask_0000.png", "meta.json"})
      CHECK(std::filesystem::exists(std::filesystem::path(dir) / f));
    const auto back = dataset::load_clip(dir);
    CHECK(testing::max_abs(back.frames - clip.frames) <= 0.5 / 255.0);
    CHECK(testing::same(back.masks, clip.masks));
    CHECK(back.labels == clip.labels);
    CHECK(back.tag == clip.tag);
    CHECK_THROWS_AS(dataset::load_clip(dir + "-missing"), mvf::Error);
  }

  TEST_CASE("generated datasets use the documented layout") {
    RunConfig cfg;
    cfg.data.height = 32;
    cfg.data.width = 32;
    cfg.data.frames = 5;
    cfg.data.num_clips = 4;
    cfg.data.val_fraction = 0.25;
    cfg.data.camera_models = 2;
    cfg.data.frames_per_model = 2;
    const auto root = testing::scratch("layout");
    dataset::write_dataset(root.string(), cfg);
    const auto split = dataset::generate_split(cfg);
    CHECK(dataset::clip_dirs((root / "train").string()).size() == split.train.size());
    CHECK(dataset::clip_dirs((root / "val").string()).size() == split.val.size());
    CHECK(split.train.size() + split.val.size() == 4);
    CHECK(std::filesystem::exists(root / "camera" / "frame_0000.png"));
    const auto cam = dataset::load_camera_dataset((root / "camera").string());
    CHECK(cam.frames.size(0) == 4);
    const auto loaded = dataset::load_clips((root / "train").string());
    REQUIRE_FALSE(loaded.empty());
    CHECK(testing::same(loaded.front().masks, split.train.front().masks));
  }
}
