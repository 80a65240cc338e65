#include "errors.hpp"
#include "heads.hpp"
#include "helpers.hpp"

using namespace mvf;
using namespace mvf::heads;

TEST_SUITE("heads") {
  TEST_CASE("detection head emits one probability per frame") {
    DetectionHead head(16);
    head->eval();
    torch::NoGradGuard g;
    const auto grid = torch::randn({5, 16, 8, 8});
    const auto p = head->detect(grid);
    CHECK(p.sizes() == torch::IntArrayRef{5});
    CHECK(p.gt(0).all().item<bool>());
    CHECK(p.lt(1).all().item<bool>());
    CHECK(testing::max_abs(p - torch::sigmoid(head->forward(grid))) == 0.0);
    CHECK_THROWS_AS(head->forward(torch::randn({16, 8, 8})), mvf::Error);
  }

  TEST_CASE("detection is independent across the batch") {
    DetectionHead head(16);
    head->eval();
    torch::NoGradGuard g;
    const auto grid = torch::randn({4, 16, 4, 4});
    const auto batch = head->forward(grid);
    for (int i = 0; i < 4; ++i) CHECK(testing::max_abs(head->forward(grid.narrow(0, i, 1))[0] - batch[i]) <= 1e-5);
  }

  TEST_CASE("localization masks come out at frame resolution") {
    LocalizationHead head(452, 16);
    head->eval();
    torch::NoGradGuard g;
    const auto mask = head->localize(torch::randn({2, 16, 4, 4}), torch::randn({2, 452, 5, 7}), 40, 56);
    CHECK(mask.sizes() == torch::IntArrayRef{2, 40, 56});
    CHECK(mask.ge(0).all().item<bool>());
    CHECK(mask.le(1).all().item<bool>());
    CHECK_THROWS_AS(head->forward(torch::randn({1, 16, 4, 4}), torch::randn({1, 452, 5, 7}), 41, 56), mvf::Error);
  }

  TEST_CASE("a zeroed final convolution yields a uniform one-half mask") {
    LocalizationHead head(452, 16);
    head->eval();
    torch::NoGradGuard g;
    for (auto& p : head->final_conv->parameters()) p.zero_();
    const auto mask = head->localize(torch::randn({1, 16, 8, 8}), torch::randn({1, 452, 8, 8}), 64, 64);
    CHECK(testing::max_abs(mask - 0.5) == 0.0);
  }

  TEST_CASE("score from mask is the maximum pixel") {
    CHECK(score_from_mask(torch::zeros({8, 8})) == 0.0);
    auto m = torch::full({8, 8}, 0.2);
    m[3][5] = 0.9;
    CHECK(score_from_mask(m) == doctest::Approx(0.9));
    CHECK(score_from_mask(torch::ones({1, 1})) == 1.0);
    CHECK_THROWS_AS(score_from_mask(torch::Tensor()), mvf::Error);
  }

  TEST_CASE("pretraining heads classify every cell of every scale") {
    PretrainHeads heads(256, 4, std::vector<int>{3, 4, 5});
    torch::NoGradGuard g;
    const auto logits = heads->forward(torch::randn({2, 256, 8, 8}));
    REQUIRE(logits.size() == 3);
    CHECK(logits[0].sizes() == torch::IntArrayRef{2, 4, 8, 8});
    CHECK(logits[1].sizes() == torch::IntArrayRef{2, 4, 16, 16});
    CHECK(logits[2].sizes() == torch::IntArrayRef{2, 4, 32, 32});
  }

  TEST_CASE("constant features give identical logits in every cell") {
    PretrainHeads heads(8, 3, std::vector<int>{2});
    torch::NoGradGuard g;
    const auto pooled = torch::ones({1, 8, 4, 4}) * torch::randn({1, 8, 1, 1});
    const auto logits = heads->logits({pooled})[0];
    CHECK(testing::max_abs(logits - logits.select(2, 0).select(2, 0).unsqueeze(2).unsqueeze(3)) <= 1e-6);
    CHECK_THROWS_AS(heads->logits({pooled, pooled}), mvf::Error);
    CHECK_THROWS_AS(PretrainHeads(8, 1, std::vector<int>{2}), mvf::Error);
  }
}
