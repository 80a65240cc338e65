#include "errors.hpp"
#include "helpers.hpp"
#include "model.hpp"
#include "msh_transformer.hpp"

using namespace mvf;
using namespace mvf::msh;

namespace {

HierarchyOptions small_options() {
  HierarchyOptions o;
  o.in_channels = 452;
  o.embed_dim = 16;
  o.heads = 2;
  o.layers_per_scale = 1;
  o.flat_layers = 1;
  o.scales = {1, 2, 3};
  o.reference_height = 64;
  o.reference_width = 64;
  return o;
}

ModelConfig small_model() {
  ModelConfig m;
  m.context_channels = 16;
  m.embed_dim = 16;
  m.heads = 2;
  m.encoder_layers = 1;
  m.flat_encoder_layers = 1;
  m.scales = {1, 2, 3};
  m.reference_height = 64;
  m.reference_width = 64;
  m.flow_iterations = 3;
  m.flow_levels = 2;
  return m;
}

}  // namespace

TEST_SUITE("msh_transformer") {
  TEST_CASE("fused representation has 452 channels in F, C, T, O order") {
    const auto f = torch::full({2, 256, 8, 8}, 1.0), c = torch::full({2, 64, 8, 8}, 2.0);
    const auto t = torch::full({2, 128, 8, 8}, 3.0), o = torch::full({2, 4, 8, 8}, 4.0);
    const auto xi = fuse_modalities(f, c, t, o);
    CHECK(xi.sizes() == torch::IntArrayRef{2, 452, 8, 8});
    FusionLayout layout;
    CHECK(layout.offset(Modality::kRgbContext) == 256);
    CHECK(layout.offset(Modality::kTemporalResidual) == 320);
    CHECK(layout.offset(Modality::kFlowResidual) == 448);
    CHECK(xi.narrow(1, 448, 4).eq(4.0).all().item<bool>());
    CHECK(xi.narrow(1, 320, 128).eq(3.0).all().item<bool>());
  }

  TEST_CASE("a disabled modality zero-fills its channels") {
    const auto ones = [](int64_t c) { return torch::ones({1, c, 8, 8}); };
    const auto xi = fuse_modalities(ones(256), ones(64), ones(128), ones(4), {true, true, true, false});
    CHECK(xi.narrow(1, 448, 4).abs().max().item<double>() == 0.0);
    CHECK(xi.narrow(1, 0, 448).eq(1.0).all().item<bool>());
  }

  TEST_CASE("pooling onto scale grids") {
    const auto xi = torch::rand({1, 5, 8, 8});
    CHECK(pool_grid(xi, 3).sizes() == torch::IntArrayRef{1, 5, 8, 8});
    CHECK(testing::max_abs(pool_grid(xi, 3) - xi) == 0.0);
    CHECK(pool_grid(xi, 1).sizes() == torch::IntArrayRef{1, 5, 2, 2});
    const auto pooled = pool_grid(torch::full({1, 3, 8, 8}, 0.7), 2);
    CHECK(testing::max_abs(pooled - 0.7) <= 1e-6);
    CHECK_THROWS_AS(pool_grid(xi, 5), mvf::Error);
    CHECK(pool_grid_any(xi, 5).sizes() == torch::IntArrayRef{1, 5, 32, 32});
  }

  TEST_CASE("zero interleaving places originals at even indices") {
    const auto x = torch::arange(1, 5, torch::kFloat32).view({1, 1, 2, 2});
    const auto z = zero_interleave(x);
    CHECK(z.sizes() == torch::IntArrayRef{1, 1, 4, 4});
    CHECK(testing::same(z.slice(2, 0, 4, 2).slice(3, 0, 4, 2), x));
    CHECK(z.sum().item<float>() == 10.0f);
    CHECK(z[0][0][1].abs().sum().item<float>() == 0.0f);
  }

  TEST_CASE("bilinear upsampling keeps constants in the interior and is linear") {
    const auto k = bilinear_kernel();
    CHECK(k[1][1].item<float>() == 1.0f);
    CHECK(k[0][0].item<float>() == 0.25f);
    const auto up = upsample2x(torch::full({1, 2, 4, 4}, 3.0));
    CHECK(up.sizes() == torch::IntArrayRef{1, 2, 8, 8});
    CHECK(testing::max_abs(up.slice(2, 1, 7).slice(3, 1, 7) - 3.0) <= 1e-6);
    const auto a = torch::rand({1, 2, 4, 4}), b = torch::rand({1, 2, 4, 4});
    CHECK(testing::max_abs(upsample2x(2 * a - b) - (2 * upsample2x(a) - upsample2x(b))) <= 1e-5);
  }

  TEST_CASE("connectors combine the previous scale with the current embedding") {
    const auto g = torch::rand({1, 4, 2, 2}), p = torch::rand({1, 4, 2, 2}), cur = torch::rand({1, 4, 4, 4});
    const auto up = connect_scales(g, p, cur);
    CHECK(up.sizes() == torch::IntArrayRef{1, 4, 4, 4});
    CHECK(testing::max_abs(up - (upsample2x(g + p) + cur)) <= 1e-6);
    const auto down = connect_scales_down(cur, cur, g);
    CHECK(down.sizes() == torch::IntArrayRef{1, 4, 2, 2});
    CHECK(testing::max_abs(down - (torch::avg_pool2d(2 * cur, 2) + g)) <= 1e-6);
  }

  TEST_CASE("tokens and grids convert row-major") {
    const auto grid = torch::rand({2, 3, 4, 5});
    const auto tokens = grid_to_tokens(grid);
    CHECK(tokens.sizes() == torch::IntArrayRef{2, 20, 3});
    CHECK(testing::same(tokens[1][7], grid[1].select(1, 1).select(1, 2)));
    CHECK(testing::same(tokens_to_grid(tokens, 4, 5), grid));
  }

  TEST_CASE("encoder blocks with zeroed residual branches are the identity") {
    EncoderStack stack(16, 2, 2);
    stack->zero_residual_branches();
    const auto z = torch::randn({2, 9, 16});
    CHECK(testing::max_abs(stack->forward(z) - z) == 0.0);
  }

  TEST_CASE("each scale sees 4^k tokens and coarse-to-fine output is G = B + E") {
    torch::manual_seed(0);
    Hierarchy h(small_options());
    h->eval();
    for (int k : {1, 2, 3}) h->stack(k)->zero_residual_branches();
    torch::NoGradGuard g;
    const auto xi = torch::rand({1, 452, 8, 8});
    const auto out = h->forward(xi);
    REQUIRE(out.grids.size() == 3);
    for (int s = 0; s < 3; ++s) {
      const int64_t side = int64_t{1} << (s + 1);
      CHECK(out.grids[s].sizes() == torch::IntArrayRef{1, 16, side, side});
    }
    auto expected = h->embed(xi, 1) + tokens_to_grid(h->positional(1), 2, 2);
    for (int k : {2, 3}) {
      const auto psi_prev = h->embed(xi, k - 1);
      const auto g_prev = expected;
      const auto base = connect_scales(g_prev, psi_prev, h->embed(xi, k));
      const int64_t side = int64_t{1} << k;
      expected = base + tokens_to_grid(h->positional(k), side, side);
    }
    CHECK(testing::max_abs(out.final - expected) <= 1e-5);
  }

  TEST_CASE("alternative routings produce finest-grid outputs") {
    Hierarchy h(small_options());
    h->eval();
    torch::NoGradGuard g;
    const auto xi = torch::rand({1, 452, 8, 8});
    CHECK(h->forward(xi, Routing::kFineToCoarse).final.sizes() == torch::IntArrayRef{1, 16, 2, 2});
    CHECK(h->forward(xi, Routing::kFlat).final.sizes() == torch::IntArrayRef{1, 16, 8, 8});
    CHECK(h->forward(xi, Routing::kStandardTransformer).final.dim() == 4);
  }

  TEST_CASE("the hierarchy accepts non-square feature grids") {
    Hierarchy h(small_options());
    h->eval();
    torch::NoGradGuard g;
    const auto out = h->forward(torch::rand({1, 452, 8, 16}));
    CHECK(out.final.sizes() == torch::IntArrayRef{1, 16, 8, 8});
    CHECK_THROWS_AS(h->forward(torch::rand({1, 452, 8, 16}), Routing::kStandardTransformer), mvf::Error);
  }

  TEST_CASE("full network output shapes and the flow ablation") {
    torch::manual_seed(4);
    auto model = make_model(small_model());
    model->eval();
    torch::NoGradGuard g;
    const auto frames = torch::rand({3, 3, 64, 64});
    const auto flow = clip_flow_features(frames, model->config());
    CHECK(flow.sizes() == torch::IntArrayRef{3, 4, 8, 8});
    const auto out = model->forward(frames, flow);
    CHECK(out.score_logits.sizes() == torch::IntArrayRef{3});
    CHECK(out.mask_logits.sizes() == torch::IntArrayRef{3, 64, 64});
    CHECK(out.xi.sizes() == torch::IntArrayRef{3, 256 + 16 + 128 + 4, 8, 8});
    AblationFlags flags;
    flags.no_optflow_residual = true;
    model->set_ablation(flags);
    const auto ablated = model->fuse(frames, flow);
    CHECK(ablated.narrow(1, 400, 4).abs().max().item<double>() == 0.0);
  }
}
