#include <doctest.h>

#include <numbers>
#include <random>

#include "support/oracles.hpp"
#include "tabletrec/losses.hpp"

using namespace tabletrec;

namespace {

LayerStack one_pixel_stack(const std::vector<double>& alphas, const std::vector<double>& zs) {
  LayerStack st;
  st.resize(1, 1, int(alphas.size()));
  for (size_t l = 0; l < alphas.size(); ++l) {
    st.tri[l] = int(2 * l);
    st.alpha[l] = alphas[l];
    st.z[l] = zs[l];
    st.point[l] = {0, 0, zs[l]};
    st.color[l] = {0.5, 0.5, 0.5};
    st.normal[l] = {0, 0, -1};
  }
  return st;
}

}  // namespace

TEST_CASE("photometric loss is a masked mean squared error") {
  Image a(4, 4, Vec3{0.5, 0.5, 0.5});
  Image b = a;
  GridU8 mask(4, 4, 1);
  CHECK(photometric_loss(a, b, mask) == 0.0);

  for (Vec3& v : b.data) v += Vec3{0.1, 0.1, 0.1};
  CHECK(photometric_loss(a, b, mask) == doctest::Approx(0.03));

  // Half the pixels masked: mean over the remaining half only.
  Image c = a;
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      mask.at(y, x) = x < 2 ? 1 : 0;
      if (x < 2) c.at(y, x) += Vec3{0.2, 0, 0};
    }
  CHECK(photometric_loss(a, c, mask) == doctest::Approx(0.04));

  bool empty = false;
  mask.fill(0);
  CHECK(photometric_loss(a, b, mask, &empty) == 0.0);
  CHECK(empty);
}

TEST_CASE("alpha inverse loss is the mean residual transmittance over covered pixels") {
  CHECK(alpha_inverse_loss(one_pixel_stack({1.0, 0.3}, {1, 2})) == 0.0);
  CHECK(alpha_inverse_loss(one_pixel_stack({0.5, 0.5}, {1, 2})) == doctest::Approx(0.25));
  CHECK(alpha_inverse_loss(one_pixel_stack({0.0, 0.0}, {1, 2})) == doctest::Approx(1.0));

  // Uncovered pixels are excluded entirely.
  LayerStack st;
  st.resize(2, 1, 2);
  st.tri[st.idx(0, 0, 0)] = 0;
  st.alpha[st.idx(0, 0, 0)] = 0.5;
  CHECK(alpha_inverse_loss(st) == doctest::Approx(0.5));
}

TEST_CASE("distortion loss on hand stacks") {
  CHECK(distortion_loss(one_pixel_stack({0.7}, {2.0})) == 0.0);
  // Coincident surfaces cost nothing.
  CHECK(distortion_loss(one_pixel_stack({0.5, 0.5}, {2.0, 2.0})) == 0.0);
  // T1 = 1, T2 = 0.5 (alpha1 = 0.5), |p1 - p2| = 2 -> 1.0.
  CHECK(distortion_loss(one_pixel_stack({0.5, 0.5}, {1.0, 3.0})) == doctest::Approx(1.0));
  // Zero-alpha layers are empty and contribute nothing.
  CHECK(distortion_loss(one_pixel_stack({0.0, 0.0}, {1.0, 3.0})) == 0.0);
  CHECK(distortion_loss(one_pixel_stack({0.0, 0.5, 0.5}, {0.5, 1.0, 3.0})) ==
        doctest::Approx(1.0));
  // Blending-weight variant: w1*w2*d = (1*0.5)*(0.5*0.5)*2 = 0.25.
  CHECK(distortion_loss(one_pixel_stack({0.5, 0.5}, {1.0, 3.0}), true) == doctest::Approx(0.25));
}

TEST_CASE("depth and normal losses are masked unit MSEs") {
  GridF d(2, 2, 1.0), dm(2, 2, 1.0);
  GridU8 mask(2, 2, 1);
  CHECK(depth_loss(d, dm, mask) == 0.0);
  for (double& v : dm.data) v += 0.1;
  CHECK(depth_loss(d, dm, mask) == doctest::Approx(0.01));

  Image n(2, 2, Vec3{0, 0, 1});
  Image nm(2, 2, normalized(Vec3{0, std::sin(std::numbers::pi / 3), std::cos(std::numbers::pi / 3)}));
  CHECK(normal_loss(n, n, mask) == 0.0);
  // 60 degrees apart everywhere: ||dn||^2 = 2 - 2 cos 60 = 1.
  CHECK(normal_loss(n, nm, mask) == doctest::Approx(1.0));

  bool empty = false;
  mask.fill(0);
  CHECK(depth_loss(d, dm, mask, &empty) == 0.0);
  CHECK(empty);
}

TEST_CASE("total loss is the weighted sum with the default weights") {
  LossValues v;
  const LossWeights defaults;
  CHECK(total_loss(v, defaults) == 0.0);

  v = {1.0, 1.0, 1.0, 1.0, 1.0, false, false, false};
  CHECK(total_loss(v, defaults) == doctest::Approx(30.0));  // weights [1,1,20,4,4]

  LossWeights zero{0, 0, 0, 0, 0};
  CHECK(total_loss(v, zero) == 0.0);

  // Linear in the weights.
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> uni(0.0, 2.0);
  for (int i = 0; i < 50; ++i) {
    LossValues lv{uni(rng), uni(rng), uni(rng), uni(rng), uni(rng), false, false, false};
    LossWeights w1{uni(rng), uni(rng), uni(rng), uni(rng), uni(rng)};
    LossWeights w2{uni(rng), uni(rng), uni(rng), uni(rng), uni(rng)};
    const double s = uni(rng);
    LossWeights mix{w1.photometric + s * w2.photometric, w1.alpha_inverse + s * w2.alpha_inverse,
                    w1.distortion + s * w2.distortion, w1.depth + s * w2.depth,
                    w1.normal + s * w2.normal};
    CHECK(total_loss(lv, mix) ==
          doctest::Approx(total_loss(lv, w1) + s * total_loss(lv, w2)).epsilon(1e-12));
  }
}

TEST_CASE("losses are nonnegative and alpha-inverse decreases in every alpha") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + int(rng() % 4);
    std::vector<double> alphas(n), zs(n);
    for (int i = 0; i < n; ++i) {
      alphas[i] = uni(rng);
      zs[i] = 1.0 + i + uni(rng);
    }
    const LayerStack st = one_pixel_stack(alphas, zs);
    CHECK(alpha_inverse_loss(st) >= 0.0);
    CHECK(distortion_loss(st) >= 0.0);

    const int bump = int(rng() % n);
    auto bumped = alphas;
    bumped[bump] = std::min(1.0, bumped[bump] + 0.2);
    CHECK(alpha_inverse_loss(one_pixel_stack(bumped, zs)) <= alpha_inverse_loss(st) + 1e-12);
  }
}

TEST_CASE("masked losses ignore the values of masked-out pixels") {
  const CameraView base_view = oracle::test_view();
  const Scene scene = oracle::random_scene(77, 3, base_view);
  CameraView view = base_view;
  oracle::attach_oracle_supervision(const_cast<Scene&>(scene), view, 78);

  RasterConfig rc;
  rc.layers = 6;
  const RenderOutput render = render_view(scene, view, rc);
  LossConfig lc;
  const LossValues a = compute_losses(render, view, lc);

  // Corrupt observed/supervision on invalid pixels only; losses must not move.
  CameraView corrupted = view;
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x)
      if (!render.valid.at(y, x)) {
        corrupted.image.at(y, x) = {9, 9, 9};
        corrupted.depth_supervision.at(y, x) = -5;
        corrupted.normal_supervision.at(y, x) = {0, 0, 0};
      }
  const LossValues b = compute_losses(render, corrupted, lc);
  CHECK(a.photometric == b.photometric);
  CHECK(a.depth == b.depth);
  CHECK(a.normal == b.normal);
}
