#include <gtest/gtest.h>

#include "solidtex/grid.hpp"
#include "support.hpp"

using namespace solidtex;

namespace {

Volume3D ramp_2x2x2() {
  Volume3D v({2, 2, 2});
  for (int z = 0; z < 2; ++z)
    for (int y = 0; y < 2; ++y)
      for (int x = 0; x < 2; ++x)
        v(x, y, z) = static_cast<float>(x + 2 * y + 4 * z);
  return v;
}

Image2D counting_3x3() {
  Image2D img(3, 3);
  for (int i = 0; i < 9; ++i)
    img.data()[i] = static_cast<float>(i);
  return img;
}

std::vector<float> values(const Image2D& img) { return {img.data().begin(), img.data().end()}; }

} // namespace

TEST(SliceExtract, ZSliceOfRamp) {
  EXPECT_EQ(values(slice_extract(ramp_2x2x2(), Axis::Z, 1)), (std::vector<float>{4, 5, 6, 7}));
}

TEST(SliceExtract, XSliceOfRamp) {
  EXPECT_EQ(values(slice_extract(ramp_2x2x2(), Axis::X, 0)), (std::vector<float>{0, 2, 4, 6}));
}

TEST(SliceExtract, YSliceUsesXAndZ) {
  // y = 1: (x, z) = (0,0) 2, (1,0) 3, (0,1) 6, (1,1) 7
  EXPECT_EQ(values(slice_extract(ramp_2x2x2(), Axis::Y, 1)), (std::vector<float>{2, 3, 6, 7}));
}

TEST(SliceExtract, FrameSizesFollowAxis) {
  const Volume3D v({3, 4, 5});
  const auto x = slice_extract(v, Axis::X, 0), y = slice_extract(v, Axis::Y, 0), z = slice_extract(v, Axis::Z, 0);
  EXPECT_EQ(x.width(), 4); EXPECT_EQ(x.height(), 5);
  EXPECT_EQ(y.width(), 3); EXPECT_EQ(y.height(), 5);
  EXPECT_EQ(z.width(), 3); EXPECT_EQ(z.height(), 4);
}

TEST(SliceExtract, OutOfRangeIndexThrows) {
  const auto v = ramp_2x2x2();
  EXPECT_THROW(slice_extract(v, Axis::Z, 2), BoundsError);
  EXPECT_THROW(slice_extract(v, Axis::X, -1), BoundsError);
}

TEST(SliceExtract, ReassemblingZSlicesIsIdentity) {
  const auto v = fixtures::random_volume({5, 3, 4}, 11);
  std::vector<Image2D> slices;
  for (int z = 0; z < 4; ++z)
    slices.push_back(slice_extract(v, Axis::Z, z));
  EXPECT_EQ(assemble_z_slices(slices), v);
}

TEST(SliceExtract, VoxelSizeCarriesOver) {
  Volume3D v({2, 2, 2});
  v.voxel_size = 0.46;
  EXPECT_EQ(slice_extract(v, Axis::Y, 0).pixel_size, 0.46);
}

TEST(Neighborhood, FullWindowClamp) {
  const auto nb = neighborhood_extract(counting_3x3(), 1, 1, 3, Wrap::Clamp);
  EXPECT_EQ(nb.values, (std::vector<float>{0, 1, 2, 3, 4, 5, 6, 7, 8}));
  EXPECT_EQ(nb.cx, 1);
  EXPECT_EQ(nb.cy, 1);
}

TEST(Neighborhood, CornerToroidal) {
  const auto nb = neighborhood_extract(counting_3x3(), 0, 0, 3, Wrap::Toroidal);
  EXPECT_EQ(nb.values, (std::vector<float>{8, 6, 7, 2, 0, 1, 5, 3, 4}));
}

TEST(Neighborhood, CornerClampRepeatsEdge) {
  const auto nb = neighborhood_extract(counting_3x3(), 0, 0, 3, Wrap::Clamp);
  EXPECT_EQ(nb.values, (std::vector<float>{0, 0, 1, 0, 0, 1, 3, 3, 4}));
}

TEST(Neighborhood, ConstantImage) {
  const Image2D img(7, 5, 7.0f);
  for (int w : {1, 2, 4, 5, 7})
    for (auto wrap : {Wrap::Toroidal, Wrap::Clamp}) {
      const auto nb = neighborhood_extract(img, 6, 0, w, wrap);
      ASSERT_EQ(nb.values.size(), static_cast<std::size_t>(w * w));
      for (float v : nb.values)
        EXPECT_EQ(v, 7.0f);
    }
}

TEST(Neighborhood, EvenWindowCenterSitsAtHalfWidth) {
  // 4x4 window: rows/cols cover c-2 .. c+1, center at offset (2, 2).
  Image2D img(6, 6);
  for (int i = 0; i < 36; ++i)
    img.data()[i] = static_cast<float>(i);
  const auto nb = neighborhood_extract(img, 3, 3, 4, Wrap::Clamp);
  EXPECT_EQ(nb.values[2 * 4 + 2], img(3, 3));
  EXPECT_EQ(nb.values[0], img(1, 1));
  EXPECT_EQ(nb.values[15], img(4, 4));
}

TEST(Neighborhood, CenterOutsideThrows) {
  const auto img = counting_3x3();
  EXPECT_THROW(neighborhood_extract(img, 3, 0, 3), BoundsError);
  EXPECT_THROW(neighborhood_extract(img, 0, -1, 3), BoundsError);
  EXPECT_THROW(neighborhood_extract(img, 1, 1, 0), ContractError);
}

TEST(Neighborhood, ToroidalTranslationEquivariance) {
  const auto img = fixtures::random_image(9, 7, 5);
  for (int shift_x : {0, 2, 8})
    for (int shift_y : {0, 3, 6}) {
      Image2D shifted(9, 7);
      for (int y = 0; y < 7; ++y)
        for (int x = 0; x < 9; ++x)
          shifted((x + shift_x) % 9, (y + shift_y) % 7) = img(x, y);
      for (int w : {3, 4, 6})
        for (int cy = 0; cy < 7; ++cy)
          for (int cx = 0; cx < 9; ++cx)
            ASSERT_EQ(neighborhood_extract(img, cx, cy, w).values,
                      neighborhood_extract(shifted, (cx + shift_x) % 9, (cy + shift_y) % 7, w).values);
    }
}

TEST(Neighborhood, VolumeNeighborhoodMatchesSlicePath) {
  const auto v = fixtures::random_volume({5, 6, 7}, 3);
  std::vector<float> out(16);
  for (Axis a : kAxes)
    for (int z = 0; z < 7; z += 3)
      for (int y = 0; y < 6; y += 2)
        for (int x = 0; x < 5; ++x) {
          volume_neighborhood(v, a, x, y, z, 4, out);
          const int index = a == Axis::X ? x : a == Axis::Y ? y : z;
          const int u = a == Axis::X ? y : x;
          const int w = a == Axis::Z ? y : z;
          ASSERT_EQ(out, neighborhood_extract(slice_extract(v, a, index), u, w, 4).values);
        }
}

TEST(Types, ConstructorsCheckLengths) {
  EXPECT_THROW(Image2D(2, 2, std::vector<float>(3)), ContractError);
  EXPECT_THROW(Volume3D({2, 2, 2}, std::vector<float>(7)), ContractError);
  EXPECT_THROW(Image2D(0, 3), ContractError);
}

TEST(Types, WrapCoord) {
  EXPECT_EQ(wrap_coord(-1, 5, Wrap::Toroidal), 4);
  EXPECT_EQ(wrap_coord(-6, 5, Wrap::Toroidal), 4);
  EXPECT_EQ(wrap_coord(7, 5, Wrap::Toroidal), 2);
  EXPECT_EQ(wrap_coord(-3, 5, Wrap::Clamp), 0);
  EXPECT_EQ(wrap_coord(9, 5, Wrap::Clamp), 4);
}
