#include "sgan/data.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <string>
#include <vector>

#include "sgan/netpbm.hpp"
#include "sgan/rng.hpp"

namespace {

using namespace sgan;
namespace fs = std::filesystem;

std::string temp_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / "sgan_data_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

RgbImage random_rgb(int h, int w, uint64_t seed) {
  RgbImage img;
  img.width = w;
  img.height = h;
  img.pixels.resize(static_cast<size_t>(3) * h * w);
  Pcg32 rng(seed);
  for (auto& p : img.pixels) p = static_cast<uint8_t>(rng.uniform_int(0, 255));
  return img;
}

GrayImage random_gray(int h, int w, uint64_t seed, int maxv = 255) {
  GrayImage img;
  img.width = w;
  img.height = h;
  img.pixels.resize(static_cast<size_t>(h) * w);
  Pcg32 rng(seed);
  for (auto& p : img.pixels) p = static_cast<uint8_t>(rng.uniform_int(0, maxv));
  return img;
}

TEST(Data, InputTensorMapsToMinusOneOne) {
  RgbImage img;
  img.width = 2;
  img.height = 1;
  img.pixels = {0, 255, 51, 102, 153, 204};
  auto t = to_input_tensor<double>(img);
  EXPECT_EQ(t.shape(), (Shape{3, 1, 2}));
  // planar layout: channel 0 holds pixels (0,0) and (0,1)
  EXPECT_DOUBLE_EQ(t.data()[0], -1.0);          // r of pixel 0
  EXPECT_DOUBLE_EQ(t.data()[1], 102 / 127.5 - 1.0);
  EXPECT_DOUBLE_EQ(t.data()[2], 1.0);           // g of pixel 0
  EXPECT_DOUBLE_EQ(t.data()[3], 153 / 127.5 - 1.0);
  EXPECT_DOUBLE_EQ(t.data()[4], 51 / 127.5 - 1.0);
  EXPECT_DOUBLE_EQ(t.data()[5], 204 / 127.5 - 1.0);
}

TEST(Data, LabelVectorMultiHot) {
  auto v = label_vector<float>({1, 3}, 4);
  EXPECT_EQ(v, (std::vector<float>{1, 0, 1, 0}));
  EXPECT_THROW(label_vector<float>({5}, 4), std::invalid_argument);
  EXPECT_THROW(label_vector<float>({0}, 4), std::invalid_argument);
}

TEST(Data, FlipIsAnInvolution) {
  auto rgb = random_rgb(5, 7, 1);
  auto gray = random_gray(5, 7, 2);
  EXPECT_EQ(flip_horizontal(flip_horizontal(rgb)).pixels, rgb.pixels);
  EXPECT_EQ(flip_horizontal(flip_horizontal(gray)).pixels, gray.pixels);
  // actual reversal per row
  auto f = flip_horizontal(gray);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 7; ++x) EXPECT_EQ(f.at(y, x), gray.at(y, 6 - x));
}

TEST(Data, DownsampleAfterUpsampleIsIdentity) {
  auto img = random_gray(4, 6, 3);
  auto up = upsample_nearest(img, 4);
  EXPECT_EQ(up.width, 24);
  EXPECT_EQ(up.height, 16);
  EXPECT_EQ(downsample_nearest(up, 4).pixels, img.pixels);
  // nearest keeps the top-left pixel of each block
  auto down = downsample_nearest(up, 8);
  EXPECT_EQ(down.at(0, 0), img.at(0, 0));
}

TEST(Data, DownsampleRequiresDivisibility) {
  EXPECT_THROW(downsample_nearest(random_gray(5, 6, 4), 4), std::invalid_argument);
}

TEST(Data, BinarizeSaliencyThresholdsAtHalf) {
  GrayImage sal;
  sal.width = 4;
  sal.height = 1;
  sal.pixels = {0, 127, 128, 255};
  EXPECT_EQ(binarize_saliency(sal), (std::vector<uint8_t>{0, 0, 1, 1}));
}

Dataset make_dataset() {
  Dataset ds;
  ds.num_classes = 3;
  ds.image_size = 8;
  for (int i = 0; i < 3; ++i) {
    Sample s;
    s.id = "train_000" + std::to_string(i);
    s.image = random_rgb(8, 8, 10 + i);
    s.saliency = random_gray(8, 8, 20 + i);
    s.mask = random_gray(8, 8, 30 + i, 3);  // values 0..3
    for (uint8_t v : s.mask.pixels)
      if (v != kBackground &&
          std::find(s.labels.begin(), s.labels.end(), v) == s.labels.end())
        s.labels.push_back(v);
    std::sort(s.labels.begin(), s.labels.end());
    s.full_supervision = i == 0;
    ds.train.push_back(s);
  }
  Sample v = ds.train[0];
  v.id = "val_0000";
  v.full_supervision = false;
  ds.val.push_back(v);
  return ds;
}

TEST(Data, SaveLoadRoundTrip) {
  Dataset ds = make_dataset();
  const std::string dir = temp_dir("roundtrip");
  save_dataset(dir, ds);
  Dataset back = load_dataset(dir);
  EXPECT_EQ(back.num_classes, 3);
  EXPECT_EQ(back.image_size, 8);
  ASSERT_EQ(back.train.size(), 3u);
  ASSERT_EQ(back.val.size(), 1u);
  for (size_t i = 0; i < ds.train.size(); ++i) {
    EXPECT_EQ(back.train[i].id, ds.train[i].id);
    EXPECT_EQ(back.train[i].image.pixels, ds.train[i].image.pixels);
    EXPECT_EQ(back.train[i].saliency.pixels, ds.train[i].saliency.pixels);
    EXPECT_EQ(back.train[i].mask.pixels, ds.train[i].mask.pixels);
    EXPECT_EQ(back.train[i].labels, ds.train[i].labels);
    EXPECT_EQ(back.train[i].full_supervision, ds.train[i].full_supervision);
  }
}

TEST(Data, LoadRejectsBadMaskPalette) {
  Dataset ds = make_dataset();
  ds.train[1].mask.pixels[5] = 7;  // class 7 does not exist for num_classes=3
  const std::string dir = temp_dir("badmask");
  save_dataset(dir, ds);
  EXPECT_THROW(load_dataset(dir), std::invalid_argument);
}

TEST(Data, LoadRejectsLabelMaskMismatch) {
  Dataset ds = make_dataset();
  ds.train[1].labels = {1};  // mask almost surely contains other classes
  bool mask_has_other = false;
  for (uint8_t v : ds.train[1].mask.pixels)
    if (v != kBackground && v != 1) mask_has_other = true;
  ASSERT_TRUE(mask_has_other);
  const std::string dir = temp_dir("badlabels");
  save_dataset(dir, ds);
  EXPECT_THROW(load_dataset(dir), std::invalid_argument);
}

TEST(Data, LoadRejectsMissingImage) {
  Dataset ds = make_dataset();
  const std::string dir = temp_dir("missing");
  save_dataset(dir, ds);
  fs::remove(dir + "/images/train_0001.ppm");
  EXPECT_THROW(load_dataset(dir), std::runtime_error);
}

}  // namespace
