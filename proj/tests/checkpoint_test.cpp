#include "sgan/checkpoint.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sgan/rng.hpp"

namespace {

using namespace sgan;
namespace fs = std::filesystem;

std::string temp_base(const std::string& name) {
  auto dir = fs::temp_directory_path() / "sgan_checkpoint_test";
  fs::create_directories(dir);
  return (dir / name).string();
}

NamedTensors<float> sample_params() {
  NamedTensors<float> p;
  Pcg32 rng(3);
  std::vector<float> a(6), b(4);
  for (auto& v : a) v = static_cast<float>(rng.normal());
  for (auto& v : b) v = static_cast<float>(rng.normal());
  p.add("backbone.w", Tensor<float>::from_data({2, 3}, a, true));
  p.add("head.b", Tensor<float>::from_data({4}, b, true));
  return p;
}

TEST(Checkpoint, RoundTripIsBitExact) {
  auto params = sample_params();
  const std::string base = temp_base("round");
  save_checkpoint(base, params);
  auto loaded = load_checkpoint(base);
  ASSERT_EQ(loaded.size(), 2u);
  // manifest order preserved
  EXPECT_EQ(loaded.items[0].first, "backbone.w");
  EXPECT_EQ(loaded.items[1].first, "head.b");
  for (size_t i = 0; i < params.items.size(); ++i) {
    EXPECT_EQ(loaded.items[i].second.shape(), params.items[i].second.shape());
    EXPECT_EQ(loaded.items[i].second.data(), params.items[i].second.data());
  }
}

TEST(Checkpoint, BinaryLayoutIsLittleEndianF32) {
  NamedTensors<float> p;
  p.add("x", Tensor<float>::from_data({1}, std::vector<float>{1.0f}));
  const std::string base = temp_base("layout");
  save_checkpoint(base, p);
  std::ifstream in(base + ".bin", std::ios::binary);
  std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in),
                                   std::istreambuf_iterator<char>()};
  ASSERT_EQ(bytes.size(), 4u);
  // 1.0f = 0x3f800000 little-endian
  EXPECT_EQ(bytes[0], 0x00);
  EXPECT_EQ(bytes[1], 0x00);
  EXPECT_EQ(bytes[2], 0x80);
  EXPECT_EQ(bytes[3], 0x3f);
}

TEST(Checkpoint, ManifestRecordsShapeDtypeOffset) {
  auto params = sample_params();
  const std::string base = temp_base("manifest");
  save_checkpoint(base, params);
  std::ifstream in(base + ".json");
  nlohmann::json j;
  in >> j;
  ASSERT_TRUE(j.is_array());
  ASSERT_EQ(j.size(), 2u);
  EXPECT_EQ(j[0]["name"], "backbone.w");
  EXPECT_EQ(j[0]["shape"], (std::vector<int>{2, 3}));
  EXPECT_EQ(j[0]["dtype"], "f32");
  EXPECT_EQ(j[0]["byte_offset"], 0);
  EXPECT_EQ(j[1]["byte_offset"], 24);
}

TEST(Checkpoint, TruncatedBlobIsRejected) {
  auto params = sample_params();
  const std::string base = temp_base("trunc");
  save_checkpoint(base, params);
  fs::resize_file(base + ".bin", 10);
  try {
    load_checkpoint(base);
    FAIL() << "expected an error about the blob size";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("past end"), std::string::npos) << e.what();
  }
}

TEST(Checkpoint, CorruptManifestIsRejected) {
  auto params = sample_params();
  const std::string base = temp_base("badjson");
  save_checkpoint(base, params);
  std::ofstream(base + ".json") << "[{\"name\": \"x\"}]";
  EXPECT_THROW(load_checkpoint(base), std::runtime_error);
  std::ofstream(base + ".json") << "not json";
  EXPECT_THROW(load_checkpoint(base), std::runtime_error);
}

TEST(Checkpoint, MissingFilesThrow) {
  EXPECT_THROW(load_checkpoint(temp_base("nonexistent")), std::runtime_error);
}

TEST(Checkpoint, DuplicateNameRejected) {
  NamedTensors<float> p;
  p.add("w", Tensor<float>::scalar(1.0f));
  EXPECT_THROW(p.add("w", Tensor<float>::scalar(2.0f)), std::invalid_argument);
}

TEST(Checkpoint, CopyStateTransfersValuesByName) {
  auto src = sample_params();
  NamedTensors<float> dst;
  dst.add("head.b", Tensor<float>::zeros({4}, true));
  dst.add("backbone.w", Tensor<float>::zeros({2, 3}, true));
  copy_state(src, dst);
  EXPECT_EQ(dst.find("backbone.w")->data(), src.find("backbone.w")->data());
  EXPECT_EQ(dst.find("head.b")->data(), src.find("head.b")->data());
}

TEST(Checkpoint, CopyStateChecksPresenceAndShape) {
  auto src = sample_params();
  NamedTensors<float> missing;
  missing.add("other", Tensor<float>::zeros({2}, true));
  EXPECT_THROW(copy_state(src, missing), std::invalid_argument);

  NamedTensors<float> wrong;
  wrong.add("backbone.w", Tensor<float>::zeros({3, 2}, true));
  EXPECT_THROW(copy_state(src, wrong), std::invalid_argument);
}

}  // namespace
