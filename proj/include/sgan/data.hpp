#pragma once
// Dataset on disk: a directory with manifest.json plus images/ (P6),
// saliency/ (P5) and masks/ (P5). Mask palette: 0 background, 255 unlabeled,
// k = foreground class k (1-based). The manifest lists every sample with its
// split, file paths relative to the directory, present class labels, and
// supervision kind ("weak" = image-level labels only, "full" = mask usable
// for training).

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sgan/netpbm.hpp"
#include "sgan/tensor.hpp"

namespace sgan {

constexpr uint8_t kBackground = 0;
constexpr uint8_t kUnlabeled = 255;

struct Sample {
  std::string id;
  RgbImage image;
  GrayImage saliency;        // 0..255, thresholded at 0.5 where a binary map is needed
  GrayImage mask;            // ground truth, palette above
  std::vector<int> labels;   // distinct foreground classes present, ascending
  bool full_supervision = false;
};

struct Dataset {
  int num_classes = 0;  // foreground classes; mask values run 1..num_classes
  int image_size = 0;
  std::vector<Sample> train, val;
};

// [3,H,W] float input in [-1,1].
template <typename T = float>
Tensor<T> to_input_tensor(const RgbImage& img) {
  require(img.width > 0 && img.height > 0, "to_input_tensor: empty image");
  std::vector<T> v(static_cast<size_t>(3) * img.height * img.width);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        v[(static_cast<size_t>(c) * img.height + y) * img.width + x] =
            static_cast<T>(img.at(y, x, c)) / T(127.5) - T(1);
  return Tensor<T>::from_data({3, img.height, img.width}, std::move(v));
}

// Multi-hot image-level label vector, tau[m-1] = 1 if class m is present.
template <typename T = float>
std::vector<T> label_vector(const std::vector<int>& labels, int num_classes) {
  std::vector<T> tau(num_classes, T(0));
  for (int c : labels) {
    require(c >= 1 && c <= num_classes,
            "label_vector: class " + std::to_string(c) + " outside 1.." +
                std::to_string(num_classes));
    tau[c - 1] = T(1);
  }
  return tau;
}

inline RgbImage flip_horizontal(const RgbImage& img) {
  RgbImage out = img;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y, img.width - 1 - x, c);
  return out;
}

inline GrayImage flip_horizontal(const GrayImage& img) {
  GrayImage out = img;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) out.at(y, x) = img.at(y, img.width - 1 - x);
  return out;
}

// Nearest-neighbour decimation by an integer stride, keeping the top-left
// pixel of each block: out(i,j) = in(i*s, j*s).
inline GrayImage downsample_nearest(const GrayImage& img, int stride) {
  require(stride >= 1, "downsample_nearest: stride must be >= 1");
  require(img.width % stride == 0 && img.height % stride == 0,
          "downsample_nearest: size " + std::to_string(img.width) + "x" +
              std::to_string(img.height) + " not divisible by stride " +
              std::to_string(stride));
  GrayImage out;
  out.width = img.width / stride;
  out.height = img.height / stride;
  out.pixels.resize(static_cast<size_t>(out.width) * out.height);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) out.at(y, x) = img.at(y * stride, x * stride);
  return out;
}

// Nearest-neighbour expansion: out(y,x) = in(y/s, x/s). Inverse of the
// decimation above in the sense downsample(upsample(m)) == m.
inline GrayImage upsample_nearest(const GrayImage& img, int stride) {
  require(stride >= 1, "upsample_nearest: stride must be >= 1");
  GrayImage out;
  out.width = img.width * stride;
  out.height = img.height * stride;
  out.pixels.resize(static_cast<size_t>(out.width) * out.height);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) out.at(y, x) = img.at(y / stride, x / stride);
  return out;
}

// Binary saliency decision at threshold 0.5 of full intensity.
inline std::vector<uint8_t> binarize_saliency(const GrayImage& sal) {
  std::vector<uint8_t> b(sal.pixels.size());
  for (size_t i = 0; i < b.size(); ++i) b[i] = sal.pixels[i] >= 128 ? 1 : 0;
  return b;
}

namespace detail {

inline void validate_sample(const Sample& s, int num_classes, int image_size,
                            const std::string& where) {
  require(s.image.width == image_size && s.image.height == image_size,
          where + ": image is " + std::to_string(s.image.width) + "x" +
              std::to_string(s.image.height) + ", expected " + std::to_string(image_size));
  require(s.saliency.width == image_size && s.saliency.height == image_size,
          where + ": saliency size mismatch");
  require(s.mask.width == image_size && s.mask.height == image_size,
          where + ": mask size mismatch");
  for (uint8_t v : s.mask.pixels)
    require(v == kBackground || v == kUnlabeled || (v >= 1 && v <= num_classes),
            where + ": mask value " + std::to_string(v) + " outside palette");
  for (int c : s.labels)
    require(c >= 1 && c <= num_classes,
            where + ": label " + std::to_string(c) + " outside 1.." +
                std::to_string(num_classes));
  // the image-level labels must be exactly the classes present in the mask
  std::vector<int> mask_classes;
  for (uint8_t v : s.mask.pixels)
    if (v != kBackground && v != kUnlabeled &&
        std::find(mask_classes.begin(), mask_classes.end(), v) == mask_classes.end())
      mask_classes.push_back(v);
  std::sort(mask_classes.begin(), mask_classes.end());
  std::vector<int> sorted_labels = s.labels;
  std::sort(sorted_labels.begin(), sorted_labels.end());
  require(mask_classes == sorted_labels,
          where + ": image-level labels do not match the classes in the mask");
}

}  // namespace detail

inline void save_dataset(const std::string& dir, const Dataset& ds) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "images");
  fs::create_directories(fs::path(dir) / "saliency");
  fs::create_directories(fs::path(dir) / "masks");

  nlohmann::ordered_json manifest;
  manifest["classes"] = ds.num_classes;
  manifest["image_size"] = ds.image_size;
  manifest["samples"] = nlohmann::ordered_json::array();
  auto emit = [&](const Sample& s, const char* split) {
    const std::string img_rel = "images/" + s.id + ".ppm";
    const std::string sal_rel = "saliency/" + s.id + ".pgm";
    const std::string mask_rel = "masks/" + s.id + ".pgm";
    write_ppm((fs::path(dir) / img_rel).string(), s.image);
    write_pgm((fs::path(dir) / sal_rel).string(), s.saliency);
    write_pgm((fs::path(dir) / mask_rel).string(), s.mask);
    nlohmann::ordered_json e;
    e["id"] = s.id;
    e["split"] = split;
    e["image"] = img_rel;
    e["saliency"] = sal_rel;
    e["mask"] = mask_rel;
    e["labels"] = s.labels;
    e["supervision"] = s.full_supervision ? "full" : "weak";
    manifest["samples"].push_back(e);
  };
  for (const auto& s : ds.train) emit(s, "train");
  for (const auto& s : ds.val) emit(s, "val");

  std::ofstream out(fs::path(dir) / "manifest.json");
  if (!out) throw std::runtime_error(dir + "/manifest.json: cannot open for writing");
  out << manifest.dump(2) << '\n';
}

inline Dataset load_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  const std::string mpath = (fs::path(dir) / "manifest.json").string();
  std::ifstream in(mpath);
  if (!in) throw std::runtime_error(mpath + ": cannot open for reading");
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(mpath + ": parse error: " + e.what());
  }
  require(manifest.contains("classes") && manifest.contains("image_size") &&
              manifest.contains("samples"),
          mpath + ": missing classes/image_size/samples");

  Dataset ds;
  ds.num_classes = manifest["classes"].get<int>();
  ds.image_size = manifest["image_size"].get<int>();
  require(ds.num_classes >= 1 && ds.num_classes <= 254,
          mpath + ": classes must be in 1..254");
  require(ds.image_size >= 8, mpath + ": image_size must be >= 8");

  for (const auto& e : manifest["samples"]) {
    Sample s;
    s.id = e.at("id").get<std::string>();
    s.image = read_ppm((fs::path(dir) / e.at("image").get<std::string>()).string());
    s.saliency = read_pgm((fs::path(dir) / e.at("saliency").get<std::string>()).string());
    s.mask = read_pgm((fs::path(dir) / e.at("mask").get<std::string>()).string());
    s.labels = e.at("labels").get<std::vector<int>>();
    s.full_supervision = e.value("supervision", "weak") == std::string("full");
    detail::validate_sample(s, ds.num_classes, ds.image_size, dir + "/" + s.id);
    const std::string split = e.at("split").get<std::string>();
    if (split == "train")
      ds.train.push_back(std::move(s));
    else if (split == "val")
      ds.val.push_back(std::move(s));
    else
      fail(mpath + ": unknown split '" + split + "' for sample " + s.id);
  }
  return ds;
}

}  // namespace sgan
