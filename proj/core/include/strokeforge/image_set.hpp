#pragma once

#include <torch/torch.h>

#include <cstddef>
#include <filesystem>
#include <vector>

#include "strokeforge/image.hpp"

namespace strokeforge {

/// Images at a common resolution, optionally with integer class labels.
struct LabeledImageSet {
  std::vector<Image> images;
  /// Empty when the set is unlabeled; otherwise one label per image.
  std::vector<int> labels;

  std::size_t size() const { return images.size(); }
  bool labeled() const { return !labels.empty(); }
  int num_classes() const;
  int height() const { return images.empty() ? 0 : images.front().height(); }
  int width() const { return images.empty() ? 0 : images.front().width(); }

  /// [N, 3, H, W] batch of the selected indices (all when empty).
  torch::Tensor tensor(const std::vector<std::size_t>& indices = {}) const;
  torch::Tensor label_tensor(const std::vector<std::size_t>& indices = {}) const;

  LabeledImageSet subset(std::size_t begin, std::size_t end) const;
  LabeledImageSet filter_label(int label) const;
};

/// Index split: the trailing `heldout_fraction` of the set is held out.
struct ImageSplit {
  LabeledImageSet train;
  LabeledImageSet heldout;
};
ImageSplit split_images(const LabeledImageSet& set, double heldout_fraction);

/// Reads IDX image (and optional label) archives. Grayscale ink is stored as
/// high values in IDX digit sets, so intensities are inverted to dark ink on
/// white and resized to size x size.
LabeledImageSet load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                         int size);

/// Loads a directory of PNGs resized to size x size. Sub-directories named by
/// integer class id give labels; a flat directory yields an unlabeled set.
LabeledImageSet load_png_dir(const std::filesystem::path& dir, int size);

/// Directory containing `*-images-idx3-ubyte` (+ labels) or PNG files.
LabeledImageSet load_image_dataset(const std::filesystem::path& path, int size);

}  // namespace strokeforge
