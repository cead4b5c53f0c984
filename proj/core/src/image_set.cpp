#include "strokeforge/image_set.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <string>

#include "strokeforge/error.hpp"
#include "strokeforge/tensor_image.hpp"

namespace strokeforge {

int LabeledImageSet::num_classes() const {
  if (labels.empty()) return 0;
  return *std::ranges::max_element(labels) + 1;
}

torch::Tensor LabeledImageSet::tensor(const std::vector<std::size_t>& indices) const {
  std::vector<torch::Tensor> parts;
  if (indices.empty()) {
    for (const auto& im : images) parts.push_back(to_tensor(im));
  } else {
    for (auto i : indices) parts.push_back(to_tensor(images.at(i)));
  }
  if (parts.empty()) throw InvalidArgument("empty image selection");
  return torch::stack(parts);
}

torch::Tensor LabeledImageSet::label_tensor(const std::vector<std::size_t>& indices) const {
  if (!labeled()) throw InvalidArgument("image set has no labels");
  std::vector<std::int64_t> out;
  if (indices.empty()) {
    out.assign(labels.begin(), labels.end());
  } else {
    for (auto i : indices) out.push_back(labels.at(i));
  }
  return torch::tensor(out, torch::kInt64);
}

LabeledImageSet LabeledImageSet::subset(std::size_t begin, std::size_t end) const {
  LabeledImageSet out;
  end = std::min(end, images.size());
  begin = std::min(begin, end);
  out.images.assign(images.begin() + static_cast<std::ptrdiff_t>(begin), images.begin() + static_cast<std::ptrdiff_t>(end));
  if (labeled()) {
    out.labels.assign(labels.begin() + static_cast<std::ptrdiff_t>(begin), labels.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

LabeledImageSet LabeledImageSet::filter_label(int label) const {
  if (!labeled()) throw InvalidArgument("image set has no labels");
  LabeledImageSet out;
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (labels[i] == label) {
      out.images.push_back(images[i]);
      out.labels.push_back(label);
    }
  }
  return out;
}

ImageSplit split_images(const LabeledImageSet& set, double heldout_fraction) {
  if (!(heldout_fraction >= 0.0 && heldout_fraction < 1.0)) {
    throw InvalidArgument("heldout_fraction must lie in [0,1)");
  }
  const auto heldout = static_cast<std::size_t>(static_cast<double>(set.size()) * heldout_fraction);
  const auto cut = set.size() - heldout;
  return {set.subset(0, cut), set.subset(cut, set.size())};
}

namespace {

std::uint32_t read_be32(std::istream& in, const std::filesystem::path& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw IoError("truncated IDX header in " + path.string());
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

}  // namespace

LabeledImageSet load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                         int size) {
  std::ifstream in(images_path, std::ios::binary);
  if (!in) throw IoError("cannot open " + images_path.string());
  if (read_be32(in, images_path) != 0x00000803U) throw IoError(images_path.string() + " is not an IDX3 ubyte file");
  const auto n = read_be32(in, images_path);
  const auto rows = static_cast<int>(read_be32(in, images_path));
  const auto cols = static_cast<int>(read_be32(in, images_path));
  LabeledImageSet set;
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(rows) * cols);
  for (std::uint32_t i = 0; i < n; ++i) {
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!in) throw IoError("truncated IDX image data in " + images_path.string());
    Image im(rows, cols);
    for (int y = 0; y < rows; ++y) {
      for (int x = 0; x < cols; ++x) {
        const float v = 1.0F - from_byte(buf[static_cast<std::size_t>(y) * cols + x]);
        for (int c = 0; c < Image::kChannels; ++c) im.at(y, x, c) = v;
      }
    }
    set.images.push_back(resize_bilinear(im, size, size));
  }
  if (!labels_path.empty() && std::filesystem::exists(labels_path)) {
    std::ifstream lin(labels_path, std::ios::binary);
    if (read_be32(lin, labels_path) != 0x00000801U) throw IoError(labels_path.string() + " is not an IDX1 ubyte file");
    if (read_be32(lin, labels_path) != n) throw IoError("IDX label count does not match image count");
    std::vector<std::uint8_t> labels(n);
    lin.read(reinterpret_cast<char*>(labels.data()), n);
    if (!lin) throw IoError("truncated IDX label data in " + labels_path.string());
    set.labels.assign(labels.begin(), labels.end());
  }
  return set;
}

LabeledImageSet load_png_dir(const std::filesystem::path& dir, int size) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError(dir.string() + " is not a directory");
  std::vector<fs::path> flat;
  std::map<int, std::vector<fs::path>> by_class;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") {
      flat.push_back(entry.path());
    } else if (entry.is_directory()) {
      const auto name = entry.path().filename().string();
      if (name.empty() || !std::ranges::all_of(name, [](char c) { return c >= '0' && c <= '9'; })) continue;
      auto& files = by_class[std::stoi(name)];
      for (const auto& f : fs::directory_iterator(entry.path())) {
        if (f.is_regular_file() && f.path().extension() == ".png") files.push_back(f.path());
      }
    }
  }
  LabeledImageSet set;
  if (!by_class.empty()) {
    for (auto& [label, files] : by_class) {
      std::ranges::sort(files);
      for (const auto& f : files) {
        set.images.push_back(resize_bilinear(read_png(f), size, size));
        set.labels.push_back(label);
      }
    }
  } else {
    std::ranges::sort(flat);
    for (const auto& f : flat) set.images.push_back(resize_bilinear(read_png(f), size, size));
  }
  if (set.images.empty()) throw IoError("no PNG images found under " + dir.string());
  return set;
}

LabeledImageSet load_image_dataset(const std::filesystem::path& path, int size) {
  namespace fs = std::filesystem;
  if (fs::is_regular_file(path)) {
    auto labels = path.string();
    const auto pos = labels.find("images-idx3-ubyte");
    if (pos == std::string::npos) throw IoError("unrecognised dataset file " + path.string());
    labels.replace(pos, std::string("images-idx3-ubyte").size(), "labels-idx1-ubyte");
    return load_idx(path, labels, size);
  }
  if (!fs::is_directory(path)) throw IoError("dataset path not found: " + path.string());
  for (const auto& entry : fs::directory_iterator(path)) {
    const auto name = entry.path().filename().string();
    if (name.ends_with("images-idx3-ubyte")) return load_image_dataset(entry.path(), size);
  }
  return load_png_dir(path, size);
}

}  // namespace strokeforge
