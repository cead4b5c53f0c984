#include "strokeforge/tensor_image.hpp"

#include <cstring>

#include "strokeforge/error.hpp"

namespace strokeforge {

torch::Tensor to_tensor(const Image& image) {
  auto hwc = torch::from_blob(const_cast<float*>(image.data().data()),
                              {image.height(), image.width(), Image::kChannels}, torch::kFloat32);
  return hwc.permute({2, 0, 1}).contiguous();
}

Image to_image(const torch::Tensor& tensor) {
  auto t = tensor.detach().to(torch::kCPU, torch::kFloat32);
  if (t.dim() == 4 && t.size(0) == 1) t = t.squeeze(0);
  if (t.dim() != 3 || t.size(0) != Image::kChannels) {
    throw InvalidArgument("expected a [3,H,W] tensor");
  }
  t = t.clamp(0.0, 1.0).permute({1, 2, 0}).contiguous();
  Image out(static_cast<int>(t.size(0)), static_cast<int>(t.size(1)));
  std::memcpy(out.data().data(), t.data_ptr<float>(), out.data().size() * sizeof(float));
  return out;
}

torch::Tensor stack_images(std::span<const Image> images) {
  std::vector<torch::Tensor> parts;
  parts.reserve(images.size());
  for (const auto& im : images) parts.push_back(to_tensor(im));
  return torch::stack(parts);
}

std::vector<Image> unstack_images(const torch::Tensor& batch) {
  std::vector<Image> out;
  out.reserve(static_cast<std::size_t>(batch.size(0)));
  for (std::int64_t i = 0; i < batch.size(0); ++i) out.push_back(to_image(batch[i]));
  return out;
}

torch::Tensor bytes_to_batch(std::span<const std::uint8_t> bytes, std::int64_t n, std::int64_t height,
                             std::int64_t width) {
  if (static_cast<std::int64_t>(bytes.size()) != n * height * width * 3) {
    throw InvalidArgument("byte buffer does not match batch shape");
  }
  auto raw = torch::from_blob(const_cast<std::uint8_t*>(bytes.data()), {n, height, width, 3},
                              torch::kUInt8);
  return raw.permute({0, 3, 1, 2}).to(torch::kFloat32).div_(255.0F).contiguous();
}

}  // namespace strokeforge
