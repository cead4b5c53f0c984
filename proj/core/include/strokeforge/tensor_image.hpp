#pragma once

#include <torch/torch.h>

#include <span>
#include <vector>

#include "strokeforge/image.hpp"

namespace strokeforge {

/// [3,H,W] float tensor from an Image.
torch::Tensor to_tensor(const Image& image);

/// Inverse of to_tensor; accepts [3,H,W] or [1,3,H,W]. Values are clamped to [0,1].
Image to_image(const torch::Tensor& tensor);

/// [N,3,H,W] from a list of equally sized images.
torch::Tensor stack_images(std::span<const Image> images);
std::vector<Image> unstack_images(const torch::Tensor& batch);

/// [N,3,H,W] float batch from HWC uint8 records laid out back to back.
torch::Tensor bytes_to_batch(std::span<const std::uint8_t> bytes, std::int64_t n, std::int64_t height,
                             std::int64_t width);

}  // namespace strokeforge
