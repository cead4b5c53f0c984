#include "strokeforge/nn.hpp"

#include <cmath>
#include <sstream>

#include "strokeforge/error.hpp"

namespace strokeforge::nn {

ConvEncoderImpl::ConvEncoderImpl(std::int64_t in_channels, std::int64_t input_size,
                                 std::vector<std::int64_t> channels) {
  const auto blocks = static_cast<std::int64_t>(channels.size());
  if (blocks == 0 || input_size % (std::int64_t{1} << blocks) != 0) {
    throw InvalidArgument("encoder input size must be divisible by 2^blocks");
  }
  blocks_ = register_module("blocks", torch::nn::ModuleList());
  std::int64_t prev = in_channels;
  for (auto ch : channels) {
    blocks_->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(prev, ch, 4).stride(2).padding(1)));
    prev = ch;
  }
  const auto final_size = input_size >> blocks;
  output_features_ = prev * final_size * final_size;
}

torch::Tensor ConvEncoderImpl::forward(torch::Tensor x) {
  for (const auto& block : *blocks_) {
    x = torch::leaky_relu(block->as<torch::nn::Conv2d>()->forward(x), 0.2);
  }
  return x.flatten(1);
}

std::vector<torch::Tensor> ConvEncoderImpl::forward_features(torch::Tensor x) {
  std::vector<torch::Tensor> out;
  for (const auto& block : *blocks_) {
    x = torch::leaky_relu(block->as<torch::nn::Conv2d>()->forward(x), 0.2);
    out.push_back(x);
  }
  return out;
}

ConvDecoderImpl::ConvDecoderImpl(std::int64_t in_features, std::int64_t output_size,
                                 std::vector<std::int64_t> channels) {
  const auto blocks = static_cast<std::int64_t>(channels.size());
  if (blocks == 0 || output_size % (std::int64_t{1} << blocks) != 0) {
    throw InvalidArgument("decoder output size must be divisible by 2^blocks");
  }
  base_channels_ = channels.front();
  base_size_ = output_size >> blocks;
  project_ = register_module(
      "project", torch::nn::Linear(in_features, base_channels_ * base_size_ * base_size_));
  blocks_ = register_module("blocks", torch::nn::ModuleList());
  for (std::size_t i = 0; i < channels.size(); ++i) {
    const auto out = i + 1 < channels.size() ? channels[i + 1] : 3;
    blocks_->push_back(torch::nn::ConvTranspose2d(
        torch::nn::ConvTranspose2dOptions(channels[i], out, 4).stride(2).padding(1)));
  }
}

torch::Tensor ConvDecoderImpl::forward(torch::Tensor code) {
  auto x = torch::silu(project_->forward(code)).view({-1, base_channels_, base_size_, base_size_});
  const auto n = blocks_->size();
  for (std::size_t i = 0; i < n; ++i) {
    x = blocks_[i]->as<torch::nn::ConvTranspose2d>()->forward(x);
    if (i + 1 < n) x = torch::silu(x);
  }
  return x;
}

torch::nn::Sequential make_mlp(const std::vector<std::int64_t>& widths) {
  torch::nn::Sequential seq;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    seq->push_back(torch::nn::Linear(widths[i], widths[i + 1]));
    if (i + 2 < widths.size()) seq->push_back(torch::nn::SiLU());
  }
  return seq;
}

void copy_state(const torch::nn::Module& from, torch::nn::Module& to) {
  torch::NoGradGuard no_grad;
  const auto src = from.named_parameters(true);
  auto dst = to.named_parameters(true);
  for (const auto& item : src) {
    auto* target = dst.find(item.key());
    if (target == nullptr) throw InvalidArgument("copy_state: missing parameter " + item.key());
    target->copy_(item.value());
  }
  const auto src_buffers = from.named_buffers(true);
  auto dst_buffers = to.named_buffers(true);
  for (const auto& item : src_buffers) {
    auto* target = dst_buffers.find(item.key());
    if (target == nullptr) throw InvalidArgument("copy_state: missing buffer " + item.key());
    target->copy_(item.value());
  }
}

bool same_state(const torch::nn::Module& a, const torch::nn::Module& b) {
  const auto pa = a.named_parameters(true);
  const auto pb = b.named_parameters(true);
  if (pa.size() != pb.size()) return false;
  for (const auto& item : pa) {
    const auto* other = pb.find(item.key());
    if (other == nullptr || !torch::equal(item.value(), *other)) return false;
  }
  return true;
}

void set_requires_grad(torch::nn::Module& module, bool requires_grad) {
  for (auto& p : module.parameters(true)) p.set_requires_grad(requires_grad);
}

void check_finite(const torch::Tensor& loss, const std::string& what, std::int64_t step) {
  const double v = loss.item<double>();
  if (!std::isfinite(v)) {
    std::ostringstream msg;
    msg << what << " became non-finite (" << v << ") at step " << step;
    throw DivergenceError(msg.str());
  }
}

}  // namespace strokeforge::nn
