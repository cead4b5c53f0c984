#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <string>
#include <vector>

namespace strokeforge::nn {

/// Stack of stride-2 4x4 convolutions with leaky ReLU; spatial size halves per block.
class ConvEncoderImpl : public torch::nn::Module {
 public:
  ConvEncoderImpl(std::int64_t in_channels, std::int64_t input_size, std::vector<std::int64_t> channels);

  /// [N, C, S, S] -> [N, output_features()]
  torch::Tensor forward(torch::Tensor x);
  /// Per-block activations, shallowest first.
  std::vector<torch::Tensor> forward_features(torch::Tensor x);

  std::int64_t output_features() const { return output_features_; }

 private:
  torch::nn::ModuleList blocks_;
  std::int64_t output_features_ = 0;
};
TORCH_MODULE(ConvEncoder);

/// Linear projection to a small feature map followed by stride-2 transposed
/// convolutions back to [N, 3, S, S], SiLU in between. forward() returns
/// logits; apply a sigmoid for images.
class ConvDecoderImpl : public torch::nn::Module {
 public:
  ConvDecoderImpl(std::int64_t in_features, std::int64_t output_size, std::vector<std::int64_t> channels);

  torch::Tensor forward(torch::Tensor code);

 private:
  torch::nn::Linear project_{nullptr};
  torch::nn::ModuleList blocks_;
  std::int64_t base_channels_ = 0;
  std::int64_t base_size_ = 0;
};
TORCH_MODULE(ConvDecoder);

/// Fully connected stack; SiLU between layers, none after the last.
torch::nn::Sequential make_mlp(const std::vector<std::int64_t>& widths);

/// Copies parameter and buffer values between two structurally identical modules.
void copy_state(const torch::nn::Module& from, torch::nn::Module& to);

/// Bitwise equality of every parameter and buffer.
bool same_state(const torch::nn::Module& a, const torch::nn::Module& b);

void set_requires_grad(torch::nn::Module& module, bool requires_grad);

/// Fails fast on NaN/inf losses.
void check_finite(const torch::Tensor& loss, const std::string& what, std::int64_t step);

/// WGAN-GP penalty: E[(||grad_x critic(x_hat)||_2 - 1)^2] for x_hat on the
/// segment between real and fake samples.
template <typename CriticFn>
torch::Tensor gradient_penalty(CriticFn&& critic, const torch::Tensor& real, const torch::Tensor& fake) {
  const auto n = real.size(0);
  std::vector<std::int64_t> shape(static_cast<std::size_t>(real.dim()), 1);
  shape[0] = n;
  const auto eps = torch::rand(shape, real.options());
  auto mixed = (eps * real + (1.0 - eps) * fake).detach().requires_grad_(true);
  const auto scores = critic(mixed);
  const auto grads = torch::autograd::grad({scores.sum()}, {mixed}, {}, /*retain_graph=*/true,
                                           /*create_graph=*/true)[0];
  return (grads.reshape({n, -1}).norm(2, 1) - 1.0).pow(2).mean();
}

}  // namespace strokeforge::nn
