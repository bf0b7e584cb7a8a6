#pragma once

#include <cstdint>
#include <vector>

#include <torch/nn/module.h>
#include <torch/nn/modules/container/modulelist.h>
#include <torch/nn/modules/container/sequential.h>
#include <torch/nn/modules/conv.h>
#include <torch/nn/modules/linear.h>
#include <torch/nn/modules/normalization.h>
#include <torch/nn/pimpl.h>

#include "cxrssl/window.hpp"

namespace cxrssl::backbone {

/// Geometry of one hybrid stage.
struct StageSpec {
    std::int64_t in_dim = 3;        ///< channels entering the reduction cell
    std::int64_t dim = 16;          ///< token width of the stage
    std::int64_t heads = 1;
    std::int64_t window = 4;
    std::int64_t ratio = 4;         ///< spatial reduction of the reduction cell (power of two)
    double mlp_ratio = 4.0;
    std::int64_t stage_index = 0;   ///< selects the pyramid kernel and dilation set
};

/// Multi-head self-attention restricted to non-overlapping windows of the token grid, with
/// a learned relative position bias per head. Grids that are not a multiple of the window
/// are zero-padded; padded tokens are masked out as keys and cropped from the output.
class WindowAttentionImpl : public torch::nn::Module {
public:
    WindowAttentionImpl(std::int64_t dim, std::int64_t heads, std::int64_t window);

    torch::Tensor forward(const torch::Tensor& tokens, std::int64_t grid_h, std::int64_t grid_w);

    std::int64_t heads() const noexcept { return heads_; }
    std::int64_t window() const noexcept { return window_; }

    torch::nn::Linear qkv{nullptr};
    torch::nn::Linear proj{nullptr};
    torch::Tensor relative_position_bias;  ///< ((2w-1)^2, heads)

private:
    torch::Tensor bias_for(std::int64_t window) const;

    std::int64_t dim_;
    std::int64_t heads_;
    std::int64_t window_;
};
TORCH_MODULE(WindowAttention);

/// Position-wise two-layer MLP with GELU.
class FeedForwardImpl : public torch::nn::Module {
public:
    FeedForwardImpl(std::int64_t dim, std::int64_t hidden);
    torch::Tensor forward(const torch::Tensor& tokens);

    torch::nn::Linear fc1{nullptr};
    torch::nn::Linear fc2{nullptr};
};
TORCH_MODULE(FeedForward);

/// Pyramid reduction: parallel dilated convolutions sharing the stage stride, concatenated,
/// passed through GELU and fused back to the stage width. Stage 0 uses 7x7 kernels with
/// dilations {1,2,3,4}, stage 1 3x3 kernels with {1,2,3}, later stages 3x3 with {1,2}.
class PyramidReductionImpl : public torch::nn::Module {
public:
    explicit PyramidReductionImpl(const StageSpec& spec);
    TokenGrid forward(const torch::Tensor& x);

    torch::nn::ModuleList branches{nullptr};
    torch::nn::Linear fuse{nullptr};
    std::vector<std::int64_t> dilations;
    std::int64_t kernel = 3;
};
TORCH_MODULE(PyramidReduction);

/// Parallel convolutional path. With ratio r > 1 it is a stride-2 3x3 convolution
/// followed by log2(r) - 1 depthwise stride-2 3x3 convolutions; with r == 1 a depthwise
/// 3x3 convolution. Both end in GELU and a pointwise convolution.
class ParallelConvImpl : public torch::nn::Module {
public:
    ParallelConvImpl(std::int64_t in_dim, std::int64_t dim, std::int64_t ratio);
    torch::Tensor forward(const torch::Tensor& x);

    torch::nn::Sequential body{nullptr};
};
TORCH_MODULE(ParallelConv);

/// Downsampling cell: out = y + FFN(LN(y)), y = PRM(x) + WindowAttn(LN(PRM(x))) + PCM(x).
class ReductionCellImpl : public torch::nn::Module {
public:
    explicit ReductionCellImpl(const StageSpec& spec);

    /// x is (B, C, H, W) with H and W divisible by the ratio.
    TokenGrid forward(const torch::Tensor& x);
    TokenGrid forward_grid(const TokenGrid& grid) { return forward(grid.to_nchw()); }

    const StageSpec& spec() const noexcept { return spec_; }

    PyramidReduction prm{nullptr};
    torch::nn::LayerNorm norm1{nullptr};
    WindowAttention attn{nullptr};
    ParallelConv pcm{nullptr};
    torch::nn::LayerNorm norm2{nullptr};
    FeedForward ffn{nullptr};

private:
    StageSpec spec_;
};
TORCH_MODULE(ReductionCell);

/// Resolution-preserving cell: n = LN(x); y = x + WindowAttn(n) + PCM(n); out = y + FFN(LN(y)).
class NormalCellImpl : public torch::nn::Module {
public:
    explicit NormalCellImpl(const StageSpec& spec);
    TokenGrid forward(const TokenGrid& grid);

    torch::nn::LayerNorm norm1{nullptr};
    WindowAttention attn{nullptr};
    ParallelConv pcm{nullptr};
    torch::nn::LayerNorm norm2{nullptr};
    FeedForward ffn{nullptr};

private:
    StageSpec spec_;
};
TORCH_MODULE(NormalCell);

/// Initialization shared by the transformer-style blocks: truncated-normal(0.02) linear
/// weights, zero biases, unit/zero layer norms, zero convolution biases.
void init_transformer_weights(torch::nn::Module& module);

}  // namespace cxrssl::backbone
