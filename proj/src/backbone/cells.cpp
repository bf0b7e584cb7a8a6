#include "cxrssl/cells.hpp"

#include <cmath>
#include <limits>
#include <string>

#include <torch/torch.h>

#include "cxrssl/errors.hpp"

namespace cxrssl::backbone {

namespace {

void clamped_normal_(torch::Tensor& t, double std) {
    torch::NoGradGuard guard;
    t.normal_(0.0, std).clamp_(-2.0 * std, 2.0 * std);
}

bool is_power_of_two(std::int64_t v) {
    return v > 0 && (v & (v - 1)) == 0;
}

}  // namespace

void init_transformer_weights(torch::nn::Module& module) {
    torch::NoGradGuard guard;
    for (auto& m : module.modules(/*include_self=*/false)) {
        if (auto* linear = m->as<torch::nn::Linear>()) {
            clamped_normal_(linear->weight, 0.02);
            if (linear->bias.defined()) {
                linear->bias.zero_();
            }
        } else if (auto* norm = m->as<torch::nn::LayerNorm>()) {
            norm->weight.fill_(1.0);
            norm->bias.zero_();
        } else if (auto* conv = m->as<torch::nn::Conv2d>()) {
            if (conv->bias.defined()) {
                conv->bias.zero_();
            }
        }
    }
}

// ---------------------------------------------------------------------------------------------
// WindowAttention

WindowAttentionImpl::WindowAttentionImpl(std::int64_t dim, std::int64_t heads, std::int64_t window)
    : dim_(dim), heads_(heads), window_(window) {
    if (heads <= 0 || dim % heads != 0) {
        throw ConfigError("attention: head count " + std::to_string(heads) + " does not divide dim " +
                          std::to_string(dim));
    }
    if (window <= 0) {
        throw ConfigError("attention: window must be positive");
    }
    qkv = register_module("qkv", torch::nn::Linear(dim, 3 * dim));
    proj = register_module("proj", torch::nn::Linear(dim, dim));
    relative_position_bias =
        register_parameter("relative_position_bias", torch::zeros({(2 * window - 1) * (2 * window - 1), heads}));
    clamped_normal_(relative_position_bias, 0.02);
}

torch::Tensor WindowAttentionImpl::bias_for(std::int64_t ws) const {
    const std::int64_t tokens = ws * ws;
    const std::int64_t side = 2 * window_ - 1;
    std::vector<std::int64_t> index(static_cast<std::size_t>(tokens * tokens));
    for (std::int64_t a = 0; a < tokens; ++a) {
        for (std::int64_t b = 0; b < tokens; ++b) {
            const std::int64_t dy = a / ws - b / ws + window_ - 1;
            const std::int64_t dx = a % ws - b % ws + window_ - 1;
            index[static_cast<std::size_t>(a * tokens + b)] = dy * side + dx;
        }
    }
    auto idx = torch::tensor(index, torch::kInt64);
    return relative_position_bias.index_select(0, idx).view({tokens, tokens, heads_}).permute({2, 0, 1});
}

torch::Tensor WindowAttentionImpl::forward(const torch::Tensor& tokens, std::int64_t grid_h, std::int64_t grid_w) {
    if (tokens.dim() != 3 || tokens.size(1) != grid_h * grid_w || tokens.size(2) != dim_) {
        throw ShapeError("window attention: expected (B, " + std::to_string(grid_h * grid_w) + ", " +
                         std::to_string(dim_) + ") tokens");
    }
    const auto batch = tokens.size(0);
    const auto ws = effective_window(window_, grid_h, grid_w);
    const auto padded = pad_to_window(tokens.reshape({batch, grid_h, grid_w, dim_}), ws);
    const auto hp = padded.size(1);
    const auto wp = padded.size(2);

    auto blocks = window_partition(padded, ws);
    const auto nb = blocks.size(0);
    const auto t = ws * ws;
    const auto hd = dim_ / heads_;

    auto qkv_out = qkv(blocks).reshape({nb, t, 3, heads_, hd}).permute({2, 0, 3, 1, 4});
    auto q = qkv_out[0] * (1.0 / std::sqrt(static_cast<double>(hd)));
    auto k = qkv_out[1];
    auto v = qkv_out[2];

    auto attn = q.matmul(k.transpose(-2, -1)) + bias_for(ws).unsqueeze(0);
    if (hp != grid_h || wp != grid_w) {
        auto pad_mask = torch::zeros({1, hp, wp, 1}, torch::kBool);
        pad_mask.slice(1, grid_h).fill_(true);
        pad_mask.slice(2, grid_w).fill_(true);
        const auto windows = nb / batch;
        auto key_mask = window_partition(pad_mask, ws).view({1, windows, 1, 1, t});
        attn = attn.view({batch, windows, heads_, t, t})
                   .masked_fill(key_mask, -std::numeric_limits<double>::infinity())
                   .view({nb, heads_, t, t});
    }
    attn = torch::softmax(attn, -1);

    auto out = proj(attn.matmul(v).transpose(1, 2).reshape({nb, t, dim_}));
    out = window_reverse(out, ws, hp, wp);
    return out.slice(1, 0, grid_h).slice(2, 0, grid_w).reshape({batch, grid_h * grid_w, dim_});
}

// ---------------------------------------------------------------------------------------------
// FeedForward

FeedForwardImpl::FeedForwardImpl(std::int64_t dim, std::int64_t hidden) {
    fc1 = register_module("fc1", torch::nn::Linear(dim, hidden));
    fc2 = register_module("fc2", torch::nn::Linear(hidden, dim));
}

torch::Tensor FeedForwardImpl::forward(const torch::Tensor& tokens) {
    return fc2(torch::gelu(fc1(tokens)));
}

// ---------------------------------------------------------------------------------------------
// PyramidReduction

PyramidReductionImpl::PyramidReductionImpl(const StageSpec& spec) {
    if (spec.stage_index == 0) {
        kernel = 7;
        dilations = {1, 2, 3, 4};
    } else if (spec.stage_index == 1) {
        kernel = 3;
        dilations = {1, 2, 3};
    } else {
        kernel = 3;
        dilations = {1, 2};
    }
    branches = register_module("branches", torch::nn::ModuleList());
    for (const auto d : dilations) {
        branches->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(spec.in_dim, spec.dim, kernel)
                                                  .stride(spec.ratio)
                                                  .padding(d * (kernel - 1) / 2)
                                                  .dilation(d)));
    }
    fuse = register_module("fuse", torch::nn::Linear(spec.dim * static_cast<std::int64_t>(dilations.size()), spec.dim));
}

TokenGrid PyramidReductionImpl::forward(const torch::Tensor& x) {
    std::vector<torch::Tensor> outs;
    outs.reserve(branches->size());
    for (const auto& branch : *branches) {
        outs.push_back(branch->as<torch::nn::Conv2d>()->forward(x));
    }
    auto grid = TokenGrid::from_nchw(torch::gelu(torch::cat(outs, 1)));
    grid.tokens = fuse(grid.tokens);
    return grid;
}

// ---------------------------------------------------------------------------------------------
// ParallelConv

ParallelConvImpl::ParallelConvImpl(std::int64_t in_dim, std::int64_t dim, std::int64_t ratio) {
    if (!is_power_of_two(ratio)) {
        throw ConfigError("parallel conv: ratio must be a power of two");
    }
    body = register_module("body", torch::nn::Sequential());
    if (ratio == 1) {
        if (in_dim != dim) {
            throw ConfigError("parallel conv: ratio 1 requires in_dim == dim");
        }
        body->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(dim, dim, 3).padding(1).groups(dim)));
    } else {
        body->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(in_dim, dim, 3).stride(2).padding(1)));
        for (std::int64_t r = ratio / 2; r > 1; r /= 2) {
            body->push_back(torch::nn::GELU());
            body->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(dim, dim, 3).stride(2).padding(1).groups(dim)));
        }
    }
    body->push_back(torch::nn::GELU());
    body->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(dim, dim, 1)));
}

torch::Tensor ParallelConvImpl::forward(const torch::Tensor& x) {
    return body->forward(x);
}

// ---------------------------------------------------------------------------------------------
// Cells

namespace {

std::int64_t hidden_width(const StageSpec& spec) {
    return static_cast<std::int64_t>(std::llround(static_cast<double>(spec.dim) * spec.mlp_ratio));
}

void check_spec(const StageSpec& spec) {
    if (spec.heads <= 0 || spec.dim % spec.heads != 0) {
        throw ConfigError("stage dim " + std::to_string(spec.dim) + " not divisible by " + std::to_string(spec.heads) +
                          " heads");
    }
}

}  // namespace

ReductionCellImpl::ReductionCellImpl(const StageSpec& spec) : spec_(spec) {
    check_spec(spec);
    if (!is_power_of_two(spec.ratio) || spec.ratio < 2) {
        throw ConfigError("reduction ratio must be a power of two >= 2");
    }
    prm = register_module("prm", PyramidReduction(spec));
    norm1 = register_module("norm1", torch::nn::LayerNorm(torch::nn::LayerNormOptions({spec.dim})));
    attn = register_module("attn", WindowAttention(spec.dim, spec.heads, spec.window));
    pcm = register_module("pcm", ParallelConv(spec.in_dim, spec.dim, spec.ratio));
    norm2 = register_module("norm2", torch::nn::LayerNorm(torch::nn::LayerNormOptions({spec.dim})));
    ffn = register_module("ffn", FeedForward(spec.dim, hidden_width(spec)));
    init_transformer_weights(*this);
}

TokenGrid ReductionCellImpl::forward(const torch::Tensor& x) {
    if (x.dim() != 4 || x.size(1) != spec_.in_dim) {
        throw ShapeError("reduction cell: expected (B, " + std::to_string(spec_.in_dim) + ", H, W) input");
    }
    if (x.size(2) % spec_.ratio != 0 || x.size(3) % spec_.ratio != 0) {
        throw ShapeError("reduction cell: grid " + std::to_string(x.size(2)) + "x" + std::to_string(x.size(3)) +
                         " not divisible by ratio " + std::to_string(spec_.ratio));
    }
    TokenGrid t = prm(x);
    auto local = TokenGrid::from_nchw(pcm(x)).tokens;
    auto y = t.tokens + attn(norm1(t.tokens), t.grid_h, t.grid_w) + local;
    y = y + ffn(norm2(y));
    return {y, t.grid_h, t.grid_w};
}

NormalCellImpl::NormalCellImpl(const StageSpec& spec) : spec_(spec) {
    check_spec(spec);
    norm1 = register_module("norm1", torch::nn::LayerNorm(torch::nn::LayerNormOptions({spec.dim})));
    attn = register_module("attn", WindowAttention(spec.dim, spec.heads, spec.window));
    pcm = register_module("pcm", ParallelConv(spec.dim, spec.dim, 1));
    norm2 = register_module("norm2", torch::nn::LayerNorm(torch::nn::LayerNormOptions({spec.dim})));
    ffn = register_module("ffn", FeedForward(spec.dim, hidden_width(spec)));
    init_transformer_weights(*this);
}

TokenGrid NormalCellImpl::forward(const TokenGrid& grid) {
    grid.check();
    if (grid.dim() != spec_.dim) {
        throw ShapeError("normal cell: token dim " + std::to_string(grid.dim()) + " != stage dim " +
                         std::to_string(spec_.dim));
    }
    auto n = norm1(grid.tokens);
    auto local = TokenGrid::from_nchw(pcm(TokenGrid{n, grid.grid_h, grid.grid_w}.to_nchw())).tokens;
    auto y = grid.tokens + attn(n, grid.grid_h, grid.grid_w) + local;
    y = y + ffn(norm2(y));
    return {y, grid.grid_h, grid.grid_w};
}

}  // namespace cxrssl::backbone
