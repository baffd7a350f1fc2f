#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "skyfuse/autodiff.hpp"
#include "skyfuse/rng.hpp"

namespace skyfuse {

/// Architecture hyperparameters. The defaults are the reference setup:
/// shared input projection to d_model, sinusoidal positions, a 2-layer
/// encoder with 4 heads and a 1024-wide feed-forward, mean pooling, and a
/// 512-wide classifier head.
struct ModelConfig {
    std::size_t feature_dim = 128;
    std::size_t target_seq_len = 1000;
    std::size_t d_model = 256;
    std::size_t num_heads = 4;
    std::size_t num_layers = 2;
    std::size_t dim_feedforward = 1024;
    double dropout = 0.2;
    std::size_t num_classes = 5;

    void validate() const {
        if (feature_dim == 0 || target_seq_len == 0 || d_model == 0 ||
            num_heads == 0 || dim_feedforward == 0 || num_classes == 0)
            throw ValueError("model config: all extents must be positive");
        if (d_model % num_heads != 0)
            throw ValueError("model config: d_model " + std::to_string(d_model) +
                             " not divisible by num_heads " +
                             std::to_string(num_heads));
        if (d_model % 2 != 0)
            throw ValueError("model config: d_model must be even for the "
                             "sinusoidal position table");
        if (dropout < 0.0 || dropout >= 1.0)
            throw ValueError("model config: dropout must lie in [0, 1)");
    }
};

/// Hidden width of the classifier head (d_model -> 512 -> num_classes).
inline constexpr std::size_t kHeadHidden = 512;

template <typename S>
struct AttentionParams {
    Var<S> q_w, q_b, k_w, k_b, v_w, v_b, out_w, out_b;
};

template <typename S>
struct EncoderLayerParams {
    AttentionParams<S> attn;
    Var<S> norm1_gain, norm1_bias;
    Var<S> ffn_w1, ffn_b1, ffn_w2, ffn_b2;
    Var<S> norm2_gain, norm2_bias;
};

template <typename S>
struct NamedParam {
    std::string name;
    Var<S>* var;
    bool decay;  // weight decay applies to weight matrices only
};

/// Every trainable tensor of the model, plus the fixed positional table.
template <typename S>
struct ParameterSet {
    Var<S> input_proj_w, input_proj_b;
    std::vector<EncoderLayerParams<S>> layers;
    Var<S> final_norm_gain, final_norm_bias;
    Var<S> head_w1, head_b1, head_w2, head_b2;
    Tensor<S> positional;  // (target_seq_len x d_model), not trained

    std::vector<NamedParam<S>> named() {
        std::vector<NamedParam<S>> out;
        out.push_back({"input_proj.weight", &input_proj_w, true});
        out.push_back({"input_proj.bias", &input_proj_b, false});
        for (std::size_t i = 0; i < layers.size(); ++i) {
            auto& l = layers[i];
            const std::string p = "layers." + std::to_string(i) + ".";
            out.push_back({p + "attn.q.weight", &l.attn.q_w, true});
            out.push_back({p + "attn.q.bias", &l.attn.q_b, false});
            out.push_back({p + "attn.k.weight", &l.attn.k_w, true});
            out.push_back({p + "attn.k.bias", &l.attn.k_b, false});
            out.push_back({p + "attn.v.weight", &l.attn.v_w, true});
            out.push_back({p + "attn.v.bias", &l.attn.v_b, false});
            out.push_back({p + "attn.out.weight", &l.attn.out_w, true});
            out.push_back({p + "attn.out.bias", &l.attn.out_b, false});
            out.push_back({p + "norm1.gain", &l.norm1_gain, false});
            out.push_back({p + "norm1.bias", &l.norm1_bias, false});
            out.push_back({p + "ffn.linear1.weight", &l.ffn_w1, true});
            out.push_back({p + "ffn.linear1.bias", &l.ffn_b1, false});
            out.push_back({p + "ffn.linear2.weight", &l.ffn_w2, true});
            out.push_back({p + "ffn.linear2.bias", &l.ffn_b2, false});
            out.push_back({p + "norm2.gain", &l.norm2_gain, false});
            out.push_back({p + "norm2.bias", &l.norm2_bias, false});
        }
        out.push_back({"final_norm.gain", &final_norm_gain, false});
        out.push_back({"final_norm.bias", &final_norm_bias, false});
        out.push_back({"head.linear1.weight", &head_w1, true});
        out.push_back({"head.linear1.bias", &head_b1, false});
        out.push_back({"head.linear2.weight", &head_w2, true});
        out.push_back({"head.linear2.bias", &head_b2, false});
        return out;
    }

    std::size_t total_elements() {
        std::size_t n = 0;
        for (const auto& p : named()) n += p.var->size();
        return n;
    }

    /// Deep copy of parameter values as fresh trainable leaves.
    ParameterSet clone() {
        ParameterSet out;
        out.positional = positional;
        out.layers.resize(layers.size());
        auto src = named();
        auto dst = out.named();
        for (std::size_t i = 0; i < src.size(); ++i)
            *dst[i].var = Var<S>(Tensor<S>(src[i].var->shape(),
                                           src[i].var->value().values()),
                                 /*requires_grad=*/true);
        return out;
    }

    template <typename T>
    ParameterSet<T> cast() {
        ParameterSet<T> out;
        out.positional = positional.template cast<T>();
        out.layers.resize(layers.size());
        auto src = named();
        auto dst = out.named();
        for (std::size_t i = 0; i < src.size(); ++i)
            *dst[i].var = Var<T>(src[i].var->value().template cast<T>(),
                                 /*requires_grad=*/true);
        return out;
    }
};

/// Standard sinusoid table: PE[p, 2i] = sin(p / 10000^(2i/d)),
/// PE[p, 2i+1] = cos of the same angle.
template <typename S>
Tensor<S> positional_encoding(std::size_t max_len, std::size_t d_model) {
    if (max_len == 0 || d_model == 0)
        throw ValueError("positional encoding: extents must be positive");
    if (d_model % 2 != 0)
        throw ValueError("positional encoding: d_model must be even, got " +
                         std::to_string(d_model));
    Tensor<S> pe({max_len, d_model});
    for (std::size_t p = 0; p < max_len; ++p) {
        for (std::size_t i = 0; i < d_model / 2; ++i) {
            const double angle =
                static_cast<double>(p) /
                std::pow(10000.0, 2.0 * static_cast<double>(i) /
                                      static_cast<double>(d_model));
            pe(p, 2 * i) = static_cast<S>(std::sin(angle));
            pe(p, 2 * i + 1) = static_cast<S>(std::cos(angle));
        }
    }
    return pe;
}

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases, unit
/// layer-norm gains. Deterministic per seed.
template <typename S>
ParameterSet<S> init_params(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(derive_seed(seed, "init"));

    auto weight = [&](std::size_t fan_in, std::size_t fan_out) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        Tensor<S> w({fan_in, fan_out});
        for (auto& v : w.values()) v = static_cast<S>(rng.uniform(-bound, bound));
        return Var<S>(std::move(w), true);
    };
    auto zeros = [&](std::size_t n) { return Var<S>(Tensor<S>({n}), true); };
    auto ones = [&](std::size_t n) {
        return Var<S>(Tensor<S>::full({n}, S(1)), true);
    };

    ParameterSet<S> p;
    p.input_proj_w = weight(cfg.feature_dim, cfg.d_model);
    p.input_proj_b = zeros(cfg.d_model);
    p.layers.resize(cfg.num_layers);
    for (auto& l : p.layers) {
        l.attn.q_w = weight(cfg.d_model, cfg.d_model);
        l.attn.q_b = zeros(cfg.d_model);
        l.attn.k_w = weight(cfg.d_model, cfg.d_model);
        l.attn.k_b = zeros(cfg.d_model);
        l.attn.v_w = weight(cfg.d_model, cfg.d_model);
        l.attn.v_b = zeros(cfg.d_model);
        l.attn.out_w = weight(cfg.d_model, cfg.d_model);
        l.attn.out_b = zeros(cfg.d_model);
        l.norm1_gain = ones(cfg.d_model);
        l.norm1_bias = zeros(cfg.d_model);
        l.ffn_w1 = weight(cfg.d_model, cfg.dim_feedforward);
        l.ffn_b1 = zeros(cfg.dim_feedforward);
        l.ffn_w2 = weight(cfg.dim_feedforward, cfg.d_model);
        l.ffn_b2 = zeros(cfg.d_model);
        l.norm2_gain = ones(cfg.d_model);
        l.norm2_bias = zeros(cfg.d_model);
    }
    p.final_norm_gain = ones(cfg.d_model);
    p.final_norm_bias = zeros(cfg.d_model);
    p.head_w1 = weight(cfg.d_model, kHeadHidden);
    p.head_b1 = zeros(kHeadHidden);
    p.head_w2 = weight(kHeadHidden, cfg.num_classes);
    p.head_b2 = zeros(cfg.num_classes);
    p.positional = positional_encoding<S>(cfg.target_seq_len, cfg.d_model);
    return p;
}

namespace detail {

template <typename S>
Var<S> linear(const Var<S>& x, const Var<S>& w, const Var<S>& b) {
    return add(matmul(x, w), b);
}

}  // namespace detail

/// Scaled dot-product attention over num_heads subspaces of width
/// d_model/num_heads, heads concatenated and output-projected. No mask:
/// zero-padded time steps participate like any other.
template <typename S>
Var<S> multi_head_attention(const Var<S>& x, const AttentionParams<S>& p,
                            std::size_t num_heads) {
    const Shape& sx = x.shape();
    if (sx.size() != 3)
        throw ShapeError("attention: input must be (batch x seq x d_model), got " +
                         shape_str(sx));
    const std::size_t batch = sx[0], seq = sx[1], d_model = sx[2];
    if (d_model % num_heads != 0)
        throw ShapeError("attention: d_model " + std::to_string(d_model) +
                         " not divisible by " + std::to_string(num_heads) + " heads");
    const std::size_t d_head = d_model / num_heads;

    auto split_heads = [&](const Var<S>& t) {
        // (B, L, D) -> (B, H, L, d_head)
        return transpose(reshape(t, {batch, seq, num_heads, d_head}), 1, 2);
    };
    const Var<S> q = split_heads(detail::linear(x, p.q_w, p.q_b));
    const Var<S> k = split_heads(detail::linear(x, p.k_w, p.k_b));
    const Var<S> v = split_heads(detail::linear(x, p.v_w, p.v_b));

    const S inv_sqrt_dh = S(1.0 / std::sqrt(static_cast<double>(d_head)));
    const Var<S> scores = scale(matmul(q, transpose(k, 2, 3)), inv_sqrt_dh);
    const Var<S> weights = softmax(scores, 3);
    const Var<S> context = matmul(weights, v);  // (B, H, L, d_head)

    const Var<S> merged =
        reshape(transpose(context, 1, 2), {batch, seq, d_model});
    return detail::linear(merged, p.out_w, p.out_b);
}

/// Post-norm residual wiring:
///   y = LN(x + Drop(MHA(x))); out = LN(y + Drop(FFN(y)))
/// with FFN(y) = W2 . Drop(GELU(W1 y + b1)) + b2.
template <typename S>
Var<S> encoder_layer(const Var<S>& x, const EncoderLayerParams<S>& p,
                     const ModelConfig& cfg, bool training, Rng& rng) {
    const Var<S> attn = multi_head_attention(x, p.attn, cfg.num_heads);
    const Var<S> y = layer_norm(add(x, dropout(attn, cfg.dropout, training, rng)),
                                p.norm1_gain, p.norm1_bias);

    const Var<S> hidden =
        dropout(gelu(detail::linear(y, p.ffn_w1, p.ffn_b1)), cfg.dropout,
                training, rng);
    const Var<S> ffn = detail::linear(hidden, p.ffn_w2, p.ffn_b2);
    return layer_norm(add(y, dropout(ffn, cfg.dropout, training, rng)),
                      p.norm2_gain, p.norm2_bias);
}

/// Full classifier: project -> add positions -> encoder stack -> mean pool
/// over time -> layer norm -> (linear, GELU, dropout, linear). Returns raw
/// logits (batch x num_classes).
template <typename S>
Var<S> forward(const Var<S>& x, const ParameterSet<S>& params,
               const ModelConfig& cfg, bool training, Rng& rng) {
    const Shape& sx = x.shape();
    if (sx.size() != 3 || sx[1] != cfg.target_seq_len || sx[2] != cfg.feature_dim)
        throw ShapeError("forward: expected (batch x " +
                         std::to_string(cfg.target_seq_len) + " x " +
                         std::to_string(cfg.feature_dim) + "), got " +
                         shape_str(sx));

    Var<S> h = detail::linear(x, params.input_proj_w, params.input_proj_b);
    h = add(h, Var<S>(Tensor<S>(params.positional.shape(),
                                params.positional.values())));
    for (const auto& layer : params.layers)
        h = encoder_layer(h, layer, cfg, training, rng);

    const Var<S> pooled = mean_axis(h, 1);
    const Var<S> normed =
        layer_norm(pooled, params.final_norm_gain, params.final_norm_bias);

    Var<S> z = gelu(detail::linear(normed, params.head_w1, params.head_b1));
    z = dropout(z, cfg.dropout, training, rng);
    return detail::linear(z, params.head_w2, params.head_b2);
}

/// Closed-form trainable-parameter count; must equal the instantiated total.
inline std::size_t param_count(const ModelConfig& cfg) {
    const std::size_t d = cfg.d_model;
    const std::size_t proj = cfg.feature_dim * d + d;
    const std::size_t attn = 4 * (d * d + d);
    const std::size_t ffn = d * cfg.dim_feedforward + cfg.dim_feedforward +
                            cfg.dim_feedforward * d + d;
    const std::size_t norms = 2 * (2 * d);
    const std::size_t per_layer = attn + ffn + norms;
    const std::size_t final_norm = 2 * d;
    const std::size_t head = d * kHeadHidden + kHeadHidden +
                             kHeadHidden * cfg.num_classes + cfg.num_classes;
    return proj + cfg.num_layers * per_layer + final_norm + head;
}

}  // namespace skyfuse
