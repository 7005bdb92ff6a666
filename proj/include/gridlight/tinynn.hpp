#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gridlight/common.hpp"

namespace gridlight {

enum class Activation { Relu, Tanh };
enum class OutputHead { Softmax, Linear };

inline std::string to_string(Activation a) { return a == Activation::Relu ? "relu" : "tanh"; }
inline Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::Relu;
    if (s == "tanh") return Activation::Tanh;
    throw std::invalid_argument("unknown activation '" + s + "'");
}

struct MlpSpec {
    int input_width = 0;
    std::vector<int> hidden;
    Activation activation = Activation::Relu;
    int output_width = 0;
    OutputHead head = OutputHead::Linear;

    bool operator==(const MlpSpec&) const = default;

    std::vector<int> layer_widths() const {
        std::vector<int> w{input_width};
        w.insert(w.end(), hidden.begin(), hidden.end());
        w.push_back(output_width);
        return w;
    }
};

struct LayerTensor {
    int in = 0;
    int out = 0;
    std::vector<double> w;  // row-major, out x in
    std::vector<double> b;

    bool operator==(const LayerTensor&) const = default;
};

using GradientSet = std::vector<LayerTensor>;

struct MlpParams {
    MlpSpec spec;
    std::vector<LayerTensor> layers;

    bool operator==(const MlpParams&) const = default;
};

inline long param_count(const MlpParams& p) {
    long n = 0;
    for (const auto& l : p.layers) n += static_cast<long>(l.w.size() + l.b.size());
    return n;
}

inline GradientSet zeros_like(const MlpParams& p) {
    GradientSet g;
    g.reserve(p.layers.size());
    for (const auto& l : p.layers) {
        LayerTensor t;
        t.in = l.in;
        t.out = l.out;
        t.w.assign(l.w.size(), 0.0);
        t.b.assign(l.b.size(), 0.0);
        g.push_back(std::move(t));
    }
    return g;
}

// Glorot-uniform weights, zero bias.
inline MlpParams init_mlp(const MlpSpec& spec, std::uint64_t seed) {
    if (spec.input_width < 1 || spec.output_width < 1) throw std::invalid_argument("init_mlp: widths must be >= 1");
    for (int h : spec.hidden) {
        if (h < 1) throw std::invalid_argument("init_mlp: hidden widths must be >= 1");
    }
    MlpParams p;
    p.spec = spec;
    Rng rng(seed);
    const auto widths = spec.layer_widths();
    for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
        LayerTensor l;
        l.in = widths[k];
        l.out = widths[k + 1];
        const double bound = std::sqrt(6.0 / static_cast<double>(l.in + l.out));
        l.w.resize(static_cast<std::size_t>(l.in) * static_cast<std::size_t>(l.out));
        for (double& x : l.w) x = rng.uniform(-bound, bound);
        l.b.assign(static_cast<std::size_t>(l.out), 0.0);
        p.layers.push_back(std::move(l));
    }
    return p;
}

struct ForwardCache {
    std::vector<std::vector<double>> inputs;  // input vector fed into each layer
    std::vector<std::vector<double>> pre;     // pre-activation output of each layer
};

namespace detail {

inline void affine(const LayerTensor& l, const std::vector<double>& x, std::vector<double>& y) {
    y.assign(static_cast<std::size_t>(l.out), 0.0);
    for (int o = 0; o < l.out; ++o) {
        const double* row = l.w.data() + static_cast<std::size_t>(o) * static_cast<std::size_t>(l.in);
        double acc = l.b[static_cast<std::size_t>(o)];
        for (int i = 0; i < l.in; ++i) acc += row[i] * x[static_cast<std::size_t>(i)];
        y[static_cast<std::size_t>(o)] = acc;
    }
}

inline double activate(double x, Activation a) { return a == Activation::Relu ? (x > 0.0 ? x : 0.0) : std::tanh(x); }

inline double activate_grad(double pre, Activation a) {
    if (a == Activation::Relu) return pre > 0.0 ? 1.0 : 0.0;
    const double t = std::tanh(pre);
    return 1.0 - t * t;
}

}  // namespace detail

// Runs the linear stack; the returned vector is the output-head input (logits
// for softmax actors, the value vector for linear critics).
inline std::vector<double> mlp_forward(const MlpParams& p, const std::vector<double>& x, ForwardCache* cache = nullptr) {
    if (static_cast<int>(x.size()) != p.spec.input_width) {
        throw std::invalid_argument("mlp_forward: input width " + std::to_string(x.size()) + " != spec " +
                                    std::to_string(p.spec.input_width));
    }
    if (cache) {
        cache->inputs.clear();
        cache->pre.clear();
    }
    std::vector<double> cur = x;
    for (std::size_t k = 0; k < p.layers.size(); ++k) {
        std::vector<double> pre;
        detail::affine(p.layers[k], cur, pre);
        if (cache) {
            cache->inputs.push_back(cur);
            cache->pre.push_back(pre);
        }
        if (k + 1 < p.layers.size()) {
            for (double& v : pre) v = detail::activate(v, p.spec.activation);
        }
        cur = std::move(pre);
    }
    return cur;
}

inline std::vector<double> softmax(std::vector<double> logits) {
    const double m = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double& v : logits) {
        v = std::exp(v - m);
        sum += v;
    }
    for (double& v : logits) v /= sum;
    return logits;
}

inline std::vector<double> actor_forward(const MlpParams& p, const std::vector<double>& z_aug) {
    if (p.spec.head != OutputHead::Softmax) throw std::invalid_argument("actor_forward: spec head must be softmax");
    return softmax(mlp_forward(p, z_aug));
}

// Q over own actions, conditioned on the augmented observation and one-hot
// neighbor actions. Pass an empty action encoding for plain value critics.
inline std::vector<double> critic_forward(const MlpParams& p, const std::vector<double>& z_aug,
                                          const std::vector<double>& neighbor_actions_onehot) {
    std::vector<double> input;
    input.reserve(z_aug.size() + neighbor_actions_onehot.size());
    input.insert(input.end(), z_aug.begin(), z_aug.end());
    input.insert(input.end(), neighbor_actions_onehot.begin(), neighbor_actions_onehot.end());
    return mlp_forward(p, input);
}

// Reverse-mode pass; adds this sample's gradient into `accum`. `d_out` is the
// loss gradient at the linear output (after-head gradients must be folded in
// by the caller). Returns nothing; faults on non-finite intermediates.
inline void mlp_backward(const MlpParams& p, const ForwardCache& cache, const std::vector<double>& d_out,
                         GradientSet& accum) {
    if (cache.inputs.size() != p.layers.size()) throw std::invalid_argument("mlp_backward: stale forward cache");
    if (static_cast<int>(d_out.size()) != p.spec.output_width) {
        throw std::invalid_argument("mlp_backward: output gradient width mismatch");
    }
    std::vector<double> g = d_out;
    for (int k = static_cast<int>(p.layers.size()) - 1; k >= 0; --k) {
        const LayerTensor& l = p.layers[static_cast<std::size_t>(k)];
        LayerTensor& gl = accum[static_cast<std::size_t>(k)];
        const std::vector<double>& input = cache.inputs[static_cast<std::size_t>(k)];
        for (int o = 0; o < l.out; ++o) {
            const double go = g[static_cast<std::size_t>(o)];
            if (!std::isfinite(go)) {
                throw std::runtime_error("mlp_backward: non-finite gradient at layer " + std::to_string(k));
            }
            gl.b[static_cast<std::size_t>(o)] += go;
            double* grow = gl.w.data() + static_cast<std::size_t>(o) * static_cast<std::size_t>(l.in);
            for (int i = 0; i < l.in; ++i) grow[i] += go * input[static_cast<std::size_t>(i)];
        }
        if (k == 0) break;
        std::vector<double> gx(static_cast<std::size_t>(l.in), 0.0);
        for (int o = 0; o < l.out; ++o) {
            const double go = g[static_cast<std::size_t>(o)];
            const double* row = l.w.data() + static_cast<std::size_t>(o) * static_cast<std::size_t>(l.in);
            for (int i = 0; i < l.in; ++i) gx[static_cast<std::size_t>(i)] += row[i] * go;
        }
        const std::vector<double>& pre_prev = cache.pre[static_cast<std::size_t>(k - 1)];
        for (int i = 0; i < l.in; ++i) {
            gx[static_cast<std::size_t>(i)] *=
                detail::activate_grad(pre_prev[static_cast<std::size_t>(i)], p.spec.activation);
        }
        g = std::move(gx);
    }
}

inline double gradient_norm(const GradientSet& g) {
    double sq = 0.0;
    for (const auto& l : g) {
        for (double v : l.w) sq += v * v;
        for (double v : l.b) sq += v * v;
    }
    return std::sqrt(sq);
}

inline void scale_gradients(GradientSet& g, double factor) {
    for (auto& l : g) {
        for (double& v : l.w) v *= factor;
        for (double& v : l.b) v *= factor;
    }
}

inline void add_gradients(GradientSet& into, const GradientSet& from) {
    for (std::size_t k = 0; k < into.size(); ++k) {
        for (std::size_t i = 0; i < into[k].w.size(); ++i) into[k].w[i] += from[k].w[i];
        for (std::size_t i = 0; i < into[k].b.size(); ++i) into[k].b[i] += from[k].b[i];
    }
}

// Scales the whole set down to the threshold when its global norm exceeds it.
inline void clip_gradients(GradientSet& g, double clip_norm) {
    if (clip_norm <= 0.0) return;
    const double n = gradient_norm(g);
    if (n > clip_norm) scale_gradients(g, clip_norm / n);
}

struct OptimizerHyper {
    double lr = 1e-4;
    double decay = 0.99;
    double epsilon = 1e-5;
    double clip_norm = 40.0;

    bool operator==(const OptimizerHyper&) const = default;
};

struct RmsPropState {
    GradientSet cache;  // running mean of squared gradients, parameter shapes

    static RmsPropState for_params(const MlpParams& p) { return {zeros_like(p)}; }
};

inline void check_shapes(const MlpParams& p, const GradientSet& g, const char* what) {
    if (g.size() != p.layers.size()) throw std::invalid_argument(std::string(what) + ": layer count mismatch");
    for (std::size_t k = 0; k < g.size(); ++k) {
        if (g[k].w.size() != p.layers[k].w.size() || g[k].b.size() != p.layers[k].b.size()) {
            throw std::invalid_argument(std::string(what) + ": shape mismatch at layer " + std::to_string(k));
        }
    }
}

inline void rmsprop_apply(MlpParams& p, GradientSet grads, RmsPropState& state, const OptimizerHyper& hyper) {
    check_shapes(p, grads, "rmsprop_apply");
    for (const auto& l : grads) {
        for (double v : l.w) {
            if (!std::isfinite(v)) throw std::invalid_argument("rmsprop_apply: non-finite gradient rejected");
        }
        for (double v : l.b) {
            if (!std::isfinite(v)) throw std::invalid_argument("rmsprop_apply: non-finite gradient rejected");
        }
    }
    clip_gradients(grads, hyper.clip_norm);
    for (std::size_t k = 0; k < grads.size(); ++k) {
        auto step = [&](double& param, double& cache, double g) {
            cache = hyper.decay * cache + (1.0 - hyper.decay) * g * g;
            param -= hyper.lr * g / (std::sqrt(cache) + hyper.epsilon);
        };
        for (std::size_t i = 0; i < grads[k].w.size(); ++i) {
            step(p.layers[k].w[i], state.cache[k].w[i], grads[k].w[i]);
        }
        for (std::size_t i = 0; i < grads[k].b.size(); ++i) {
            step(p.layers[k].b[i], state.cache[k].b[i], grads[k].b[i]);
        }
    }
}

struct ParamSnapshot {
    MlpParams actor;
    MlpParams critic;
    std::uint64_t version = 0;
};

// Shared actor/critic parameters. Snapshots and applies serialize on one
// mutex, so a reader never sees a half-applied update; workers may still race
// each other in asynchronous training, which only affects apply order.
class ParameterStore {
public:
    ParameterStore(MlpParams actor, MlpParams critic, OptimizerHyper hyper)
        : actor_(std::move(actor)),
          critic_(std::move(critic)),
          hyper_(hyper),
          opt_actor_(RmsPropState::for_params(actor_)),
          opt_critic_(RmsPropState::for_params(critic_)) {}

    ParamSnapshot snapshot() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return {actor_, critic_, version_};
    }

    std::uint64_t apply(const GradientSet& actor_grads, const GradientSet& critic_grads) {
        std::lock_guard<std::mutex> lock(mutex_);
        rmsprop_apply(actor_, actor_grads, opt_actor_, hyper_);
        rmsprop_apply(critic_, critic_grads, opt_critic_, hyper_);
        return ++version_;
    }

    std::uint64_t version() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return version_;
    }

    const OptimizerHyper& hyper() const { return hyper_; }

    struct Internals {
        MlpParams actor;
        MlpParams critic;
        RmsPropState opt_actor;
        RmsPropState opt_critic;
        std::uint64_t version;
    };

    Internals internals() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return {actor_, critic_, opt_actor_, opt_critic_, version_};
    }

    void restore(const Internals& in) {
        std::lock_guard<std::mutex> lock(mutex_);
        actor_ = in.actor;
        critic_ = in.critic;
        opt_actor_ = in.opt_actor;
        opt_critic_ = in.opt_critic;
        version_ = in.version;
    }

private:
    mutable std::mutex mutex_;
    MlpParams actor_;
    MlpParams critic_;
    OptimizerHyper hyper_;
    RmsPropState opt_actor_;
    RmsPropState opt_critic_;
    std::uint64_t version_ = 0;
};

// ---- JSON (de)serialization for checkpoints; doubles round-trip exactly ----

inline nlohmann::json mlp_spec_to_json(const MlpSpec& s) {
    return {{"input_width", s.input_width},
            {"hidden", s.hidden},
            {"activation", to_string(s.activation)},
            {"output_width", s.output_width},
            {"head", s.head == OutputHead::Softmax ? "softmax" : "linear"}};
}

inline MlpSpec mlp_spec_from_json(const nlohmann::json& j) {
    MlpSpec s;
    s.input_width = j.at("input_width").get<int>();
    s.hidden = j.at("hidden").get<std::vector<int>>();
    s.activation = activation_from_string(j.at("activation").get<std::string>());
    s.output_width = j.at("output_width").get<int>();
    const std::string head = j.at("head").get<std::string>();
    if (head != "softmax" && head != "linear") throw std::invalid_argument("unknown output head '" + head + "'");
    s.head = head == "softmax" ? OutputHead::Softmax : OutputHead::Linear;
    return s;
}

inline nlohmann::json layers_to_json(const std::vector<LayerTensor>& layers) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& l : layers) out.push_back({{"in", l.in}, {"out", l.out}, {"w", l.w}, {"b", l.b}});
    return out;
}

inline std::vector<LayerTensor> layers_from_json(const nlohmann::json& j) {
    std::vector<LayerTensor> out;
    for (const auto& jl : j) {
        LayerTensor l;
        l.in = jl.at("in").get<int>();
        l.out = jl.at("out").get<int>();
        l.w = jl.at("w").get<std::vector<double>>();
        l.b = jl.at("b").get<std::vector<double>>();
        if (l.w.size() != static_cast<std::size_t>(l.in) * static_cast<std::size_t>(l.out) ||
            l.b.size() != static_cast<std::size_t>(l.out)) {
            throw std::invalid_argument("layers_from_json: tensor shape mismatch");
        }
        out.push_back(std::move(l));
    }
    return out;
}

inline nlohmann::json mlp_params_to_json(const MlpParams& p) {
    return {{"spec", mlp_spec_to_json(p.spec)}, {"layers", layers_to_json(p.layers)}};
}

inline MlpParams mlp_params_from_json(const nlohmann::json& j) {
    MlpParams p;
    p.spec = mlp_spec_from_json(j.at("spec"));
    p.layers = layers_from_json(j.at("layers"));
    return p;
}

}  // namespace gridlight
