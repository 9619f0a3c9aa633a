#include "timeraf/numkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace timeraf {

void Matrix::set_row(std::size_t r, const Vector& v) {
    if (v.size() != cols) throw ConfigError("Matrix::set_row: length mismatch");
    std::copy(v.begin(), v.end(), data.begin() + static_cast<std::ptrdiff_t>(r * cols));
}

void MlpParams::check_shapes() const {
    if (layers.empty()) throw ConfigError("MlpParams: no layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        if (l.weight.data.size() != l.weight.rows * l.weight.cols)
            throw ConfigError("MlpParams: weight buffer size mismatch");
        if (l.bias.size() != l.weight.rows)
            throw ConfigError("MlpParams: bias length mismatch");
        if (i > 0 && layers[i - 1].weight.rows != l.weight.cols)
            throw ConfigError("MlpParams: adjacent layers dimension-incompatible");
    }
}

Grads Grads::like(const MlpParams& params) {
    Grads g;
    g.layers.reserve(params.layers.size());
    for (const auto& l : params.layers) {
        MlpLayer gl;
        gl.weight = Matrix(l.weight.rows, l.weight.cols);
        gl.bias.assign(l.bias.size(), 0.0);
        g.layers.push_back(std::move(gl));
    }
    return g;
}

void Grads::zero() {
    for (auto& l : layers) {
        std::fill(l.weight.data.begin(), l.weight.data.end(), 0.0);
        std::fill(l.bias.begin(), l.bias.end(), 0.0);
    }
    accum_count = 0;
}

OptimizerState OptimizerState::adam(const MlpParams& params, double lr) {
    OptimizerState s;
    s.kind = OptimizerKind::adam;
    s.lr = lr;
    for (const auto& l : params.layers) {
        MlpLayer zero_w;
        zero_w.weight = Matrix(l.weight.rows, l.weight.cols);
        zero_w.bias.assign(l.bias.size(), 0.0);
        s.m.push_back(zero_w);
        s.v.push_back(zero_w);
    }
    return s;
}

OptimizerState OptimizerState::sgd(double lr) {
    OptimizerState s;
    s.kind = OptimizerKind::sgd;
    s.lr = lr;
    return s;
}

namespace {

Vector affine(const MlpLayer& layer, const Vector& x) {
    const std::size_t out = layer.weight.rows, in = layer.weight.cols;
    Vector y(layer.bias);
    for (std::size_t r = 0; r < out; ++r) {
        const double* wr = layer.weight.data.data() + r * in;
        double acc = 0.0;
        for (std::size_t c = 0; c < in; ++c) acc += wr[c] * x[c];
        y[r] += acc;
    }
    return y;
}

}  // namespace

Vector mlp_forward(const MlpParams& params, const Vector& input, ActivationCache& cache) {
    if (input.size() != params.in_dim())
        throw ConfigError("mlp_forward: input length does not match first layer");
    if (!cache.empty()) throw ConfigError("mlp_forward: cache not empty");
    cache.input = input;
    const Vector* cur = &input;
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
        Vector pre = affine(params.layers[i], *cur);
        const bool linear = params.final_linear && i + 1 == params.layers.size();
        Vector act = pre;
        if (!linear)
            for (auto& v : act) v = std::tanh(v);
        cache.pre.push_back(std::move(pre));
        cache.act.push_back(std::move(act));
        cur = &cache.act.back();
    }
    return cache.act.back();
}

Vector mlp_forward(const MlpParams& params, const Vector& input) {
    ActivationCache cache;
    return mlp_forward(params, input, cache);
}

Vector mlp_backward(const MlpParams& params, const ActivationCache& cache,
                    const Vector& output_grad, Grads* grads) {
    const std::size_t nl = params.layers.size();
    if (cache.pre.size() != nl || cache.act.size() != nl)
        throw ConfigError("mlp_backward: cache does not match params");
    if (output_grad.size() != params.out_dim())
        throw ConfigError("mlp_backward: output_grad length mismatch");
    if (grads && grads->layers.size() != nl)
        throw ConfigError("mlp_backward: grads shape mismatch");

    Vector delta = output_grad;  // gradient w.r.t. layer activation
    for (std::size_t li = nl; li-- > 0;) {
        const auto& layer = params.layers[li];
        const bool linear = params.final_linear && li + 1 == nl;
        if (!linear) {
            // d tanh = 1 - tanh^2; cache.act holds tanh(pre)
            for (std::size_t j = 0; j < delta.size(); ++j)
                delta[j] *= 1.0 - cache.act[li][j] * cache.act[li][j];
        }
        const Vector& layer_in = li == 0 ? cache.input : cache.act[li - 1];
        if (grads) {
            auto& gl = grads->layers[li];
            for (std::size_t r = 0; r < layer.weight.rows; ++r) {
                double* gw = gl.weight.data.data() + r * layer.weight.cols;
                const double d = delta[r];
                for (std::size_t c = 0; c < layer.weight.cols; ++c) gw[c] += d * layer_in[c];
                gl.bias[r] += d;
            }
        }
        Vector prev(layer.weight.cols, 0.0);
        for (std::size_t r = 0; r < layer.weight.rows; ++r) {
            const double* wr = layer.weight.data.data() + r * layer.weight.cols;
            const double d = delta[r];
            for (std::size_t c = 0; c < layer.weight.cols; ++c) prev[c] += d * wr[c];
        }
        delta = std::move(prev);
    }
    if (grads) ++grads->accum_count;
    return delta;
}

Vector softmax(const Vector& scores, double temperature) {
    if (scores.empty()) throw ConfigError("softmax: empty input");
    if (!(temperature > 0.0)) throw ConfigError("softmax: temperature must be positive");
    double mx = -std::numeric_limits<double>::infinity();
    for (double s : scores) mx = std::max(mx, s / temperature);
    Vector out(scores.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        out[i] = std::exp(scores[i] / temperature - mx);
        sum += out[i];
    }
    for (auto& v : out) v /= sum;
    return out;
}

double kl_divergence(const Vector& p, const Vector& q) {
    if (p.size() != q.size()) throw ConfigError("kl_divergence: length mismatch");
    double sp = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        sp += p[i];
        sq += q[i];
    }
    if (std::abs(sp - 1.0) > 1e-9 || std::abs(sq - 1.0) > 1e-9)
        throw ConfigError("kl_divergence: inputs must sum to 1");
    double kl = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] > 0.0) {
            if (!(q[i] > 0.0)) throw ConfigError("kl_divergence: q has a zero where p > 0");
            kl += p[i] * std::log(p[i] / q[i]);
        }
    }
    return kl;
}

double mse(const Vector& pred, const Vector& target) {
    if (pred.size() != target.size() || pred.empty())
        throw ConfigError("mse: length mismatch or empty");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        acc += d * d;
    }
    return acc / static_cast<double>(pred.size());
}

double dot(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) throw ConfigError("dot: length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

void optimizer_step(MlpParams& params, Grads& grads, OptimizerState& state) {
    if (params.frozen) throw ConfigError("optimizer_step: parameters are frozen");
    if (grads.accum_count == 0) throw ConfigError("optimizer_step: no accumulated gradients");
    if (grads.layers.size() != params.layers.size())
        throw ConfigError("optimizer_step: grads shape mismatch");
    ++state.step;
    if (state.kind == OptimizerKind::sgd) {
        for (std::size_t li = 0; li < params.layers.size(); ++li) {
            auto& p = params.layers[li];
            const auto& g = grads.layers[li];
            for (std::size_t i = 0; i < p.weight.data.size(); ++i)
                p.weight.data[i] -= state.lr * g.weight.data[i];
            for (std::size_t i = 0; i < p.bias.size(); ++i) p.bias[i] -= state.lr * g.bias[i];
        }
    } else {
        const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
        const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
        auto update = [&](double& p, double& m, double& v, double g) {
            m = state.beta1 * m + (1.0 - state.beta1) * g;
            v = state.beta2 * v + (1.0 - state.beta2) * g * g;
            const double mhat = m / bc1, vhat = v / bc2;
            p -= state.lr * mhat / (std::sqrt(vhat) + state.epsilon);
        };
        for (std::size_t li = 0; li < params.layers.size(); ++li) {
            auto& p = params.layers[li];
            const auto& g = grads.layers[li];
            auto& m = state.m[li];
            auto& v = state.v[li];
            for (std::size_t i = 0; i < p.weight.data.size(); ++i)
                update(p.weight.data[i], m.weight.data[i], v.weight.data[i], g.weight.data[i]);
            for (std::size_t i = 0; i < p.bias.size(); ++i)
                update(p.bias[i], m.bias[i], v.bias[i], g.bias[i]);
        }
    }
    grads.zero();
}

std::uint64_t param_hash(const MlpParams& params) {
    std::uint64_t h = 14695981039346656037ULL;
    auto feed = [&](const double* ptr, std::size_t n) {
        const unsigned char* bytes = reinterpret_cast<const unsigned char*>(ptr);
        for (std::size_t i = 0; i < n * sizeof(double); ++i) {
            h ^= bytes[i];
            h *= 1099511628211ULL;
        }
    };
    for (const auto& l : params.layers) {
        feed(l.weight.data.data(), l.weight.data.size());
        feed(l.bias.data(), l.bias.size());
    }
    return h;
}

MlpParams make_mlp(const std::vector<std::size_t>& dims, std::mt19937_64& rng,
                   bool final_linear) {
    if (dims.size() < 2) throw ConfigError("make_mlp: need at least input and output dims");
    MlpParams p;
    p.final_linear = final_linear;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        const std::size_t in = dims[i], out = dims[i + 1];
        const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
        std::uniform_real_distribution<double> dist(-bound, bound);
        MlpLayer l;
        l.weight = Matrix(out, in);
        for (auto& w : l.weight.data) w = dist(rng);
        l.bias.assign(out, 0.0);
        p.layers.push_back(std::move(l));
    }
    return p;
}

void zero_final_layer(MlpParams& params) {
    auto& l = params.layers.back();
    std::fill(l.weight.data.begin(), l.weight.data.end(), 0.0);
    std::fill(l.bias.begin(), l.bias.end(), 0.0);
}

}  // namespace timeraf
