#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "timeraf/errors.hpp"

namespace timeraf {

using Vector = std::vector<double>;

// Row-major dense matrix of doubles.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    Vector data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    // View of row r as a copy.
    Vector row(std::size_t r) const {
        return Vector(data.begin() + static_cast<std::ptrdiff_t>(r * cols),
                      data.begin() + static_cast<std::ptrdiff_t>((r + 1) * cols));
    }
    void set_row(std::size_t r, const Vector& v);
};

struct MlpLayer {
    Matrix weight;  // out x in
    Vector bias;    // out
};

// Fully-connected net, tanh on hidden layers. When final_linear is false the
// last layer also passes through tanh.
struct MlpParams {
    std::vector<MlpLayer> layers;
    bool final_linear = true;
    bool frozen = false;

    std::size_t in_dim() const { return layers.front().weight.cols; }
    std::size_t out_dim() const { return layers.back().weight.rows; }
    std::size_t layer_count() const { return layers.size(); }
    void check_shapes() const;
};

// Everything mlp_backward needs from the matching forward call.
struct ActivationCache {
    Vector input;
    std::vector<Vector> pre;   // pre-activation per layer
    std::vector<Vector> act;   // post-activation per layer; act.back() is the output
    bool empty() const { return pre.empty() && act.empty(); }
    void clear() { input.clear(); pre.clear(); act.clear(); }
};

// Gradient buffers, shape-identical to their MlpParams.
struct Grads {
    std::vector<MlpLayer> layers;
    std::size_t accum_count = 0;

    static Grads like(const MlpParams& params);
    void zero();
};

enum class OptimizerKind { adam, sgd };

struct OptimizerState {
    OptimizerKind kind = OptimizerKind::adam;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t step = 0;
    std::vector<MlpLayer> m;  // first moments (adam only)
    std::vector<MlpLayer> v;  // second moments (adam only)

    static OptimizerState adam(const MlpParams& params, double lr);
    static OptimizerState sgd(double lr);
};

Vector mlp_forward(const MlpParams& params, const Vector& input, ActivationCache& cache);
Vector mlp_forward(const MlpParams& params, const Vector& input);

// Accumulates parameter gradients into *grads (skipped when grads == nullptr,
// e.g. for frozen nets) and returns the gradient w.r.t. the input.
Vector mlp_backward(const MlpParams& params, const ActivationCache& cache,
                    const Vector& output_grad, Grads* grads);

// Stabilized softmax(scores / temperature).
Vector softmax(const Vector& scores, double temperature);

// Sum p_i ln(p_i/q_i), with 0 ln(0/q) = 0. Both inputs must be distributions.
double kl_divergence(const Vector& p, const Vector& q);

double mse(const Vector& pred, const Vector& target);

double dot(const Vector& a, const Vector& b);

void optimizer_step(MlpParams& params, Grads& grads, OptimizerState& state);

// FNV-1a over the raw parameter bytes; used by freeze-contract tests.
std::uint64_t param_hash(const MlpParams& params);

// Xavier-uniform initialized net with the given layer widths
// (dims = {in, h1, ..., out}).
MlpParams make_mlp(const std::vector<std::size_t>& dims, std::mt19937_64& rng,
                   bool final_linear = true);

// Zeroes the last layer's weight and bias (residual no-harm initialization).
void zero_final_layer(MlpParams& params);

}  // namespace timeraf
