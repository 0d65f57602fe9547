#pragma once

#include <cstdint>
#include <string>

#include "rsiam/types.hpp"

namespace rsiam {

/// Shared-parameter embedding function: f = W2 tanh(W1 x + b1) + b2.
/// Both views go through the same parameter set; that weight sharing is what
/// makes the two branches Siamese.
struct EncoderParams {
    RealMatrix w1; // d_hidden x d_in
    RealVector b1; // d_hidden
    RealMatrix w2; // d_emb x d_hidden
    RealVector b2; // d_emb

    // SGD momentum buffers, same shapes as the parameters.
    RealMatrix v_w1;
    RealVector v_b1;
    RealMatrix v_w2;
    RealVector v_b2;

    std::size_t d_in() const { return w1.cols; }
    std::size_t d_hidden() const { return w1.rows; }
    std::size_t d_emb() const { return w2.rows; }
};

struct ForwardCache {
    RealMatrix inputs;      // B x d_in
    RealMatrix activations; // B x d_hidden, tanh of the pre-activations
};

struct ParamGrads {
    RealMatrix w1;
    RealVector b1;
    RealMatrix w2;
    RealVector b2;

    void add_scaled(const ParamGrads& other, double scale);
};

/// Gaussian fan-in initialization: weights ~ N(0, 1/fan_in), biases zero,
/// momentum buffers zero. Deterministic per seed.
EncoderParams init_params(int d_in, int d_hidden, int d_emb, std::uint64_t seed);

RealMatrix forward(const EncoderParams& params, const RealMatrix& x, ForwardCache& cache);

/// Convenience overload when no backward pass will follow.
RealMatrix forward(const EncoderParams& params, const RealMatrix& x);

/// Exact gradients of <d_out, forward(x)> with respect to every parameter and
/// to x. d_x may be null when the input gradient is not needed.
ParamGrads backward(const EncoderParams& params, const ForwardCache& cache,
                    const RealMatrix& d_out, RealMatrix* d_x = nullptr);

/// v <- momentum v + grad + weight_decay w;  w <- w - lr v.
/// Biases are exempt from weight decay.
void sgd_step(EncoderParams& params, const ParamGrads& grads, double lr, double momentum,
              double weight_decay);

/// Versioned JSON tensor dump; 64-bit values round-trip exactly.
void save_checkpoint(const EncoderParams& params, const std::string& path);
EncoderParams load_checkpoint(const std::string& path);

} // namespace rsiam
