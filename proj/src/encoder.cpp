#include "rsiam/encoder.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "rsiam/errors.hpp"
#include "rsiam/kernels.hpp"
#include "rsiam/rng.hpp"

namespace rsiam {

namespace {

RealMatrix gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols, double std_dev) {
    RealMatrix m(rows, cols);
    for (auto& x : m.data) x = std_dev * rng.gaussian();
    return m;
}

void axpy(RealVector& y, const RealVector& x, double a) {
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

void axpy(RealMatrix& y, const RealMatrix& x, double a) {
    for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] += a * x.data[i];
}

} // namespace

void ParamGrads::add_scaled(const ParamGrads& other, double scale) {
    axpy(w1, other.w1, scale);
    axpy(b1, other.b1, scale);
    axpy(w2, other.w2, scale);
    axpy(b2, other.b2, scale);
}

EncoderParams init_params(int d_in, int d_hidden, int d_emb, std::uint64_t seed) {
    if (d_in < 1 || d_hidden < 1 || d_emb < 1)
        throw InfeasibleConfigError("init_params: dimensions must be >= 1");
    Rng rng(seed);
    EncoderParams p;
    p.w1 = gaussian_matrix(rng, d_hidden, d_in, 1.0 / std::sqrt(static_cast<double>(d_in)));
    p.b1.assign(d_hidden, 0.0);
    p.w2 = gaussian_matrix(rng, d_emb, d_hidden, 1.0 / std::sqrt(static_cast<double>(d_hidden)));
    p.b2.assign(d_emb, 0.0);
    p.v_w1 = RealMatrix(d_hidden, d_in);
    p.v_b1.assign(d_hidden, 0.0);
    p.v_w2 = RealMatrix(d_emb, d_hidden);
    p.v_b2.assign(d_emb, 0.0);
    return p;
}

RealMatrix forward(const EncoderParams& params, const RealMatrix& x, ForwardCache& cache) {
    if (x.cols != params.d_in())
        throw DimensionMismatchError("forward: input dim " + std::to_string(x.cols) +
                                     " != d_in " + std::to_string(params.d_in()));
    cache.inputs = x;
    RealMatrix pre;
    kernels::linear_forward(x, params.w1, params.b1, pre);
    for (auto& v : pre.data) v = std::tanh(v);
    cache.activations = std::move(pre);
    RealMatrix out;
    kernels::linear_forward(cache.activations, params.w2, params.b2, out);
    return out;
}

RealMatrix forward(const EncoderParams& params, const RealMatrix& x) {
    ForwardCache cache;
    return forward(params, x, cache);
}

ParamGrads backward(const EncoderParams& params, const ForwardCache& cache,
                    const RealMatrix& d_out, RealMatrix* d_x) {
    const std::size_t batch = cache.inputs.rows;
    if (d_out.rows != batch || d_out.cols != params.d_emb())
        throw DimensionMismatchError("backward: upstream gradient shape mismatch");

    ParamGrads g;
    kernels::linear_grad_weights(d_out, cache.activations, g.w2);
    g.b2.assign(params.d_emb(), 0.0);
    for (std::size_t i = 0; i < batch; ++i)
        for (std::size_t o = 0; o < d_out.cols; ++o) g.b2[o] += d_out(i, o);

    RealMatrix d_hidden;
    kernels::linear_grad_inputs(d_out, params.w2, d_hidden);
    // tanh' = 1 - tanh^2, with the activation already cached
    for (std::size_t i = 0; i < d_hidden.data.size(); ++i) {
        const double a = cache.activations.data[i];
        d_hidden.data[i] *= 1.0 - a * a;
    }

    kernels::linear_grad_weights(d_hidden, cache.inputs, g.w1);
    g.b1.assign(params.d_hidden(), 0.0);
    for (std::size_t i = 0; i < batch; ++i)
        for (std::size_t o = 0; o < d_hidden.cols; ++o) g.b1[o] += d_hidden(i, o);

    if (d_x) kernels::linear_grad_inputs(d_hidden, params.w1, *d_x);
    return g;
}

void sgd_step(EncoderParams& params, const ParamGrads& grads, double lr, double momentum,
              double weight_decay) {
    if (!(lr > 0.0)) throw InfeasibleConfigError("sgd_step: lr must be > 0");
    auto step_matrix = [&](RealMatrix& w, RealMatrix& v, const RealMatrix& g, double decay) {
        for (std::size_t i = 0; i < w.data.size(); ++i) {
            v.data[i] = momentum * v.data[i] + g.data[i] + decay * w.data[i];
            w.data[i] -= lr * v.data[i];
        }
    };
    auto step_vector = [&](RealVector& w, RealVector& v, const RealVector& g, double decay) {
        for (std::size_t i = 0; i < w.size(); ++i) {
            v[i] = momentum * v[i] + g[i] + decay * w[i];
            w[i] -= lr * v[i];
        }
    };
    step_matrix(params.w1, params.v_w1, grads.w1, weight_decay);
    step_vector(params.b1, params.v_b1, grads.b1, 0.0);
    step_matrix(params.w2, params.v_w2, grads.w2, weight_decay);
    step_vector(params.b2, params.v_b2, grads.b2, 0.0);
}

namespace {

constexpr int kCheckpointVersion = 1;

nlohmann::ordered_json matrix_to_json(const RealMatrix& m) {
    return {{"rows", m.rows}, {"cols", m.cols}, {"data", m.data}};
}

RealMatrix matrix_from_json(const nlohmann::json& j) {
    RealMatrix m;
    m.rows = j.at("rows").get<std::size_t>();
    m.cols = j.at("cols").get<std::size_t>();
    m.data = j.at("data").get<std::vector<double>>();
    if (m.data.size() != m.rows * m.cols)
        throw IoError("checkpoint: tensor size does not match its shape");
    return m;
}

} // namespace

void save_checkpoint(const EncoderParams& params, const std::string& path) {
    nlohmann::ordered_json j;
    j["format"] = "rsiam-encoder";
    j["version"] = kCheckpointVersion;
    j["w1"] = matrix_to_json(params.w1);
    j["b1"] = params.b1;
    j["w2"] = matrix_to_json(params.w2);
    j["b2"] = params.b2;
    j["v_w1"] = matrix_to_json(params.v_w1);
    j["v_b1"] = params.v_b1;
    j["v_w2"] = matrix_to_json(params.v_w2);
    j["v_b2"] = params.v_b2;
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << j.dump(2) << "\n";
}

EncoderParams load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("checkpoint parse failure: " + std::string(e.what()));
    }
    if (j.value("format", "") != "rsiam-encoder")
        throw IoError("not an encoder checkpoint: " + path);
    if (j.at("version").get<int>() != kCheckpointVersion)
        throw IoError("unsupported checkpoint version");
    EncoderParams p;
    p.w1 = matrix_from_json(j.at("w1"));
    p.b1 = j.at("b1").get<RealVector>();
    p.w2 = matrix_from_json(j.at("w2"));
    p.b2 = j.at("b2").get<RealVector>();
    p.v_w1 = matrix_from_json(j.at("v_w1"));
    p.v_b1 = j.at("v_b1").get<RealVector>();
    p.v_w2 = matrix_from_json(j.at("v_w2"));
    p.v_b2 = j.at("v_b2").get<RealVector>();
    if (p.b1.size() != p.w1.rows || p.b2.size() != p.w2.rows || p.w2.cols != p.w1.rows)
        throw IoError("checkpoint: inconsistent tensor shapes");
    return p;
}

} // namespace rsiam
