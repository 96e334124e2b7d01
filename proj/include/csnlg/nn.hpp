#pragma once

// Model parameter containers, the LSTM cell and attention layers, the Adam
// optimizer, checkpoint serialization and finite-difference gradient checks.

#include <cmath>
#include <cstring>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "csnlg/tensor.hpp"
#include "csnlg/util.hpp"

namespace csnlg::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline const char kCheckpointMagic[8] = {'N', 'L', 'G', 'C', 'K', 'P', 'T', '1'};

class ModelParams {
public:
    explicit ModelParams(std::uint64_t seed = 0) : seed_(seed) {}

    Param& add(const std::string& name, std::vector<std::size_t> shape) {
        auto [it, inserted] = params_.emplace(name, Param(Tensor(std::move(shape))));
        if (!inserted) throw DataError("duplicate parameter name: " + name);
        return it->second;
    }

    Param& add_uniform(const std::string& name, std::vector<std::size_t> shape, Rng& rng,
                       double lo = -0.1, double hi = 0.1) {
        Param& p = add(name, std::move(shape));
        for (auto& x : p.value.v) x = rng.real(lo, hi);
        return p;
    }

    Param& at(const std::string& name) {
        auto it = params_.find(name);
        if (it == params_.end()) throw DataError("unknown parameter: " + name);
        return it->second;
    }
    const Param& at(const std::string& name) const {
        auto it = params_.find(name);
        if (it == params_.end()) throw DataError("unknown parameter: " + name);
        return it->second;
    }

    bool has(const std::string& name) const { return params_.count(name) > 0; }

    std::map<std::string, Param>& items() { return params_; }
    const std::map<std::string, Param>& items() const { return params_; }

    void zero_grads() {
        for (auto& [_, p] : params_) p.zero_grad();
    }

    bool all_finite() const {
        for (const auto& [_, p] : params_)
            if (!p.value.all_finite()) return false;
        return true;
    }

    std::uint64_t seed() const { return seed_; }
    void set_seed(std::uint64_t s) { seed_ = s; }

private:
    std::map<std::string, Param> params_;
    std::uint64_t seed_ = 0;
};

// ---------------------------------------------------------------------------
// Checkpoints
//
// Binary layout (little endian):
//   bytes 0..7   magic "NLGCKPT1"
//   u32          container version
//   u64          rng seed
//   u32          tensor count
//   per tensor:  u32 name length, name bytes,
//                u32 rank, u64 dims[rank],
//                f64 data[prod(dims)]

namespace detail {

template <typename T>
void put(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

template <typename T>
T take(const std::string& in, std::size_t& off) {
    if (off + sizeof(T) > in.size()) throw DataError("checkpoint truncated");
    T v;
    std::memcpy(&v, in.data() + off, sizeof(T));
    off += sizeof(T);
    return v;
}

}  // namespace detail

inline std::string serialize_params(const ModelParams& params) {
    std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
    detail::put<std::uint32_t>(out, kCheckpointVersion);
    detail::put<std::uint64_t>(out, params.seed());
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(params.items().size()));
    for (const auto& [name, p] : params.items()) {
        detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out += name;
        detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.shape.size()));
        for (auto d : p.value.shape) detail::put<std::uint64_t>(out, d);
        for (double x : p.value.v) detail::put<double>(out, x);
    }
    return out;
}

inline ModelParams parse_params(const std::string& in) {
    std::size_t off = 0;
    if (in.size() < sizeof(kCheckpointMagic) ||
        std::memcmp(in.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0)
        throw DataError("not a checkpoint file");
    off = sizeof(kCheckpointMagic);
    auto version = detail::take<std::uint32_t>(in, off);
    if (version != kCheckpointVersion)
        throw DataError("unsupported checkpoint version " + std::to_string(version));
    ModelParams params(detail::take<std::uint64_t>(in, off));
    auto count = detail::take<std::uint32_t>(in, off);
    for (std::uint32_t i = 0; i < count; ++i) {
        auto name_len = detail::take<std::uint32_t>(in, off);
        if (off + name_len > in.size()) throw DataError("checkpoint truncated");
        std::string name(in.data() + off, name_len);
        off += name_len;
        auto rank = detail::take<std::uint32_t>(in, off);
        std::vector<std::size_t> shape(rank);
        for (auto& d : shape) d = static_cast<std::size_t>(detail::take<std::uint64_t>(in, off));
        Param& p = params.add(name, shape);
        for (auto& x : p.value.v) x = detail::take<double>(in, off);
    }
    return params;
}

inline void save_params(const std::string& path, const ModelParams& params) {
    write_file(path, serialize_params(params));
}

inline ModelParams load_params(const std::string& path) { return parse_params(read_file(path)); }

// ---------------------------------------------------------------------------
// LSTM cell
//
// Fused weights W [4H, X+H] and bias b [4H], gate order: input, forget,
// output, candidate. The forget-gate bias block is initialized to +1.

struct LstmRefs {
    Param* W;
    Param* b;
    std::size_t hidden;
};

inline LstmRefs add_lstm(ModelParams& params, const std::string& prefix, std::size_t input,
                         std::size_t hidden, Rng& rng) {
    Param& W = params.add_uniform(prefix + ".W", {4 * hidden, input + hidden}, rng);
    Param& b = params.add(prefix + ".b", {4 * hidden});
    for (std::size_t i = hidden; i < 2 * hidden; ++i) b.value.v[i] = 1.0;
    return {&W, &b, hidden};
}

inline LstmRefs lstm_refs(ModelParams& params, const std::string& prefix, std::size_t hidden) {
    return {&params.at(prefix + ".W"), &params.at(prefix + ".b"), hidden};
}

struct LstmState {
    Tape::Id h;
    Tape::Id c;
};

inline LstmState lstm_initial(Tape& t, std::size_t hidden) {
    return {t.constant(Tensor({hidden})), t.constant(Tensor({hidden}))};
}

// One step of the standard LSTM equations over tape nodes.
inline LstmState lstm_step(Tape& t, Tape::Id W, Tape::Id b, Tape::Id x, LstmState state,
                           std::size_t hidden) {
    Tape::Id z = t.concat(x, state.h);
    Tape::Id pre = t.affine(W, z, b);
    Tape::Id ig = t.sigmoid(t.slice(pre, 0, hidden));
    Tape::Id fg = t.sigmoid(t.slice(pre, hidden, hidden));
    Tape::Id og = t.sigmoid(t.slice(pre, 2 * hidden, hidden));
    Tape::Id cand = t.tanh_(t.slice(pre, 3 * hidden, hidden));
    Tape::Id c = t.add(t.mul(fg, state.c), t.mul(ig, cand));
    Tape::Id h = t.mul(og, t.tanh_(c));
    return {h, c};
}

// ---------------------------------------------------------------------------
// Attention: single feed-forward layer scoring (decoder state, encoder state)
// pairs, softmax-normalized.

struct AttentionRefs {
    Param* W;  // [A, D+E]
    Param* b;  // [A]
    Param* v;  // [A]
};

inline AttentionRefs add_attention(ModelParams& params, const std::string& prefix, std::size_t dec_dim,
                                   std::size_t enc_dim, std::size_t hidden, Rng& rng) {
    return {&params.add_uniform(prefix + ".W", {hidden, dec_dim + enc_dim}, rng),
            &params.add(prefix + ".b", {hidden}),
            &params.add_uniform(prefix + ".v", {hidden}, rng)};
}

inline AttentionRefs attention_refs(ModelParams& params, const std::string& prefix) {
    return {&params.at(prefix + ".W"), &params.at(prefix + ".b"), &params.at(prefix + ".v")};
}

struct AttentionIds {
    Tape::Id W;
    Tape::Id b;
    Tape::Id v;
};

// Returns the normalized weights node; `context_out`, when non-null, receives
// the weighted combination of encoder states.
inline Tape::Id attention_weights(Tape& t, const AttentionIds& attn, Tape::Id dec_state,
                                  const std::vector<Tape::Id>& enc_states,
                                  Tape::Id* context_out = nullptr) {
    if (enc_states.empty()) throw DataError("attention over an empty encoder sequence");
    std::vector<Tape::Id> scores;
    scores.reserve(enc_states.size());
    for (Tape::Id enc : enc_states) {
        Tape::Id hidden = t.tanh_(t.affine(attn.W, t.concat(dec_state, enc), attn.b));
        scores.push_back(t.dot(attn.v, hidden));
    }
    Tape::Id weights = t.softmax(t.stack_scalars(scores));
    if (context_out) *context_out = t.weighted_rows(t.stack_rows(enc_states), weights);
    return weights;
}

// ---------------------------------------------------------------------------
// Adam

struct AdamConfig {
    double learning_rate = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

class AdamState {
public:
    explicit AdamState(AdamConfig cfg = {}) : cfg_(cfg) {}

    const AdamConfig& config() const { return cfg_; }
    long timestep() const { return t_; }

    // One bias-corrected update from the gradients currently stored in params.
    void step(ModelParams& params) {
        ++t_;
        double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (auto& [name, p] : params.items()) {
            auto& m = moment1_.try_emplace(name, Tensor(p.value.shape)).first->second;
            auto& v = moment2_.try_emplace(name, Tensor(p.value.shape)).first->second;
            if (m.size() != p.value.size()) throw DataError("adam: shape mismatch for " + name);
            for (std::size_t i = 0; i < p.value.size(); ++i) {
                double g = p.grad.v[i];
                if (!std::isfinite(g)) throw DataError("non-finite gradient in " + name);
                m.v[i] = cfg_.beta1 * m.v[i] + (1.0 - cfg_.beta1) * g;
                v.v[i] = cfg_.beta2 * v.v[i] + (1.0 - cfg_.beta2) * g * g;
                double mhat = m.v[i] / bc1;
                double vhat = v.v[i] / bc2;
                p.value.v[i] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.epsilon);
            }
        }
    }

private:
    AdamConfig cfg_;
    long t_ = 0;
    std::map<std::string, Tensor> moment1_;
    std::map<std::string, Tensor> moment2_;
};

// Scale all gradients so their global L2 norm is at most `max_norm`.
inline double clip_gradients(ModelParams& params, double max_norm) {
    double sq = 0.0;
    for (const auto& [_, p] : params.items())
        for (double g : p.grad.v) sq += g * g;
    double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        double s = max_norm / norm;
        for (auto& [_, p] : params.items())
            for (double& g : p.grad.v) g *= s;
    }
    return norm;
}

// ---------------------------------------------------------------------------
// Finite-difference gradient checking

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::string worst;  // "param[index]"
    std::size_t checked = 0;

    bool ok(double tol = 1e-4) const { return checked > 0 && max_rel_error < tol; }
};

// Compares analytic gradients (params.grad, filled by the caller running
// backward once) against central differences of `loss_fn`. The loss callback
// must be a pure function of the parameter values.
template <typename LossFn>
GradCheckReport finite_difference_check(ModelParams& params, LossFn&& loss_fn, double eps = 1e-5) {
    GradCheckReport report;
    for (auto& [name, p] : params.items()) {
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            double saved = p.value.v[i];
            p.value.v[i] = saved + eps;
            double up = loss_fn();
            p.value.v[i] = saved - eps;
            double down = loss_fn();
            p.value.v[i] = saved;
            double numeric = (up - down) / (2.0 * eps);
            double analytic = p.grad.v[i];
            double denom = std::max({std::fabs(numeric), std::fabs(analytic), 1e-3});
            double rel = std::fabs(numeric - analytic) / denom;
            ++report.checked;
            if (rel > report.max_rel_error) {
                report.max_rel_error = rel;
                report.worst = name + "[" + std::to_string(i) + "]";
            }
        }
    }
    return report;
}

}  // namespace csnlg::nn
