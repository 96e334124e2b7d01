#pragma once

// Dense tensors and a tape-based reverse-mode gradient machine, sized for the
// layers this project needs: embeddings, LSTM cells, feed-forward attention
// scoring, softmax cross-entropy and dropout. Values are double precision.

#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "csnlg/util.hpp"

namespace csnlg::nn {

struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> v;  // row-major

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> s) : shape(std::move(s)), v(count(shape), 0.0) {}
    Tensor(std::vector<std::size_t> s, std::vector<double> data) : shape(std::move(s)), v(std::move(data)) {
        if (v.size() != count(shape)) throw std::invalid_argument("tensor data does not match shape");
    }

    static std::size_t count(const std::vector<std::size_t>& s) {
        return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
    }

    std::size_t size() const { return v.size(); }
    std::size_t rows() const { return shape.at(0); }
    std::size_t cols() const { return shape.at(1); }

    double& at(std::size_t r, std::size_t c) { return v[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return v[r * cols() + c]; }

    void fill(double x) { std::fill(v.begin(), v.end(), x); }

    bool all_finite() const {
        for (double x : v)
            if (!std::isfinite(x)) return false;
        return true;
    }
};

// Named parameter with a persistent gradient buffer.
struct Param {
    Tensor value;
    Tensor grad;

    explicit Param(Tensor t) : value(std::move(t)), grad(value.shape) {}
    Param() = default;

    void zero_grad() { grad.fill(0.0); }
};

// Computation tape. Nodes reference earlier nodes only, so reverse creation
// order is a valid backward schedule. A tape is built per example (or per
// decode step chain) and discarded afterwards.
class Tape {
public:
    using Id = int;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    const Tensor& val(Id id) const { return nodes_[id].val; }
    Tensor& grad(Id id) { return nodes_[id].grad; }
    std::size_t size() const { return nodes_.size(); }

    Id constant(Tensor t) { return push(std::move(t), nullptr); }

    // Leaf bound to a parameter: backward accumulates into p.grad.
    Id leaf(Param& p) {
        Id id = push(p.value, nullptr);
        Param* pp = &p;
        nodes_[id].back = [id, pp](Tape& t) {
            auto& g = t.nodes_[id].grad;
            for (std::size_t i = 0; i < g.size(); ++i) pp->grad.v[i] += g.v[i];
        };
        return id;
    }

    Id add(Id a, Id b) {
        check_same(a, b);
        Tensor out = nodes_[a].val;
        for (std::size_t i = 0; i < out.size(); ++i) out.v[i] += nodes_[b].val.v[i];
        Id id = push(std::move(out), nullptr);
        nodes_[id].back = [id, a, b](Tape& t) {
            auto& g = t.nodes_[id].grad;
            for (std::size_t i = 0; i < g.size(); ++i) {
                t.nodes_[a].grad.v[i] += g.v[i];
                t.nodes_[b].grad.v[i] += g.v[i];
            }
        };
        return id;
    }

    Id mul(Id a, Id b) {
        check_same(a, b);
        Tensor out = nodes_[a].val;
        for (std::size_t i = 0; i < out.size(); ++i) out.v[i] *= nodes_[b].val.v[i];
        Id id = push(std::move(out), nullptr);
        nodes_[id].back = [id, a, b](Tape& t) {
            auto& g = t.nodes_[id].grad;
            for (std::size_t i = 0; i < g.size(); ++i) {
                t.nodes_[a].grad.v[i] += g.v[i] * t.nodes_[b].val.v[i];
                t.nodes_[b].grad.v[i] += g.v[i] * t.nodes_[a].val.v[i];
            }
        };
        return id;
    }

    Id scale(Id a, double c) {
        Tensor out = nodes_[a].val;
        for (auto& x : out.v) x *= c;
        Id id = push(std::move(out), nullptr);
        nodes_[id].back = [id, a, c](Tape& t) {
            auto& g = t.nodes_[id].grad;
            for (std::size_t i = 0; i < g.size(); ++i) t.nodes_[a].grad.v[i] += c * g.v[i];
        };
        return id;
    }

    // y = W x + b with W [m,n], x [n], b [m] (pass b = -1 to skip the bias)
    Id affine(Id W, Id x, Id b) {
        const Tensor& w = nodes_[W].val;
        const Tensor& xv = nodes_[x].val;
        if (w.shape.size() != 2 || xv.size() != w.cols())
            throw std::invalid_argument("affine: shape mismatch (" + shape_str(w.shape) + " vs " +
                                        shape_str(xv.shape) + ")");
        std::size_t m = w.rows(), n = w.cols();
        Tensor out({m});
        for (std::size_t r = 0; r < m; ++r) {
            double acc = b >= 0 ? nodes_[b].val.v[r] : 0.0;
            const double* wr = &w.v[r * n];
            for (std::size_t c = 0; c < n; ++c) acc += wr[c] * xv.v[c];
            out.v[r] = acc;
        }
        Id id = push(std::move(out), nullptr);
        nodes_[id].back = [id, W, x, b, m, n](Tape& t) {
            const auto& g = t.nodes_[id].grad;
            const auto& wv = t.nodes_[W].val;
            const auto& xv2 = t.nodes_[x].val;
            auto& gw = t.nodes_[W].grad;
            auto& gx = t.nodes_[x].grad;
            for (std::size_t r = 0; r < m; ++r) {
                double gr = g.v[r];
                if (gr == 0.0) continue;
                double* gwr = &gw.v[r * n];
                const double* wr = &wv.v[r * n];
                for (std::size_t c = 0; c < n; ++c) {
                    gwr[c] += gr * xv2.v[c];
                    gx.v[c] += gr * wr[c];
                }
                if (b >= 0) t.nodes_[b].grad.v[r] += gr;
            }
        };
        return id;
    }

    // y = M^T w with M [n,d], w [n]: the weighted combination of M's rows.
    Id weighted_rows(Id M, Id w) {
        const Tensor& mv = nodes_[M].val;
        const Tensor& wv = nodes_[w].val;
        if (mv.shape.size() != 2 || wv.size() != mv.rows())
            throw std::invalid_argument("weighted_rows: shape mismatch");
        std::size_t n = mv.rows(), d = mv.cols();
        Tensor out({d});
        for (std::size_t i = 0; i < n; ++i) {
            const double* row = &mv.v[i * d];
            for (std::size_t c = 0; c < d; ++c) out.v[c] += wv.v[i] * row[c];
        }
        Id id = push(std::move(out), nullptr);
        nodes_[id].back = [id, M, w, n, d](Tape& t) {
            const auto& g = t.nodes_[id].grad;
            const auto& mv2 = t.nodes_[M].val;
            const auto& wv2 = t.nodes_[w].val;
            for (std::size_t i = 0; i < n; ++i) {
                const double* row = &mv2.v[i * d];
                double acc = 0.0;
                for (std::size_t c = 0; c < d; ++c) {
                    acc += g.v[c] * row[c];
                    t.nodes_[M].grad.v[i * d + c] += wv2.v[i] * g.v[c];
                }
                t.nodes_[w].grad.v[i] += acc;
            }
        };
        return id;
    }

    Id concat(Id a, Id b) {
        Tensor out({nodes_[a].val.size() + nodes_[b].val.size()});
        std::copy(nodes_[a].val.v.begin(), nodes_[a].val.v.end(), out.v.begin());
        std::copy(nodes_[b].val.v.begin(), nodes_[b].val.v.end(), out.v.begin() + nodes_[a].val.size());
        Id id = push(std::move(out), nullptr);
        std::size_t na = nodes_[a].val.size();
        nodes_[id].back = [id, a, b, na](Tape& t) {
            const auto& g = t.nodes_[id].grad;
            for (std::size_t i = 0; i < na; ++i) t.nodes_[a].grad.v[i] += g.v[i];
            for (std::size_t i = na; i < g.size(); ++i) t.nodes_[b].grad.v[i - na] += g.v[i];
        };
        return id;
    }

    Id slice(Id a, std::size_t off, std::size_t len) {
        const Tensor& av = nodes_[a].val;
        if (off + len > av.size()) throw std::invalid_argument("slice out of range");
        Tensor out({len});
        std::copy(av.v.begin() + off, av.v.begin() + off + len, out.v.begin());
        Id id = push(std::move(out), nullptr);
        nodes_[id].back = [id, a, off, len](Tape& t) {
            const auto& g = t.nodes_[id].grad;
            for (std::size_t i = 0; i < len; ++i) t.nodes_[a].grad.v[off + i] += g.v[i];
        };
        return id;
    }

    Id sigmoid(Id a) {
        Tensor out = nodes_[a].val;
        for (auto& x : out.v) x = 1.0 / (1.0 + std::exp(-x));
        Id id = push(std::move(out), nullptr);
        nodes_[id].back = [id, a](Tape& t) {
            const auto& g = t.nodes_[id].grad;
            const auto& y = t.nodes_[id].val;
            for (std::size_t i = 0; i < g.size(); ++i)
                t.nodes_[a].grad.v[i] += g.v[i] * y.v[i] * (1.0 - y.v[i]);
        };
        return id;
    }

    Id tanh_(Id a) {
        Tensor out = nodes_[a].val;
        for (auto& x : out.v) x = std::tanh(x);
        Id id = push(std::move(out), nullptr);
        nodes_[id].back = [id, a](Tape& t) {
            const auto& g = t.nodes_[id].grad;
            const auto& y = t.nodes_[id].val;
            for (std::size_t i = 0; i < g.size(); ++i)
                t.nodes_[a].grad.v[i] += g.v[i] * (1.0 - y.v[i] * y.v[i]);
        };
        return id;
    }

    // Row lookup into an embedding matrix [V,d].
    Id row(Id E, std::size_t index) {
        const Tensor& ev = nodes_[E].val;
        if (ev.shape.size() != 2 || index >= ev.rows())
            throw std::invalid_argument("row: index " + std::to_string(index) + " out of range");
        std::size_t d = ev.cols();
        Tensor out({d});
        std::copy(ev.v.begin() + index * d, ev.v.begin() + (index + 1) * d, out.v.begin());
        Id id = push(std::move(out), nullptr);
        nodes_[id].back = [id, E, index, d](Tape& t) {
            const auto& g = t.nodes_[id].grad;
            for (std::size_t i = 0; i < d; ++i) t.nodes_[E].grad.v[index * d + i] += g.v[i];
        };
        return id;
    }

    Id stack_scalars(const std::vector<Id>& ids) {
        Tensor out({ids.size()});
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (nodes_[ids[i]].val.size() != 1) throw std::invalid_argument("stack_scalars: non-scalar input");
            out.v[i] = nodes_[ids[i]].val.v[0];
        }
        Id id = push(std::move(out), nullptr);
        std::vector<Id> parents = ids;
        nodes_[id].back = [id, parents](Tape& t) {
            const auto& g = t.nodes_[id].grad;
            for (std::size_t i = 0; i < parents.size(); ++i) t.nodes_[parents[i]].grad.v[0] += g.v[i];
        };
        return id;
    }

    Id stack_rows(const std::vector<Id>& ids) {
        if (ids.empty()) throw std::invalid_argument("stack_rows: empty input");
        std::size_t d = nodes_[ids[0]].val.size();
        Tensor out({ids.size(), d});
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (nodes_[ids[i]].val.size() != d) throw std::invalid_argument("stack_rows: ragged input");
            std::copy(nodes_[ids[i]].val.v.begin(), nodes_[ids[i]].val.v.end(), out.v.begin() + i * d);
        }
        Id id = push(std::move(out), nullptr);
        std::vector<Id> parents = ids;
        nodes_[id].back = [id, parents, d](Tape& t) {
            const auto& g = t.nodes_[id].grad;
            for (std::size_t i = 0; i < parents.size(); ++i)
                for (std::size_t c = 0; c < d; ++c) t.nodes_[parents[i]].grad.v[c] += g.v[i * d + c];
        };
        return id;
    }

    Id dot(Id a, Id b) {
        check_same(a, b);
        double acc = 0.0;
        for (std::size_t i = 0; i < nodes_[a].val.size(); ++i) acc += nodes_[a].val.v[i] * nodes_[b].val.v[i];
        Id id = push(Tensor({1}, {acc}), nullptr);
        nodes_[id].back = [id, a, b](Tape& t) {
            double g = t.nodes_[id].grad.v[0];
            for (std::size_t i = 0; i < t.nodes_[a].val.size(); ++i) {
                t.nodes_[a].grad.v[i] += g * t.nodes_[b].val.v[i];
                t.nodes_[b].grad.v[i] += g * t.nodes_[a].val.v[i];
            }
        };
        return id;
    }

    Id softmax(Id a) {
        Tensor out = nodes_[a].val;
        double mx = *std::max_element(out.v.begin(), out.v.end());
        double total = 0.0;
        for (auto& x : out.v) {
            x = std::exp(x - mx);
            total += x;
        }
        for (auto& x : out.v) x /= total;
        Id id = push(std::move(out), nullptr);
        nodes_[id].back = [id, a](Tape& t) {
            const auto& g = t.nodes_[id].grad;
            const auto& y = t.nodes_[id].val;
            double inner = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i) inner += g.v[i] * y.v[i];
            for (std::size_t i = 0; i < g.size(); ++i)
                t.nodes_[a].grad.v[i] += y.v[i] * (g.v[i] - inner);
        };
        return id;
    }

    // loss = -log softmax(logits)[target], numerically stabilized.
    Id softmax_xent(Id logits, std::size_t target) {
        const Tensor& lv = nodes_[logits].val;
        if (target >= lv.size()) throw std::invalid_argument("softmax_xent: target out of range");
        double mx = *std::max_element(lv.v.begin(), lv.v.end());
        double total = 0.0;
        for (double x : lv.v) total += std::exp(x - mx);
        double logz = mx + std::log(total);
        Id id = push(Tensor({1}, {logz - lv.v[target]}), nullptr);
        nodes_[id].back = [id, logits, target, mx, logz](Tape& t) {
            (void)mx;
            double g = t.nodes_[id].grad.v[0];
            const auto& lv2 = t.nodes_[logits].val;
            for (std::size_t i = 0; i < lv2.size(); ++i) {
                double p = std::exp(lv2.v[i] - logz);
                t.nodes_[logits].grad.v[i] += g * (p - (i == target ? 1.0 : 0.0));
            }
        };
        return id;
    }

    // Summed binary cross-entropy over logits against 0/1 targets.
    Id binary_xent(Id logits, std::vector<double> targets) {
        const Tensor& lv = nodes_[logits].val;
        if (targets.size() != lv.size()) throw std::invalid_argument("binary_xent: target size mismatch");
        double loss = 0.0;
        for (std::size_t i = 0; i < lv.size(); ++i) {
            double z = lv.v[i], y = targets[i];
            loss += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::fabs(z)));
        }
        Id id = push(Tensor({1}, {loss}), nullptr);
        nodes_[id].back = [id, logits, targets](Tape& t) {
            double g = t.nodes_[id].grad.v[0];
            const auto& lv2 = t.nodes_[logits].val;
            for (std::size_t i = 0; i < lv2.size(); ++i) {
                double s = 1.0 / (1.0 + std::exp(-lv2.v[i]));
                t.nodes_[logits].grad.v[i] += g * (s - targets[i]);
            }
        };
        return id;
    }

    // Inverted dropout; identity outside training.
    Id dropout(Id a, double rate, bool training, Rng& rng) {
        if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout rate must be in [0,1)");
        if (!training || rate == 0.0) return a;
        Tensor out = nodes_[a].val;
        std::vector<double> mask(out.size());
        double keep = 1.0 - rate;
        for (std::size_t i = 0; i < out.size(); ++i) {
            mask[i] = rng.real() < rate ? 0.0 : 1.0 / keep;
            out.v[i] *= mask[i];
        }
        Id id = push(std::move(out), nullptr);
        nodes_[id].back = [id, a, mask](Tape& t) {
            const auto& g = t.nodes_[id].grad;
            for (std::size_t i = 0; i < g.size(); ++i) t.nodes_[a].grad.v[i] += g.v[i] * mask[i];
        };
        return id;
    }

    // Mean of scalar nodes (batch loss).
    Id mean(const std::vector<Id>& ids) {
        if (ids.empty()) throw std::invalid_argument("mean of nothing");
        double acc = 0.0;
        for (Id i : ids) acc += nodes_[i].val.v[0];
        acc /= static_cast<double>(ids.size());
        Id id = push(Tensor({1}, {acc}), nullptr);
        std::vector<Id> parents = ids;
        nodes_[id].back = [id, parents](Tape& t) {
            double g = t.nodes_[id].grad.v[0] / static_cast<double>(parents.size());
            for (Id p : parents) t.nodes_[p].grad.v[0] += g;
        };
        return id;
    }

    void backward(Id root) {
        if (nodes_[root].val.size() != 1) throw std::invalid_argument("backward root must be scalar");
        nodes_[root].grad.v[0] = 1.0;
        for (Id i = root; i >= 0; --i)
            if (nodes_[i].back) nodes_[i].back(*this);
    }

private:
    struct Node {
        Tensor val;
        Tensor grad;
        std::function<void(Tape&)> back;
    };

    static std::string shape_str(const std::vector<std::size_t>& s) {
        std::string out = "[";
        for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
        return out + "]";
    }

    Id push(Tensor t, std::function<void(Tape&)> back) {
        Node n;
        n.grad = Tensor(t.shape);
        n.val = std::move(t);
        n.back = std::move(back);
        nodes_.push_back(std::move(n));
        return static_cast<Id>(nodes_.size()) - 1;
    }

    void check_same(Id a, Id b) const {
        if (nodes_[a].val.size() != nodes_[b].val.size())
            throw std::invalid_argument("elementwise op: size mismatch");
    }

    std::vector<Node> nodes_;
};

}  // namespace csnlg::nn
