#include "lft/tensor.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>

namespace lft {

namespace {

using MatMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

bool is_suffix(const Shape& small, const Shape& big) {
    if (small.size() > big.size()) return false;
    return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

} // namespace

int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int d : s) n *= d;
    return n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ")";
    return os.str();
}

Tensor::Tensor(Shape s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    for (int dim : shape)
        if (dim <= 0) throw ShapeError("tensor dimensions must be positive");
    if (static_cast<int64_t>(data.size()) != shape_numel(shape))
        throw ShapeError("tensor data length does not match shape " + shape_str(shape));
}

Tensor Tensor::zeros(const Shape& s) {
    return Tensor(s, std::vector<double>(static_cast<size_t>(shape_numel(s)), 0.0));
}

Tensor Tensor::full(const Shape& s, double v) {
    return Tensor(s, std::vector<double>(static_cast<size_t>(shape_numel(s)), v));
}

bool Tensor::all_finite() const {
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

// ---------------------------------------------------------------------------
// Tape internals
// ---------------------------------------------------------------------------

NodeId Tape::push(Tensor value, bool needs_grad, bool is_leaf,
                  std::function<void(Tape&, NodeId)> back) {
    nodes_.push_back(Node{std::move(value), Tensor{}, std::move(back), needs_grad, is_leaf});
    return static_cast<NodeId>(nodes_.size() - 1);
}

Tensor& Tape::grad_buf(NodeId id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.grad.data.empty()) n.grad = Tensor::zeros(n.value.shape);
    return n.grad;
}

void Tape::accumulate(NodeId id, const std::vector<double>& g) {
    Tensor& buf = grad_buf(id);
    for (size_t i = 0; i < g.size(); ++i) buf.data[i] += g[i];
}

NodeId Tape::leaf(Tensor v) { return push(std::move(v), true, true, {}); }
NodeId Tape::constant(Tensor v) { return push(std::move(v), false, true, {}); }

NodeId Tape::binary_elementwise(NodeId a, NodeId b, int op) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    const bool same = ta.shape == tb.shape;
    if (!same && !is_suffix(tb.shape, ta.shape))
        throw ShapeError("elementwise op: incompatible shapes " + shape_str(ta.shape) + " vs " +
                         shape_str(tb.shape));
    const size_t nb = tb.data.size();
    Tensor out = Tensor::zeros(ta.shape);
    for (size_t i = 0; i < out.data.size(); ++i) {
        const double x = ta.data[i], y = tb.data[i % nb];
        out.data[i] = op == 0 ? x + y : op == 1 ? x - y : x * y;
    }
    const bool ng = needs(a) || needs(b);
    return push(std::move(out), ng, false, [a, b, op, nb](Tape& t, NodeId self) {
        const Tensor& go = t.nodes_[static_cast<size_t>(self)].grad;
        if (t.needs(a)) {
            Tensor& ga = t.grad_buf(a);
            if (op == 2) {
                const Tensor& tb2 = t.value(b);
                for (size_t i = 0; i < go.data.size(); ++i)
                    ga.data[i] += go.data[i] * tb2.data[i % nb];
            } else {
                for (size_t i = 0; i < go.data.size(); ++i) ga.data[i] += go.data[i];
            }
        }
        if (t.needs(b)) {
            Tensor& gb = t.grad_buf(b);
            if (op == 2) {
                const Tensor& ta2 = t.value(a);
                for (size_t i = 0; i < go.data.size(); ++i)
                    gb.data[i % nb] += go.data[i] * ta2.data[i];
            } else {
                const double sgn = op == 1 ? -1.0 : 1.0;
                for (size_t i = 0; i < go.data.size(); ++i) gb.data[i % nb] += sgn * go.data[i];
            }
        }
    });
}

NodeId Tape::add(NodeId a, NodeId b) { return binary_elementwise(a, b, 0); }
NodeId Tape::sub(NodeId a, NodeId b) { return binary_elementwise(a, b, 1); }
NodeId Tape::mul(NodeId a, NodeId b) { return binary_elementwise(a, b, 2); }

NodeId Tape::neg(NodeId a) { return scale(a, -1.0); }

NodeId Tape::scale(NodeId a, double c) {
    const Tensor& ta = value(a);
    Tensor out = ta;
    for (double& v : out.data) v *= c;
    return push(std::move(out), needs(a), false, [a, c](Tape& t, NodeId self) {
        if (!t.needs(a)) return;
        const Tensor& go = t.nodes_[static_cast<size_t>(self)].grad;
        Tensor& ga = t.grad_buf(a);
        for (size_t i = 0; i < go.data.size(); ++i) ga.data[i] += c * go.data[i];
    });
}

NodeId Tape::relu(NodeId a) {
    const Tensor& ta = value(a);
    Tensor out = ta;
    for (double& v : out.data) v = v > 0.0 ? v : 0.0; // subgradient 0 at exactly 0
    return push(std::move(out), needs(a), false, [a](Tape& t, NodeId self) {
        if (!t.needs(a)) return;
        const Tensor& go = t.nodes_[static_cast<size_t>(self)].grad;
        const Tensor& ta2 = t.value(a);
        Tensor& ga = t.grad_buf(a);
        for (size_t i = 0; i < go.data.size(); ++i)
            if (ta2.data[i] > 0.0) ga.data[i] += go.data[i];
    });
}

NodeId Tape::exp(NodeId a) {
    const Tensor& ta = value(a);
    Tensor out = ta;
    for (double& v : out.data) {
        if (v > 700.0) throw NumericRangeError("exp argument exceeds 700");
        v = std::exp(v);
    }
    return push(std::move(out), needs(a), false, [a](Tape& t, NodeId self) {
        if (!t.needs(a)) return;
        const Node& n = t.nodes_[static_cast<size_t>(self)];
        Tensor& ga = t.grad_buf(a);
        for (size_t i = 0; i < n.grad.data.size(); ++i)
            ga.data[i] += n.grad.data[i] * n.value.data[i];
    });
}

NodeId Tape::cos(NodeId a) {
    const Tensor& ta = value(a);
    Tensor out = ta;
    for (double& v : out.data) v = std::cos(v);
    return push(std::move(out), needs(a), false, [a](Tape& t, NodeId self) {
        if (!t.needs(a)) return;
        const Tensor& go = t.nodes_[static_cast<size_t>(self)].grad;
        const Tensor& ta2 = t.value(a);
        Tensor& ga = t.grad_buf(a);
        for (size_t i = 0; i < go.data.size(); ++i)
            ga.data[i] -= go.data[i] * std::sin(ta2.data[i]);
    });
}

NodeId Tape::mask_apply(NodeId a, const Tensor& mask) {
    for (double m : mask.data)
        if (m != 0.0 && m != 1.0) throw InvalidInputError("mask_apply: mask entries must be 0 or 1");
    return mul(a, constant(mask));
}

NodeId Tape::matmul(NodeId a, NodeId b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (ta.shape.size() != 2 || tb.shape.size() != 2 || ta.shape[1] != tb.shape[0])
        throw ShapeError("matmul: incompatible shapes " + shape_str(ta.shape) + " x " +
                         shape_str(tb.shape));
    const int n = ta.shape[0], k = ta.shape[1], m = tb.shape[1];
    Tensor out = Tensor::zeros({n, m});
    {
        ConstMatMap A(ta.data.data(), n, k), B(tb.data.data(), k, m);
        MatMap C(out.data.data(), n, m);
        C.noalias() = A * B;
    }
    const bool ng = needs(a) || needs(b);
    return push(std::move(out), ng, false, [a, b, n, k, m](Tape& t, NodeId self) {
        const Tensor& go = t.nodes_[static_cast<size_t>(self)].grad;
        ConstMatMap G(go.data.data(), n, m);
        if (t.needs(a)) {
            ConstMatMap B(t.value(b).data.data(), k, m);
            MatMap GA(t.grad_buf(a).data.data(), n, k);
            GA.noalias() += G * B.transpose();
        }
        if (t.needs(b)) {
            ConstMatMap A(t.value(a).data.data(), n, k);
            MatMap GB(t.grad_buf(b).data.data(), k, m);
            GB.noalias() += A.transpose() * G;
        }
    });
}

NodeId Tape::swap_last2(NodeId a) {
    const Tensor& ta = value(a);
    const size_t rank = ta.shape.size();
    if (rank != 2 && rank != 3) throw ShapeError("swap_last2: rank must be 2 or 3");
    const int batch = rank == 3 ? ta.shape[0] : 1;
    const int r = ta.shape[rank - 2], c = ta.shape[rank - 1];
    Shape out_shape = ta.shape;
    std::swap(out_shape[rank - 2], out_shape[rank - 1]);
    Tensor out = Tensor::zeros(out_shape);
    const size_t plane = static_cast<size_t>(r) * c;
    for (int bb = 0; bb < batch; ++bb) {
        const double* src = ta.data.data() + bb * plane;
        double* dst = out.data.data() + bb * plane;
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) dst[j * r + i] = src[i * c + j];
    }
    return push(std::move(out), needs(a), false, [a, batch, r, c, plane](Tape& t, NodeId self) {
        if (!t.needs(a)) return;
        const Tensor& go = t.nodes_[static_cast<size_t>(self)].grad;
        Tensor& ga = t.grad_buf(a);
        for (int bb = 0; bb < batch; ++bb) {
            const double* src = go.data.data() + bb * plane;
            double* dst = ga.data.data() + bb * plane;
            for (int j = 0; j < c; ++j)
                for (int i = 0; i < r; ++i) dst[i * c + j] += src[j * r + i];
        }
    });
}

NodeId Tape::reshape(NodeId a, Shape s) {
    const Tensor& ta = value(a);
    if (shape_numel(s) != ta.numel())
        throw ShapeError("reshape: element count mismatch " + shape_str(ta.shape) + " -> " +
                         shape_str(s));
    Tensor out(std::move(s), ta.data);
    return push(std::move(out), needs(a), false, [a](Tape& t, NodeId self) {
        if (!t.needs(a)) return;
        t.accumulate(a, t.nodes_[static_cast<size_t>(self)].grad.data);
    });
}

NodeId Tape::slice_row(NodeId a, int row) {
    const Tensor& ta = value(a);
    if (ta.shape.size() != 2 || row < 0 || row >= ta.shape[0])
        throw ShapeError("slice_row: bad row or rank");
    const int cols = ta.shape[1];
    Tensor out = Tensor::zeros({cols});
    std::copy_n(ta.data.begin() + static_cast<size_t>(row) * cols, cols, out.data.begin());
    return push(std::move(out), needs(a), false, [a, row, cols](Tape& t, NodeId self) {
        if (!t.needs(a)) return;
        const Tensor& go = t.nodes_[static_cast<size_t>(self)].grad;
        Tensor& ga = t.grad_buf(a);
        for (int j = 0; j < cols; ++j) ga.data[static_cast<size_t>(row) * cols + j] += go.data[j];
    });
}

NodeId Tape::sum(NodeId a) {
    const Tensor& ta = value(a);
    double s = 0.0;
    for (double v : ta.data) s += v;
    return push(Tensor::scalar(s), needs(a), false, [a](Tape& t, NodeId self) {
        if (!t.needs(a)) return;
        const double g = t.nodes_[static_cast<size_t>(self)].grad.data[0];
        Tensor& ga = t.grad_buf(a);
        for (double& v : ga.data) v += g;
    });
}

NodeId Tape::mean(NodeId a) {
    const int64_t n = value(a).numel();
    return scale(sum(a), 1.0 / static_cast<double>(n));
}

NodeId Tape::sum_per_sample(NodeId a) {
    const Tensor& ta = value(a);
    if (ta.shape.empty()) throw ShapeError("sum_per_sample: rank must be >= 1");
    const int batch = ta.shape[0];
    const size_t per = ta.data.size() / static_cast<size_t>(batch);
    Tensor out = Tensor::zeros({batch});
    for (int b = 0; b < batch; ++b) {
        double s = 0.0;
        for (size_t i = 0; i < per; ++i) s += ta.data[b * per + i];
        out.data[static_cast<size_t>(b)] = s;
    }
    return push(std::move(out), needs(a), false, [a, batch, per](Tape& t, NodeId self) {
        if (!t.needs(a)) return;
        const Tensor& go = t.nodes_[static_cast<size_t>(self)].grad;
        Tensor& ga = t.grad_buf(a);
        for (int b = 0; b < batch; ++b)
            for (size_t i = 0; i < per; ++i) ga.data[b * per + i] += go.data[static_cast<size_t>(b)];
    });
}

NodeId Tape::gather_per_sample(NodeId a, const std::vector<int>& idx, const Shape& out_sample_shape) {
    const Tensor& ta = value(a);
    if (ta.shape.empty()) throw ShapeError("gather_per_sample: rank must be >= 1");
    const int batch = ta.shape[0];
    const size_t per_in = ta.data.size() / static_cast<size_t>(batch);
    const size_t per_out = static_cast<size_t>(shape_numel(out_sample_shape));
    if (idx.size() != per_out) throw ShapeError("gather_per_sample: index count != output size");
    for (int i : idx)
        if (i < 0 || static_cast<size_t>(i) >= per_in)
            throw ShapeError("gather_per_sample: index out of range");
    Shape out_shape{batch};
    out_shape.insert(out_shape.end(), out_sample_shape.begin(), out_sample_shape.end());
    Tensor out = Tensor::zeros(out_shape);
    for (int b = 0; b < batch; ++b)
        for (size_t j = 0; j < per_out; ++j)
            out.data[b * per_out + j] = ta.data[b * per_in + static_cast<size_t>(idx[j])];
    return push(std::move(out), needs(a), false,
                [a, idx, batch, per_in, per_out](Tape& t, NodeId self) {
                    if (!t.needs(a)) return;
                    const Tensor& go = t.nodes_[static_cast<size_t>(self)].grad;
                    Tensor& ga = t.grad_buf(a);
                    for (int b = 0; b < batch; ++b)
                        for (size_t j = 0; j < per_out; ++j)
                            ga.data[b * per_in + static_cast<size_t>(idx[j])] +=
                                go.data[b * per_out + j];
                });
}

NodeId Tape::batchnorm(NodeId x, NodeId gamma, NodeId beta, BatchNormState& state, Mode mode,
                       int stat_row) {
    const Tensor& tx = value(x);
    if (tx.shape.size() != 2) throw ShapeError("batchnorm: input must be (rows, features)");
    const int rows = tx.shape[0], feats = tx.shape[1];
    if (state.running_mean.numel() % feats != 0 ||
        static_cast<int64_t>(stat_row + 1) * feats > state.running_mean.numel())
        throw ShapeError("batchnorm: state feature count mismatch");
    if (value(gamma).numel() != feats || value(beta).numel() != feats)
        throw ShapeError("batchnorm: gamma/beta feature count mismatch");
    const size_t off = static_cast<size_t>(stat_row) * feats;

    std::vector<double> mu(feats), var(feats);
    if (mode == Mode::training) {
        if (rows < 2) throw DegenerateBatchError("batchnorm training needs >= 2 rows");
        for (int j = 0; j < feats; ++j) {
            double s = 0.0;
            for (int i = 0; i < rows; ++i) s += tx.data[static_cast<size_t>(i) * feats + j];
            mu[j] = s / rows;
        }
        for (int j = 0; j < feats; ++j) {
            double s = 0.0;
            for (int i = 0; i < rows; ++i) {
                const double d = tx.data[static_cast<size_t>(i) * feats + j] - mu[j];
                s += d * d;
            }
            var[j] = s / rows; // biased, used for normalization
        }
        const double mom = state.momentum;
        for (int j = 0; j < feats; ++j) {
            state.running_mean.data[off + j] =
                (1.0 - mom) * state.running_mean.data[off + j] + mom * mu[j];
            state.running_var.data[off + j] =
                (1.0 - mom) * state.running_var.data[off + j] + mom * var[j] * rows / (rows - 1.0);
        }
    } else {
        for (int j = 0; j < feats; ++j) {
            mu[j] = state.running_mean.data[off + j];
            var[j] = state.running_var.data[off + j];
        }
    }

    std::vector<double> inv_std(feats);
    for (int j = 0; j < feats; ++j) inv_std[j] = 1.0 / std::sqrt(var[j] + state.epsilon);

    const Tensor& tg = value(gamma);
    const Tensor& tb = value(beta);
    Tensor out = Tensor::zeros(tx.shape);
    std::vector<double> xhat(tx.data.size());
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < feats; ++j) {
            const size_t k = static_cast<size_t>(i) * feats + j;
            xhat[k] = (tx.data[k] - mu[j]) * inv_std[j];
            out.data[k] = tg.data[static_cast<size_t>(j)] * xhat[k] + tb.data[static_cast<size_t>(j)];
        }

    const bool ng = needs(x) || needs(gamma) || needs(beta);
    const bool train = mode == Mode::training;
    return push(std::move(out), ng, false,
                [x, gamma, beta, rows, feats, inv_std, xhat, train](Tape& t, NodeId self) {
                    const Tensor& go = t.nodes_[static_cast<size_t>(self)].grad;
                    const Tensor& tg = t.value(gamma);
                    if (t.needs(gamma)) {
                        Tensor& gg = t.grad_buf(gamma);
                        for (int i = 0; i < rows; ++i)
                            for (int j = 0; j < feats; ++j) {
                                const size_t k = static_cast<size_t>(i) * feats + j;
                                gg.data[static_cast<size_t>(j)] += go.data[k] * xhat[k];
                            }
                    }
                    if (t.needs(beta)) {
                        Tensor& gb = t.grad_buf(beta);
                        for (int i = 0; i < rows; ++i)
                            for (int j = 0; j < feats; ++j)
                                gb.data[static_cast<size_t>(j)] +=
                                    go.data[static_cast<size_t>(i) * feats + j];
                    }
                    if (!t.needs(x)) return;
                    Tensor& gx = t.grad_buf(x);
                    if (!train) {
                        // frozen statistics: y is affine in x
                        for (int i = 0; i < rows; ++i)
                            for (int j = 0; j < feats; ++j) {
                                const size_t k = static_cast<size_t>(i) * feats + j;
                                gx.data[k] += go.data[k] * tg.data[static_cast<size_t>(j)] * inv_std[j];
                            }
                        return;
                    }
                    // batch statistics participate in the gradient
                    for (int j = 0; j < feats; ++j) {
                        double sum_dy = 0.0, sum_dy_xhat = 0.0;
                        for (int i = 0; i < rows; ++i) {
                            const size_t k = static_cast<size_t>(i) * feats + j;
                            sum_dy += go.data[k];
                            sum_dy_xhat += go.data[k] * xhat[k];
                        }
                        const double g = tg.data[static_cast<size_t>(j)];
                        for (int i = 0; i < rows; ++i) {
                            const size_t k = static_cast<size_t>(i) * feats + j;
                            gx.data[k] += g * inv_std[j] *
                                          (go.data[k] - sum_dy / rows - xhat[k] * sum_dy_xhat / rows);
                        }
                    }
                });
}

NodeId Tape::quantize_symmetric(NodeId a, int bits) {
    if (bits < 2 || bits > 30) throw ConfigError("quantize_symmetric: bits out of range");
    const Tensor& ta = value(a);
    double m = 0.0;
    for (double v : ta.data) m = std::max(m, std::abs(v));
    Tensor out = ta;
    if (m > 0.0) {
        const double levels = static_cast<double>((1 << (bits - 1)) - 1);
        for (double& v : out.data) v = std::round(v / m * levels) / levels * m;
    }
    return push(std::move(out), needs(a), false, [a](Tape& t, NodeId self) {
        if (!t.needs(a)) return; // straight-through
        t.accumulate(a, t.nodes_[static_cast<size_t>(self)].grad.data);
    });
}

NodeId Tape::per_sample_scalar(NodeId a,
                               std::function<double(std::span<const double>)> f,
                               std::function<std::vector<double>(std::span<const double>)> grad_f) {
    const Tensor& ta = value(a);
    if (ta.shape.empty()) throw ShapeError("per_sample_scalar: rank must be >= 1");
    const int batch = ta.shape[0];
    const size_t per = ta.data.size() / static_cast<size_t>(batch);
    Tensor out = Tensor::zeros({batch});
    for (int b = 0; b < batch; ++b)
        out.data[static_cast<size_t>(b)] = f(std::span<const double>(ta.data.data() + b * per, per));
    return push(std::move(out), needs(a), false,
                [a, grad_f = std::move(grad_f), batch, per](Tape& t, NodeId self) {
                    if (!t.needs(a)) return;
                    const Tensor& go = t.nodes_[static_cast<size_t>(self)].grad;
                    const Tensor& ta2 = t.value(a);
                    Tensor& ga = t.grad_buf(a);
                    for (int b = 0; b < batch; ++b) {
                        const double gb = go.data[static_cast<size_t>(b)];
                        if (gb == 0.0) continue;
                        const std::vector<double> g =
                            grad_f(std::span<const double>(ta2.data.data() + b * per, per));
                        for (size_t i = 0; i < per; ++i) ga.data[b * per + i] += gb * g[i];
                    }
                });
}

void Tape::backward(NodeId seed) {
    Node& s = nodes_[static_cast<size_t>(seed)];
    if (s.value.numel() != 1) throw InvalidInputError("backward: seed must be a scalar node");
    if (!s.needs_grad) return;
    grad_buf(seed).data[0] = 1.0;
    for (NodeId id = seed; id >= 0; --id) {
        Node& n = nodes_[static_cast<size_t>(id)];
        if (!n.needs_grad || n.grad.data.empty()) {
            // unreached or constant; still release if intermediate
            if (!n.is_leaf && id != seed) {
                n.value.data.clear();
                n.value.data.shrink_to_fit();
            }
            continue;
        }
        if (n.back) n.back(*this, id);
        if (!n.is_leaf) { // reverse sweep has passed: buffers no longer needed
            n.value.data.clear();
            n.value.data.shrink_to_fit();
            n.grad.data.clear();
            n.grad.data.shrink_to_fit();
        }
    }
}

double grad_check(const std::function<NodeId(Tape&, NodeId)>& fn, const Tensor& point, double h) {
    std::vector<double> analytic;
    {
        Tape tape;
        NodeId x = tape.leaf(point);
        NodeId y = fn(tape, x);
        tape.backward(y);
        analytic = tape.grad(x).data;
    }
    const auto eval = [&](const Tensor& p) {
        Tape tape;
        NodeId x = tape.constant(p);
        NodeId y = fn(tape, x);
        return tape.value(y).data[0];
    };
    double worst = 0.0;
    Tensor p = point;
    for (size_t i = 0; i < p.data.size(); ++i) {
        const double orig = p.data[i];
        p.data[i] = orig + h;
        const double up = eval(p);
        p.data[i] = orig - h;
        const double dn = eval(p);
        p.data[i] = orig;
        const double fd = (up - dn) / (2.0 * h);
        const double ad = analytic[i];
        const double denom = std::max({std::abs(ad), std::abs(fd), 1.0});
        worst = std::max(worst, std::abs(ad - fd) / denom);
    }
    return worst;
}

} // namespace lft
