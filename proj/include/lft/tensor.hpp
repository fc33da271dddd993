#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lft/errors.hpp"

namespace lft {

using Shape = std::vector<int>;

int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

/// Dense row-major 64-bit tensor. Plain value type; immutable by
/// convention once handed to a Tape.
struct Tensor {
    Shape shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(Shape s, std::vector<double> d);

    static Tensor zeros(const Shape& s);
    static Tensor full(const Shape& s, double v);
    static Tensor scalar(double v) { return full({1}, v); }

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    double& operator[](size_t i) { return data[i]; }
    double operator[](size_t i) const { return data[i]; }

    bool all_finite() const;
};

/// Running batch-normalization statistics for one normalization site.
/// gamma/beta live in the owning weight struct; this carries only the
/// buffers. Inference mode never mutates them. A site reused in several
/// contexts (one per flow timestep) keeps one statistics row per context.
struct BatchNormState {
    Tensor running_mean; // (rows, features) or (features)
    Tensor running_var;
    double momentum = 0.1;
    double epsilon = 1e-5;

    static BatchNormState init(int features, int rows = 1) {
        if (rows == 1)
            return BatchNormState{Tensor::zeros({features}), Tensor::full({features}, 1.0)};
        return BatchNormState{Tensor::zeros({rows, features}),
                              Tensor::full({rows, features}, 1.0)};
    }
};

enum class Mode { training, inference };

using NodeId = int32_t;

// ---------------------------------------------------------------------------
// Tape
//
// Define-by-run reverse-mode graph. Nodes are appended in topological
// order (every input precedes its consumers); backward() walks the
// recorded list in exact reverse order, accumulating into per-node
// gradient buffers. Intermediate buffers are released as the reverse
// sweep passes them, so read values before calling backward() and leaf
// gradients after.
// ---------------------------------------------------------------------------
class Tape {
public:
    /// Differentiable input (parameter). Gradient is retained through backward().
    NodeId leaf(Tensor v);
    /// Non-differentiable input; backward never propagates into it.
    NodeId constant(Tensor v);

    // Elementwise. Binary ops require identical shapes, or b's shape equal
    // to a suffix of a's (b is broadcast over the leading dimensions and
    // its gradient reduced over them).
    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    NodeId neg(NodeId a);
    NodeId scale(NodeId a, double c);
    NodeId relu(NodeId a);
    NodeId exp(NodeId a);      // throws NumericRangeError if any input > 700
    NodeId cos(NodeId a);

    /// Elementwise multiply by a constant {0,1} tensor (suffix-broadcast).
    NodeId mask_apply(NodeId a, const Tensor& mask);

    /// (n,k) x (k,m) -> (n,m).
    NodeId matmul(NodeId a, NodeId b);

    /// Swap the last two axes of a 2-D or 3-D tensor.
    NodeId swap_last2(NodeId a);

    NodeId reshape(NodeId a, Shape s);

    /// Row r of a 2-D tensor as a 1-D tensor.
    NodeId slice_row(NodeId a, int row);

    // Reductions.
    NodeId sum(NodeId a);   // -> scalar {1}
    NodeId mean(NodeId a);  // -> scalar {1}
    /// Treats a as (B, rest...) and sums everything but the first axis -> (B).
    NodeId sum_per_sample(NodeId a);

    /// Per-sample index map: a viewed as (B, Ni), output (B, out_sample_shape)
    /// with out[b, j] = a[b, idx[j]]. Backward scatter-adds, so duplicate
    /// indices are allowed.
    NodeId gather_per_sample(NodeId a, const std::vector<int>& idx, const Shape& out_sample_shape);

    /// Batchnorm over a (rows, features) matrix: per-feature statistics
    /// across rows. Training mode uses batch statistics and updates `state`
    /// (biased variance to normalize, unbiased into the running buffer);
    /// inference mode uses the frozen running statistics and is a pure
    /// function. Training with fewer than 2 rows throws DegenerateBatchError.
    /// `stat_row` selects the statistics row of a multi-context state.
    NodeId batchnorm(NodeId x, NodeId gamma, NodeId beta, BatchNormState& state, Mode mode,
                     int stat_row = 0);

    /// Symmetric uniform quantizer with 2^(bits-1)-1 levels per side over
    /// [-max|x|, max|x|]; straight-through (identity) backward. Models a
    /// DAC/ADC conversion around an analog matrix multiply.
    NodeId quantize_symmetric(NodeId a, int bits);

    /// Scalar-per-sample custom function: a viewed as (B, V); out (B) with
    /// out[b] = f(a[b,:]), backward adds grad_out[b] * grad_f(a[b,:]).
    NodeId per_sample_scalar(NodeId a,
                             std::function<double(std::span<const double>)> f,
                             std::function<std::vector<double>(std::span<const double>)> grad_f);

    /// Reverse sweep from a scalar seed node (grad 1). Releases
    /// intermediate node buffers as it goes; leaves keep value and grad.
    void backward(NodeId seed);

    const Tensor& value(NodeId id) const { return nodes_[static_cast<size_t>(id)].value; }
    const Tensor& grad(NodeId id) const { return nodes_[static_cast<size_t>(id)].grad; }
    size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad; // allocated lazily
        std::function<void(Tape&, NodeId)> back; // empty for inputs
        bool needs_grad = false;
        bool is_leaf = false;
    };

    NodeId push(Tensor value, bool needs_grad, bool is_leaf,
                std::function<void(Tape&, NodeId)> back);
    Tensor& grad_buf(NodeId id);
    void accumulate(NodeId id, const std::vector<double>& g);
    bool needs(NodeId id) const { return nodes_[static_cast<size_t>(id)].needs_grad; }
    NodeId binary_elementwise(NodeId a, NodeId b, int op); // 0 add, 1 sub, 2 mul

    std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Gradient checking
// ---------------------------------------------------------------------------

/// Builds `fn` (leaf -> scalar node) on a fresh tape, runs backward, and
/// compares the reverse-mode gradient against central finite differences
/// with step h. Returns the max over coordinates of
/// |ad - fd| / max(|ad|, |fd|, 1), i.e. relative for large gradients and
/// absolute near zero.
double grad_check(const std::function<NodeId(Tape&, NodeId)>& fn,
                  const Tensor& point, double h);

} // namespace lft
