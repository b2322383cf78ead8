#pragma once

#include <functional>
#include <vector>

#include "latentlab/tensor.hpp"

namespace latentlab {

/// One row of an assembled matrix: row `row` of node `node`.
struct RowRef {
    int node;
    int row;
};

enum class Op : uint8_t {
    Input,
    Param,
    AssembleRows,
    Add,
    AddRow,
    MatMul,
    MulElem,
    Scale,
    Gelu,
    LayerNorm,
    CausalAttention,
    RowPatch,
    CrossEntropyMean,
    SumAll,
};

/// Eager reverse-mode autodiff over 2-D tensors. Ops compute their value on
/// creation; backward() walks the tape in reverse. Deterministic: no atomics,
/// fixed accumulation order.
class Graph {
public:
    explicit Graph(bool track_grad = true) : track_(track_grad) {}

    bool tracking() const { return track_; }
    int size() const { return static_cast<int>(nodes_.size()); }

    const Tensor& val(int id) const;
    Tensor& grad(int id);
    bool has_grad(int id) const;

    // ---- leaves ----
    int input(Tensor t);
    /// Parameter leaf. The tensor is referenced, not copied; it must outlive
    /// the graph. `key` identifies it when harvesting gradients.
    int param(const Tensor* t, int key);

    // ---- ops ----
    /// Gather rows from other nodes into a new [n x d] matrix.
    int assemble_rows(const std::vector<RowRef>& rows);
    int add(int a, int b);
    /// [T x d] plus a broadcast [1 x d] row.
    int add_row(int a, int row);
    int matmul(int a, int b);
    int mul_elem(int a, int b);
    int scale(int a, double s);
    int gelu(int a);
    /// Row-wise layer norm with learned gain/bias ([1 x d] nodes).
    int layer_norm(int x, int gain, int bias, double eps = 1e-5);
    /// qkv is [T x 3d] laid out [Q | K | V]; causal softmax attention with
    /// `heads` heads, output [T x d].
    int causal_attention(int qkv, int heads);
    /// Copy of `x` with the given rows replaced by constants. Gradients do
    /// not flow into replaced rows.
    int row_patch(int x, const std::vector<std::pair<int, std::vector<double>>>& rows);
    /// Mean cross-entropy over rows with target >= 0 (max-subtracted LSE).
    /// Rows with target -1 contribute nothing and receive exactly zero grad.
    int cross_entropy_mean(int logits, const std::vector<int>& targets);
    int sum_all(int a);

    /// Reverse pass from a scalar node (seeds with 1).
    void backward(int loss);

    /// Visit accumulated parameter-leaf gradients (zero-grad leaves skipped).
    void visit_param_grads(const std::function<void(int key, const Tensor& grad)>& fn) const;

private:
    struct Node {
        Tensor val;
        Tensor grad;
        const Tensor* ext = nullptr;  // Param leaves reference external storage
        Op op = Op::Input;
        int a = -1, b = -1, c = -1;
        int heads = 0;
        int param_key = -1;
        double factor = 1.0;
        double eps = 0.0;
        std::vector<RowRef> rows;
        std::vector<int> targets;
        std::vector<Tensor> saved;
        bool grad_alloc = false;
    };

    int push(Node n);
    Tensor& ensure_grad(int id);
    void backward_node(int id);

    std::vector<Node> nodes_;
    bool track_;
};

/// Max relative error between the autodiff gradient and central finite
/// differences of `build` at `point`. `build` adds ops mapping a [1 x n]
/// input node to a scalar node.
double grad_check(const std::function<int(Graph&, int)>& build, const Tensor& point, double step);

}  // namespace latentlab
