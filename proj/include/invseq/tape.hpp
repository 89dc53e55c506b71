#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "invseq/tensor.hpp"

namespace invseq {

// Handle to a node on a Tape.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Reverse-mode gradient tape. Ops append nodes with a backprop closure; the
// graph lives for one batch and is discarded after backward. With recording
// off, ops still compute values (cheap inference path) but skip closures.
class Tape {
public:
    struct Node {
        Tensor value;
        Tensor grad;
        std::function<void(Tape&, int)> backprop;
        bool requires_grad = false;
        bool has_grad = false;
    };

    explicit Tape(bool recording = true) : recording_(recording) {}

    bool recording() const { return recording_; }
    void set_recording(bool on) { recording_ = on; }

    Var leaf(Tensor value, bool requires_grad = false);

    const Tensor& val(Var v) const { return nodes_[v.id].value; }
    const Tensor& val(int id) const { return nodes_[id].value; }
    double scalar(Var v) const { return nodes_[v.id].value[0]; }

    // Gradient of a node after backward; zeros if the node was not reached.
    const Tensor& grad(Var v);

    bool wants_grad(int id) const { return nodes_[id].requires_grad; }

    // Accumulation buffer for a node, allocated on first touch.
    Tensor& grad_buf(int id);

    std::size_t node_count() const { return nodes_.size(); }

    // Runs reverse accumulation from a scalar loss node. Nodes are created in
    // topological order, so a reverse index sweep visits parents before
    // children.
    void backward(Var loss);

    void clear();

    // --- internal: used by op implementations ---
    Var push(Tensor value, bool requires_grad, std::function<void(Tape&, int)> backprop);

private:
    std::vector<Node> nodes_;
    bool recording_ = true;
};

// ---- operations -----------------------------------------------------------
// All ops validate shapes and throw DimensionError / DomainError. Tensors of
// rank 1 are vectors; rank 2 are row-major matrices (rows = batch or rows of
// the math object, stated per op).

// Matrix product a[m x k] * b[k x n] -> [m x n].
Var matmul(Tape& t, Var a, Var b);

// Matrix-vector product a[m x n] * x[n] -> [m].
Var matvec(Tape& t, Var a, Var x);

// Row-vector times matrix: x[m] * a[m x n] -> [n].
Var vecmat(Tape& t, Var x, Var a);

Var add(Tape& t, Var a, Var b);
Var sub(Tape& t, Var a, Var b);
Var mul(Tape& t, Var a, Var b);  // elementwise
Var scale(Tape& t, Var a, double c);

// m[r x c] + v[c] added to every row.
Var add_row_broadcast(Tape& t, Var m, Var v);
// m[r x c] + v[r] added to every column.
Var add_col_broadcast(Tape& t, Var m, Var v);

Var tanh_op(Tape& t, Var a);
Var sigmoid(Tape& t, Var a);

// Softmax over a rank-1 tensor.
Var softmax(Tape& t, Var v);
// Softmax applied to each row of a rank-2 tensor.
Var softmax_rows(Tape& t, Var m);

// -log(p[target]) with probability floor 1e-12. Validates that p is a
// probability vector within 1e-6.
Var cross_entropy(Tape& t, Var p, std::size_t target);
// Mean of per-row cross entropies for a [batch x classes] probability matrix.
Var cross_entropy_rows_mean(Tape& t, Var p, const std::vector<std::size_t>& targets);

// Mean squared difference of two same-shape tensors -> scalar.
Var mse(Tape& t, Var a, Var b);

Var concat(Tape& t, Var a, Var b);       // rank-1 concatenation
Var concat_cols(Tape& t, Var a, Var b);  // [m x p] ++ [m x q] -> [m x (p+q)]

// Stacks K rank-1 tensors of size d as the columns of a [d x K] matrix.
// Repeating a Var is allowed; its gradient accumulates once per occurrence.
Var stack_cols(Tape& t, const std::vector<Var>& columns);

// Zeroes each coordinate independently with probability `rate` when
// `training`; identity otherwise. No inverted rescaling.
Var dropout(Tape& t, Var a, double rate, std::mt19937_64& rng, bool training);

constexpr double kProbFloor = 1e-12;

}  // namespace invseq
