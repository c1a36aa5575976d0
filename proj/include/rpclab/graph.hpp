#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rpclab/tensor.hpp"

namespace rpclab {

using TensorMap = std::map<std::string, Tensor>;
// All learnable weights live in a ParamStore keyed by name; graphs bind to it
// at forward time. A copy of the store is an immutable parameter snapshot.
using ParamStore = TensorMap;

enum class OpKind : uint8_t {
    Input,
    Param,        // trainable, bound from the store, gradient reported
    FrozenParam,  // bound from the store, no gradient reported
    Const,
    Add,
    Sub,
    Mul,
    Div,
    MatMul,
    AddRow,     // [B,n] + [n] broadcast over rows
    ScalarMul,  // x * s where s is a single-element node
    Neg,
    Relu,
    Tanh,
    Sigmoid,
    Exp,
    Log,
    Square,
    Scale,       // x * c0
    AddConst,    // x + c0
    MinElem,
    SquashRange,  // c0 = low, c1 = high
    RowSum,       // [B,n] -> [B,1]
    MeanAll,      // -> [1,1]
    SliceCols,    // i0 = begin, i1 = count
    ConcatCols,
    StopGrad,
};

const char* op_name(OpKind k);

// Static computation graph over f64 tensors. Nodes are appended in
// topological order by construction; forward runs them once per call into
// preallocated buffers, backward walks them in reverse.
class Graph {
public:
    int input(const std::string& name, std::vector<int> shape);
    int param(const std::string& name, std::vector<int> shape);
    int frozen_param(const std::string& name, std::vector<int> shape);
    int constant(Tensor value);

    int add(int a, int b);
    int sub(int a, int b);
    int mul(int a, int b);
    int divide(int a, int b);
    int matmul(int a, int b);
    int add_row(int m, int v);
    int scalar_mul(int x, int s);
    int neg(int x);
    int relu(int x);
    int tanh_(int x);
    int sigmoid(int x);
    int exp_(int x);
    int log_(int x);
    int square(int x);
    int scale(int x, double c);
    int add_const(int x, double c);
    int min_elem(int a, int b);
    int squash_range(int x, double low, double high);
    int row_sum(int x);
    int mean_all(int x);
    int slice_cols(int x, int begin, int count);
    int concat_cols(int a, int b);
    int stop_grad(int x);

    void mark_output(const std::string& name, int id);
    int output_id(const std::string& name) const;

    // Runs every node. Throws on shape mismatch or non-finite values (the
    // error names the offending node).
    void forward(const TensorMap& inputs, const ParamStore& params);
    void forward(const TensorMap& inputs) { forward(inputs, ParamStore{}); }

    // Seeds the output gradient and accumulates into every node; fan-out adds.
    void backward(int out_id);
    void backward(int out_id, const Tensor& out_grad);

    const Tensor& value(int id) const;
    const Tensor& grad(int id) const;
    const Tensor& output(const std::string& name) const { return value(output_id(name)); }
    const Tensor& output_grad_of_input(const std::string& name) const;

    // Gradients of trainable params, keyed by name.
    TensorMap param_grads() const;
    std::vector<std::string> param_names() const;

    // Smallest distance to a non-differentiable kink (relu at 0, min at a
    // tie) observed in the last forward. Finite-difference checks are only
    // meaningful away from kinks.
    double min_kink_margin() const;
    // Hash of the relu sign pattern and min-branch selections of the last
    // forward; a probe that changes it has crossed a kink.
    uint64_t kink_signature() const;

    int node_count() const { return static_cast<int>(nodes_.size()); }
    const std::vector<int>& node_shape(int id) const;

private:
    struct Node {
        OpKind op;
        int a = -1, b = -1;
        double c0 = 0.0, c1 = 0.0;
        int i0 = 0, i1 = 0;
        std::vector<int> shape;
        Tensor value;
        Tensor grad;
        std::string name;
    };

    int push(Node n);
    int unary(OpKind k, int x);
    int binary_same_shape(OpKind k, int a, int b);
    void check_id(int id) const;
    void compute(int id, const TensorMap& inputs, const ParamStore& params);
    void backprop(int id);

    std::vector<Node> nodes_;
    std::map<std::string, int> inputs_;
    std::map<std::string, int> params_;   // trainable
    std::map<std::string, int> frozen_;
    std::map<std::string, int> outputs_;
    bool forward_done_ = false;
    bool backward_done_ = false;
};

struct GradCheckEntry {
    double max_rel_err = 0.0;
    bool pass = true;
    int coords_checked = 0;
    int coords_skipped = 0;  // probes that crossed a relu/min kink
};

struct GradCheckReport {
    double max_rel_err = 0.0;
    bool pass = true;
    int coords_checked = 0;
    int coords_skipped = 0;
    std::map<std::string, GradCheckEntry> per_param;
};

// Central-difference check of d(output)/d(param) for every trainable
// parameter of the graph. When max_coords_per_tensor > 0, a random subset of
// coordinates per tensor is probed (seeded); otherwise all coordinates.
GradCheckReport grad_check(Graph& g, const TensorMap& inputs, const ParamStore& params,
                           const std::string& output_name, double tolerance, double step = 1e-5,
                           int max_coords_per_tensor = 0, uint64_t seed = 0);

}  // namespace rpclab
