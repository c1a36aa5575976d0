#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "rpclab/graph.hpp"
#include "rpclab/tensor.hpp"

namespace rpclab {

// Feedforward net description: input -> hidden (relu) ... -> linear output.
struct MlpSpec {
    int input_dim = 1;
    std::vector<int> hidden_dims;
    int output_dim = 1;
    uint64_t init_seed = 0;

    void validate() const;
    int64_t param_count() const;
};

// Deterministic initialization: weights uniform in +-sqrt(6/(fan_in+fan_out)),
// biases zero. Tensors are named "<prefix>w0", "<prefix>b0", ...
void mlp_init_params(const MlpSpec& spec, const std::string& prefix, ParamStore& store);

// Appends the net to an existing graph and returns the output node.
// Parameters are registered as trainable or frozen under the given prefix.
int mlp_apply(Graph& g, const MlpSpec& spec, const std::string& prefix, int input_node, bool trainable = true);

// Standalone graph with input "x" [batch, input_dim] and output "y".
struct BuiltMlp {
    std::unique_ptr<Graph> graph;
    ParamStore params;
};
BuiltMlp mlp_build(const MlpSpec& spec, int batch = 1, const std::string& prefix = "mlp.");

// Plain forward pass (no tape) over a batch, using the same kernels as the
// graph executor so results match bit for bit.
Tensor mlp_forward(const MlpSpec& spec, const ParamStore& store, const std::string& prefix, const Tensor& x);

}  // namespace rpclab
