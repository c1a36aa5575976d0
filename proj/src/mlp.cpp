#include "rpclab/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace rpclab {

void MlpSpec::validate() const {
    if (input_dim < 1 || output_dim < 1) throw std::invalid_argument("MlpSpec: dims must be >= 1");
    for (int h : hidden_dims) {
        if (h < 1) throw std::invalid_argument("MlpSpec: hidden dims must be >= 1");
    }
}

int64_t MlpSpec::param_count() const {
    int64_t total = 0;
    int fan_in = input_dim;
    for (int h : hidden_dims) {
        total += static_cast<int64_t>(fan_in) * h + h;
        fan_in = h;
    }
    total += static_cast<int64_t>(fan_in) * output_dim + output_dim;
    return total;
}

namespace {

std::vector<std::pair<int, int>> layer_dims(const MlpSpec& spec) {
    std::vector<std::pair<int, int>> dims;
    int fan_in = spec.input_dim;
    for (int h : spec.hidden_dims) {
        dims.emplace_back(fan_in, h);
        fan_in = h;
    }
    dims.emplace_back(fan_in, spec.output_dim);
    return dims;
}

}  // namespace

void mlp_init_params(const MlpSpec& spec, const std::string& prefix, ParamStore& store) {
    spec.validate();
    Rng rng(Rng::mix(spec.init_seed, 0x6d6c70696e6974ULL));
    const auto dims = layer_dims(spec);
    for (size_t l = 0; l < dims.size(); ++l) {
        const auto [fan_in, fan_out] = dims[l];
        const double bound = std::sqrt(6.0 / (fan_in + fan_out));
        Tensor w = Tensor::zeros({fan_in, fan_out});
        for (double& v : w.values) v = rng.uniform(-bound, bound);
        store[prefix + "w" + std::to_string(l)] = std::move(w);
        store[prefix + "b" + std::to_string(l)] = Tensor::zeros({fan_out});
    }
}

int mlp_apply(Graph& g, const MlpSpec& spec, const std::string& prefix, int input_node, bool trainable) {
    spec.validate();
    const auto dims = layer_dims(spec);
    int h = input_node;
    for (size_t l = 0; l < dims.size(); ++l) {
        const auto [fan_in, fan_out] = dims[l];
        const std::string wname = prefix + "w" + std::to_string(l);
        const std::string bname = prefix + "b" + std::to_string(l);
        const int w = trainable ? g.param(wname, {fan_in, fan_out}) : g.frozen_param(wname, {fan_in, fan_out});
        const int b = trainable ? g.param(bname, {fan_out}) : g.frozen_param(bname, {fan_out});
        h = g.add_row(g.matmul(h, w), b);
        if (l + 1 < dims.size()) h = g.relu(h);
    }
    return h;
}

BuiltMlp mlp_build(const MlpSpec& spec, int batch, const std::string& prefix) {
    spec.validate();
    if (batch < 1) throw std::invalid_argument("mlp_build: batch must be >= 1");
    BuiltMlp out;
    out.graph = std::make_unique<Graph>();
    mlp_init_params(spec, prefix, out.params);
    const int x = out.graph->input("x", {batch, spec.input_dim});
    const int y = mlp_apply(*out.graph, spec, prefix, x);
    out.graph->mark_output("y", y);
    return out;
}

Tensor mlp_forward(const MlpSpec& spec, const ParamStore& store, const std::string& prefix, const Tensor& x) {
    spec.validate();
    if (x.rank() != 2 || x.shape[1] != spec.input_dim) {
        throw std::invalid_argument("mlp_forward: input shape " + shape_str(x.shape) + ", expected [*," +
                                    std::to_string(spec.input_dim) + "]");
    }
    const auto dims = layer_dims(spec);
    const int batch = x.shape[0];
    Tensor cur = x;
    for (size_t l = 0; l < dims.size(); ++l) {
        const auto [fan_in, fan_out] = dims[l];
        const Tensor& w = store.at(prefix + "w" + std::to_string(l));
        const Tensor& b = store.at(prefix + "b" + std::to_string(l));
        if (w.shape != std::vector<int>{fan_in, fan_out}) {
            throw std::invalid_argument("mlp_forward: weight shape mismatch at layer " + std::to_string(l));
        }
        Tensor next = Tensor::zeros({batch, fan_out});
        kern::matmul(cur.values.data(), w.values.data(), next.values.data(), batch, fan_in, fan_out);
        for (int i = 0; i < batch; ++i) {
            double* row = next.values.data() + static_cast<int64_t>(i) * fan_out;
            for (int j = 0; j < fan_out; ++j) row[j] += b.values[static_cast<size_t>(j)];
        }
        if (l + 1 < dims.size()) {
            for (double& v : next.values) v = v > 0.0 ? v : 0.0;
        }
        cur = std::move(next);
    }
    return cur;
}

}  // namespace rpclab
