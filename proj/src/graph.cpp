#include "rpclab/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>

namespace rpclab {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

std::string node_label(int id, OpKind op, const std::string& name) {
    std::string s = "node " + std::to_string(id) + " (" + op_name(op);
    if (!name.empty()) s += " '" + name + "'";
    s += ")";
    return s;
}

}  // namespace

const char* op_name(OpKind k) {
    switch (k) {
        case OpKind::Input: return "input";
        case OpKind::Param: return "param";
        case OpKind::FrozenParam: return "frozen_param";
        case OpKind::Const: return "const";
        case OpKind::Add: return "add";
        case OpKind::Sub: return "sub";
        case OpKind::Mul: return "mul";
        case OpKind::Div: return "div";
        case OpKind::MatMul: return "matmul";
        case OpKind::AddRow: return "add_row";
        case OpKind::ScalarMul: return "scalar_mul";
        case OpKind::Neg: return "neg";
        case OpKind::Relu: return "relu";
        case OpKind::Tanh: return "tanh";
        case OpKind::Sigmoid: return "sigmoid";
        case OpKind::Exp: return "exp";
        case OpKind::Log: return "log";
        case OpKind::Square: return "square";
        case OpKind::Scale: return "scale";
        case OpKind::AddConst: return "add_const";
        case OpKind::MinElem: return "min_elem";
        case OpKind::SquashRange: return "squash_range";
        case OpKind::RowSum: return "row_sum";
        case OpKind::MeanAll: return "mean_all";
        case OpKind::SliceCols: return "slice_cols";
        case OpKind::ConcatCols: return "concat_cols";
        case OpKind::StopGrad: return "stop_grad";
    }
    return "?";
}

int Graph::push(Node n) {
    n.value = Tensor::zeros(n.shape);
    n.grad = Tensor::zeros(n.shape);
    nodes_.push_back(std::move(n));
    forward_done_ = false;
    return static_cast<int>(nodes_.size()) - 1;
}

void Graph::check_id(int id) const {
    if (id < 0 || id >= static_cast<int>(nodes_.size())) fail("graph: bad node id " + std::to_string(id));
}

int Graph::input(const std::string& name, std::vector<int> shape) {
    if (inputs_.count(name)) fail("graph: duplicate input '" + name + "'");
    Node n;
    n.op = OpKind::Input;
    n.shape = std::move(shape);
    n.name = name;
    int id = push(std::move(n));
    inputs_[name] = id;
    return id;
}

int Graph::param(const std::string& name, std::vector<int> shape) {
    // re-declaring the same name is weight sharing
    if (auto it = params_.find(name); it != params_.end()) {
        if (nodes_[it->second].shape != shape) fail("graph: param '" + name + "' re-declared with a new shape");
        return it->second;
    }
    if (frozen_.count(name)) fail("graph: param '" + name + "' already declared frozen");
    Node n;
    n.op = OpKind::Param;
    n.shape = std::move(shape);
    n.name = name;
    int id = push(std::move(n));
    params_[name] = id;
    return id;
}

int Graph::frozen_param(const std::string& name, std::vector<int> shape) {
    if (auto it = frozen_.find(name); it != frozen_.end()) {
        if (nodes_[it->second].shape != shape) fail("graph: param '" + name + "' re-declared with a new shape");
        return it->second;
    }
    if (params_.count(name)) fail("graph: param '" + name + "' already declared trainable");
    Node n;
    n.op = OpKind::FrozenParam;
    n.shape = std::move(shape);
    n.name = name;
    int id = push(std::move(n));
    frozen_[name] = id;
    return id;
}

int Graph::constant(Tensor value) {
    Node n;
    n.op = OpKind::Const;
    n.shape = value.shape;
    int id = push(std::move(n));
    nodes_[id].value = std::move(value);
    return id;
}

int Graph::binary_same_shape(OpKind k, int a, int b) {
    check_id(a);
    check_id(b);
    if (nodes_[a].shape != nodes_[b].shape) {
        fail(std::string("graph: shape mismatch in ") + op_name(k) + ": " + shape_str(nodes_[a].shape) + " vs " +
             shape_str(nodes_[b].shape));
    }
    Node n;
    n.op = k;
    n.a = a;
    n.b = b;
    n.shape = nodes_[a].shape;
    return push(std::move(n));
}

int Graph::unary(OpKind k, int x) {
    check_id(x);
    Node n;
    n.op = k;
    n.a = x;
    n.shape = nodes_[x].shape;
    return push(std::move(n));
}

int Graph::add(int a, int b) { return binary_same_shape(OpKind::Add, a, b); }
int Graph::sub(int a, int b) { return binary_same_shape(OpKind::Sub, a, b); }
int Graph::mul(int a, int b) { return binary_same_shape(OpKind::Mul, a, b); }
int Graph::divide(int a, int b) { return binary_same_shape(OpKind::Div, a, b); }
int Graph::min_elem(int a, int b) { return binary_same_shape(OpKind::MinElem, a, b); }

int Graph::matmul(int a, int b) {
    check_id(a);
    check_id(b);
    const auto& sa = nodes_[a].shape;
    const auto& sb = nodes_[b].shape;
    if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0]) {
        fail("graph: matmul shapes " + shape_str(sa) + " x " + shape_str(sb));
    }
    Node n;
    n.op = OpKind::MatMul;
    n.a = a;
    n.b = b;
    n.shape = {sa[0], sb[1]};
    return push(std::move(n));
}

int Graph::add_row(int m, int v) {
    check_id(m);
    check_id(v);
    const auto& sm = nodes_[m].shape;
    const auto& sv = nodes_[v].shape;
    if (sm.size() != 2 || sv.size() != 1 || sv[0] != sm[1]) {
        fail("graph: add_row shapes " + shape_str(sm) + " + " + shape_str(sv));
    }
    Node n;
    n.op = OpKind::AddRow;
    n.a = m;
    n.b = v;
    n.shape = sm;
    return push(std::move(n));
}

int Graph::scalar_mul(int x, int s) {
    check_id(x);
    check_id(s);
    if (shape_numel(nodes_[s].shape) != 1) fail("graph: scalar_mul needs single-element scalar node");
    Node n;
    n.op = OpKind::ScalarMul;
    n.a = x;
    n.b = s;
    n.shape = nodes_[x].shape;
    return push(std::move(n));
}

int Graph::neg(int x) { return unary(OpKind::Neg, x); }
int Graph::relu(int x) { return unary(OpKind::Relu, x); }
int Graph::tanh_(int x) { return unary(OpKind::Tanh, x); }
int Graph::sigmoid(int x) { return unary(OpKind::Sigmoid, x); }
int Graph::exp_(int x) { return unary(OpKind::Exp, x); }
int Graph::log_(int x) { return unary(OpKind::Log, x); }
int Graph::square(int x) { return unary(OpKind::Square, x); }
int Graph::stop_grad(int x) { return unary(OpKind::StopGrad, x); }

int Graph::scale(int x, double c) {
    int id = unary(OpKind::Scale, x);
    nodes_[id].c0 = c;
    return id;
}

int Graph::add_const(int x, double c) {
    int id = unary(OpKind::AddConst, x);
    nodes_[id].c0 = c;
    return id;
}

int Graph::squash_range(int x, double low, double high) {
    if (!(low < 0.0 && 0.0 < high)) fail("graph: squash_range needs low < 0 < high");
    int id = unary(OpKind::SquashRange, x);
    nodes_[id].c0 = low;
    nodes_[id].c1 = high;
    return id;
}

int Graph::row_sum(int x) {
    check_id(x);
    if (nodes_[x].shape.size() != 2) fail("graph: row_sum needs rank-2 input");
    Node n;
    n.op = OpKind::RowSum;
    n.a = x;
    n.shape = {nodes_[x].shape[0], 1};
    return push(std::move(n));
}

int Graph::mean_all(int x) {
    check_id(x);
    Node n;
    n.op = OpKind::MeanAll;
    n.a = x;
    n.shape = {1, 1};
    return push(std::move(n));
}

int Graph::slice_cols(int x, int begin, int count) {
    check_id(x);
    const auto& s = nodes_[x].shape;
    if (s.size() != 2 || begin < 0 || count < 1 || begin + count > s[1]) {
        fail("graph: slice_cols out of range on " + shape_str(s));
    }
    Node n;
    n.op = OpKind::SliceCols;
    n.a = x;
    n.i0 = begin;
    n.i1 = count;
    n.shape = {s[0], count};
    return push(std::move(n));
}

int Graph::concat_cols(int a, int b) {
    check_id(a);
    check_id(b);
    const auto& sa = nodes_[a].shape;
    const auto& sb = nodes_[b].shape;
    if (sa.size() != 2 || sb.size() != 2 || sa[0] != sb[0]) {
        fail("graph: concat_cols shapes " + shape_str(sa) + ", " + shape_str(sb));
    }
    Node n;
    n.op = OpKind::ConcatCols;
    n.a = a;
    n.b = b;
    n.shape = {sa[0], sa[1] + sb[1]};
    return push(std::move(n));
}

void Graph::mark_output(const std::string& name, int id) {
    check_id(id);
    outputs_[name] = id;
}

int Graph::output_id(const std::string& name) const {
    auto it = outputs_.find(name);
    if (it == outputs_.end()) fail("graph: unknown output '" + name + "'");
    return it->second;
}

void Graph::compute(int id, const TensorMap& inputs, const ParamStore& params) {
    Node& n = nodes_[id];
    double* out = n.value.values.data();
    const int64_t numel = n.value.size();
    const double* x = n.a >= 0 ? nodes_[n.a].value.values.data() : nullptr;
    const double* y = n.b >= 0 ? nodes_[n.b].value.values.data() : nullptr;

    switch (n.op) {
        case OpKind::Input: {
            auto it = inputs.find(n.name);
            if (it == inputs.end()) fail("graph: missing input '" + n.name + "'");
            if (it->second.shape != n.shape) {
                fail("graph: input '" + n.name + "' shape " + shape_str(it->second.shape) + ", declared " +
                     shape_str(n.shape));
            }
            n.value.values = it->second.values;
            break;
        }
        case OpKind::Param:
        case OpKind::FrozenParam: {
            auto it = params.find(n.name);
            if (it == params.end()) fail("graph: missing param '" + n.name + "'");
            if (it->second.shape != n.shape) {
                fail("graph: param '" + n.name + "' shape " + shape_str(it->second.shape) + ", declared " +
                     shape_str(n.shape));
            }
            n.value.values = it->second.values;
            break;
        }
        case OpKind::Const:
            break;
        case OpKind::Add:
            for (int64_t i = 0; i < numel; ++i) out[i] = x[i] + y[i];
            break;
        case OpKind::Sub:
            for (int64_t i = 0; i < numel; ++i) out[i] = x[i] - y[i];
            break;
        case OpKind::Mul:
            for (int64_t i = 0; i < numel; ++i) out[i] = x[i] * y[i];
            break;
        case OpKind::Div:
            for (int64_t i = 0; i < numel; ++i) out[i] = x[i] / y[i];
            break;
        case OpKind::MatMul: {
            const auto& sa = nodes_[n.a].shape;
            kern::matmul(x, y, out, sa[0], sa[1], n.shape[1]);
            break;
        }
        case OpKind::AddRow: {
            const int rows = n.shape[0], cols = n.shape[1];
            for (int i = 0; i < rows; ++i) {
                const double* xi = x + static_cast<int64_t>(i) * cols;
                double* oi = out + static_cast<int64_t>(i) * cols;
                for (int j = 0; j < cols; ++j) oi[j] = xi[j] + y[j];
            }
            break;
        }
        case OpKind::ScalarMul: {
            const double s = y[0];
            for (int64_t i = 0; i < numel; ++i) out[i] = x[i] * s;
            break;
        }
        case OpKind::Neg:
            for (int64_t i = 0; i < numel; ++i) out[i] = -x[i];
            break;
        case OpKind::Relu:
            for (int64_t i = 0; i < numel; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
            break;
        case OpKind::Tanh:
            for (int64_t i = 0; i < numel; ++i) out[i] = std::tanh(x[i]);
            break;
        case OpKind::Sigmoid:
            for (int64_t i = 0; i < numel; ++i) out[i] = 1.0 / (1.0 + std::exp(-x[i]));
            break;
        case OpKind::Exp:
            for (int64_t i = 0; i < numel; ++i) out[i] = std::exp(x[i]);
            break;
        case OpKind::Log:
            for (int64_t i = 0; i < numel; ++i) out[i] = std::log(x[i]);
            break;
        case OpKind::Square:
            for (int64_t i = 0; i < numel; ++i) out[i] = x[i] * x[i];
            break;
        case OpKind::Scale:
            for (int64_t i = 0; i < numel; ++i) out[i] = x[i] * n.c0;
            break;
        case OpKind::AddConst:
            for (int64_t i = 0; i < numel; ++i) out[i] = x[i] + n.c0;
            break;
        case OpKind::MinElem:
            for (int64_t i = 0; i < numel; ++i) out[i] = x[i] <= y[i] ? x[i] : y[i];
            break;
        case OpKind::SquashRange: {
            const double lo = n.c0, hi = n.c1;
            for (int64_t i = 0; i < numel; ++i) {
                const double t = x[i];
                out[i] = t < 0.0 ? -lo * std::tanh(t / (-lo)) : hi * std::tanh(t / hi);
            }
            break;
        }
        case OpKind::RowSum: {
            const auto& sx = nodes_[n.a].shape;
            const int rows = sx[0], cols = sx[1];
            for (int i = 0; i < rows; ++i) {
                const double* xi = x + static_cast<int64_t>(i) * cols;
                double acc = 0.0;
                for (int j = 0; j < cols; ++j) acc += xi[j];
                out[i] = acc;
            }
            break;
        }
        case OpKind::MeanAll: {
            const int64_t nin = nodes_[n.a].value.size();
            double acc = 0.0;
            for (int64_t i = 0; i < nin; ++i) acc += x[i];
            out[0] = acc / static_cast<double>(nin);
            break;
        }
        case OpKind::SliceCols: {
            const auto& sx = nodes_[n.a].shape;
            const int rows = sx[0], in_cols = sx[1];
            for (int i = 0; i < rows; ++i) {
                std::memcpy(out + static_cast<int64_t>(i) * n.i1, x + static_cast<int64_t>(i) * in_cols + n.i0,
                            sizeof(double) * static_cast<size_t>(n.i1));
            }
            break;
        }
        case OpKind::ConcatCols: {
            const int rows = n.shape[0];
            const int ca = nodes_[n.a].shape[1], cb = nodes_[n.b].shape[1];
            for (int i = 0; i < rows; ++i) {
                double* oi = out + static_cast<int64_t>(i) * (ca + cb);
                std::memcpy(oi, x + static_cast<int64_t>(i) * ca, sizeof(double) * static_cast<size_t>(ca));
                std::memcpy(oi + ca, y + static_cast<int64_t>(i) * cb, sizeof(double) * static_cast<size_t>(cb));
            }
            break;
        }
        case OpKind::StopGrad:
            std::memcpy(out, x, sizeof(double) * static_cast<size_t>(numel));
            break;
    }

    if (!n.value.all_finite()) {
        fail("graph: non-finite value at " + node_label(id, n.op, n.name));
    }
}

void Graph::forward(const TensorMap& inputs, const ParamStore& params) {
    for (int id = 0; id < static_cast<int>(nodes_.size()); ++id) compute(id, inputs, params);
    forward_done_ = true;
    backward_done_ = false;
}

void Graph::backward(int out_id) {
    check_id(out_id);
    if (shape_numel(nodes_[out_id].shape) != 1) fail("graph: backward() without gradient needs scalar output");
    Tensor seed = Tensor::full(nodes_[out_id].shape, 1.0);
    backward(out_id, seed);
}

void Graph::backward(int out_id, const Tensor& out_grad) {
    check_id(out_id);
    if (!forward_done_) fail("graph: backward before forward");
    if (out_grad.shape != nodes_[out_id].shape) fail("graph: output gradient shape mismatch");
    for (Node& n : nodes_) std::fill(n.grad.values.begin(), n.grad.values.end(), 0.0);
    nodes_[out_id].grad.values = out_grad.values;
    for (int id = out_id; id >= 0; --id) backprop(id);
    backward_done_ = true;
}

void Graph::backprop(int id) {
    Node& n = nodes_[id];
    const double* g = n.grad.values.data();
    const int64_t numel = n.value.size();
    double* gx = n.a >= 0 ? nodes_[n.a].grad.values.data() : nullptr;
    double* gy = n.b >= 0 ? nodes_[n.b].grad.values.data() : nullptr;
    const double* x = n.a >= 0 ? nodes_[n.a].value.values.data() : nullptr;
    const double* y = n.b >= 0 ? nodes_[n.b].value.values.data() : nullptr;
    const double* v = n.value.values.data();

    switch (n.op) {
        case OpKind::Input:
        case OpKind::Param:
        case OpKind::FrozenParam:
        case OpKind::Const:
        case OpKind::StopGrad:
            break;
        case OpKind::Add:
            for (int64_t i = 0; i < numel; ++i) {
                gx[i] += g[i];
                gy[i] += g[i];
            }
            break;
        case OpKind::Sub:
            for (int64_t i = 0; i < numel; ++i) {
                gx[i] += g[i];
                gy[i] -= g[i];
            }
            break;
        case OpKind::Mul:
            for (int64_t i = 0; i < numel; ++i) {
                gx[i] += g[i] * y[i];
                gy[i] += g[i] * x[i];
            }
            break;
        case OpKind::Div:
            for (int64_t i = 0; i < numel; ++i) {
                gx[i] += g[i] / y[i];
                gy[i] -= g[i] * x[i] / (y[i] * y[i]);
            }
            break;
        case OpKind::MatMul: {
            const auto& sa = nodes_[n.a].shape;
            const int rows = sa[0], inner = sa[1], cols = n.shape[1];
            kern::matmul_bt_acc(g, y, gx, rows, inner, cols);
            kern::matmul_at_acc(x, g, gy, rows, inner, cols);
            break;
        }
        case OpKind::AddRow: {
            const int rows = n.shape[0], cols = n.shape[1];
            for (int i = 0; i < rows; ++i) {
                const double* gi = g + static_cast<int64_t>(i) * cols;
                double* gxi = gx + static_cast<int64_t>(i) * cols;
                for (int j = 0; j < cols; ++j) {
                    gxi[j] += gi[j];
                    gy[j] += gi[j];
                }
            }
            break;
        }
        case OpKind::ScalarMul: {
            const double s = y[0];
            double acc = 0.0;
            for (int64_t i = 0; i < numel; ++i) {
                gx[i] += g[i] * s;
                acc += g[i] * x[i];
            }
            gy[0] += acc;
            break;
        }
        case OpKind::Neg:
            for (int64_t i = 0; i < numel; ++i) gx[i] -= g[i];
            break;
        case OpKind::Relu:
            for (int64_t i = 0; i < numel; ++i) gx[i] += x[i] > 0.0 ? g[i] : 0.0;
            break;
        case OpKind::Tanh:
            for (int64_t i = 0; i < numel; ++i) gx[i] += g[i] * (1.0 - v[i] * v[i]);
            break;
        case OpKind::Sigmoid:
            for (int64_t i = 0; i < numel; ++i) gx[i] += g[i] * v[i] * (1.0 - v[i]);
            break;
        case OpKind::Exp:
            for (int64_t i = 0; i < numel; ++i) gx[i] += g[i] * v[i];
            break;
        case OpKind::Log:
            for (int64_t i = 0; i < numel; ++i) gx[i] += g[i] / x[i];
            break;
        case OpKind::Square:
            for (int64_t i = 0; i < numel; ++i) gx[i] += 2.0 * x[i] * g[i];
            break;
        case OpKind::Scale:
            for (int64_t i = 0; i < numel; ++i) gx[i] += g[i] * n.c0;
            break;
        case OpKind::AddConst:
            for (int64_t i = 0; i < numel; ++i) gx[i] += g[i];
            break;
        case OpKind::MinElem:
            for (int64_t i = 0; i < numel; ++i) {
                if (x[i] <= y[i]) {
                    gx[i] += g[i];
                } else {
                    gy[i] += g[i];
                }
            }
            break;
        case OpKind::SquashRange: {
            const double lo = n.c0, hi = n.c1;
            for (int64_t i = 0; i < numel; ++i) {
                const double bound = x[i] < 0.0 ? -lo : hi;
                const double th = std::tanh(x[i] / bound);
                gx[i] += g[i] * (1.0 - th * th);
            }
            break;
        }
        case OpKind::RowSum: {
            const auto& sx = nodes_[n.a].shape;
            const int rows = sx[0], cols = sx[1];
            for (int i = 0; i < rows; ++i) {
                double* gxi = gx + static_cast<int64_t>(i) * cols;
                const double gi = g[i];
                for (int j = 0; j < cols; ++j) gxi[j] += gi;
            }
            break;
        }
        case OpKind::MeanAll: {
            const int64_t nin = nodes_[n.a].value.size();
            const double gi = g[0] / static_cast<double>(nin);
            for (int64_t i = 0; i < nin; ++i) gx[i] += gi;
            break;
        }
        case OpKind::SliceCols: {
            const auto& sx = nodes_[n.a].shape;
            const int rows = sx[0], in_cols = sx[1];
            for (int i = 0; i < rows; ++i) {
                double* gxi = gx + static_cast<int64_t>(i) * in_cols + n.i0;
                const double* gi = g + static_cast<int64_t>(i) * n.i1;
                for (int j = 0; j < n.i1; ++j) gxi[j] += gi[j];
            }
            break;
        }
        case OpKind::ConcatCols: {
            const int rows = n.shape[0];
            const int ca = nodes_[n.a].shape[1], cb = nodes_[n.b].shape[1];
            for (int i = 0; i < rows; ++i) {
                const double* gi = g + static_cast<int64_t>(i) * (ca + cb);
                double* gai = gx + static_cast<int64_t>(i) * ca;
                double* gbi = gy + static_cast<int64_t>(i) * cb;
                for (int j = 0; j < ca; ++j) gai[j] += gi[j];
                for (int j = 0; j < cb; ++j) gbi[j] += gi[ca + j];
            }
            break;
        }
    }
}

const Tensor& Graph::value(int id) const {
    check_id(id);
    if (!forward_done_) fail("graph: value() before forward");
    return nodes_[id].value;
}

const Tensor& Graph::grad(int id) const {
    check_id(id);
    if (!backward_done_) fail("graph: grad() before backward");
    return nodes_[id].grad;
}

const Tensor& Graph::output_grad_of_input(const std::string& name) const {
    auto it = inputs_.find(name);
    if (it == inputs_.end()) fail("graph: unknown input '" + name + "'");
    return grad(it->second);
}

TensorMap Graph::param_grads() const {
    if (!backward_done_) fail("graph: param_grads() before backward");
    TensorMap out;
    for (const auto& [name, id] : params_) out[name] = nodes_[id].grad;
    return out;
}

std::vector<std::string> Graph::param_names() const {
    std::vector<std::string> out;
    for (const auto& [name, id] : params_) out.push_back(name);
    return out;
}

double Graph::min_kink_margin() const {
    if (!forward_done_) fail("graph: min_kink_margin() before forward");
    double margin = std::numeric_limits<double>::infinity();
    for (const Node& n : nodes_) {
        if (n.op == OpKind::Relu) {
            const auto& xv = nodes_[n.a].value.values;
            for (double v : xv) margin = std::min(margin, std::fabs(v));
        } else if (n.op == OpKind::MinElem) {
            const auto& av = nodes_[n.a].value.values;
            const auto& bv = nodes_[n.b].value.values;
            for (size_t i = 0; i < av.size(); ++i) margin = std::min(margin, std::fabs(av[i] - bv[i]));
        }
    }
    return margin;
}

const std::vector<int>& Graph::node_shape(int id) const {
    check_id(id);
    return nodes_[id].shape;
}

uint64_t Graph::kink_signature() const {
    if (!forward_done_) fail("graph: kink_signature() before forward");
    uint64_t h = 1469598103934665603ULL;  // FNV offset
    auto mix_bit = [&h](bool b) {
        h ^= b ? 0x9eULL : 0x31ULL;
        h *= 1099511628211ULL;
    };
    for (const Node& n : nodes_) {
        if (n.op == OpKind::Relu) {
            for (double v : nodes_[n.a].value.values) mix_bit(v > 0.0);
        } else if (n.op == OpKind::MinElem) {
            const auto& av = nodes_[n.a].value.values;
            const auto& bv = nodes_[n.b].value.values;
            for (size_t i = 0; i < av.size(); ++i) mix_bit(av[i] <= bv[i]);
        }
    }
    return h;
}

GradCheckReport grad_check(Graph& g, const TensorMap& inputs, const ParamStore& params,
                           const std::string& output_name, double tolerance, double step,
                           int max_coords_per_tensor, uint64_t seed) {
    const int out = g.output_id(output_name);
    g.forward(inputs, params);
    if (shape_numel(g.node_shape(out)) != 1) fail("grad_check: output must be scalar");
    g.backward(out);
    const TensorMap analytic = g.param_grads();

    GradCheckReport report;
    Rng rng(Rng::mix(seed, 0x6772616463686bULL));
    ParamStore probe = params;
    const uint64_t base_sig = g.kink_signature();
    // difference quotients carry roundoff of order eps/step times the loss
    // scale; coordinates far below the dominant gradient are compared at
    // that absolute resolution instead of relative precision
    double grad_scale = 0.0;
    for (const auto& [name, grad] : analytic) {
        for (double v : grad.values) grad_scale = std::max(grad_scale, std::fabs(v));
    }
    const double atol = 1e-4 * std::max(1.0, grad_scale);
    for (const auto& [name, grad] : analytic) {
        GradCheckEntry entry;
        const int64_t n = grad.size();
        std::vector<int64_t> coords;
        if (max_coords_per_tensor > 0 && n > max_coords_per_tensor) {
            for (int i = 0; i < max_coords_per_tensor; ++i) coords.push_back(rng.uniform_index(n));
        } else {
            coords.resize(static_cast<size_t>(n));
            for (int64_t i = 0; i < n; ++i) coords[static_cast<size_t>(i)] = i;
        }
        for (int64_t c : coords) {
            double& slot = probe.at(name).values[static_cast<size_t>(c)];
            const double saved = slot;
            slot = saved + step;
            g.forward(inputs, probe);
            const double up = g.value(out).values[0];
            const uint64_t sig_up = g.kink_signature();
            slot = saved - step;
            g.forward(inputs, probe);
            const double dn = g.value(out).values[0];
            const uint64_t sig_dn = g.kink_signature();
            slot = saved;
            if (sig_up != base_sig || sig_dn != base_sig) {
                // the probe stepped across a relu/min kink; the difference
                // quotient does not estimate a derivative there
                ++entry.coords_skipped;
                continue;
            }
            const double fd = (up - dn) / (2.0 * step);
            const double an = grad.values[static_cast<size_t>(c)];
            const double denom = std::max({std::fabs(fd), std::fabs(an), atol});
            const double rel = std::fabs(fd - an) / denom;
            entry.max_rel_err = std::max(entry.max_rel_err, rel);
            ++entry.coords_checked;
        }
        entry.pass = entry.max_rel_err < tolerance;
        report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
        report.pass = report.pass && entry.pass;
        report.coords_checked += entry.coords_checked;
        report.coords_skipped += entry.coords_skipped;
        report.per_param[name] = entry;
    }
    // restore the original forward/backward state
    g.forward(inputs, params);
    g.backward(out);
    return report;
}

}  // namespace rpclab
