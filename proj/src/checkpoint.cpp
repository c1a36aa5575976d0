#include "rpclab/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace rpclab::cli {

static_assert(std::endian::native == std::endian::little, "checkpoint format is little-endian");

namespace {

void write_u32(std::ofstream& out, uint32_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof(v)); }

uint32_t read_u32(std::ifstream& in, const char* what) {
    uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) throw std::runtime_error(std::string("checkpoint truncated while reading ") + what);
    return v;
}

// architecture recovered from tensor shapes (encoder/policy layer chain)
agent::Arch derive_arch(const ParamStore& store, int latent_dim) {
    agent::Arch arch;
    arch.latent_dim = latent_dim;
    std::vector<int> enc_outs;
    for (int l = 0;; ++l) {
        auto it = store.find("enc.w" + std::to_string(l));
        if (it == store.end()) break;
        if (it->second.rank() != 2) throw std::runtime_error("checkpoint: encoder weight rank mismatch");
        if (l == 0) arch.obs_dim = it->second.shape[0];
        enc_outs.push_back(it->second.shape[1]);
    }
    if (enc_outs.empty()) throw std::runtime_error("checkpoint: missing encoder tensors");
    arch.hidden.assign(enc_outs.begin(), enc_outs.end() - 1);
    if (enc_outs.back() != 2 * latent_dim) {
        throw std::runtime_error("checkpoint: encoder head does not match the latent dimension");
    }
    std::vector<int> pol_outs;
    for (int l = 0;; ++l) {
        auto it = store.find("policy.w" + std::to_string(l));
        if (it == store.end()) break;
        pol_outs.push_back(it->second.shape[1]);
    }
    if (pol_outs.empty() || pol_outs.back() % 2 != 0) throw std::runtime_error("checkpoint: missing policy tensors");
    arch.act_dim = pol_outs.back() / 2;
    return arch;
}

}  // namespace

void save_checkpoint(const agent::AgentParams& params, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    write_u32(out, static_cast<uint32_t>(params.arch.latent_dim));
    write_u32(out, agent::variant_code(params.variant));
    write_u32(out, static_cast<uint32_t>(params.store.size()));
    for (const auto& [name, tensor] : params.store) {
        write_u32(out, static_cast<uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_u32(out, static_cast<uint32_t>(tensor.rank()));
        for (int d : tensor.shape) write_u32(out, static_cast<uint32_t>(d));
        out.write(reinterpret_cast<const char*>(tensor.values.data()),
                  static_cast<std::streamsize>(tensor.values.size() * sizeof(double)));
    }
    if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

agent::AgentParams load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
        throw std::runtime_error("checkpoint: magic mismatch, not an RPCCKPT1 file");
    }
    agent::AgentParams params;
    const uint32_t latent_dim = read_u32(in, "latent dim");
    params.variant = agent::variant_from_code(read_u32(in, "variant"));
    const uint32_t count = read_u32(in, "tensor count");
    for (uint32_t i = 0; i < count; ++i) {
        const uint32_t name_len = read_u32(in, "name length");
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (!in) throw std::runtime_error("checkpoint truncated while reading a tensor name");
        const uint32_t rank = read_u32(in, "rank");
        std::vector<int> shape;
        int64_t numel = 1;
        for (uint32_t d = 0; d < rank; ++d) {
            const uint32_t dim = read_u32(in, "shape");
            shape.push_back(static_cast<int>(dim));
            numel *= dim;
        }
        std::vector<double> values(static_cast<size_t>(numel));
        in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double)));
        if (!in) throw std::runtime_error("checkpoint truncated while reading values of '" + name + "'");
        params.store[name] = Tensor(std::move(shape), std::move(values));
    }
    if (!params.store.count("log_lambda")) throw std::runtime_error("checkpoint: missing log_lambda");
    params.arch = derive_arch(params.store, static_cast<int>(latent_dim));
    return params;
}

}  // namespace rpclab::cli
