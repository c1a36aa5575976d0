#include "rpclab/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace rpclab::cli {

namespace {

[[noreturn]] void config_error(const std::string& key, const std::string& what) {
    throw std::invalid_argument("config key '" + key + "': " + what);
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        config_error(key, "expected a real number, got '" + value + "'");
    }
}

int64_t parse_int(const std::string& key, const std::string& value) {
    try {
        size_t pos = 0;
        const int64_t v = std::stoll(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        config_error(key, "expected an integer, got '" + value + "'");
    }
}

uint64_t parse_u64(const std::string& key, const std::string& value) {
    try {
        size_t pos = 0;
        const uint64_t v = std::stoull(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        config_error(key, "expected an unsigned integer, got '" + value + "'");
    }
}

std::vector<int> parse_hidden(const std::string& key, const std::string& value) {
    std::vector<int> out;
    if (value.empty()) return out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        out.push_back(static_cast<int>(parse_int(key, item)));
    }
    return out;
}

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

}  // namespace

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = {
        "env",        "variant",        "bitrate",       "latent_dim", "hidden",
        "lr",         "dual_lr",        "batch",         "total_steps", "replay_capacity",
        "gamma",      "tau",            "seed",          "out_dir",     "eval_every",
        "eval_episodes", "env.mass_scale", "env.friction_scale", "env.noise_scale",
    };
    return keys;
}

void apply_override(RunConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "env") {
        envs::env_kind_from_name(value);  // throws on unknown
        cfg.env = value;
    } else if (key == "variant") {
        agent::variant_from_name(value);
        cfg.variant = value;
    } else if (key == "bitrate") {
        cfg.bitrate = parse_double(key, value);
    } else if (key == "latent_dim") {
        cfg.latent_dim = static_cast<int>(parse_int(key, value));
    } else if (key == "hidden") {
        cfg.hidden = parse_hidden(key, value);
    } else if (key == "lr") {
        cfg.lr = parse_double(key, value);
    } else if (key == "dual_lr") {
        cfg.dual_lr = parse_double(key, value);
    } else if (key == "batch") {
        cfg.batch = static_cast<int>(parse_int(key, value));
    } else if (key == "total_steps") {
        cfg.total_steps = parse_int(key, value);
    } else if (key == "replay_capacity") {
        cfg.replay_capacity = parse_int(key, value);
    } else if (key == "gamma") {
        cfg.gamma = parse_double(key, value);
    } else if (key == "tau") {
        cfg.tau = parse_double(key, value);
    } else if (key == "seed") {
        cfg.seed = parse_u64(key, value);
    } else if (key == "out_dir") {
        cfg.out_dir = value;
    } else if (key == "eval_every") {
        cfg.eval_every = parse_int(key, value);
    } else if (key == "eval_episodes") {
        cfg.eval_episodes = static_cast<int>(parse_int(key, value));
    } else if (key == "env.mass_scale") {
        cfg.env_mass_scale = parse_double(key, value);
    } else if (key == "env.friction_scale") {
        cfg.env_friction_scale = parse_double(key, value);
    } else if (key == "env.noise_scale") {
        cfg.env_noise_scale = parse_double(key, value);
    } else {
        throw std::invalid_argument("unknown config key '" + key + "'");
    }
}

void RunConfig::validate() const {
    envs::env_kind_from_name(env);
    agent::variant_from_name(variant);
    if (!(bitrate >= 0.0)) config_error("bitrate", "must be >= 0");
    if (latent_dim < 1) config_error("latent_dim", "must be >= 1");
    for (int h : hidden) {
        if (h < 1) config_error("hidden", "layer sizes must be >= 1");
    }
    if (!(lr > 0.0)) config_error("lr", "must be > 0");
    if (!(dual_lr > 0.0)) config_error("dual_lr", "must be > 0");
    if (batch < 1) config_error("batch", "must be >= 1");
    if (total_steps < 1) config_error("total_steps", "must be >= 1");
    if (replay_capacity < batch) config_error("replay_capacity", "must be >= batch");
    if (!(gamma > 0.0 && gamma < 1.0)) config_error("gamma", "must be in (0,1)");
    if (!(tau > 0.0 && tau <= 1.0)) config_error("tau", "must be in (0,1]");
    if (out_dir.empty()) config_error("out_dir", "must be nonempty");
    if (eval_every < 1) config_error("eval_every", "must be >= 1");
    if (eval_episodes < 1) config_error("eval_episodes", "must be >= 1");
    if (env_mass_scale && !(*env_mass_scale > 0.0)) config_error("env.mass_scale", "must be > 0");
    if (env_friction_scale && !(*env_friction_scale > 0.0)) config_error("env.friction_scale", "must be > 0");
    if (env_noise_scale && !(*env_noise_scale >= 0.0)) config_error("env.noise_scale", "must be >= 0");
}

RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key=value, got '" + t +
                                        "'");
        }
        apply_override(cfg, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
    cfg.validate();
    return cfg;
}

RunConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config file not found: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

std::string resolved_text(const RunConfig& cfg) {
    std::ostringstream out;
    out.precision(17);
    out << "env=" << cfg.env << "\n";
    out << "variant=" << cfg.variant << "\n";
    out << "bitrate=" << cfg.bitrate << "\n";
    out << "latent_dim=" << cfg.latent_dim << "\n";
    out << "hidden=";
    for (size_t i = 0; i < cfg.hidden.size(); ++i) out << (i ? "," : "") << cfg.hidden[i];
    out << "\n";
    out << "lr=" << cfg.lr << "\n";
    out << "dual_lr=" << cfg.dual_lr << "\n";
    out << "batch=" << cfg.batch << "\n";
    out << "total_steps=" << cfg.total_steps << "\n";
    out << "replay_capacity=" << cfg.replay_capacity << "\n";
    out << "gamma=" << cfg.gamma << "\n";
    out << "tau=" << cfg.tau << "\n";
    out << "seed=" << cfg.seed << "\n";
    out << "out_dir=" << cfg.out_dir << "\n";
    out << "eval_every=" << cfg.eval_every << "\n";
    out << "eval_episodes=" << cfg.eval_episodes << "\n";
    const envs::EnvSpec spec = env_spec_of(cfg);
    out << "env.mass_scale=" << spec.mass_scale << "\n";
    out << "env.friction_scale=" << spec.friction_scale << "\n";
    out << "env.noise_scale=" << spec.noise_scale << "\n";
    return out.str();
}

envs::EnvSpec env_spec_of(const RunConfig& cfg) {
    envs::EnvSpec spec = envs::make_env_spec(cfg.env);
    if (cfg.env_mass_scale) spec.mass_scale = *cfg.env_mass_scale;
    if (cfg.env_friction_scale) spec.friction_scale = *cfg.env_friction_scale;
    if (cfg.env_noise_scale) spec.noise_scale = *cfg.env_noise_scale;
    return spec;
}

agent::AgentConfig to_agent_config(const RunConfig& cfg) {
    cfg.validate();
    agent::AgentConfig out;
    out.env = env_spec_of(cfg);
    out.variant = agent::variant_from_name(cfg.variant);
    out.budget_bits = cfg.bitrate;
    out.latent_dim = cfg.latent_dim;
    out.hidden = cfg.hidden;
    out.lr = cfg.lr;
    out.dual_lr = cfg.dual_lr;
    out.gamma = cfg.gamma;
    out.tau = cfg.tau;
    out.batch_size = cfg.batch;
    out.replay_capacity = cfg.replay_capacity;
    out.total_steps = cfg.total_steps;
    out.eval_every = cfg.eval_every;
    out.eval_episodes = cfg.eval_episodes;
    out.seed = cfg.seed;
    return out;
}

std::string resolve_out_dir(const RunConfig& cfg) {
    const char* root = std::getenv("RPC_LAB_OUT");
    if (root && *root) {
        return (std::filesystem::path(root) / cfg.out_dir).string();
    }
    return cfg.out_dir;
}

}  // namespace rpclab::cli
