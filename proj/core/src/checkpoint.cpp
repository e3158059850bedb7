#include "setdet/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace setdet {

namespace {

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::ifstream& in, T& v, const std::string& path) {
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw std::runtime_error("checkpoint truncated: " + path);
}

void write_array(std::ofstream& out, const std::string& name, const Mat& m) {
    const uint16_t len = static_cast<uint16_t>(name.size());
    write_pod(out, len);
    out.write(name.data(), len);
    write_pod(out, static_cast<uint32_t>(m.rows));
    write_pod(out, static_cast<uint32_t>(m.cols));
    out.write(reinterpret_cast<const char*>(m.d.data()),
              static_cast<std::streamsize>(m.d.size() * sizeof(double)));
}

void read_array(std::ifstream& in, const std::string& expected_name, Mat& m,
                const std::string& path) {
    uint16_t len = 0;
    read_pod(in, len, path);
    std::string name(len, '\0');
    in.read(name.data(), len);
    if (!in) throw std::runtime_error("checkpoint truncated: " + path);
    if (name != expected_name)
        throw std::runtime_error("checkpoint layout mismatch: expected array '" + expected_name +
                                 "', found '" + name + "' in " + path);
    uint32_t rows = 0, cols = 0;
    read_pod(in, rows, path);
    read_pod(in, cols, path);
    if (static_cast<int>(rows) != m.rows || static_cast<int>(cols) != m.cols)
        throw std::runtime_error("checkpoint shape mismatch for '" + name + "' in " + path);
    in.read(reinterpret_cast<char*>(m.d.data()),
            static_cast<std::streamsize>(m.d.size() * sizeof(double)));
    if (!in) throw std::runtime_error("checkpoint truncated: " + path);
}

}  // namespace

void save_checkpoint(const ModelParams& params, uint64_t config_digest, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    write_pod(out, kCheckpointVersion);
    write_pod(out, config_digest);
    write_pod(out, params.adam_step);
    write_pod(out, static_cast<uint32_t>(params.names.size()));
    for (size_t i = 0; i < params.names.size(); ++i) {
        write_array(out, params.names[i], params.values[i]);
        write_array(out, "m." + params.names[i], params.adam_m[i]);
        write_array(out, "v." + params.names[i], params.adam_v[i]);
    }
    if (!out) throw std::runtime_error("failed writing checkpoint: " + path);
}

ModelParams load_checkpoint(const ModelConfig& cfg, uint64_t expected_digest,
                            const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
        throw std::runtime_error("not a checkpoint file (bad magic): " + path);
    uint32_t version = 0;
    read_pod(in, version, path);
    if (version != kCheckpointVersion)
        throw std::runtime_error("incompatible checkpoint version " + std::to_string(version) +
                                 " (expected " + std::to_string(kCheckpointVersion) + "): " + path);
    uint64_t digest = 0;
    read_pod(in, digest, path);
    if (digest != expected_digest)
        throw std::runtime_error("checkpoint config digest mismatch: refusing to load " + path);

    ModelParams params = ModelParams::init(cfg, 0);
    read_pod(in, params.adam_step, path);
    uint32_t count = 0;
    read_pod(in, count, path);
    if (count != params.names.size())
        throw std::runtime_error("checkpoint parameter count mismatch: " + path);
    for (size_t i = 0; i < params.names.size(); ++i) {
        read_array(in, params.names[i], params.values[i], path);
        read_array(in, "m." + params.names[i], params.adam_m[i], path);
        read_array(in, "v." + params.names[i], params.adam_v[i], path);
    }
    return params;
}

}  // namespace setdet
