#pragma once

// Run manifests: every CLI command that writes artifacts records its inputs
// (content-hashed), configuration and outputs next to the result, so a rerun
// with identical inputs is verifiable byte for byte.

#include <string>
#include <vector>

#include "csnlg/util.hpp"

namespace csnlg {

class Manifest {
public:
    explicit Manifest(std::string command) : command_(std::move(command)) {}

    void set_seed(std::uint64_t seed) { config("seed", std::to_string(seed)); }

    void config(const std::string& key, const std::string& value) { config_.emplace_back(key, value); }

    void input(const std::string& path) {
        inputs_.emplace_back(path, Sha1::of(read_file(path)));
    }

    void output(const std::string& path) { outputs_.push_back(path); }

    std::string to_text() const {
        std::string cfg_blob;
        for (const auto& [k, v] : config_) cfg_blob += k + "=" + v + "\n";
        std::string out;
        out += "command: " + command_ + "\n";
        out += "config-hash: " + Sha1::of(cfg_blob) + "\n";
        for (const auto& [k, v] : config_) out += "config." + k + ": " + v + "\n";
        for (const auto& [path, hash] : inputs_) out += "input: " + hash + "  " + path + "\n";
        for (const auto& path : outputs_) out += "output: " + path + "\n";
        return out;
    }

    void write(const std::string& path) const { write_file(path, to_text()); }

private:
    std::string command_;
    std::vector<std::pair<std::string, std::string>> config_;
    std::vector<std::pair<std::string, std::string>> inputs_;
    std::vector<std::string> outputs_;
};

}  // namespace csnlg
