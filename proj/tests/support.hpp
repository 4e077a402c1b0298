#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include "vvc/grid_model.hpp"

namespace testing_support {

inline std::filesystem::path data_dir() { return VVC_DATA_DIR; }
inline std::filesystem::path benchmark_path() { return data_dir() / "benchmark.net"; }

inline std::string read_text(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline std::shared_ptr<const vvc::NetworkModel> benchmark() {
    static const auto model = std::make_shared<const vvc::NetworkModel>(vvc::load_network(benchmark_path()));
    return model;
}

/// Inserts a line right after a section header.
inline std::string insert_after_header(std::string text, const std::string& header, const std::string& line) {
    const auto pos = text.find(header + "\n");
    if (pos == std::string::npos) return text;
    text.insert(pos + header.size() + 1, line + "\n");
    return text;
}

}  // namespace testing_support
