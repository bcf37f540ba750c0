#pragma once

#include <filesystem>
#include <string>

namespace testutil {

// Fresh scratch directory under the build tree.
inline std::filesystem::path scratch(const std::string &name) {
    const std::filesystem::path p = std::filesystem::path(FRACTALSEA_TEST_TMP) / name;
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

} // namespace testutil
