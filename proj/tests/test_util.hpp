#pragma once

// Shared plumbing for the test binaries: locating the source tree (for
// golden files and fixtures) and provisioning scratch directories.

#include <cstdlib>
#include <filesystem>
#include <string>

namespace testutil {

inline std::filesystem::path source_dir() {
    if (const char* env = std::getenv("APISIM_SOURCE_DIR")) {
        return env;
    }
    return std::filesystem::current_path();
}

inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir =
        std::filesystem::temp_directory_path() / ("apisim_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace testutil
