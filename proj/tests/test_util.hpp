#pragma once

#include <unistd.h>

#include <filesystem>
#include <string>

#include "fitrec/geometry.hpp"
#include "fitrec/rng.hpp"

namespace fitrec::testutil {

inline PointCloud random_cloud(std::uint64_t seed, std::size_t n, double scale = 1.0,
                               Vec3 offset = {}) {
    Rng rng(seed);
    PointCloud c;
    c.points.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        c.points.push_back(offset + Vec3{rng.uniform(-1, 1), rng.uniform(-1, 1),
                                         rng.uniform(-1, 1)} *
                                        scale);
    return c;
}

// unique temp dir for a test; removed on destruction
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        path_ = std::filesystem::temp_directory_path() /
                ("fitrec_test_" + tag + "_" + std::to_string(::getpid()));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    std::string str() const { return path_.string(); }
    std::filesystem::path path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace fitrec::testutil
