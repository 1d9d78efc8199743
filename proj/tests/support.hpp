#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>
#include <vector>

#include "common/error.hpp"
#include "embedder.hpp"

namespace testsupport {

namespace fs = std::filesystem;

inline fs::path fixtures() { return fs::path(INTENTRAG_TEST_DIR) / "fixtures"; }
inline fs::path golden() { return fs::path(INTENTRAG_TEST_DIR) / "golden"; }

class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = fs::temp_directory_path() /
                ("intentrag-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

// Uniform random direction: Gaussian components, normalized.
inline intentrag::EmbeddingVector random_unit(std::mt19937_64& rng, std::size_t dim) {
    std::normal_distribution<float> n(0.0f, 1.0f);
    std::vector<float> v(dim);
    for (auto& x : v) x = n(rng);
    return intentrag::EmbeddingVector::normalized(v);
}

}  // namespace testsupport

#define EXPECT_ERRC(stmt, errc)                                                    \
    do {                                                                           \
        try {                                                                      \
            stmt;                                                                  \
            ADD_FAILURE() << "expected " << intentrag::errc_name(errc);            \
        } catch (const intentrag::Error& e_) {                                     \
            EXPECT_EQ(e_.code(), errc) << e_.what();                               \
        }                                                                          \
    } while (0)
