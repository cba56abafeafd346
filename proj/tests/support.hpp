#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "fcmforge/fcm.hpp"
#include "fcmforge/pipeline.hpp"

namespace fcmforge::testing {

inline std::filesystem::path repo_data() { return FCMFORGE_DATA_DIR; }
inline std::filesystem::path test_data() { return FCMFORGE_TEST_DATA_DIR; }
inline std::filesystem::path fixture_article() { return repo_data() / "fixture" / "article.txt"; }
inline std::filesystem::path fixture_llm() { return repo_data() / "fixture" / "llm"; }

inline constexpr const char* ambition = "Rising Power's Ambition & Entitlement";
inline constexpr const char* war = "Likelihood of War";

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag);
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

/// Random bounded FCM over labels L0..L{n-1}; each edge present with probability `density`.
FcmGraph random_fcm(std::mt19937_64& rng, std::size_t n, double density, const std::string& name = "random",
                    std::size_t label_offset = 0);

/// Random FCM with weights from {-1, -0.5, 0, 0.5, 1}.
FcmGraph random_grid_fcm(std::mt19937_64& rng, std::size_t n);

std::vector<double> random_convex(std::mt19937_64& rng, std::size_t m);

/// Every file under `dir`, relative path -> bytes.
std::vector<std::pair<std::string, std::string>> snapshot(const std::filesystem::path& dir);

/// One of the checked-in run configurations under data/fixture, writing to `out`.
RunConfig fixture_config(const std::string& file, const std::filesystem::path& out);

/// Value of column `label` in the last row of a trajectory CSV (quoted headers allowed).
double final_value(const std::string& csv, const std::string& label);

}  // namespace fcmforge::testing
