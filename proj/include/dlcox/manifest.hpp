#pragma once

#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace dlcox {

const char* library_version();

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

/// Everything needed to re-run a command: the resolved configuration,
/// seeds, library version and input digests, plus per-stage timings.
struct RunManifest {
    std::string command;
    std::vector<std::string> argv;
    nlohmann::json config = nlohmann::json::object();
    std::map<std::string, std::uint64_t> seeds;
    std::map<std::string, std::string> input_digests;  // path -> sha256
    std::vector<std::pair<std::string, double>> timings;  // stage -> seconds

    void add_input(const std::filesystem::path& path);

    /// SHA-256 over the reproducibility-relevant content (timings excluded).
    std::string digest() const;
    nlohmann::json to_json() const;
};

/// Appends the elapsed time of its scope to a manifest as one stage.
class StageTimer {
public:
    StageTimer(RunManifest& manifest, std::string stage)
        : manifest_(manifest), stage_(std::move(stage)), start_(std::chrono::steady_clock::now()) {}
    ~StageTimer() {
        const auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        manifest_.timings.emplace_back(stage_, secs);
    }
    StageTimer(const StageTimer&) = delete;
    StageTimer& operator=(const StageTimer&) = delete;

private:
    RunManifest& manifest_;
    std::string stage_;
    std::chrono::steady_clock::time_point start_;
};

}  // namespace dlcox
