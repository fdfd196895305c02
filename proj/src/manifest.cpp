#include "dlcox/manifest.hpp"

#include "dlcox/error.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <fstream>
#include <memory>

namespace dlcox {

const char* library_version() { return "0.1.0"; }

namespace {

struct DigestCtx {
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx{EVP_MD_CTX_new(), &EVP_MD_CTX_free};

    DigestCtx() {
        if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
            throw std::runtime_error("SHA-256 initialisation failed");
        }
    }
    void update(const char* data, std::size_t len) { EVP_DigestUpdate(ctx.get(), data, len); }
    std::string hex() {
        unsigned char md[EVP_MAX_MD_SIZE];
        unsigned int len = 0;
        EVP_DigestFinal_ex(ctx.get(), md, &len);
        std::string out;
        char buf[3];
        for (unsigned int i = 0; i < len; ++i) {
            std::snprintf(buf, sizeof(buf), "%02x", md[i]);
            out += buf;
        }
        return out;
    }
};

}  // namespace

std::string sha256_hex(const std::string& bytes) {
    DigestCtx d;
    d.update(bytes.data(), bytes.size());
    return d.hex();
}

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::FileNotFound, "cannot open '" + path.string() + "'");
    DigestCtx d;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof(buf));
        d.update(buf, static_cast<std::size_t>(in.gcount()));
    }
    return d.hex();
}

void RunManifest::add_input(const std::filesystem::path& path) { input_digests[path.string()] = sha256_file(path); }

nlohmann::json RunManifest::to_json() const {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["library_version"] = library_version();
    j["command"] = command;
    j["argv"] = argv;
    j["config"] = config;
    j["seeds"] = seeds;
    j["input_digests"] = input_digests;
    j["manifest_digest"] = digest();
    nlohmann::json t = nlohmann::json::array();
    for (const auto& [stage, secs] : timings) t.push_back({{"stage", stage}, {"seconds", secs}});
    j["timings"] = t;
    return j;
}

std::string RunManifest::digest() const {
    nlohmann::json j;
    j["library_version"] = library_version();
    j["command"] = command;
    j["config"] = config;
    j["seeds"] = seeds;
    j["input_digests"] = input_digests;
    return sha256_hex(j.dump());
}

}  // namespace dlcox
