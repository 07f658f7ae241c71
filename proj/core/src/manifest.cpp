#include "xcm/manifest.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace xcm {

using nlohmann::json;

namespace {
std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}
}  // namespace

std::string RunManifest::run_id() const {
    json key;
    key["command"] = command;
    key["seed"] = seed;
    key["params"] = params;
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(key.dump())));
    return buf;
}

std::string persist_run(RunManifest manifest, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    const std::string path = (std::filesystem::path(out_dir) / "manifest.json").string();
    manifest.outputs.push_back("manifest.json");

    json doc;
    doc["run_id"] = manifest.run_id();
    doc["command"] = manifest.command;
    doc["seed"] = manifest.seed;
    doc["threads"] = manifest.threads;
    doc["params"] = manifest.params;
    doc["metrics"] = manifest.metrics;
    doc["outputs"] = manifest.outputs;

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write manifest: " + path);
    f << doc.dump(2) << "\n";
    if (!f) throw std::runtime_error("write failed: " + path);
    return path;
}

}  // namespace xcm
