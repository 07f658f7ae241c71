#ifndef XCM_MANIFEST_HPP
#define XCM_MANIFEST_HPP

#include <map>
#include <string>
#include <vector>

namespace xcm {

// Record of one run: everything needed to re-execute it exactly plus the
// files it emitted. The run id is a hash of (command, seed, params), so
// reruns with identical inputs produce identical manifests and different
// seeds produce distinct ids. No wall-clock fields, by design: output
// determinism is part of the CLI contract.
struct RunManifest {
    std::string command;
    std::uint64_t seed = 0;
    int threads = 1;
    std::map<std::string, std::string> params;
    std::map<std::string, double> metrics;
    std::vector<std::string> outputs;

    std::string run_id() const;
};

// Writes <out_dir>/manifest.json (the manifest lists it too) and returns the
// path.
std::string persist_run(RunManifest manifest, const std::string& out_dir);

}  // namespace xcm

#endif
