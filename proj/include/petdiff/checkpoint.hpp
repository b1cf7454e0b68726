#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "petdiff/net.hpp"

namespace petdiff {

// Named float32 arrays plus a free-form JSON meta block, stored as a
// single-line JSON header followed by the concatenated LE payloads.
struct Checkpoint {
    nlohmann::json meta;
    std::vector<NamedTensor<float>> arrays;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// Convenience: move a ParamStore in/out of the array list under a name prefix.
void pack_arrays(Checkpoint& ckpt, const ParamStore<float>& p, const std::string& prefix);
void unpack_arrays(const Checkpoint& ckpt, ParamStore<float>& p, const std::string& prefix);

}  // namespace petdiff
