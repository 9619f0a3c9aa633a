#pragma once

#include <map>
#include <string>

#include <json.hpp>

#include "timeraf/numkit.hpp"

namespace timeraf {

// TSCK container: magic "TSCK", u16 version, length-prefixed JSON header
// (net names, layer shapes, flags, user metadata), parameter matrices as
// little-endian f64 in header order, u64 FNV-1a checksum.
struct Checkpoint {
    std::map<std::string, MlpParams> nets;
    nlohmann::json meta;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace timeraf
