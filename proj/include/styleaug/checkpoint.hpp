#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "styleaug/tensor.hpp"

namespace styleaug {

// Versioned binary container: magic + JSON header (kind, metadata, tensor
// directory) followed by raw little-endian float64 blobs in directory order.
inline constexpr char kCheckpointMagic[8] = {'S', 'A', 'U', 'G', 'C', 'K', 'P', '1'};

void save_checkpoint(const std::filesystem::path& path, const std::string& kind,
                     const nlohmann::json& meta,
                     const std::vector<std::pair<std::string, const Tensor*>>& tensors);

struct LoadedCheckpoint {
    std::string kind;
    nlohmann::json meta;
    std::map<std::string, Tensor> tensors;

    const Tensor& tensor(const std::string& name) const;
};

// Throws StageDependencyError when the file is missing and FormatError on a
// bad magic/version or on kind mismatch.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path,
                                 const std::string& expected_kind = "");

}  // namespace styleaug
