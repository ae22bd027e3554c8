#pragma once

#include "saten/layer.hpp"
#include "saten/tensor.hpp"

#include <filesystem>
#include <map>
#include <string>

namespace saten {

/// On-disk artifact: a directory holding manifest.json plus a single
/// blob.bin of little-endian fp32 values, concatenated in manifest order.
/// Loading widens to double; saving narrows to fp32.
struct Bundle {
    std::map<std::string, DenseTensor> tensors; // passthrough dense tensors
    std::map<std::string, SatenLayer> layers;   // compressed layers
};

void save_bundle(const Bundle& bundle, const std::filesystem::path& dir);
Bundle load_bundle(const std::filesystem::path& dir);

} // namespace saten
