#include "saten/bundle.hpp"

#include "saten/errors.hpp"

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <utility>
#include <vector>

namespace saten {

namespace {

using nlohmann::json;

constexpr const char* kManifestName = "manifest.json";
constexpr const char* kBlobName = "blob.bin";

std::string hex_encode(const std::vector<std::uint8_t>& bytes) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (std::uint8_t b : bytes) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0xf]);
    }
    return out;
}

std::vector<std::uint8_t> hex_decode(const std::string& s) {
    auto nib = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        return -1;
    };
    if (s.size() % 2 != 0) throw FormatError("odd-length hex payload");
    std::vector<std::uint8_t> out(s.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const int hi = nib(s[2 * i]);
        const int lo = nib(s[2 * i + 1]);
        if (hi < 0 || lo < 0) throw FormatError("invalid hex payload");
        out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
    }
    return out;
}

// 2-bit in-group indices, four per byte, low bits first
std::vector<std::uint8_t> pack_two_bit(const std::vector<std::uint8_t>& vals) {
    std::vector<std::uint8_t> out((vals.size() + 3) / 4, 0);
    for (std::size_t i = 0; i < vals.size(); ++i)
        out[i / 4] |= static_cast<std::uint8_t>((vals[i] & 0x3) << ((i % 4) * 2));
    return out;
}

std::vector<std::uint8_t> unpack_two_bit(const std::vector<std::uint8_t>& packed,
                                         std::size_t count) {
    std::vector<std::uint8_t> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        if (i / 4 >= packed.size()) throw FormatError("truncated 2:4 index payload");
        out[i] = (packed[i / 4] >> ((i % 4) * 2)) & 0x3;
    }
    return out;
}

struct BlobRecord {
    std::string name;
    Shape shape;
    const std::vector<double>* data;
};

json residual_meta(const SparseResidual& e) {
    json j;
    j["n_rows"] = e.n_rows();
    j["n_cols"] = e.n_cols();
    switch (e.format()) {
        case SparseFormat::coordinate: {
            j["format"] = "coordinate";
            std::vector<std::int64_t> rows, cols;
            rows.reserve(e.coo_entries().size());
            cols.reserve(e.coo_entries().size());
            for (const auto& en : e.coo_entries()) {
                rows.push_back(en.row);
                cols.push_back(en.col);
            }
            j["rows"] = rows;
            j["cols"] = cols;
            break;
        }
        case SparseFormat::two_four:
            j["format"] = "two_four";
            j["packed_indices"] = hex_encode(pack_two_bit(e.tf_group_indices()));
            j["count"] = e.tf_group_indices().size();
            break;
        case SparseFormat::row_list:
            j["format"] = "row_list";
            j["rows"] = e.row_indices();
            break;
    }
    return j;
}

SparseResidual residual_from_meta(const json& j, const std::vector<double>& values,
                                  const std::string& layer_name) {
    const std::int64_t n = j.at("n_rows").get<std::int64_t>();
    const std::int64_t m = j.at("n_cols").get<std::int64_t>();
    const std::string format = j.at("format").get<std::string>();
    try {
        if (format == "coordinate") {
            const auto rows = j.at("rows").get<std::vector<std::int64_t>>();
            const auto cols = j.at("cols").get<std::vector<std::int64_t>>();
            if (rows.size() != values.size() || cols.size() != values.size())
                throw FormatError("coordinate index/value count mismatch");
            std::vector<SparseResidual::CooEntry> entries(rows.size());
            for (std::size_t i = 0; i < rows.size(); ++i)
                entries[i] = {rows[i], cols[i], values[i]};
            return SparseResidual::coordinate(n, m, std::move(entries));
        }
        if (format == "two_four") {
            const auto count = j.at("count").get<std::size_t>();
            if (count != values.size())
                throw FormatError("two_four index/value count mismatch");
            auto idx = unpack_two_bit(hex_decode(j.at("packed_indices").get<std::string>()),
                                      count);
            return SparseResidual::two_four(n, m, values, std::move(idx));
        }
        if (format == "row_list") {
            const auto rows = j.at("rows").get<std::vector<std::int64_t>>();
            return SparseResidual::row_list(n, m, rows, values);
        }
    } catch (const ShapeError& e) {
        throw FormatError("layer '" + layer_name + "': invalid residual payload: " + e.what());
    }
    throw FormatError("layer '" + layer_name + "': unknown residual format '" + format + "'");
}

} // namespace

void save_bundle(const Bundle& bundle, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);

    // assemble blob records: passthrough tensors, then layer payloads,
    // globally sorted by name (std::map iteration order keeps this stable)
    std::map<std::string, std::pair<Shape, const std::vector<double>*>> records;
    std::vector<DenseTensor> owned; // keeps layer value vectors alive
    owned.reserve(bundle.layers.size());
    for (const auto& [name, tensor] : bundle.tensors)
        records[name] = {tensor.shape(), &tensor.data()};

    json layers_meta = json::object();
    for (const auto& [name, layer] : bundle.layers) {
        json meta;
        meta["epsilon"] = layer.epsilon();
        meta["pattern"] = pattern_name(layer.pattern());
        meta["input_factors"] = layer.fold_plan().input_factors;
        meta["output_factors"] = layer.fold_plan().output_factors;
        if (!layer.fold_fallback().empty()) meta["fold_fallback"] = layer.fold_fallback();
        meta["ranks"] = layer.tt().ranks();
        meta["residual"] = residual_meta(layer.residual());
        layers_meta[name] = std::move(meta);

        const auto& cores = layer.tt().cores();
        for (std::size_t c = 0; c < cores.size(); ++c)
            records[name + "/core" + std::to_string(c)] = {cores[c].shape(), &cores[c].data()};
        std::vector<double> vals = layer.residual().values();
        if (!vals.empty()) {
            owned.emplace_back(Shape{static_cast<std::int64_t>(vals.size())}, std::move(vals));
            records[name + "/residual_values"] = {owned.back().shape(), &owned.back().data()};
        }
    }

    json tensors_meta = json::array();
    std::vector<float> blob;
    for (const auto& [name, rec] : records) {
        json t;
        t["name"] = name;
        t["dtype"] = "f32";
        t["shape"] = rec.first;
        t["offset"] = blob.size() * sizeof(float);
        tensors_meta.push_back(std::move(t));
        for (double v : *rec.second) blob.push_back(static_cast<float>(v));
    }

    json manifest;
    manifest["schema"] = 1;
    manifest["blob_bytes"] = blob.size() * sizeof(float);
    manifest["tensors"] = std::move(tensors_meta);
    manifest["layers"] = std::move(layers_meta);

    {
        std::ofstream out(dir / kManifestName, std::ios::trunc);
        if (!out) throw FormatError("cannot write " + (dir / kManifestName).string());
        out << manifest.dump(2) << "\n";
    }
    {
        std::ofstream out(dir / kBlobName, std::ios::binary | std::ios::trunc);
        if (!out) throw FormatError("cannot write " + (dir / kBlobName).string());
        out.write(reinterpret_cast<const char*>(blob.data()),
                  static_cast<std::streamsize>(blob.size() * sizeof(float)));
    }
}

namespace {
Bundle load_bundle_impl(const std::filesystem::path& dir);
} // namespace

Bundle load_bundle(const std::filesystem::path& dir) {
    try {
        return load_bundle_impl(dir);
    } catch (const json::exception& e) {
        throw FormatError("malformed manifest in " + dir.string() + ": " + e.what());
    }
}

namespace {

Bundle load_bundle_impl(const std::filesystem::path& dir) {
    json manifest;
    {
        std::ifstream in(dir / kManifestName);
        if (!in) throw FormatError("cannot open " + (dir / kManifestName).string());
        try {
            in >> manifest;
        } catch (const json::exception& e) {
            throw FormatError("malformed manifest: " + std::string(e.what()));
        }
    }
    if (!manifest.contains("schema") || manifest["schema"].get<int>() != 1)
        throw FormatError("unsupported manifest schema");

    std::vector<float> blob;
    {
        std::ifstream in(dir / kBlobName, std::ios::binary | std::ios::ate);
        if (!in) throw FormatError("cannot open " + (dir / kBlobName).string());
        const auto bytes = static_cast<std::size_t>(in.tellg());
        if (bytes % sizeof(float) != 0) throw FormatError("blob length is not a multiple of 4");
        blob.resize(bytes / sizeof(float));
        in.seekg(0);
        in.read(reinterpret_cast<char*>(blob.data()), static_cast<std::streamsize>(bytes));
        if (!in) throw FormatError("short read on blob");
    }

    std::map<std::string, DenseTensor> all;
    std::int64_t expected_offset = 0;
    for (const auto& t : manifest.at("tensors")) {
        const auto name = t.at("name").get<std::string>();
        const auto shape = t.at("shape").get<Shape>();
        const auto offset = t.at("offset").get<std::int64_t>();
        if (t.at("dtype").get<std::string>() != "f32")
            throw FormatError("tensor '" + name + "': unsupported dtype");
        if (offset != expected_offset)
            throw FormatError("tensor '" + name + "': offset " + std::to_string(offset) +
                              " overlaps or leaves a gap (expected " +
                              std::to_string(expected_offset) + ")");
        const std::int64_t count = shape_numel(shape);
        if (offset % 4 != 0 || (offset / 4 + count) > static_cast<std::int64_t>(blob.size()))
            throw FormatError("tensor '" + name + "': blob truncated (needs " +
                              std::to_string(count) + " floats at offset " +
                              std::to_string(offset) + ")");
        std::vector<double> data(static_cast<std::size_t>(count));
        for (std::int64_t i = 0; i < count; ++i)
            data[static_cast<std::size_t>(i)] =
                static_cast<double>(blob[static_cast<std::size_t>(offset / 4 + i)]);
        all.emplace(name, DenseTensor(shape, std::move(data)));
        expected_offset = offset + count * 4;
    }
    if (expected_offset != static_cast<std::int64_t>(blob.size() * 4))
        throw FormatError("blob holds trailing bytes not covered by the manifest");

    Bundle bundle;
    const json layers_meta = manifest.value("layers", json::object());
    for (const auto& [name, meta] : layers_meta.items()) {
        FoldPlan plan;
        plan.input_factors = meta.at("input_factors").get<std::vector<std::int64_t>>();
        plan.output_factors = meta.at("output_factors").get<std::vector<std::int64_t>>();

        std::vector<DenseTensor> cores;
        for (std::size_t c = 0;; ++c) {
            auto it = all.find(name + "/core" + std::to_string(c));
            if (it == all.end()) break;
            cores.push_back(std::move(it->second));
            all.erase(it);
        }
        if (cores.empty()) throw FormatError("layer '" + name + "': missing cores");

        std::vector<double> values;
        if (auto it = all.find(name + "/residual_values"); it != all.end()) {
            values = std::move(it->second.data());
            all.erase(it);
        }
        SparseResidual residual = residual_from_meta(meta.at("residual"), values, name);

        try {
            bundle.layers.emplace(
                name, SatenLayer(std::move(plan), TTRepresentation(std::move(cores)),
                                 std::move(residual), meta.at("epsilon").get<double>(),
                                 pattern_from_name(meta.at("pattern").get<std::string>()),
                                 meta.value("fold_fallback", std::string{})));
        } catch (const ShapeError& e) {
            throw FormatError("layer '" + name + "': " + e.what());
        }
    }
    bundle.tensors = std::move(all);
    return bundle;
}

} // namespace

} // namespace saten
