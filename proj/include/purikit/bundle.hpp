#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace purikit {

// On-disk container for every pipeline artifact: a human-readable JSON
// manifest plus named little-endian scalar arrays. Round trips are
// bit-exact; the manifest declares the shape of every payload array and
// disagreements are load-time errors.
//
// File layout:
//   magic "PKIT" | version u32 | manifest length u64 | manifest bytes |
//   per array: name length u32, name, dtype tag u32, rank u32,
//              dims u64..., byte length u64, raw bytes |
//   CRC-32 u32 over the payload region.
class ArtifactBundle {
public:
    enum class DType : std::uint32_t { F64 = 0, F32 = 1, I64 = 2, I32 = 3 };

    using Payload = std::variant<std::vector<double>, std::vector<float>,
                                 std::vector<std::int64_t>, std::vector<std::int32_t>>;

    struct Entry {
        std::string name;
        DType dtype;
        std::vector<std::uint64_t> shape;
        Payload payload;
    };

    nlohmann::json& manifest() { return manifest_; }
    const nlohmann::json& manifest() const { return manifest_; }

    void put_f64(const std::string& name, std::vector<std::uint64_t> shape, std::vector<double> data);
    void put_f32(const std::string& name, std::vector<std::uint64_t> shape, std::vector<float> data);
    void put_i64(const std::string& name, std::vector<std::uint64_t> shape, std::vector<std::int64_t> data);
    void put_i32(const std::string& name, std::vector<std::uint64_t> shape, std::vector<std::int32_t> data);

    bool has(const std::string& name) const;
    const std::vector<double>& f64(const std::string& name) const;
    const std::vector<float>& f32(const std::string& name) const;
    const std::vector<std::int64_t>& i64(const std::string& name) const;
    const std::vector<std::int32_t>& i32(const std::string& name) const;
    const std::vector<std::uint64_t>& shape(const std::string& name) const;
    DType dtype(const std::string& name) const;

    // Entries in insertion order; the file layout follows this order.
    const std::vector<Entry>& entries() const { return entries_; }
    std::size_t array_count() const { return entries_.size(); }

    static const char* dtype_name(DType d);
    static std::size_t dtype_size(DType d);

private:
    const Entry& find(const std::string& name) const;
    void insert(Entry e);

    nlohmann::json manifest_ = nlohmann::json::object();
    std::vector<Entry> entries_;
};

void save_bundle(const ArtifactBundle& bundle, const std::filesystem::path& path);
ArtifactBundle load_bundle(const std::filesystem::path& path);

std::uint32_t crc32(const std::uint8_t* data, std::size_t len, std::uint32_t seed = 0);

}  // namespace purikit
